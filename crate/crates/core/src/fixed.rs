//! Exact fixed-point arithmetic for money and energy.
//!
//! All on-ledger value is held as integers: currency in micro-units
//! (6 decimals), energy in milli-kWh (3 decimals) and oracle answers in
//! 8-decimal units. Division rounds half to even so that repeated
//! settlement math cannot drift.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, AddAssign, Sub, SubAssign};

pub const CURRENCY_DECIMALS: u32 = 6;
pub const ENERGY_DECIMALS: u32 = 3;
pub const ORACLE_DECIMALS: u32 = 8;

const CURRENCY_SCALE: i64 = 1_000_000;
const ENERGY_SCALE: i64 = 1_000;

/// Currency amount in micro-units (6 decimals).
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Currency(pub i64);

/// Energy amount in milli-kWh (3 decimals).
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Energy(pub i64);

impl Currency {
    pub const ZERO: Currency = Currency(0);

    /// Converts a configuration value in whole currency units.
    pub fn from_units_f64(v: f64) -> Currency {
        Currency((v * CURRENCY_SCALE as f64).round() as i64)
    }

    pub fn to_units_f64(self) -> f64 {
        self.0 as f64 / CURRENCY_SCALE as f64
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Energy {
    pub const ZERO: Energy = Energy(0);

    pub fn from_kwh_f64(v: f64) -> Energy {
        Energy((v * ENERGY_SCALE as f64).round() as i64)
    }

    pub fn to_kwh_f64(self) -> f64 {
        self.0 as f64 / ENERGY_SCALE as f64
    }
}

macro_rules! impl_arith {
    ($ty:ident) => {
        impl Add for $ty {
            type Output = $ty;
            fn add(self, rhs: $ty) -> $ty {
                $ty(self.0.checked_add(rhs.0).expect("fixed-point overflow"))
            }
        }
        impl Sub for $ty {
            type Output = $ty;
            fn sub(self, rhs: $ty) -> $ty {
                $ty(self.0.checked_sub(rhs.0).expect("fixed-point overflow"))
            }
        }
        impl AddAssign for $ty {
            fn add_assign(&mut self, rhs: $ty) {
                *self = *self + rhs;
            }
        }
        impl SubAssign for $ty {
            fn sub_assign(&mut self, rhs: $ty) {
                *self = *self - rhs;
            }
        }
    };
}

impl_arith!(Currency);
impl_arith!(Energy);

impl fmt::Display for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:06}", abs / 1_000_000, abs % 1_000_000)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:03}", abs / 1_000, abs % 1_000)
    }
}

/// Integer division with round-half-to-even, `divisor > 0`.
pub fn div_round_half_even(num: i128, divisor: i128) -> i128 {
    assert!(divisor > 0, "divisor must be positive");
    let quot = num.div_euclid(divisor);
    let rem = num.rem_euclid(divisor); // 0 <= rem < divisor
    let twice = rem * 2;
    if twice > divisor || (twice == divisor && quot % 2 != 0) {
        quot + 1
    } else {
        quot
    }
}

/// Payment for `energy` at `price_per_kwh`, rounded half-even to micro-units.
pub fn payment(energy: Energy, price_per_kwh: Currency) -> Currency {
    let micro = div_round_half_even(energy.0 as i128 * price_per_kwh.0 as i128, 1_000);
    Currency(i64::try_from(micro).expect("payment overflow"))
}

/// Scales a currency amount by a factor expressed in milli (1000 = 1.0).
pub fn scale_milli(amount: Currency, factor_milli: i64) -> Currency {
    let micro = div_round_half_even(amount.0 as i128 * factor_milli as i128, 1_000);
    Currency(i64::try_from(micro).expect("scale overflow"))
}

/// Converts an 8-decimal oracle answer to 6-decimal currency, half-even.
pub fn oracle_to_currency(answer: i64) -> Currency {
    let shifted = div_round_half_even(answer as i128, 100);
    Currency(i64::try_from(shifted).expect("oracle answer overflow"))
}

/// Pro-rata match: `energy * consumption / production` floored to milli-kWh,
/// capped at the committed energy.
pub fn prorate(energy: Energy, production_total: Energy, consumption_total: Energy) -> Energy {
    if production_total.0 <= 0 {
        return Energy::ZERO;
    }
    if consumption_total.0 >= production_total.0 {
        return energy;
    }
    let matched =
        energy.0 as i128 * consumption_total.0 as i128 / production_total.0 as i128;
    Energy(i64::try_from(matched).expect("prorate overflow"))
}
