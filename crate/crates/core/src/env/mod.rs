//! Household microgrid environment: the 4-component slot state, battery
//! dynamics for the three dispatch actions, per-slot cost and the
//! battery-floor reward.
//!
//! ```
//! use dem_core::env::{step, Action, Battery, EnvState};
//!
//! // 3 kWh of PV against 1 kWh of load: charging stores the 2 kWh surplus.
//! let state = EnvState { pv: 3.0, battery_level: 2.0, temperature: 20.0, load: 1.0 };
//! let battery = Battery::new(10.0, 2.0, 1.0);
//! let out = step(&state, &battery, Action::ChargeSurplus, 0.25, 0.2);
//! assert_eq!(out.next_battery, 4.0);
//! assert_eq!(out.cost, 0.0);
//! ```

pub mod series;

use serde::{Deserialize, Serialize};

/// Slot state: PV yield, battery level, air temperature, load. All energies
/// in kWh for one 1-hour slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub pv: f64,
    pub battery_level: f64,
    pub temperature: f64,
    pub load: f64,
}

impl EnvState {
    pub fn as_vec(&self) -> [f64; 4] {
        [self.pv, self.battery_level, self.temperature, self.load]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub capacity: f64,
    pub level: f64,
    /// One-way conversion efficiency in (0, 1].
    pub efficiency: f64,
}

impl Battery {
    pub fn new(capacity: f64, level: f64, efficiency: f64) -> Battery {
        assert!(capacity > 0.0 && (0.0..=capacity).contains(&level));
        assert!(efficiency > 0.0 && efficiency <= 1.0);
        Battery {
            capacity,
            level,
            efficiency,
        }
    }
}

/// The three dispatch actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    /// Trade the net surplus or deficit directly with the grid.
    TradeDirect,
    /// Route surplus into the battery, selling only what does not fit.
    ChargeSurplus,
    /// Cover a deficit from the battery, buying only the remainder.
    DischargeDeficit,
}

impl Action {
    pub const ALL: [Action; 3] = [
        Action::TradeDirect,
        Action::ChargeSurplus,
        Action::DischargeDeficit,
    ];

    pub fn index(self) -> usize {
        match self {
            Action::TradeDirect => 0,
            Action::ChargeSurplus => 1,
            Action::DischargeDeficit => 2,
        }
    }

    pub fn from_index(i: usize) -> Action {
        Action::ALL[i]
    }
}

/// Result of one slot: net cost to the household plus the energy flows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub cost: f64,
    pub bought: f64,
    pub sold: f64,
    pub next_battery: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub alpha: f64,
    pub floor_fraction: f64,
    /// Keep the cost term with its literal positive sign instead of the
    /// bill-minimizing negative one. Off by default.
    pub literal_cost_sign: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha: 1.0,
            floor_fraction: 0.1,
            literal_cost_sign: false,
        }
    }
}

/// Advances one slot. Degenerate action/net combinations fall back to the
/// direct-trade semantics, so every action is total.
pub fn step(
    state: &EnvState,
    battery: &Battery,
    action: Action,
    buy_price: f64,
    sell_price: f64,
) -> SlotOutcome {
    debug_assert!(buy_price >= 0.0 && sell_price >= 0.0);
    let net = state.pv - state.load;
    let level = battery.level;
    let e = battery.efficiency;

    let (bought, sold, next_level) = match action {
        Action::ChargeSurplus if net > 0.0 => {
            let stored = (net * e).min(battery.capacity - level);
            let drawn = stored / e;
            (0.0, net - drawn, level + stored)
        }
        Action::DischargeDeficit if net < 0.0 => {
            let deficit = -net;
            let withdrawn = level.min(deficit / e);
            let covered = withdrawn * e;
            (deficit - covered, 0.0, level - withdrawn)
        }
        _ => {
            if net >= 0.0 {
                (0.0, net, level)
            } else {
                (-net, 0.0, level)
            }
        }
    };

    SlotOutcome {
        cost: buy_price * bought - sell_price * sold,
        bought,
        sold,
        next_battery: next_level.clamp(0.0, battery.capacity),
    }
}

/// Reward for one slot outcome, with the battery-floor penalty.
pub fn reward(outcome: &SlotOutcome, battery: &Battery, cfg: &RewardConfig) -> f64 {
    let penalty = (-battery.level + cfg.floor_fraction * battery.capacity).max(0.0);
    let cost_term = if cfg.literal_cost_sign {
        outcome.cost
    } else {
        -outcome.cost
    };
    cost_term - cfg.alpha * penalty
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn battery(level: f64) -> Battery {
        Battery::new(10.0, level, 1.0)
    }

    #[test]
    fn charge_surplus_example() {
        // pv=3, load=1, level=2, efficiency=1 -> charged 2, nothing traded
        let s = EnvState {
            pv: 3.0,
            battery_level: 2.0,
            temperature: 20.0,
            load: 1.0,
        };
        let out = step(&s, &battery(2.0), Action::ChargeSurplus, 0.2, 0.2);
        assert_eq!(out.next_battery, 4.0);
        assert_eq!(out.bought, 0.0);
        assert_eq!(out.sold, 0.0);
        assert_eq!(out.cost, 0.0);
    }

    #[test]
    fn discharge_deficit_example() {
        // pv=1, load=3, level=5 -> discharged 2, next level 3, no purchase
        let s = EnvState {
            pv: 1.0,
            battery_level: 5.0,
            temperature: 20.0,
            load: 3.0,
        };
        let out = step(&s, &battery(5.0), Action::DischargeDeficit, 0.2, 0.2);
        assert_eq!(out.next_battery, 3.0);
        assert_eq!(out.bought, 0.0);
        assert_eq!(out.cost, 0.0);
    }

    #[test]
    fn zero_net_is_inert_for_all_actions() {
        let s = EnvState {
            pv: 2.0,
            battery_level: 4.0,
            temperature: 20.0,
            load: 2.0,
        };
        for action in Action::ALL {
            let out = step(&s, &battery(4.0), action, 0.2, 0.2);
            assert_eq!(out.bought, 0.0);
            assert_eq!(out.sold, 0.0);
            assert_eq!(out.cost, 0.0);
            assert_eq!(out.next_battery, 4.0);
        }
    }

    #[test]
    fn reward_examples() {
        let b = Battery::new(10.0, 0.5, 1.0);
        let out = SlotOutcome {
            cost: 0.5,
            bought: 0.0,
            sold: 0.0,
            next_battery: 0.5,
        };
        let cfg = RewardConfig::default();
        // -0.5 - max(0, -0.5 + 1.0) = -1.0
        assert_eq!(reward(&out, &b, &cfg), -1.0);

        // penalty vanishes exactly at the 10% floor
        let at_floor = Battery::new(10.0, 1.0, 1.0);
        assert_eq!(reward(&out, &at_floor, &cfg), -0.5);

        // alpha = 0 disables the penalty entirely
        let cfg0 = RewardConfig {
            alpha: 0.0,
            ..cfg
        };
        assert_eq!(reward(&out, &b, &cfg0), -0.5);
    }

    #[test]
    fn literal_sign_flips_cost_term() {
        let b = Battery::new(10.0, 5.0, 1.0);
        let out = SlotOutcome {
            cost: 0.7,
            bought: 3.5,
            sold: 0.0,
            next_battery: 5.0,
        };
        let cfg = RewardConfig {
            literal_cost_sign: true,
            ..Default::default()
        };
        assert_eq!(reward(&out, &b, &cfg), 0.7);
    }

    proptest! {
        // Battery stays within bounds and per-slot energy is conserved
        // exactly when efficiency is 1.
        #[test]
        fn energy_conservation_unit_efficiency(
            pv in 0.0f64..10.0,
            load in 0.0f64..10.0,
            level in 0.0f64..10.0,
            action_idx in 0usize..3,
        ) {
            let s = EnvState { pv, battery_level: level, temperature: 15.0, load };
            let b = Battery::new(10.0, level, 1.0);
            let out = step(&s, &b, Action::from_index(action_idx), 0.25, 0.2);
            prop_assert!(out.next_battery >= -1e-12 && out.next_battery <= 10.0 + 1e-12);
            prop_assert!(out.bought >= 0.0 && out.sold >= 0.0);
            prop_assert!(out.bought * out.sold == 0.0);
            let charge = out.next_battery - level;
            let balance = pv + out.bought - load - out.sold - charge;
            prop_assert!(balance.abs() < 1e-9);
        }

        // A2 with a deficit and A3 with a surplus behave exactly like A1.
        #[test]
        fn degenerate_actions_fall_back_to_direct_trade(
            pv in 0.0f64..10.0,
            load in 0.0f64..10.0,
            level in 0.0f64..10.0,
        ) {
            let s = EnvState { pv, battery_level: level, temperature: 15.0, load };
            let b = Battery::new(10.0, level, 0.95);
            let direct = step(&s, &b, Action::TradeDirect, 0.25, 0.2);
            if pv <= load {
                prop_assert_eq!(step(&s, &b, Action::ChargeSurplus, 0.25, 0.2), direct);
            }
            if pv >= load {
                prop_assert_eq!(step(&s, &b, Action::DischargeDeficit, 0.25, 0.2), direct);
            }
        }
    }
}
