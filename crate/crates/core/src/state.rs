//! Shared marketplace state: account balances, the profile registry, the
//! pool, the market buffer and the oracle feeds. Mutation happens only
//! through [`crate::ledger::Ledger::apply`], which snapshots this struct to
//! guarantee atomic calls.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::fixed::{scale_milli, Currency};
use crate::market::{BufferEntry, SettlementRecord, SlotFreeze};
use crate::oracle::{Feed, FeedId};
use crate::profile::{EnergyProfile, TokenId};

/// Account index on the simulated ledger.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct AccountId(pub u32);

/// Protocol-level knobs used by the contracts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Reference price per kWh used to size commitment collateral.
    pub reference_price: Currency,
    /// Collateral factor in milli (1000 = 1.0).
    pub collateral_factor_milli: i64,
    /// Under-delivery penalty factor in milli (1000 = 1.0).
    pub penalty_factor_milli: i64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            reference_price: Currency::from_units_f64(0.2),
            collateral_factor_milli: 1_000,
            penalty_factor_milli: 1_000,
        }
    }
}

impl ProtocolParams {
    /// Minimum collateral backing one commitment of `energy`.
    pub fn required_collateral(&self, energy: crate::fixed::Energy) -> Currency {
        let at_reference = crate::fixed::payment(energy, self.reference_price);
        scale_milli(at_reference, self.collateral_factor_milli)
    }
}

/// Market-contract state: the buffer of processed commitments plus frozen
/// per-slot totals captured when settlement of a slot begins.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MarketState {
    pub buffer: Vec<BufferEntry>,
    pub freezes: BTreeMap<u64, SlotFreeze>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub current_slot: u64,
    pub balances: Vec<Currency>,
    pub profiles: BTreeMap<TokenId, EnergyProfile>,
    pub next_token: u64,
    pub next_commitment: u64,
    pub pool_production: crate::fixed::Energy,
    pub pool_consumption: crate::fixed::Energy,
    pub market: MarketState,
    pub feeds: BTreeMap<FeedId, Feed>,
    pub params: ProtocolParams,
    pub settlements: Vec<SettlementRecord>,
    touched: BTreeSet<String>,
}

impl World {
    pub fn new(initial_balances: Vec<Currency>, params: ProtocolParams) -> World {
        let mut touched = BTreeSet::new();
        // Genesis funding counts as first touch for balance slots.
        for i in 0..initial_balances.len() {
            touched.insert(balance_key(AccountId(i as u32)));
        }
        World {
            current_slot: 0,
            balances: initial_balances,
            profiles: BTreeMap::new(),
            next_token: 0,
            next_commitment: 0,
            pool_production: crate::fixed::Energy::ZERO,
            pool_consumption: crate::fixed::Energy::ZERO,
            market: MarketState::default(),
            feeds: BTreeMap::new(),
            params,
            settlements: Vec::new(),
            touched,
        }
    }

    pub fn account_exists(&self, id: AccountId) -> bool {
        (id.0 as usize) < self.balances.len()
    }

    pub fn balance(&self, id: AccountId) -> Currency {
        self.balances[id.0 as usize]
    }

    pub fn balance_mut(&mut self, id: AccountId) -> &mut Currency {
        &mut self.balances[id.0 as usize]
    }

    /// Marks a storage key as written; returns true on first touch.
    pub fn touch(&mut self, key: String) -> bool {
        self.touched.insert(key)
    }
}

pub fn balance_key(id: AccountId) -> String {
    format!("balance/{}", id.0)
}

pub fn profile_key(token: TokenId) -> String {
    format!("profile/{}", token.0)
}

pub fn commitment_key(token: TokenId, id: u64) -> String {
    format!("profile/{}/commitment/{id}", token.0)
}
