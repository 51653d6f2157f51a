//! The EnergyPool contract: custody point for deposited profiles and
//! aggregator of committed supply and demand. Ingesting a commitment marks
//! it Processed and pushes it into the market buffer.
//!
//! Totals are maintained incrementally; `recompute_totals` is the shadow
//! recomputation used by audits and tests.

use serde_json::json;

use crate::fixed::Energy;
use crate::ledger::call::CallError;
use crate::ledger::gas::{Event, Meter};
use crate::market;
use crate::profile::{CommitmentKind, CommitmentStatus, TokenId};
use crate::state::{commitment_key, World};

pub const POOL_TOTALS_KEY: &str = "pool/totals";

/// Moves a Pending commitment of a deposited profile into the market.
pub fn ingest(w: &mut World, m: &mut Meter, token: TokenId, id: u64) -> Result<(), CallError> {
    let profile = w.profiles.get(&token).ok_or(CallError::UnknownToken)?;
    m.read();
    if !profile.deposited {
        return Err(CallError::NotDeposited);
    }
    let c = profile.commitment(id).ok_or(CallError::UnknownCommitment)?;
    if c.status != CommitmentStatus::Pending {
        return Err(CallError::NotPending);
    }
    let (kind, energy, slot) = (c.kind, c.energy, c.slot);

    let profile = w.profiles.get_mut(&token).expect("checked");
    profile.commitment_mut(id).expect("checked").status = CommitmentStatus::Processed;
    m.write(w.touch(commitment_key(token, id)));

    match kind {
        CommitmentKind::Production => w.pool_production += energy,
        CommitmentKind::Consumption => w.pool_consumption += energy,
    }
    m.write(w.touch(POOL_TOTALS_KEY.to_string()));
    m.emit(Event::new(
        "CommitmentProcessed",
        json!({ "token": token.0, "id": id, "kind": kind, "energy": energy, "slot": slot }),
    ));
    market::trigger_from_pool(w, m, token, id, kind, energy, slot);
    Ok(())
}

/// Removes a Processed commitment's energy from the totals at settlement.
pub fn on_settled(w: &mut World, m: &mut Meter, token: TokenId, id: u64) -> Result<(), CallError> {
    retire(w, m, token, id)
}

/// Removes a Processed commitment's energy from the totals at expiry.
pub fn on_expired(w: &mut World, m: &mut Meter, token: TokenId, id: u64) -> Result<(), CallError> {
    retire(w, m, token, id)
}

fn retire(w: &mut World, m: &mut Meter, token: TokenId, id: u64) -> Result<(), CallError> {
    let profile = w.profiles.get(&token).ok_or(CallError::UnknownToken)?;
    let c = profile.commitment(id).ok_or(CallError::UnknownCommitment)?;
    if c.status != CommitmentStatus::Processed {
        return Err(CallError::NotProcessed);
    }
    let (kind, energy) = (c.kind, c.energy);
    match kind {
        CommitmentKind::Production => w.pool_production -= energy,
        CommitmentKind::Consumption => w.pool_consumption -= energy,
    }
    m.write(w.touch(POOL_TOTALS_KEY.to_string()));
    debug_assert!(w.pool_production.0 >= 0 && w.pool_consumption.0 >= 0);
    Ok(())
}

/// Brute-force recomputation of the pool totals over the whole registry.
pub fn recompute_totals(w: &World) -> (Energy, Energy) {
    let mut production = Energy::ZERO;
    let mut consumption = Energy::ZERO;
    for profile in w.profiles.values() {
        for c in &profile.commitments {
            if c.status == CommitmentStatus::Processed {
                match c.kind {
                    CommitmentKind::Production => production += c.energy,
                    CommitmentKind::Consumption => consumption += c.energy,
                }
            }
        }
    }
    (production, consumption)
}
