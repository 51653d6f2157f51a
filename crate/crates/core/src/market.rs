//! The EnergyMarket contract: buffers processed commitments, purges the
//! expired ones, matches production pro-rata against the grid consumer and
//! settles payments and collateral forfeits from oracle data.
//!
//! A slot's totals are frozen when its settlement begins, so per-entry
//! settlement calls stay order-independent and O(1) in gas.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::fixed::{payment, prorate, scale_milli, Currency, Energy};
use crate::ledger::call::CallError;
use crate::ledger::gas::{Event, Meter};
use crate::oracle::{self, FeedId};
use crate::pool;
use crate::profile::{CommitmentKind, CommitmentStatus, TokenId};
use crate::state::{balance_key, commitment_key, profile_key, World};

pub const BUFFER_KEY: &str = "market/buffer";
pub const CLOCK_KEY: &str = "market/clock";

fn freeze_key(slot: u64) -> String {
    format!("market/settle/{slot}")
}

/// One buffered, processed, unsettled commitment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BufferEntry {
    pub token: TokenId,
    pub commitment_id: u64,
    pub kind: CommitmentKind,
    pub energy: Energy,
    pub slot: u64,
}

/// Totals captured when settlement of a slot starts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotFreeze {
    pub production: Energy,
    pub consumption: Energy,
    pub buyer: TokenId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettlementRecord {
    pub slot: u64,
    pub seller: TokenId,
    pub buyer: TokenId,
    pub matched_energy: Energy,
    pub unit_price: Currency,
    pub payment: Currency,
    pub delivered_energy: Energy,
    pub forfeit: Currency,
}

/// Pool-side hook appending an ingested commitment to the buffer.
pub(crate) fn trigger_from_pool(
    w: &mut World,
    m: &mut Meter,
    token: TokenId,
    commitment_id: u64,
    kind: CommitmentKind,
    energy: Energy,
    slot: u64,
) {
    w.market.buffer.push(BufferEntry {
        token,
        commitment_id,
        kind,
        energy,
        slot,
    });
    m.write(w.touch(BUFFER_KEY.to_string()));
    m.emit(Event::new(
        "MarketBuffered",
        json!({ "token": token.0, "id": commitment_id, "slot": slot }),
    ));
}

/// Advances the market clock and expires buffered entries whose slot passed.
pub fn purge_expired(w: &mut World, m: &mut Meter, current_slot: u64) -> Result<usize, CallError> {
    if current_slot > w.current_slot {
        w.current_slot = current_slot;
    }
    m.write(w.touch(CLOCK_KEY.to_string()));
    let cutoff = w.current_slot;

    let expired: Vec<BufferEntry> = w
        .market
        .buffer
        .iter()
        .filter(|e| e.slot < cutoff)
        .cloned()
        .collect();
    if !expired.is_empty() {
        w.market.buffer.retain(|e| e.slot >= cutoff);
        m.write(w.touch(BUFFER_KEY.to_string()));
    }
    for entry in &expired {
        pool::on_expired(w, m, entry.token, entry.commitment_id)?;
        let profile = w.profiles.get_mut(&entry.token).expect("buffered token");
        let c = profile
            .commitment_mut(entry.commitment_id)
            .expect("buffered commitment");
        c.status = CommitmentStatus::Expired;
        m.write(w.touch(commitment_key(entry.token, entry.commitment_id)));
    }
    // Stale settlement freezes from purged slots carry no further meaning.
    w.market.freezes.retain(|&slot, _| slot >= cutoff);
    m.emit(Event::new(
        "BufferPurged",
        json!({ "current_slot": cutoff, "removed": expired.len() }),
    ));
    Ok(expired.len())
}

fn ensure_freeze(w: &mut World, m: &mut Meter, slot: u64) -> Result<SlotFreeze, CallError> {
    if let Some(f) = w.market.freezes.get(&slot) {
        m.read();
        return Ok(*f);
    }
    m.read();
    let mut production = Energy::ZERO;
    let mut consumption = Energy::ZERO;
    let mut buyer = None;
    for e in &w.market.buffer {
        if e.slot != slot {
            continue;
        }
        match e.kind {
            CommitmentKind::Production => production += e.energy,
            CommitmentKind::Consumption => {
                consumption += e.energy;
                if buyer.is_none() {
                    buyer = Some(e.token);
                }
            }
        }
    }
    let buyer = buyer.ok_or(CallError::NoConsumer)?;
    let freeze = SlotFreeze {
        production,
        consumption,
        buyer,
    };
    w.market.freezes.insert(slot, freeze);
    m.write(w.touch(freeze_key(slot)));
    Ok(freeze)
}

/// Settles the next unsettled production entry of `slot`.
pub fn settle_entry(
    w: &mut World,
    m: &mut Meter,
    slot: u64,
) -> Result<SettlementRecord, CallError> {
    if slot > w.current_slot {
        return Err(CallError::SlotNotElapsed);
    }
    let freeze = ensure_freeze(w, m, slot)?;

    m.read();
    let price = oracle::at_slot(w, FeedId::Price, slot)
        .map(|r| crate::fixed::oracle_to_currency(r.answer))
        .ok_or(CallError::OracleUnavailable)?;

    m.read();
    let idx = w
        .market
        .buffer
        .iter()
        .position(|e| e.slot == slot && e.kind == CommitmentKind::Production)
        .ok_or(CallError::NothingToSettle)?;
    let entry = w.market.buffer[idx].clone();

    m.read();
    let delivered = oracle::at_slot(w, FeedId::Delivered(entry.token), slot)
        .map(|r| Energy(crate::fixed::div_round_half_even(r.answer as i128, 100_000) as i64))
        .ok_or(CallError::OracleUnavailable)?;

    let matched = prorate(entry.energy, freeze.production, freeze.consumption);
    let pay = payment(matched, price);

    m.read();
    let buyer_profile = w
        .profiles
        .get(&freeze.buyer)
        .ok_or(CallError::UnknownToken)?;
    let buyer_owner = buyer_profile.owner;
    let seller_owner = w.profiles.get(&entry.token).expect("buffered token").owner;

    m.read();
    if w.balance(buyer_owner) < pay {
        return Err(CallError::InsufficientBalance);
    }
    *w.balance_mut(buyer_owner) -= pay;
    *w.balance_mut(seller_owner) += pay;
    m.write(w.touch(balance_key(buyer_owner)));
    m.write(w.touch(balance_key(seller_owner)));

    // Forfeiture applies only to under-delivery, capped by posted collateral.
    let mut forfeit = Currency::ZERO;
    if delivered < matched {
        let shortfall = matched - delivered;
        let raw = scale_milli(payment(shortfall, price), w.params.penalty_factor_milli);
        let seller_profile = w.profiles.get_mut(&entry.token).expect("buffered token");
        forfeit = raw.min(seller_profile.collateral);
        seller_profile.collateral -= forfeit;
        m.write(w.touch(profile_key(entry.token)));
        *w.balance_mut(buyer_owner) += forfeit;
        m.write(w.touch(balance_key(buyer_owner)));
    }

    pool::on_settled(w, m, entry.token, entry.commitment_id)?;
    let profile = w.profiles.get_mut(&entry.token).expect("buffered token");
    let c = profile
        .commitment_mut(entry.commitment_id)
        .expect("buffered commitment");
    c.status = CommitmentStatus::Settled;
    c.delivered = Some(delivered);
    m.write(w.touch(commitment_key(entry.token, entry.commitment_id)));

    w.market.buffer.remove(idx);
    m.write(w.touch(BUFFER_KEY.to_string()));

    let record = SettlementRecord {
        slot,
        seller: entry.token,
        buyer: freeze.buyer,
        matched_energy: matched,
        unit_price: price,
        payment: pay,
        delivered_energy: delivered,
        forfeit,
    };
    w.settlements.push(record.clone());
    m.emit(Event::new("CommitmentSettled", json!(record)));
    Ok(record)
}

/// Finalizes the consumption side once every producer of `slot` is settled.
pub fn complete_slot(w: &mut World, m: &mut Meter, slot: u64) -> Result<(), CallError> {
    if slot > w.current_slot {
        return Err(CallError::SlotNotElapsed);
    }
    m.read();
    if w.market
        .buffer
        .iter()
        .any(|e| e.slot == slot && e.kind == CommitmentKind::Production)
    {
        return Err(CallError::ProducersRemain);
    }
    let consumers: Vec<BufferEntry> = w
        .market
        .buffer
        .iter()
        .filter(|e| e.slot == slot && e.kind == CommitmentKind::Consumption)
        .cloned()
        .collect();
    if consumers.is_empty() {
        return Err(CallError::NoConsumer);
    }
    for entry in &consumers {
        pool::on_settled(w, m, entry.token, entry.commitment_id)?;
        let profile = w.profiles.get_mut(&entry.token).expect("buffered token");
        let c = profile
            .commitment_mut(entry.commitment_id)
            .expect("buffered commitment");
        c.status = CommitmentStatus::Settled;
        c.delivered = Some(entry.energy);
        m.write(w.touch(commitment_key(entry.token, entry.commitment_id)));
    }
    w.market.buffer.retain(|e| e.slot != slot);
    m.write(w.touch(BUFFER_KEY.to_string()));
    if w.market.freezes.remove(&slot).is_some() {
        m.write(w.touch(freeze_key(slot)));
    }
    m.emit(Event::new("SlotCompleted", json!({ "slot": slot })));
    Ok(())
}

/// Settles every production entry of `slot`, then finalizes the consumer.
/// Atomic when dispatched as a single ledger call.
pub fn settle_slot(
    w: &mut World,
    m: &mut Meter,
    slot: u64,
) -> Result<Vec<SettlementRecord>, CallError> {
    if slot > w.current_slot {
        return Err(CallError::SlotNotElapsed);
    }
    let mut records = Vec::new();
    loop {
        match settle_entry(w, m, slot) {
            Ok(record) => records.push(record),
            Err(CallError::NothingToSettle) => break,
            Err(e) => return Err(e),
        }
    }
    complete_slot(w, m, slot)?;
    Ok(records)
}
