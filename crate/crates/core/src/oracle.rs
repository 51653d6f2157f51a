//! Mock aggregator-style data feeds with monotone round ids and at most one
//! round per slot. Answers are signed 8-decimal fixed point, following the
//! aggregator convention; the market converts to 6-decimal currency.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ledger::call::CallError;
use crate::ledger::gas::{Event, Meter};
use crate::profile::TokenId;
use crate::state::World;

/// Feed identity: the exogenous price series, or the delivered-energy
/// reading of one producer token.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum FeedId {
    Price,
    Delivered(TokenId),
}

impl FeedId {
    fn key(&self) -> String {
        match self {
            FeedId::Price => "oracle/price".to_string(),
            FeedId::Delivered(token) => format!("oracle/delivered/{}", token.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedRound {
    pub round_id: u64,
    /// Signed fixed point, 8 decimals.
    pub answer: i64,
    pub slot: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Feed {
    pub rounds: BTreeMap<u64, FeedRound>,
    pub last_round_id: u64,
}

pub fn push_round(
    w: &mut World,
    m: &mut Meter,
    feed_id: FeedId,
    slot: u64,
    answer: i64,
) -> Result<u64, CallError> {
    let feed = w.feeds.entry(feed_id).or_default();
    m.read();
    if feed.rounds.contains_key(&slot) {
        return Err(CallError::DuplicateRound);
    }
    feed.last_round_id += 1;
    let round_id = feed.last_round_id;
    feed.rounds.insert(
        slot,
        FeedRound {
            round_id,
            answer,
            slot,
        },
    );
    m.write(w.touch(feed_id.key()));
    m.write(w.touch(format!("{}/round/{slot}", feed_id.key())));
    m.emit(Event::new(
        "RoundPushed",
        json!({ "feed": feed_id, "round_id": round_id, "slot": slot, "answer": answer }),
    ));
    Ok(round_id)
}

/// Latest round of a feed, by highest round id.
pub fn latest(w: &World, feed_id: FeedId) -> Option<FeedRound> {
    let feed = w.feeds.get(&feed_id)?;
    feed.rounds
        .values()
        .max_by_key(|r| r.round_id)
        .copied()
}

pub fn at_slot(w: &World, feed_id: FeedId, slot: u64) -> Option<FeedRound> {
    w.feeds.get(&feed_id)?.rounds.get(&slot).copied()
}
