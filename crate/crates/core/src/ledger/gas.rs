//! Deterministic gas model: a schedule of unit costs plus per-call access
//! counting. A call's gas is always `tx_base` plus the metered accesses
//! dotted with the schedule, which keeps the cost replayable and auditable.

use serde::{Deserialize, Serialize};

/// Unit costs for a transaction. Defaults are Ethereum-inspired so that the
/// modeled costs sit comfortably under a 30M-per-block budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasSchedule {
    pub tx_base: u64,
    pub storage_write_new: u64,
    pub storage_write_update: u64,
    pub storage_read: u64,
    pub event_emit: u64,
}

impl Default for GasSchedule {
    fn default() -> Self {
        GasSchedule {
            tx_base: 21_000,
            storage_write_new: 20_000,
            storage_write_update: 5_000,
            storage_read: 2_100,
            event_emit: 1_125,
        }
    }
}

impl GasSchedule {
    /// Schedule invariants: all costs positive, base at least a read.
    pub fn validate(&self) -> bool {
        self.tx_base > 0
            && self.storage_write_new > 0
            && self.storage_write_update > 0
            && self.storage_read > 0
            && self.event_emit > 0
            && self.tx_base >= self.storage_read
    }

    pub fn gas_for(&self, access: &AccessCounts) -> u64 {
        self.tx_base
            + access.reads * self.storage_read
            + access.writes_new * self.storage_write_new
            + access.writes_update * self.storage_write_update
            + access.events * self.event_emit
    }
}

/// Storage/event accesses performed by one call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCounts {
    pub reads: u64,
    pub writes_new: u64,
    pub writes_update: u64,
    pub events: u64,
}

/// An event record emitted by a contract during a call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub name: String,
    pub data: serde_json::Value,
}

impl Event {
    pub fn new(name: &str, data: serde_json::Value) -> Event {
        Event {
            name: name.to_string(),
            data,
        }
    }
}

/// Collects accesses and events while a call executes.
#[derive(Debug, Default)]
pub struct Meter {
    pub access: AccessCounts,
    pub events: Vec<Event>,
}

impl Meter {
    pub fn read(&mut self) {
        self.access.reads += 1;
    }

    /// Records a storage write; `new` distinguishes first-touch slots.
    pub fn write(&mut self, new: bool) {
        if new {
            self.access.writes_new += 1;
        } else {
            self.access.writes_update += 1;
        }
    }

    pub fn emit(&mut self, event: Event) {
        self.access.events += 1;
        self.events.push(event);
    }
}
