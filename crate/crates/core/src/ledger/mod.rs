//! Sequential, deterministic transaction ledger. Every contract interaction
//! goes through [`Ledger::apply`], which snapshots the world, dispatches the
//! call, meters gas from the accesses actually performed, and rolls back all
//! state on error.

pub mod call;
pub mod gas;

use serde::{Deserialize, Serialize};

use crate::fixed::Currency;
use crate::market::{self, SettlementRecord};
use crate::oracle;
use crate::profile::{self, TokenId};
use crate::state::{AccountId, ProtocolParams, World};

pub use call::{Call, CallError};
pub use gas::{AccessCounts, Event, GasSchedule, Meter};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxStatus {
    Ok,
    Reverted(CallError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TxReceipt {
    pub caller: AccountId,
    pub op_name: String,
    pub gas_used: u64,
    pub access: AccessCounts,
    pub status: TxStatus,
    pub events: Vec<Event>,
}

impl TxReceipt {
    pub fn is_ok(&self) -> bool {
        self.status == TxStatus::Ok
    }
}

/// Aggregated gas statistics for one operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasRow {
    pub op: String,
    pub calls: u64,
    pub mean_gas: f64,
    pub max_gas: u64,
}

/// What a successful call produced, for callers that need the value.
#[derive(Clone, Debug, PartialEq)]
pub enum CallOutput {
    None,
    Token(TokenId),
    CommitmentId(u64),
    RoundId(u64),
    Purged(usize),
    Settlements(Vec<SettlementRecord>),
}

pub struct Ledger {
    world: World,
    schedule: GasSchedule,
    receipts: Vec<TxReceipt>,
}

impl Ledger {
    pub fn new(
        schedule: GasSchedule,
        initial_balances: Vec<Currency>,
        params: ProtocolParams,
    ) -> Ledger {
        assert!(schedule.validate(), "invalid gas schedule");
        Ledger {
            world: World::new(initial_balances, params),
            schedule,
            receipts: Vec::new(),
        }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn schedule(&self) -> &GasSchedule {
        &self.schedule
    }

    pub fn receipts(&self) -> &[TxReceipt] {
        &self.receipts
    }

    /// Applies one call atomically and appends its receipt to the log.
    pub fn apply(&mut self, caller: AccountId, call: Call) -> (TxReceipt, Result<CallOutput, CallError>) {
        let op_name = call.op_name().to_string();
        if !self.world.account_exists(caller) {
            let receipt = TxReceipt {
                caller,
                op_name,
                gas_used: self.schedule.tx_base,
                access: AccessCounts::default(),
                status: TxStatus::Reverted(CallError::UnknownAccount),
                events: Vec::new(),
            };
            self.receipts.push(receipt.clone());
            return (receipt, Err(CallError::UnknownAccount));
        }

        let snapshot = self.world.clone();
        let mut meter = Meter::default();
        let result = dispatch(&mut self.world, &mut meter, caller, &call);
        let gas_used = self.schedule.gas_for(&meter.access);
        let receipt = match &result {
            Ok(_) => TxReceipt {
                caller,
                op_name,
                gas_used,
                access: meter.access,
                status: TxStatus::Ok,
                events: meter.events,
            },
            Err(e) => {
                // Roll back every mutation; gas is still charged for the work done.
                self.world = snapshot;
                TxReceipt {
                    caller,
                    op_name,
                    gas_used,
                    access: meter.access,
                    status: TxStatus::Reverted(e.clone()),
                    events: Vec::new(),
                }
            }
        };
        self.receipts.push(receipt.clone());
        (receipt, result)
    }

    /// Per-op mean/max gas over successful receipts, ordered by op name.
    pub fn gas_report(&self, filter: Option<&[&str]>) -> Vec<GasRow> {
        let mut agg: std::collections::BTreeMap<&str, (u64, u64, u64)> =
            std::collections::BTreeMap::new();
        for r in self.receipts.iter().filter(|r| r.is_ok()) {
            if let Some(ops) = filter {
                if !ops.contains(&r.op_name.as_str()) {
                    continue;
                }
            }
            let slot = agg.entry(r.op_name.as_str()).or_insert((0, 0, 0));
            slot.0 += 1;
            slot.1 += r.gas_used;
            slot.2 = slot.2.max(r.gas_used);
        }
        agg.into_iter()
            .map(|(op, (calls, total, max_gas))| GasRow {
                op: op.to_string(),
                calls,
                mean_gas: total as f64 / calls as f64,
                max_gas,
            })
            .collect()
    }

    /// Event log as JSON lines, one receipt per line.
    pub fn export_events_jsonl<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.receipts {
            let line = serde_json::json!({
                "caller": r.caller.0,
                "op_name": r.op_name,
                "gas_used": r.gas_used,
                "status": r.status,
                "events": r.events,
            });
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

fn dispatch(
    w: &mut World,
    m: &mut Meter,
    caller: AccountId,
    call: &Call,
) -> Result<CallOutput, CallError> {
    match call {
        Call::Noop => Ok(CallOutput::None),
        Call::Transfer { to, amount } => {
            transfer(w, m, caller, *to, *amount)?;
            Ok(CallOutput::None)
        }
        Call::MintProfile { collateral } => Ok(CallOutput::Token(profile::mint_profile(
            w, m, caller, *collateral,
        )?)),
        Call::AddCommitment {
            token,
            kind,
            energy,
            slot,
        } => Ok(CallOutput::CommitmentId(profile::add_commitment(
            w, m, caller, *token, *kind, *energy, *slot,
        )?)),
        Call::ReplaceCommitment {
            token,
            old_id,
            kind,
            energy,
            slot,
        } => Ok(CallOutput::CommitmentId(profile::replace_commitment(
            w, m, caller, *token, *old_id, *kind, *energy, *slot,
        )?)),
        Call::DepositProfile { token } => {
            profile::deposit_profile(w, m, caller, *token)?;
            Ok(CallOutput::None)
        }
        Call::WithdrawProfile { token } => {
            profile::withdraw_profile(w, m, caller, *token)?;
            Ok(CallOutput::None)
        }
        Call::DepositCollateral { token, amount } => {
            profile::deposit_collateral(w, m, caller, *token, *amount)?;
            Ok(CallOutput::None)
        }
        Call::WithdrawCollateral { token, amount } => {
            profile::withdraw_collateral(w, m, caller, *token, *amount)?;
            Ok(CallOutput::None)
        }
        Call::PushRound { feed, slot, answer } => Ok(CallOutput::RoundId(oracle::push_round(
            w, m, *feed, *slot, *answer,
        )?)),
        Call::PurgeExpired { current_slot } => Ok(CallOutput::Purged(market::purge_expired(
            w,
            m,
            *current_slot,
        )?)),
        Call::SettleSlot { slot } => Ok(CallOutput::Settlements(market::settle_slot(
            w, m, *slot,
        )?)),
        Call::SettleEntry { slot } => Ok(CallOutput::Settlements(vec![market::settle_entry(
            w, m, *slot,
        )?])),
        Call::CompleteSlot { slot } => {
            market::complete_slot(w, m, *slot)?;
            Ok(CallOutput::None)
        }
        // Only the pool may append to the buffer; external calls are refused.
        Call::MarketTrigger => Err(CallError::UnauthorizedCaller),
    }
}

fn transfer(
    w: &mut World,
    m: &mut Meter,
    from: AccountId,
    to: AccountId,
    amount: Currency,
) -> Result<(), CallError> {
    if !w.account_exists(to) {
        return Err(CallError::UnknownAccount);
    }
    if amount.is_negative() {
        return Err(CallError::InsufficientBalance);
    }
    m.read();
    if w.balance(from) < amount {
        return Err(CallError::InsufficientBalance);
    }
    *w.balance_mut(from) -= amount;
    *w.balance_mut(to) += amount;
    m.write(w.touch(crate::state::balance_key(from)));
    m.write(w.touch(crate::state::balance_key(to)));
    Ok(())
}
