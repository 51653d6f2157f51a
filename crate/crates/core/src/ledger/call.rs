//! The contract-call descriptor dispatched by the ledger, and the single
//! error type shared by every contract operation. A returned error reverts
//! the whole call.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixed::{Currency, Energy};
use crate::oracle::FeedId;
use crate::profile::{CommitmentKind, TokenId};
use crate::state::AccountId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Call {
    /// Touches no storage; costs exactly `tx_base`.
    Noop,
    Transfer {
        to: AccountId,
        amount: Currency,
    },
    MintProfile {
        collateral: Currency,
    },
    AddCommitment {
        token: TokenId,
        kind: CommitmentKind,
        energy: Energy,
        slot: u64,
    },
    ReplaceCommitment {
        token: TokenId,
        old_id: u64,
        kind: CommitmentKind,
        energy: Energy,
        slot: u64,
    },
    DepositProfile {
        token: TokenId,
    },
    WithdrawProfile {
        token: TokenId,
    },
    DepositCollateral {
        token: TokenId,
        amount: Currency,
    },
    WithdrawCollateral {
        token: TokenId,
        amount: Currency,
    },
    PushRound {
        feed: FeedId,
        slot: u64,
        answer: i64,
    },
    /// Advances the clock and drops buffered entries whose slot has passed.
    PurgeExpired {
        current_slot: u64,
    },
    /// Settles every production entry of a slot and finalizes the consumer.
    SettleSlot {
        slot: u64,
    },
    /// Settles the next unsettled production entry of a slot; gas stays
    /// bounded per call regardless of how many producers the slot has.
    SettleEntry {
        slot: u64,
    },
    /// Finalizes the consumption side of a fully settled slot.
    CompleteSlot {
        slot: u64,
    },
    /// Internal pool-to-market hook; always rejected from the outside.
    MarketTrigger,
}

impl Call {
    pub fn op_name(&self) -> &'static str {
        match self {
            Call::Noop => "noop",
            Call::Transfer { .. } => "transfer",
            Call::MintProfile { .. } => "mint_profile",
            Call::AddCommitment { .. } => "add_commitment",
            Call::ReplaceCommitment { .. } => "replace_commitment",
            Call::DepositProfile { .. } => "deposit_profile",
            Call::WithdrawProfile { .. } => "withdraw_profile",
            Call::DepositCollateral { .. } => "deposit_collateral",
            Call::WithdrawCollateral { .. } => "withdraw_collateral",
            Call::PushRound { .. } => "push_round",
            Call::PurgeExpired { .. } => "purge_expired",
            Call::SettleSlot { .. } => "settle_slot",
            Call::SettleEntry { .. } => "settle_entry",
            Call::CompleteSlot { .. } => "complete_slot",
            Call::MarketTrigger => "market_trigger",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum CallError {
    #[error("unknown account")]
    UnknownAccount,
    #[error("unknown token")]
    UnknownToken,
    #[error("unknown commitment")]
    UnknownCommitment,
    #[error("insufficient balance")]
    InsufficientBalance,
    #[error("caller does not own the profile")]
    NotOwner,
    #[error("profile already holds three active commitments")]
    CommitmentLimit,
    #[error("commitment slot is not in the future")]
    PastSlot,
    #[error("commitment is not finalized")]
    NotFinalized,
    #[error("profile is not deposited in the pool")]
    NotDeposited,
    #[error("profile is already deposited")]
    AlreadyDeposited,
    #[error("profile still has active commitments")]
    ActiveCommitments,
    #[error("insufficient collateral")]
    InsufficientCollateral,
    #[error("collateral is locked by active commitments")]
    CollateralLocked,
    #[error("commitment is not pending")]
    NotPending,
    #[error("commitment is not processed")]
    NotProcessed,
    #[error("duplicate oracle round for slot")]
    DuplicateRound,
    #[error("no oracle data")]
    NoData,
    #[error("oracle round unavailable for slot")]
    OracleUnavailable,
    #[error("no consumption commitment for slot")]
    NoConsumer,
    #[error("caller is not authorized")]
    UnauthorizedCaller,
    #[error("slot has not elapsed yet")]
    SlotNotElapsed,
    #[error("no settleable entry for slot")]
    NothingToSettle,
    #[error("commitment energy must be non-negative")]
    NegativeEnergy,
    #[error("production entries remain unsettled for slot")]
    ProducersRemain,
}
