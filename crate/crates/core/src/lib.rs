//! Deterministic desk-scale simulator of a decentralized energy marketplace:
//! smart-contract state machines over a gas-metered ledger, driven by
//! federated soft actor-critic household agents.
//!
//! The crate splits into three layers:
//!
//! * the **ledger** ([`ledger`], [`state`], [`fixed`]) executes contract
//!   calls atomically against a world state, metering storage accesses with
//!   an EVM-style gas schedule;
//! * the **contracts** ([`profile`], [`pool`], [`market`], [`oracle`])
//!   implement profile NFTs with energy commitments, the aggregation pool,
//!   slot settlement and push-based data feeds;
//! * the **learning stack** ([`env`], [`sac`], [`federation`], [`runner`])
//!   trains one discrete-SAC agent per household and periodically averages
//!   their networks.
//!
//! ```
//! use dem_core::fixed::Currency;
//! use dem_core::ledger::{Call, CallOutput, GasSchedule, Ledger};
//! use dem_core::state::{AccountId, ProtocolParams};
//!
//! let balances = vec![Currency::from_units_f64(100.0); 2];
//! let mut ledger = Ledger::new(GasSchedule::default(), balances, ProtocolParams::default());
//! let (receipt, out) = ledger.apply(
//!     AccountId(0),
//!     Call::MintProfile { collateral: Currency::from_units_f64(10.0) },
//! );
//! assert!(matches!(out, Ok(CallOutput::Token(_))));
//! assert!(receipt.gas_used > 21_000); // tx base plus metered storage writes
//! ```

pub mod env;
pub mod federation;
pub mod fixed;
pub mod ledger;
pub mod market;
pub mod oracle;
pub mod pool;
pub mod profile;
pub mod runner;
pub mod sac;
pub mod state;

pub use fixed::{Currency, Energy};
pub use ledger::{Call, CallError, CallOutput, Ledger, TxReceipt, TxStatus};
pub use state::{AccountId, World};
