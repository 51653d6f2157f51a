//! The EnergyProfile contract: per-user NFTs carrying collateral and up to
//! three concurrent energy commitments, with deposit/withdraw custody
//! against the pool.
//!
//! "Concurrent" counts commitments whose status is Pending or Processed;
//! Settled and Expired commitments stay queryable but free their slot.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::fixed::{Currency, Energy};
use crate::ledger::call::CallError;
use crate::ledger::gas::{Event, Meter};
use crate::pool;
use crate::state::{balance_key, commitment_key, profile_key, AccountId, World};

pub const MAX_ACTIVE_COMMITMENTS: usize = 3;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TokenId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommitmentKind {
    Production,
    Consumption,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommitmentStatus {
    Pending,
    Processed,
    Settled,
    Expired,
}

impl CommitmentStatus {
    pub fn is_active(self) -> bool {
        matches!(self, CommitmentStatus::Pending | CommitmentStatus::Processed)
    }

    /// Lifecycle order; transitions must never decrease.
    pub fn rank(self) -> u8 {
        match self {
            CommitmentStatus::Pending => 0,
            CommitmentStatus::Processed => 1,
            CommitmentStatus::Settled => 2,
            CommitmentStatus::Expired => 2,
        }
    }
}

/// One slot-indexed production/consumption pledge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Commitment {
    pub id: u64,
    pub kind: CommitmentKind,
    pub energy: Energy,
    pub slot: u64,
    pub status: CommitmentStatus,
    pub delivered: Option<Energy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyProfile {
    pub token: TokenId,
    pub owner: AccountId,
    pub collateral: Currency,
    pub deposited: bool,
    /// Current commitment list, including settled ones until replaced.
    pub commitments: Vec<Commitment>,
    /// Replaced commitments, retained for post-hoc audits.
    pub history: Vec<Commitment>,
}

impl EnergyProfile {
    pub fn active_count(&self) -> usize {
        self.commitments
            .iter()
            .filter(|c| c.status.is_active())
            .count()
    }

    pub fn commitment(&self, id: u64) -> Option<&Commitment> {
        self.commitments.iter().find(|c| c.id == id)
    }

    pub fn commitment_mut(&mut self, id: u64) -> Option<&mut Commitment> {
        self.commitments.iter_mut().find(|c| c.id == id)
    }

    /// Collateral locked by active commitments under the protocol params.
    pub fn required_locked(&self, params: &crate::state::ProtocolParams) -> Currency {
        let mut total = Currency::ZERO;
        for c in &self.commitments {
            if c.status.is_active() {
                total += params.required_collateral(c.energy);
            }
        }
        total
    }
}

fn profile_checked(w: &World, token: TokenId) -> Result<&EnergyProfile, CallError> {
    w.profiles.get(&token).ok_or(CallError::UnknownToken)
}

fn owner_checked(w: &World, token: TokenId, caller: AccountId) -> Result<(), CallError> {
    let p = profile_checked(w, token)?;
    if p.owner != caller {
        return Err(CallError::NotOwner);
    }
    Ok(())
}

pub fn mint_profile(
    w: &mut World,
    m: &mut Meter,
    caller: AccountId,
    collateral: Currency,
) -> Result<TokenId, CallError> {
    if collateral.is_negative() {
        return Err(CallError::InsufficientBalance);
    }
    m.read();
    if w.balance(caller) < collateral {
        return Err(CallError::InsufficientBalance);
    }
    *w.balance_mut(caller) -= collateral;
    m.write(w.touch(balance_key(caller)));

    let token = TokenId(w.next_token);
    w.next_token += 1;
    m.write(w.touch("registry/next_token".to_string()));

    w.profiles.insert(
        token,
        EnergyProfile {
            token,
            owner: caller,
            collateral,
            deposited: false,
            commitments: Vec::new(),
            history: Vec::new(),
        },
    );
    m.write(w.touch(profile_key(token)));
    m.emit(Event::new(
        "ProfileMinted",
        json!({ "token": token.0, "owner": caller.0, "collateral": collateral }),
    ));
    Ok(token)
}

fn new_commitment(
    w: &mut World,
    m: &mut Meter,
    token: TokenId,
    kind: CommitmentKind,
    energy: Energy,
    slot: u64,
) -> Result<u64, CallError> {
    if energy.0 < 0 {
        return Err(CallError::NegativeEnergy);
    }
    m.read();
    if slot <= w.current_slot {
        return Err(CallError::PastSlot);
    }
    let params = w.params;
    let profile = w.profiles.get_mut(&token).expect("checked");
    if profile.active_count() >= MAX_ACTIVE_COMMITMENTS {
        return Err(CallError::CommitmentLimit);
    }
    let required = profile.required_locked(&params) + params.required_collateral(energy);
    if profile.collateral < required {
        return Err(CallError::InsufficientCollateral);
    }
    let id = w.next_commitment;
    w.next_commitment += 1;
    m.write(w.touch("registry/next_commitment".to_string()));

    let profile = w.profiles.get_mut(&token).expect("checked");
    profile.commitments.push(Commitment {
        id,
        kind,
        energy,
        slot,
        status: CommitmentStatus::Pending,
        delivered: None,
    });
    let deposited = profile.deposited;
    m.write(w.touch(commitment_key(token, id)));
    m.write(w.touch(profile_key(token)));
    m.emit(Event::new(
        "CommitmentCreated",
        json!({ "token": token.0, "id": id, "kind": kind, "energy": energy, "slot": slot }),
    ));
    if deposited {
        pool::ingest(w, m, token, id)?;
    }
    Ok(id)
}

pub fn add_commitment(
    w: &mut World,
    m: &mut Meter,
    caller: AccountId,
    token: TokenId,
    kind: CommitmentKind,
    energy: Energy,
    slot: u64,
) -> Result<u64, CallError> {
    owner_checked(w, token, caller)?;
    new_commitment(w, m, token, kind, energy, slot)
}

pub fn replace_commitment(
    w: &mut World,
    m: &mut Meter,
    caller: AccountId,
    token: TokenId,
    old_id: u64,
    kind: CommitmentKind,
    energy: Energy,
    slot: u64,
) -> Result<u64, CallError> {
    owner_checked(w, token, caller)?;
    {
        let profile = profile_checked(w, token)?;
        if !profile.deposited {
            return Err(CallError::NotDeposited);
        }
        let old = profile
            .commitment(old_id)
            .ok_or(CallError::UnknownCommitment)?;
        if old.status.is_active() {
            return Err(CallError::NotFinalized);
        }
    }
    // Retire the finalized commitment into history, then append the new one.
    let profile = w.profiles.get_mut(&token).expect("checked");
    let idx = profile
        .commitments
        .iter()
        .position(|c| c.id == old_id)
        .expect("checked");
    let old = profile.commitments.remove(idx);
    profile.history.push(old);
    m.write(w.touch(profile_key(token)));
    new_commitment(w, m, token, kind, energy, slot)
}

pub fn deposit_profile(
    w: &mut World,
    m: &mut Meter,
    caller: AccountId,
    token: TokenId,
) -> Result<(), CallError> {
    owner_checked(w, token, caller)?;
    let profile = w.profiles.get_mut(&token).expect("checked");
    if profile.deposited {
        return Err(CallError::AlreadyDeposited);
    }
    profile.deposited = true;
    let pending: Vec<u64> = profile
        .commitments
        .iter()
        .filter(|c| c.status == CommitmentStatus::Pending)
        .map(|c| c.id)
        .collect();
    m.write(w.touch(profile_key(token)));
    m.emit(Event::new(
        "ProfileDeposited",
        json!({ "token": token.0 }),
    ));
    for id in pending {
        pool::ingest(w, m, token, id)?;
    }
    Ok(())
}

pub fn withdraw_profile(
    w: &mut World,
    m: &mut Meter,
    caller: AccountId,
    token: TokenId,
) -> Result<(), CallError> {
    owner_checked(w, token, caller)?;
    let profile = w.profiles.get_mut(&token).expect("checked");
    if !profile.deposited {
        return Err(CallError::NotDeposited);
    }
    if profile.active_count() > 0 {
        return Err(CallError::ActiveCommitments);
    }
    profile.deposited = false;
    m.write(w.touch(profile_key(token)));
    m.emit(Event::new(
        "ProfileWithdrawn",
        json!({ "token": token.0 }),
    ));
    Ok(())
}

pub fn deposit_collateral(
    w: &mut World,
    m: &mut Meter,
    caller: AccountId,
    token: TokenId,
    amount: Currency,
) -> Result<(), CallError> {
    owner_checked(w, token, caller)?;
    if amount.is_negative() {
        return Err(CallError::InsufficientBalance);
    }
    m.read();
    if w.balance(caller) < amount {
        return Err(CallError::InsufficientBalance);
    }
    *w.balance_mut(caller) -= amount;
    m.write(w.touch(balance_key(caller)));
    let profile = w.profiles.get_mut(&token).expect("checked");
    profile.collateral += amount;
    m.write(w.touch(profile_key(token)));
    m.emit(Event::new(
        "CollateralDeposited",
        json!({ "token": token.0, "amount": amount }),
    ));
    Ok(())
}

pub fn withdraw_collateral(
    w: &mut World,
    m: &mut Meter,
    caller: AccountId,
    token: TokenId,
    amount: Currency,
) -> Result<(), CallError> {
    owner_checked(w, token, caller)?;
    if amount.is_negative() {
        return Err(CallError::InsufficientCollateral);
    }
    let params = w.params;
    let profile = w.profiles.get_mut(&token).expect("checked");
    m.read();
    if profile.collateral < amount {
        return Err(CallError::InsufficientCollateral);
    }
    if profile.collateral - amount < profile.required_locked(&params) {
        return Err(CallError::CollateralLocked);
    }
    profile.collateral -= amount;
    m.write(w.touch(profile_key(token)));
    *w.balance_mut(caller) += amount;
    m.write(w.touch(balance_key(caller)));
    m.emit(Event::new(
        "CollateralWithdrawn",
        json!({ "token": token.0, "amount": amount }),
    ));
    Ok(())
}
