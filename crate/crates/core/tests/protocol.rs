//! Contract-level behavior of the marketplace: registry lifecycle, pool
//! custody, purge/settlement flows, oracle rounds, gas accounting and
//! call atomicity, exercised through the public ledger API.

use dem_core::fixed::{Currency, Energy};
use dem_core::ledger::{Call, CallError, CallOutput, GasSchedule, Ledger, TxStatus};
use dem_core::oracle::FeedId;
use dem_core::profile::{CommitmentKind, CommitmentStatus, TokenId};
use dem_core::state::{AccountId, ProtocolParams};

const A: AccountId = AccountId(0);
const B: AccountId = AccountId(1);
const GRID: AccountId = AccountId(2);

fn ledger() -> Ledger {
    Ledger::new(
        GasSchedule::default(),
        vec![
            Currency::from_units_f64(100.0),
            Currency::from_units_f64(100.0),
            Currency::from_units_f64(1_000.0),
        ],
        ProtocolParams::default(),
    )
}

fn mint(l: &mut Ledger, who: AccountId, collateral: f64) -> TokenId {
    let (_, out) = l.apply(
        who,
        Call::MintProfile {
            collateral: Currency::from_units_f64(collateral),
        },
    );
    match out.unwrap() {
        CallOutput::Token(t) => t,
        other => panic!("unexpected output {other:?}"),
    }
}

fn commit(
    l: &mut Ledger,
    who: AccountId,
    token: TokenId,
    kind: CommitmentKind,
    kwh: f64,
    slot: u64,
) -> Result<u64, CallError> {
    let (_, out) = l.apply(
        who,
        Call::AddCommitment {
            token,
            kind,
            energy: Energy::from_kwh_f64(kwh),
            slot,
        },
    );
    out.map(|o| match o {
        CallOutput::CommitmentId(id) => id,
        other => panic!("unexpected output {other:?}"),
    })
}

fn deposit(l: &mut Ledger, who: AccountId, token: TokenId) {
    l.apply(who, Call::DepositProfile { token }).1.unwrap();
}

fn push_price(l: &mut Ledger, slot: u64, price: f64) {
    l.apply(
        GRID,
        Call::PushRound {
            feed: FeedId::Price,
            slot,
            answer: (price * 1e8).round() as i64,
        },
    )
    .1
    .unwrap();
}

fn push_delivered(l: &mut Ledger, token: TokenId, slot: u64, kwh: f64) {
    l.apply(
        GRID,
        Call::PushRound {
            feed: FeedId::Delivered(token),
            slot,
            answer: (Energy::from_kwh_f64(kwh).0) * 100_000,
        },
    )
    .1
    .unwrap();
}

fn total_value(l: &Ledger) -> Currency {
    dem_core::runner::total_value(l.world())
}

#[test]
fn first_mint_gets_token_zero_then_sequential_ids() {
    let mut l = ledger();
    assert_eq!(mint(&mut l, A, 10.0), TokenId(0));
    assert_eq!(mint(&mut l, B, 10.0), TokenId(1));
    assert_eq!(mint(&mut l, A, 1.0), TokenId(2));
}

#[test]
fn mint_moves_collateral_out_of_the_balance() {
    let mut l = ledger();
    mint(&mut l, A, 30.0);
    assert_eq!(l.world().balance(A), Currency::from_units_f64(70.0));
    assert_eq!(
        l.world().profiles[&TokenId(0)].collateral,
        Currency::from_units_f64(30.0)
    );
}

#[test]
fn mint_with_insufficient_balance_reverts_and_still_charges_gas() {
    let mut l = ledger();
    let before = l.world().clone();
    let (receipt, out) = l.apply(
        A,
        Call::MintProfile {
            collateral: Currency::from_units_f64(1_000.0),
        },
    );
    assert_eq!(out.unwrap_err(), CallError::InsufficientBalance);
    assert_eq!(receipt.status, TxStatus::Reverted(CallError::InsufficientBalance));
    assert!(receipt.gas_used >= 21_000);
    assert!(receipt.events.is_empty());
    assert_eq!(l.world(), &before);
}

#[test]
fn unknown_account_costs_exactly_the_base_fee() {
    let mut l = ledger();
    let (receipt, out) = l.apply(AccountId(99), Call::Noop);
    assert_eq!(out.unwrap_err(), CallError::UnknownAccount);
    assert_eq!(receipt.gas_used, 21_000);
}

#[test]
fn three_active_commitments_is_a_hard_cap() {
    let mut l = ledger();
    let t = mint(&mut l, A, 10.0);
    for slot in 1..=3 {
        commit(&mut l, A, t, CommitmentKind::Production, 1.0, slot).unwrap();
    }
    assert_eq!(
        commit(&mut l, A, t, CommitmentKind::Production, 1.0, 4).unwrap_err(),
        CallError::CommitmentLimit
    );
    assert_eq!(l.world().profiles[&t].active_count(), 3);
}

#[test]
fn commitments_must_target_a_future_slot() {
    let mut l = ledger();
    let t = mint(&mut l, A, 10.0);
    assert_eq!(
        commit(&mut l, A, t, CommitmentKind::Production, 1.0, 0).unwrap_err(),
        CallError::PastSlot
    );
}

#[test]
fn collateral_must_cover_all_active_commitments() {
    // reference price 0.2, factor 1.0: 1 kWh locks exactly 0.2.
    let mut l = ledger();
    let t = mint(&mut l, A, 0.4);
    commit(&mut l, A, t, CommitmentKind::Production, 1.0, 1).unwrap();
    commit(&mut l, A, t, CommitmentKind::Production, 1.0, 2).unwrap();
    assert_eq!(
        commit(&mut l, A, t, CommitmentKind::Production, 0.001, 3).unwrap_err(),
        CallError::InsufficientCollateral
    );
}

#[test]
fn only_the_owner_touches_a_profile() {
    let mut l = ledger();
    let t = mint(&mut l, A, 10.0);
    assert_eq!(
        commit(&mut l, B, t, CommitmentKind::Production, 1.0, 1).unwrap_err(),
        CallError::NotOwner
    );
    let (_, out) = l.apply(B, Call::DepositProfile { token: t });
    assert_eq!(out.unwrap_err(), CallError::NotOwner);
}

#[test]
fn deposit_ingests_pending_commitments_into_pool_and_buffer() {
    let mut l = ledger();
    let t = mint(&mut l, A, 10.0);
    let id = commit(&mut l, A, t, CommitmentKind::Production, 2.5, 3).unwrap();
    assert_eq!(
        l.world().profiles[&t].commitment(id).unwrap().status,
        CommitmentStatus::Pending
    );
    deposit(&mut l, A, t);
    assert_eq!(
        l.world().profiles[&t].commitment(id).unwrap().status,
        CommitmentStatus::Processed
    );
    assert_eq!(l.world().pool_production, Energy::from_kwh_f64(2.5));
    assert_eq!(l.world().market.buffer.len(), 1);
    // Later commitments of a deposited profile are ingested immediately.
    commit(&mut l, A, t, CommitmentKind::Production, 1.0, 4).unwrap();
    assert_eq!(l.world().pool_production, Energy::from_kwh_f64(3.5));
    assert_eq!(l.world().market.buffer.len(), 2);
}

#[test]
fn pool_totals_always_match_shadow_recomputation() {
    let mut l = ledger();
    let ta = mint(&mut l, A, 10.0);
    let tb = mint(&mut l, B, 10.0);
    deposit(&mut l, A, ta);
    commit(&mut l, A, ta, CommitmentKind::Production, 2.0, 2).unwrap();
    commit(&mut l, B, tb, CommitmentKind::Consumption, 3.0, 2).unwrap();
    deposit(&mut l, B, tb);
    let (p, c) = dem_core::pool::recompute_totals(l.world());
    assert_eq!(l.world().pool_production, p);
    assert_eq!(l.world().pool_consumption, c);
    assert_eq!(p, Energy::from_kwh_f64(2.0));
    assert_eq!(c, Energy::from_kwh_f64(3.0));
}

#[test]
fn withdraw_profile_requires_no_active_commitments() {
    let mut l = ledger();
    let t = mint(&mut l, A, 10.0);
    deposit(&mut l, A, t);
    commit(&mut l, A, t, CommitmentKind::Production, 1.0, 5).unwrap();
    let (_, out) = l.apply(A, Call::WithdrawProfile { token: t });
    assert_eq!(out.unwrap_err(), CallError::ActiveCommitments);
    // Expire it, then withdrawal succeeds.
    l.apply(GRID, Call::PurgeExpired { current_slot: 6 }).1.unwrap();
    l.apply(A, Call::WithdrawProfile { token: t }).1.unwrap();
    assert!(!l.world().profiles[&t].deposited);
}

#[test]
fn locked_collateral_cannot_be_withdrawn() {
    let mut l = ledger();
    let t = mint(&mut l, A, 1.0);
    commit(&mut l, A, t, CommitmentKind::Production, 4.0, 2).unwrap(); // locks 0.8
    let (_, out) = l.apply(
        A,
        Call::WithdrawCollateral {
            token: t,
            amount: Currency::from_units_f64(0.5),
        },
    );
    assert_eq!(out.unwrap_err(), CallError::CollateralLocked);
    l.apply(
        A,
        Call::WithdrawCollateral {
            token: t,
            amount: Currency::from_units_f64(0.2),
        },
    )
    .1
    .unwrap();
    assert_eq!(l.world().balance(A), Currency::from_units_f64(99.2));
}

#[test]
fn purge_expires_only_past_slots_and_is_idempotent() {
    let mut l = ledger();
    let t = mint(&mut l, A, 10.0);
    deposit(&mut l, A, t);
    let ids: Vec<u64> = [3u64, 4, 5]
        .iter()
        .map(|&slot| commit(&mut l, A, t, CommitmentKind::Production, 1.0, slot).unwrap())
        .collect();

    let (_, out) = l.apply(GRID, Call::PurgeExpired { current_slot: 4 });
    assert_eq!(out.unwrap(), CallOutput::Purged(1));
    let statuses: Vec<CommitmentStatus> = ids
        .iter()
        .map(|&id| l.world().profiles[&t].commitment(id).unwrap().status)
        .collect();
    assert_eq!(
        statuses,
        vec![
            CommitmentStatus::Expired,
            CommitmentStatus::Processed,
            CommitmentStatus::Processed,
        ]
    );
    assert_eq!(l.world().pool_production, Energy::from_kwh_f64(2.0));

    // Re-purging the same slot removes nothing further.
    let (_, out) = l.apply(GRID, Call::PurgeExpired { current_slot: 4 });
    assert_eq!(out.unwrap(), CallOutput::Purged(0));
    // The market clock never runs backwards.
    l.apply(GRID, Call::PurgeExpired { current_slot: 2 }).1.unwrap();
    assert_eq!(l.world().current_slot, 4);
}

#[test]
fn oracle_round_ids_are_monotone_and_slots_unique() {
    let mut l = ledger();
    let (_, out) = l.apply(
        GRID,
        Call::PushRound {
            feed: FeedId::Price,
            slot: 1,
            answer: 20_000_000,
        },
    );
    assert_eq!(out.unwrap(), CallOutput::RoundId(1));
    let (_, out) = l.apply(
        GRID,
        Call::PushRound {
            feed: FeedId::Price,
            slot: 2,
            answer: 25_000_000,
        },
    );
    assert_eq!(out.unwrap(), CallOutput::RoundId(2));
    let (_, out) = l.apply(
        GRID,
        Call::PushRound {
            feed: FeedId::Price,
            slot: 2,
            answer: 30_000_000,
        },
    );
    assert_eq!(out.unwrap_err(), CallError::DuplicateRound);
    let latest = dem_core::oracle::latest(l.world(), FeedId::Price).unwrap();
    assert_eq!((latest.round_id, latest.slot), (2, 2));
}

#[test]
fn market_trigger_is_internal_only() {
    let mut l = ledger();
    let (_, out) = l.apply(A, Call::MarketTrigger);
    assert_eq!(out.unwrap_err(), CallError::UnauthorizedCaller);
}

/// Sets up one producer (A) and the grid consumer with matching slot-1
/// commitments, deposited, clock advanced, price pushed.
fn settlement_fixture(l: &mut Ledger, produce: f64, consume: f64) -> (TokenId, TokenId) {
    let ta = mint(l, A, 10.0);
    let tg = mint(l, GRID, 100.0);
    commit(l, A, ta, CommitmentKind::Production, produce, 1).unwrap();
    commit(l, GRID, tg, CommitmentKind::Consumption, consume, 1).unwrap();
    deposit(l, A, ta);
    deposit(l, GRID, tg);
    l.apply(GRID, Call::PurgeExpired { current_slot: 1 }).1.unwrap();
    push_price(l, 1, 0.2);
    (ta, tg)
}

#[test]
fn settlement_payment_example_is_exact_and_zero_sum() {
    let mut l = ledger();
    let value_before = total_value(&l);
    let (ta, tg) = settlement_fixture(&mut l, 5.0, 5.0);
    push_delivered(&mut l, ta, 1, 5.0);

    let seller_before = l.world().balance(A);
    let buyer_before = l.world().balance(GRID);
    let (_, out) = l.apply(GRID, Call::SettleSlot { slot: 1 });
    let records = match out.unwrap() {
        CallOutput::Settlements(r) => r,
        other => panic!("unexpected {other:?}"),
    };
    assert_eq!(records.len(), 1);
    let r = &records[0];
    // 5.000 kWh at 0.200000 -> exactly 1.000000, no forfeit.
    assert_eq!(r.payment, Currency::from_units_f64(1.0));
    assert_eq!(r.matched_energy, Energy::from_kwh_f64(5.0));
    assert_eq!(r.forfeit, Currency::ZERO);
    assert_eq!(l.world().balance(A) - seller_before, Currency::from_units_f64(1.0));
    assert_eq!(buyer_before - l.world().balance(GRID), Currency::from_units_f64(1.0));
    assert_eq!(total_value(&l), value_before);

    for token in [ta, tg] {
        let p = &l.world().profiles[&token];
        assert!(p
            .commitments
            .iter()
            .all(|c| c.status == CommitmentStatus::Settled));
    }
    assert!(l.world().market.buffer.is_empty());
}

#[test]
fn pro_rata_matching_splits_scarce_demand() {
    let mut l = ledger();
    let ta = mint(&mut l, A, 10.0);
    let tb = mint(&mut l, B, 10.0);
    let tg = mint(&mut l, GRID, 100.0);
    commit(&mut l, A, ta, CommitmentKind::Production, 3.0, 1).unwrap();
    commit(&mut l, B, tb, CommitmentKind::Production, 1.0, 1).unwrap();
    commit(&mut l, GRID, tg, CommitmentKind::Consumption, 2.0, 1).unwrap();
    for (who, t) in [(A, ta), (B, tb), (GRID, tg)] {
        deposit(&mut l, who, t);
    }
    l.apply(GRID, Call::PurgeExpired { current_slot: 1 }).1.unwrap();
    push_price(&mut l, 1, 0.2);
    push_delivered(&mut l, ta, 1, 3.0);
    push_delivered(&mut l, tb, 1, 1.0);

    let (_, out) = l.apply(GRID, Call::SettleSlot { slot: 1 });
    let records = match out.unwrap() {
        CallOutput::Settlements(r) => r,
        other => panic!("unexpected {other:?}"),
    };
    let matched: Vec<(TokenId, Energy)> =
        records.iter().map(|r| (r.seller, r.matched_energy)).collect();
    assert!(matched.contains(&(ta, Energy(1_500))));
    assert!(matched.contains(&(tb, Energy(500))));
}

#[test]
fn under_delivery_forfeits_collateral_to_the_buyer() {
    let mut l = ledger();
    let value_before = total_value(&l);
    let (ta, _tg) = settlement_fixture(&mut l, 2.0, 2.0);
    push_delivered(&mut l, ta, 1, 1.0); // short by 1 kWh

    let buyer_before = l.world().balance(GRID);
    let collateral_before = l.world().profiles[&ta].collateral;
    let (_, out) = l.apply(GRID, Call::SettleSlot { slot: 1 });
    let records = match out.unwrap() {
        CallOutput::Settlements(r) => r,
        other => panic!("unexpected {other:?}"),
    };
    let r = &records[0];
    // shortfall 1 kWh x 0.2 x penalty 1.0 = 0.200000
    assert_eq!(r.forfeit, Currency::from_units_f64(0.2));
    assert_eq!(
        collateral_before - l.world().profiles[&ta].collateral,
        Currency::from_units_f64(0.2)
    );
    // Buyer paid 0.4 for the match and got 0.2 back as forfeit.
    assert_eq!(
        buyer_before - l.world().balance(GRID),
        Currency::from_units_f64(0.2)
    );
    assert_eq!(total_value(&l), value_before);
}

#[test]
fn forfeit_is_capped_by_posted_collateral() {
    let mut l = ledger();
    let ta = mint(&mut l, A, 0.5);
    let tg = mint(&mut l, GRID, 100.0);
    commit(&mut l, A, ta, CommitmentKind::Production, 2.0, 1).unwrap(); // locks 0.4
    commit(&mut l, GRID, tg, CommitmentKind::Consumption, 2.0, 1).unwrap();
    deposit(&mut l, A, ta);
    deposit(&mut l, GRID, tg);
    l.apply(GRID, Call::PurgeExpired { current_slot: 1 }).1.unwrap();
    push_price(&mut l, 1, 1.0); // raw penalty would be 2.0 > collateral 0.5
    push_delivered(&mut l, ta, 1, 0.0);

    let (_, out) = l.apply(GRID, Call::SettleSlot { slot: 1 });
    let records = match out.unwrap() {
        CallOutput::Settlements(r) => r,
        other => panic!("unexpected {other:?}"),
    };
    assert_eq!(records[0].forfeit, Currency::from_units_f64(0.5));
    assert_eq!(l.world().profiles[&ta].collateral, Currency::ZERO);
}

#[test]
fn settlement_preconditions_are_enforced() {
    let mut l = ledger();
    let (ta, _) = settlement_fixture(&mut l, 2.0, 2.0);
    // Future slot refused.
    let (_, out) = l.apply(GRID, Call::SettleSlot { slot: 2 });
    assert_eq!(out.unwrap_err(), CallError::SlotNotElapsed);
    // Missing delivered round blocks settlement.
    let (_, out) = l.apply(GRID, Call::SettleEntry { slot: 1 });
    assert_eq!(out.unwrap_err(), CallError::OracleUnavailable);
    push_delivered(&mut l, ta, 1, 2.0);
    l.apply(GRID, Call::SettleEntry { slot: 1 }).1.unwrap();
    // No producers left: another entry call reports nothing to settle.
    let (_, out) = l.apply(GRID, Call::SettleEntry { slot: 1 });
    assert_eq!(out.unwrap_err(), CallError::NothingToSettle);
    l.apply(GRID, Call::CompleteSlot { slot: 1 }).1.unwrap();
    // Completing twice: the consumer is gone.
    let (_, out) = l.apply(GRID, Call::CompleteSlot { slot: 1 });
    assert_eq!(out.unwrap_err(), CallError::NoConsumer);
}

#[test]
fn per_entry_settlement_equals_the_atomic_call() {
    let build = || {
        let mut l = ledger();
        let ta = mint(&mut l, A, 10.0);
        let tb = mint(&mut l, B, 10.0);
        let tg = mint(&mut l, GRID, 100.0);
        commit(&mut l, A, ta, CommitmentKind::Production, 3.0, 1).unwrap();
        commit(&mut l, B, tb, CommitmentKind::Production, 1.0, 1).unwrap();
        commit(&mut l, GRID, tg, CommitmentKind::Consumption, 2.0, 1).unwrap();
        for (who, t) in [(A, ta), (B, tb), (GRID, tg)] {
            deposit(&mut l, who, t);
        }
        l.apply(GRID, Call::PurgeExpired { current_slot: 1 }).1.unwrap();
        push_price(&mut l, 1, 0.2);
        push_delivered(&mut l, ta, 1, 3.0);
        push_delivered(&mut l, tb, 1, 1.0);
        l
    };

    let mut atomic = build();
    atomic.apply(GRID, Call::SettleSlot { slot: 1 }).1.unwrap();

    let mut stepped = build();
    stepped.apply(GRID, Call::SettleEntry { slot: 1 }).1.unwrap();
    stepped.apply(GRID, Call::SettleEntry { slot: 1 }).1.unwrap();
    stepped.apply(GRID, Call::CompleteSlot { slot: 1 }).1.unwrap();

    assert_eq!(atomic.world().settlements, stepped.world().settlements);
    assert_eq!(atomic.world().balances, stepped.world().balances);
    assert_eq!(atomic.world().pool_production, stepped.world().pool_production);
}

#[test]
fn failed_settlement_rolls_back_every_side_effect() {
    // Give the buyer too little cash to pay, then watch the call revert.
    let mut l = Ledger::new(
        GasSchedule::default(),
        vec![
            Currency::from_units_f64(100.0),
            Currency::from_units_f64(100.0),
            Currency::from_units_f64(100.5), // grid: all but 0.5 goes to collateral
        ],
        ProtocolParams::default(),
    );
    let ta = mint(&mut l, A, 10.0);
    let tg = mint(&mut l, GRID, 100.0);
    commit(&mut l, A, ta, CommitmentKind::Production, 5.0, 1).unwrap();
    commit(&mut l, GRID, tg, CommitmentKind::Consumption, 5.0, 1).unwrap();
    deposit(&mut l, A, ta);
    deposit(&mut l, GRID, tg);
    l.apply(GRID, Call::PurgeExpired { current_slot: 1 }).1.unwrap();
    push_price(&mut l, 1, 0.2); // payment 1.0 > grid balance 0.5
    push_delivered(&mut l, ta, 1, 5.0);

    let before = l.world().clone();
    let (receipt, out) = l.apply(GRID, Call::SettleEntry { slot: 1 });
    assert_eq!(out.unwrap_err(), CallError::InsufficientBalance);
    assert_eq!(l.world(), &before); // including the freeze written mid-call
    assert!(receipt.gas_used > 21_000);
    assert!(receipt.events.is_empty());
}

#[test]
fn gas_equals_schedule_dot_access_for_every_receipt() {
    let mut l = ledger();
    let (ta, _) = settlement_fixture(&mut l, 2.0, 2.0);
    push_delivered(&mut l, ta, 1, 2.0);
    l.apply(GRID, Call::SettleSlot { slot: 1 }).1.unwrap();
    let schedule = *l.schedule();
    for r in l.receipts() {
        assert_eq!(r.gas_used, schedule.gas_for(&r.access), "op {}", r.op_name);
    }
}

#[test]
fn identical_call_sequences_replay_identically() {
    let run = || {
        let mut l = ledger();
        let (ta, _) = settlement_fixture(&mut l, 2.0, 2.0);
        push_delivered(&mut l, ta, 1, 1.5);
        l.apply(GRID, Call::SettleSlot { slot: 1 }).1.unwrap();
        let mut buf = Vec::new();
        l.export_events_jsonl(&mut buf).unwrap();
        (l.receipts().to_vec(), buf)
    };
    let (r1, e1) = run();
    let (r2, e2) = run();
    assert_eq!(r1, r2);
    assert_eq!(e1, e2);
}
