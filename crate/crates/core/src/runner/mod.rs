//! Scenario orchestration: wires household agents to the marketplace
//! contracts, runs the gas experiment (2/10/50 users against the main grid)
//! and the federated-vs-local training experiment, and emits all reports.

pub mod config;
pub mod report;

use thiserror::Error;

use crate::env::series::{synth_series, HouseholdSeries, SeriesError, SLOTS_PER_DAY};
use crate::env::{self, Action, Battery, EnvState};
use crate::federation::{self, FederationError};
use crate::fixed::{Currency, Energy};
use crate::ledger::{Call, CallError, CallOutput, Ledger};
use crate::market::SettlementRecord;
use crate::oracle::FeedId;
use crate::profile::{CommitmentKind, TokenId};
use crate::sac::{SacAgent, SelectMode, Transition};
use crate::state::AccountId;

pub use config::{ConfigError, DatasetSpec, DeliveryMode, PriceSpec, ScenarioConfig};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("contract call {op} failed: {source}")]
    Contract { op: String, source: CallError },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Federation(#[from] FederationError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Production energy to commit for the next slot, from the planned action
/// and the persistence forecast. Charging keeps the surplus at home; a
/// planned discharge adds battery energy on top of the forecast surplus.
pub fn commit_bridge(
    action: Action,
    forecast_pv: f64,
    forecast_load: f64,
    planned_discharge: f64,
) -> f64 {
    let surplus = (forecast_pv - forecast_load).max(0.0);
    match action {
        Action::TradeDirect => surplus,
        Action::ChargeSurplus => 0.0,
        Action::DischargeDeficit => surplus + planned_discharge.max(0.0),
    }
}

/// Sum of all account balances and posted collateral: invariant under every
/// marketplace operation except genesis funding.
pub fn total_value(world: &crate::state::World) -> Currency {
    let mut total = Currency::ZERO;
    for b in &world.balances {
        total += *b;
    }
    for p in world.profiles.values() {
        total += p.collateral;
    }
    total
}

pub struct E2eOutcome {
    pub ledger: Ledger,
    pub settlements: Vec<SettlementRecord>,
    /// Pool totals right before each slot settled: (slot, production, consumption).
    pub pool_series: Vec<(u64, Energy, Energy)>,
    pub forfeit_total: Currency,
}

struct E2eSim<'a> {
    cfg: &'a ScenarioConfig,
    ledger: Ledger,
    series: Vec<HouseholdSeries>,
    prices: Vec<f64>,
    /// Profile tokens: one per household, then the grid.
    tokens: Vec<TokenId>,
    /// Most recent commitment id per token, replaced slot over slot.
    last_commitment: Vec<Option<u64>>,
    grid: AccountId,
    prev_matched_kwh: f64,
}

impl<'a> E2eSim<'a> {
    fn apply(&mut self, caller: AccountId, call: Call) -> Result<CallOutput, RunnerError> {
        let op = call.op_name().to_string();
        let (_, out) = self.ledger.apply(caller, call);
        out.map_err(|source| RunnerError::Contract { op, source })
    }

    /// Persistence forecast for a household and 1-based slot: same slot the
    /// previous day, or the config bootstrap on day one.
    fn forecast(&self, household: usize, slot: u64) -> (f64, f64) {
        if slot > SLOTS_PER_DAY as u64 {
            let r = self.series[household].at_slot(slot - SLOTS_PER_DAY as u64);
            (r.pv_kwh, r.load_kwh)
        } else {
            (
                self.cfg.forecast_bootstrap_pv_kwh,
                self.cfg.forecast_bootstrap_load_kwh,
            )
        }
    }

    /// Creates (or replaces) every party's commitment for `slot`.
    fn commit_for_slot(&mut self, slot: u64) -> Result<(), RunnerError> {
        for h in 0..self.cfg.households {
            let (fpv, fload) = self.forecast(h, slot);
            let kwh = commit_bridge(Action::TradeDirect, fpv, fload, 0.0);
            let id = self.place(
                AccountId(h as u32),
                self.tokens[h],
                h,
                CommitmentKind::Production,
                Energy::from_kwh_f64(kwh),
                slot,
            )?;
            self.last_commitment[h] = Some(id);
        }
        let demand = (self.prev_matched_kwh * self.cfg.grid_headroom).max(0.0);
        let grid_idx = self.cfg.households;
        let id = self.place(
            self.grid,
            self.tokens[grid_idx],
            grid_idx,
            CommitmentKind::Consumption,
            Energy::from_kwh_f64(demand),
            slot,
        )?;
        self.last_commitment[grid_idx] = Some(id);
        Ok(())
    }

    fn place(
        &mut self,
        caller: AccountId,
        token: TokenId,
        idx: usize,
        kind: CommitmentKind,
        energy: Energy,
        slot: u64,
    ) -> Result<u64, RunnerError> {
        let call = match self.last_commitment[idx] {
            Some(old_id) => Call::ReplaceCommitment {
                token,
                old_id,
                kind,
                energy,
                slot,
            },
            None => Call::AddCommitment {
                token,
                kind,
                energy,
                slot,
            },
        };
        match self.apply(caller, call)? {
            CallOutput::CommitmentId(id) => Ok(id),
            other => unreachable!("commitment call returned {other:?}"),
        }
    }
}

/// Executes the full registration -> commit -> deposit -> purge -> settle
/// cycle for every slot of the scenario.
pub fn run_e2e(cfg: &ScenarioConfig) -> Result<E2eOutcome, RunnerError> {
    cfg.validate()?;
    let h = cfg.households;
    let grid = AccountId(h as u32);
    let mut balances = vec![Currency::from_units_f64(cfg.household_balance); h];
    balances.push(Currency::from_units_f64(cfg.grid_balance));
    let mut ledger = Ledger::new(cfg.gas, balances, cfg.protocol_params());

    let days = (cfg.slots as usize).div_ceil(SLOTS_PER_DAY);
    let data_seed = cfg.data_seed.unwrap_or(cfg.seed);
    let series = match &cfg.dataset {
        DatasetSpec::Synth { days: cfg_days, .. } => {
            synth_series(data_seed, days.max(*cfg_days), h, &cfg.dataset.synth_params())
        }
        DatasetSpec::Csv { paths } => paths
            .iter()
            .map(|p| crate::env::series::load_series(p))
            .collect::<Result<_, _>>()?,
    };
    let prices = config::price_series(&cfg.price, cfg.slots, data_seed)?;

    // Registration: mint one profile per party and deposit it in the pool.
    let mut tokens = Vec::with_capacity(h + 1);
    for i in 0..=h {
        let caller = AccountId(i as u32);
        let collateral = Currency::from_units_f64(if i < h {
            cfg.household_collateral
        } else {
            cfg.grid_collateral
        });
        let (_, out) = ledger.apply(caller, Call::MintProfile { collateral });
        match out.map_err(|source| RunnerError::Contract {
            op: "mint_profile".into(),
            source,
        })? {
            CallOutput::Token(t) => tokens.push(t),
            other => unreachable!("mint returned {other:?}"),
        }
    }

    let mut sim = E2eSim {
        cfg,
        ledger,
        series,
        prices,
        tokens: tokens.clone(),
        last_commitment: vec![None; h + 1],
        grid,
        prev_matched_kwh: cfg.grid_bootstrap_kwh,
    };

    sim.commit_for_slot(1)?;
    for i in 0..=h {
        let token = sim.tokens[i];
        sim.apply(AccountId(i as u32), Call::DepositProfile { token })?;
    }

    let mut settlements = Vec::new();
    let mut pool_series = Vec::new();
    let mut forfeit_total = Currency::ZERO;

    for t in 1..=cfg.slots {
        sim.apply(grid, Call::PurgeExpired { current_slot: t })?;

        let price = sim.prices[(t - 1) as usize];
        let answer = (price * 1e8).round() as i64;
        sim.apply(
            grid,
            Call::PushRound {
                feed: FeedId::Price,
                slot: t,
                answer,
            },
        )?;
        for hh in 0..h {
            let committed = sim
                .ledger
                .world()
                .market
                .buffer
                .iter()
                .find(|e| e.token == sim.tokens[hh] && e.slot == t)
                .map(|e| e.energy)
                .unwrap_or(Energy::ZERO);
            let delivered = match cfg.delivery {
                DeliveryMode::Honest => committed,
                DeliveryMode::FromSeries => {
                    let r = sim.series[hh].at_slot(t);
                    Energy::from_kwh_f64((r.pv_kwh - r.load_kwh).max(0.0))
                }
            };
            sim.apply(
                grid,
                Call::PushRound {
                    feed: FeedId::Delivered(sim.tokens[hh]),
                    slot: t,
                    answer: delivered.0 * 100_000,
                },
            )?;
        }

        {
            let w = sim.ledger.world();
            pool_series.push((t, w.pool_production, w.pool_consumption));
        }

        let producers = sim
            .ledger
            .world()
            .market
            .buffer
            .iter()
            .filter(|e| e.slot == t && e.kind == CommitmentKind::Production)
            .count();
        let mut matched_kwh = 0.0;
        for _ in 0..producers {
            if let CallOutput::Settlements(records) = sim.apply(grid, Call::SettleEntry { slot: t })?
            {
                for r in records {
                    matched_kwh += r.matched_energy.to_kwh_f64();
                    forfeit_total += r.forfeit;
                    settlements.push(r);
                }
            }
        }
        sim.apply(grid, Call::CompleteSlot { slot: t })?;
        sim.prev_matched_kwh = matched_kwh;

        if t < cfg.slots {
            sim.commit_for_slot(t + 1)?;
        }
    }

    // Tear down custody so the withdraw ops show up in the gas report.
    for i in 0..=h {
        let caller = AccountId(i as u32);
        let token = sim.tokens[i];
        sim.apply(caller, Call::WithdrawProfile { token })?;
        let remaining = sim.ledger.world().profiles[&token].collateral;
        if remaining > Currency::ZERO {
            sim.apply(
                caller,
                Call::WithdrawCollateral {
                    token,
                    amount: remaining,
                },
            )?;
        }
    }

    Ok(E2eOutcome {
        ledger: sim.ledger,
        settlements,
        pool_series,
        forfeit_total,
    })
}

/// One row of the multi-user gas experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct GasUsageRow {
    pub op: String,
    pub users: usize,
    pub mean_gas: f64,
    pub max_gas: u64,
}

/// Runs the end-to-end scenario once per user count and collects per-op gas.
pub fn run_gas_experiment(
    cfg: &ScenarioConfig,
    user_counts: &[usize],
) -> Result<Vec<GasUsageRow>, RunnerError> {
    let mut rows = Vec::new();
    for &users in user_counts {
        let run_cfg = ScenarioConfig {
            households: users,
            dataset: DatasetSpec::Synth {
                days: (cfg.slots as usize).div_ceil(SLOTS_PER_DAY),
                pv_peak_min: None,
                pv_peak_max: None,
            },
            ..cfg.clone()
        };
        let outcome = run_e2e(&run_cfg)?;
        for row in outcome.ledger.gas_report(None) {
            rows.push(GasUsageRow {
                op: row.op,
                users,
                mean_gas: row.mean_gas,
                max_gas: row.max_gas,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainMode {
    Federated,
    Local,
}

impl TrainMode {
    pub fn label(self) -> &'static str {
        match self {
            TrainMode::Federated => "federated",
            TrainMode::Local => "local",
        }
    }
}

/// Per-episode training metrics for one household.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardRow {
    pub episode: usize,
    pub household: usize,
    pub reward: f64,
    pub q_loss: f64,
    pub policy_loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftRow {
    pub episode: usize,
    pub household: usize,
    pub l2_drift: f64,
}

pub struct TrainingOutcome {
    pub rewards: Vec<RewardRow>,
    pub drift: Vec<DriftRow>,
    pub agents: Vec<SacAgent>,
    pub normalizer: Normalizer,
}

/// Per-feature min-max normalizer fitted on the training series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalizer {
    pub min: [f64; 4],
    pub max: [f64; 4],
}

impl Normalizer {
    pub fn fit(series: &[HouseholdSeries], battery: &Battery) -> Normalizer {
        let mut min = [f64::INFINITY; 4];
        let mut max = [f64::NEG_INFINITY; 4];
        for s in series {
            for r in &s.slots {
                for (i, v) in [r.pv_kwh, 0.0, r.temperature_c, r.load_kwh]
                    .into_iter()
                    .enumerate()
                {
                    min[i] = min[i].min(v);
                    max[i] = max[i].max(v);
                }
            }
        }
        min[1] = 0.0;
        max[1] = battery.capacity;
        Normalizer { min, max }
    }

    pub fn apply(&self, state: &EnvState) -> [f64; 4] {
        let raw = state.as_vec();
        std::array::from_fn(|i| {
            let range = self.max[i] - self.min[i];
            if range > 0.0 {
                (raw[i] - self.min[i]) / range
            } else {
                0.0
            }
        })
    }
}

/// Trains one agent per household, one simulated day per episode, with
/// optional federated averaging between episodes.
pub fn run_training(cfg: &ScenarioConfig, mode: TrainMode) -> Result<TrainingOutcome, RunnerError> {
    cfg.validate()?;
    let h = cfg.households;
    let data_seed = cfg.data_seed.unwrap_or(cfg.seed);
    let series = match &cfg.dataset {
        DatasetSpec::Synth { days, .. } => {
            synth_series(data_seed, *days, h, &cfg.dataset.synth_params())
        }
        DatasetSpec::Csv { paths } => paths
            .iter()
            .map(|p| crate::env::series::load_series(p))
            .collect::<Result<_, _>>()?,
    };
    let days = series.iter().map(|s| s.days().max(1)).min().expect("households >= 1");
    let prices = config::price_series(&cfg.price, (days * SLOTS_PER_DAY) as u64, data_seed)?;
    let battery_template = Battery::new(
        cfg.battery.capacity_kwh,
        cfg.battery.initial_level_kwh,
        cfg.battery.efficiency,
    );
    let normalizer = Normalizer::fit(&series, &battery_template);
    let reward_cfg = cfg.reward_config();

    // All agents share one initialization (so their hidden units stay
    // aligned and weight averaging is meaningful) but draw exploration and
    // batch randomness from per-household streams.
    let init = SacAgent::new(cfg.sac.clone(), cfg.seed).export_weights();
    let mut agents: Vec<SacAgent> = (0..h)
        .map(|i| {
            let mut a = SacAgent::new(cfg.sac.clone(), cfg.seed.wrapping_add(1 + i as u64));
            a.import_weights(&init).expect("identical layout");
            a
        })
        .collect();

    let mut rewards = Vec::with_capacity(cfg.episodes * h);
    let mut drift = Vec::new();

    for episode in 0..cfg.episodes {
        let day = episode % days;
        for (hh, agent) in agents.iter_mut().enumerate() {
            let mut battery = battery_template;
            let mut q_loss_sum = 0.0;
            let mut policy_loss_sum = 0.0;
            let mut updates = 0usize;
            for hour in 0..SLOTS_PER_DAY {
                let slot_idx = day * SLOTS_PER_DAY + hour;
                let r = series[hh].slots[slot_idx];
                let state = EnvState {
                    pv: r.pv_kwh,
                    battery_level: battery.level,
                    temperature: r.temperature_c,
                    load: r.load_kwh,
                };
                let obs = normalizer.apply(&state);
                let action = agent
                    .select_action(&obs, SelectMode::Stochastic)
                    .expect("normalized state is finite");
                let buy = prices[slot_idx];
                let sell = buy * cfg.sell_price_factor;
                let outcome = env::step(&state, &battery, action, buy, sell);
                battery.level = outcome.next_battery;
                let reward = env::reward(&outcome, &battery, &reward_cfg);

                let done = hour + 1 == SLOTS_PER_DAY;
                let next = if done {
                    obs
                } else {
                    let nr = series[hh].slots[slot_idx + 1];
                    normalizer.apply(&EnvState {
                        pv: nr.pv_kwh,
                        battery_level: battery.level,
                        temperature: nr.temperature_c,
                        load: nr.load_kwh,
                    })
                };
                agent.observe(Transition {
                    state: obs,
                    action: action.index(),
                    reward,
                    next_state: next,
                    done,
                });
                if agent.ready() && (hour + 1) % cfg.update_every == 0 {
                    let losses = agent.update().expect("buffer holds a full batch");
                    q_loss_sum += 0.5 * (losses.q1 + losses.q2);
                    policy_loss_sum += losses.policy;
                    updates += 1;
                }
            }
            // Reported reward comes from a deterministic greedy evaluation
            // pass over the same day: it measures the learned policy rather
            // than the entropy-regularized exploration behavior, so curves
            // are comparable across modes with different effective
            // temperatures.
            let mut eval_battery = battery_template;
            let mut eval_reward = 0.0;
            for hour in 0..SLOTS_PER_DAY {
                let slot_idx = day * SLOTS_PER_DAY + hour;
                let r = series[hh].slots[slot_idx];
                let state = EnvState {
                    pv: r.pv_kwh,
                    battery_level: eval_battery.level,
                    temperature: r.temperature_c,
                    load: r.load_kwh,
                };
                let obs = normalizer.apply(&state);
                let action = agent
                    .select_action(&obs, SelectMode::Greedy)
                    .expect("normalized state is finite");
                let outcome = env::step(
                    &state,
                    &eval_battery,
                    action,
                    prices[slot_idx],
                    prices[slot_idx] * cfg.sell_price_factor,
                );
                eval_battery.level = outcome.next_battery;
                eval_reward += env::reward(&outcome, &eval_battery, &reward_cfg);
            }
            let denom = updates.max(1) as f64;
            rewards.push(RewardRow {
                episode,
                household: hh,
                reward: eval_reward,
                q_loss: q_loss_sum / denom,
                policy_loss: policy_loss_sum / denom,
            });
        }
        if mode == TrainMode::Federated {
            if let Some(rows) =
                federation::federate_step(&mut agents, (episode + 1) as u64, cfg.federation_period)?
            {
                for (hh, l2) in rows.into_iter().enumerate() {
                    drift.push(DriftRow {
                        episode,
                        household: hh,
                        l2_drift: l2,
                    });
                }
            }
        }
    }

    Ok(TrainingOutcome {
        rewards,
        drift,
        agents,
        normalizer,
    })
}
