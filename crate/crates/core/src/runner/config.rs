//! Scenario configuration: a TOML-backed description of one experiment,
//! fully determining the run together with its seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::RewardConfig;
use crate::fixed::Currency;
use crate::ledger::GasSchedule;
use crate::sac::SacHyper;
use crate::state::ProtocolParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Exogenous price series per kWh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriceSpec {
    /// Flat price for every slot.
    Constant { value: f64 },
    /// Day tariff for slots 8..20 within each day, night tariff otherwise.
    TimeOfUse { day: f64, night: f64 },
    /// Seeded multiplicative random walk, clamped to [floor, cap].
    RandomWalk {
        start: f64,
        step: f64,
        floor: f64,
        cap: f64,
    },
    /// `slot,price` CSV, one row per slot starting at slot 1.
    Csv { path: PathBuf },
}

impl Default for PriceSpec {
    fn default() -> Self {
        PriceSpec::Constant { value: 0.2 }
    }
}

/// Household series source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Seeded synthetic generator; the scenario seed drives it. The PV peak
    /// range controls how heterogeneous the households are; `None` keeps the
    /// generator defaults.
    Synth {
        days: usize,
        #[serde(default)]
        pv_peak_min: Option<f64>,
        #[serde(default)]
        pv_peak_max: Option<f64>,
    },
    /// One 5-minute measurement CSV per household.
    Csv { paths: Vec<PathBuf> },
}

impl DatasetSpec {
    /// Generator parameters for the synth variant (defaults where unset).
    pub fn synth_params(&self) -> crate::env::series::SynthParams {
        let mut p = crate::env::series::SynthParams::default();
        if let DatasetSpec::Synth { pv_peak_min, pv_peak_max, .. } = self {
            if let Some(lo) = pv_peak_min {
                p.pv_peak_min = *lo;
            }
            if let Some(hi) = pv_peak_max {
                p.pv_peak_max = *hi;
            }
        }
        p
    }
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synth { days: 10, pv_peak_min: None, pv_peak_max: None }
    }
}

/// How the delivered-energy oracle is fed during run_e2e.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryMode {
    /// Deliveries exactly match commitments: no shortfall, no forfeits.
    Honest,
    /// Deliveries follow the household's actual series surplus.
    FromSeries,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryConfig {
    pub capacity_kwh: f64,
    pub initial_level_kwh: f64,
    pub efficiency: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            capacity_kwh: 10.0,
            initial_level_kwh: 5.0,
            efficiency: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub households: usize,
    /// Slots in one run_e2e scenario.
    pub slots: u64,
    /// Training episodes (one simulated day each).
    pub episodes: usize,
    /// Federation period in episodes.
    pub federation_period: u64,
    pub seed: u64,
    /// Separate seed for the synthetic dataset and price series. When unset,
    /// `seed` drives everything; pinning it lets seed sweeps vary only the
    /// training randomness while every run sees the same task.
    pub data_seed: Option<u64>,

    pub price: PriceSpec,
    /// Households sell at this fraction of the buy price.
    pub sell_price_factor: f64,
    pub dataset: DatasetSpec,
    pub battery: BatteryConfig,
    pub delivery: DeliveryMode,

    /// Battery-floor penalty weight (alpha in the reward).
    pub alpha: f64,
    pub floor_fraction: f64,
    pub literal_cost_sign: bool,

    pub reference_price: f64,
    pub collateral_factor: f64,
    pub penalty_factor: f64,

    /// Grid consumption sizing: previous settled production times headroom.
    pub grid_headroom: f64,
    pub grid_bootstrap_kwh: f64,
    /// Day-one persistence forecast per household.
    pub forecast_bootstrap_pv_kwh: f64,
    pub forecast_bootstrap_load_kwh: f64,

    pub household_balance: f64,
    pub household_collateral: f64,
    pub grid_balance: f64,
    pub grid_collateral: f64,

    /// Gradient updates happen every this many slots (1 = every slot).
    /// Larger values keep agents closer together between federation
    /// barriers at the cost of slower learning per episode.
    pub update_every: usize,

    pub gas: GasSchedule,
    pub sac: SacHyper,

    pub out_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            households: 2,
            slots: 24,
            episodes: 200,
            federation_period: 10,
            seed: 42,
            data_seed: None,
            price: PriceSpec::default(),
            sell_price_factor: 0.9,
            dataset: DatasetSpec::default(),
            battery: BatteryConfig::default(),
            delivery: DeliveryMode::Honest,
            alpha: 1.0,
            floor_fraction: 0.1,
            literal_cost_sign: false,
            reference_price: 0.2,
            collateral_factor: 1.0,
            penalty_factor: 1.0,
            grid_headroom: 1.1,
            grid_bootstrap_kwh: 5.0,
            forecast_bootstrap_pv_kwh: 1.0,
            forecast_bootstrap_load_kwh: 0.5,
            household_balance: 100.0,
            household_collateral: 20.0,
            grid_balance: 100_000.0,
            grid_collateral: 10_000.0,
            update_every: 1,
            gas: GasSchedule::default(),
            sac: SacHyper::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<ScenarioConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ScenarioConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if self.households < 1 {
            return err("households must be >= 1");
        }
        if self.slots < 1 {
            return err("slots must be >= 1");
        }
        if self.update_every < 1 {
            return err("update_every must be >= 1");
        }
        if self.episodes < 1 {
            return err("episodes must be >= 1");
        }
        if self.federation_period < 1 {
            return err("federation_period must be >= 1");
        }
        if !(self.sell_price_factor > 0.0 && self.sell_price_factor <= 1.0) {
            return err("sell_price_factor must be in (0, 1]");
        }
        if self.grid_headroom < 1.0 {
            return err("grid_headroom must be >= 1");
        }
        if !self.gas.validate() {
            return err("gas schedule values must be positive");
        }
        if let DatasetSpec::Csv { paths } = &self.dataset {
            if paths.len() != self.households {
                return err("dataset.paths must list one CSV per household");
            }
        }
        Ok(())
    }

    pub fn reward_config(&self) -> RewardConfig {
        RewardConfig {
            alpha: self.alpha,
            floor_fraction: self.floor_fraction,
            literal_cost_sign: self.literal_cost_sign,
        }
    }

    pub fn protocol_params(&self) -> ProtocolParams {
        ProtocolParams {
            reference_price: Currency::from_units_f64(self.reference_price),
            collateral_factor_milli: (self.collateral_factor * 1_000.0).round() as i64,
            penalty_factor_milli: (self.penalty_factor * 1_000.0).round() as i64,
        }
    }
}

/// Materializes the buy-price series for slots `1..=slots`, deterministically.
pub fn price_series(spec: &PriceSpec, slots: u64, seed: u64) -> Result<Vec<f64>, ConfigError> {
    use rand::{Rng, SeedableRng};
    let prices = match spec {
        PriceSpec::Constant { value } => vec![*value; slots as usize],
        PriceSpec::TimeOfUse { day, night } => (1..=slots)
            .map(|s| {
                let hour = (s - 1) % 24;
                if (8..20).contains(&hour) {
                    *day
                } else {
                    *night
                }
            })
            .collect(),
        PriceSpec::RandomWalk {
            start,
            step,
            floor,
            cap,
        } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5052_4943_4553);
            let mut p = *start;
            (0..slots)
                .map(|_| {
                    p = (p * (1.0 + rng.gen_range(-*step..*step))).clamp(*floor, *cap);
                    p
                })
                .collect()
        }
        PriceSpec::Csv { path } => load_price_csv(path, slots)?,
    };
    if prices.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(ConfigError::Invalid(
            "price series must be non-negative and finite".to_string(),
        ));
    }
    Ok(prices)
}

/// Loads a `slot,price` CSV covering at least slots `1..=slots`.
pub fn load_price_csv(path: &Path, slots: u64) -> Result<Vec<f64>, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    let mut by_slot = std::collections::BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || (i == 0 && trimmed.starts_with("slot")) {
            continue;
        }
        let (slot_raw, price_raw) = trimmed.split_once(',').ok_or_else(|| {
            ConfigError::Invalid(format!("price csv line {}: expected slot,price", i + 1))
        })?;
        let slot: u64 = slot_raw.trim().parse().map_err(|_| {
            ConfigError::Invalid(format!("price csv line {}: bad slot", i + 1))
        })?;
        let price: f64 = price_raw.trim().parse().map_err(|_| {
            ConfigError::Invalid(format!("price csv line {}: bad price", i + 1))
        })?;
        by_slot.insert(slot, price);
    }
    (1..=slots)
        .map(|s| {
            by_slot
                .get(&s)
                .copied()
                .ok_or_else(|| ConfigError::Invalid(format!("price csv missing slot {s}")))
        })
        .collect()
}
