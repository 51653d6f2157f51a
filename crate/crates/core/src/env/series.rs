//! Household slot series: ingestion of 5-minute measurement CSVs resampled
//! to 1-hour slots, and a seeded synthetic generator standing in for the
//! multi-year dataset.

use std::path::Path;

use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SLOTS_PER_DAY: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub pv_kwh: f64,
    pub load_kwh: f64,
    pub temperature_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HouseholdSeries {
    pub slots: Vec<SlotRecord>,
}

impl HouseholdSeries {
    pub fn days(&self) -> usize {
        self.slots.len() / SLOTS_PER_DAY
    }

    /// Record for a 1-based scenario slot, cycling over the stored days.
    pub fn at_slot(&self, slot: u64) -> SlotRecord {
        let idx = (slot as usize - 1) % self.slots.len();
        self.slots[idx]
    }

    pub fn mean_pv(&self) -> f64 {
        self.slots.iter().map(|s| s.pv_kwh).sum::<f64>() / self.slots.len() as f64
    }

    pub fn mean_load(&self) -> f64 {
        self.slots.iter().map(|s| s.load_kwh).sum::<f64>() / self.slots.len() as f64
    }
}

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("timestamps are not strictly increasing at line {line}")]
    NonMonotonicTime { line: usize },
    #[error("dataset is empty")]
    Empty,
}

/// Shape parameters for the synthetic generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub pv_peak_min: f64,
    pub pv_peak_max: f64,
    pub load_base: f64,
    pub morning_amp: f64,
    pub evening_amp: f64,
    pub temp_mean: f64,
    pub temp_amp: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            pv_peak_min: 1.5,
            pv_peak_max: 3.0,
            load_base: 0.3,
            morning_amp: 0.8,
            evening_amp: 1.2,
            temp_mean: 15.0,
            temp_amp: 8.0,
        }
    }
}

/// Deterministic synthetic series: diurnal half-sine PV scaled by a per-day
/// cloud factor, a double-peak load profile and a diurnal temperature sine.
pub fn synth_series(
    seed: u64,
    days: usize,
    households: usize,
    params: &SynthParams,
) -> Vec<HouseholdSeries> {
    assert!(days >= 1 && households >= 1);
    (0..households)
        .map(|h| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(h as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ seed);
            let pv_peak = rng.gen_range(params.pv_peak_min..=params.pv_peak_max);
            let mut slots = Vec::with_capacity(days * SLOTS_PER_DAY);
            for _day in 0..days {
                let cloud = rng.gen_range(0.4..=1.0);
                for hour in 0..SLOTS_PER_DAY {
                    let h = hour as f64;
                    let pv = if (6..18).contains(&hour) {
                        pv_peak * cloud * (std::f64::consts::PI * (h - 6.0) / 12.0).sin()
                    } else {
                        0.0
                    };
                    let morning = params.morning_amp * (-((h - 8.0).powi(2)) / 2.0).exp();
                    let evening = params.evening_amp * (-((h - 19.5).powi(2)) / 3.0).exp();
                    let load =
                        (params.load_base + morning + evening + rng.gen_range(0.0..0.15)).max(0.0);
                    let temp = params.temp_mean
                        + params.temp_amp
                            * (2.0 * std::f64::consts::PI * (h - 9.0) / 24.0).sin()
                        + rng.gen_range(-0.5..0.5);
                    slots.push(SlotRecord {
                        pv_kwh: pv.max(0.0),
                        load_kwh: load,
                        temperature_c: temp,
                    });
                }
            }
            HouseholdSeries { slots }
        })
        .collect()
}

/// Loads a 5-minute `timestamp,temperature_c,consumption_kwh,pv_kwh` CSV and
/// resamples to 1-hour slots: temperature by mean, energies by sum.
pub fn load_series(path: &Path) -> Result<HouseholdSeries, SeriesError> {
    let text = std::fs::read_to_string(path)?;
    parse_series(&text)
}

pub fn parse_series(text: &str) -> Result<HouseholdSeries, SeriesError> {
    let mut records: Vec<(NaiveDateTime, f64, f64, f64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || (i == 0 && trimmed.starts_with("timestamp")) {
            continue;
        }
        let parts: Vec<&str> = trimmed.split(',').collect();
        if parts.len() != 4 {
            return Err(SeriesError::MalformedRecord {
                line: line_no,
                reason: format!("expected 4 fields, got {}", parts.len()),
            });
        }
        let ts = parse_timestamp(parts[0]).ok_or_else(|| SeriesError::MalformedRecord {
            line: line_no,
            reason: format!("bad timestamp {:?}", parts[0]),
        })?;
        let mut nums = [0f64; 3];
        for (j, raw) in parts[1..].iter().enumerate() {
            nums[j] = raw
                .trim()
                .parse()
                .map_err(|_| SeriesError::MalformedRecord {
                    line: line_no,
                    reason: format!("bad number {raw:?}"),
                })?;
        }
        if let Some(last) = records.last() {
            if ts <= last.0 {
                return Err(SeriesError::NonMonotonicTime { line: line_no });
            }
        }
        records.push((ts, nums[0], nums[1], nums[2]));
    }
    if records.is_empty() {
        return Err(SeriesError::Empty);
    }

    let start = records[0].0;
    let mut slots: Vec<(f64, f64, f64, usize)> = Vec::new();
    for (ts, temp, load, pv) in records {
        let hour = (ts - start).num_seconds().max(0) as usize / 3600;
        if slots.len() <= hour {
            slots.resize(hour + 1, (0.0, 0.0, 0.0, 0));
        }
        let slot = &mut slots[hour];
        slot.0 += temp;
        slot.1 += load;
        slot.2 += pv;
        slot.3 += 1;
    }
    Ok(HouseholdSeries {
        slots: slots
            .into_iter()
            .map(|(temp, load, pv, n)| SlotRecord {
                pv_kwh: pv,
                load_kwh: load,
                temperature_c: if n > 0 { temp / n as f64 } else { 0.0 },
            })
            .collect(),
    })
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S"))
        .ok()
}
