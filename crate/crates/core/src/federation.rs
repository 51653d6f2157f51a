//! Federated averaging over household agents: at each barrier the policy and
//! critic parameters are averaged elementwise, target critics resync to the
//! averaged online values, and every agent's temperature stays local.
//!
//! ```
//! use dem_core::federation::federate_step;
//! use dem_core::sac::{SacAgent, SacHyper};
//!
//! let mut agents: Vec<SacAgent> =
//!     (0..3).map(|seed| SacAgent::new(SacHyper::default(), seed)).collect();
//! // Step 10 hits the period-5 barrier: everyone leaves with the same nets.
//! let drift = federate_step(&mut agents, 10, 5).unwrap().unwrap();
//! assert_eq!(drift.len(), 3);
//! assert_eq!(agents[0].policy.params, agents[2].policy.params);
//! ```

use thiserror::Error;

use crate::sac::{SacAgent, SacError, WeightSet};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FederationError {
    #[error("federation requires at least one agent")]
    EmptyFederation,
    #[error("agents disagree on weight layout")]
    LayoutMismatch,
}

/// Barrier predicate: averaging happens when the step counter hits a
/// multiple of the period, but never at step zero.
pub fn trigger(t: u64, period: u64) -> bool {
    assert!(period > 0);
    t > 0 && t % period == 0
}

/// Elementwise mean of the online and target networks across weight sets.
/// The broadcast carries the first agent's temperature as a placeholder;
/// callers keep temperatures local.
pub fn aggregate(sets: &[WeightSet]) -> Result<WeightSet, FederationError> {
    let first = sets.first().ok_or(FederationError::EmptyFederation)?;
    if sets.iter().any(|s| s.layout != first.layout) {
        return Err(FederationError::LayoutMismatch);
    }
    let n = first.layout.net_len();
    if sets
        .iter()
        .any(|s| s.policy.len() != n || s.q1.len() != n || s.q2.len() != n)
    {
        return Err(FederationError::LayoutMismatch);
    }
    // Contributions are sorted before summing so the result is bit-exact
    // under any permutation of the agents.
    let mean = |field: fn(&WeightSet) -> &Vec<f64>| -> Vec<f64> {
        let mut column = vec![0.0; sets.len()];
        (0..n)
            .map(|i| {
                for (c, s) in column.iter_mut().zip(sets) {
                    *c = field(s)[i];
                }
                column.sort_by(f64::total_cmp);
                column.iter().sum::<f64>() / sets.len() as f64
            })
            .collect()
    };
    let q1 = mean(|s| &s.q1);
    let q2 = mean(|s| &s.q2);
    Ok(WeightSet {
        layout: first.layout.clone(),
        policy: mean(|s| &s.policy),
        q1_target: q1.clone(),
        q2_target: q2.clone(),
        q1,
        q2,
        log_temperature: first.log_temperature,
    })
}

/// Euclidean distance between two agents' online parameters (policy and both
/// critics concatenated).
pub fn l2_drift(a: &WeightSet, b: &WeightSet) -> f64 {
    let sq = |x: &[f64], y: &[f64]| -> f64 {
        x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum()
    };
    (sq(&a.policy, &b.policy) + sq(&a.q1, &b.q1) + sq(&a.q2, &b.q2)).sqrt()
}

/// One federation barrier: if triggered, averages all agents and broadcasts
/// the result back, preserving each agent's own temperature. Returns the
/// pre-averaging drift of each agent from the global model, or `None` when
/// the barrier does not fire.
pub fn federate_step(
    agents: &mut [SacAgent],
    t: u64,
    period: u64,
) -> Result<Option<Vec<f64>>, FederationError> {
    if agents.is_empty() {
        return Err(FederationError::EmptyFederation);
    }
    if !trigger(t, period) {
        return Ok(None);
    }
    let sets: Vec<WeightSet> = agents.iter().map(|a| a.export_weights()).collect();
    let global = aggregate(&sets)?;
    let drift: Vec<f64> = sets.iter().map(|s| l2_drift(s, &global)).collect();
    for agent in agents.iter_mut() {
        let mut local = global.clone();
        local.log_temperature = agent.log_temperature;
        agent
            .import_weights(&local)
            .map_err(|e: SacError| match e {
                SacError::LayoutMismatch => FederationError::LayoutMismatch,
                _ => FederationError::LayoutMismatch,
            })?;
    }
    Ok(Some(drift))
}
