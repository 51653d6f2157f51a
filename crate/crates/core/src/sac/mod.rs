//! Discrete soft actor-critic agent: categorical policy over the three
//! dispatch actions, twin Q critics with target copies, a learned entropy
//! temperature and a replay buffer.
//!
//! All losses are written against explicit analytic gradients; the test
//! suite checks every one of them against central finite differences.
//!
//! ```
//! use dem_core::sac::{SacAgent, SacHyper, SelectMode};
//!
//! let mut agent = SacAgent::new(SacHyper::default(), 42);
//! let (probs, _) = agent.policy_probs(&[0.2, 0.5, 20.0, 0.4]);
//! assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
//! let action = agent.select_action(&[0.2, 0.5, 20.0, 0.4], SelectMode::Greedy).unwrap();
//! assert!(action.index() < 3);
//! ```

pub mod net;
pub mod replay;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Action;
use net::{param_count, Adam, Mlp};
pub use replay::{ReplayBuffer, Transition};

pub const N_ACTIONS: usize = 3;
pub const STATE_DIM: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SacError {
    #[error("state contains non-finite components")]
    NonFiniteState,
    #[error("replay buffer holds fewer transitions than one batch")]
    EmptyBuffer,
    #[error("weight layout mismatch")]
    LayoutMismatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacHyper {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Entropy target; discrete-SAC convention is a fraction of ln(3).
    pub target_entropy: f64,
    /// Minimum buffered transitions before updates start.
    pub warmup: usize,
}

impl Default for SacHyper {
    fn default() -> Self {
        SacHyper {
            hidden: vec![64, 64],
            lr: 3e-4,
            gamma: 0.99,
            tau: 0.005,
            batch_size: 64,
            replay_capacity: 100_000,
            target_entropy: 0.98 * (N_ACTIONS as f64).ln(),
            warmup: 256,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub q1: f64,
    pub q2: f64,
    pub policy: f64,
    pub temperature: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectMode {
    Stochastic,
    Greedy,
}

/// Shape descriptor shared by every agent in a federation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightLayout {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub actions: usize,
}

impl WeightLayout {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input];
        sizes.extend(&self.hidden);
        sizes.push(self.actions);
        sizes
    }

    pub fn net_len(&self) -> usize {
        param_count(&self.sizes())
    }
}

/// Flat, ordered parameter vectors of one agent's networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    pub layout: WeightLayout,
    pub policy: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub q1_target: Vec<f64>,
    pub q2_target: Vec<f64>,
    pub log_temperature: f64,
}

impl WeightSet {
    pub fn validate(&self) -> Result<(), SacError> {
        let n = self.layout.net_len();
        let ok = [&self.policy, &self.q1, &self.q2, &self.q1_target, &self.q2_target]
            .iter()
            .all(|v| v.len() == n && v.iter().all(|x| x.is_finite()))
            && self.log_temperature.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SacError::LayoutMismatch)
        }
    }

    /// Writes a checkpoint: one JSON header line, then the concatenated
    /// parameter vectors as little-endian f64 bytes.
    pub fn save<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = serde_json::json!({
            "layout": self.layout,
            "vectors": ["policy", "q1", "q2", "q1_target", "q2_target"],
            "net_len": self.layout.net_len(),
            "log_temperature": self.log_temperature,
        });
        writeln!(out, "{header}")?;
        for v in [&self.policy, &self.q1, &self.q2, &self.q1_target, &self.q2_target] {
            for x in v {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<R: std::io::BufRead>(mut input: R) -> std::io::Result<WeightSet> {
        let mut header = String::new();
        input.read_line(&mut header)?;
        let parsed: serde_json::Value = serde_json::from_str(&header)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        let layout: WeightLayout = serde_json::from_value(parsed["layout"].clone())
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        let log_temperature = parsed["log_temperature"].as_f64().ok_or_else(|| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, "missing log_temperature")
        })?;
        let n = layout.net_len();
        let mut read_vec = |_: ()| -> std::io::Result<Vec<f64>> {
            let mut bytes = vec![0u8; n * 8];
            input.read_exact(&mut bytes)?;
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect())
        };
        let policy = read_vec(())?;
        let q1 = read_vec(())?;
        let q2 = read_vec(())?;
        let q1_target = read_vec(())?;
        let q2_target = read_vec(())?;
        Ok(WeightSet {
            layout,
            policy,
            q1,
            q2,
            q1_target,
            q2_target,
            log_temperature,
        })
    }
}

pub struct SacAgent {
    pub hyper: SacHyper,
    pub policy: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_temperature: f64,
    opt_policy: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    opt_temperature: Adam,
    pub replay: ReplayBuffer,
    rng: ChaCha8Rng,
    /// Weight imports since construction; used to audit that no cross-agent
    /// communication happens outside federation barriers.
    pub import_count: u64,
}

impl SacAgent {
    pub fn new(hyper: SacHyper, seed: u64) -> SacAgent {
        assert!(hyper.gamma > 0.0 && hyper.gamma < 1.0);
        assert!(hyper.tau > 0.0 && hyper.tau <= 1.0);
        assert!(hyper.batch_size <= hyper.replay_capacity);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![STATE_DIM];
        sizes.extend(&hyper.hidden);
        sizes.push(N_ACTIONS);
        let policy = Mlp::new(sizes.clone(), &mut rng);
        let q1 = Mlp::new(sizes.clone(), &mut rng);
        let q2 = Mlp::new(sizes.clone(), &mut rng);
        let q1_target = q1.clone();
        let q2_target = q2.clone();
        let n = policy.n_params();
        SacAgent {
            opt_policy: Adam::new(hyper.lr, n),
            opt_q1: Adam::new(hyper.lr, n),
            opt_q2: Adam::new(hyper.lr, n),
            opt_temperature: Adam::new(hyper.lr, 1),
            replay: ReplayBuffer::new(hyper.replay_capacity),
            policy,
            q1,
            q2,
            q1_target,
            q2_target,
            log_temperature: 0.0,
            rng,
            hyper,
            import_count: 0,
        }
    }

    pub fn layout(&self) -> WeightLayout {
        WeightLayout {
            input: STATE_DIM,
            hidden: self.hyper.hidden.clone(),
            actions: N_ACTIONS,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    /// Policy distribution and log-probabilities for one state.
    pub fn policy_probs(&self, state: &[f64; 4]) -> ([f64; N_ACTIONS], [f64; N_ACTIONS]) {
        softmax(&self.policy.forward(state))
    }

    pub fn select_action(
        &mut self,
        state: &[f64; 4],
        mode: SelectMode,
    ) -> Result<Action, SacError> {
        if !state.iter().all(|x| x.is_finite()) {
            return Err(SacError::NonFiniteState);
        }
        let (probs, _) = self.policy_probs(state);
        let idx = match mode {
            SelectMode::Greedy => argmax(&probs),
            SelectMode::Stochastic => {
                let u: f64 = self.rng.gen();
                let mut acc = 0.0;
                let mut chosen = N_ACTIONS - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                chosen
            }
        };
        Ok(Action::from_index(idx))
    }

    pub fn observe(&mut self, t: Transition) {
        self.replay.push(t);
    }

    pub fn ready(&self) -> bool {
        self.replay.len() >= self.hyper.batch_size.max(self.hyper.warmup)
    }

    /// Samples one batch and performs a gradient step on every network.
    pub fn update(&mut self) -> Result<Losses, SacError> {
        if self.replay.len() < self.hyper.batch_size {
            return Err(SacError::EmptyBuffer);
        }
        let batch = self.replay.sample(&mut self.rng, self.hyper.batch_size);
        Ok(self.update_batch(&batch))
    }

    /// Soft target values for the Q update: expected min-target value of the
    /// next state under the current policy, entropy-adjusted.
    pub fn q_targets(&self, batch: &[Transition]) -> Vec<f64> {
        let alpha = self.temperature();
        batch
            .iter()
            .map(|t| {
                if t.done {
                    return t.reward;
                }
                let (probs, logp) = softmax(&self.policy.forward(&t.next_state));
                let q1t = self.q1_target.forward(&t.next_state);
                let q2t = self.q2_target.forward(&t.next_state);
                let mut v = 0.0;
                for a in 0..N_ACTIONS {
                    v += probs[a] * (q1t[a].min(q2t[a]) - alpha * logp[a]);
                }
                t.reward + self.hyper.gamma * v
            })
            .collect()
    }

    /// One gradient step per network on the given batch. Deterministic.
    pub fn update_batch(&mut self, batch: &[Transition]) -> Losses {
        let targets = self.q_targets(batch);

        let (q1_loss, q1_grad) = q_loss_and_grad(&self.q1, batch, &targets);
        let (q2_loss, q2_grad) = q_loss_and_grad(&self.q2, batch, &targets);
        let (policy_loss, policy_grad) = self.policy_loss_and_grad(batch);
        let (temp_loss, temp_grad) = self.temperature_loss_and_grad(batch);

        self.opt_q1.step(&mut self.q1.params, &q1_grad);
        self.opt_q2.step(&mut self.q2.params, &q2_grad);
        self.opt_policy.step(&mut self.policy.params, &policy_grad);
        let mut lt = [self.log_temperature];
        self.opt_temperature.step(&mut lt, &[temp_grad]);
        self.log_temperature = lt[0];

        self.soft_update(self.hyper.tau);

        Losses {
            q1: q1_loss,
            q2: q2_loss,
            policy: policy_loss,
            temperature: temp_loss,
        }
    }

    /// L_pi = E_s[ sum_a pi(a|s) (alpha log pi(a|s) - min Q(s,a)) ].
    pub fn policy_loss_and_grad(&self, batch: &[Transition]) -> (f64, Vec<f64>) {
        let alpha = self.temperature();
        let inv_b = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.policy.n_params()];
        for t in batch {
            let cache = self.policy.forward_cached(&t.state);
            let (probs, logp) = softmax(cache.output());
            let q1 = self.q1.forward(&t.state);
            let q2 = self.q2.forward(&t.state);
            let mut g = [0.0; N_ACTIONS];
            let mut mean_g = 0.0;
            for a in 0..N_ACTIONS {
                g[a] = alpha * logp[a] - q1[a].min(q2[a]);
                loss += probs[a] * g[a] * inv_b;
                mean_g += probs[a] * g[a];
            }
            let mut d_logits = [0.0; N_ACTIONS];
            for a in 0..N_ACTIONS {
                d_logits[a] = probs[a] * (g[a] - mean_g) * inv_b;
            }
            self.policy.backward(&cache, &d_logits, &mut grad);
        }
        (loss, grad)
    }

    /// L_T = exp(log_temperature) * (mean policy entropy - target entropy):
    /// descent raises the temperature when entropy drops below target.
    pub fn temperature_loss_and_grad(&self, batch: &[Transition]) -> (f64, f64) {
        let mut mean_entropy = 0.0;
        for t in batch {
            let (probs, logp) = softmax(&self.policy.forward(&t.state));
            let mut h = 0.0;
            for a in 0..N_ACTIONS {
                h -= probs[a] * logp[a];
            }
            mean_entropy += h;
        }
        mean_entropy /= batch.len() as f64;
        let alpha = self.temperature();
        let loss = alpha * (mean_entropy - self.hyper.target_entropy);
        (loss, loss) // dL/dlog_alpha = alpha * (H - H_target) = L
    }

    pub fn q1_loss(&self, batch: &[Transition], targets: &[f64]) -> f64 {
        q_loss_and_grad(&self.q1, batch, targets).0
    }

    /// target <- tau * online + (1 - tau) * target, elementwise.
    pub fn soft_update(&mut self, tau: f64) {
        assert!(tau > 0.0 && tau <= 1.0);
        for (t, o) in self.q1_target.params.iter_mut().zip(&self.q1.params) {
            *t += tau * (o - *t);
        }
        for (t, o) in self.q2_target.params.iter_mut().zip(&self.q2.params) {
            *t += tau * (o - *t);
        }
    }

    pub fn export_weights(&self) -> WeightSet {
        WeightSet {
            layout: self.layout(),
            policy: self.policy.params.clone(),
            q1: self.q1.params.clone(),
            q2: self.q2.params.clone(),
            q1_target: self.q1_target.params.clone(),
            q2_target: self.q2_target.params.clone(),
            log_temperature: self.log_temperature,
        }
    }

    pub fn import_weights(&mut self, weights: &WeightSet) -> Result<(), SacError> {
        if weights.layout != self.layout() {
            return Err(SacError::LayoutMismatch);
        }
        weights.validate()?;
        self.policy.params.clone_from(&weights.policy);
        self.q1.params.clone_from(&weights.q1);
        self.q2.params.clone_from(&weights.q2);
        self.q1_target.params.clone_from(&weights.q1_target);
        self.q2_target.params.clone_from(&weights.q2_target);
        self.log_temperature = weights.log_temperature;
        self.import_count += 1;
        Ok(())
    }
}

fn q_loss_and_grad(q: &Mlp, batch: &[Transition], targets: &[f64]) -> (f64, Vec<f64>) {
    let inv_b = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; q.n_params()];
    for (t, &y) in batch.iter().zip(targets) {
        let cache = q.forward_cached(&t.state);
        let q_sa = cache.output()[t.action];
        let err = q_sa - y;
        loss += err * err * inv_b;
        let mut d_out = [0.0; N_ACTIONS];
        d_out[t.action] = 2.0 * err * inv_b;
        q.backward(&cache, &d_out, &mut grad);
    }
    (loss, grad)
}

fn softmax(logits: &[f64]) -> ([f64; N_ACTIONS], [f64; N_ACTIONS]) {
    assert_eq!(logits.len(), N_ACTIONS);
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut exps = [0.0; N_ACTIONS];
    let mut sum = 0.0;
    for a in 0..N_ACTIONS {
        exps[a] = (logits[a] - max).exp();
        sum += exps[a];
    }
    let log_sum = sum.ln() + max;
    let mut probs = [0.0; N_ACTIONS];
    let mut logp = [0.0; N_ACTIONS];
    for a in 0..N_ACTIONS {
        probs[a] = exps[a] / sum;
        logp[a] = logits[a] - log_sum;
    }
    (probs, logp)
}

fn argmax(values: &[f64; N_ACTIONS]) -> usize {
    let mut best = 0;
    for i in 1..N_ACTIONS {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}
