//! Training, persistence and serving of discrete-action policies.
//!
//! A [`PolicyHandle`] wraps a trained network with an access level: white-box
//! handles answer greedy actions, full score vectors and input gradients;
//! black-box handles answer actions only, which is all a verifier is allowed
//! to see from a suspected policy.

mod a2c;
pub mod checkpoint;
mod dqn;
pub mod net;
mod ppo;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION};
pub use net::{argmax_lowest, cross_entropy, cross_entropy_grad, log_softmax, softmax};
pub use net::{Adam, HeadKind, Net, NetArch, ParamGrads};

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envlab::{self, ActionPolicy, EnvId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Dqn,
    A2c,
    Ppo,
}

pub const KNOWN_ALGOS: [&str; 3] = ["dqn", "a2c", "ppo"];

impl Algo {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::Dqn => "dqn",
            Algo::A2c => "a2c",
            Algo::Ppo => "ppo",
        }
    }

    pub fn head_kind(&self) -> HeadKind {
        match self {
            Algo::Dqn => HeadKind::Dueling,
            Algo::A2c | Algo::Ppo => HeadKind::ActorCritic,
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(Algo::Dqn),
            "a2c" => Ok(Algo::A2c),
            "ppo" => Ok(Algo::Ppo),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm `{other}`; known: {KNOWN_ALGOS:?}"
            ))),
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    WhiteBox,
    BlackBox,
}

/// Training budget: raw environment steps or whole episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Steps(u64),
    Episodes(u64),
}

impl Budget {
    pub fn is_positive(&self) -> bool {
        match self {
            Budget::Steps(n) | Budget::Episodes(n) => *n > 0,
        }
    }
}

/// Full training configuration. Algorithm-specific knobs are ignored by the
/// other trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algo: Algo,
    pub seed: u64,
    pub budget: Budget,
    pub learning_rate: f64,
    pub gamma: f64,
    pub hidden: Vec<usize>,
    pub eval_episodes: usize,
    // DQN
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub train_freq: usize,
    pub target_sync: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_steps: u64,
    pub learn_start: usize,
    // A2C / PPO
    pub rollout: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    // PPO
    pub clip_ratio: f64,
    pub ppo_epochs: usize,
    pub minibatch: usize,
    pub gae_lambda: f64,
}

impl TrainConfig {
    /// Documented defaults per algorithm, sized for the desk environments.
    pub fn default_for(algo: Algo, seed: u64) -> Self {
        let base = Self {
            algo,
            seed,
            budget: Budget::Steps(30_000),
            learning_rate: 1e-3,
            gamma: 0.97,
            hidden: vec![48, 48],
            eval_episodes: 10,
            replay_capacity: 20_000,
            batch_size: 32,
            train_freq: 2,
            target_sync: 250,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_steps: 8_000,
            learn_start: 500,
            rollout: 16,
            entropy_coef: 0.01,
            value_coef: 0.5,
            clip_ratio: 0.2,
            ppo_epochs: 4,
            minibatch: 64,
            gae_lambda: 0.95,
        };
        match algo {
            Algo::Dqn => base,
            Algo::A2c => Self { learning_rate: 7e-4, budget: Budget::Steps(40_000), ..base },
            Algo::Ppo => Self {
                learning_rate: 7e-4,
                budget: Budget::Steps(40_000),
                rollout: 128,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !self.budget.is_positive() {
            return Err(Error::InvalidConfig("budget must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::InvalidConfig("eval_episodes must be positive".into()));
        }
        if self.batch_size == 0 || self.rollout == 0 || self.minibatch == 0 {
            return Err(Error::InvalidConfig("batch sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex_digest(text.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let d = h.finalize();
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Which term of the mask-generation loss a gradient request refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossTerm {
    VictimCrossEntropy,
    IndependentCrossEntropy,
}

/// Identifies the scalar loss whose input gradient is requested: the
/// cross-entropy of the policy's scores against a reference action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossSpec {
    pub term: LossTerm,
    pub reference_action: usize,
}

/// A trained discrete-action decision function with an access level.
#[derive(Debug, Clone)]
pub struct PolicyHandle<T: Scalar> {
    pub policy_id: String,
    pub algo: Algo,
    pub env_id: EnvId,
    access: Access,
    pub(crate) net: Net<T>,
    pub train_config: TrainConfig,
    pub final_mean_return: f64,
}

impl<T: Scalar> PolicyHandle<T> {
    pub fn from_net(
        policy_id: impl Into<String>,
        algo: Algo,
        env_id: EnvId,
        net: Net<T>,
        train_config: TrainConfig,
        final_mean_return: f64,
    ) -> Self {
        Self {
            policy_id: policy_id.into(),
            algo,
            env_id,
            access: Access::WhiteBox,
            net,
            train_config,
            final_mean_return,
        }
    }

    pub fn access(&self) -> Access {
        self.access
    }

    /// Action-only copy of this handle, as handed to a verifier.
    pub fn as_black_box(&self) -> Self {
        let mut h = self.clone();
        h.access = Access::BlackBox;
        h
    }

    pub fn action_count(&self) -> usize {
        self.net.action_count()
    }

    pub fn state_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn check_shape(&self, state: &ArrayView1<T>) -> Result<()> {
        if state.len() != self.net.input_dim() {
            return Err(Error::Shape {
                expected: vec![self.net.input_dim()],
                got: vec![state.len()],
            });
        }
        Ok(())
    }

    /// Greedy action: argmax of the score vector, ties broken toward the
    /// lowest action index. Available at every access level.
    pub fn act(&self, state: &ArrayView1<T>) -> usize {
        assert_eq!(state.len(), self.net.input_dim(), "state shape mismatch");
        let cache = self.net.forward(state);
        let scores = self.net.scores(&cache);
        argmax_lowest(&scores.view())
    }

    /// Full score vector: Q-values for DQN, action log-probabilities for the
    /// policy-gradient algorithms. White-box only.
    pub fn action_scores(&self, state: &ArrayView1<T>) -> Result<Array1<T>> {
        if self.access != Access::WhiteBox {
            return Err(Error::Access(format!(
                "action_scores on black-box handle {}",
                self.policy_id
            )));
        }
        self.check_shape(state)?;
        let cache = self.net.forward(state);
        let scores = self.net.scores(&cache);
        Ok(match self.algo {
            Algo::Dqn => scores,
            Algo::A2c | Algo::Ppo => log_softmax(&scores.view()),
        })
    }

    /// Gradient of the identified cross-entropy loss with respect to the
    /// input state. The score vector is treated as categorical logits, which
    /// for Q-values applies a softmax inside the loss. White-box only.
    pub fn input_gradient(&self, state: &ArrayView1<T>, spec: &LossSpec) -> Result<Array1<T>> {
        if self.access != Access::WhiteBox {
            return Err(Error::Access(format!(
                "input_gradient on black-box handle {}",
                self.policy_id
            )));
        }
        self.check_shape(state)?;
        if spec.reference_action >= self.net.action_count() {
            return Err(Error::InvalidConfig(format!(
                "reference action {} out of range (action count {})",
                spec.reference_action,
                self.net.action_count()
            )));
        }
        let cache = self.net.forward(state);
        let scores = self.net.scores(&cache);
        let dscores = cross_entropy_grad(&scores.view(), spec.reference_action);
        let grad = self.net.input_gradient_scores(state, &dscores);
        if !grad.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("non-finite input gradient".into()));
        }
        Ok(grad)
    }

    /// Cross-entropy of this policy's scores at `state` against the
    /// reference action.
    pub fn cross_entropy_at(&self, state: &ArrayView1<T>, action: usize) -> Result<T> {
        if self.access != Access::WhiteBox {
            return Err(Error::Access("scores on black-box handle".into()));
        }
        self.check_shape(state)?;
        let cache = self.net.forward(state);
        let scores = self.net.scores(&cache);
        Ok(cross_entropy(&scores.view(), action))
    }

    /// Hash of the canonical flat parameter encoding; used by purity and
    /// independence checks.
    pub fn weights_digest(&self) -> String {
        let flat = self.net.flat_params();
        let mut bytes = Vec::with_capacity(flat.len() * 8);
        for v in flat {
            bytes.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        hex_digest(&bytes)
    }
}

impl<T: Scalar> ActionPolicy<T> for PolicyHandle<T> {
    fn act(&mut self, state: &ArrayView1<T>) -> usize {
        PolicyHandle::act(self, state)
    }
    fn action_count(&self) -> usize {
        self.net.action_count()
    }
}

/// Options threaded through the training loops beyond the public config.
#[derive(Debug, Clone)]
pub(crate) struct TrainOpts<T: Scalar> {
    /// Continue from these weights instead of a fresh initialization.
    pub initial: Option<Net<T>>,
    /// When positive, every state entering a loss computation is first
    /// shifted by an `adv_eps`-bounded sign-gradient step against the
    /// current network's own greedy action.
    pub adv_eps: f64,
    /// Label namespacing the episode seed stream.
    pub seed_label: String,
}

impl<T: Scalar> Default for TrainOpts<T> {
    fn default() -> Self {
        Self { initial: None, adv_eps: 0.0, seed_label: "train".into() }
    }
}

/// Shift a state against the network's own confident action: an
/// `eps`-bounded sign-gradient step on the self cross-entropy, clipped back
/// into the valid observation range. `eps == 0` returns the state unchanged.
pub(crate) fn adversarial_shift<T: Scalar>(
    net: &Net<T>,
    state: &ArrayView1<T>,
    eps: f64,
) -> Array1<T> {
    if eps == 0.0 {
        return state.to_owned();
    }
    let cache = net.forward(state);
    let scores = net.scores(&cache);
    let action = argmax_lowest(&scores.view());
    let dscores = cross_entropy_grad(&scores.view(), action);
    let grad = net.input_gradient_scores(state, &dscores);
    let e = T::from_cfg(eps);
    let mut out = state.to_owned();
    ndarray::Zip::from(&mut out).and(&grad).for_each(|s, &g| {
        let step = if g > T::zero() {
            e
        } else if g < T::zero() {
            -e
        } else {
            T::zero()
        };
        *s = crate::scalar::clamp(*s + step, T::zero(), T::one());
    });
    out
}

/// Train a policy from scratch with the given configuration.
pub fn train<T: Scalar>(config: &TrainConfig, env_id: EnvId) -> Result<PolicyHandle<T>> {
    train_with_opts(config, env_id, TrainOpts::default())
}

pub(crate) fn train_with_opts<T: Scalar>(
    config: &TrainConfig,
    env_id: EnvId,
    opts: TrainOpts<T>,
) -> Result<PolicyHandle<T>> {
    config.validate()?;
    let spec = envlab::spec_of(env_id);
    let arch = NetArch {
        input_dim: spec.state_dim(),
        hidden: config.hidden.clone(),
        action_count: spec.action_count,
        kind: config.algo.head_kind(),
    };
    let fresh = opts.initial.is_none();
    let net = match config.algo {
        Algo::Dqn => dqn::train(config, env_id, &arch, &opts)?,
        Algo::A2c => a2c::train(config, env_id, &arch, &opts)?,
        Algo::Ppo => ppo::train(config, env_id, &arch, &opts)?,
    };
    let mean_return = evaluate_net(&net, config.algo, env_id, config.eval_episodes, config.seed);
    let suffix = if fresh { String::new() } else { "-tuned".to_string() };
    Ok(PolicyHandle::from_net(
        format!("{}-{}-s{}{}", env_id, config.algo, config.seed, suffix),
        config.algo,
        env_id,
        net,
        config.clone(),
        mean_return,
    ))
}

/// Mean greedy-evaluation return over `episodes` seeded episodes.
pub fn evaluate<T: Scalar>(policy: &PolicyHandle<T>, episodes: usize, seed_base: u64) -> f64 {
    evaluate_net(&policy.net, policy.algo, policy.env_id, episodes, seed_base)
}

fn evaluate_net<T: Scalar>(
    net: &Net<T>,
    algo: Algo,
    env_id: EnvId,
    episodes: usize,
    seed_base: u64,
) -> f64 {
    let mut handle = PolicyHandle::from_net(
        "eval",
        algo,
        env_id,
        net.clone(),
        TrainConfig::default_for(algo, seed_base),
        0.0,
    );
    let mut total = 0.0;
    for i in 0..episodes {
        let ep_seed = seed::derive(seed_base, "eval-episode", i as u64);
        let mut env = envlab::make_env::<T>(env_id, ep_seed);
        let trace = envlab::run_episode(&mut handle, env.as_mut(), ep_seed, None);
        total += trace.return_total.as_f64();
    }
    total / episodes as f64
}

/// Batch of uniform random probe states used for bitwise checkpoint checks.
pub fn probe_states<T: Scalar>(dim: usize, n: usize, seed_v: u64) -> Array2<T> {
    let mut rng = seed::rng(seed_v, "probe-states", 0);
    Array2::from_shape_fn((n, dim), |_| T::sample_unit(&mut rng))
}

/// Greedy actions of a policy on each row of a probe batch.
pub fn probe_actions<T: Scalar>(policy: &PolicyHandle<T>, probes: &Array2<T>) -> Vec<usize> {
    probes.outer_iter().map(|row| policy.act(&row)).collect()
}

/// Apply the documented hyperparameter jitter for independently trained
/// policies: +/-25% on the learning rate and on one algorithm-specific knob,
/// scaled by a seeded draw.
pub fn jitter_config(config: &TrainConfig, jitter_seed: u64) -> TrainConfig {
    let mut rng = seed::rng(jitter_seed, "hyperparameter-jitter", 0);
    let mut draw = || 1.0 + 0.25 * (rand::Rng::random::<f64>(&mut rng) * 2.0 - 1.0);
    let mut out = config.clone();
    out.learning_rate *= draw();
    match config.algo {
        Algo::Dqn => {
            out.target_sync = ((config.target_sync as f64) * draw()).round().max(1.0) as usize;
        }
        Algo::A2c => out.entropy_coef *= draw(),
        Algo::Ppo => out.clip_ratio *= draw(),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;

    fn linear_handle(algo: Algo) -> PolicyHandle<f64> {
        // 4-dim input, no hidden layers, 4 actions: scores = W x + b.
        let arch = NetArch {
            input_dim: 4,
            hidden: vec![],
            action_count: 4,
            kind: algo.head_kind(),
        };
        let mut net = Net::new(&arch, &mut seed::rng(1, "test-handle", 0));
        net.head_main.w = ndarray::Array2::eye(4);
        net.head_main.b = Array1::zeros(4);
        net.head_aux.w = ndarray::Array2::zeros((1, 4));
        net.head_aux.b = Array1::zeros(1);
        PolicyHandle::from_net(
            "test",
            algo,
            EnvId::Rally,
            net,
            TrainConfig::default_for(algo, 0),
            0.0,
        )
    }

    #[test]
    fn act_is_argmax_with_low_tiebreak() {
        let h = linear_handle(Algo::A2c);
        assert_eq!(h.act(&arr1(&[0.1, 0.9, 0.5, 0.2]).view()), 1);
        assert_eq!(h.act(&arr1(&[0.4, 0.4, 0.1, 0.1]).view()), 0);
    }

    #[test]
    fn black_box_rejects_scores_and_gradients() {
        let h = linear_handle(Algo::Dqn).as_black_box();
        let s = arr1(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(h.act(&s.view()), 3); // actions still answered
        assert!(matches!(h.action_scores(&s.view()), Err(Error::Access(_))));
        let spec = LossSpec { term: LossTerm::VictimCrossEntropy, reference_action: 0 };
        assert!(matches!(h.input_gradient(&s.view(), &spec), Err(Error::Access(_))));
    }

    #[test]
    fn policy_scores_normalize_for_actor_critic() {
        let h = linear_handle(Algo::A2c);
        let s = arr1(&[0.3, -0.2, 0.9, 0.0]);
        let logp = h.action_scores(&s.view()).unwrap();
        let sum: f64 = logp.iter().map(|v| v.exp()).sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dqn_scores_are_unconstrained() {
        let h = linear_handle(Algo::Dqn);
        let s = arr1(&[-0.9, 0.2, -0.1, 0.4]);
        let q = h.action_scores(&s.view()).unwrap();
        assert!(q.iter().any(|v| *v < 0.0));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let h = linear_handle(Algo::Dqn);
        let s = arr1(&[0.1, 0.2]);
        assert!(matches!(h.action_scores(&s.view()), Err(Error::Shape { .. })));
    }

    #[test]
    fn out_of_range_reference_action_rejected() {
        let h = linear_handle(Algo::Dqn);
        let s = arr1(&[0.1, 0.2, 0.3, 0.4]);
        let spec = LossSpec { term: LossTerm::VictimCrossEntropy, reference_action: 7 };
        assert!(h.input_gradient(&s.view(), &spec).is_err());
    }

    #[test]
    fn constant_network_has_zero_gradient() {
        let mut h = linear_handle(Algo::Dqn);
        h.net.head_main.w.fill(0.0);
        let s = arr1(&[0.1, 0.2, 0.3, 0.4]);
        let spec = LossSpec { term: LossTerm::VictimCrossEntropy, reference_action: 1 };
        let g = h.input_gradient(&s.view(), &spec).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn invalid_gamma_rejected() {
        let mut cfg = TrainConfig::default_for(Algo::Dqn, 0);
        cfg.gamma = 1.3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_budget_rejected() {
        let mut cfg = TrainConfig::default_for(Algo::Ppo, 0);
        cfg.budget = Budget::Steps(0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn jitter_changes_lr_and_one_knob() {
        let cfg = TrainConfig::default_for(Algo::Dqn, 0);
        let j = jitter_config(&cfg, 42);
        assert_ne!(cfg.learning_rate, j.learning_rate);
        assert!((j.learning_rate / cfg.learning_rate - 1.0).abs() <= 0.2500001);
        assert_ne!(cfg.target_sync, j.target_sync);
        assert_eq!(cfg.entropy_coef, j.entropy_coef);
    }

    #[test]
    fn adversarial_shift_zero_eps_is_identity() {
        let h = linear_handle(Algo::Dqn);
        let s = arr1(&[0.1, 0.2, 0.3, 0.4]);
        let shifted = adversarial_shift(&h.net, &s.view(), 0.0);
        assert_eq!(shifted, s);
    }
}
