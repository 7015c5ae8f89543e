//! Desk-scale deterministic environments.
//!
//! Two environments with the structural properties the fingerprinting
//! pipeline needs — discrete actions, bounded grid-tensor observations,
//! score-based returns, and bitwise determinism given a seed:
//!
//! - [`rally`]: a two-paddle rally game against a built-in opponent,
//!   first to five points.
//! - [`chase`]: a pellet-sweeping gridworld with two pursuing enemies.
//!
//! Observations are emitted as flattened plane tensors with every value in
//! `[0, 1]`. When a perturbation mask is injected during an episode the
//! perturbed observation is re-clipped to `[0, 1]` before the policy sees it.

mod chase;
mod rally;

pub use chase::ChaseEnv;
pub use rally::{arrival_row as rally_arrival_row, decode as rally_decode, RallyEnv};

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Registered environment identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvId {
    Rally,
    Chase,
}

pub const KNOWN_ENVS: [&str; 2] = ["rally", "chase"];

impl EnvId {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvId::Rally => "rally",
            EnvId::Chase => "chase",
        }
    }
}

impl std::str::FromStr for EnvId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rally" => Ok(EnvId::Rally),
            "chase" => Ok(EnvId::Chase),
            other => Err(Error::UnknownEnv {
                given: other.to_string(),
                known: KNOWN_ENVS.to_vec(),
            }),
        }
    }
}

impl std::fmt::Display for EnvId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Static description of an environment's interface.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub env_id: EnvId,
    pub action_count: usize,
    pub state_shape: Vec<usize>,
    pub horizon_cap: usize,
    /// Identifier of the documented worst-action rule used for the
    /// worst-case return in impact denominators.
    pub reward_floor_policy: String,
    /// Number of consecutive observations stacked into one state tensor.
    pub frame_stack: usize,
}

impl EnvSpec {
    pub fn state_dim(&self) -> usize {
        self.state_shape.iter().product::<usize>() * self.frame_stack
    }
}

/// One step of an environment transition.
#[derive(Debug, Clone)]
pub struct Transition<T: Scalar> {
    pub state: Array1<T>,
    pub reward: T,
    pub done: bool,
}

/// A deterministic, single-sequence environment instance.
pub trait Env<T: Scalar> {
    fn spec(&self) -> &EnvSpec;
    /// Restart the episode and return the initial observation.
    fn reset(&mut self) -> Array1<T>;
    /// Advance one step with the given action.
    fn step(&mut self, action: usize) -> Transition<T>;
}

/// Anything that can pick actions when driven through an episode.
///
/// Takes `&mut self` because evasion wrappers keep per-episode state
/// (history buffers, RNG streams, detection counters).
pub trait ActionPolicy<T: Scalar> {
    fn act(&mut self, state: &ArrayView1<T>) -> usize;
    fn action_count(&self) -> usize;
    /// Called at the start of every episode; wrappers clear history here.
    fn begin_episode(&mut self) {}
}

/// Construct a registered environment.
pub fn make_env<T: Scalar>(env_id: EnvId, seed: u64) -> Box<dyn Env<T>> {
    match env_id {
        EnvId::Rally => Box::new(RallyEnv::new(seed)),
        EnvId::Chase => Box::new(ChaseEnv::new(seed)),
    }
}

/// Construct an environment from its string id, with a registry error for
/// unknown names.
pub fn make_env_by_name<T: Scalar>(name: &str, seed: u64) -> Result<Box<dyn Env<T>>> {
    let id: EnvId = name.parse()?;
    Ok(make_env(id, seed))
}

pub fn spec_of(env_id: EnvId) -> EnvSpec {
    match env_id {
        EnvId::Rally => rally::spec(),
        EnvId::Chase => chase::spec(),
    }
}

/// One recorded step of an episode. `state` is the observation actually fed
/// to the policy (perturbed and clipped inside an injection window).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TraceStep<T: Scalar> {
    pub t: usize,
    pub state: Array1<T>,
    pub action: usize,
    pub reward: T,
    pub perturbed: bool,
}

/// Time-indexed record of one episode; the substrate every metric is
/// recomputed from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpisodeTrace<T: Scalar> {
    pub seed: u64,
    pub steps: Vec<TraceStep<T>>,
    pub return_total: T,
    /// False when a requested injection window started after the episode
    /// ended, so no step was perturbed.
    pub window_entered: bool,
}

impl<T: Scalar> EpisodeTrace<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn perturbed_count(&self) -> usize {
        self.steps.iter().filter(|s| s.perturbed).count()
    }

    pub fn states(&self) -> Vec<ArrayView1<'_, T>> {
        self.steps.iter().map(|s| s.state.view()).collect()
    }

    /// Check the structural invariants: contiguous time indices, return
    /// equal to the reward sum, and at most one contiguous perturbed window.
    pub fn validate(&self) -> Result<()> {
        let mut sum = T::zero();
        let mut window_edges = 0;
        let mut prev_perturbed = false;
        for (i, step) in self.steps.iter().enumerate() {
            if step.t != i {
                return Err(Error::Integrity(format!("non-contiguous step index {} at {i}", step.t)));
            }
            sum = sum + step.reward;
            if step.perturbed != prev_perturbed {
                window_edges += 1;
                prev_perturbed = step.perturbed;
            }
        }
        if window_edges > 2 {
            return Err(Error::Integrity("more than one perturbed window".into()));
        }
        if (sum - self.return_total).abs() > T::from_cfg(1e-6) {
            return Err(Error::Integrity(format!(
                "return_total {} does not match reward sum {}",
                self.return_total, sum
            )));
        }
        Ok(())
    }
}

/// A mask injection request for `run_episode`.
#[derive(Debug, Clone)]
pub struct PerturbWindow<'a, T: Scalar> {
    pub mask: &'a Array1<T>,
    pub t_start: usize,
    pub window_len: usize,
}

/// Add a mask to an observation and clip back into the valid `[0, 1]` range.
pub fn apply_mask<T: Scalar>(state: &ArrayView1<T>, mask: &Array1<T>) -> Array1<T> {
    let mut out = state.to_owned();
    ndarray::Zip::from(&mut out).and(mask).for_each(|o, &m| {
        *o = crate::scalar::clamp(*o + m, T::zero(), T::one());
    });
    out
}

/// Drive one full episode of `policy` through `env`, optionally injecting a
/// perturbation mask over the contiguous window `[t_start, t_start + M)`.
///
/// The trace records the observation the policy actually received at each
/// step. If the episode ends before the window begins, the trace comes back
/// with zero perturbed steps and `window_entered == false`.
pub fn run_episode<T: Scalar>(
    policy: &mut dyn ActionPolicy<T>,
    env: &mut dyn Env<T>,
    seed: u64,
    perturbation: Option<PerturbWindow<'_, T>>,
) -> EpisodeTrace<T> {
    policy.begin_episode();
    let mut state = env.reset();
    let mut steps = Vec::new();
    let mut total = T::zero();
    let mut t = 0usize;
    let mut window_entered = false;
    loop {
        let in_window = perturbation
            .as_ref()
            .map(|p| t >= p.t_start && t < p.t_start + p.window_len)
            .unwrap_or(false);
        let fed = if in_window {
            window_entered = true;
            apply_mask(&state.view(), perturbation.as_ref().expect("in_window implies Some").mask)
        } else {
            state.clone()
        };
        let action = policy.act(&fed.view());
        let tr = env.step(action);
        total = total + tr.reward;
        steps.push(TraceStep { t, state: fed, action, reward: tr.reward, perturbed: in_window });
        t += 1;
        if tr.done {
            break;
        }
        state = tr.state;
    }
    EpisodeTrace { seed, steps, return_total: total, window_entered }
}

/// The documented worst-action rule for an environment.
pub struct WorstPolicy {
    env_id: EnvId,
}

impl WorstPolicy {
    pub fn new(env_id: EnvId) -> Self {
        Self { env_id }
    }
}

impl<T: Scalar> ActionPolicy<T> for WorstPolicy {
    fn act(&mut self, state: &ArrayView1<T>) -> usize {
        match self.env_id {
            EnvId::Rally => rally::worst_action(state),
            // Idle-until-caught: hold the spawn cell (movement is clamped at
            // the wall), eating nothing while the enemies converge.
            EnvId::Chase => 0,
        }
    }

    fn action_count(&self) -> usize {
        spec_of(self.env_id).action_count
    }
}

/// Return of the documented worst-action rule; the denominator floor of the
/// utility-impact metrics. Deterministic given `(env_id, seed)`.
pub fn worst_case_return<T: Scalar>(env_id: EnvId, seed: u64) -> T {
    let mut env = make_env::<T>(env_id, seed);
    let mut policy = WorstPolicy::new(env_id);
    run_episode(&mut policy, env.as_mut(), seed, None).return_total
}

/// A policy that always answers the same action; the documented idle rule.
pub struct ConstantPolicy {
    pub action: usize,
    pub action_count: usize,
}

impl<T: Scalar> ActionPolicy<T> for ConstantPolicy {
    fn act(&mut self, _state: &ArrayView1<T>) -> usize {
        self.action
    }
    fn action_count(&self) -> usize {
        self.action_count
    }
}

/// Machine-readable description of one environment, frozen alongside the
/// measured regression scores shipped in `manifests/envs.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvManifestEntry {
    pub env_id: String,
    pub action_count: usize,
    pub action_meanings: Vec<String>,
    pub state_shape: Vec<usize>,
    pub horizon_cap: usize,
    pub reward_floor_policy: String,
    /// Return of the constant-action-0 idle rule on probe seed 0.
    pub idle_score_seed0: f64,
    /// Return of the worst-action rule on probe seeds 0..3.
    pub worst_scores_seeds0_2: Vec<f64>,
    /// Mean evaluation return a freshly trained policy is expected to reach
    /// with the documented default training configuration.
    pub solved_bar: f64,
}

/// Generate the manifest entries from the live implementations.
pub fn manifest() -> Vec<EnvManifestEntry> {
    vec![rally::manifest_entry(), chase::manifest_entry()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scripted_actions(n: usize) -> Vec<usize> {
        (0..n).map(|i| (i * 7 + 3) % 4).collect()
    }

    struct Scripted {
        actions: Vec<usize>,
        i: usize,
    }

    impl<T: Scalar> ActionPolicy<T> for Scripted {
        fn act(&mut self, _state: &ArrayView1<T>) -> usize {
            let a = self.actions[self.i % self.actions.len()];
            self.i += 1;
            a
        }
        fn action_count(&self) -> usize {
            4
        }
    }

    #[test]
    fn unknown_env_names_known_ids() {
        let Err(err) = make_env_by_name::<f32>("nosuch", 0).map(|_| ()) else {
            panic!("expected registry error");
        };
        let msg = err.to_string();
        assert!(msg.contains("nosuch"));
        assert!(msg.contains("rally"));
        assert!(msg.contains("chase"));
    }

    #[test]
    fn identical_seed_and_actions_give_identical_traces() {
        for id in [EnvId::Rally, EnvId::Chase] {
            let mut a = Scripted { actions: scripted_actions(31), i: 0 };
            let mut b = Scripted { actions: scripted_actions(31), i: 0 };
            let mut env_a = make_env::<f64>(id, 7);
            let mut env_b = make_env::<f64>(id, 7);
            let ta = run_episode(&mut a, env_a.as_mut(), 7, None);
            let tb = run_episode(&mut b, env_b.as_mut(), 7, None);
            assert_eq!(ta.len(), tb.len());
            assert_eq!(ta.return_total, tb.return_total);
            for (sa, sb) in ta.steps.iter().zip(&tb.steps) {
                assert_eq!(sa.state, sb.state, "bitwise state mismatch in {id}");
                assert_eq!(sa.action, sb.action);
                assert_eq!(sa.reward, sb.reward);
            }
        }
    }

    #[test]
    fn states_stay_in_unit_range() {
        for id in [EnvId::Rally, EnvId::Chase] {
            let mut p = Scripted { actions: scripted_actions(17), i: 0 };
            let mut env = make_env::<f32>(id, 3);
            let trace = run_episode(&mut p, env.as_mut(), 3, None);
            for step in &trace.steps {
                for &v in step.state.iter() {
                    assert!((0.0..=1.0).contains(&v), "{id} emitted {v}");
                }
            }
            trace.validate().unwrap();
        }
    }

    #[test]
    fn zero_mask_is_identity() {
        let mut env = make_env::<f64>(EnvId::Rally, 5);
        let dim = env.spec().state_dim();
        let zero = Array1::zeros(dim);
        let mut p1 = Scripted { actions: scripted_actions(13), i: 0 };
        let mut p2 = Scripted { actions: scripted_actions(13), i: 0 };
        let clean = run_episode(&mut p1, env.as_mut(), 5, None);
        let mut env2 = make_env::<f64>(EnvId::Rally, 5);
        let masked = run_episode(
            &mut p2,
            env2.as_mut(),
            5,
            Some(PerturbWindow { mask: &zero, t_start: 0, window_len: 10 }),
        );
        assert_eq!(clean.len(), masked.len());
        for (a, b) in clean.steps.iter().zip(&masked.steps) {
            assert_eq!(a.action, b.action);
            assert_eq!(a.state, b.state);
        }
        assert_eq!(masked.perturbed_count(), 10);
        assert!(masked.window_entered);
    }

    #[test]
    fn window_accounting_counts_min_of_window_and_remaining() {
        let mut env = make_env::<f64>(EnvId::Chase, 11);
        let dim = env.spec().state_dim();
        let mask = Array1::from_elem(dim, 0.05);
        let mut p = Scripted { actions: scripted_actions(9), i: 0 };
        let trace = run_episode(
            &mut p,
            env.as_mut(),
            11,
            Some(PerturbWindow { mask: &mask, t_start: 4, window_len: 1_000 }),
        );
        assert!(trace.window_entered);
        assert_eq!(trace.perturbed_count(), trace.len().saturating_sub(4));
        trace.validate().unwrap();
    }

    #[test]
    fn window_after_episode_end_flags_not_entered() {
        let mut env = make_env::<f64>(EnvId::Chase, 2);
        let dim = env.spec().state_dim();
        let mask = Array1::from_elem(dim, 0.05);
        let mut p = Scripted { actions: vec![0], i: 0 }; // idle: caught quickly
        let trace = run_episode(
            &mut p,
            env.as_mut(),
            2,
            Some(PerturbWindow { mask: &mask, t_start: 100_000, window_len: 40 }),
        );
        assert!(!trace.window_entered);
        assert_eq!(trace.perturbed_count(), 0);
    }

    #[test]
    fn perturbed_states_clip_to_unit_range() {
        let mut env = make_env::<f64>(EnvId::Rally, 1);
        let dim = env.spec().state_dim();
        let mask = Array1::from_elem(dim, 0.8);
        let mut p = Scripted { actions: scripted_actions(5), i: 0 };
        let trace = run_episode(
            &mut p,
            env.as_mut(),
            1,
            Some(PerturbWindow { mask: &mask, t_start: 0, window_len: 50 }),
        );
        for step in trace.steps.iter().filter(|s| s.perturbed) {
            for &v in step.state.iter() {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn worst_case_return_is_deterministic() {
        for id in [EnvId::Rally, EnvId::Chase] {
            let a: f64 = worst_case_return(id, 9);
            let b: f64 = worst_case_return(id, 9);
            assert_eq!(a, b);
        }
    }
}
