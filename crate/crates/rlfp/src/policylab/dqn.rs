//! Q-learning with a dueling head, replay buffer and target network.

use ndarray::{Array1, Array2};
use rand::Rng;

use super::net::{argmax_lowest, Adam, Net, NetArch};
use super::{adversarial_shift, Budget, TrainConfig, TrainOpts};
use crate::envlab::{self, EnvId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

struct Replay<T: Scalar> {
    state: Vec<Array1<T>>,
    action: Vec<usize>,
    reward: Vec<T>,
    next_state: Vec<Array1<T>>,
    done: Vec<bool>,
    capacity: usize,
    head: usize,
    full: bool,
}

impl<T: Scalar> Replay<T> {
    fn new(capacity: usize) -> Self {
        Self {
            state: Vec::with_capacity(capacity),
            action: Vec::with_capacity(capacity),
            reward: Vec::with_capacity(capacity),
            next_state: Vec::with_capacity(capacity),
            done: Vec::with_capacity(capacity),
            capacity,
            head: 0,
            full: false,
        }
    }

    fn push(&mut self, s: Array1<T>, a: usize, r: T, s2: Array1<T>, d: bool) {
        if self.full {
            self.state[self.head] = s;
            self.action[self.head] = a;
            self.reward[self.head] = r;
            self.next_state[self.head] = s2;
            self.done[self.head] = d;
        } else {
            self.state.push(s);
            self.action.push(a);
            self.reward.push(r);
            self.next_state.push(s2);
            self.done.push(d);
        }
        self.head = (self.head + 1) % self.capacity;
        if self.head == 0 && !self.state.is_empty() && self.state.len() == self.capacity {
            self.full = true;
        }
    }

    fn len(&self) -> usize {
        self.state.len()
    }
}

pub(super) fn train<T: Scalar>(
    cfg: &TrainConfig,
    env_id: EnvId,
    arch: &NetArch,
    opts: &TrainOpts<T>,
) -> Result<Net<T>> {
    let mut init_rng = seed::rng(cfg.seed, &format!("{}-dqn-init", opts.seed_label), 0);
    let mut net = match &opts.initial {
        Some(n) => n.clone(),
        None => Net::new(arch, &mut init_rng),
    };
    let mut target = net.clone();
    let mut adam = Adam::new(&net, cfg.learning_rate);
    let mut replay = Replay::new(cfg.replay_capacity);
    let mut act_rng = seed::rng(cfg.seed, &format!("{}-dqn-explore", opts.seed_label), 0);
    let mut sample_rng = seed::rng(cfg.seed, &format!("{}-dqn-sample", opts.seed_label), 0);

    let continuing = opts.initial.is_some();
    let (step_budget, episode_budget) = match cfg.budget {
        Budget::Steps(n) => (n, u64::MAX),
        Budget::Episodes(n) => (u64::MAX, n),
    };

    let mut steps = 0u64;
    let mut episodes = 0u64;
    let gamma = T::from_cfg(cfg.gamma);

    'outer: while steps < step_budget && episodes < episode_budget {
        let ep_seed = seed::derive(cfg.seed, &format!("{}-dqn-episode", opts.seed_label), episodes);
        let mut env = envlab::make_env::<T>(env_id, ep_seed);
        let mut state = env.reset();
        loop {
            // Epsilon-greedy behavior; continued training keeps the floor rate.
            let eps = if continuing {
                cfg.eps_end
            } else {
                let frac = (steps as f64 / cfg.eps_decay_steps as f64).min(1.0);
                cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac
            };
            let action = if act_rng.random::<f64>() < eps {
                act_rng.random_range(0..arch.action_count)
            } else {
                let cache = net.forward(&state.view());
                argmax_lowest(&net.scores(&cache).view())
            };
            let tr = env.step(action);
            replay.push(state.clone(), action, tr.reward, tr.state.clone(), tr.done);
            state = tr.state;
            steps += 1;

            if replay.len() >= cfg.learn_start.max(cfg.batch_size)
                && steps % cfg.train_freq as u64 == 0
            {
                update(&mut net, &target, &mut adam, &replay, cfg, opts, gamma, &mut sample_rng)?;
            }
            if steps % cfg.target_sync as u64 == 0 {
                target = net.clone();
            }
            if tr.done {
                break;
            }
            if steps >= step_budget {
                break 'outer;
            }
        }
        episodes += 1;
    }
    Ok(net)
}

#[allow(clippy::too_many_arguments)]
fn update<T: Scalar, R: Rng>(
    net: &mut Net<T>,
    target: &Net<T>,
    adam: &mut Adam<T>,
    replay: &Replay<T>,
    cfg: &TrainConfig,
    opts: &TrainOpts<T>,
    gamma: T,
    rng: &mut R,
) -> Result<()> {
    let b = cfg.batch_size;
    let dim = net.input_dim();
    let mut states = Array2::zeros((b, dim));
    let mut next_states = Array2::zeros((b, dim));
    let mut actions = vec![0usize; b];
    let mut rewards = Array1::zeros(b);
    let mut dones = vec![false; b];
    for i in 0..b {
        let j = rng.random_range(0..replay.len());
        let s = if opts.adv_eps > 0.0 {
            adversarial_shift(net, &replay.state[j].view(), opts.adv_eps)
        } else {
            replay.state[j].clone()
        };
        states.row_mut(i).assign(&s);
        next_states.row_mut(i).assign(&replay.next_state[j]);
        actions[i] = replay.action[j];
        rewards[i] = replay.reward[j];
        dones[i] = replay.done[j];
    }

    let target_cache = target.forward_batch(&next_states.view());
    let target_q = target.scores_batch(&target_cache);
    let cache = net.forward_batch(&states.view());
    let q = net.scores_batch(&cache);

    // Squared TD error on the chosen action only.
    let mut d_scores = Array2::zeros((b, net.action_count()));
    let mut loss = T::zero();
    for i in 0..b {
        let max_next = target_q
            .row(i)
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max);
        let not_done = if dones[i] { T::zero() } else { T::one() };
        let y = rewards[i] + gamma * not_done * max_next;
        let td = q[(i, actions[i])] - y;
        loss = loss + td * td;
        d_scores[(i, actions[i])] = T::from_cfg(2.0) * td / T::from_cfg(b as f64);
    }
    if !loss.is_finite() {
        return Err(Error::Training(format!(
            "Q loss diverged to {loss} (lr {}, batch {})",
            cfg.learning_rate, b
        )));
    }

    // Map score-space gradients through the dueling combination.
    let mean = d_scores.mean_axis(ndarray::Axis(1)).expect("actions non-empty");
    let d_aux = d_scores.sum_axis(ndarray::Axis(1));
    let mut d_main = d_scores;
    for (mut row, &m) in d_main.axis_iter_mut(ndarray::Axis(0)).zip(mean.iter()) {
        row.mapv_inplace(|g| g - m);
    }
    let grads = net.backward_batch(&cache, &d_main, &d_aux);
    if !grads.is_finite() {
        return Err(Error::Training("non-finite gradient in Q update".into()));
    }
    adam.step(net, &grads);
    Ok(())
}
