//! Proximal policy optimization with clipped ratios and GAE.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;

use super::net::{log_softmax, sample_categorical, softmax, Adam, Net, NetArch};
use super::{adversarial_shift, Budget, TrainConfig, TrainOpts};
use crate::envlab::{self, Env, EnvId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

pub(super) fn train<T: Scalar>(
    cfg: &TrainConfig,
    env_id: EnvId,
    arch: &NetArch,
    opts: &TrainOpts<T>,
) -> Result<Net<T>> {
    let mut init_rng = seed::rng(cfg.seed, &format!("{}-ppo-init", opts.seed_label), 0);
    let mut net = match &opts.initial {
        Some(n) => n.clone(),
        None => Net::new(arch, &mut init_rng),
    };
    let mut adam = Adam::new(&net, cfg.learning_rate);
    let mut act_rng = seed::rng(cfg.seed, &format!("{}-ppo-act", opts.seed_label), 0);
    let mut shuffle_rng = seed::rng(cfg.seed, &format!("{}-ppo-shuffle", opts.seed_label), 0);

    let (step_budget, episode_budget) = match cfg.budget {
        Budget::Steps(n) => (n, u64::MAX),
        Budget::Episodes(n) => (u64::MAX, n),
    };

    let mut steps = 0u64;
    let mut episodes = 0u64;
    let gamma = T::from_cfg(cfg.gamma);
    let lambda = T::from_cfg(cfg.gae_lambda);

    let mut env: Option<Box<dyn Env<T>>> = None;
    let mut state: Array1<T> = Array1::zeros(arch.input_dim);

    while steps < step_budget && episodes < episode_budget {
        let mut states = Vec::with_capacity(cfg.rollout);
        let mut actions = Vec::with_capacity(cfg.rollout);
        let mut rewards: Vec<T> = Vec::with_capacity(cfg.rollout);
        let mut dones = Vec::with_capacity(cfg.rollout);
        let mut values: Vec<T> = Vec::with_capacity(cfg.rollout);
        let mut old_logp: Vec<T> = Vec::with_capacity(cfg.rollout);

        for _ in 0..cfg.rollout {
            if env.is_none() {
                let ep_seed =
                    seed::derive(cfg.seed, &format!("{}-ppo-episode", opts.seed_label), episodes);
                let mut e = envlab::make_env::<T>(env_id, ep_seed);
                state = e.reset();
                env = Some(e);
            }
            let cache = net.forward(&state.view());
            let logits = net.scores(&cache);
            let action = sample_categorical(&logits.view(), &mut act_rng);
            let logp = log_softmax(&logits.view())[action];
            let tr = env.as_mut().expect("env exists").step(action);
            states.push(state.clone());
            actions.push(action);
            rewards.push(tr.reward);
            dones.push(tr.done);
            values.push(cache.aux);
            old_logp.push(logp);
            steps += 1;
            if tr.done {
                env = None;
                episodes += 1;
                if episodes >= episode_budget {
                    break;
                }
            } else {
                state = tr.state;
            }
            if steps >= step_budget {
                break;
            }
        }
        if states.is_empty() {
            break;
        }

        // GAE advantages and value targets.
        let n = states.len();
        let tail_value = if dones[n - 1] || env.is_none() {
            T::zero()
        } else {
            net.forward(&state.view()).aux
        };
        let mut adv = vec![T::zero(); n];
        let mut gae = T::zero();
        for i in (0..n).rev() {
            let next_v = if dones[i] {
                T::zero()
            } else if i + 1 < n {
                values[i + 1]
            } else {
                tail_value
            };
            let not_done = if dones[i] { T::zero() } else { T::one() };
            let delta = rewards[i] + gamma * next_v - values[i];
            gae = delta + gamma * lambda * not_done * gae;
            adv[i] = gae;
            if dones[i] {
                gae = T::zero();
            }
        }
        let targets: Vec<T> = adv.iter().zip(values.iter()).map(|(&a, &v)| a + v).collect();

        // Normalize advantages.
        let mean = adv.iter().copied().sum::<T>() / T::from_cfg(n as f64);
        let var = adv.iter().map(|&a| (a - mean) * (a - mean)).sum::<T>() / T::from_cfg(n as f64);
        let std = var.sqrt() + T::from_cfg(1e-8);
        for a in adv.iter_mut() {
            *a = (*a - mean) / std;
        }

        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..cfg.ppo_epochs {
            order.shuffle(&mut shuffle_rng);
            for mb in order.chunks(cfg.minibatch) {
                update(&mut net, &mut adam, cfg, opts, mb, &states, &actions, &adv, &targets, &old_logp)?;
            }
        }
    }
    Ok(net)
}

#[allow(clippy::too_many_arguments)]
fn update<T: Scalar>(
    net: &mut Net<T>,
    adam: &mut Adam<T>,
    cfg: &TrainConfig,
    opts: &TrainOpts<T>,
    mb: &[usize],
    states: &[Array1<T>],
    actions: &[usize],
    adv: &[T],
    targets: &[T],
    old_logp: &[T],
) -> Result<()> {
    let n = mb.len();
    let dim = net.input_dim();
    let a_count = net.action_count();
    let mut batch = Array2::zeros((n, dim));
    for (row, &j) in mb.iter().enumerate() {
        let s = if opts.adv_eps > 0.0 {
            adversarial_shift(net, &states[j].view(), opts.adv_eps)
        } else {
            states[j].clone()
        };
        batch.row_mut(row).assign(&s);
    }
    let cache = net.forward_batch(&batch.view());
    let logits = net.scores_batch(&cache);

    let inv_n = T::from_cfg(1.0 / n as f64);
    let clip = T::from_cfg(cfg.clip_ratio);
    let ent = T::from_cfg(cfg.entropy_coef);
    let vcoef = T::from_cfg(cfg.value_coef);

    let mut d_main = Array2::zeros((n, a_count));
    let mut d_aux = Array1::zeros(n);
    let mut probe = T::zero();
    for (row, &j) in mb.iter().enumerate() {
        let lrow = logits.row(row);
        let logp = log_softmax(&lrow);
        let p = softmax(&lrow);
        let ratio = (logp[actions[j]] - old_logp[j]).exp();
        let a = adv[j];
        probe = probe + ratio;
        // The clipped branch contributes no policy gradient.
        let active = if a > T::zero() { ratio < T::one() + clip } else { ratio > T::one() - clip };
        let entropy = -p.iter().zip(logp.iter()).map(|(&pi, &li)| pi * li).sum::<T>();
        for k in 0..a_count {
            let onehot = if k == actions[j] { T::one() } else { T::zero() };
            let pg = if active { -a * ratio * (onehot - p[k]) } else { T::zero() };
            let ent_g = ent * p[k] * (logp[k] + entropy);
            d_main[(row, k)] = (pg + ent_g) * inv_n;
        }
        d_aux[row] = vcoef * (cache.aux[row] - targets[j]) * inv_n;
    }
    if !probe.is_finite() {
        return Err(Error::Training("probability ratio diverged".into()));
    }
    let grads = net.backward_batch(&cache, &d_main, &d_aux);
    if !grads.is_finite() {
        return Err(Error::Training("non-finite gradient in clipped-ratio update".into()));
    }
    adam.step(net, &grads);
    Ok(())
}
