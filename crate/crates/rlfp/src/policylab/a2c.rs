//! Advantage actor-critic with short synchronous rollouts.

use ndarray::{Array1, Array2};

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
    let mut init_rng = seed::rng(cfg.seed, &format!("{}-a2c-init", opts.seed_label), 0);
    let mut net = match &opts.initial {
        Some(n) => n.clone(),
        None => Net::new(arch, &mut init_rng),
    };
    let mut adam = Adam::new(&net, cfg.learning_rate);
    let mut act_rng = seed::rng(cfg.seed, &format!("{}-a2c-act", opts.seed_label), 0);

    let (step_budget, episode_budget) = match cfg.budget {
        Budget::Steps(n) => (n, u64::MAX),
        Budget::Episodes(n) => (u64::MAX, n),
    };

    let mut steps = 0u64;
    let mut episodes = 0u64;
    let gamma = T::from_cfg(cfg.gamma);

    let mut env: Option<Box<dyn Env<T>>> = None;
    let mut state: Array1<T> = Array1::zeros(arch.input_dim);

    while steps < step_budget && episodes < episode_budget {
        // Rollout buffers.
        let mut states = Vec::with_capacity(cfg.rollout);
        let mut actions = Vec::with_capacity(cfg.rollout);
        let mut rewards: Vec<T> = Vec::with_capacity(cfg.rollout);
        let mut dones = Vec::with_capacity(cfg.rollout);

        for _ in 0..cfg.rollout {
            if env.is_none() {
                let ep_seed =
                    seed::derive(cfg.seed, &format!("{}-a2c-episode", opts.seed_label), episodes);
                let mut e = envlab::make_env::<T>(env_id, ep_seed);
                state = e.reset();
                env = Some(e);
            }
            let cache = net.forward(&state.view());
            let logits = net.scores(&cache);
            let action = sample_categorical(&logits.view(), &mut act_rng);
            let tr = env.as_mut().expect("env exists").step(action);
            states.push(state.clone());
            actions.push(action);
            rewards.push(tr.reward);
            dones.push(tr.done);
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

        // Bootstrapped discounted returns.
        let n = states.len();
        let mut returns = vec![T::zero(); n];
        let mut running = if dones[n - 1] || env.is_none() {
            T::zero()
        } else {
            net.forward(&state.view()).aux
        };
        for i in (0..n).rev() {
            running = rewards[i] + gamma * if dones[i] { T::zero() } else { running };
            returns[i] = running;
            if dones[i] {
                running = T::zero();
            }
        }

        update(&mut net, &mut adam, cfg, opts, &states, &actions, &returns)?;
    }
    Ok(net)
}

fn update<T: Scalar>(
    net: &mut Net<T>,
    adam: &mut Adam<T>,
    cfg: &TrainConfig,
    opts: &TrainOpts<T>,
    states: &[Array1<T>],
    actions: &[usize],
    returns: &[T],
) -> Result<()> {
    let n = states.len();
    let dim = net.input_dim();
    let a_count = net.action_count();
    let mut batch = Array2::zeros((n, dim));
    for (i, s) in states.iter().enumerate() {
        let s = if opts.adv_eps > 0.0 {
            adversarial_shift(net, &s.view(), opts.adv_eps)
        } else {
            s.clone()
        };
        batch.row_mut(i).assign(&s);
    }
    let cache = net.forward_batch(&batch.view());
    let logits = net.scores_batch(&cache);

    let inv_n = T::from_cfg(1.0 / n as f64);
    let ent = T::from_cfg(cfg.entropy_coef);
    let vcoef = T::from_cfg(cfg.value_coef);

    let mut d_main = Array2::zeros((n, a_count));
    let mut d_aux = Array1::zeros(n);
    let mut loss_probe = T::zero();
    for i in 0..n {
        let row = logits.row(i);
        let logp = log_softmax(&row);
        let p = softmax(&row);
        let value = cache.aux[i];
        let adv = returns[i] - value;
        let entropy = -p.iter().zip(logp.iter()).map(|(&pi, &li)| pi * li).sum::<T>();
        loss_probe = loss_probe - logp[actions[i]] * adv;
        for a in 0..a_count {
            let onehot = if a == actions[i] { T::one() } else { T::zero() };
            // policy gradient + entropy bonus gradient
            let pg = adv * (p[a] - onehot);
            let ent_g = ent * p[a] * (logp[a] + entropy);
            d_main[(i, a)] = (pg + ent_g) * inv_n;
        }
        d_aux[i] = vcoef * (value - returns[i]) * inv_n;
    }
    if !loss_probe.is_finite() {
        return Err(Error::Training(format!("policy loss diverged to {loss_probe}")));
    }
    let grads = net.backward_batch(&cache, &d_main, &d_aux);
    if !grads.is_finite() {
        return Err(Error::Training("non-finite gradient in actor-critic update".into()));
    }
    adam.step(net, &grads);
    Ok(())
}
