//! Dense networks with manual forward/backward passes.
//!
//! Two head layouts cover all three algorithms: a dueling head (state value
//! plus mean-centered advantages) for Q-learning, and an actor-critic head
//! (action logits plus a value output) for the policy-gradient methods.
//! Backward passes produce parameter gradients and input gradients from the
//! same traversal; input gradients drive mask generation.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Fully connected layer computing `w . x + b` with `w` stored `out x in`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Linear<T: Scalar> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> Linear<T> {
    fn kaiming<R: Rng + ?Sized>(rng: &mut R, in_dim: usize, out_dim: usize) -> Self {
        let bound = (6.0 / in_dim as f64).sqrt();
        let w = Array2::from_shape_fn((out_dim, in_dim), |_| {
            T::from_cfg((T::sample_unit(rng).as_f64() * 2.0 - 1.0) * bound)
        });
        Self { w, b: Array1::zeros(out_dim) }
    }

    fn fwd(&self, x: &ArrayView1<T>) -> Array1<T> {
        self.w.dot(x) + &self.b
    }

    fn fwd_batch(&self, x: &ArrayView2<T>) -> Array2<T> {
        x.dot(&self.w.t()) + &self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    Dueling,
    ActorCritic,
}

/// Network architecture descriptor; persisted with checkpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetArch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub action_count: usize,
    pub kind: HeadKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Net<T: Scalar> {
    pub torso: Vec<Linear<T>>,
    pub head_main: Linear<T>,
    pub head_aux: Linear<T>,
    pub kind: HeadKind,
}

/// Cached intermediate values of a single-state forward pass.
pub struct Cache<T: Scalar> {
    /// `acts[0]` is the input; `acts[i]` the activation entering layer `i`.
    acts: Vec<Array1<T>>,
    pre: Vec<Array1<T>>,
    pub main: Array1<T>,
    pub aux: T,
}

/// Cached intermediate values of a batched forward pass.
pub struct CacheBatch<T: Scalar> {
    acts: Vec<Array2<T>>,
    pre: Vec<Array2<T>>,
    pub main: Array2<T>,
    pub aux: Array1<T>,
}

/// Gradients (or Adam moments) shaped like a [`Net`].
#[derive(Debug, Clone)]
pub struct ParamGrads<T: Scalar> {
    pub torso: Vec<(Array2<T>, Array1<T>)>,
    pub main: (Array2<T>, Array1<T>),
    pub aux: (Array2<T>, Array1<T>),
}

impl<T: Scalar> Net<T> {
    pub fn new<R: Rng + ?Sized>(arch: &NetArch, rng: &mut R) -> Self {
        let mut torso = Vec::new();
        let mut dim = arch.input_dim;
        for &h in &arch.hidden {
            torso.push(Linear::kaiming(rng, dim, h));
            dim = h;
        }
        Self {
            torso,
            head_main: Linear::kaiming(rng, dim, arch.action_count),
            head_aux: Linear::kaiming(rng, dim, 1),
            kind: arch.kind,
        }
    }

    pub fn arch(&self) -> NetArch {
        NetArch {
            input_dim: self.torso.first().map(|l| l.w.ncols()).unwrap_or(self.head_main.w.ncols()),
            hidden: self.torso.iter().map(|l| l.w.nrows()).collect(),
            action_count: self.head_main.w.nrows(),
            kind: self.kind,
        }
    }

    pub fn action_count(&self) -> usize {
        self.head_main.w.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.torso.first().map(|l| l.w.ncols()).unwrap_or(self.head_main.w.ncols())
    }

    pub fn forward(&self, x: &ArrayView1<T>) -> Cache<T> {
        let mut acts = Vec::with_capacity(self.torso.len() + 1);
        let mut pre = Vec::with_capacity(self.torso.len());
        acts.push(x.to_owned());
        for layer in &self.torso {
            let z = layer.fwd(&acts.last().expect("acts non-empty").view());
            let a = z.mapv(|v| if v > T::zero() { v } else { T::zero() });
            pre.push(z);
            acts.push(a);
        }
        let h = acts.last().expect("acts non-empty").view();
        let main = self.head_main.fwd(&h);
        let aux = self.head_aux.fwd(&h)[0];
        Cache { acts, pre, main, aux }
    }

    pub fn forward_batch(&self, x: &ArrayView2<T>) -> CacheBatch<T> {
        let mut acts = Vec::with_capacity(self.torso.len() + 1);
        let mut pre = Vec::with_capacity(self.torso.len());
        acts.push(x.to_owned());
        for layer in &self.torso {
            let z = layer.fwd_batch(&acts.last().expect("acts non-empty").view());
            let a = z.mapv(|v| if v > T::zero() { v } else { T::zero() });
            pre.push(z);
            acts.push(a);
        }
        let h = acts.last().expect("acts non-empty").view();
        let main = self.head_main.fwd_batch(&h);
        let aux = self.head_aux.fwd_batch(&h).index_axis(Axis(1), 0).to_owned();
        CacheBatch { acts, pre, main, aux }
    }

    /// Action scores: Q-values for the dueling head, raw logits for the
    /// actor-critic head.
    pub fn scores(&self, cache: &Cache<T>) -> Array1<T> {
        match self.kind {
            HeadKind::Dueling => {
                let mean = cache.main.iter().copied().sum::<T>()
                    / T::from_cfg(cache.main.len() as f64);
                cache.main.mapv(|a| cache.aux + a - mean)
            }
            HeadKind::ActorCritic => cache.main.clone(),
        }
    }

    pub fn scores_batch(&self, cache: &CacheBatch<T>) -> Array2<T> {
        match self.kind {
            HeadKind::Dueling => {
                let mean = cache.main.mean_axis(Axis(1)).expect("non-empty actions");
                let mut q = cache.main.clone();
                for (mut row, (&m, &v)) in
                    q.axis_iter_mut(Axis(0)).zip(mean.iter().zip(cache.aux.iter()))
                {
                    row.mapv_inplace(|a| v + a - m);
                }
                q
            }
            HeadKind::ActorCritic => cache.main.clone(),
        }
    }

    /// Convert a gradient w.r.t. the score vector into head-space gradients.
    fn score_grad_to_heads(&self, dscores: &Array1<T>) -> (Array1<T>, T) {
        match self.kind {
            HeadKind::Dueling => {
                let mean =
                    dscores.iter().copied().sum::<T>() / T::from_cfg(dscores.len() as f64);
                let d_main = dscores.mapv(|g| g - mean);
                let d_aux = dscores.iter().copied().sum::<T>();
                (d_main, d_aux)
            }
            HeadKind::ActorCritic => (dscores.clone(), T::zero()),
        }
    }

    /// Backward pass from head-space gradients. Returns parameter gradients
    /// (when requested) and the gradient w.r.t. the input.
    pub fn backward(
        &self,
        cache: &Cache<T>,
        d_main: &Array1<T>,
        d_aux: T,
        want_params: bool,
    ) -> (Option<ParamGrads<T>>, Array1<T>) {
        let h_grad_main = self.head_main.w.t().dot(d_main);
        let h_grad_aux = self.head_aux.w.row(0).mapv(|w| w * d_aux);
        let mut dh = h_grad_main + h_grad_aux;

        let mut grads = want_params.then(|| ParamGrads {
            torso: self
                .torso
                .iter()
                .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.len())))
                .collect(),
            main: (outer(d_main, &cache.acts.last().expect("acts").view()), d_main.clone()),
            aux: (
                outer(&Array1::from_elem(1, d_aux), &cache.acts.last().expect("acts").view()),
                Array1::from_elem(1, d_aux),
            ),
        });

        for i in (0..self.torso.len()).rev() {
            let dpre = ndarray::Zip::from(&dh)
                .and(&cache.pre[i])
                .map_collect(|&g, &z| if z > T::zero() { g } else { T::zero() });
            if let Some(g) = grads.as_mut() {
                g.torso[i] = (outer(&dpre, &cache.acts[i].view()), dpre.clone());
            }
            dh = self.torso[i].w.t().dot(&dpre);
        }
        (grads, dh)
    }

    /// Batched backward pass; parameter gradients are summed over the batch.
    pub fn backward_batch(
        &self,
        cache: &CacheBatch<T>,
        d_main: &Array2<T>,
        d_aux: &Array1<T>,
    ) -> ParamGrads<T> {
        let h = cache.acts.last().expect("acts");
        let main_w = d_main.t().dot(h);
        let main_b = d_main.sum_axis(Axis(0));
        let aux_col = d_aux.view().insert_axis(Axis(1));
        let aux_w = aux_col.t().dot(h);
        let aux_b = Array1::from_elem(1, d_aux.iter().copied().sum::<T>());

        let mut dh = d_main.dot(&self.head_main.w) + aux_col.dot(&self.head_aux.w);
        let mut torso = vec![(Array2::zeros((0, 0)), Array1::zeros(0)); self.torso.len()];
        for i in (0..self.torso.len()).rev() {
            let dpre = ndarray::Zip::from(&dh)
                .and(&cache.pre[i])
                .map_collect(|&g, &z| if z > T::zero() { g } else { T::zero() });
            torso[i] = (dpre.t().dot(&cache.acts[i]), dpre.sum_axis(Axis(0)));
            dh = dpre.dot(&self.torso[i].w);
        }
        ParamGrads { torso, main: (main_w, main_b), aux: (aux_w, aux_b) }
    }

    /// Gradient of the score vector contracted with `dscores`, w.r.t. the
    /// input state.
    pub fn input_gradient_scores(&self, x: &ArrayView1<T>, dscores: &Array1<T>) -> Array1<T> {
        let cache = self.forward(x);
        let (d_main, d_aux) = self.score_grad_to_heads(dscores);
        let (_, dx) = self.backward(&cache, &d_main, d_aux, false);
        dx
    }

    /// Flat view of every parameter, in a stable canonical order.
    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::new();
        for l in &self.torso {
            out.extend(l.w.iter().copied());
            out.extend(l.b.iter().copied());
        }
        out.extend(self.head_main.w.iter().copied());
        out.extend(self.head_main.b.iter().copied());
        out.extend(self.head_aux.w.iter().copied());
        out.extend(self.head_aux.b.iter().copied());
        out
    }

    pub fn param_count(&self) -> usize {
        self.torso.iter().map(|l| l.w.len() + l.b.len()).sum::<usize>()
            + self.head_main.w.len()
            + self.head_main.b.len()
            + self.head_aux.w.len()
            + self.head_aux.b.len()
    }
}

fn outer<T: Scalar>(a: &Array1<T>, b: &ArrayView1<T>) -> Array2<T> {
    let (n, m) = (a.len(), b.len());
    let mut out = Array2::zeros((n, m));
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[(i, j)] = ai * bj;
        }
    }
    out
}

impl<T: Scalar> ParamGrads<T> {
    pub fn zeros_like(net: &Net<T>) -> Self {
        Self {
            torso: net
                .torso
                .iter()
                .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.len())))
                .collect(),
            main: (Array2::zeros(net.head_main.w.dim()), Array1::zeros(net.head_main.b.len())),
            aux: (Array2::zeros(net.head_aux.w.dim()), Array1::zeros(net.head_aux.b.len())),
        }
    }

    pub fn scale(&mut self, factor: T) {
        let f = |a: &mut Array2<T>, b: &mut Array1<T>| {
            a.mapv_inplace(|v| v * factor);
            b.mapv_inplace(|v| v * factor);
        };
        for (w, b) in &mut self.torso {
            f(w, b);
        }
        f(&mut self.main.0, &mut self.main.1);
        f(&mut self.aux.0, &mut self.aux.1);
    }

    pub fn is_finite(&self) -> bool {
        let ok = |a: &Array2<T>, b: &Array1<T>| {
            a.iter().all(|v| v.is_finite()) && b.iter().all(|v| v.is_finite())
        };
        self.torso.iter().all(|(w, b)| ok(w, b))
            && ok(&self.main.0, &self.main.1)
            && ok(&self.aux.0, &self.aux.1)
    }
}

/// Adam optimizer with per-parameter moment estimates.
#[derive(Debug, Clone)]
pub struct Adam<T: Scalar> {
    pub lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    t: i32,
    m: ParamGrads<T>,
    v: ParamGrads<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(net: &Net<T>, lr: f64) -> Self {
        Self {
            lr: T::from_cfg(lr),
            beta1: T::from_cfg(0.9),
            beta2: T::from_cfg(0.999),
            eps: T::from_cfg(1e-8),
            t: 0,
            m: ParamGrads::zeros_like(net),
            v: ParamGrads::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Net<T>, grads: &ParamGrads<T>) {
        self.t += 1;
        let bc1 = T::one() - self.beta1.powi(self.t);
        let bc2 = T::one() - self.beta2.powi(self.t);
        let lr = self.lr;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);

        fn upd1<T: Scalar>(
            p: &mut Array1<T>,
            g: &Array1<T>,
            m: &mut Array1<T>,
            v: &mut Array1<T>,
            lr: T,
            b1: T,
            b2: T,
            eps: T,
            bc1: T,
            bc2: T,
        ) {
            for (((p, &g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut())
            {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p = *p - lr * mhat / (vhat.sqrt() + eps);
            }
        }
        fn upd2<T: Scalar>(
            p: &mut Array2<T>,
            g: &Array2<T>,
            m: &mut Array2<T>,
            v: &mut Array2<T>,
            lr: T,
            b1: T,
            b2: T,
            eps: T,
            bc1: T,
            bc2: T,
        ) {
            for (((p, &g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut())
            {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p = *p - lr * mhat / (vhat.sqrt() + eps);
            }
        }

        for i in 0..net.torso.len() {
            upd2(
                &mut net.torso[i].w,
                &grads.torso[i].0,
                &mut self.m.torso[i].0,
                &mut self.v.torso[i].0,
                lr,
                b1,
                b2,
                eps,
                bc1,
                bc2,
            );
            upd1(
                &mut net.torso[i].b,
                &grads.torso[i].1,
                &mut self.m.torso[i].1,
                &mut self.v.torso[i].1,
                lr,
                b1,
                b2,
                eps,
                bc1,
                bc2,
            );
        }
        upd2(&mut net.head_main.w, &grads.main.0, &mut self.m.main.0, &mut self.v.main.0, lr, b1, b2, eps, bc1, bc2);
        upd1(&mut net.head_main.b, &grads.main.1, &mut self.m.main.1, &mut self.v.main.1, lr, b1, b2, eps, bc1, bc2);
        upd2(&mut net.head_aux.w, &grads.aux.0, &mut self.m.aux.0, &mut self.v.aux.0, lr, b1, b2, eps, bc1, bc2);
        upd1(&mut net.head_aux.b, &grads.aux.1, &mut self.m.aux.1, &mut self.v.aux.1, lr, b1, b2, eps, bc1, bc2);
    }
}

/// Index of the maximum score, ties broken toward the lowest action index.
pub fn argmax_lowest<T: Scalar>(scores: &ArrayView1<T>) -> usize {
    let mut best = 0;
    let mut best_v = scores[0];
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

pub fn log_softmax<T: Scalar>(scores: &ArrayView1<T>) -> Array1<T> {
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let shifted = scores.mapv(|v| v - max);
    let lse = shifted.iter().map(|v| v.exp()).sum::<T>().ln();
    shifted.mapv(|v| v - lse)
}

pub fn softmax<T: Scalar>(scores: &ArrayView1<T>) -> Array1<T> {
    log_softmax(scores).mapv(|v| v.exp())
}

/// Cross-entropy of the score vector (treated as categorical logits) against
/// the reference action. For score vectors that are already log-probabilities
/// this reduces to the negative log-probability of the action, because
/// log-softmax is idempotent.
pub fn cross_entropy<T: Scalar>(scores: &ArrayView1<T>, action: usize) -> T {
    -log_softmax(scores)[action]
}

/// Gradient of [`cross_entropy`] w.r.t. the score vector.
pub fn cross_entropy_grad<T: Scalar>(scores: &ArrayView1<T>, action: usize) -> Array1<T> {
    let mut g = softmax(scores);
    g[action] = g[action] - T::one();
    g
}

/// Sample an action index from categorical logits.
pub fn sample_categorical<T: Scalar, R: Rng + ?Sized>(logits: &ArrayView1<T>, rng: &mut R) -> usize {
    let probs = softmax(logits);
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p.as_f64();
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn tiny_net(kind: HeadKind, seed_v: u64) -> Net<f64> {
        let arch = NetArch { input_dim: 6, hidden: vec![8, 8], action_count: 4, kind };
        Net::new(&arch, &mut seed::rng(seed_v, "tiny-net", 0))
    }

    fn random_state(seed_v: u64) -> Array1<f64> {
        let mut rng = seed::rng(seed_v, "tiny-state", 0);
        Array1::from_shape_fn(6, |_| f64::sample_unit(&mut rng))
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let s = ndarray::arr1(&[0.4, 0.4, 0.1, 0.1]);
        assert_eq!(argmax_lowest(&s.view()), 0);
        let s = ndarray::arr1(&[0.1, 0.9, 0.5, 0.2]);
        assert_eq!(argmax_lowest(&s.view()), 1);
    }

    #[test]
    fn softmax_normalizes() {
        let s = ndarray::arr1(&[1.0, -2.0, 0.5, 3.0]);
        let p = softmax(&s.view());
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_softmax_is_idempotent() {
        let s = ndarray::arr1(&[1.0f64, -2.0, 0.5, 3.0]);
        let once = log_softmax(&s.view());
        let twice = log_softmax(&once.view());
        for (a, b) in once.iter().zip(twice.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        for kind in [HeadKind::Dueling, HeadKind::ActorCritic] {
            for probe in 0..5u64 {
                let net = tiny_net(kind, probe);
                let x = random_state(probe);
                let cache = net.forward(&x.view());
                let scores = net.scores(&cache);
                let action = argmax_lowest(&scores.view());
                let dscores = cross_entropy_grad(&scores.view(), action);
                let grad = net.input_gradient_scores(&x.view(), &dscores);

                let h = 1e-5;
                for i in 0..x.len() {
                    let mut xp = x.clone();
                    xp[i] += h;
                    let mut xm = x.clone();
                    xm[i] -= h;
                    let lp = cross_entropy(&net.scores(&net.forward(&xp.view())).view(), action);
                    let lm = cross_entropy(&net.scores(&net.forward(&xm.view())).view(), action);
                    let fd = (lp - lm) / (2.0 * h);
                    let denom = fd.abs().max(1e-6);
                    assert!(
                        ((fd - grad[i]) / denom).abs() < 1e-4,
                        "{kind:?} probe {probe} coord {i}: fd {fd} vs grad {}",
                        grad[i]
                    );
                }
            }
        }
    }

    #[test]
    fn batch_forward_matches_single() {
        let net = tiny_net(HeadKind::Dueling, 3);
        let states: Vec<Array1<f64>> = (0..4).map(random_state).collect();
        let mut batch = Array2::zeros((4, 6));
        for (i, s) in states.iter().enumerate() {
            batch.row_mut(i).assign(s);
        }
        let cb = net.forward_batch(&batch.view());
        let qb = net.scores_batch(&cb);
        for (i, s) in states.iter().enumerate() {
            let q = net.scores(&net.forward(&s.view()));
            for a in 0..4 {
                assert!((q[a] - qb[(i, a)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batch_param_grads_match_single_sum() {
        let net = tiny_net(HeadKind::ActorCritic, 9);
        let states: Vec<Array1<f64>> = (0..3).map(random_state).collect();
        let mut batch = Array2::zeros((3, 6));
        for (i, s) in states.iter().enumerate() {
            batch.row_mut(i).assign(s);
        }
        let cb = net.forward_batch(&batch.view());
        let d_main = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64 + 1.0) * 0.1 - j as f64 * 0.05);
        let d_aux = ndarray::arr1(&[0.3, -0.2, 0.7]);
        let gb = net.backward_batch(&cb, &d_main, &d_aux);

        let mut acc = ParamGrads::zeros_like(&net);
        for i in 0..3 {
            let cache = net.forward(&states[i].view());
            let (g, _) = net.backward(
                &cache,
                &d_main.row(i).to_owned(),
                d_aux[i],
                true,
            );
            let g = g.expect("params requested");
            for (l, (w, b)) in g.torso.iter().enumerate() {
                acc.torso[l].0 += w;
                acc.torso[l].1 += b;
            }
            acc.main.0 += &g.main.0;
            acc.main.1 += &g.main.1;
            acc.aux.0 += &g.aux.0;
            acc.aux.1 += &g.aux.1;
        }
        for (l, (w, b)) in gb.torso.iter().enumerate() {
            assert!(w.iter().zip(acc.torso[l].0.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
            assert!(b.iter().zip(acc.torso[l].1.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
        }
        assert!(gb.main.0.iter().zip(acc.main.0.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
        assert!(gb.aux.0.iter().zip(acc.aux.0.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn adam_reduces_a_quadratic() {
        let arch = NetArch { input_dim: 3, hidden: vec![], action_count: 2, kind: HeadKind::ActorCritic };
        let mut net = Net::<f64>::new(&arch, &mut seed::rng(0, "adam-test", 0));
        let mut adam = Adam::new(&net, 0.05);
        let x = ndarray::arr1(&[0.5, -0.3, 0.8]);
        let mut first_loss = None;
        let mut last_loss = 0.0;
        for _ in 0..200 {
            let cache = net.forward(&x.view());
            let scores = net.scores(&cache);
            // target: logits (1, -1)
            let d_main = ndarray::arr1(&[scores[0] - 1.0, scores[1] + 1.0]);
            last_loss = 0.5 * ((scores[0] - 1.0).powi(2) + (scores[1] + 1.0).powi(2));
            first_loss.get_or_insert(last_loss);
            let (g, _) = net.backward(&cache, &d_main, 0.0, true);
            adam.step(&mut net, &g.expect("grads"));
        }
        assert!(last_loss < first_loss.unwrap() * 1e-3, "loss failed to drop: {last_loss}");
    }
}
