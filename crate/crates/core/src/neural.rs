//! Small dense networks with hand-written backpropagation, the squashed
//! Gaussian policy, the curiosity module and the PPO-clip update.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::kinematics::ActionBounds;
use crate::sim::{ActionSource, STATE_DIM};

pub const ACTION_DIM: usize = 2;
pub const FEATURE_DIM: usize = 32;
const ENCODER_SEED: u64 = 0x1a3b_da7a;
const LOG_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("non-finite loss during update; parameters restored")]
    NonFinite,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `inputs × outputs`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Rectifier hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` weights; the last layer is scaled by `out_scale`.
    pub fn new<R: Rng>(sizes: &[usize], out_scale: f64, rng: &mut R) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let (i, o) = (sizes[l], sizes[l + 1]);
                let bound = 1.0 / (i as f64).sqrt() * if l + 1 == n { out_scale } else { 1.0 };
                let w = Array2::from_shape_fn((i, o), |_| rng.random_range(-bound..=bound));
                Dense { w, b: Array1::zeros(o) }
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|p| Dense {
                w: Array2::zeros((p[0], p[1])),
                b: Array1::zeros(p[1]),
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.ncols()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = x.to_owned();
        for (l, d) in self.layers.iter().enumerate() {
            h = h.dot(&d.w) + &d.b;
            if l + 1 < self.layers.len() {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        h
    }

    /// Forward pass keeping every layer input; the last entry is the output.
    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (l, d) in self.layers.iter().enumerate() {
            let mut h = acts[l].dot(&d.w) + &d.b;
            if l + 1 < self.layers.len() {
                h.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(h);
        }
        acts
    }

    /// Parameter gradient (flattened like [`Mlp::params`]) for upstream
    /// gradient `g` on the output.
    pub fn backward(&self, acts: &[Array2<f64>], g: Array2<f64>) -> Vec<f64> {
        let mut grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(self.layers.len());
        let mut g = g;
        for l in (0..self.layers.len()).rev() {
            let input = &acts[l];
            let gw = input.t().dot(&g);
            let gb = g.sum_axis(Axis(0));
            if l > 0 {
                let mut gp = g.dot(&self.layers[l].w.t());
                gp.zip_mut_with(input, |a, &h| {
                    if h <= 0.0 {
                        *a = 0.0
                    }
                });
                g = gp;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        let mut flat = Vec::with_capacity(self.num_params());
        for (gw, gb) in grads {
            flat.extend(gw.iter());
            flat.extend(gb.iter());
        }
        flat
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|d| d.w.len() + d.b.len()).sum()
    }

    /// Row-major weights then bias, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for d in &self.layers {
            v.extend(d.w.iter());
            v.extend(d.b.iter());
        }
        v
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut k = 0;
        for d in &mut self.layers {
            for x in d.w.iter_mut().chain(d.b.iter_mut()) {
                *x = p[k];
                k += 1;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|d| d.w.iter().chain(d.b.iter()).all(|x| x.is_finite()))
    }
}

/// Adam with global gradient-norm clipping.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    pub lr: f64,
    pub max_grad_norm: f64,
}

impl Adam {
    pub fn new(n: usize, lr: f64, max_grad_norm: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
            max_grad_norm,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = if self.max_grad_norm > 0.0 && norm > self.max_grad_norm {
            self.max_grad_norm / norm
        } else {
            1.0
        };
        self.t += 1;
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let c1 = 1.0 - f64::powi(b1, self.t);
        let c2 = 1.0 - f64::powi(b2, self.t);
        for k in 0..params.len() {
            let g = grads[k] * scale;
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g;
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g;
            params[k] -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + eps);
        }
    }
}

/// Fixed random projection of the state to feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub m: Array2<f64>,
}

impl Encoder {
    /// Entries drawn from `N(0, gain²/state_dim)`.
    pub fn new(state_dim: usize, gain: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(ENCODER_SEED);
        let scale = gain / (state_dim as f64).sqrt();
        let m = Array2::from_shape_fn((state_dim, FEATURE_DIM), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        });
        Encoder { m }
    }

    pub fn encode(&self, s: ArrayView2<f64>) -> Array2<f64> {
        s.dot(&self.m)
    }
}

/// Gaussian policy with a state-independent log standard deviation; samples
/// are squashed by `tanh` and mapped affinely onto the action box.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub mean: Mlp,
    pub log_std: Array1<f64>,
}

impl Policy {
    pub fn num_params(&self) -> usize {
        self.mean.num_params() + ACTION_DIM
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.mean.params();
        p.extend(self.log_std.iter());
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let n = self.mean.num_params();
        self.mean.set_params(&p[..n]);
        self.log_std.assign(&Array1::from(p[n..n + ACTION_DIM].to_vec()));
    }

    pub fn is_finite(&self) -> bool {
        self.mean.is_finite() && self.log_std.iter().all(|x| x.is_finite())
    }
}

/// Mean and log standard deviation of the pre-squash Gaussian.
pub fn forward_policy(p: &Policy, state: &[f64]) -> ([f64; 2], [f64; 2]) {
    let x = ArrayView2::from_shape((1, state.len()), state).expect("state shape");
    let m = p.mean.forward(x);
    ([m[[0, 0]], m[[0, 1]]], [p.log_std[0], p.log_std[1]])
}

pub fn gaussian_log_prob(u: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    u.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((&u, &m), &ls)| {
            let z = (u - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LOG_2PI
        })
        .sum()
}

/// Map a pre-squash sample onto `bounds`.
pub fn squash(u: [f64; 2], bounds: &ActionBounds) -> (f64, f64) {
    let a = [u[0].tanh(), u[1].tanh()];
    (
        bounds.v_min + 0.5 * (a[0] + 1.0) * (bounds.v_max - bounds.v_min),
        bounds.w_min + 0.5 * (a[1] + 1.0) * (bounds.w_max - bounds.w_min),
    )
}

/// Log density of one squashed action coordinate on `(lo, hi)`.
pub fn squashed_log_density(action: f64, lo: f64, hi: f64, mean: f64, log_std: f64) -> f64 {
    let a = (2.0 * (action - lo) / (hi - lo) - 1.0).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
    let u = a.atanh();
    // d action / du = (hi − lo)/2 · (1 − tanh²u)
    let jac = 0.5 * (hi - lo) * (1.0 - a * a);
    gaussian_log_prob(&[u], &[mean], &[log_std]) - jac.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub alpha: f64,
    pub beta: f64,
    pub clip: f64,
    pub gae_lambda: f64,
    pub gamma: f64,
    pub lr: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub horizon: usize,
    /// Curiosity strength.
    pub delta: f64,
    pub max_grad_norm: f64,
    pub init_log_std: f64,
    /// Gain of the fixed feature projection.
    pub feature_scale: f64,
    pub hidden: usize,
    pub icm_hidden: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.2,
            clip: 0.2,
            gae_lambda: 0.95,
            gamma: 0.99,
            lr: 3e-4,
            epochs: 4,
            minibatch: 256,
            horizon: 512,
            delta: 0.01,
            max_grad_norm: 0.5,
            init_log_std: -0.5,
            feature_scale: 1.0,
            hidden: 128,
            icm_hidden: 64,
        }
    }
}

impl Hyper {
    /// Override one field by name from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let mut v = serde_json::to_value(*self).map_err(|e| e.to_string())?;
        let obj = v.as_object_mut().unwrap();
        if !obj.contains_key(key) {
            return Err(format!("unknown hyperparameter `{key}`"));
        }
        let parsed: serde_json::Value = serde_json::from_str(value).map_err(|_| format!("bad value for `{key}`: {value}"))?;
        obj.insert(key.to_string(), parsed);
        *self = serde_json::from_value(v).map_err(|e| format!("bad value for `{key}`: {e}"))?;
        self.validate()
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = self.alpha >= 0.0
            && (0.0..=1.0).contains(&self.beta)
            && self.clip > 0.0
            && (0.0..=1.0).contains(&self.gae_lambda)
            && (0.0..=1.0).contains(&self.gamma)
            && self.lr > 0.0
            && self.epochs > 0
            && self.minibatch > 0
            && self.horizon > 0
            && self.delta >= 0.0
            && self.hidden > 0
            && self.icm_hidden > 0
            && self.feature_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err("hyperparameter out of range".into())
        }
    }
}

/// Policy, value, inverse-dynamics and forward-dynamics networks plus the
/// fixed feature encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks {
    pub policy: Policy,
    pub value: Mlp,
    pub inverse: Mlp,
    pub forward: Mlp,
    pub encoder: Encoder,
}

impl Networks {
    pub fn new(hyper: &Hyper, seed: u64) -> Self {
        let mut n = Self::with_dims(STATE_DIM, hyper.hidden, hyper.icm_hidden, hyper.init_log_std, seed);
        n.encoder = Encoder::new(STATE_DIM, hyper.feature_scale);
        n
    }

    pub fn with_dims(state_dim: usize, hidden: usize, icm_hidden: usize, init_log_std: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = Policy {
            mean: Mlp::new(&[state_dim, hidden, hidden, ACTION_DIM], 0.01, &mut rng),
            log_std: Array1::from_elem(ACTION_DIM, init_log_std),
        };
        let value = Mlp::new(&[state_dim, hidden, hidden, 1], 1.0, &mut rng);
        let inverse = Mlp::new(&[2 * FEATURE_DIM, icm_hidden, icm_hidden, ACTION_DIM], 1.0, &mut rng);
        let forward = Mlp::new(&[FEATURE_DIM + ACTION_DIM, icm_hidden, icm_hidden, FEATURE_DIM], 1.0, &mut rng);
        Networks {
            policy,
            value,
            inverse,
            forward,
            encoder: Encoder::new(state_dim, 1.0),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.policy.is_finite() && self.value.is_finite() && self.inverse.is_finite() && self.forward.is_finite()
    }

    /// Curiosity bonus for each row: `δ/2 · ‖λ̂(s') − λ(s')‖²`.
    pub fn curiosity(&self, s: ArrayView2<f64>, a_n: ArrayView2<f64>, s_next: ArrayView2<f64>, delta: f64) -> Vec<f64> {
        let f = self.encoder.encode(s);
        let f_next = self.encoder.encode(s_next);
        let pred = self.forward.forward(concat(f.view(), a_n).view());
        (0..pred.nrows())
            .map(|i| 0.5 * delta * (&pred.row(i) - &f_next.row(i)).mapv(|x| x * x).sum())
            .collect()
    }
}

impl ActionSource for Networks {
    fn act(&self, state: &[f64], bounds: &ActionBounds) -> (f64, f64) {
        let (m, _) = forward_policy(&self.policy, state);
        squash(m, bounds)
    }
}

pub fn concat(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a, b]).expect("row counts match")
}

pub fn curiosity_reward(forward: &Mlp, encoder: &Encoder, s: &[f64], a_n: [f64; 2], s_next: &[f64], delta: f64) -> f64 {
    let row = |v: &[f64]| Array2::from_shape_vec((1, v.len()), v.to_vec()).unwrap();
    let f = encoder.encode(row(s).view());
    let f_next = encoder.encode(row(s_next).view());
    let pred = forward.forward(concat(f.view(), row(&a_n).view()).view());
    0.5 * delta * (&pred - &f_next).mapv(|x| x * x).sum()
}

/// Mean over rows of the squared error norm, and its gradient.
fn mse(pred: &Array2<f64>, target: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let n = pred.nrows() as f64;
    let diff = pred - &target;
    let loss = diff.mapv(|x| x * x).sum() / n;
    (loss, diff * (2.0 / n))
}

/// Inverse-dynamics loss: predict the action from both feature vectors.
pub fn inverse_loss(inv: &Mlp, f: ArrayView2<f64>, f_next: ArrayView2<f64>, a_n: ArrayView2<f64>) -> (f64, Vec<f64>) {
    let acts = inv.forward_cached(concat(f, f_next).view());
    let (loss, g) = mse(acts.last().unwrap(), a_n);
    (loss, inv.backward(&acts, g))
}

/// Forward-dynamics loss: predict the next feature vector.
pub fn forward_loss(fwd: &Mlp, f: ArrayView2<f64>, a_n: ArrayView2<f64>, f_next: ArrayView2<f64>) -> (f64, Vec<f64>) {
    let acts = fwd.forward_cached(concat(f, a_n).view());
    let (loss, g) = mse(acts.last().unwrap(), f_next);
    (loss, fwd.backward(&acts, g))
}

/// Value regression loss `mean (V(s) − R)²`.
pub fn value_loss(value: &Mlp, s: ArrayView2<f64>, returns: &[f64]) -> (f64, Vec<f64>) {
    let acts = value.forward_cached(s);
    let target = Array2::from_shape_vec((returns.len(), 1), returns.to_vec()).unwrap();
    let (loss, g) = mse(acts.last().unwrap(), target.view());
    (loss, value.backward(&acts, g))
}

/// Negated clipped surrogate `−mean min(r·A, clip(r)·A)` and its gradient
/// over the policy parameters (mean network, then log std).
pub fn clip_loss(
    policy: &Policy,
    s: ArrayView2<f64>,
    u: ArrayView2<f64>,
    old_logp: &[f64],
    adv: &[f64],
    clip: f64,
) -> (f64, Vec<f64>) {
    let acts = policy.mean.forward_cached(s);
    let mean = acts.last().unwrap();
    let n = mean.nrows();
    let std: Vec<f64> = policy.log_std.iter().map(|l| l.exp()).collect();
    let mut g_mean = Array2::zeros((n, ACTION_DIM));
    let mut g_log_std = [0.0; ACTION_DIM];
    let mut total = 0.0;
    for i in 0..n {
        let mut logp = 0.0;
        for d in 0..ACTION_DIM {
            let z = (u[[i, d]] - mean[[i, d]]) / std[d];
            logp += -0.5 * z * z - policy.log_std[d] - 0.5 * LOG_2PI;
        }
        let r = (logp - old_logp[i]).exp();
        let a = adv[i];
        let unclipped = r * a;
        let clipped = r.clamp(1.0 - clip, 1.0 + clip) * a;
        total += unclipped.min(clipped);
        if unclipped <= clipped {
            let dl = -r * a / n as f64;
            for d in 0..ACTION_DIM {
                let z = (u[[i, d]] - mean[[i, d]]) / std[d];
                g_mean[[i, d]] = dl * z / std[d];
                g_log_std[d] += dl * (z * z - 1.0);
            }
        }
    }
    let mut grad = policy.mean.backward(&acts, g_mean);
    grad.extend(g_log_std);
    (-total / n as f64, grad)
}

/// Generalized advantage estimates and returns for one agent trajectory.
/// `last_value` bootstraps past the final step unless it ended in `done`.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], last_value: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let next_v = if t + 1 < n { values[t + 1] } else { last_value };
        let nonterminal = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_v * nonterminal - values[t];
        acc = delta + gamma * lambda * nonterminal * acc;
        adv[t] = acc;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Flattened training batch.
#[derive(Debug, Clone, Default)]
pub struct Rollout {
    pub states: Vec<f64>,
    pub next_states: Vec<f64>,
    /// Pre-squash samples.
    pub u: Vec<f64>,
    pub logp: Vec<f64>,
    pub adv: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.logp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logp.is_empty()
    }
}

pub struct Optimizers {
    pub policy: Adam,
    pub value: Adam,
    pub inverse: Adam,
    pub forward: Adam,
}

impl Optimizers {
    pub fn new(nets: &Networks, hyper: &Hyper) -> Self {
        let mk = |n| Adam::new(n, hyper.lr, hyper.max_grad_norm);
        Optimizers {
            policy: mk(nets.policy.num_params()),
            value: mk(nets.value.num_params()),
            inverse: mk(nets.inverse.num_params()),
            forward: mk(nets.forward.num_params()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub clip_loss: f64,
    pub value_loss: f64,
    pub inverse_loss: f64,
    pub forward_loss: f64,
    pub clip_fraction: f64,
}

fn rows(data: &[f64], idx: &[usize], width: usize) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), width));
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).assign(&ndarray::ArrayView1::from(&data[i * width..(i + 1) * width]));
    }
    out
}

/// Joint objective `−α·L_clip + (1−β)·L_A + β·L_S` on a batch, plus the
/// value loss, without updating anything.
pub fn joint_objective(nets: &Networks, batch: &Rollout, hyper: &Hyper) -> (f64, f64) {
    let idx: Vec<usize> = (0..batch.len()).collect();
    let d = nets.encoder.m.nrows();
    let s = rows(&batch.states, &idx, d);
    let s2 = rows(&batch.next_states, &idx, d);
    let u = rows(&batch.u, &idx, ACTION_DIM);
    let a_n = u.mapv(f64::tanh);
    let adv = normalized(&batch.adv);
    let (lc, _) = clip_loss(&nets.policy, s.view(), u.view(), &batch.logp, &adv, hyper.clip);
    let f = nets.encoder.encode(s.view());
    let f2 = nets.encoder.encode(s2.view());
    let (la, _) = inverse_loss(&nets.inverse, f.view(), f2.view(), a_n.view());
    let (ls, _) = forward_loss(&nets.forward, f.view(), a_n.view(), f2.view());
    let (lv, _) = value_loss(&nets.value, s.view(), &batch.returns);
    (hyper.alpha * lc + (1.0 - hyper.beta) * la + hyper.beta * ls, lv)
}

fn normalized(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd < 1e-8 {
        return adv.iter().map(|a| a - mean).collect();
    }
    adv.iter().map(|a| (a - mean) / sd).collect()
}

fn apply(opt: &mut Adam, params: Vec<f64>, grads: &[f64], scale: f64) -> Vec<f64> {
    let mut p = params;
    if scale != 1.0 {
        let g: Vec<f64> = grads.iter().map(|x| x * scale).collect();
        opt.step(&mut p, &g);
    } else {
        opt.step(&mut p, grads);
    }
    p
}

/// Several epochs of minibatch updates. On a non-finite loss every network
/// is restored to its state before the call.
pub fn ppo_update<R: Rng>(
    nets: &mut Networks,
    opt: &mut Optimizers,
    batch: &Rollout,
    hyper: &Hyper,
    rng: &mut R,
) -> Result<UpdateStats, NeuralError> {
    let backup = nets.clone();
    let n = batch.len();
    let d = nets.encoder.m.nrows();
    let adv = normalized(&batch.adv);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats::default();
    let mut count = 0.0;
    for _ in 0..hyper.epochs {
        idx.shuffle(rng);
        for chunk in idx.chunks(hyper.minibatch) {
            let s = rows(&batch.states, chunk, d);
            let s2 = rows(&batch.next_states, chunk, d);
            let u = rows(&batch.u, chunk, ACTION_DIM);
            let a_n = u.mapv(f64::tanh);
            let old: Vec<f64> = chunk.iter().map(|&i| batch.logp[i]).collect();
            let mb_adv: Vec<f64> = chunk.iter().map(|&i| adv[i]).collect();
            let ret: Vec<f64> = chunk.iter().map(|&i| batch.returns[i]).collect();

            let (lc, gc) = clip_loss(&nets.policy, s.view(), u.view(), &old, &mb_adv, hyper.clip);
            let (lv, gv) = value_loss(&nets.value, s.view(), &ret);
            let f = nets.encoder.encode(s.view());
            let f2 = nets.encoder.encode(s2.view());
            let (la, ga) = inverse_loss(&nets.inverse, f.view(), f2.view(), a_n.view());
            let (ls, gs) = forward_loss(&nets.forward, f.view(), a_n.view(), f2.view());
            if ![lc, lv, la, ls].iter().all(|x| x.is_finite()) {
                *nets = backup;
                return Err(NeuralError::NonFinite);
            }

            // Fraction of samples whose ratio sits outside the clip range.
            let mean = nets.policy.mean.forward(s.view());
            let ls_v: Vec<f64> = nets.policy.log_std.to_vec();
            let clipped = (0..chunk.len())
                .filter(|&i| {
                    let lp = gaussian_log_prob(&[u[[i, 0]], u[[i, 1]]], &[mean[[i, 0]], mean[[i, 1]]], &ls_v);
                    ((lp - old[i]).exp() - 1.0).abs() > hyper.clip
                })
                .count();

            if hyper.alpha != 0.0 {
                let p = apply(&mut opt.policy, nets.policy.params(), &gc, hyper.alpha);
                nets.policy.set_params(&p);
            }
            let p = apply(&mut opt.value, nets.value.params(), &gv, 1.0);
            nets.value.set_params(&p);
            let p = apply(&mut opt.inverse, nets.inverse.params(), &ga, 1.0 - hyper.beta);
            nets.inverse.set_params(&p);
            let p = apply(&mut opt.forward, nets.forward.params(), &gs, hyper.beta);
            nets.forward.set_params(&p);

            stats.clip_loss += lc;
            stats.value_loss += lv;
            stats.inverse_loss += la;
            stats.forward_loss += ls;
            stats.clip_fraction += clipped as f64 / chunk.len() as f64;
            count += 1.0;
        }
    }
    if !nets.is_finite() {
        *nets = backup;
        return Err(NeuralError::NonFinite);
    }
    stats.clip_loss /= count;
    stats.value_loss /= count;
    stats.inverse_loss /= count;
    stats.forward_loss /= count;
    stats.clip_fraction /= count;
    Ok(stats)
}

pub const CHECKPOINT_FORMAT: &str = "socnav-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerDump {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetDump {
    layers: Vec<LayerDump>,
}

impl NetDump {
    fn from_mlp(m: &Mlp) -> Self {
        NetDump {
            layers: m
                .layers
                .iter()
                .map(|d| LayerDump {
                    inputs: d.w.nrows(),
                    outputs: d.w.ncols(),
                    weights: d.w.iter().copied().collect(),
                    bias: d.b.to_vec(),
                })
                .collect(),
        }
    }

    fn to_mlp(&self) -> Result<Mlp, NeuralError> {
        let mut layers = Vec::new();
        for (k, l) in self.layers.iter().enumerate() {
            if k > 0 && self.layers[k - 1].outputs != l.inputs {
                return Err(NeuralError::Checkpoint("layer sizes do not chain".into()));
            }
            let w = Array2::from_shape_vec((l.inputs, l.outputs), l.weights.clone())
                .map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
            if l.bias.len() != l.outputs {
                return Err(NeuralError::Checkpoint("bias length".into()));
            }
            layers.push(Dense {
                w,
                b: Array1::from(l.bias.clone()),
            });
        }
        if layers.is_empty() {
            return Err(NeuralError::Checkpoint("empty network".into()));
        }
        Ok(Mlp { layers })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    state_dim: usize,
    hyper: Hyper,
    policy: NetDump,
    log_std: Vec<f64>,
    value: NetDump,
    inverse: NetDump,
    forward: NetDump,
}

/// Saved networks together with the hyperparameters they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub nets: Networks,
    pub hyper: Hyper,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let f = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            state_dim: self.nets.encoder.m.nrows(),
            hyper: self.hyper,
            policy: NetDump::from_mlp(&self.nets.policy.mean),
            log_std: self.nets.policy.log_std.to_vec(),
            value: NetDump::from_mlp(&self.nets.value),
            inverse: NetDump::from_mlp(&self.nets.inverse),
            forward: NetDump::from_mlp(&self.nets.forward),
        };
        serde_json::to_string(&f).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let f: CheckpointFile = serde_json::from_str(text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        if f.format != CHECKPOINT_FORMAT || f.version != CHECKPOINT_VERSION {
            return Err(NeuralError::Checkpoint(format!("unsupported format {} v{}", f.format, f.version)));
        }
        let mean = f.policy.to_mlp()?;
        if mean.input_dim() != f.state_dim || mean.output_dim() != ACTION_DIM || f.log_std.len() != ACTION_DIM {
            return Err(NeuralError::Checkpoint("policy shape".into()));
        }
        let nets = Networks {
            policy: Policy {
                mean,
                log_std: Array1::from(f.log_std),
            },
            value: f.value.to_mlp()?,
            inverse: f.inverse.to_mlp()?,
            forward: f.forward.to_mlp()?,
            encoder: Encoder::new(f.state_dim, f.hyper.feature_scale),
        };
        Ok(Checkpoint { nets, hyper: f.hyper })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, NeuralError> {
        let text = std::fs::read_to_string(path).map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Relative error `‖a − b‖ / max(‖a‖ + ‖b‖, tiny)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

/// Gradient check of the four losses on a random small network set.
/// Returns the worst relative error among them.
pub fn gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(e) = gradient_check_draw(&mut rng) {
            return e;
        }
    }
}

/// Smallest |pre-activation| over the hidden units for inputs `x`.
fn kink_margin(m: &Mlp, x: ArrayView2<f64>) -> f64 {
    let mut h = x.to_owned();
    let mut margin = f64::INFINITY;
    for (l, d) in m.layers.iter().enumerate() {
        h = h.dot(&d.w) + &d.b;
        if l + 1 < m.layers.len() {
            margin = h.iter().fold(margin, |a, v| a.min(v.abs()));
            h.mapv_inplace(|v| v.max(0.0));
        }
    }
    margin
}

/// One random instance, or `None` when it sits too close to a rectifier
/// kink or a clip edge for central differences to be meaningful.
fn gradient_check_draw(rng: &mut ChaCha8Rng) -> Option<f64> {
    use crate::oracle::finite_difference;
    let seed: u64 = rng.random();
    let state_dim = rng.random_range(3..8);
    let hidden = rng.random_range(3..9);
    let mut nets = Networks::with_dims(state_dim, hidden, hidden, rng.random_range(-1.0..0.0), seed);
    // Nonzero biases keep pre-activations off the rectifier kink at exactly 0.
    for m in [&mut nets.policy.mean, &mut nets.value, &mut nets.inverse, &mut nets.forward] {
        for d in &mut m.layers {
            d.b.mapv_inplace(|_| rng.random_range(-0.1..0.1));
        }
    }
    let n = rng.random_range(2..7);
    let mut draw = |len: usize, scale: f64| -> Array2<f64> {
        Array2::from_shape_fn((n, len), |_| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
    };
    let s = draw(state_dim, 1.0);
    let s2 = draw(state_dim, 1.0);
    let u = draw(ACTION_DIM, 0.7);
    let a_n = u.mapv(f64::tanh);
    let extra = draw(3, 1.0);
    let adv: Vec<f64> = extra.column(0).to_vec();
    let returns: Vec<f64> = extra.column(1).to_vec();
    let mean = nets.policy.mean.forward(s.view());
    let ls = nets.policy.log_std.to_vec();
    // Old log-probabilities a little away from the current ones so some
    // ratios are clipped, none sitting on a clip edge.
    let old: Vec<f64> = (0..n)
        .map(|i| gaussian_log_prob(&[u[[i, 0]], u[[i, 1]]], &[mean[[i, 0]], mean[[i, 1]]], &ls) + 0.3 * extra[[i, 2]])
        .collect();
    let h = 1e-5;
    let margin = 1e-3;
    let ratio_margin = (0..n)
        .map(|i| {
            let r = (gaussian_log_prob(&[u[[i, 0]], u[[i, 1]]], &[mean[[i, 0]], mean[[i, 1]]], &ls) - old[i]).exp();
            (r - 0.8).abs().min((r - 1.2).abs())
        })
        .fold(f64::INFINITY, f64::min);
    if ratio_margin < margin || kink_margin(&nets.policy.mean, s.view()) < margin || kink_margin(&nets.value, s.view()) < margin {
        return None;
    }
    let mut worst: f64 = 0.0;

    let (_, g) = clip_loss(&nets.policy, s.view(), u.view(), &old, &adv, 0.2);
    let fd = finite_difference(
        |p| {
            let mut q = nets.policy.clone();
            q.set_params(p);
            clip_loss(&q, s.view(), u.view(), &old, &adv, 0.2).0
        },
        &nets.policy.params(),
        h,
    );
    worst = worst.max(relative_error(&g, &fd));

    let (_, g) = value_loss(&nets.value, s.view(), &returns);
    let fd = finite_difference(
        |p| {
            let mut q = nets.value.clone();
            q.set_params(p);
            value_loss(&q, s.view(), &returns).0
        },
        &nets.value.params(),
        h,
    );
    worst = worst.max(relative_error(&g, &fd));

    let f = s.slice(s![.., ..]).dot(&Array2::from_shape_fn((state_dim, FEATURE_DIM), |(i, j)| ((i * 7 + j * 3) % 5) as f64 * 0.1 - 0.2));
    let f2 = s2.dot(&Array2::from_shape_fn((state_dim, FEATURE_DIM), |(i, j)| ((i * 5 + j) % 7) as f64 * 0.1 - 0.3));
    if kink_margin(&nets.inverse, concat(f.view(), f2.view()).view()) < margin
        || kink_margin(&nets.forward, concat(f.view(), a_n.view()).view()) < margin
    {
        return None;
    }
    let (_, g) = inverse_loss(&nets.inverse, f.view(), f2.view(), a_n.view());
    let fd = finite_difference(
        |p| {
            let mut q = nets.inverse.clone();
            q.set_params(p);
            inverse_loss(&q, f.view(), f2.view(), a_n.view()).0
        },
        &nets.inverse.params(),
        h,
    );
    worst = worst.max(relative_error(&g, &fd));

    let (_, g) = forward_loss(&nets.forward, f.view(), a_n.view(), f2.view());
    let fd = finite_difference(
        |p| {
            let mut q = nets.forward.clone();
            q.set_params(p);
            forward_loss(&q, f.view(), a_n.view(), f2.view()).0
        },
        &nets.forward.params(),
        h,
    );
    Some(worst.max(relative_error(&g, &fd)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn zero_network_gives_mid_range_action() {
        let p = Policy {
            mean: Mlp::zeros(&[STATE_DIM, 8, 8, 2]),
            log_std: Array1::zeros(2),
        };
        let (m, _) = forward_policy(&p, &[0.3; STATE_DIM]);
        assert_eq!(m, [0.0, 0.0]);
        let b = ActionBounds::default();
        let (v, w) = squash(m, &b);
        assert_relative_eq!(v, 0.105, epsilon = 1e-12);
        assert_relative_eq!(w, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_action_is_squashed_mean() {
        let nets = Networks::new(&Hyper::default(), 3);
        let s = vec![0.1; STATE_DIM];
        let b = ActionBounds::default();
        let (m, _) = forward_policy(&nets.policy, &s);
        assert_eq!(nets.act(&s, &b), squash(m, &b));
    }

    #[test]
    fn squashed_density_integrates_to_one() {
        // Trapezoid quadrature of the density over the open action range.
        for (mean, ls) in [(0.0, -0.5), (1.3, 0.2), (-0.7, -1.5)] {
            let (lo, hi) = (0.01, 0.20);
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            let total: f64 = (1..n)
                .map(|k| squashed_log_density(lo + k as f64 * h, lo, hi, mean, ls).exp() * h)
                .sum();
            assert!((total - 1.0).abs() < 1e-3, "{mean} {ls}: {total}");
        }
    }

    #[test]
    fn log_prob_matches_formula() {
        let lp = gaussian_log_prob(&[0.5, -1.0], &[0.0, 0.0], &[0.0, 0.0]);
        let expect = -0.5 * (0.25 + 1.0) - LOG_2PI;
        assert_relative_eq!(lp, expect, epsilon = 1e-12);
    }

    #[test]
    fn curiosity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fwd = Mlp::new(&[FEATURE_DIM + 2, 8, 8, FEATURE_DIM], 1.0, &mut rng);
        let enc = Encoder::new(5, 1.0);
        let s = [0.1, -0.2, 0.3, 0.0, 1.0];
        let s2 = [0.2, -0.1, 0.0, 0.5, 0.9];
        let r = curiosity_reward(&fwd, &enc, &s, [0.3, -0.4], &s2, 0.01);
        // Independent recomputation.
        let f: Vec<f64> = (0..FEATURE_DIM).map(|j| (0..5).map(|i| s[i] * enc.m[[i, j]]).sum()).collect();
        let f2: Vec<f64> = (0..FEATURE_DIM).map(|j| (0..5).map(|i| s2[i] * enc.m[[i, j]]).sum()).collect();
        let mut x: Vec<f64> = f.clone();
        x.extend([0.3, -0.4]);
        let mut h = x;
        for (l, d) in fwd.layers.iter().enumerate() {
            let mut out: Vec<f64> = (0..d.w.ncols()).map(|j| d.b[j] + (0..h.len()).map(|i| h[i] * d.w[[i, j]]).sum::<f64>()).collect();
            if l + 1 < fwd.layers.len() {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            h = out;
        }
        let sq: f64 = h.iter().zip(&f2).map(|(a, b)| (a - b).powi(2)).sum();
        assert_relative_eq!(r, 0.005 * sq, epsilon = 1e-12);
        assert!(r >= 0.0);
        assert_eq!(curiosity_reward(&fwd, &enc, &s, [0.3, -0.4], &s2, 0.0), 0.0);
    }

    #[test]
    fn unit_prediction_error_gives_half_delta() {
        // Forward net that outputs λ(s') + e1 exactly: zero weights, bias e1, and s' = 0.
        let mut fwd = Mlp::zeros(&[FEATURE_DIM + 2, 4, FEATURE_DIM]);
        fwd.layers[1].b[0] = 1.0;
        let enc = Encoder::new(3, 1.0);
        let r = curiosity_reward(&fwd, &enc, &[1.0, 2.0, 3.0], [0.0, 0.0], &[0.0; 3], 0.01);
        assert_relative_eq!(r, 0.005, epsilon = 1e-15);
    }

    #[test]
    fn perfect_predictions_have_zero_loss() {
        let mut inv = Mlp::zeros(&[4, 3, 2]);
        inv.layers[1].b = Array1::from(vec![0.2, -0.3]);
        let f = Array2::zeros((3, 2));
        let a = Array2::from_shape_fn((3, 2), |(_, j)| if j == 0 { 0.2 } else { -0.3 });
        let (l, g) = inverse_loss(&inv, f.view(), f.view(), a.view());
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_sample_mse_by_hand() {
        let mut fwd = Mlp::zeros(&[3, 2, 2]);
        fwd.layers[1].b = Array1::from(vec![1.0, 2.0]);
        let f = Array2::zeros((1, 2));
        let a = Array2::zeros((1, 1));
        let target = Array2::from_shape_vec((1, 2), vec![0.0, 0.5]).unwrap();
        let (l, _) = forward_loss(&fwd, f.view(), a.view(), target.view());
        assert_relative_eq!(l, 1.0 + 2.25, epsilon = 1e-15);
    }

    #[test]
    fn gae_matches_hand_computation() {
        let (adv, ret) = gae(&[1.0, 0.0, 2.0], &[0.5, 0.4, 0.3], &[false, false, true], 9.0, 0.9, 0.8);
        let d2 = 2.0 - 0.3;
        let d1 = 0.0 + 0.9 * 0.3 - 0.4;
        let d0 = 1.0 + 0.9 * 0.4 - 0.5;
        let a2 = d2;
        let a1 = d1 + 0.72 * a2;
        let a0 = d0 + 0.72 * a1;
        assert_relative_eq!(adv[2], a2, epsilon = 1e-12);
        assert_relative_eq!(adv[1], a1, epsilon = 1e-12);
        assert_relative_eq!(adv[0], a0, epsilon = 1e-12);
        assert_relative_eq!(ret[0], a0 + 0.5, epsilon = 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..20 {
            let e = gradient_check(seed);
            assert!(e <= 1e-4, "seed {seed}: {e}");
        }
    }

    fn tiny_rollout(nets: &Networks, seed: u64, n: usize) -> Rollout {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = nets.encoder.m.nrows();
        let mut r = Rollout::default();
        for _ in 0..n {
            let s: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (m, ls) = forward_policy(&nets.policy, &s);
            let u: Vec<f64> = (0..2).map(|k| m[k] + ls[k].exp() * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect();
            r.logp.push(gaussian_log_prob(&u, &m, &ls));
            r.next_states.extend(s.iter().map(|x| x * 0.9 + 0.05));
            r.states.extend(s);
            r.u.extend(u);
            r.adv.push(rng.random_range(-1.0..1.0));
            r.returns.push(rng.random_range(-1.0..1.0));
        }
        r
    }

    #[test]
    fn zero_advantage_leaves_policy_unchanged() {
        let h = Hyper::default();
        let mut nets = Networks::new(&h, 5);
        let mut opt = Optimizers::new(&nets, &h);
        let mut batch = tiny_rollout(&nets, 1, 64);
        batch.adv.iter_mut().for_each(|a| *a = 0.0);
        let before = nets.policy.clone();
        let inv_before = nets.inverse.clone();
        ppo_update(&mut nets, &mut opt, &batch, &h, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(nets.policy, before);
        assert_ne!(nets.inverse, inv_before);
    }

    #[test]
    fn beta_one_freezes_inverse_model() {
        let h = Hyper { beta: 1.0, ..Hyper::default() };
        let mut nets = Networks::new(&h, 5);
        let mut opt = Optimizers::new(&nets, &h);
        let batch = tiny_rollout(&nets, 2, 64);
        let inv = nets.inverse.clone();
        ppo_update(&mut nets, &mut opt, &batch, &h, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(nets.inverse, inv);
    }

    #[test]
    fn one_step_decreases_joint_objective() {
        let h = Hyper {
            epochs: 1,
            minibatch: 1000,
            lr: 1e-4,
            ..Hyper::default()
        };
        let mut nets = Networks::new(&h, 7);
        let mut opt = Optimizers::new(&nets, &h);
        let batch = tiny_rollout(&nets, 3, 128);
        let (j0, v0) = joint_objective(&nets, &batch, &h);
        ppo_update(&mut nets, &mut opt, &batch, &h, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let (j1, v1) = joint_objective(&nets, &batch, &h);
        assert!(j1 < j0, "{j0} -> {j1}");
        assert!(v1 < v0);
    }

    #[test]
    fn ratios_stay_near_clip_range() {
        let h = Hyper::default();
        let mut nets = Networks::new(&h, 11);
        let mut opt = Optimizers::new(&nets, &h);
        let batch = tiny_rollout(&nets, 4, 512);
        ppo_update(&mut nets, &mut opt, &batch, &h, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let d = STATE_DIM;
        let inside = (0..batch.len())
            .filter(|&i| {
                let s = &batch.states[i * d..(i + 1) * d];
                let (m, ls) = forward_policy(&nets.policy, s);
                let r = (gaussian_log_prob(&batch.u[i * 2..i * 2 + 2], &m, &ls) - batch.logp[i]).exp();
                (1.0 - h.clip - 0.05..=1.0 + h.clip + 0.05).contains(&r)
            })
            .count();
        assert!(inside as f64 >= 0.95 * batch.len() as f64, "{inside}");
    }

    #[test]
    fn non_finite_batch_restores_parameters() {
        let h = Hyper::default();
        let mut nets = Networks::new(&h, 5);
        let mut opt = Optimizers::new(&nets, &h);
        let mut batch = tiny_rollout(&nets, 1, 16);
        batch.returns[0] = f64::NAN;
        let before = nets.clone();
        assert!(matches!(
            ppo_update(&mut nets, &mut opt, &batch, &h, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(NeuralError::NonFinite)
        ));
        assert_eq!(nets, before);
    }

    #[test]
    fn checkpoint_round_trip() {
        let h = Hyper::default();
        let c = Checkpoint {
            nets: Networks::new(&h, 9),
            hyper: h,
        };
        let back = Checkpoint::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert!(Checkpoint::from_json("{}").is_err());
        let bad = c.to_json().replace("\"version\":1", "\"version\":99");
        assert!(Checkpoint::from_json(&bad).is_err());
    }

    #[test]
    fn hyper_overrides() {
        let mut h = Hyper::default();
        h.set("beta", "0.5").unwrap();
        assert_eq!(h.beta, 0.5);
        h.set("epochs", "2").unwrap();
        assert_eq!(h.epochs, 2);
        assert!(h.set("nope", "1").is_err());
        assert!(h.set("beta", "2.0").is_err());
    }

    proptest! {
        #[test]
        fn curiosity_is_nonnegative(seed in 0u64..1000, delta in 0.0..1.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fwd = Mlp::new(&[FEATURE_DIM + 2, 6, FEATURE_DIM], 1.0, &mut rng);
            let enc = Encoder::new(4, 1.0);
            let s: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s2: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            prop_assert!(curiosity_reward(&fwd, &enc, &s, [0.1, 0.2], &s2, delta) >= 0.0);
        }

        #[test]
        fn squash_stays_in_open_box(u0 in -30.0..30.0f64, u1 in -30.0..30.0f64) {
            let b = ActionBounds::default();
            let (v, w) = squash([u0, u1], &b);
            prop_assert!(v >= b.v_min && v <= b.v_max && w >= b.w_min && w <= b.w_max);
        }
    }
}
