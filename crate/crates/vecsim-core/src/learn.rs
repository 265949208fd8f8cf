//! Function approximators and the actor-critic training loops.
//!
//! Networks are plain fully connected rectifier MLPs with hand-written
//! reverse-mode gradients (including gradients with respect to the input,
//! which the actor update needs to push through the critic). No external
//! autodiff; correctness is pinned by finite-difference tests.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::env::VecEnv;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum LearnError {
    DimensionMismatch { expected: usize, got: usize },
    /// Non-finite value encountered while evaluating layer `layer`.
    NonFinite { layer: usize },
    NotReady { have: usize, need: usize },
}

impl fmt::Display for LearnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnError::DimensionMismatch { expected, got } => {
                write!(f, "expected length {expected}, got {got}")
            }
            LearnError::NonFinite { layer } => {
                write!(f, "non-finite intermediate at layer {layer}")
            }
            LearnError::NotReady { have, need } => {
                write!(f, "buffer holds {have} transitions, need {need}")
            }
        }
    }
}

/// Fully connected net: rectifier hidden layers, identity or tanh output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// Layer widths, input first.
    pub widths: Vec<usize>,
    /// Row-major weight matrices, one per layer: `w[l][o * in + i]`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub output_tanh: bool,
}

/// Parameter-shaped gradient (or optimizer moment) storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| alloc::vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| alloc::vec![0.0; b.len()]).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            w.iter_mut().for_each(|x| *x *= s);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x *= s);
        }
    }
}

/// Per-layer activations kept for the backward pass.
pub struct ForwardCache {
    /// Post-activation values, `acts[0]` is the input, last is the output.
    acts: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache always holds the input")
    }
}

impl Mlp {
    /// Uniform init in +-1/sqrt(fan_in), targets start as copies elsewhere.
    pub fn new(widths: Vec<usize>, output_tanh: bool, rng: &mut ChaCha12Rng) -> Self {
        assert!(widths.len() >= 2, "need at least input and output layers");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            weights.push(
                (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect(),
            );
            biases.push((0..fan_out).map(|_| rng.random_range(-bound..bound)).collect());
        }
        Self { widths, weights, biases, output_tanh }
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("nonempty widths")
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, LearnError> {
        Ok(self.forward_cached(input)?.acts.pop_unwrap())
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache, LearnError> {
        if input.len() != self.input_dim() {
            return Err(LearnError::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let layers = self.weights.len();
        let mut acts = Vec::with_capacity(layers + 1);
        let mut pre = Vec::with_capacity(layers);
        acts.push(input.to_vec());
        for l in 0..layers {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let a = &acts[l];
            let mut z = self.biases[l].clone();
            for o in 0..n_out {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                let mut s = z[o];
                for (w, x) in row.iter().zip(a) {
                    s += w * x;
                }
                z[o] = s;
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(LearnError::NonFinite { layer: l });
            }
            let last = l == layers - 1;
            let out: Vec<f64> = if last {
                if self.output_tanh {
                    z.iter().map(|v| libm::tanh(*v)).collect()
                } else {
                    z.clone()
                }
            } else {
                z.iter().map(|v| v.max(0.0)).collect()
            };
            pre.push(z);
            acts.push(out);
        }
        Ok(ForwardCache { acts, pre })
    }

    /// Backpropagates `dl_dout` (gradient of a scalar with respect to the
    /// output) through the cached forward pass. Returns parameter gradients
    /// and the gradient with respect to the input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        dl_dout: &[f64],
    ) -> Result<(Gradients, Vec<f64>), LearnError> {
        if dl_dout.len() != self.output_dim() {
            return Err(LearnError::DimensionMismatch {
                expected: self.output_dim(),
                got: dl_dout.len(),
            });
        }
        let layers = self.weights.len();
        let mut grads = Gradients::zeros_like(self);
        let mut delta: Vec<f64> = if self.output_tanh {
            let y = cache.output();
            dl_dout.iter().zip(y).map(|(g, v)| g * (1.0 - v * v)).collect()
        } else {
            dl_dout.to_vec()
        };
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let a = &cache.acts[l];
            for o in 0..n_out {
                let d = delta[o];
                grads.biases[l][o] += d;
                let row = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                for (g, x) in row.iter_mut().zip(a) {
                    *g += d * x;
                }
            }
            let mut upstream = alloc::vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                for (u, w) in upstream.iter_mut().zip(row) {
                    *u += d * w;
                }
            }
            if l > 0 {
                // rectifier derivative on the previous pre-activation
                for (u, z) in upstream.iter_mut().zip(&cache.pre[l - 1]) {
                    if *z <= 0.0 {
                        *u = 0.0;
                    }
                }
            }
            delta = upstream;
        }
        Ok((grads, delta))
    }

    /// All parameters, weights then biases per layer, as one flat vector.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in 0..self.weights.len() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    pub fn load_flat(&mut self, params: &[f64]) -> Result<(), LearnError> {
        let need: usize =
            self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>();
        if params.len() != need {
            return Err(LearnError::DimensionMismatch { expected: need, got: params.len() });
        }
        let mut at = 0;
        for l in 0..self.weights.len() {
            let wl = self.weights[l].len();
            self.weights[l].copy_from_slice(&params[at..at + wl]);
            at += wl;
            let bl = self.biases[l].len();
            self.biases[l].copy_from_slice(&params[at..at + bl]);
            at += bl;
        }
        Ok(())
    }
}

// small helper so forward() can consume the cache without cloning
trait PopUnwrap {
    fn pop_unwrap(self) -> Vec<f64>;
}
impl PopUnwrap for Vec<Vec<f64>> {
    fn pop_unwrap(mut self) -> Vec<f64> {
        self.pop().expect("nonempty")
    }
}

/// Polyak averaging: `target = delta * online + (1 - delta) * target`.
pub fn soft_update(online: &Mlp, target: &mut Mlp, delta: f64) {
    assert_eq!(online.widths, target.widths, "target shapes mirror online shapes");
    for (tw, ow) in target.weights.iter_mut().zip(&online.weights) {
        for (t, o) in tw.iter_mut().zip(ow) {
            *t = delta * o + (1.0 - delta) * *t;
        }
    }
    for (tb, ob) in target.biases.iter_mut().zip(&online.biases) {
        for (t, o) in tb.iter_mut().zip(ob) {
            *t = delta * o + (1.0 - delta) * *t;
        }
    }
}

pub trait Optimizer {
    /// One descent step along `grads`.
    fn step(&mut self, net: &mut Mlp, grads: &Gradients);
}

#[derive(Debug)]
pub struct Sgd {
    pub lr: f64,
}

impl Optimizer for Sgd {
    fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        for (w, g) in net.weights.iter_mut().zip(&grads.weights) {
            for (x, d) in w.iter_mut().zip(g) {
                *x -= self.lr * d;
            }
        }
        for (b, g) in net.biases.iter_mut().zip(&grads.biases) {
            for (x, d) in b.iter_mut().zip(g) {
                *x -= self.lr * d;
            }
        }
    }
}

/// Adaptive-moment estimation with bias correction.
#[derive(Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Option<Gradients>,
    v: Option<Gradients>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: None, v: None }
    }
}

impl Optimizer for Adam {
    fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        if self.lr == 0.0 {
            return;
        }
        let m = self.m.get_or_insert_with(|| Gradients::zeros_like(net));
        let v = self.v.get_or_insert_with(|| Gradients::zeros_like(net));
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        let upd = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p[i] -= self.lr * mh / (libm::sqrt(vh) + self.eps);
            }
        };
        for l in 0..net.weights.len() {
            upd(&mut net.weights[l], &grads.weights[l], &mut m.weights[l], &mut v.weights[l]);
            upd(&mut net.biases[l], &grads.biases[l], &mut m.biases[l], &mut v.biases[l]);
        }
    }
}

/// One joint experience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<Vec<f64>>,
    pub done: bool,
}

/// FIFO ring buffer with uniform minibatch sampling (without replacement
/// within a batch).
#[derive(Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    head: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self { capacity, items: Vec::new(), head: 0, inserted: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            // overwrite the oldest slot
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        self.inserted += 1;
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// Floyd's algorithm: `amount` distinct uniform indices.
    pub fn sample_indices(&self, rng: &mut ChaCha12Rng, amount: usize) -> Vec<usize> {
        let n = self.items.len();
        assert!(amount <= n);
        let mut picked: Vec<usize> = Vec::with_capacity(amount);
        for i in n - amount..n {
            let t = rng.random_range(0..=i);
            if picked.contains(&t) {
                picked.push(i);
            } else {
                picked.push(t);
            }
        }
        picked
    }
}

/// Training hyperparameters. Desk-scale widths by default; `paper_preset`
/// restores the published network sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    pub episodes: u64,
    pub gamma: f64,
    /// Soft-update coefficient.
    pub delta: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Gaussian exploration noise, decayed linearly from start to end.
    pub noise_start: f64,
    pub noise_end: f64,
    /// Hidden widths only; input and output are derived from the layout.
    pub critic_hidden: Vec<usize>,
    pub actor_hidden: Vec<usize>,
    pub updates_per_episode: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            episodes: 5000,
            gamma: 0.95,
            delta: 0.01,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            batch_size: 128,
            buffer_capacity: 30_000,
            noise_start: 0.3,
            noise_end: 0.02,
            critic_hidden: alloc::vec![128, 64, 32],
            actor_hidden: alloc::vec![64, 32],
            updates_per_episode: 1,
        }
    }
}

impl LearnConfig {
    /// Published network sizes (slow on a desktop; kept for fidelity runs).
    pub fn paper_preset() -> Self {
        Self {
            critic_hidden: alloc::vec![1024, 512, 300],
            actor_hidden: alloc::vec![500, 128],
            ..Self::default()
        }
    }

    pub fn noise_at(&self, episode: u64) -> f64 {
        if self.episodes <= 1 {
            return self.noise_end;
        }
        let t = episode as f64 / (self.episodes - 1) as f64;
        self.noise_start + (self.noise_end - self.noise_start) * t.min(1.0)
    }
}

/// Actor, centralized critic and their targets for one agent.
#[derive(Debug)]
pub struct AgentPair {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
}

impl AgentPair {
    fn new(
        state_dim: usize,
        action_dim: usize,
        joint_state_dim: usize,
        joint_action_dim: usize,
        cfg: &LearnConfig,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        let mut actor_widths = alloc::vec![state_dim];
        actor_widths.extend_from_slice(&cfg.actor_hidden);
        actor_widths.push(action_dim);
        let mut critic_widths = alloc::vec![joint_state_dim + joint_action_dim];
        critic_widths.extend_from_slice(&cfg.critic_hidden);
        critic_widths.push(1);
        let actor = Mlp::new(actor_widths, true, rng);
        let critic = Mlp::new(critic_widths, false, rng);
        let target_actor = actor.clone();
        let target_critic = critic.clone();
        Self {
            actor,
            critic,
            target_actor,
            target_critic,
            actor_opt: Adam::new(cfg.actor_lr),
            critic_opt: Adam::new(cfg.critic_lr),
        }
    }
}

fn concat(parts: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::with_capacity(parts.iter().map(Vec::len).sum());
    for p in parts {
        out.extend_from_slice(p);
    }
    out
}

/// Mean-squared temporal-difference loss and its critic gradient on a batch.
///
/// Targets: `y_j = r_k + gamma * Q'_k(S'_j, mu'_1(s'_1) ... mu'_K(s'_K))`.
pub fn critic_gradients(
    agents: &[AgentPair],
    k: usize,
    batch: &[&Transition],
    gamma: f64,
) -> Result<(f64, Gradients), LearnError> {
    let critic = &agents[k].critic;
    let mut grads = Gradients::zeros_like(critic);
    let mut loss = 0.0;
    let x = batch.len() as f64;
    for t in batch {
        let mut next_actions = Vec::with_capacity(agents.len());
        for (i, agent) in agents.iter().enumerate() {
            next_actions.push(agent.target_actor.forward(&t.next_states[i])?);
        }
        let mut target_in = concat(&t.next_states);
        target_in.extend(concat(&next_actions));
        let y = t.rewards[k] + gamma * agents[k].target_critic.forward(&target_in)?[0];
        let mut online_in = concat(&t.states);
        online_in.extend(concat(&t.actions));
        let cache = critic.forward_cached(&online_in)?;
        let q = cache.output()[0];
        loss += (q - y) * (q - y) / x;
        let (g, _) = critic.backward(&cache, &[2.0 * (q - y) / x])?;
        grads.add_scaled(&g, 1.0);
    }
    Ok((loss, grads))
}

/// One critic descent step; returns the pre-step loss.
pub fn critic_update(
    agents: &mut [AgentPair],
    k: usize,
    batch: &[&Transition],
    gamma: f64,
) -> Result<f64, LearnError> {
    let (loss, grads) = critic_gradients(agents, k, batch, gamma)?;
    let agent = &mut agents[k];
    agent.critic_opt.step(&mut agent.critic, &grads);
    Ok(loss)
}

/// Mean critic value at replaced own actions and its actor gradient (of the
/// objective, i.e. the direction of ascent).
pub fn actor_gradients(
    agents: &[AgentPair],
    k: usize,
    batch: &[&Transition],
) -> Result<(f64, Gradients), LearnError> {
    let agent = &agents[k];
    let mut grads = Gradients::zeros_like(&agent.actor);
    let mut objective = 0.0;
    let x = batch.len() as f64;
    let state_dims: Vec<usize> = batch[0].states.iter().map(Vec::len).collect();
    let action_dims: Vec<usize> = batch[0].actions.iter().map(Vec::len).collect();
    let joint_state: usize = state_dims.iter().sum();
    let action_offset: usize = joint_state + action_dims[..k].iter().sum::<usize>();
    for t in batch {
        let actor_cache = agent.actor.forward_cached(&t.states[k])?;
        let own_action = actor_cache.output().to_vec();
        let mut critic_in = concat(&t.states);
        for (i, a) in t.actions.iter().enumerate() {
            if i == k {
                critic_in.extend_from_slice(&own_action);
            } else {
                critic_in.extend_from_slice(a);
            }
        }
        let critic_cache = agent.critic.forward_cached(&critic_in)?;
        objective += critic_cache.output()[0] / x;
        let (_, dq_din) = agent.critic.backward(&critic_cache, &[1.0 / x])?;
        let dq_da = &dq_din[action_offset..action_offset + action_dims[k]];
        let (g, _) = agent.actor.backward(&actor_cache, dq_da)?;
        grads.add_scaled(&g, 1.0);
    }
    Ok((objective, grads))
}

/// One actor ascent step; returns the pre-step objective.
pub fn actor_update(
    agents: &mut [AgentPair],
    k: usize,
    batch: &[&Transition],
) -> Result<f64, LearnError> {
    let (objective, mut grads) = actor_gradients(agents, k, batch)?;
    grads.scale(-1.0); // optimizer descends, we ascend
    let agent = &mut agents[k];
    agent.actor_opt.step(&mut agent.actor, &grads);
    Ok(objective)
}

/// Per-episode training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: u64,
    /// Mean per-slot reward of each agent.
    pub mean_reward: Vec<f64>,
    pub critic_loss: Vec<f64>,
    pub actor_objective: Vec<f64>,
    pub noise_sigma: f64,
}

/// The multi-agent learner: per-vehicle actors, centralized critics.
#[derive(Debug)]
pub struct Maddpg {
    pub agents: Vec<AgentPair>,
    pub cfg: LearnConfig,
    pub buffer: ReplayBuffer,
    noise_rng: ChaCha12Rng,
    sample_rng: ChaCha12Rng,
}

impl Maddpg {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        n_agents: usize,
        cfg: LearnConfig,
        seed: u64,
    ) -> Self {
        let mut init_rng = rng::stream(seed, "learn-init");
        let agents = (0..n_agents)
            .map(|_| {
                AgentPair::new(
                    state_dim,
                    action_dim,
                    state_dim * n_agents,
                    action_dim * n_agents,
                    &cfg,
                    &mut init_rng,
                )
            })
            .collect();
        Self {
            agents,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            cfg,
            noise_rng: rng::stream(seed, "noise"),
            sample_rng: rng::stream(seed, "replay"),
        }
    }

    fn gaussian(&mut self) -> f64 {
        // Box-Muller on the noise stream
        let u1: f64 = self.noise_rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = self.noise_rng.random_range(0.0..1.0);
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Noisy joint action, clamped back into [-1, 1].
    pub fn act(&mut self, states: &[Vec<f64>], sigma: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.agents.len());
        for (i, s) in states.iter().enumerate() {
            let mut a = self.agents[i].actor.forward(s).expect("state dim fixed");
            if sigma > 0.0 {
                for x in &mut a {
                    *x = (*x + sigma * {
                        let g = self.gaussian();
                        g
                    })
                    .clamp(-1.0, 1.0);
                }
            }
            out.push(a);
        }
        out
    }

    /// Noise-free joint action (the execution path; critics unused).
    pub fn act_greedy(&self, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
        states
            .iter()
            .enumerate()
            .map(|(i, s)| self.agents[i].actor.forward(s).expect("state dim fixed"))
            .collect()
    }

    /// One gradient pass over every agent plus soft target updates.
    pub fn update(&mut self) -> Result<(Vec<f64>, Vec<f64>), LearnError> {
        let need = self.cfg.batch_size;
        if self.buffer.len() < need {
            return Err(LearnError::NotReady { have: self.buffer.len(), need });
        }
        let mut critic_losses = Vec::with_capacity(self.agents.len());
        let mut actor_objectives = Vec::with_capacity(self.agents.len());
        for k in 0..self.agents.len() {
            let idx = self.buffer.sample_indices(&mut self.sample_rng, need);
            let batch: Vec<&Transition> = idx.iter().map(|i| self.buffer.get(*i)).collect();
            critic_losses.push(critic_update(&mut self.agents, k, &batch, self.cfg.gamma)?);
            actor_objectives.push(actor_update(&mut self.agents, k, &batch)?);
        }
        let delta = self.cfg.delta;
        for a in &mut self.agents {
            soft_update(&a.actor, &mut a.target_actor, delta);
            soft_update(&a.critic, &mut a.target_critic, delta);
        }
        Ok((critic_losses, actor_objectives))
    }
}

/// Splits one flat action into per-vehicle chunks (the single-agent variant
/// drives the same environment through this).
pub fn split_action(flat: &[f64], n: usize) -> Vec<Vec<f64>> {
    let per = flat.len() / n;
    (0..n).map(|i| flat[i * per..(i + 1) * per].to_vec()).collect()
}

/// How the learner maps onto the fleet: one agent per vehicle, or a single
/// agent over the concatenated state/action (the DDPG comparison).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentArrangement {
    PerVehicle,
    SingleAgent,
}

/// Trains on `env` for `cfg.episodes` episodes; deterministic given the
/// environment seed. Rollout, per-agent critic then actor updates on sampled
/// minibatches, then soft target updates, once per episode.
pub fn train_maddpg(
    env: &mut VecEnv,
    cfg: &LearnConfig,
    arrangement: AgentArrangement,
) -> Result<(Maddpg, Vec<EpisodeLog>), LearnError> {
    let kk = env.config().vehicle_count;
    let (n_agents, state_dim, action_dim) = match arrangement {
        AgentArrangement::PerVehicle => (kk, env.state_dim(), env.action_dim()),
        AgentArrangement::SingleAgent => (1, env.state_dim() * kk, env.action_dim() * kk),
    };
    let mut learner = Maddpg::new(state_dim, action_dim, n_agents, cfg.clone(), env.config().seed);
    let mut logs = Vec::with_capacity(cfg.episodes as usize);
    for episode in 0..cfg.episodes {
        let sigma = cfg.noise_at(episode);
        let mut states = arrange(env.reset(episode), arrangement);
        let mut reward_sum = alloc::vec![0.0; kk];
        let mut slots = 0u64;
        while !env.done() {
            let actions = learner.act(&states, sigma);
            let raw: Vec<Vec<f64>> = match arrangement {
                AgentArrangement::PerVehicle => actions.clone(),
                AgentArrangement::SingleAgent => split_action(&actions[0], kk),
            };
            let out = env.step_raw(&raw).expect("layout-shaped actions");
            let next_states = arrange(out.states.clone(), arrangement);
            let rewards = match arrangement {
                AgentArrangement::PerVehicle => out.rewards.clone(),
                AgentArrangement::SingleAgent => {
                    alloc::vec![out.rewards.iter().sum::<f64>() / kk as f64]
                }
            };
            learner.buffer.push(Transition {
                states: states.clone(),
                actions,
                rewards,
                next_states: next_states.clone(),
                done: out.done,
            });
            for (s, r) in reward_sum.iter_mut().zip(&out.rewards) {
                *s += r;
            }
            slots += 1;
            states = next_states;
        }
        let mut critic_loss = alloc::vec![0.0; n_agents];
        let mut actor_objective = alloc::vec![0.0; n_agents];
        for _ in 0..cfg.updates_per_episode {
            match learner.update() {
                Ok((cl, ao)) => {
                    critic_loss = cl;
                    actor_objective = ao;
                }
                Err(LearnError::NotReady { .. }) => break,
                Err(e) => return Err(e),
            }
        }
        logs.push(EpisodeLog {
            episode,
            mean_reward: reward_sum.iter().map(|s| s / slots.max(1) as f64).collect(),
            critic_loss,
            actor_objective,
            noise_sigma: sigma,
        });
    }
    Ok((learner, logs))
}

fn arrange(states: Vec<Vec<f64>>, arrangement: AgentArrangement) -> Vec<Vec<f64>> {
    match arrangement {
        AgentArrangement::PerVehicle => states,
        AgentArrangement::SingleAgent => alloc::vec![concat(&states)],
    }
}
