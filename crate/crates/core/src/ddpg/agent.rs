use std::io::{Read, Write};

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ReplayBuffer;
use crate::error::{check_dim, Error, Result};
use crate::mdp::Transition;
use crate::nn::checkpoint::{read_f64s, read_net, read_u32, read_u64, write_f64s, write_net, write_u32, write_u64};
use crate::nn::{AdamConfig, AdamState, MlpNet, NetShape, OutputHead};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    /// Hidden layer widths shared by actor and critic.
    pub hidden: Vec<usize>,
    pub gamma: f64,
    /// Polyak rate for the target networks.
    pub tau: f64,
    /// Standard deviation of the Gaussian exploration noise.
    pub exploration_sigma: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub actor_adam: AdamConfig,
    pub critic_adam: AdamConfig,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 256, 256],
            gamma: 0.95,
            tau: 0.005,
            exploration_sigma: 0.1,
            batch_size: 128,
            buffer_capacity: 1_000_000,
            actor_adam: AdamConfig::default(),
            critic_adam: AdamConfig::default(),
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("ddpg.hidden", "layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("ddpg.gamma", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::config("ddpg.tau", "must lie in [0, 1]"));
        }
        if !(self.exploration_sigma >= 0.0 && self.exploration_sigma.is_finite()) {
            return Err(Error::config("ddpg.exploration_sigma", "must be finite and >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("ddpg.batch_size", "must be at least 1"));
        }
        if self.buffer_capacity == 0 {
            return Err(Error::config("ddpg.buffer_capacity", "must be at least 1"));
        }
        for (key, adam) in [("ddpg.actor_adam", &self.actor_adam), ("ddpg.critic_adam", &self.critic_adam)] {
            if !(adam.lr > 0.0 && adam.lr.is_finite()) {
                return Err(Error::config(format!("{key}.lr"), "must be finite and > 0"));
            }
            if !(0.0..1.0).contains(&adam.beta1) || !(0.0..1.0).contains(&adam.beta2) {
                return Err(Error::config(format!("{key}.beta1"), "betas must lie in [0, 1)"));
            }
            if !(adam.eps > 0.0) {
                return Err(Error::config(format!("{key}.eps"), "must be > 0"));
            }
        }
        Ok(())
    }

    pub fn actor_shape(&self, state_dim: usize, action_dim: usize) -> Result<NetShape> {
        NetShape::mlp(state_dim, &self.hidden, action_dim, OutputHead::Actor)
    }

    pub fn critic_shape(&self, state_dim: usize, action_dim: usize) -> Result<NetShape> {
        NetShape::mlp(state_dim + action_dim, &self.hidden, 1, OutputHead::Linear)
    }
}

/// Anything that scores state-action batches and exposes `dQ/da`.
pub trait ActionValue {
    /// Row-wise `Q(s, a)` and its gradient with respect to `a`.
    fn value_and_action_grad(
        &self,
        states: ArrayView2<f64>,
        actions: ArrayView2<f64>,
    ) -> Result<(Array1<f64>, Array2<f64>)>;
}

/// A critic network over `state || action`.
impl ActionValue for MlpNet {
    fn value_and_action_grad(
        &self,
        states: ArrayView2<f64>,
        actions: ArrayView2<f64>,
    ) -> Result<(Array1<f64>, Array2<f64>)> {
        let input = ndarray::concatenate(Axis(1), &[states, actions])
            .map_err(|e| Error::Contract(format!("state/action batch mismatch: {e}")))?;
        let cache = self.forward(input.view())?;
        let q = cache.output().column(0).to_owned();
        let ones = Array2::ones((input.nrows(), 1));
        let d_input = self.backward_input(&cache, ones.view())?;
        let d_action = d_input.slice(s![.., states.ncols()..]).to_owned();
        Ok((q, d_action))
    }
}

/// One Adam ascent step of `actor` on the mean of `critic(s, actor(s))` over
/// `states`, holding the critic fixed. Returns the mean value before the step.
pub fn policy_gradient_step<C: ActionValue + ?Sized>(
    actor: &mut MlpNet,
    adam: &mut AdamState,
    states: ArrayView2<f64>,
    critic: &C,
) -> Result<f64> {
    let batch = states.nrows();
    if batch == 0 {
        return Err(Error::Contract("actor update on an empty batch".into()));
    }
    let cache = actor.forward(states)?;
    let (q, dq_da) = critic.value_and_action_grad(states, cache.output().view())?;
    let objective = q.mean().unwrap();
    if !objective.is_finite() {
        return Err(Error::NonFinite(format!("actor objective {objective}")));
    }
    // Adam minimizes, so feed the gradient of -mean Q.
    let grad_out = dq_da.mapv(|g| -g / batch as f64);
    let (grads, _) = actor.backward(&cache, grad_out.view())?;
    adam.step(actor, &grads)?;
    Ok(objective)
}

/// Actor-critic learner with target networks.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub config: DdpgConfig,
    pub actor: MlpNet,
    pub critic: MlpNet,
    pub actor_target: MlpNet,
    pub critic_target: MlpNet,
    pub actor_adam: AdamState,
    pub critic_adam: AdamState,
    state_dim: usize,
    action_dim: usize,
}

fn stack_rows<'a>(rows: impl ExactSizeIterator<Item = &'a [f64]>, dim: usize) -> Result<Array2<f64>> {
    let n = rows.len();
    let mut out = Array2::zeros((n, dim));
    for (mut dst, src) in out.axis_iter_mut(Axis(0)).zip(rows) {
        check_dim("batch row", dim, src.len())?;
        dst.assign(&ArrayView2::from_shape((1, dim), src).unwrap().row(0));
    }
    Ok(out)
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, config: DdpgConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let actor = MlpNet::new(config.actor_shape(state_dim, action_dim)?, rng);
        let critic = MlpNet::new(config.critic_shape(state_dim, action_dim)?, rng);
        let actor_adam = AdamState::new(actor.num_params(), config.actor_adam);
        let critic_adam = AdamState::new(critic.num_params(), config.critic_adam);
        Ok(Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            actor_adam,
            critic_adam,
            config,
            state_dim,
            action_dim,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Deterministic actor output, optionally perturbed by clamped Gaussian noise.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], explore: bool, rng: &mut R) -> Result<Vec<f64>> {
        let mut a = self.actor.predict(state)?;
        if explore && self.config.exploration_sigma > 0.0 {
            let noise = Normal::new(0.0, self.config.exploration_sigma)
                .map_err(|e| Error::config("ddpg.exploration_sigma", e.to_string()))?;
            for x in &mut a {
                *x = (*x + noise.sample(rng)).clamp(0.0, 1.0);
            }
        }
        Ok(a)
    }

    fn batch_arrays(&self, batch: &[&Transition]) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>, Array1<f64>)> {
        if batch.is_empty() {
            return Err(Error::Contract("update on an empty batch".into()));
        }
        let s = stack_rows(batch.iter().map(|t| t.state.as_slice()), self.state_dim)?;
        let a = stack_rows(batch.iter().map(|t| t.action.as_slice()), self.action_dim)?;
        let s2 = stack_rows(batch.iter().map(|t| t.next_state.as_slice()), self.state_dim)?;
        let r = batch.iter().map(|t| t.reward).collect();
        Ok((s, a, s2, r))
    }

    /// Mean squared Bellman error against target-network bootstraps, without
    /// touching any parameters.
    pub fn critic_loss(&self, batch: &[&Transition]) -> Result<f64> {
        let (s, a, s2, r) = self.batch_arrays(batch)?;
        let y = self.bellman_targets(&s2, &r)?;
        let q = self.critic.predict_batch(ndarray::concatenate(Axis(1), &[s.view(), a.view()]).unwrap().view())?;
        Ok(q.column(0).iter().zip(&y).map(|(q, y)| (y - q).powi(2)).sum::<f64>() / y.len() as f64)
    }

    fn bellman_targets(&self, next_states: &Array2<f64>, rewards: &Array1<f64>) -> Result<Array1<f64>> {
        if self.config.gamma == 0.0 {
            return Ok(rewards.clone());
        }
        let next_actions = self.actor_target.predict_batch(next_states.view())?;
        let next_input = ndarray::concatenate(Axis(1), &[next_states.view(), next_actions.view()]).unwrap();
        let next_q = self.critic_target.predict_batch(next_input.view())?;
        Ok(rewards + &(next_q.column(0).to_owned() * self.config.gamma))
    }

    /// One Adam step on the critic's mean squared Bellman error. Returns the
    /// loss before the step.
    pub fn critic_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        let (s, a, s2, r) = self.batch_arrays(batch)?;
        let y = self.bellman_targets(&s2, &r)?;
        let input = ndarray::concatenate(Axis(1), &[s.view(), a.view()]).unwrap();
        let cache = self.critic.forward(input.view())?;
        let q = cache.output().column(0);
        let n = batch.len() as f64;
        let loss = q.iter().zip(&y).map(|(q, y)| (y - q).powi(2)).sum::<f64>() / n;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("critic loss {loss}")));
        }
        let grad_out = Array2::from_shape_fn((batch.len(), 1), |(i, _)| 2.0 * (q[i] - y[i]) / n);
        let (grads, _) = self.critic.backward(&cache, grad_out.view())?;
        self.critic_adam.step(&mut self.critic, &grads)?;
        Ok(loss)
    }

    /// One policy-gradient step through the current critic. Returns the mean
    /// `Q(s, pi(s))` before the step.
    pub fn actor_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Contract("update on an empty batch".into()));
        }
        let s = stack_rows(batch.iter().map(|t| t.state.as_slice()), self.state_dim)?;
        policy_gradient_step(&mut self.actor, &mut self.actor_adam, s.view(), &self.critic)
    }

    pub fn soft_update(&mut self) -> Result<()> {
        let tau = self.config.tau;
        self.actor_target.soft_update_from(&self.actor, tau)?;
        self.critic_target.soft_update_from(&self.critic, tau)
    }

    /// Samples one batch and runs critic, actor and target updates.
    /// Returns `(critic loss, actor objective)`, or `None` while the buffer
    /// holds fewer transitions than a batch.
    pub fn train_step<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<Option<(f64, f64)>> {
        if buffer.len() < self.config.batch_size {
            return Ok(None);
        }
        let batch = buffer.sample(self.config.batch_size, rng);
        let loss = self.critic_update(&batch)?;
        let objective = self.actor_update(&batch)?;
        self.soft_update()?;
        Ok(Some((loss, objective)))
    }

    /// Replaces the actor and its target with the given parameters.
    pub fn load_actor_genome(&mut self, genome: &crate::nn::Genome) -> Result<()> {
        self.actor.load_genome(genome)?;
        self.actor_target.load_genome(genome)
    }

    /// Binary checkpoint: magic `b"EDAG"`, version (u32), the four networks
    /// (actor, critic, actor target, critic target) in network checkpoint
    /// format, then the actor and critic Adam states as step count (u64),
    /// lr, beta1, beta2, eps (f64 each) and the two moment vectors.
    pub fn write_checkpoint<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"EDAG")?;
        write_u32(w, 1)?;
        for net in [&self.actor, &self.critic, &self.actor_target, &self.critic_target] {
            write_net(w, net)?;
        }
        for adam in [&self.actor_adam, &self.critic_adam] {
            write_u64(w, adam.step)?;
            let c = adam.config;
            write_f64s(w, &[c.lr, c.beta1, c.beta2, c.eps])?;
            write_f64s(w, &adam.m)?;
            write_f64s(w, &adam.v)?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(r: &mut R, config: DdpgConfig) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"EDAG" {
            return Err(Error::Checkpoint(format!("bad agent magic {magic:?}")));
        }
        let version = read_u32(r)?;
        if version != 1 {
            return Err(Error::Checkpoint(format!("unsupported agent format version {version}")));
        }
        let actor = read_net(r)?;
        let critic = read_net(r)?;
        let actor_target = read_net(r)?;
        let critic_target = read_net(r)?;
        let mut read_adam = |n: usize| -> Result<AdamState> {
            let step = read_u64(r)?;
            let c = read_f64s(r)?;
            if c.len() != 4 {
                return Err(Error::Checkpoint("malformed adam header".into()));
            }
            let m = read_f64s(r)?;
            let v = read_f64s(r)?;
            if m.len() != n || v.len() != n {
                return Err(Error::Checkpoint("adam moments do not match network size".into()));
            }
            Ok(AdamState {
                config: AdamConfig {
                    lr: c[0],
                    beta1: c[1],
                    beta2: c[2],
                    eps: c[3],
                },
                m,
                v,
                step,
            })
        };
        let actor_adam = read_adam(actor.num_params())?;
        let critic_adam = read_adam(critic.num_params())?;
        if actor.shape() != actor_target.shape() || critic.shape() != critic_target.shape() {
            return Err(Error::Checkpoint("target shapes differ from online shapes".into()));
        }
        let state_dim = actor.shape().input_dim();
        let action_dim = actor.shape().output_dim();
        if critic.shape().input_dim() != state_dim + action_dim {
            return Err(Error::Checkpoint("critic input does not match actor dimensions".into()));
        }
        Ok(Self {
            config,
            actor,
            critic,
            actor_target,
            critic_target,
            actor_adam,
            critic_adam,
            state_dim,
            action_dim,
        })
    }
}
