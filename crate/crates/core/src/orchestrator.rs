//! The hybrid training loop: population evaluation, evolution, DDPG gradient
//! phases and two-way weight synchronisation, plus the plain DDPG baseline
//! it is compared against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddpg::{DdpgAgent, DdpgConfig, ReplayBuffer};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::evo::{evaluate, next_generation, rollout, EvoConfig, Evaluation, Individual};
use crate::mdp::{Environment, SlicingMdp};
use crate::nn::{MlpNet, NetShape};
use crate::rng::{derive_rng, derive_seed, stream, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdrlConfig {
    pub generations: usize,
    /// RL actor is copied into the population every this many generations.
    pub sync_period: usize,
    /// Control steps per episode.
    pub episode_length: usize,
    /// Gradient updates per generation; `None` means one per collected
    /// transition (population size times episode length).
    pub grad_steps_per_generation: Option<usize>,
    /// Exploratory episodes the RL actor adds to the replay buffer each
    /// generation, on top of the population's.
    pub rl_episodes_per_generation: usize,
    pub ea_to_rl: bool,
    /// Consecutive generations the best elite must beat the RL actor before
    /// its weights are pushed into the actor.
    pub ea_to_rl_patience: usize,
    pub convergence_window: usize,
    pub convergence_tolerance: f64,
    pub early_stop: bool,
    pub seed: u64,
}

impl Default for EdrlConfig {
    fn default() -> Self {
        Self {
            generations: 100,
            sync_period: 10,
            episode_length: 40,
            grad_steps_per_generation: None,
            rl_episodes_per_generation: 1,
            ea_to_rl: true,
            ea_to_rl_patience: 3,
            convergence_window: 10,
            convergence_tolerance: 0.01,
            early_stop: true,
            seed: 0,
        }
    }
}

impl EdrlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.generations == 0 {
            return Err(Error::config("edrl.generations", "must be at least 1"));
        }
        if self.sync_period == 0 {
            return Err(Error::config("edrl.sync_period", "must be at least 1"));
        }
        if self.episode_length == 0 {
            return Err(Error::config("edrl.episode_length", "must be at least 1"));
        }
        if self.ea_to_rl_patience == 0 {
            return Err(Error::config("edrl.ea_to_rl_patience", "must be at least 1"));
        }
        if self.convergence_window < 2 {
            return Err(Error::config("edrl.convergence_window", "must be at least 2"));
        }
        if !(self.convergence_tolerance >= 0.0 && self.convergence_tolerance.is_finite()) {
            return Err(Error::config("edrl.convergence_tolerance", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn grad_steps(&self, population_size: usize) -> usize {
        self.grad_steps_per_generation
            .unwrap_or(population_size * self.episode_length)
    }

    /// Episodes that feed the replay buffer per generation.
    pub fn episodes_per_generation(&self, population_size: usize) -> usize {
        population_size + self.rl_episodes_per_generation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    /// 1-based.
    pub generation: usize,
    pub fitness: Vec<f64>,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Greedy episode reward of the RL actor.
    pub rl_fitness: f64,
    pub critic_loss: Option<f64>,
    pub actor_objective: Option<f64>,
    /// Discounted return of the fittest individual's episode.
    pub discounted_return: f64,
    pub rl_discounted_return: f64,
    /// Episode-mean QoS per slice and throughput per UE of the fittest individual.
    pub slice_qos: Vec<f64>,
    pub ue_throughput: Vec<f64>,
    /// Cumulative environment steps collected for training.
    pub env_steps: usize,
    pub updates: usize,
    /// Population slot that received the RL actor this generation.
    pub rl_to_ea: Option<usize>,
    pub ea_to_rl: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    /// 1-based.
    pub episode: usize,
    pub reward_sum: f64,
    pub discounted_return: f64,
    pub critic_loss: Option<f64>,
    pub actor_objective: Option<f64>,
    pub slice_qos: Vec<f64>,
    pub ue_throughput: Vec<f64>,
    pub env_steps: usize,
    pub updates: usize,
}

#[derive(Debug)]
pub struct EdrlOutcome {
    pub agent: DdpgAgent,
    pub population: Vec<Individual>,
    pub stats: Vec<GenerationStats>,
    pub converged: bool,
}

#[derive(Debug)]
pub struct DrlOutcome {
    pub agent: DdpgAgent,
    pub stats: Vec<EpisodeStats>,
}

/// True when the mean of the last `window` values moved by less than
/// `tolerance` (relative) from the mean of the `window` values before it.
pub fn check_convergence(history: &[f64], window: usize, tolerance: f64) -> bool {
    if window < 2 || history.len() < 2 * window {
        return false;
    }
    let n = history.len();
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let recent = mean(&history[n - window..]);
    let before = mean(&history[n - 2 * window..n - window]);
    recent == before || (recent - before).abs() < tolerance * before.abs()
}

#[derive(Default)]
struct UpdateTotals {
    loss: f64,
    objective: f64,
    count: usize,
}

impl UpdateTotals {
    fn means(&self) -> (Option<f64>, Option<f64>) {
        if self.count == 0 {
            return (None, None);
        }
        let n = self.count as f64;
        (Some(self.loss / n), Some(self.objective / n))
    }
}

fn gradient_phase(
    agent: &mut DdpgAgent,
    buffer: &ReplayBuffer,
    steps: usize,
    rng: &mut SimRng,
    context: &str,
) -> Result<UpdateTotals> {
    let mut totals = UpdateTotals::default();
    for i in 0..steps {
        match agent.train_step(buffer, rng) {
            Ok(Some((loss, objective))) => {
                totals.loss += loss;
                totals.objective += objective;
                totals.count += 1;
            }
            Ok(None) => break,
            Err(Error::NonFinite(msg)) => {
                return Err(Error::NonFinite(format!(
                    "{msg} at {context}, update {i}; buffer {} transitions, actor finite {}, critic finite {}, \
                     critic adam step {}",
                    buffer.len(),
                    agent.actor.is_finite(),
                    agent.critic.is_finite(),
                    agent.critic_adam.step
                )))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(totals)
}

fn checked_dims<E: Environment>(env: &E, agent: &DdpgAgent) -> Result<()> {
    crate::error::check_dim("actor input", agent.state_dim(), env.state_dim())?;
    crate::error::check_dim("actor output", agent.action_dim(), env.action_dim())
}

/// Runs the hybrid algorithm on the slicing environment.
pub fn run_edrl(cfg: &EdrlConfig, env: &EnvConfig, evo: &EvoConfig, ddpg: &DdpgConfig) -> Result<EdrlOutcome> {
    env.validate()?;
    run_edrl_with(cfg, evo, ddpg, || SlicingMdp::new(env.clone()), &mut |_| {})
}

/// Runs the hybrid algorithm on any environment built by `make_env`, handing
/// each generation's record to `observer` as soon as it is complete.
pub fn run_edrl_with<E, F>(
    cfg: &EdrlConfig,
    evo: &EvoConfig,
    ddpg: &DdpgConfig,
    make_env: F,
    observer: &mut dyn FnMut(&GenerationStats),
) -> Result<EdrlOutcome>
where
    E: Environment,
    F: Fn() -> Result<E>,
{
    cfg.validate()?;
    evo.validate()?;
    ddpg.validate()?;
    let np = evo.population_size;
    let mut envs = (0..np).map(|_| make_env()).collect::<Result<Vec<E>>>()?;
    let mut rl_env = make_env()?;
    let (sd, ad) = (rl_env.state_dim(), rl_env.action_dim());
    let shape: NetShape = ddpg.actor_shape(sd, ad)?;

    let mut agent = DdpgAgent::new(sd, ad, ddpg.clone(), &mut derive_rng(cfg.seed, stream::AGENT, 0))?;
    checked_dims(&rl_env, &agent)?;
    let mut train_rng = derive_rng(cfg.seed, stream::AGENT, 1);
    let mut explore_rng = derive_rng(cfg.seed, stream::AGENT, 2);
    let mut evo_rng = derive_rng(cfg.seed, stream::EVOLUTION, 0);
    let mut population: Vec<Individual> = (0..np)
        .map(|i| {
            let net = MlpNet::new(shape.clone(), &mut derive_rng(cfg.seed, stream::POPULATION_INIT, i as u64));
            Individual::new(net.to_genome())
        })
        .collect();

    let mut buffer = ReplayBuffer::new(ddpg.buffer_capacity);
    let grad_steps = cfg.grad_steps(np);
    let mut stats = Vec::with_capacity(cfg.generations);
    let mut history = Vec::with_capacity(cfg.generations);
    let mut env_steps = 0;
    let mut updates = 0;
    let mut dominance = 0;
    let mut converged = false;

    for g in 1..=cfg.generations {
        // every policy in a generation faces the same channel realisation
        let eval_seed = derive_seed(cfg.seed, stream::EDRL_EVAL, g as u64);
        let evals: Vec<Evaluation> = population
            .par_iter_mut()
            .zip(envs.par_iter_mut())
            .map(|(ind, env)| evaluate(ind, &shape, env, cfg.episode_length, eval_seed))
            .collect::<Result<_>>()?;
        let fitness: Vec<f64> = evals.iter().map(|e| e.fitness).collect();
        let champion = (0..np).fold(0, |best, i| if fitness[i] > fitness[best] { i } else { best });
        let rl_eval = rollout(&mut rl_env, eval_seed, cfg.episode_length, |s| agent.actor.predict(s))?;
        for e in &evals {
            env_steps += e.trajectory.len();
        }
        let gamma = ddpg.gamma;
        let champion_return = evals[champion].discounted(gamma);
        let (champion_qos, champion_tput) = (evals[champion].mean_qos.clone(), evals[champion].mean_throughput.clone());
        buffer.extend(evals.into_iter().flat_map(|e| e.trajectory));
        for k in 0..cfg.rl_episodes_per_generation {
            let seed = derive_seed(eval_seed, stream::AGENT, k as u64);
            let episode = rollout(&mut rl_env, seed, cfg.episode_length, |s| agent.act(s, true, &mut explore_rng))?;
            env_steps += episode.trajectory.len();
            buffer.extend(episode.trajectory);
        }

        let mut ea_to_rl = false;
        if cfg.ea_to_rl {
            if fitness[champion] > rl_eval.fitness {
                dominance += 1;
            } else {
                dominance = 0;
            }
            if dominance >= cfg.ea_to_rl_patience {
                agent.load_actor_genome(&population[champion].genome)?;
                dominance = 0;
                ea_to_rl = true;
            }
        }

        let elites = next_generation(&mut population, evo, &mut evo_rng)?;

        let totals = gradient_phase(&mut agent, &buffer, grad_steps, &mut train_rng, &format!("generation {g}"))?;
        updates += totals.count;
        let (critic_loss, actor_objective) = totals.means();

        let mut rl_to_ea = None;
        if g % cfg.sync_period == 0 {
            let slot = (0..np)
                .filter(|i| !elites.contains(i))
                .fold(None, |acc: Option<usize>, i| match acc {
                    Some(w) if fitness[w] <= fitness[i] => Some(w),
                    _ => Some(i),
                });
            if let Some(slot) = slot {
                population[slot] = Individual::new(agent.actor.to_genome());
                rl_to_ea = Some(slot);
            }
        }

        history.push(rl_eval.fitness);
        stats.push(GenerationStats {
            generation: g,
            best_fitness: fitness[champion],
            mean_fitness: fitness.iter().sum::<f64>() / np as f64,
            fitness,
            rl_fitness: rl_eval.fitness,
            critic_loss,
            actor_objective,
            discounted_return: champion_return,
            rl_discounted_return: rl_eval.discounted(gamma),
            slice_qos: champion_qos,
            ue_throughput: champion_tput,
            env_steps,
            updates,
            rl_to_ea,
            ea_to_rl,
        });
        observer(stats.last().unwrap());

        if cfg.early_stop && check_convergence(&history, cfg.convergence_window, cfg.convergence_tolerance) {
            converged = true;
            break;
        }
    }

    Ok(EdrlOutcome {
        agent,
        population,
        stats,
        converged,
    })
}

/// Plain DDPG on the slicing environment.
pub fn run_drl_baseline(cfg: &EdrlConfig, env: &EnvConfig, evo: &EvoConfig, ddpg: &DdpgConfig) -> Result<DrlOutcome> {
    env.validate()?;
    run_drl_baseline_with(cfg, evo, ddpg, || SlicingMdp::new(env.clone()), &mut |_| {})
}

/// Plain DDPG with the same environment-step and update budget as the hybrid
/// run configured by `cfg` and `evo`: one exploratory episode for every
/// episode the hybrid run stores, with updates spread evenly across episodes.
pub fn run_drl_baseline_with<E, F>(
    cfg: &EdrlConfig,
    evo: &EvoConfig,
    ddpg: &DdpgConfig,
    make_env: F,
    observer: &mut dyn FnMut(&EpisodeStats),
) -> Result<DrlOutcome>
where
    E: Environment,
    F: Fn() -> Result<E>,
{
    cfg.validate()?;
    evo.validate()?;
    ddpg.validate()?;
    let mut env = make_env()?;
    let (sd, ad) = (env.state_dim(), env.action_dim());
    let mut agent = DdpgAgent::new(sd, ad, ddpg.clone(), &mut derive_rng(cfg.seed, stream::AGENT, 0))?;
    let mut train_rng = derive_rng(cfg.seed, stream::AGENT, 1);
    let mut explore_rng = derive_rng(cfg.seed, stream::AGENT, 2);

    let episodes = cfg.generations * cfg.episodes_per_generation(evo.population_size);
    let total_updates = cfg.generations * cfg.grad_steps(evo.population_size);
    let mut buffer = ReplayBuffer::new(ddpg.buffer_capacity);
    let mut stats = Vec::with_capacity(episodes);
    let mut env_steps = 0;
    let mut scheduled = 0;
    let mut updates = 0;

    for j in 1..=episodes {
        let seed = derive_seed(cfg.seed, stream::DRL_EPISODE, j as u64);
        let episode = rollout(&mut env, seed, cfg.episode_length, |s| agent.act(s, true, &mut explore_rng))?;
        env_steps += episode.trajectory.len();
        let discounted = episode.discounted(ddpg.gamma);
        let Evaluation {
            fitness,
            trajectory,
            mean_qos,
            mean_throughput,
            ..
        } = episode;
        buffer.extend(trajectory);

        let target = j * total_updates / episodes;
        let totals = gradient_phase(&mut agent, &buffer, target - scheduled, &mut train_rng, &format!("episode {j}"))?;
        scheduled = target;
        updates += totals.count;
        let (critic_loss, actor_objective) = totals.means();

        stats.push(EpisodeStats {
            episode: j,
            reward_sum: fitness,
            discounted_return: discounted,
            critic_loss,
            actor_objective,
            slice_qos: mean_qos,
            ue_throughput: mean_throughput,
            env_steps,
            updates,
        });
        observer(stats.last().unwrap());
    }
    Ok(DrlOutcome { agent, stats })
}
