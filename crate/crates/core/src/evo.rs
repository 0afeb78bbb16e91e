//! Population phase: fitness evaluation, elitism, tournament selection,
//! averaging crossover and three-mode Gaussian mutation over actor genomes.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{discounted_return, Environment, Transition};
use crate::nn::{Genome, MlpNet, NetShape};

/// How the second parameter of the mutation noise `N(0, x)` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScale {
    Variance,
    StdDev,
}

impl NoiseScale {
    fn std_dev(self, x: f64) -> f64 {
        match self {
            NoiseScale::Variance => x.sqrt(),
            NoiseScale::StdDev => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvoConfig {
    pub population_size: usize,
    pub elite_fraction: f64,
    /// Probability that a child is mutated at all.
    pub mutation_prob: f64,
    pub super_mutation_prob: f64,
    pub reset_prob: f64,
    /// Mutation strength (xi).
    pub mutation_strength: f64,
    pub noise_scale: NoiseScale,
    /// Genes averaged per crossover.
    pub crossover_batch: usize,
    /// Genes perturbed per mutation.
    pub mutation_batch: usize,
    pub tournament_size: usize,
}

impl Default for EvoConfig {
    fn default() -> Self {
        Self {
            population_size: 10,
            elite_fraction: 0.2,
            mutation_prob: 0.9,
            super_mutation_prob: 0.05,
            reset_prob: 0.1,
            mutation_strength: 0.1,
            noise_scale: NoiseScale::Variance,
            crossover_batch: 128,
            mutation_batch: 256,
            tournament_size: 3,
        }
    }
}

impl EvoConfig {
    /// `ceil(elite_fraction * population_size)`.
    pub fn num_elites(&self) -> usize {
        // the small epsilon keeps 0.2 * 10 from rounding up to 3
        ((self.elite_fraction * self.population_size as f64) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::config("evo.population_size", "must be at least 2"));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::config("evo.elite_fraction", "must lie in (0, 1]"));
        }
        let elites = self.num_elites();
        if elites == 0 || elites >= self.population_size {
            return Err(Error::config("evo.elite_fraction", "must leave at least one non-elite slot"));
        }
        for (key, p) in [
            ("evo.mutation_prob", self.mutation_prob),
            ("evo.super_mutation_prob", self.super_mutation_prob),
            ("evo.reset_prob", self.reset_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(key, "must be a probability in [0, 1]"));
            }
        }
        if self.super_mutation_prob > self.reset_prob {
            return Err(Error::config("evo.super_mutation_prob", "must not exceed reset_prob"));
        }
        if !(self.mutation_strength >= 0.0 && self.mutation_strength.is_finite()) {
            return Err(Error::config("evo.mutation_strength", "must be finite and >= 0"));
        }
        if self.crossover_batch == 0 {
            return Err(Error::config("evo.crossover_batch", "must be at least 1"));
        }
        if self.mutation_batch == 0 {
            return Err(Error::config("evo.mutation_batch", "must be at least 1"));
        }
        if self.tournament_size == 0 {
            return Err(Error::config("evo.tournament_size", "must be at least 1"));
        }
        Ok(())
    }
}

/// One population member.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    /// Undiscounted episode reward, `None` until evaluated.
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(genome: Genome) -> Self {
        Self { genome, fitness: None }
    }
}

/// Everything observed while rolling out one policy for an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Plain reward sum.
    pub fitness: f64,
    pub rewards: Vec<f64>,
    pub trajectory: Vec<Transition>,
    /// Per-slice QoS averaged over the episode (empty if the environment has none).
    pub mean_qos: Vec<f64>,
    /// Per-UE throughput averaged over the episode.
    pub mean_throughput: Vec<f64>,
}

impl Evaluation {
    pub fn discounted(&self, gamma: f64) -> f64 {
        discounted_return(&self.rewards, gamma)
    }
}

/// Rolls out `policy` greedily for `steps` control steps from `env.reset(seed)`.
pub fn rollout<E, F>(env: &mut E, seed: u64, steps: usize, mut policy: F) -> Result<Evaluation>
where
    E: Environment + ?Sized,
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut state = env.reset(seed)?;
    let mut rewards = Vec::with_capacity(steps);
    let mut trajectory = Vec::with_capacity(steps);
    let mut qos_sum: Vec<f64> = Vec::new();
    let mut tput_sum: Vec<f64> = Vec::new();
    for _ in 0..steps {
        let action = policy(&state)?;
        let out = env.step(&action)?;
        accumulate(&mut qos_sum, &out.qos);
        accumulate(&mut tput_sum, &out.throughput);
        rewards.push(out.reward);
        trajectory.push(Transition {
            state: std::mem::replace(&mut state, out.next_state.clone()),
            action,
            next_state: out.next_state,
            reward: out.reward,
        });
    }
    let n = steps.max(1) as f64;
    Ok(Evaluation {
        fitness: rewards.iter().sum(),
        rewards,
        trajectory,
        mean_qos: qos_sum.into_iter().map(|q| q / n).collect(),
        mean_throughput: tput_sum.into_iter().map(|t| t / n).collect(),
    })
}

fn accumulate(acc: &mut Vec<f64>, values: &[f64]) {
    if acc.is_empty() {
        acc.resize(values.len(), 0.0);
    }
    for (a, v) in acc.iter_mut().zip(values) {
        *a += v;
    }
}

/// Evaluates an individual's deterministic policy for one episode and
/// records its fitness.
pub fn evaluate<E: Environment + ?Sized>(
    ind: &mut Individual,
    shape: &NetShape,
    env: &mut E,
    steps: usize,
    seed: u64,
) -> Result<Evaluation> {
    let actor = MlpNet::from_genome(shape.clone(), &ind.genome)?;
    let eval = rollout(env, seed, steps, |s| actor.predict(s))?;
    ind.fitness = Some(eval.fitness);
    Ok(eval)
}

fn fitness_of(pop: &[Individual], i: usize) -> Result<f64> {
    pop[i]
        .fitness
        .ok_or_else(|| Error::Evolution(format!("individual {i} has not been evaluated")))
}

/// Indices of the `num_elites` fittest individuals, best first; ties go to
/// the lower index.
pub fn select_elites(pop: &[Individual], num_elites: usize) -> Result<Vec<usize>> {
    let fitness = (0..pop.len()).map(|i| fitness_of(pop, i)).collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    order.truncate(num_elites);
    Ok(order)
}

/// Index of the least fit individual among `candidates` (ties to lower index).
pub fn weakest(pop: &[Individual], candidates: impl IntoIterator<Item = usize>) -> Result<Option<usize>> {
    let mut best: Option<(usize, f64)> = None;
    for i in candidates {
        let f = fitness_of(pop, i)?;
        match best {
            Some((_, bf)) if f >= bf => {}
            _ => best = Some((i, f)),
        }
    }
    Ok(best.map(|(i, _)| i))
}

fn tournament_winner(pop: &[Individual], contestants: impl Iterator<Item = usize>) -> Result<usize> {
    let mut winner: Option<(usize, f64)> = None;
    for i in contestants {
        let f = fitness_of(pop, i)?;
        match winner {
            Some((wi, wf)) if wf > f || (wf == f && wi < i) => {}
            _ => winner = Some((i, f)),
        }
    }
    winner
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Evolution("tournament over an empty population".into()))
}

/// Two parents, each the fittest of `size` contestants drawn uniformly with
/// replacement.
pub fn tournament<R: Rng + ?Sized>(pop: &[Individual], size: usize, rng: &mut R) -> Result<(usize, usize)> {
    if pop.is_empty() {
        return Err(Error::Evolution("tournament over an empty population".into()));
    }
    let n = pop.len();
    let draw = |rng: &mut R| tournament_winner(pop, (0..size.max(1)).map(|_| rng.random_range(0..n)).collect::<Vec<_>>().into_iter());
    let p1 = draw(rng)?;
    let p2 = draw(rng)?;
    Ok((p1, p2))
}

/// Tournament variant drawing contestants without replacement; a size of at
/// least the population returns the global best.
pub fn tournament_distinct<R: Rng + ?Sized>(pop: &[Individual], size: usize, rng: &mut R) -> Result<(usize, usize)> {
    if pop.is_empty() {
        return Err(Error::Evolution("tournament over an empty population".into()));
    }
    let k = size.clamp(1, pop.len());
    let p1 = tournament_winner(pop, sample(rng, pop.len(), k).into_iter())?;
    let p2 = tournament_winner(pop, sample(rng, pop.len(), k).into_iter())?;
    Ok((p1, p2))
}

/// Child = copy of `p1` with `crossover_batch` random genes replaced by the
/// parents' mean (all genes when the genome is shorter than the batch).
pub fn crossover<R: Rng + ?Sized>(p1: &Genome, p2: &Genome, cfg: &EvoConfig, rng: &mut R) -> Result<Genome> {
    if p1.len() != p2.len() {
        return Err(Error::Dimension {
            context: "crossover parents",
            expected: p1.len(),
            actual: p2.len(),
        });
    }
    let mut child = p1.clone();
    let len = p1.len();
    let mix = |i: usize, child: &mut Genome| child.0[i] = 0.5 * (p1.0[i] + p2.0[i]);
    if cfg.crossover_batch >= len {
        for i in 0..len {
            mix(i, &mut child);
        }
    } else {
        for i in sample(rng, len, cfg.crossover_batch) {
            mix(i, &mut child);
        }
    }
    Ok(child)
}

/// Which branch of the mutation rule touched a gene.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MutationTally {
    pub super_mutated: usize,
    pub reset: usize,
    pub ordinary: usize,
}

impl MutationTally {
    pub fn total(&self) -> usize {
        self.super_mutated + self.reset + self.ordinary
    }
}

/// Mutates in place and reports how many genes took each branch.
///
/// With probability `1 - mutation_prob` nothing happens. Otherwise
/// `mutation_batch` random genes each draw `kappa ~ U[0, 1]`:
/// `kappa <= q_super` adds `N(0, 100 xi)`, `kappa <= q_reset` redraws the
/// gene from `N(0, 1)`, anything else adds `N(0, xi)`.
pub fn mutate_tally<R: Rng + ?Sized>(genome: &mut Genome, cfg: &EvoConfig, rng: &mut R) -> MutationTally {
    let mut tally = MutationTally::default();
    if genome.is_empty() || rng.random::<f64>() >= cfg.mutation_prob {
        return tally;
    }
    let small = cfg.noise_scale.std_dev(cfg.mutation_strength);
    let large = cfg.noise_scale.std_dev(100.0 * cfg.mutation_strength);
    let len = genome.len();
    let indices: Vec<usize> = if cfg.mutation_batch >= len {
        (0..len).collect()
    } else {
        sample(rng, len, cfg.mutation_batch).into_vec()
    };
    for i in indices {
        let kappa: f64 = rng.random();
        let z: f64 = StandardNormal.sample(rng);
        let gene = &mut genome.0[i];
        if kappa <= cfg.super_mutation_prob {
            *gene += large * z;
            tally.super_mutated += 1;
        } else if kappa <= cfg.reset_prob {
            *gene = z;
            tally.reset += 1;
        } else {
            *gene += small * z;
            tally.ordinary += 1;
        }
    }
    tally
}

pub fn mutate<R: Rng + ?Sized>(genome: &Genome, cfg: &EvoConfig, rng: &mut R) -> Genome {
    let mut out = genome.clone();
    mutate_tally(&mut out, cfg, rng);
    out
}

/// Builds the next generation in place of the current one.
///
/// Elites keep their slots (and fitness) untouched; every other slot is
/// refilled by tournament selection, crossover and mutation, and marked
/// unevaluated. Returns the elite indices, best first.
pub fn next_generation<R: Rng + ?Sized>(pop: &mut [Individual], cfg: &EvoConfig, rng: &mut R) -> Result<Vec<usize>> {
    let elites = select_elites(pop, cfg.num_elites().min(pop.len()))?;
    let parents: Vec<Individual> = pop.to_vec();
    for slot in 0..pop.len() {
        if elites.contains(&slot) {
            continue;
        }
        let (a, b) = tournament(&parents, cfg.tournament_size, rng)?;
        let child = crossover(&parents[a].genome, &parents[b].genome, cfg, rng)?;
        pop[slot] = Individual::new(mutate(&child, cfg, rng));
    }
    Ok(elites)
}
