use std::io::Cursor;
use std::path::{Path, PathBuf};

use super::config::{save_config, Mode, RunConfig};
use super::metrics::{export_cdf, write_cdf_csv, MetricsLog};
use crate::ddpg::DdpgAgent;
use crate::env::EnvConfig;
use crate::error::{check_dim, Error, Result};
use crate::evo::rollout;
use crate::mdp::{Environment, SlicingMdp};
use crate::nn::checkpoint::{net_from_bytes, write_net};
use crate::nn::MlpNet;
use crate::orchestrator::{run_drl_baseline_with, run_edrl_with, EpisodeStats, GenerationStats};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_id: String,
    pub mode: Mode,
    pub output_dir: PathBuf,
    /// Generations, episodes or evaluation episodes completed.
    pub records: usize,
    pub final_discounted_return: f64,
    pub metrics_path: PathBuf,
}

pub fn run_id(cfg: &RunConfig) -> String {
    format!("{}-s{}", cfg.mode, cfg.seed())
}

/// Per-slice and per-UE samples gathered for the CDF exports.
struct Samples {
    slice_qos: Vec<Vec<f64>>,
    slice_tput: Vec<Vec<f64>>,
}

struct Recorder<'a> {
    log: MetricsLog,
    env: &'a EnvConfig,
    ue_slice: Vec<usize>,
    samples: Samples,
    error: Option<Error>,
}

impl<'a> Recorder<'a> {
    fn new(run_id: String, env: &'a EnvConfig) -> Self {
        let l = env.num_slices();
        Self {
            log: MetricsLog::new(run_id),
            env,
            ue_slice: env.ue_slices(),
            samples: Samples {
                slice_qos: vec![Vec::new(); l],
                slice_tput: vec![Vec::new(); l],
            },
            error: None,
        }
    }

    fn push(&mut self, index: u64, metric: &str, value: f64, unit: &str) {
        if self.error.is_none() {
            if let Err(e) = self.log.push(index, metric, value, unit) {
                self.error = Some(e);
            }
        }
    }

    fn qos_and_throughput(&mut self, index: u64, qos: &[f64], throughput: &[f64]) {
        for (l, (&q, spec)) in qos.iter().zip(&self.env.slices).enumerate() {
            self.push(index, &format!("qos_{l}_{}", spec.kind.name()), q, spec.kind.unit());
            self.samples.slice_qos[l].push(q);
        }
        for (n, &t) in throughput.iter().enumerate() {
            self.push(index, &format!("throughput_ue{n}"), t, "bit/s");
            if let Some(&l) = self.ue_slice.get(n) {
                self.samples.slice_tput[l].push(t);
            }
        }
    }

    fn generation(&mut self, s: &GenerationStats) {
        let g = s.generation as u64;
        self.push(g, "best_fitness", s.best_fitness, "reward");
        self.push(g, "mean_fitness", s.mean_fitness, "reward");
        self.push(g, "rl_fitness", s.rl_fitness, "reward");
        self.push(g, "discounted_return", s.discounted_return, "reward");
        self.push(g, "rl_discounted_return", s.rl_discounted_return, "reward");
        if let Some(v) = s.critic_loss {
            self.push(g, "critic_loss", v, "reward^2");
        }
        if let Some(v) = s.actor_objective {
            self.push(g, "actor_objective", v, "reward");
        }
        self.push(g, "env_steps", s.env_steps as f64, "steps");
        self.push(g, "updates", s.updates as f64, "updates");
        for (i, &f) in s.fitness.iter().enumerate() {
            self.push(g, &format!("fitness_{i}"), f, "reward");
        }
        if let Some(slot) = s.rl_to_ea {
            self.push(g, "rl_to_ea_slot", slot as f64, "index");
        }
        self.push(g, "ea_to_rl", if s.ea_to_rl { 1.0 } else { 0.0 }, "flag");
        self.qos_and_throughput(g, &s.slice_qos, &s.ue_throughput);
    }

    fn episode(&mut self, s: &EpisodeStats) {
        let e = s.episode as u64;
        self.push(e, "reward_sum", s.reward_sum, "reward");
        self.push(e, "discounted_return", s.discounted_return, "reward");
        if let Some(v) = s.critic_loss {
            self.push(e, "critic_loss", v, "reward^2");
        }
        if let Some(v) = s.actor_objective {
            self.push(e, "actor_objective", v, "reward");
        }
        self.push(e, "env_steps", s.env_steps as f64, "steps");
        self.push(e, "updates", s.updates as f64, "updates");
        self.qos_and_throughput(e, &s.slice_qos, &s.ue_throughput);
    }

    fn finish(self, dir: &Path, cdf_points: usize) -> Result<MetricsLog> {
        if let Some(e) = self.error {
            return Err(e);
        }
        for (l, spec) in self.env.slices.iter().enumerate() {
            let name = format!("{l}_{}", spec.kind.name());
            if !self.samples.slice_qos[l].is_empty() {
                write_cdf_csv(&dir.join(format!("cdf_qos_{name}.csv")), &export_cdf(&self.samples.slice_qos[l], cdf_points)?)?;
            }
            if !self.samples.slice_tput[l].is_empty() {
                write_cdf_csv(
                    &dir.join(format!("cdf_throughput_{name}.csv")),
                    &export_cdf(&self.samples.slice_tput[l], cdf_points)?,
                )?;
            }
        }
        Ok(self.log)
    }
}

/// Loads the actor from either an agent checkpoint or a bare network file.
pub fn load_policy(path: &Path, cfg: &RunConfig) -> Result<MlpNet> {
    let bytes = std::fs::read(path)?;
    match bytes.get(..4) {
        Some(b"EDAG") => Ok(DdpgAgent::read_checkpoint(&mut Cursor::new(&bytes), cfg.ddpg.clone())?.actor),
        Some(b"EDNN") => net_from_bytes(&bytes),
        _ => Err(Error::Checkpoint(format!("{} is neither an agent nor a network checkpoint", path.display()))),
    }
}

fn save_agent(agent: &DdpgAgent, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    agent.write_checkpoint(&mut w)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

fn save_net(net: &MlpNet, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_net(&mut w, net)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    run_with_progress(cfg, &mut |_| {})
}

/// Executes the configured mode and writes `config.json`, `metrics.csv`,
/// CDF exports and checkpoints into the output directory. `progress`
/// receives one human-readable line per generation or episode.
pub fn run_with_progress(cfg: &RunConfig, progress: &mut dyn FnMut(&str)) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    save_config(cfg, &dir.join("config.json"))?;
    let id = run_id(cfg);
    let mut rec = Recorder::new(id.clone(), &cfg.env);
    let make_env = || SlicingMdp::new(cfg.env.clone());

    let (records, final_return) = match cfg.mode {
        Mode::Edrl => {
            let out = run_edrl_with(&cfg.edrl, &cfg.evo, &cfg.ddpg, make_env, &mut |s| {
                rec.generation(s);
                progress(&format!(
                    "generation {:>4}  best {:>8.3}  mean {:>8.3}  rl {:>8.3}  return {:>8.3}",
                    s.generation, s.best_fitness, s.mean_fitness, s.rl_fitness, s.discounted_return
                ));
            })?;
            save_agent(&out.agent, &dir.join("agent.ckpt"))?;
            if let Some(last) = out.stats.last() {
                let champion = (0..last.fitness.len()).fold(0, |b, i| if last.fitness[i] > last.fitness[b] { i } else { b });
                let net = MlpNet::from_genome(out.agent.actor.shape().clone(), &out.population[champion].genome)?;
                save_net(&net, &dir.join("champion.net"))?;
            }
            (out.stats.len(), out.stats.last().map_or(f64::NAN, |s| s.discounted_return))
        }
        Mode::Drl => {
            let out = run_drl_baseline_with(&cfg.edrl, &cfg.evo, &cfg.ddpg, make_env, &mut |s| {
                rec.episode(s);
                progress(&format!(
                    "episode {:>6}  reward {:>8.3}  return {:>8.3}",
                    s.episode, s.reward_sum, s.discounted_return
                ));
            })?;
            save_agent(&out.agent, &dir.join("agent.ckpt"))?;
            (out.stats.len(), out.stats.last().map_or(f64::NAN, |s| s.discounted_return))
        }
        Mode::EvalOnly => {
            let path = cfg.checkpoint.as_ref().expect("validated");
            let policy = load_policy(path, cfg)?;
            let mut env = make_env()?;
            check_dim("policy input", env.state_dim(), policy.shape().input_dim())?;
            check_dim("policy output", env.action_dim(), policy.shape().output_dim())?;
            let mut last = f64::NAN;
            for e in 1..=cfg.eval_episodes {
                let seed = derive_seed(cfg.seed(), stream::EVAL_ONLY, e as u64);
                let ev = rollout(&mut env, seed, cfg.edrl.episode_length, |s| policy.predict(s))?;
                last = ev.discounted(cfg.ddpg.gamma);
                let idx = e as u64;
                rec.push(idx, "reward_sum", ev.fitness, "reward");
                rec.push(idx, "discounted_return", last, "reward");
                rec.qos_and_throughput(idx, &ev.mean_qos, &ev.mean_throughput);
                progress(&format!("eval episode {e:>4}  reward {:>8.3}  return {last:>8.3}", ev.fitness));
            }
            (cfg.eval_episodes, last)
        }
    };

    let log = rec.finish(&dir, cfg.cdf_points)?;
    let metrics_path = dir.join("metrics.csv");
    log.save(&metrics_path)?;
    Ok(RunSummary {
        run_id: id,
        mode: cfg.mode,
        output_dir: dir,
        records,
        final_discounted_return: final_return,
        metrics_path,
    })
}
