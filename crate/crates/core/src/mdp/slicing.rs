use super::{decode_action, encode_state, reward, ActionVec, Environment, StepOutcome};
use crate::env::{EnvConfig, EnvState, QosReport, SliceEnv};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SimRng};

/// The slicing simulator wrapped as an episodic [`Environment`].
#[derive(Debug, Clone)]
pub struct SlicingMdp {
    env: SliceEnv,
    state: Option<EnvState>,
    rng: SimRng,
    prev_action: ActionVec,
    last_report: Option<QosReport>,
}

impl SlicingMdp {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        let env = SliceEnv::new(cfg)?;
        let dim = env.num_slices() + env.num_ues();
        Ok(Self {
            env,
            state: None,
            rng: rng_from_seed(0),
            prev_action: ActionVec::uniform(dim),
            last_report: None,
        })
    }

    pub fn sim(&self) -> &SliceEnv {
        &self.env
    }

    pub fn env_state(&self) -> Option<&EnvState> {
        self.state.as_ref()
    }

    pub fn last_report(&self) -> Option<&QosReport> {
        self.last_report.as_ref()
    }

    fn config(&self) -> &EnvConfig {
        self.env.config()
    }

    /// State before any decision: QoS read as zero and the uniform action.
    fn initial_state(&self) -> Result<Vec<f64>> {
        let l = self.env.num_slices();
        let zero = QosReport {
            qos: vec![0.0; l],
            throughput: vec![0.0; self.env.num_ues()],
            violations: vec![0; l],
            violation_prob: vec![0.0; l],
            ttis: 0,
        };
        Ok(encode_state(&zero, &self.config().slices, &self.prev_action)?.0)
    }
}

impl Environment for SlicingMdp {
    fn state_dim(&self) -> usize {
        super::state_dim(self.config())
    }

    fn action_dim(&self) -> usize {
        super::action_dim(self.config())
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.rng = rng_from_seed(seed);
        self.state = Some(self.env.reset(&mut self.rng)?);
        self.prev_action = ActionVec::uniform(self.action_dim());
        self.last_report = None;
        self.initial_state()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| Error::Contract("step called before reset".into()))?;
        let action = ActionVec(action.to_vec());
        let alloc = decode_action(&action, self.env.config())?;
        let report = self.env.step(state, &alloc, &mut self.rng)?;
        let next = encode_state(&report, &self.env.config().slices, &action)?;
        let r = reward(&report);
        self.prev_action = action;
        let outcome = StepOutcome {
            next_state: next.0,
            reward: r,
            qos: report.qos.clone(),
            throughput: report.throughput.clone(),
        };
        self.last_report = Some(report);
        Ok(outcome)
    }
}
