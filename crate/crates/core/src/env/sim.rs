use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::channel::{interference_at, per_rb_rate, FrequencyResponse};
use super::{slice_qos, ue_throughputs, violates_sla, Allocation, EnvConfig, SliceKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct UeState {
    pub ue_id: usize,
    pub slice_id: usize,
    /// Position relative to the serving radio unit.
    pub position: (f64, f64),
    pub distance_m: f64,
    /// Per-RB fading power gains of the most recent TTI.
    pub fading: Vec<f64>,
    /// Head-of-line packet size (URLLC users only, zero otherwise).
    pub hol_packet_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub ues: Vec<UeState>,
    /// Interference (W) seen on each allocated (UE, RB) pair in the most
    /// recent TTI, row-major `N x K`; zero where nothing was allocated.
    pub last_interference: Vec<f64>,
    pub ttis_elapsed: u64,
}

/// Outcome of one control step, averaged over its TTIs.
#[derive(Debug, Clone, PartialEq)]
pub struct QosReport {
    /// Mean per-TTI QoS of each slice, in the slice kind's unit.
    pub qos: Vec<f64>,
    /// Mean per-TTI throughput of each UE (bit/s).
    pub throughput: Vec<f64>,
    /// TTIs in which each slice violated its SLA.
    pub violations: Vec<usize>,
    /// Empirical SLA-violation probability per slice.
    pub violation_prob: Vec<f64>,
    pub ttis: usize,
}

/// The slicing simulator. Holds only immutable configuration; all evolving
/// state lives in [`EnvState`] and the caller's RNG.
#[derive(Debug, Clone)]
pub struct SliceEnv {
    cfg: EnvConfig,
    ue_slice: Vec<usize>,
    response: FrequencyResponse,
}

impl SliceEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.num_ues() == 0 {
            return Err(Error::config("slices", "total number of UEs must be positive"));
        }
        let ue_slice = cfg.ue_slices();
        let response = FrequencyResponse::new(cfg.cell.num_rbs, cfg.cell.num_taps);
        Ok(Self {
            cfg,
            ue_slice,
            response,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn ue_slices(&self) -> &[usize] {
        &self.ue_slice
    }

    pub fn num_slices(&self) -> usize {
        self.cfg.slices.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_slice.len()
    }

    pub fn num_rbs(&self) -> usize {
        self.cfg.cell.num_rbs
    }

    /// Places users uniformly in the cell disk, draws fresh fading, and
    /// initialises URLLC head-of-line packets.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<EnvState> {
        let cell = &self.cfg.cell;
        let k = cell.num_rbs;
        let mut taps = Vec::with_capacity(cell.num_taps);
        let mut ues = Vec::with_capacity(self.num_ues());
        for (n, &l) in self.ue_slice.iter().enumerate() {
            let r = (cell.cell_radius_m * rng.random::<f64>().sqrt()).max(cell.min_distance_m);
            let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            ues.push(UeState {
                ue_id: n,
                slice_id: l,
                position: (r * theta.cos(), r * theta.sin()),
                distance_m: r,
                fading: vec![0.0; k],
                hol_packet_bits: 0.0,
            });
        }
        for ue in &mut ues {
            self.response.sample_into(rng, &mut taps, &mut ue.fading);
        }
        self.draw_packets(&mut ues, rng)?;
        Ok(EnvState {
            last_interference: vec![0.0; ues.len() * k],
            ues,
            ttis_elapsed: 0,
        })
    }

    fn draw_packets<R: Rng + ?Sized>(&self, ues: &mut [UeState], rng: &mut R) -> Result<()> {
        for ue in ues {
            let slice = &self.cfg.slices[ue.slice_id];
            if slice.kind == SliceKind::Urllc {
                let exp = Exp::new(1.0 / slice.urllc_mean_packet_bits)
                    .map_err(|e| Error::config("slices.urllc_mean_packet_bits", e.to_string()))?;
                ue.hol_packet_bits = exp.sample(rng);
            }
        }
        Ok(())
    }

    /// Simulates one control step of `ttis_per_step` TTIs under `alloc`.
    /// Infeasible allocations are rejected, never repaired.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &mut EnvState,
        alloc: &Allocation,
        rng: &mut R,
    ) -> Result<QosReport> {
        let n_ues = self.num_ues();
        let k_total = self.num_rbs();
        if alloc.num_slices() != self.num_slices() || alloc.num_ues() != n_ues || alloc.num_rbs() != k_total {
            return Err(Error::Contract(format!(
                "allocation shape {}x{}x{} does not match simulator {}x{}x{}",
                alloc.num_slices(),
                alloc.num_ues(),
                alloc.num_rbs(),
                self.num_slices(),
                n_ues,
                k_total
            )));
        }
        if state.ues.len() != n_ues {
            return Err(Error::CorruptState(format!(
                "state holds {} UEs, simulator expects {n_ues}",
                state.ues.len()
            )));
        }
        alloc.validate(&self.ue_slice)?;

        let cell = &self.cfg.cell;
        let ttis = self.cfg.ttis_per_step;
        let num_slices = self.num_slices();
        let assigned: Vec<Vec<usize>> = (0..n_ues).map(|n| alloc.ue_rbs(n).collect()).collect();
        let slice_members: Vec<Vec<usize>> = (0..num_slices)
            .map(|l| (0..n_ues).filter(|&n| self.ue_slice[n] == l).collect())
            .collect();

        let mut taps = Vec::with_capacity(cell.num_taps);
        let mut rates = vec![0.0; n_ues * k_total];
        let mut qos_sum = vec![0.0; num_slices];
        let mut tput_sum = vec![0.0; n_ues];
        let mut violations = vec![0usize; num_slices];
        let mut member_tput = Vec::new();
        let mut member_bits = Vec::new();

        for _ in 0..ttis {
            for ue in &mut state.ues {
                self.response.sample_into(rng, &mut taps, &mut ue.fading);
            }
            self.draw_packets(&mut state.ues, rng)?;
            rates.fill(0.0);
            state.last_interference.fill(0.0);
            for (n, rbs) in assigned.iter().enumerate() {
                let ue = &state.ues[n];
                for &k in rbs {
                    let i_nk = interference_at(ue.position, cell, rng);
                    state.last_interference[n * k_total + k] = i_nk;
                    rates[n * k_total + k] = per_rb_rate(ue.distance_m, ue.fading[k], cell, i_nk)?;
                }
            }
            let tput = ue_throughputs(alloc, &self.ue_slice, &rates);
            for (acc, t) in tput_sum.iter_mut().zip(&tput) {
                *acc += t;
            }
            for (l, members) in slice_members.iter().enumerate() {
                member_tput.clear();
                member_bits.clear();
                member_tput.extend(members.iter().map(|&n| tput[n]));
                member_bits.extend(members.iter().map(|&n| state.ues[n].hol_packet_bits));
                let spec = &self.cfg.slices[l];
                let q = slice_qos(spec, &member_tput, &member_bits, &self.cfg.qos);
                qos_sum[l] += q;
                if violates_sla(spec, q) {
                    violations[l] += 1;
                }
            }
            state.ttis_elapsed += 1;
        }

        let w = ttis as f64;
        Ok(QosReport {
            qos: qos_sum.into_iter().map(|q| q / w).collect(),
            throughput: tput_sum.into_iter().map(|t| t / w).collect(),
            violation_prob: violations.iter().map(|&v| v as f64 / w).collect(),
            violations,
            ttis,
        })
    }
}
