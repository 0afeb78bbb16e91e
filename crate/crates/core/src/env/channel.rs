use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::CellConfig;
use crate::error::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Noise power over one resource block: PSD (dBm/Hz) integrated over `B`.
pub fn noise_power_watts(cfg: &CellConfig) -> f64 {
    dbm_to_watts(cfg.noise_psd_dbm_hz) * cfg.rb_bandwidth_hz
}

/// DFT twiddles mapping a tapped delay line onto the RB grid.
#[derive(Debug, Clone)]
pub struct FrequencyResponse {
    num_rbs: usize,
    num_taps: usize,
    /// `(cos, sin)` of `2*pi*k*l/K`, indexed `k * num_taps + l`.
    twiddles: Vec<(f64, f64)>,
}

impl FrequencyResponse {
    pub fn new(num_rbs: usize, num_taps: usize) -> Self {
        let mut twiddles = Vec::with_capacity(num_rbs * num_taps);
        for k in 0..num_rbs {
            for l in 0..num_taps {
                let phase = 2.0 * std::f64::consts::PI * ((k * l) % num_rbs) as f64 / num_rbs as f64;
                twiddles.push((phase.cos(), phase.sin()));
            }
        }
        Self {
            num_rbs,
            num_taps,
            twiddles,
        }
    }

    /// Draws one user's per-RB power gains `|H_k|^2` into `out`.
    ///
    /// Taps are i.i.d. `CN(0, 1/num_taps)`, so `E[|H_k|^2] = 1` on every RB.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, taps: &mut Vec<(f64, f64)>, out: &mut [f64]) {
        let std = (0.5 / self.num_taps as f64).sqrt();
        taps.clear();
        for _ in 0..self.num_taps {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            taps.push((std * re, std * im));
        }
        for (k, gain) in out.iter_mut().enumerate().take(self.num_rbs) {
            let row = &self.twiddles[k * self.num_taps..(k + 1) * self.num_taps];
            let (mut hr, mut hi) = (0.0, 0.0);
            // H_k = sum_l g_l * exp(-j phase)
            for (&(gr, gi), &(c, s)) in taps.iter().zip(row) {
                hr += gr * c + gi * s;
                hi += gi * c - gr * s;
            }
            *gain = hr * hr + hi * hi;
        }
    }
}

/// Per-RB fading power gains of one user.
pub fn sample_ue_channel<R: Rng + ?Sized>(cfg: &CellConfig, rng: &mut R) -> Vec<f64> {
    let fr = FrequencyResponse::new(cfg.num_rbs, cfg.num_taps);
    let mut out = vec![0.0; cfg.num_rbs];
    fr.sample_into(rng, &mut Vec::new(), &mut out);
    out
}

/// Independent per-RB fading gains for `num_ues` users (rows are users).
pub fn sample_channel<R: Rng + ?Sized>(cfg: &CellConfig, num_ues: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let fr = FrequencyResponse::new(cfg.num_rbs, cfg.num_taps);
    let mut taps = Vec::with_capacity(cfg.num_taps);
    (0..num_ues)
        .map(|_| {
            let mut row = vec![0.0; cfg.num_rbs];
            fr.sample_into(rng, &mut taps, &mut row);
            row
        })
        .collect()
}

/// Achievable rate of one RB: `B * log2(1 + p d^-eta h / (I + sigma^2 B))`.
pub fn per_rb_rate(distance_m: f64, gain: f64, cfg: &CellConfig, interference_w: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::CorruptState(format!(
            "user distance must be positive, got {distance_m}"
        )));
    }
    let signal = dbm_to_watts(cfg.tx_power_dbm) * distance_m.powf(-cfg.pathloss_exp) * gain;
    let sinr = signal / (interference_w + noise_power_watts(cfg));
    Ok(cfg.rb_bandwidth_hz * sinr.ln_1p() / std::f64::consts::LN_2)
}

/// Interference with caller-supplied per-interferer fading gains.
pub fn interference_with_gains(
    ue_position: (f64, f64),
    cfg: &CellConfig,
    gains: &[f64],
) -> f64 {
    cfg.interferers
        .iter()
        .zip(gains)
        .map(|(intf, &g)| {
            let (x, y) = interferer_position(intf.distance_m, intf.angle_deg);
            let d = ((x - ue_position.0).powi(2) + (y - ue_position.1).powi(2))
                .sqrt()
                .max(cfg.min_distance_m);
            dbm_to_watts(intf.tx_power_dbm) * d.powf(-cfg.pathloss_exp) * g
        })
        .sum()
}

/// Downlink interference on one RB: neighbours' received powers, each with an
/// independent unit-mean Rayleigh (exponential power) gain.
pub fn interference_at<R: Rng + ?Sized>(ue_position: (f64, f64), cfg: &CellConfig, rng: &mut R) -> f64 {
    if cfg.interferers.is_empty() {
        return 0.0;
    }
    let gains: Vec<f64> = cfg
        .interferers
        .iter()
        .map(|_| Exp1.sample(rng))
        .collect();
    interference_with_gains(ue_position, cfg, &gains)
}

pub(crate) fn interferer_position(distance_m: f64, angle_deg: f64) -> (f64, f64) {
    let a = angle_deg.to_radians();
    (distance_m * a.cos(), distance_m * a.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Interferer;
    use crate::rng::rng_from_seed;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn single_tap_is_frequency_flat() {
        let cfg = CellConfig {
            num_taps: 1,
            ..CellConfig::default()
        };
        let h = sample_channel(&cfg, 4, &mut rng_from_seed(3));
        for row in h {
            assert!(row.iter().all(|&g| g == row[0]));
        }
    }

    #[test]
    fn fading_has_unit_mean() {
        let cfg = CellConfig::default();
        let mut rng = rng_from_seed(99);
        // 2000 users x 50 RBs = 1e5 samples
        let h = sample_channel(&cfg, 2000, &mut rng);
        let n = (h.len() * cfg.num_rbs) as f64;
        let mean = h.iter().flatten().sum::<f64>() / n;
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
        assert!(h.iter().flatten().all(|&g| g >= 0.0));
    }

    #[test]
    fn channel_sampling_is_seeded() {
        let cfg = CellConfig::default();
        let a = sample_channel(&cfg, 3, &mut rng_from_seed(5));
        let b = sample_channel(&cfg, 3, &mut rng_from_seed(5));
        assert_eq!(a, b);
    }

    #[test]
    fn unit_snr_gives_one_bit_per_hertz() {
        let cfg = CellConfig {
            rb_bandwidth_hz: 200e3,
            ..CellConfig::default()
        };
        // choose h so that p d^-eta h equals the noise power exactly
        let d: f64 = 100.0;
        let h = noise_power_watts(&cfg) / (dbm_to_watts(cfg.tx_power_dbm) * d.powf(-cfg.pathloss_exp));
        let r = per_rb_rate(d, h, &cfg, 0.0).unwrap();
        assert!(rel(r, 200e3) < 1e-12, "{r}");
    }

    #[test]
    fn zero_channel_gives_zero_rate() {
        assert_eq!(per_rb_rate(50.0, 0.0, &CellConfig::default(), 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn table_parameters_match_hand_evaluation() {
        let cfg = CellConfig::default();
        // 56 dBm = 10^2.6 W; -173 dBm/Hz = 10^-20.3 W/Hz
        let p = 10f64.powf(2.6);
        let noise = 10f64.powf(-20.3) * 200e3;
        let expected = 200e3 * (1.0 + p * 100f64.powi(-3) / noise).log2();
        let r = per_rb_rate(100.0, 1.0, &cfg, 0.0).unwrap();
        assert!(rel(r, expected) < 1e-12, "{r} vs {expected}");
    }

    #[test]
    fn nonpositive_distance_is_rejected() {
        let cfg = CellConfig::default();
        assert!(per_rb_rate(0.0, 1.0, &cfg, 0.0).is_err());
        assert!(per_rb_rate(-3.0, 1.0, &cfg, 0.0).is_err());
        assert!(per_rb_rate(f64::NAN, 1.0, &cfg, 0.0).is_err());
    }

    #[test]
    fn no_interferers_means_no_interference() {
        let cfg = CellConfig {
            interferers: vec![],
            ..CellConfig::default()
        };
        assert_eq!(interference_at((10.0, 0.0), &cfg, &mut rng_from_seed(1)), 0.0);
    }

    #[test]
    fn single_interferer_with_unit_gain() {
        let cfg = CellConfig {
            interferers: vec![Interferer {
                distance_m: 1000.0,
                tx_power_dbm: 40.0,
                angle_deg: 0.0,
            }],
            ..CellConfig::default()
        };
        // user at (200, 0): 800 m from the neighbour
        let i = interference_with_gains((200.0, 0.0), &cfg, &[1.0]);
        let expected = 10.0 * 800f64.powf(-3.0);
        assert!(rel(i, expected) < 1e-12);
    }

    #[test]
    fn interference_is_additive_over_neighbours() {
        let a = Interferer {
            distance_m: 1500.0,
            tx_power_dbm: 56.0,
            angle_deg: 0.0,
        };
        let b = Interferer {
            distance_m: 1200.0,
            tx_power_dbm: 50.0,
            angle_deg: 120.0,
        };
        let only = |v: Vec<Interferer>| CellConfig {
            interferers: v,
            ..CellConfig::default()
        };
        let pos = (-120.0, 40.0);
        let both = interference_with_gains(pos, &only(vec![a.clone(), b.clone()]), &[0.7, 1.9]);
        let sum = interference_with_gains(pos, &only(vec![a]), &[0.7])
            + interference_with_gains(pos, &only(vec![b]), &[1.9]);
        assert!(rel(both, sum) < 1e-12);
    }
}
