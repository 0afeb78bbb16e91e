use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interferer {
    /// Distance of the neighbouring radio unit from the serving cell centre.
    pub distance_m: f64,
    pub tx_power_dbm: f64,
    /// Bearing of the neighbour as seen from the serving cell centre.
    #[serde(default)]
    pub angle_deg: f64,
}

/// Radio parameters of the serving cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellConfig {
    pub num_rbs: usize,
    pub rb_bandwidth_hz: f64,
    /// Recorded for completeness; rates are computed per resource block.
    pub subcarrier_spacing_hz: f64,
    /// Transmit power per resource block.
    pub tx_power_dbm: f64,
    /// Thermal noise power spectral density, integrated over each RB.
    pub noise_psd_dbm_hz: f64,
    pub pathloss_exp: f64,
    pub num_taps: usize,
    pub interferers: Vec<Interferer>,
    pub cell_radius_m: f64,
    /// Distance floor for user placement and path loss.
    pub min_distance_m: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        let cell_radius_m = 500.0;
        Self {
            num_rbs: 50,
            rb_bandwidth_hz: 200e3,
            subcarrier_spacing_hz: 15e3,
            tx_power_dbm: 56.0,
            noise_psd_dbm_hz: -173.0,
            pathloss_exp: 3.0,
            num_taps: 10,
            interferers: vec![
                Interferer {
                    distance_m: 3.0 * cell_radius_m,
                    tx_power_dbm: 56.0,
                    angle_deg: 0.0,
                },
                Interferer {
                    distance_m: 3.0 * cell_radius_m,
                    tx_power_dbm: 56.0,
                    angle_deg: 180.0,
                },
            ],
            cell_radius_m,
            min_distance_m: 1.0,
        }
    }
}

impl CellConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_rbs == 0 {
            return Err(Error::config("cell.num_rbs", "must be at least 1"));
        }
        positive("cell.rb_bandwidth_hz", self.rb_bandwidth_hz)?;
        positive("cell.subcarrier_spacing_hz", self.subcarrier_spacing_hz)?;
        finite("cell.tx_power_dbm", self.tx_power_dbm)?;
        finite("cell.noise_psd_dbm_hz", self.noise_psd_dbm_hz)?;
        positive("cell.pathloss_exp", self.pathloss_exp)?;
        if self.num_taps == 0 {
            return Err(Error::config("cell.num_taps", "must be at least 1"));
        }
        positive("cell.cell_radius_m", self.cell_radius_m)?;
        positive("cell.min_distance_m", self.min_distance_m)?;
        if self.min_distance_m > self.cell_radius_m {
            return Err(Error::config(
                "cell.min_distance_m",
                "must not exceed cell_radius_m",
            ));
        }
        for (i, intf) in self.interferers.iter().enumerate() {
            positive(&format!("cell.interferers[{i}].distance_m"), intf.distance_m)?;
            finite(&format!("cell.interferers[{i}].tx_power_dbm"), intf.tx_power_dbm)?;
            finite(&format!("cell.interferers[{i}].angle_deg"), intf.angle_deg)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceKind {
    /// QoS: mean per-UE throughput (bit/s).
    Embb,
    /// QoS: number of devices served at or above the minimum rate.
    Mtc,
    /// QoS: worst head-of-line packet delay (s).
    Urllc,
}

impl SliceKind {
    pub fn unit(self) -> &'static str {
        match self {
            SliceKind::Embb => "bit/s",
            SliceKind::Mtc => "devices",
            SliceKind::Urllc => "s",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SliceKind::Embb => "embb",
            SliceKind::Mtc => "mtc",
            SliceKind::Urllc => "urllc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub kind: SliceKind,
    pub num_ues: usize,
    /// Target QoS level, in the kind's unit.
    pub qos_threshold: f64,
    /// Tolerated deviation from the target, in the kind's unit.
    pub qos_margin: f64,
    #[serde(default = "default_packet_bits")]
    pub urllc_mean_packet_bits: f64,
}

fn default_packet_bits() -> f64 {
    10e3
}

impl SliceSpec {
    pub fn embb(num_ues: usize) -> Self {
        Self {
            kind: SliceKind::Embb,
            num_ues,
            qos_threshold: 2e6,
            qos_margin: 0.5e6,
            urllc_mean_packet_bits: default_packet_bits(),
        }
    }

    pub fn mtc(num_ues: usize) -> Self {
        Self {
            kind: SliceKind::Mtc,
            num_ues,
            qos_threshold: 18.0,
            qos_margin: 2.0,
            urllc_mean_packet_bits: default_packet_bits(),
        }
    }

    pub fn urllc(num_ues: usize) -> Self {
        Self {
            kind: SliceKind::Urllc,
            num_ues,
            qos_threshold: 10e-3,
            qos_margin: 5e-3,
            urllc_mean_packet_bits: default_packet_bits(),
        }
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        if self.num_ues == 0 {
            return Err(Error::config(
                format!("slices[{index}].num_ues"),
                "must be at least 1",
            ));
        }
        positive(&format!("slices[{index}].qos_threshold"), self.qos_threshold)?;
        positive(&format!("slices[{index}].qos_margin"), self.qos_margin)?;
        positive(
            &format!("slices[{index}].urllc_mean_packet_bits"),
            self.urllc_mean_packet_bits,
        )?;
        Ok(())
    }
}

/// Parameters that turn raw throughputs into per-kind QoS values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QosModel {
    /// Minimum rate for an MTC device to count as served.
    pub mtc_min_rate_bps: f64,
    /// Delay reported for a URLLC user that receives no throughput.
    pub urllc_delay_cap_s: f64,
}

impl Default for QosModel {
    fn default() -> Self {
        Self {
            mtc_min_rate_bps: 10e3,
            urllc_delay_cap_s: 1.0,
        }
    }
}

impl QosModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.mtc_min_rate_bps >= 0.0 && self.mtc_min_rate_bps.is_finite()) {
            return Err(Error::config(
                "qos.mtc_min_rate_bps",
                "must be finite and non-negative",
            ));
        }
        positive("qos.urllc_delay_cap_s", self.urllc_delay_cap_s)
    }
}

/// Everything the simulator needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub cell: CellConfig,
    pub slices: Vec<SliceSpec>,
    pub qos: QosModel,
    /// TTIs simulated per control step.
    pub ttis_per_step: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            cell: CellConfig::default(),
            slices: vec![SliceSpec::embb(5), SliceSpec::mtc(20), SliceSpec::urllc(5)],
            qos: QosModel::default(),
            ttis_per_step: 10,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.cell.validate()?;
        if self.slices.is_empty() {
            return Err(Error::config("slices", "at least one slice is required"));
        }
        for (i, s) in self.slices.iter().enumerate() {
            s.validate(i)?;
        }
        self.qos.validate()?;
        if self.ttis_per_step == 0 {
            return Err(Error::config("ttis_per_step", "must be at least 1"));
        }
        Ok(())
    }

    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn num_ues(&self) -> usize {
        self.slices.iter().map(|s| s.num_ues).sum()
    }

    /// Slice index of every UE; UEs are numbered slice by slice.
    pub fn ue_slices(&self) -> Vec<usize> {
        self.slices
            .iter()
            .enumerate()
            .flat_map(|(l, s)| std::iter::repeat_n(l, s.num_ues))
            .collect()
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite and > 0, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite, got {v}")))
    }
}
