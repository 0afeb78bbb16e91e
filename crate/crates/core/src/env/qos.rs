use super::{Allocation, QosModel, SliceKind, SliceSpec};

/// Per-UE throughput: sum of the per-RB rates over the RBs assigned to the
/// UE inside its slice. `rates` is row-major `N x K`.
pub fn ue_throughputs(alloc: &Allocation, ue_slice: &[usize], rates: &[f64]) -> Vec<f64> {
    let k_total = alloc.num_rbs();
    (0..alloc.num_ues())
        .map(|n| {
            let l = ue_slice[n];
            (0..k_total)
                .filter(|&k| alloc.e(n, k) && alloc.b(l, k))
                .map(|k| rates[n * k_total + k])
                .sum()
        })
        .collect()
}

/// Slice QoS from its users' throughputs (and URLLC head-of-line packet sizes).
///
/// eMBB: mean throughput. MTC: users at or above the minimum rate. URLLC: the
/// largest `packet / throughput` delay, with starved users at the delay cap.
pub fn slice_qos(slice: &SliceSpec, throughputs: &[f64], hol_packet_bits: &[f64], model: &QosModel) -> f64 {
    if throughputs.is_empty() {
        return 0.0;
    }
    match slice.kind {
        SliceKind::Embb => throughputs.iter().sum::<f64>() / throughputs.len() as f64,
        SliceKind::Mtc => throughputs
            .iter()
            .filter(|&&t| t >= model.mtc_min_rate_bps)
            .count() as f64,
        SliceKind::Urllc => throughputs
            .iter()
            .zip(hol_packet_bits)
            .map(|(&t, &bits)| {
                if t > 0.0 {
                    (bits / t).min(model.urllc_delay_cap_s)
                } else {
                    model.urllc_delay_cap_s
                }
            })
            .fold(0.0, f64::max),
    }
}

/// SLA violation event `|Q - lambda| >= epsilon`.
pub fn violates_sla(slice: &SliceSpec, qos: f64) -> bool {
    (qos - slice.qos_threshold).abs() >= slice.qos_margin
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embb_is_mean_rate() {
        let q = slice_qos(&SliceSpec::embb(5), &[1e6; 5], &[0.0; 5], &QosModel::default());
        assert_eq!(q, 1e6);
    }

    #[test]
    fn mtc_counts_served_devices() {
        let model = QosModel::default();
        assert_eq!(slice_qos(&SliceSpec::mtc(20), &[0.0; 20], &[0.0; 20], &model), 0.0);
        let mut t = vec![0.0; 20];
        t[..17].fill(10e3);
        t[17] = 9_999.0;
        assert_eq!(slice_qos(&SliceSpec::mtc(20), &t, &[0.0; 20], &model), 17.0);
    }

    #[test]
    fn urllc_is_worst_delay() {
        let model = QosModel::default();
        let q = slice_qos(&SliceSpec::urllc(1), &[1e6], &[1e4], &model);
        assert!((q - 0.01).abs() < 1e-15);
        let starved = slice_qos(&SliceSpec::urllc(2), &[1e6, 0.0], &[1e4, 1e4], &model);
        assert_eq!(starved, model.urllc_delay_cap_s);
    }

    #[test]
    fn violation_uses_closed_margin() {
        let s = SliceSpec::mtc(20);
        assert!(!violates_sla(&s, 18.0));
        assert!(!violates_sla(&s, 19.0));
        assert!(violates_sla(&s, 20.0));
        assert!(violates_sla(&s, 16.0));
    }
}
