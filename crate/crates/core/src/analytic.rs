//! Closed-form link budget.
//!
//! The budget is evaluated per clock slot. Photon arrivals at each detector
//! are Poisson, so the probability that detector `d` stays silent in slot
//! `k` factorises over the pulses that can land there: the slot's own pulse
//! (kept with probability `q0 = 1 - f_out`), its neighbours shifted by `j`
//! slots (probability `q_j`), and dark counts. A neighbour's state is
//! uniform over Alice's two states, whatever Eve did to it.
//!
//! Dead time enters through the non-paralyzable live fraction
//! `1 / (1 + R tau)`, with `R` the detector's click rate. Slots where both
//! detectors fire are dropped; the rest are sifted.
//!
//! The aggregate count rate that drives the rate-dependent jitter is the
//! expected number of detector events (both detectors, dark counts
//! included, before dead time) per second. It does not depend on the jitter
//! width, so the rate -> fwhm -> rate fixed point closes after one pass.

use std::f64::consts::SQRT_2;

use thiserror::Error;

use crate::detector::{combined_fwhm, misassignment_probability, sigma_from_fwhm};
use crate::engine::{DetectorProfile, SimConfig};
use crate::optics::slot_period_ps;
use crate::protocol::{intercept_resend_qber_plateau, EncodingScheme};

/// Shift probabilities below this are dropped from the neighbour product.
const SHIFT_CUTOFF: f64 = 1e-18;
const MAX_SHIFT: i64 = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error("grid values must be positive and strictly ascending")]
    BadGrid,
}

/// `-p log2 p - (1-p) log2 (1-p)`, zero at both ends.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// QBER at which `1 - (1 + f_ec) h(e)` reaches zero, for `f_ec >= 0`.
///
/// Safeguarded Newton on `(0, 1/2)`.
pub fn net_rate_qber_threshold(ec_efficiency: f64) -> f64 {
    let target = 1.0 / (1.0 + ec_efficiency);
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    let mut e = 0.1;
    for _ in 0..200 {
        let g = binary_entropy(e) - target;
        if g > 0.0 {
            hi = e;
        } else {
            lo = e;
        }
        let slope = ((1.0 - e) / e).log2();
        let mut next = e - g / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - e).abs() < 1e-15 {
            return next;
        }
        e = next;
    }
    e
}

/// Expected per-slot probabilities and the rates derived from them.
///
/// `qber_timing + qber_dark + qber_optical + qber_eve == qber_total`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub clock_ghz: f64,
    pub slot_period_ps: f64,
    /// Mean photons per pulse reaching a detector, efficiency included.
    pub photons_at_detectors: f64,
    pub count_rate_cps: f64,
    pub detector_fwhm_ps: f64,
    pub total_fwhm_ps: f64,
    pub p_timing_error: f64,
    /// Live fraction of a detector under dead time.
    pub dead_time_survival: f64,
    pub p_signal_conclusive: f64,
    pub p_dark_conclusive: f64,
    /// At least one recorded click.
    pub p_conclusive: f64,
    pub p_double_click: f64,
    /// Exactly one detector clicked.
    pub p_sifted: f64,
    pub qber_total: f64,
    pub qber_timing: f64,
    pub qber_dark: f64,
    pub qber_optical: f64,
    pub qber_eve: f64,
    pub photons_launched_per_slot: f64,
    /// Detector events from signal photons per slot, before dead time.
    pub photons_detected_per_slot: f64,
    pub r_sift_cps: f64,
    pub r_net_cps: f64,
}

/// `1 - (1 + f_ec) h(q)` floored at zero.
pub fn net_fraction(qber: f64, ec_efficiency: f64) -> f64 {
    (1.0 - (1.0 + ec_efficiency) * binary_entropy(qber)).max(0.0)
}

/// Probability that a Gaussian timestamp error lands `j` slots away.
fn shift_probabilities(total_fwhm_ps: f64, period_ps: f64) -> Vec<f64> {
    let sigma = sigma_from_fwhm(total_fwhm_ps);
    if sigma <= 0.0 {
        return Vec::new();
    }
    let tail = |x: f64| 0.5 * libm::erfc(x / (SQRT_2 * sigma));
    let mut q = Vec::new();
    for j in 1..=MAX_SHIFT {
        let p = tail((j as f64 - 0.5) * period_ps) - tail((j as f64 + 0.5) * period_ps);
        if p < SHIFT_CUTOFF {
            break;
        }
        q.push(p);
    }
    q
}

pub fn expected_link_budget(config: &SimConfig) -> LinkBudget {
    let scheme = EncodingScheme::default();
    let period = slot_period_ps(config.clock_ghz);
    let transmittance = config.channel().expect("valid config").transmittance();
    let lambda = config.mu * transmittance * config.efficiency;
    let delta = config.dark_count_rate_cps * period * 1e-12;
    let er = config.extinction_ratio_db;

    // g[d][r]: one photon in state r clicks detector d
    let mut g = [[0.0; 2]; 2];
    for (d, row) in g.iter_mut().enumerate() {
        for (r, cell) in row.iter_mut().enumerate() {
            *cell = scheme.click_probability(scheme.state(r == 1), d == 1, er);
        }
    }
    let eve_wrong = config.eve_fraction * intercept_resend_qber_plateau(&scheme);

    let mean_sum = 0.5 * (g[0][0] + g[1][0] + g[0][1] + g[1][1]);
    let events_per_slot = lambda * mean_sum + 2.0 * delta;
    let count_rate_cps = events_per_slot / (period * 1e-12);
    let detector_fwhm_ps = config.jitter_profile(config.detector_profile).effective_fwhm(count_rate_cps);
    let total_fwhm_ps = combined_fwhm(detector_fwhm_ps, config.sync_fwhm_ps);
    let f_out = misassignment_probability(total_fwhm_ps, config.clock_ghz);
    let q0 = 1.0 - f_out;
    let shifts = shift_probabilities(total_fwhm_ps, period);

    // silence factor from neighbours, both sides
    let neighbour = |d: usize| -> f64 {
        shifts
            .iter()
            .map(|&q| 0.5 * ((-lambda * g[d][0] * q).exp() + (-lambda * g[d][1] * q).exp()))
            .product::<f64>()
            .powi(2)
    };
    let n_silent = [neighbour(0), neighbour(1)];

    // (alice bit, bit of the state that reached Bob, weight)
    let classes: Vec<(usize, usize, f64)> = (0..2)
        .flat_map(|a| [(a, a, 0.5 * (1.0 - eve_wrong)), (a, 1 - a, 0.5 * eve_wrong)])
        .collect();
    let click = |d: usize, r: usize| 1.0 - (-delta - lambda * g[d][r] * q0).exp() * n_silent[d];

    let mut raw_click = [0.0; 2];
    for &(_, r, w) in &classes {
        for (d, acc) in raw_click.iter_mut().enumerate() {
            *acc += w * click(d, r);
        }
    }
    let live = raw_click.map(|p| 1.0 / (1.0 + p / period * config.dead_time_ps));

    let (mut conclusive, mut double, mut right, mut wrong, mut signal) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut mean_wrong = [0.0; 4]; // timing, dark, optical, eve
    for &(a, r, w) in &classes {
        let c = live[a] * click(a, r);
        let x = live[1 - a] * click(1 - a, r);
        conclusive += w * (c + x - c * x);
        double += w * c * x;
        right += w * c * (1.0 - x);
        wrong += w * x * (1.0 - c);
        for d in 0..2 {
            signal += w * live[d] * (1.0 - (-lambda * g[d][r] * q0).exp() * n_silent[d]);
        }
        let own = lambda * g[1 - a][r] * q0;
        mean_wrong[0] += w * -n_silent[1 - a].ln();
        mean_wrong[1] += w * delta;
        if r == a {
            mean_wrong[2] += w * own;
        } else {
            mean_wrong[3] += w * own;
        }
    }
    let sifted = right + wrong;
    let qber_total = if sifted > 0.0 { wrong / sifted } else { 0.0 };
    let total_mean: f64 = mean_wrong.iter().sum();
    let part = |i: usize| if total_mean > 0.0 { qber_total * mean_wrong[i] / total_mean } else { 0.0 };

    let rate_scale = config.clock_ghz * 1e9;
    let r_sift_cps = sifted * rate_scale;
    LinkBudget {
        clock_ghz: config.clock_ghz,
        slot_period_ps: period,
        photons_at_detectors: lambda,
        count_rate_cps,
        detector_fwhm_ps,
        total_fwhm_ps,
        p_timing_error: f_out,
        dead_time_survival: 0.5 * (live[0] + live[1]),
        p_signal_conclusive: signal,
        p_dark_conclusive: (live[0] + live[1]) * (1.0 - (-delta).exp()),
        p_conclusive: conclusive,
        p_double_click: double,
        p_sifted: sifted,
        qber_total,
        qber_timing: part(0),
        qber_dark: part(1),
        qber_optical: part(2),
        qber_eve: part(3),
        photons_launched_per_slot: config.mu,
        photons_detected_per_slot: lambda * mean_sum,
        r_sift_cps,
        r_net_cps: r_sift_cps * net_fraction(qber_total, config.ec_efficiency),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QberClockPoint {
    pub clock_ghz: f64,
    pub qber_standard: f64,
    pub qber_enhanced: f64,
    pub improvement: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDistancePoint {
    pub distance_km: f64,
    pub r_sift_cps: f64,
    pub r_net_cps: f64,
}

fn check_grid(values: &[f64], allow_zero: bool) -> Result<(), AnalyticError> {
    let first_ok = values.first().is_none_or(|&v| if allow_zero { v >= 0.0 } else { v > 0.0 });
    if first_ok && values.windows(2).all(|w| w[0] < w[1]) && values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(AnalyticError::BadGrid)
    }
}

/// QBER with each detector module at every clock, the rest of `config`
/// held fixed.
pub fn qber_vs_clock_curve(config: &SimConfig, clocks_ghz: &[f64]) -> Result<Vec<QberClockPoint>, AnalyticError> {
    check_grid(clocks_ghz, false)?;
    Ok(clocks_ghz
        .iter()
        .map(|&clock_ghz| {
            let at = |profile| {
                expected_link_budget(&SimConfig { clock_ghz, detector_profile: profile, ..config.clone() }).qber_total
            };
            let qber_standard = at(DetectorProfile::Standard);
            let qber_enhanced = at(DetectorProfile::Enhanced);
            QberClockPoint { clock_ghz, qber_standard, qber_enhanced, improvement: qber_standard - qber_enhanced }
        })
        .collect())
}

pub fn rate_vs_distance_curve(config: &SimConfig, distances_km: &[f64]) -> Result<Vec<RateDistancePoint>, AnalyticError> {
    check_grid(distances_km, true)?;
    Ok(distances_km
        .iter()
        .map(|&distance_km| {
            let b = expected_link_budget(&SimConfig { distance_km, ..config.clone() });
            RateDistancePoint { distance_km, r_sift_cps: b.r_sift_cps, r_net_cps: b.r_net_cps }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect_threshold(f: f64) -> f64 {
        let (mut lo, mut hi) = (1e-12, 0.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 1.0 - (1.0 + f) * binary_entropy(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5), 1.0);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        let p: f64 = 0.11;
        let direct = -(p * p.ln() + (1.0 - p) * (1.0 - p).ln()) / std::f64::consts::LN_2;
        assert!((binary_entropy(0.11) - direct).abs() < 1e-15);
        assert!((binary_entropy(0.11) - 0.4999).abs() < 1e-4);
    }

    #[test]
    fn threshold_matches_bisection() {
        for f in [0.0, 1.0, 1.2, 1.5, 3.0] {
            let t = net_rate_qber_threshold(f);
            assert!((t - bisect_threshold(f)).abs() < 1e-6, "f {f}: {t}");
            if f > 0.0 {
                assert!(net_fraction(t + 1e-6, f) == 0.0);
                assert!(net_fraction(t - 1e-4, f) > 0.0);
            }
        }
    }

    #[test]
    fn ideal_link_has_no_errors() {
        let c = SimConfig::default().ideal();
        let b = expected_link_budget(&c);
        assert_eq!(b.qber_total, 0.0);
        assert_eq!(b.r_net_cps, b.r_sift_cps);
        assert_eq!(b.p_timing_error, 0.0);
        let lambda = b.photons_at_detectors;
        // each detector sees lambda/4 from the matching state
        let single = 1.0 - (-lambda / 4.0).exp();
        assert!((b.p_sifted - single).abs() < 1e-15);
    }

    #[test]
    fn components_sum_to_total() {
        for eve in [0.0, 0.3, 1.0] {
            for clock in [0.5, 1.0, 3.3] {
                let c = SimConfig { eve_fraction: eve, clock_ghz: clock, ..SimConfig::default() };
                let b = expected_link_budget(&c);
                let sum = b.qber_timing + b.qber_dark + b.qber_optical + b.qber_eve;
                assert!((sum - b.qber_total).abs() < 1e-12);
                assert!(b.qber_total >= 0.0 && b.qber_total <= 0.5);
                assert!(b.r_net_cps <= b.r_sift_cps);
            }
        }
    }

    #[test]
    fn slow_clock_has_no_improvement() {
        let pts = qber_vs_clock_curve(&SimConfig::default(), &[0.1]).unwrap();
        assert!(pts[0].improvement.abs() < 1e-6, "{pts:?}");
    }

    #[test]
    fn grid_checks() {
        let c = SimConfig::default();
        assert_eq!(qber_vs_clock_curve(&c, &[2.0, 1.0]), Err(AnalyticError::BadGrid));
        assert_eq!(qber_vs_clock_curve(&c, &[0.0, 1.0]), Err(AnalyticError::BadGrid));
        assert!(rate_vs_distance_curve(&c, &[0.0, 1.0]).is_ok());
        assert!(qber_vs_clock_curve(&c, &[]).unwrap().is_empty());
    }
}
