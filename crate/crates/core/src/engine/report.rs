//! Trial results and their comparison with the link budget.
//!
//! Flat record schema, in [`REPORT_COLUMNS`] order:
//!
//! | column | meaning |
//! |---|---|
//! | `seed`, `clock_ghz`, `slots_simulated` | trial identity |
//! | `photons_launched` | photons leaving Alice |
//! | `photons_detected` | signal photons surviving detector efficiency, before dead time |
//! | `dark_counts` | dark events on both detectors, before dead time |
//! | `detector_events` | events left after dead time |
//! | `conclusive_count` | slots with at least one click |
//! | `double_click_count` | slots where both detectors clicked (discarded) |
//! | `sifted_length`, `sifted_errors`, `qber_sifted` | sifted key and its true error rate |
//! | `disclosed_bits`, `qber_measured` | public sample and its error rate |
//! | `leaked_bits` | parities disclosed by reconciliation |
//! | `residual_errors` | errors left after reconciliation |
//! | `secret_length` | bits after privacy amplification |
//! | `r_sift_cps`, `r_net_cps` | `sifted_length` and `secret_length` per second of link time |
//! | `outcome` | `completed`, `key_mismatch`, `no_sifted_key` or `qber_too_high` |
//! | `wall_time_s` | elapsed time, excluded from determinism checks |

use std::fmt;

use crate::analytic::{binary_entropy, LinkBudget};
use crate::cli::format_number;
use crate::detector::TimingHistogram;

use super::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    /// Keys still differed after reconciliation; nothing is kept.
    KeyMismatch,
    NoSiftedKey,
    /// The sampled QBER was at least 1/2.
    QberTooHigh,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Completed => "completed",
            Outcome::KeyMismatch => "key_mismatch",
            Outcome::NoSiftedKey => "no_sifted_key",
            Outcome::QberTooHigh => "qber_too_high",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub clock_ghz: f64,
    pub slots_simulated: u64,
    pub photons_launched: u64,
    pub photons_detected: u64,
    pub dark_counts: u64,
    pub detector_events: u64,
    pub conclusive_count: u64,
    pub double_click_count: u64,
    pub sifted_length: u64,
    pub sifted_errors: u64,
    pub qber_sifted: f64,
    pub disclosed_bits: u64,
    pub qber_measured: f64,
    pub leaked_bits: u64,
    pub residual_errors: u64,
    pub residual_error_detected: bool,
    pub secret_length: u64,
    pub r_sift_cps: f64,
    pub r_net_cps: f64,
    pub outcome: Outcome,
    pub wall_time_s: f64,
    /// Signal timestamp minus true arrival time, after dead time.
    pub timing_histogram: TimingHistogram,
    pub ec_efficiency: f64,
    pub security_parameter: u32,
}

pub const REPORT_COLUMNS: &[&str] = &[
    "seed",
    "clock_ghz",
    "slots_simulated",
    "photons_launched",
    "photons_detected",
    "dark_counts",
    "detector_events",
    "conclusive_count",
    "double_click_count",
    "sifted_length",
    "sifted_errors",
    "qber_sifted",
    "disclosed_bits",
    "qber_measured",
    "leaked_bits",
    "residual_errors",
    "secret_length",
    "r_sift_cps",
    "r_net_cps",
    "outcome",
    "wall_time_s",
];

impl RunReport {
    pub(super) fn empty(config: &SimConfig) -> Self {
        Self {
            seed: config.seed,
            clock_ghz: config.clock_ghz,
            slots_simulated: config.n_slots,
            photons_launched: 0,
            photons_detected: 0,
            dark_counts: 0,
            detector_events: 0,
            conclusive_count: 0,
            double_click_count: 0,
            sifted_length: 0,
            sifted_errors: 0,
            qber_sifted: 0.0,
            disclosed_bits: 0,
            qber_measured: 0.0,
            leaked_bits: 0,
            residual_errors: 0,
            residual_error_detected: false,
            secret_length: 0,
            r_sift_cps: 0.0,
            r_net_cps: 0.0,
            outcome: Outcome::NoSiftedKey,
            wall_time_s: 0.0,
            timing_histogram: TimingHistogram::new(1.0, 0.0, 0),
            ec_efficiency: config.ec_efficiency,
            security_parameter: config.security_parameter,
        }
    }

    /// Counts per second of simulated link time.
    pub fn per_second(&self, count: u64) -> f64 {
        count as f64 * self.clock_ghz * 1e9 / self.slots_simulated as f64
    }

    pub(super) fn finish_rates(&mut self) {
        self.qber_sifted = if self.sifted_length > 0 { self.sifted_errors as f64 / self.sifted_length as f64 } else { 0.0 };
        self.r_sift_cps = self.per_second(self.sifted_length);
        self.r_net_cps = self.per_second(self.secret_length);
    }

    /// The same report with the wall-clock time zeroed, for equality checks.
    pub fn without_timing(&self) -> Self {
        Self { wall_time_s: 0.0, ..self.clone() }
    }

    fn values(&self) -> Vec<String> {
        let f = format_number;
        vec![
            self.seed.to_string(),
            f(self.clock_ghz),
            self.slots_simulated.to_string(),
            self.photons_launched.to_string(),
            self.photons_detected.to_string(),
            self.dark_counts.to_string(),
            self.detector_events.to_string(),
            self.conclusive_count.to_string(),
            self.double_click_count.to_string(),
            self.sifted_length.to_string(),
            self.sifted_errors.to_string(),
            f(self.qber_sifted),
            self.disclosed_bits.to_string(),
            f(self.qber_measured),
            self.leaked_bits.to_string(),
            self.residual_errors.to_string(),
            self.secret_length.to_string(),
            f(self.r_sift_cps),
            f(self.r_net_cps),
            self.outcome.to_string(),
            f(self.wall_time_s),
        ]
    }

    pub fn csv_header() -> String {
        REPORT_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.values().join(",")
    }

    /// One `key = value` line per column.
    pub fn to_key_values(&self) -> String {
        REPORT_COLUMNS
            .iter()
            .zip(self.values())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// One quantity checked against its expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub quantity: &'static str,
    pub measured: f64,
    pub expected: f64,
    pub z_score: f64,
}

impl Comparison {
    pub fn passes(&self) -> bool {
        self.z_score.abs() <= 3.0
    }
}

fn z(measured: f64, expected: f64, sigma: f64) -> f64 {
    let d = measured - expected;
    if d == 0.0 {
        0.0
    } else if sigma > 0.0 {
        d / sigma
    } else {
        d.signum() * f64::INFINITY
    }
}

/// z-scores of the report's tallies against the budget.
///
/// Counts use Poisson or binomial errors over `slots_simulated`; QBERs use
/// binomial errors over the bits they were measured on. The secret rate is
/// compared with `r_net * (1 - disclosed/sifted)` less the security
/// parameter, its error propagated from the key size and the sampled QBER.
pub fn compare_to_analytic(report: &RunReport, budget: &LinkBudget) -> Vec<Comparison> {
    let n = report.slots_simulated as f64;
    let binom = |p: f64, trials: f64| (trials * p * (1.0 - p)).max(0.0).sqrt();
    let count = |quantity, measured: u64, p: f64| {
        let expected = n * p;
        Comparison { quantity, measured: measured as f64, expected, z_score: z(measured as f64, expected, binom(p, n)) }
    };
    let poisson = |quantity, measured: u64, per_slot: f64| {
        let expected = n * per_slot;
        Comparison { quantity, measured: measured as f64, expected, z_score: z(measured as f64, expected, expected.sqrt()) }
    };
    let q = budget.qber_total;
    let rate_scale = report.clock_ghz * 1e9 / n;
    let sifted = report.sifted_length as f64;
    let mut out = vec![
        poisson("photons_launched", report.photons_launched, budget.photons_launched_per_slot),
        poisson("photons_detected", report.photons_detected, budget.photons_detected_per_slot),
        count("conclusive_count", report.conclusive_count, budget.p_conclusive),
        count("double_click_count", report.double_click_count, budget.p_double_click),
        count("sifted_length", report.sifted_length, budget.p_sifted),
        Comparison {
            quantity: "qber_sifted",
            measured: report.qber_sifted,
            expected: q,
            z_score: z(report.qber_sifted, q, binom(q, 1.0) / sifted.max(1.0).sqrt()),
        },
        Comparison {
            quantity: "qber_measured",
            measured: report.qber_measured,
            expected: q,
            z_score: z(report.qber_measured, q, binom(q, 1.0) / (report.disclosed_bits as f64).max(1.0).sqrt()),
        },
        Comparison {
            quantity: "r_sift_cps",
            measured: report.r_sift_cps,
            expected: budget.r_sift_cps,
            z_score: z(report.r_sift_cps, budget.r_sift_cps, rate_scale * binom(budget.p_sifted, n)),
        },
    ];

    let kept = if sifted > 0.0 { 1.0 - report.disclosed_bits as f64 / sifted } else { 1.0 };
    let f = 1.0 + report.ec_efficiency;
    let frac = (1.0 - f * binary_entropy(q)).max(0.0);
    let expected = (budget.r_net_cps * kept - report.security_parameter as f64 * rate_scale).max(0.0);
    let slope = if q > 0.0 && q < 0.5 && frac > 0.0 { f * ((1.0 - q) / q).log2() } else { 0.0 };
    let remaining = sifted - report.disclosed_bits as f64;
    let var_key = (frac * rate_scale).powi(2) * binom(budget.p_sifted, n).powi(2) * kept * kept;
    let var_q = (remaining * rate_scale * slope).powi(2) * q * (1.0 - q) / (report.disclosed_bits as f64).max(1.0);
    out.push(Comparison {
        quantity: "r_net_cps",
        measured: report.r_net_cps,
        expected,
        z_score: z(report.r_net_cps, expected, (var_key + var_q).sqrt()),
    });
    out
}
