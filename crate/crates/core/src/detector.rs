//! Phenomenological single-photon avalanche diode model.
//!
//! A detector is described by its efficiency, dark count rate, dead time
//! and a Gaussian timing response whose width may grow with count rate.
//! Timestamps are in picoseconds on the transmitter's clock; slot assignment
//! maps them back onto clock slots.

use std::fmt;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

use crate::optics::slot_period_ps;

/// FWHM of a Gaussian divided by its standard deviation, `2 sqrt(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("arrivals must be sorted by time (index {0} is earlier than its predecessor)")]
    UnsortedArrivals(usize),
    #[error("detection window is empty: [{0}, {1})")]
    EmptyWindow(f64, f64),
    #[error("histogram holds {0} counts, at least 100 are needed")]
    TooFewCounts(u64),
    #[error("histogram has several disjoint regions above half maximum")]
    AmbiguousPeak,
}

#[inline]
pub fn sigma_from_fwhm(fwhm_ps: f64) -> f64 {
    fwhm_ps / FWHM_PER_SIGMA
}

/// Quadrature sum of two independent Gaussian FWHM contributions.
#[inline]
pub fn combined_fwhm(a_ps: f64, b_ps: f64) -> f64 {
    a_ps.hypot(b_ps)
}

/// Timing response of one detector module.
///
/// The FWHM is flat up to `knee_rate_cps` and grows linearly above it by
/// `slope_ps_per_mcps` picoseconds per Mcount/s. A zero base width stands for
/// a detector with perfect timing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterProfile {
    pub base_fwhm_ps: f64,
    pub knee_rate_cps: f64,
    pub slope_ps_per_mcps: f64,
}

impl JitterProfile {
    /// Unmodified SPCM-AQR module: 570 ps at low rate, degrading above the knee.
    pub fn standard() -> Self {
        Self { base_fwhm_ps: 570.0, knee_rate_cps: 0.5e6, slope_ps_per_mcps: 300.0 }
    }

    /// Module with the fast pick-off circuit: 370 ps, rate independent.
    pub fn enhanced() -> Self {
        Self { base_fwhm_ps: 370.0, knee_rate_cps: 0.5e6, slope_ps_per_mcps: 0.0 }
    }

    pub fn effective_fwhm(&self, count_rate_cps: f64) -> f64 {
        let excess = (count_rate_cps - self.knee_rate_cps).max(0.0);
        self.base_fwhm_ps + self.slope_ps_per_mcps * excess / 1e6
    }
}

/// Adds the detector and sync-channel timing noise to a true arrival time.
pub fn sample_arrival<R: Rng + ?Sized>(true_time_ps: f64, fwhm_ps: f64, sync_fwhm_ps: f64, rng: &mut R) -> f64 {
    let sigma = sigma_from_fwhm(combined_fwhm(fwhm_ps, sync_fwhm_ps));
    if sigma == 0.0 {
        return true_time_ps;
    }
    let n: f64 = rng.sample(rand_distr::StandardNormal);
    true_time_ps + sigma * n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DetectorId {
    D0,
    D1,
}

impl DetectorId {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            DetectorId::D1
        } else {
            DetectorId::D0
        }
    }

    pub fn bit(self) -> bool {
        matches!(self, DetectorId::D1)
    }

    pub fn index(self) -> usize {
        self.bit() as usize
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorId::D0 => f.write_str("D0"),
            DetectorId::D1 => f.write_str("D1"),
        }
    }
}

/// Where a click came from. Diagnostic only; protocol code never reads it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventOrigin {
    Signal { true_time_ps: f64 },
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    pub detector: DetectorId,
    pub timestamp_ps: f64,
    pub origin: EventOrigin,
}

/// A photon that reached a detector's active area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub true_time_ps: f64,
    pub detector: DetectorId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpadModel {
    pub efficiency: f64,
    pub dark_count_rate_cps: f64,
    pub dead_time_ps: f64,
    pub jitter: JitterProfile,
    /// Timing noise of the optical sync channel, combined in quadrature.
    pub sync_fwhm_ps: f64,
}

impl SpadModel {
    /// Keeps each arrival with probability `efficiency`.
    pub fn thin<R: Rng + ?Sized>(&self, arrivals: &[Arrival], rng: &mut R) -> Vec<Arrival> {
        if self.efficiency >= 1.0 {
            return arrivals.to_vec();
        }
        arrivals
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() < self.efficiency)
            .collect()
    }

    /// Dark counts on both detectors over `[t0, t1)`, uniformly placed.
    /// Returned unsorted.
    pub fn dark_events<R: Rng + ?Sized>(&self, window: (f64, f64), rng: &mut R) -> Vec<DetectionEvent> {
        let (t0, t1) = window;
        let mean = self.dark_count_rate_cps * (t1 - t0) * 1e-12;
        let mut out = Vec::new();
        if mean <= 0.0 {
            return out;
        }
        let poisson = Poisson::new(mean).expect("positive mean");
        for detector in [DetectorId::D0, DetectorId::D1] {
            let n = poisson.sample(rng) as usize;
            for _ in 0..n {
                let t = t0 + (t1 - t0) * rng.random::<f64>();
                out.push(DetectionEvent { detector, timestamp_ps: t, origin: EventOrigin::Dark });
            }
        }
        out
    }

    /// Timestamps thinned arrivals using the jitter width at `count_rate_cps`.
    pub fn timestamp<R: Rng + ?Sized>(
        &self,
        survivors: &[Arrival],
        count_rate_cps: f64,
        rng: &mut R,
    ) -> Vec<DetectionEvent> {
        let fwhm = self.jitter.effective_fwhm(count_rate_cps);
        let sigma = sigma_from_fwhm(combined_fwhm(fwhm, self.sync_fwhm_ps));
        let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
        survivors
            .iter()
            .map(|a| {
                let dt = noise.as_ref().map_or(0.0, |n| n.sample(rng));
                DetectionEvent {
                    detector: a.detector,
                    timestamp_ps: a.true_time_ps + dt,
                    origin: EventOrigin::Signal { true_time_ps: a.true_time_ps },
                }
            })
            .collect()
    }
}

/// Orders events by time with ties broken by detector.
pub fn sort_events(events: &mut [DetectionEvent]) {
    events.sort_unstable_by(|a, b| {
        a.timestamp_ps
            .total_cmp(&b.timestamp_ps)
            .then(a.detector.cmp(&b.detector))
    });
}

/// Non-paralyzable dead time: an event is kept only if it comes at least
/// `dead_time_ps` after the last kept event on the same detector.
/// Input must be time-sorted; output stays time-sorted.
pub fn apply_dead_time(events: &[DetectionEvent], dead_time_ps: f64) -> Vec<DetectionEvent> {
    let mut last = [f64::NEG_INFINITY; 2];
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        let slot = &mut last[e.detector.index()];
        if e.timestamp_ps - *slot >= dead_time_ps {
            *slot = e.timestamp_ps;
            out.push(*e);
        }
    }
    out
}

/// Full detector response over the window `[t0, t1)`: efficiency thinning,
/// timing jitter, dark counts and dead time. Output is time-sorted.
pub fn detect<R: Rng + ?Sized>(
    arrivals: &[Arrival],
    spad: &SpadModel,
    window: (f64, f64),
    current_rate_cps: f64,
    rng: &mut R,
) -> Result<Vec<DetectionEvent>, DetectorError> {
    if !(window.0 < window.1) {
        return Err(DetectorError::EmptyWindow(window.0, window.1));
    }
    if let Some(i) = arrivals.windows(2).position(|w| w[1].true_time_ps < w[0].true_time_ps) {
        return Err(DetectorError::UnsortedArrivals(i + 1));
    }
    let survivors = spad.thin(arrivals, rng);
    let mut events = spad.timestamp(&survivors, current_rate_cps, rng);
    events.extend(spad.dark_events(window, rng));
    sort_events(&mut events);
    Ok(apply_dead_time(&events, spad.dead_time_ps))
}

/// Nearest clock slot for a timestamp. Exact half-slot offsets round away
/// from zero. Negative results belong to noise before the first pulse and
/// are discarded by callers.
#[inline]
pub fn assign_slot(timestamp_ps: f64, clock_ghz: f64, phase_ps: f64) -> i64 {
    ((timestamp_ps - phase_ps) / slot_period_ps(clock_ghz)).round() as i64
}

/// Probability that Gaussian timing noise of the given FWHM moves an event
/// more than half a slot, i.e. into a neighbouring slot.
pub fn misassignment_probability(fwhm_ps: f64, clock_ghz: f64) -> f64 {
    let sigma = sigma_from_fwhm(fwhm_ps);
    if sigma <= 0.0 {
        return 0.0;
    }
    let t = slot_period_ps(clock_ghz);
    libm::erfc(t / (2.0 * std::f64::consts::SQRT_2 * sigma))
}

/// Fixed-width histogram of timing offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingHistogram {
    pub bin_width_ps: f64,
    pub origin_ps: f64,
    pub counts: Vec<u64>,
}

impl TimingHistogram {
    pub fn new(bin_width_ps: f64, origin_ps: f64, bins: usize) -> Self {
        assert!(bin_width_ps > 0.0, "bin width must be positive");
        Self { bin_width_ps, origin_ps, counts: vec![0; bins] }
    }

    /// Histogram symmetric about zero wide enough for `half_range_ps` each side.
    pub fn centered(bin_width_ps: f64, half_range_ps: f64) -> Self {
        let half_bins = (half_range_ps / bin_width_ps).ceil().max(1.0) as usize;
        Self::new(bin_width_ps, -(half_bins as f64) * bin_width_ps, 2 * half_bins)
    }

    /// Adds one value. Values outside the covered range are not counted.
    pub fn record(&mut self, value_ps: f64) -> bool {
        let pos = (value_ps - self.origin_ps) / self.bin_width_ps;
        if pos < 0.0 || !pos.is_finite() {
            return false;
        }
        match self.counts.get_mut(pos as usize) {
            Some(c) => {
                *c += 1;
                true
            }
            None => false,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_start(&self, i: usize) -> f64 {
        self.origin_ps + i as f64 * self.bin_width_ps
    }

    fn bin_center(&self, i: isize) -> f64 {
        self.origin_ps + (i as f64 + 0.5) * self.bin_width_ps
    }

    /// CSV with columns `bin_start_ps,count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "bin_start_ps,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{}", crate::cli::format_number(self.bin_start(i)), c)?;
        }
        Ok(())
    }
}

/// Full width at half maximum, with each half-maximum crossing located by
/// linear interpolation between adjacent bin centres.
///
/// A peak made of a single non-empty bin reports one bin width.
pub fn histogram_fwhm(hist: &TimingHistogram) -> Result<f64, DetectorError> {
    let total = hist.total();
    if total < 100 {
        return Err(DetectorError::TooFewCounts(total));
    }
    let counts = &hist.counts;
    let peak = *counts.iter().max().expect("non-empty since total > 0") as f64;
    let half = peak / 2.0;
    let above: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] as f64 >= half).collect();
    let first = above[0];
    let last = *above.last().unwrap();
    if above.len() != last - first + 1 {
        return Err(DetectorError::AmbiguousPeak);
    }
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= counts.len() {
            0.0
        } else {
            counts[i as usize] as f64
        }
    };
    let crossing = |inside: isize, outside: isize| -> f64 {
        let (ni, no) = (at(inside), at(outside));
        let frac = (ni - half) / (ni - no);
        let (ci, co) = (hist.bin_center(inside), hist.bin_center(outside));
        ci + frac * (co - ci)
    };
    let left = crossing(first as isize, first as isize - 1);
    let right = crossing(last as isize, last as isize + 1);
    Ok(right - left)
}
