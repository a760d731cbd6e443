//! Seeded Monte Carlo executor.
//!
//! A trial walks the clock slot by slot in fixed chunks of
//! [`CHUNK_SLOTS`]. Every chunk draws from its own generator, seeded by
//! [`derive_seed`] from the trial seed and the chunk index, so the result
//! depends only on `(config, seed)` and never on how chunks are scheduled
//! across threads. Detector events from all chunks are merged and time
//! sorted before dead time and slot assignment, and the classical
//! post-processing runs on one further derived stream.

mod config;
mod report;

use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

pub use config::{ConfigError, DetectorProfile, SimConfig, FIELD_NAMES};
pub use report::{compare_to_analytic, Comparison, Outcome, RunReport, REPORT_COLUMNS};

use crate::detector::{
    apply_dead_time, assign_slot, combined_fwhm, sort_events, Arrival, DetectionEvent, DetectorId, EventOrigin,
    TimingHistogram,
};
use crate::optics::{attenuate, slot_period_ps, PhotonNumberSampler};
use crate::protocol::{
    cascade_reconcile, estimate_qber, intercept_pulse, privacy_amplify, resolve_coincidences, route_photon,
    secret_key_length, sift, ConclusiveRecord, EncodingScheme, PackedBits, ProtocolError,
};

/// Slots per independently seeded chunk. A multiple of 64 so each chunk
/// owns whole words of Alice's packed bits.
pub const CHUNK_SLOTS: u64 = 1 << 20;

/// Offset of slot 0's nominal arrival time, keeping early jitter positive.
const GUARD_PS: f64 = 10_000.0;

/// Stream tags for [`derive_seed`].
pub mod stream {
    pub const CHUNK: u64 = 1;
    pub const PROTOCOL: u64 = 2;
    pub const SWEEP: u64 = 3;
    pub const HISTOGRAM: u64 = 4;
}

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of sub-stream `index` of kind `stream` under `seed`:
/// `mix64(mix64(mix64(seed) ^ stream * 0x9e3779b97f4a7c15) + index)`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(mix64(seed) ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)).wrapping_add(index))
}

pub fn stream_rng(seed: u64, stream: u64, index: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, stream, index))
}

#[derive(Default)]
struct ChunkOutput {
    alice_words: Vec<u64>,
    events: Vec<DetectionEvent>,
    photons_launched: u64,
    photons_detected: u64,
    dark_counts: u64,
}

fn simulate_chunk(config: &SimConfig, index: u64, transmittance: f64, sampler: &PhotonNumberSampler) -> ChunkOutput {
    let scheme = EncodingScheme::default();
    let spad = config.spad();
    let period = slot_period_ps(config.clock_ghz);
    let first = index * CHUNK_SLOTS;
    let last = (first + CHUNK_SLOTS).min(config.n_slots);
    let mut rng = stream_rng(config.seed, stream::CHUNK, index);

    let words = (last - first).div_ceil(64) as usize;
    let alice_words: Vec<u64> = (0..words).map(|_| rng.next_u64()).collect();
    let mut launched = 0u64;
    let mut arrivals = Vec::new();
    for slot in first..last {
        let local = (slot - first) as usize;
        let bit = alice_words[local / 64] >> (local % 64) & 1 == 1;
        let n = sampler.sample(&mut rng);
        launched += n;
        let mut state = scheme.state(bit);
        if config.eve_fraction > 0.0 && rng.random::<f64>() < config.eve_fraction {
            state = intercept_pulse(state, &scheme, &mut rng);
        }
        if n == 0 {
            continue;
        }
        let at_bob = attenuate(n, transmittance, &mut rng);
        for _ in 0..at_bob {
            if let Some(b) = route_photon(state, &scheme, config.extinction_ratio_db, &mut rng) {
                arrivals.push(Arrival { true_time_ps: GUARD_PS + slot as f64 * period, detector: DetectorId::from_bit(b) });
            }
        }
    }

    let survivors = spad.thin(&arrivals, &mut rng);
    let window = (GUARD_PS + (first as f64 - 0.5) * period, GUARD_PS + (last as f64 - 0.5) * period);
    let darks = spad.dark_events(window, &mut rng);
    let rate = (survivors.len() + darks.len()) as f64 / ((window.1 - window.0) * 1e-12);
    let mut events = spad.timestamp(&survivors, rate, &mut rng);
    let (photons_detected, dark_counts) = (events.len() as u64, darks.len() as u64);
    events.extend(darks);
    ChunkOutput { alice_words, events, photons_launched: launched, photons_detected, dark_counts }
}

/// Runs one trial on the current rayon pool.
pub fn run_trial(config: &SimConfig) -> Result<RunReport, ConfigError> {
    config.validate()?;
    let started = Instant::now();
    let transmittance = config.channel().expect("validated").transmittance();
    let sampler = PhotonNumberSampler::new(config.mu).expect("validated");
    let chunks = config.n_slots.div_ceil(CHUNK_SLOTS);
    let outputs: Vec<ChunkOutput> =
        (0..chunks).into_par_iter().map(|i| simulate_chunk(config, i, transmittance, &sampler)).collect();

    let mut report = RunReport::empty(config);
    let mut words = Vec::with_capacity(config.n_slots.div_ceil(64) as usize);
    let mut events = Vec::new();
    for out in outputs {
        words.extend(out.alice_words);
        events.extend(out.events);
        report.photons_launched += out.photons_launched;
        report.photons_detected += out.photons_detected;
        report.dark_counts += out.dark_counts;
    }
    let alice = PackedBits::from_words(words, config.n_slots as usize);
    sort_events(&mut events);
    let events = apply_dead_time(&events, config.dead_time_ps);
    report.detector_events = events.len() as u64;

    let period = slot_period_ps(config.clock_ghz);
    let fwhm = combined_fwhm(config.jitter_profile(config.detector_profile).base_fwhm_ps, config.sync_fwhm_ps);
    let mut histogram = TimingHistogram::centered(config.histogram_bin_ps, (4.0 * fwhm).max(period));
    let mut raw = Vec::with_capacity(events.len());
    for e in &events {
        if let EventOrigin::Signal { true_time_ps } = e.origin {
            histogram.record(e.timestamp_ps - true_time_ps);
        }
        let slot = assign_slot(e.timestamp_ps, config.clock_ghz, GUARD_PS);
        if slot >= 0 && (slot as u64) < config.n_slots {
            raw.push(ConclusiveRecord { slot: slot as u64, bit: e.detector.bit() });
        }
    }
    report.timing_histogram = histogram;

    let coincidences = resolve_coincidences(raw);
    report.double_click_count = coincidences.double_clicks;
    report.conclusive_count = coincidences.records.len() as u64 + coincidences.double_clicks;
    let key = sift(&alice, &coincidences.records).expect("records are unique and in range");
    report.sifted_length = key.len() as u64;
    report.sifted_errors = key.error_count() as u64;
    postprocess(config, &key, &mut report);

    report.finish_rates();
    report.wall_time_s = started.elapsed().as_secs_f64();
    Ok(report)
}

fn postprocess(config: &SimConfig, key: &crate::protocol::SiftedKey, report: &mut RunReport) {
    let mut rng = stream_rng(config.seed, stream::PROTOCOL, 0);
    let estimate = match estimate_qber(key, config.sample_fraction, &mut rng) {
        Ok(e) => e,
        Err(_) => {
            report.outcome = Outcome::NoSiftedKey;
            return;
        }
    };
    report.disclosed_bits = estimate.disclosed as u64;
    report.qber_measured = estimate.qber;
    let rest = &estimate.remaining;
    let rec = match cascade_reconcile(&rest.alice_bits, &rest.bob_bits, estimate.qber, config.cascade_passes, &mut rng)
    {
        Ok(r) => r,
        Err(ProtocolError::QberTooHigh(_)) => {
            report.outcome = Outcome::QberTooHigh;
            return;
        }
        Err(e) => unreachable!("inputs checked above: {e}"),
    };
    report.leaked_bits = rec.leaked_bits;
    report.residual_error_detected = rec.residual_error_detected;
    report.residual_errors = rest.alice_bits.iter().zip(&rec.corrected_bob_bits).filter(|(a, b)| a != b).count() as u64;
    if rest.is_empty() {
        report.outcome = Outcome::NoSiftedKey;
        return;
    }
    let m = secret_key_length(rest.len(), rec.leaked_bits, estimate.qber, config.security_parameter);
    let seed_len = if m == 0 { 0 } else { rest.len() + m - 1 };
    let hash_seed: Vec<bool> = (0..seed_len).map(|_| rng.random()).collect();
    let pa = |bits: &[bool]| {
        privacy_amplify(bits, rec.leaked_bits, estimate.qber, config.security_parameter, &hash_seed)
            .expect("non-empty key and matching seed")
    };
    let alice_key = pa(&rest.alice_bits);
    // identical inputs hash identically, so Bob's side only needs hashing
    // when reconciliation left differences
    let agree = report.residual_errors == 0 || pa(&rec.corrected_bob_bits) == alice_key;
    if agree {
        report.secret_length = alice_key.bits.len() as u64;
        report.outcome = Outcome::Completed;
    } else {
        report.outcome = Outcome::KeyMismatch;
    }
}

/// Runs one trial on a private pool of `workers` threads.
pub fn run_trial_with_workers(config: &SimConfig, workers: usize) -> Result<RunReport, ConfigError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| run_trial(config))
}

/// One trial per value of `parameter`. Point `i` runs with seed
/// `derive_seed(base.seed, stream::SWEEP, i)` truncated to 63 bits.
pub fn sweep(base: &SimConfig, parameter: &str, values: &[String]) -> Result<Vec<RunReport>, ConfigError> {
    if !FIELD_NAMES.contains(&parameter) {
        return Err(ConfigError::UnknownKey { key: parameter.to_string() });
    }
    let configs = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut c = base.with_override(parameter, v)?;
            c.seed = derive_seed(base.seed, stream::SWEEP, i as u64) & (i64::MAX as u64);
            Ok(c)
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    configs.par_iter().map(run_trial).collect()
}

/// Timestamp offsets of `samples` detector events at a fixed count rate,
/// without the sync channel: the detector's own timing response.
pub fn jitter_histogram(config: &SimConfig, count_rate_cps: f64, samples: u64) -> TimingHistogram {
    let fwhm = config.jitter_profile(config.detector_profile).effective_fwhm(count_rate_cps);
    let mut hist = TimingHistogram::centered(config.histogram_bin_ps, (4.0 * fwhm).max(10.0 * config.histogram_bin_ps));
    let mut rng = stream_rng(config.seed, stream::HISTOGRAM, 0);
    for _ in 0..samples {
        hist.record(crate::detector::sample_arrival(0.0, fwhm, 0.0, &mut rng));
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let mut seen = std::collections::HashSet::new();
        for stream in 1..=4 {
            for i in 0..1000 {
                assert!(seen.insert(derive_seed(7, stream, i)));
            }
        }
        assert_ne!(derive_seed(7, 1, 0), derive_seed(8, 1, 0));
    }

    #[test]
    fn ideal_trial_is_error_free() {
        let c = SimConfig { n_slots: 100_000, ..SimConfig::default().ideal() };
        let r = run_trial(&c).unwrap();
        assert_eq!(r.sifted_errors, 0);
        assert_eq!(r.qber_measured, 0.0);
        assert_eq!(r.double_click_count, 0);
        assert!(r.photons_detected <= r.photons_launched);
    }

    #[test]
    fn sweep_rejects_unknown_names() {
        let err = sweep(&SimConfig::default(), "clock", &["1".into()]).unwrap_err();
        assert!(err.to_string().contains("clock_ghz"), "{err}");
        assert!(sweep(&SimConfig::default(), "clock_ghz", &[]).unwrap().is_empty());
    }
}
