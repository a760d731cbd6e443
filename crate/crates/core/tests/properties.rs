use b92sim::analytic::expected_link_budget;
use b92sim::cli::format_number;
use b92sim::detector::{apply_dead_time, assign_slot, sort_events, DetectionEvent, DetectorId, EventOrigin};
use b92sim::engine::{DetectorProfile, SimConfig};
use b92sim::optics::{malus_pass_probability, Polarization};
use b92sim::protocol::{
    cascade_reconcile_with_transcript, privacy_amplify, resolve_coincidences, sift, ConclusiveRecord, PackedBits,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

proptest! {
    #[test]
    fn beam_splitter_ports_are_complete(state in -720.0f64..720.0, analyzer in -720.0f64..720.0, er in 3.0f64..60.0) {
        let s = Polarization::new(state);
        let a = malus_pass_probability(s, analyzer, er);
        let b = malus_pass_probability(s, analyzer + 90.0, er);
        prop_assert!((0.0..=1.0).contains(&a));
        // rounding of the input angles (ulp ~1e-13 deg here) bounds the error
        prop_assert!((a + b - 1.0).abs() <= 1e-12);
    }

    /// On a dyadic angle grid the `+ 90` and the angle reduction are exact,
    /// and so is the port sum.
    #[test]
    fn beam_splitter_ports_sum_exactly_on_grid(
        state in -(720i64 << 16)..(720i64 << 16),
        analyzer in -(720i64 << 16)..(720i64 << 16),
        er in prop_oneof![Just(f64::INFINITY), 3.0f64..60.0],
    ) {
        let grid = |k: i64| k as f64 / 65536.0;
        let s = Polarization::new(grid(state));
        let a = malus_pass_probability(s, grid(analyzer), er);
        let b = malus_pass_probability(s, grid(analyzer) + 90.0, er);
        prop_assert_eq!(a + b, 1.0);
    }

    #[test]
    fn polarization_is_normalized(angle in -1e4f64..1e4) {
        let p = Polarization::new(angle);
        prop_assert!((0.0..180.0).contains(&p.degrees()));
        prop_assert!((Polarization::new(angle + 180.0).degrees() - p.degrees()).abs() < 1e-9
            || (Polarization::new(angle + 180.0).degrees() - p.degrees()).abs() > 180.0 - 1e-9);
    }

    #[test]
    fn nine_digit_rendering_round_trips(v in prop::num::f64::NORMAL) {
        let back: f64 = format_number(v).parse().unwrap();
        prop_assert!(((back - v) / v).abs() <= 5e-9, "{} -> {}", v, format_number(v));
    }

    #[test]
    fn slot_assignment_inverts_emission(slot in 0i64..1_000_000, clock in 0.1f64..10.0, offset in -0.49f64..0.49) {
        let t = 1000.0 / clock;
        prop_assert_eq!(assign_slot(5000.0 + (slot as f64 + offset) * t, clock, 5000.0), slot);
    }

    #[test]
    fn dead_time_output_is_spaced(times in prop::collection::vec((0.0f64..1e6, any::<bool>()), 0..200), dead in 0.0f64..5e4) {
        let mut events: Vec<DetectionEvent> = times
            .iter()
            .map(|&(t, d)| DetectionEvent { detector: DetectorId::from_bit(d), timestamp_ps: t, origin: EventOrigin::Dark })
            .collect();
        sort_events(&mut events);
        let kept = apply_dead_time(&events, dead);
        for d in [DetectorId::D0, DetectorId::D1] {
            let ts: Vec<f64> = kept.iter().filter(|e| e.detector == d).map(|e| e.timestamp_ps).collect();
            prop_assert!(ts.windows(2).all(|w| w[1] - w[0] >= dead));
            let first = events.iter().find(|e| e.detector == d).map(|e| e.timestamp_ps);
            prop_assert_eq!(ts.first().copied(), first);
        }
    }

    #[test]
    fn packed_bits_match_bools(bits in prop::collection::vec(any::<bool>(), 0..500)) {
        let p = PackedBits::from_bools(&bits);
        prop_assert_eq!(p.to_bools(), bits.clone());
        let words = p.words().to_vec();
        prop_assert_eq!(PackedBits::from_words(words, bits.len()), p);
    }

    #[test]
    fn sifting_keeps_only_single_clicks(
        alice in prop::collection::vec(any::<bool>(), 1..300),
        raw in prop::collection::vec((0u64..300, any::<bool>()), 0..400),
    ) {
        let n = alice.len() as u64;
        let raw: Vec<ConclusiveRecord> = raw.into_iter().filter(|r| r.0 < n).map(|(slot, bit)| ConclusiveRecord { slot, bit }).collect();
        let c = resolve_coincidences(raw.clone());
        let key = sift(&alice[..], &c.records).unwrap();
        prop_assert!(key.slot_indices.windows(2).all(|w| w[0] < w[1]));
        for (i, &s) in key.slot_indices.iter().enumerate() {
            prop_assert_eq!(key.alice_bits[i], alice[s as usize]);
            let bits: Vec<bool> = raw.iter().filter(|r| r.slot == s).map(|r| r.bit).collect();
            prop_assert!(bits.iter().all(|&b| b == key.bob_bits[i]));
        }
        let mut slots: Vec<u64> = raw.iter().map(|r| r.slot).collect();
        slots.sort_unstable();
        slots.dedup();
        prop_assert_eq!(slots.len() as u64, key.len() as u64 + c.double_clicks);
    }

    #[test]
    fn cascade_transcript_audits_leakage(seed in any::<u64>(), n in 1usize..3000, e in 0.0f64..0.12) {
        use rand::Rng;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let alice: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let bob: Vec<bool> = alice.iter().map(|&b| b ^ (rng.random::<f64>() < e)).collect();
        let (r, t) = cascade_reconcile_with_transcript(&alice, &bob, e.max(0.005), 4, &mut rng).unwrap();
        prop_assert_eq!(t.len() as u64, r.leaked_bits);
        prop_assert!(r.leaked_bits <= (n * 4) as u64);
        if !r.residual_error_detected {
            let diff = alice.iter().zip(&r.corrected_bob_bits).filter(|(a, b)| a != b).count();
            prop_assert_eq!(diff % 2, 0);
        }
    }

    #[test]
    fn privacy_amplification_is_linear(seed in any::<u64>(), n in 1usize..400) {
        use rand::Rng;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let x: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let m = rng.random_range(1..=n);
        let hash: Vec<bool> = (0..n + m - 1).map(|_| rng.random()).collect();
        let pa = |b: &[bool]| privacy_amplify(b, (n - m) as u64, 0.0, 0, &hash).unwrap().bits;
        let xy: Vec<bool> = x.iter().zip(&y).map(|(a, b)| a ^ b).collect();
        let sum: Vec<bool> = pa(&x).iter().zip(pa(&y)).map(|(a, b)| a ^ b).collect();
        prop_assert_eq!(sum, pa(&xy));
        prop_assert_eq!(pa(&x).len(), m);
    }

    #[test]
    fn link_budget_invariants(
        clock in 0.1f64..10.0,
        distance in 0.0f64..30.0,
        mu in 0.01f64..1.0,
        dark in 0.0f64..1e5,
        eve in 0.0f64..1.0,
        er in prop_oneof![Just(f64::INFINITY), 5.0f64..40.0],
        dead in 0.0f64..1e5,
        standard in any::<bool>(),
    ) {
        let c = SimConfig {
            clock_ghz: clock,
            distance_km: distance,
            mu,
            dark_count_rate_cps: dark,
            eve_fraction: eve,
            extinction_ratio_db: er,
            dead_time_ps: dead,
            detector_profile: if standard { DetectorProfile::Standard } else { DetectorProfile::Enhanced },
            ..SimConfig::default()
        };
        c.validate().unwrap();
        let b = expected_link_budget(&c);
        prop_assert!((0.0..=0.5).contains(&b.qber_total), "{}", b.qber_total);
        let sum = b.qber_timing + b.qber_dark + b.qber_optical + b.qber_eve;
        prop_assert!((sum - b.qber_total).abs() <= 1e-9);
        prop_assert!(b.r_net_cps <= b.r_sift_cps);
        prop_assert!(b.p_sifted <= b.p_conclusive && b.p_conclusive <= 1.0);
        prop_assert!(b.photons_detected_per_slot <= b.photons_launched_per_slot);
    }

    #[test]
    fn config_overrides_round_trip(clock in 0.01f64..10.0, mu in 0.001f64..5.0, seed in 0u64..=i64::MAX as u64) {
        let c = SimConfig::default()
            .with_override("clock_ghz", &format!("{clock:?}")).unwrap()
            .with_override("mu", &format!("{mu:?}")).unwrap()
            .with_override("seed", &seed.to_string()).unwrap();
        prop_assert_eq!(c.clock_ghz, clock);
        prop_assert_eq!(c.seed, seed);
        prop_assert_eq!(SimConfig::from_toml_str(&c.to_toml()).unwrap(), c);
    }
}
