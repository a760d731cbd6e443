use rand::seq::index;
use rand::Rng;

use super::{BitLookup, ConclusiveRecord, ProtocolError};

/// Alice's and Bob's bits for the slots Bob declared conclusive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SiftedKey {
    pub alice_bits: Vec<bool>,
    pub bob_bits: Vec<bool>,
    pub slot_indices: Vec<u64>,
}

impl SiftedKey {
    pub fn len(&self) -> usize {
        self.slot_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slot_indices.is_empty()
    }

    pub fn error_count(&self) -> usize {
        self.alice_bits.iter().zip(&self.bob_bits).filter(|(a, b)| a != b).count()
    }

    pub fn error_rate(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.error_count() as f64 / self.len() as f64
        }
    }
}

/// Outcome of merging Bob's raw records slot by slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Coincidences {
    /// At most one record per slot, sorted by slot.
    pub records: Vec<ConclusiveRecord>,
    /// Slots where both detectors fired; these are dropped from `records`.
    pub double_clicks: u64,
}

/// Collapses repeated clicks of one detector within a slot into one record
/// and discards slots where both detectors clicked.
pub fn resolve_coincidences(mut raw: Vec<ConclusiveRecord>) -> Coincidences {
    raw.sort_unstable();
    raw.dedup();
    let mut records = Vec::with_capacity(raw.len());
    let mut double_clicks = 0;
    let mut i = 0;
    while i < raw.len() {
        if i + 1 < raw.len() && raw[i + 1].slot == raw[i].slot {
            double_clicks += 1;
            i += 2;
        } else {
            records.push(raw[i]);
            i += 1;
        }
    }
    Coincidences { records, double_clicks }
}

/// Bob announces the slots of his conclusive records; Alice keeps her bits
/// for those slots. The slot selection reads nothing but the record slots.
pub fn sift<A: BitLookup + ?Sized>(alice_bits: &A, records: &[ConclusiveRecord]) -> Result<SiftedKey, ProtocolError> {
    let mut sorted: Vec<ConclusiveRecord> = records.to_vec();
    sorted.sort_unstable_by_key(|r| r.slot);
    let len = alice_bits.bit_len();
    let mut key = SiftedKey {
        alice_bits: Vec::with_capacity(sorted.len()),
        bob_bits: Vec::with_capacity(sorted.len()),
        slot_indices: Vec::with_capacity(sorted.len()),
    };
    for r in &sorted {
        if key.slot_indices.last() == Some(&r.slot) {
            return Err(ProtocolError::DuplicateSlot(r.slot));
        }
        if r.slot >= len as u64 {
            return Err(ProtocolError::SlotOutOfRange { slot: r.slot, len });
        }
        key.slot_indices.push(r.slot);
        key.alice_bits.push(alice_bits.bit(r.slot as usize));
        key.bob_bits.push(r.bit);
    }
    Ok(key)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QberEstimate {
    pub qber: f64,
    pub disclosed: usize,
    pub errors: usize,
    pub remaining: SiftedKey,
}

/// Publicly compares a uniformly random subset of about
/// `sample_fraction * n` positions (at least one) and removes them from the key.
pub fn estimate_qber<R: Rng + ?Sized>(
    key: &SiftedKey,
    sample_fraction: f64,
    rng: &mut R,
) -> Result<QberEstimate, ProtocolError> {
    if !(sample_fraction > 0.0 && sample_fraction < 1.0) {
        return Err(ProtocolError::InvalidSampleFraction(sample_fraction));
    }
    let n = key.len();
    if n == 0 {
        return Err(ProtocolError::EmptyKey);
    }
    let k = ((n as f64 * sample_fraction).round() as usize).clamp(1, n);
    let mut disclosed = vec![false; n];
    for i in index::sample(rng, n, k) {
        disclosed[i] = true;
    }
    let mut errors = 0;
    let mut remaining = SiftedKey::default();
    for i in 0..n {
        if disclosed[i] {
            errors += (key.alice_bits[i] != key.bob_bits[i]) as usize;
        } else {
            remaining.alice_bits.push(key.alice_bits[i]);
            remaining.bob_bits.push(key.bob_bits[i]);
            remaining.slot_indices.push(key.slot_indices[i]);
        }
    }
    Ok(QberEstimate { qber: errors as f64 / k as f64, disclosed: k, errors, remaining })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn rec(slot: u64, bit: bool) -> ConclusiveRecord {
        ConclusiveRecord { slot, bit }
    }

    #[test]
    fn sift_selects_announced_slots() {
        let alice = [false, true, true, false];
        let key = sift(&alice[..], &[rec(3, false), rec(1, true)]).unwrap();
        assert_eq!(key.alice_bits, vec![true, false]);
        assert_eq!(key.bob_bits, vec![true, false]);
        assert_eq!(key.slot_indices, vec![1, 3]);
    }

    #[test]
    fn sift_empty_and_errors() {
        let alice = [false, true];
        assert!(sift(&alice[..], &[]).unwrap().is_empty());
        assert_eq!(sift(&alice[..], &[rec(1, true), rec(1, false)]), Err(ProtocolError::DuplicateSlot(1)));
        assert!(matches!(sift(&alice[..], &[rec(2, true)]), Err(ProtocolError::SlotOutOfRange { .. })));
    }

    #[test]
    fn coincidences_merge_and_discard() {
        let c = resolve_coincidences(vec![rec(5, true), rec(2, false), rec(5, false), rec(2, false), rec(7, true)]);
        assert_eq!(c.records, vec![rec(2, false), rec(7, true)]);
        assert_eq!(c.double_clicks, 1);
    }

    fn key_with(alice: Vec<bool>, bob: Vec<bool>) -> SiftedKey {
        let n = alice.len() as u64;
        SiftedKey { alice_bits: alice, bob_bits: bob, slot_indices: (0..n).collect() }
    }

    #[test]
    fn qber_estimate_extremes() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        let a: Vec<bool> = (0..1000).map(|i| i % 3 == 0).collect();
        let same = estimate_qber(&key_with(a.clone(), a.clone()), 0.2, &mut rng).unwrap();
        assert_eq!(same.qber, 0.0);
        assert_eq!(same.disclosed, 200);
        assert_eq!(same.remaining.len(), 800);
        let flipped: Vec<bool> = a.iter().map(|b| !b).collect();
        assert_eq!(estimate_qber(&key_with(a, flipped), 0.2, &mut rng).unwrap().qber, 1.0);
    }

    #[test]
    fn qber_estimate_errors() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        assert_eq!(estimate_qber(&SiftedKey::default(), 0.2, &mut rng), Err(ProtocolError::EmptyKey));
        let k = key_with(vec![true], vec![true]);
        assert!(estimate_qber(&k, 0.0, &mut rng).is_err());
        assert!(estimate_qber(&k, 1.0, &mut rng).is_err());
    }

    #[test]
    fn qber_estimate_is_unbiased() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(17);
        let n = 10_000;
        let alice: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let bob: Vec<bool> = alice.iter().map(|&b| b ^ (rng.random::<f64>() < 0.05)).collect();
        let key = key_with(alice, bob);
        let true_rate = key.error_rate();
        let est = estimate_qber(&key, 0.2, &mut rng).unwrap();
        let sigma = (0.05f64 * 0.95 / 2000.0).sqrt();
        assert!((est.qber - 0.05).abs() < 3.0 * sigma + (true_rate - 0.05).abs(), "{}", est.qber);
        assert_eq!(est.remaining.len() + est.disclosed, n);
    }
}
