use rand::Rng;

use super::ProtocolError;
use crate::optics::{malus_pass_probability, Polarization, WeakPulse};

/// Alice's two signal states and Bob's two analyzers.
///
/// The analyzer for bit `c` is orthogonal to Alice's state for bit `1 - c`,
/// so a photon can only pass it if Alice did not send `1 - c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingScheme {
    pub state0: Polarization,
    pub state1: Polarization,
    pub analyzer_for_bit0: Polarization,
    pub analyzer_for_bit1: Polarization,
}

impl Default for EncodingScheme {
    /// 0 deg for bit 0, 45 deg for bit 1.
    fn default() -> Self {
        Self::from_states(Polarization::new(0.0), Polarization::new(45.0))
            .expect("45 degree states are valid")
    }
}

impl EncodingScheme {
    pub fn from_states(state0: Polarization, state1: Polarization) -> Result<Self, ProtocolError> {
        let rel = Polarization::new(state1.degrees() - state0.degrees()).degrees();
        if rel == 0.0 || rel == 90.0 {
            return Err(ProtocolError::DegenerateScheme);
        }
        Ok(Self {
            state0,
            state1,
            analyzer_for_bit0: state1.orthogonal(),
            analyzer_for_bit1: state0.orthogonal(),
        })
    }

    #[inline]
    pub fn state(&self, bit: bool) -> Polarization {
        if bit {
            self.state1
        } else {
            self.state0
        }
    }

    #[inline]
    pub fn analyzer(&self, bit: bool) -> Polarization {
        if bit {
            self.analyzer_for_bit1
        } else {
            self.analyzer_for_bit0
        }
    }

    /// Probability that one photon in `state` clicks behind the analyzer for
    /// `bit`, including the passive 50/50 split.
    pub fn click_probability(&self, state: Polarization, bit: bool, extinction_ratio_db: f64) -> f64 {
        0.5 * malus_pass_probability(state, self.analyzer(bit).degrees(), extinction_ratio_db)
    }
}

/// One pulse per slot, slot `i` carrying `bits[i]`.
pub fn alice_encode(bits: &[bool], mu: f64, scheme: &EncodingScheme) -> Result<Vec<WeakPulse>, ProtocolError> {
    if bits.is_empty() {
        return Err(ProtocolError::EmptyInput);
    }
    Ok(bits
        .iter()
        .enumerate()
        .map(|(i, &b)| WeakPulse { slot_index: i as u64, mean_photon_number: mu, polarization: scheme.state(b) })
        .collect())
}

/// Sends one photon through Bob's passive receiver. Returns the bit whose
/// analyzer it passed, or `None` for an inconclusive (absorbed) photon.
#[inline]
pub fn route_photon<R: Rng + ?Sized>(
    polarization: Polarization,
    scheme: &EncodingScheme,
    extinction_ratio_db: f64,
    rng: &mut R,
) -> Option<bool> {
    let branch: bool = rng.random();
    let p = malus_pass_probability(polarization, scheme.analyzer(branch).degrees(), extinction_ratio_db);
    (rng.random::<f64>() < p).then_some(branch)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonAtBob {
    pub slot: u64,
    pub polarization: Polarization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ConclusiveRecord {
    pub slot: u64,
    pub bit: bool,
}

/// Measures each photon independently; a slot with several photons can
/// yield several records.
pub fn bob_measure<R: Rng + ?Sized>(
    photons: &[PhotonAtBob],
    scheme: &EncodingScheme,
    extinction_ratio_db: f64,
    rng: &mut R,
) -> Vec<ConclusiveRecord> {
    photons
        .iter()
        .filter_map(|p| {
            route_photon(p.polarization, scheme, extinction_ratio_db, rng).map(|bit| ConclusiveRecord { slot: p.slot, bit })
        })
        .collect()
}
