//! Polarization states, weak coherent pulse statistics and the fiber channel.
//!
//! Everything between the transmitter's lasers and the receiver's polarizing
//! beam splitters lives here. All randomness is drawn from a caller-owned
//! stream so the functions can be used from any number of workers.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OpticsError {
    #[error("mean photon number must be finite and positive, got {0}")]
    InvalidMeanPhotonNumber(f64),
    #[error("fiber channel parameter `{field}` out of range: {value}")]
    InvalidChannel { field: &'static str, value: f64 },
}

/// Linear polarization, stored as an angle in degrees normalized into `[0, 180)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polarization {
    angle_deg: f64,
}

impl Polarization {
    pub fn new(angle_deg: f64) -> Self {
        let mut a = angle_deg.rem_euclid(180.0);
        // rem_euclid can round up to the modulus itself for tiny negative inputs
        if a >= 180.0 {
            a = 0.0;
        }
        Self { angle_deg: a }
    }

    pub fn degrees(self) -> f64 {
        self.angle_deg
    }

    pub fn rotated(self, delta_deg: f64) -> Self {
        Self::new(self.angle_deg + delta_deg)
    }

    pub fn orthogonal(self) -> Self {
        self.rotated(90.0)
    }
}

/// One clock slot's attenuated laser pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakPulse {
    pub slot_index: u64,
    pub mean_photon_number: f64,
    pub polarization: Polarization,
}

impl WeakPulse {
    /// Emission time in picoseconds for a transmitter clocked at `clock_ghz`.
    pub fn emission_time_ps(&self, clock_ghz: f64) -> f64 {
        self.slot_index as f64 * slot_period_ps(clock_ghz)
    }
}

/// Clock slot duration in picoseconds.
#[inline]
pub fn slot_period_ps(clock_ghz: f64) -> f64 {
    1000.0 / clock_ghz
}

/// Converts a loss in dB to a power transmission factor.
#[inline]
pub fn db_to_transmission(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberChannel {
    length_km: f64,
    attenuation_db_per_km: f64,
    fixed_insertion_loss_db: f64,
}

impl FiberChannel {
    pub fn new(
        length_km: f64,
        attenuation_db_per_km: f64,
        fixed_insertion_loss_db: f64,
    ) -> Result<Self, OpticsError> {
        if !(length_km.is_finite() && length_km >= 0.0) {
            return Err(OpticsError::InvalidChannel { field: "length_km", value: length_km });
        }
        if !(attenuation_db_per_km.is_finite() && attenuation_db_per_km > 0.0) {
            return Err(OpticsError::InvalidChannel {
                field: "attenuation_db_per_km",
                value: attenuation_db_per_km,
            });
        }
        if !(fixed_insertion_loss_db.is_finite() && fixed_insertion_loss_db >= 0.0) {
            return Err(OpticsError::InvalidChannel {
                field: "fixed_insertion_loss_db",
                value: fixed_insertion_loss_db,
            });
        }
        Ok(Self { length_km, attenuation_db_per_km, fixed_insertion_loss_db })
    }

    pub fn length_km(&self) -> f64 {
        self.length_km
    }

    pub fn total_loss_db(&self) -> f64 {
        self.attenuation_db_per_km * self.length_km + self.fixed_insertion_loss_db
    }

    /// Power transmittance `10^(-(alpha*L + fixed)/10)`.
    pub fn transmittance(&self) -> f64 {
        db_to_transmission(self.total_loss_db())
    }
}

/// Poisson photon-number sampler with the vacuum probability precomputed.
///
/// Uses sequential inverse-CDF search, which costs one uniform draw and one
/// comparison for the overwhelmingly common empty slot at weak-pulse
/// intensities. Large means fall back to `rand_distr`.
#[derive(Debug, Clone)]
pub struct PhotonNumberSampler {
    mu: f64,
    vacuum: f64,
    fallback: Option<Poisson<f64>>,
}

const INVERSE_CDF_LIMIT: f64 = 30.0;

impl PhotonNumberSampler {
    pub fn new(mu: f64) -> Result<Self, OpticsError> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(OpticsError::InvalidMeanPhotonNumber(mu));
        }
        let fallback = if mu > INVERSE_CDF_LIMIT {
            Some(Poisson::new(mu).map_err(|_| OpticsError::InvalidMeanPhotonNumber(mu))?)
        } else {
            None
        };
        Ok(Self { mu, vacuum: (-mu).exp(), fallback })
    }

    pub fn mean(&self) -> f64 {
        self.mu
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if let Some(p) = &self.fallback {
            return p.sample(rng) as u64;
        }
        let u: f64 = rng.random();
        if u < self.vacuum {
            return 0;
        }
        let mut k = 0u64;
        let mut term = self.vacuum;
        let mut cdf = self.vacuum;
        while u >= cdf {
            k += 1;
            term *= self.mu / k as f64;
            cdf += term;
            if term < f64::MIN_POSITIVE {
                break;
            }
        }
        k
    }
}

/// Draws a Poisson(`mu`) photon number.
pub fn sample_photon_number<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> Result<u64, OpticsError> {
    Ok(PhotonNumberSampler::new(mu)?.sample(rng))
}

/// Binomial thinning: each of `photon_count` photons survives independently
/// with probability `survival_prob`.
pub fn attenuate<R: Rng + ?Sized>(photon_count: u64, survival_prob: f64, rng: &mut R) -> u64 {
    debug_assert!((0.0..=1.0).contains(&survival_prob));
    if photon_count == 0 || survival_prob <= 0.0 {
        return 0;
    }
    if survival_prob >= 1.0 {
        return photon_count;
    }
    if photon_count <= 16 {
        (0..photon_count).filter(|_| rng.random::<f64>() < survival_prob).count() as u64
    } else {
        Binomial::new(photon_count, survival_prob)
            .expect("probability checked above")
            .sample(rng)
    }
}

/// Leakage factor of a polarizer with the given extinction ratio.
/// An infinite ratio is a perfect polarizer.
#[inline]
pub fn extinction_leakage(extinction_ratio_db: f64) -> f64 {
    if extinction_ratio_db.is_infinite() {
        0.0
    } else {
        db_to_transmission(extinction_ratio_db)
    }
}

/// Probability that a photon in `state` passes an analyzer at `analyzer_deg`.
///
/// Malus law with finite extinction: `(1-e)cos^2(d) + e sin^2(d)`. The two
/// output ports of a beam splitter (analyzer angles `a` and `a + 90`) sum to
/// exactly one whenever the angle arithmetic is exact, e.g. for angles on a
/// dyadic grid such as whole degrees; otherwise up to the rounding of the
/// input angles.
pub fn malus_pass_probability(state: Polarization, analyzer_deg: f64, extinction_ratio_db: f64) -> f64 {
    let eps = extinction_leakage(extinction_ratio_db);
    let analyzer = Polarization::new(analyzer_deg);
    // fold the relative angle onto [0, 90) and track which half it came from,
    // so that the orthogonal port sees the exact negation of `c`
    let rel = Polarization::new(state.degrees() - analyzer.degrees()).degrees();
    let (folded, flip) = if rel >= 90.0 { (rel - 90.0, true) } else { (rel, false) };
    let cos2x = (2.0 * folded.to_radians()).cos();
    let c = if flip { -cos2x } else { cos2x };
    let k = 0.5 - eps;
    if c >= 0.0 {
        0.5 + k * c
    } else {
        1.0 - (0.5 + k * -c)
    }
}
