//! Intercept-resend eavesdropper using her own copy of Bob's receiver.

use rand::Rng;

use super::{route_photon, EncodingScheme};
use crate::optics::{Polarization, WeakPulse};

/// Eve measures one pulse with ideal B92 optics and returns the state she
/// resends: the state matching a conclusive result, otherwise the state of
/// a random guess.
#[inline]
pub fn intercept_pulse<R: Rng + ?Sized>(polarization: Polarization, scheme: &EncodingScheme, rng: &mut R) -> Polarization {
    match route_photon(polarization, scheme, f64::INFINITY, rng) {
        Some(bit) => scheme.state(bit),
        None => scheme.state(rng.random()),
    }
}

/// Intercepts each pulse independently with probability
/// `interception_fraction`. Resent pulses keep their slot and mean photon
/// number.
pub fn eve_intercept_resend<R: Rng + ?Sized>(
    pulses: &[WeakPulse],
    scheme: &EncodingScheme,
    interception_fraction: f64,
    rng: &mut R,
) -> Vec<WeakPulse> {
    pulses
        .iter()
        .map(|p| {
            if interception_fraction > 0.0 && rng.random::<f64>() < interception_fraction {
                WeakPulse { polarization: intercept_pulse(p.polarization, scheme, rng), ..*p }
            } else {
                *p
            }
        })
        .collect()
}

/// Probability that an intercepted pulse is resent in the wrong state,
/// `P(inconclusive) * P(wrong guess)`. For the default scheme this is
/// `3/4 * 1/2`.
pub fn intercept_resend_qber_plateau(scheme: &EncodingScheme) -> f64 {
    let conclusive = scheme.click_probability(scheme.state0, false, f64::INFINITY)
        + scheme.click_probability(scheme.state0, true, f64::INFINITY);
    0.5 * (1.0 - conclusive)
}
