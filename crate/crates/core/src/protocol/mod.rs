//! B92 protocol logic.
//!
//! Alice encodes bit 0 and bit 1 as two non-orthogonal linear polarizations.
//! Bob passively splits each photon onto two analyzers, each orthogonal to
//! one of Alice's states; a click behind the analyzer orthogonal to state
//! `1 - c` is a conclusive result for bit `c`. The classical post-processing
//! chain is sifting, sampled QBER estimation, Cascade reconciliation and
//! Toeplitz privacy amplification.

mod bits;
mod cascade;
mod encoding;
mod eve;
mod sifting;
mod toeplitz;

use thiserror::Error;

pub use bits::{BitLookup, PackedBits};
pub use cascade::{cascade_reconcile, cascade_reconcile_with_transcript, ParityDisclosure, ReconciliationReport};
pub use encoding::{alice_encode, bob_measure, route_photon, ConclusiveRecord, EncodingScheme, PhotonAtBob};
pub use eve::{eve_intercept_resend, intercept_pulse, intercept_resend_qber_plateau};
pub use sifting::{estimate_qber, resolve_coincidences, sift, Coincidences, QberEstimate, SiftedKey};
pub use toeplitz::{privacy_amplify, secret_key_length, toeplitz_multiply, SecretKey};

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("cannot encode an empty bit string")]
    EmptyInput,
    #[error("encoding states must be distinct and non-orthogonal")]
    DegenerateScheme,
    #[error("slot {0} appears more than once in the conclusive records")]
    DuplicateSlot(u64),
    #[error("record slot {slot} is outside Alice's {len} transmitted bits")]
    SlotOutOfRange { slot: u64, len: usize },
    #[error("sifted key is empty")]
    EmptyKey,
    #[error("sample fraction must lie strictly between 0 and 1, got {0}")]
    InvalidSampleFraction(f64),
    #[error("key lengths differ: alice {alice}, bob {bob}")]
    LengthMismatch { alice: usize, bob: usize },
    #[error("estimated QBER {0} is at or above 0.5, channel too noisy to reconcile")]
    QberTooHigh(f64),
    #[error("at least one reconciliation pass is required")]
    NoPasses,
    #[error("hash seed has {got} bits, expected {expected}")]
    SeedLength { got: usize, expected: usize },
}
