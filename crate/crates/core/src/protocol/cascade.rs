//! Cascade-style interactive reconciliation.
//!
//! Pass 1 splits the key into blocks of `round(0.73 / qber)` bits in natural
//! order; every later pass doubles the block size and uses a fresh shared
//! random permutation. Alice discloses the parity of every top-level block.
//! A block whose parities disagree is bisected, Alice disclosing the parity
//! of the first half at each step, until the single flipped bit is found.
//! Each correction flips the parity of the block holding that bit in every
//! earlier pass, which may expose further errors there; those blocks are
//! searched again without any new top-level disclosure. A re-search
//! retraces the earlier split points, and any half whose Alice parity was
//! already public is reused instead of being disclosed again.

use std::collections::{HashMap, VecDeque};
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::Rng;

use super::ProtocolError;

/// Pass-1 block size constant, `k1 = 0.73 / qber`.
const FIRST_BLOCK_CONSTANT: f64 = 0.73;

#[derive(Debug, Clone, PartialEq)]
pub struct ReconciliationReport {
    pub corrected_bob_bits: Vec<bool>,
    pub leaked_bits: u64,
    pub passes: u32,
    /// Whole-key parity still differs after the last pass. Alice's total
    /// parity is the XOR of her pass-1 block parities, so this check
    /// discloses nothing new.
    pub residual_error_detected: bool,
}

/// One publicly exchanged parity. Sub-block parities from a bisection are
/// logged under the top-level block being searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParityDisclosure {
    pub pass: u32,
    pub block_index: usize,
    pub parity_alice: bool,
    pub parity_bob: bool,
}

impl ParityDisclosure {
    /// Line-oriented transcript: `pass,block_index,parity_alice,parity_bob`.
    pub fn write_transcript<W: Write>(records: &[ParityDisclosure], mut w: W) -> io::Result<()> {
        writeln!(w, "pass,block_index,parity_alice,parity_bob")?;
        for r in records {
            writeln!(w, "{},{},{},{}", r.pass, r.block_index, r.parity_alice as u8, r.parity_bob as u8)?;
        }
        Ok(())
    }
}

struct PassLayout {
    order: Vec<usize>,
    position: Vec<usize>,
    block_size: usize,
    alice_parity: Vec<bool>,
    bob_parity: Vec<bool>,
}

impl PassLayout {
    fn block_of(&self, bit: usize) -> usize {
        self.position[bit] / self.block_size
    }

    fn block_range(&self, block: usize) -> std::ops::Range<usize> {
        let start = block * self.block_size;
        start..(start + self.block_size).min(self.order.len())
    }
}

struct Session<'a> {
    alice: &'a [bool],
    bob: Vec<bool>,
    layouts: Vec<PassLayout>,
    leaked: u64,
    transcript: Option<Vec<ParityDisclosure>>,
    /// Alice parities already disclosed, keyed by (pass, start, end) of a
    /// range in that pass's order.
    known: HashMap<(usize, usize, usize), bool>,
}

impl Session<'_> {
    fn disclose(&mut self, pass: usize, block: usize, pa: bool, pb: bool) {
        self.leaked += 1;
        if let Some(t) = self.transcript.as_mut() {
            t.push(ParityDisclosure { pass: pass as u32 + 1, block_index: block, parity_alice: pa, parity_bob: pb });
        }
    }

    fn parities(&self, positions: &[usize]) -> (bool, bool) {
        positions.iter().fold((false, false), |(a, b), &i| (a ^ self.alice[i], b ^ self.bob[i]))
    }

    /// Bisects a block known to hold an odd number of errors.
    fn locate_error(&mut self, pass: usize, block: usize) -> usize {
        let range = self.layouts[pass].block_range(block);
        let mut lo = range.start;
        let mut hi = range.end;
        while hi - lo > 1 {
            let mid = lo + (hi - lo).div_ceil(2);
            let (pa, pb) = {
                let order = &self.layouts[pass].order;
                self.parities(&order[lo..mid])
            };
            if self.known.insert((pass, lo, mid), pa).is_none() {
                self.disclose(pass, block, pa, pb);
            }
            if pa != pb {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        self.layouts[pass].order[lo]
    }

    fn run_pass(&mut self, pass: usize, queue: &mut VecDeque<(usize, usize)>) {
        let nblocks = self.layouts[pass].alice_parity.len();
        for b in 0..nblocks {
            let (pa, pb) = {
                let layout = &self.layouts[pass];
                self.parities(&layout.order[layout.block_range(b)])
            };
            self.layouts[pass].alice_parity[b] = pa;
            self.layouts[pass].bob_parity[b] = pb;
            self.disclose(pass, b, pa, pb);
            if pa != pb {
                queue.push_back((pass, b));
            }
        }
        while let Some((p, b)) = queue.pop_front() {
            let layout = &self.layouts[p];
            if layout.alice_parity[b] == layout.bob_parity[b] {
                continue;
            }
            let bit = self.locate_error(p, b);
            self.bob[bit] = !self.bob[bit];
            for (q, layout) in self.layouts.iter_mut().enumerate() {
                let blk = layout.block_of(bit);
                layout.bob_parity[blk] = !layout.bob_parity[blk];
                if layout.bob_parity[blk] != layout.alice_parity[blk] {
                    queue.push_back((q, blk));
                }
            }
        }
    }
}

fn first_block_size(n: usize, qber_estimate: f64) -> usize {
    if qber_estimate <= 0.0 {
        return n.max(1);
    }
    ((FIRST_BLOCK_CONSTANT / qber_estimate).round() as usize).clamp(1, n.max(1))
}

fn reconcile<R: Rng + ?Sized>(
    alice_bits: &[bool],
    bob_bits: &[bool],
    qber_estimate: f64,
    passes: u32,
    rng: &mut R,
    keep_transcript: bool,
) -> Result<(ReconciliationReport, Vec<ParityDisclosure>), ProtocolError> {
    if alice_bits.len() != bob_bits.len() {
        return Err(ProtocolError::LengthMismatch { alice: alice_bits.len(), bob: bob_bits.len() });
    }
    if !(qber_estimate < 0.5) {
        return Err(ProtocolError::QberTooHigh(qber_estimate));
    }
    if passes == 0 {
        return Err(ProtocolError::NoPasses);
    }
    let n = alice_bits.len();
    let mut session = Session {
        alice: alice_bits,
        bob: bob_bits.to_vec(),
        layouts: Vec::with_capacity(passes as usize),
        leaked: 0,
        transcript: keep_transcript.then(Vec::new),
        known: HashMap::new(),
    };
    if n > 0 {
        let k1 = first_block_size(n, qber_estimate);
        let mut queue = VecDeque::new();
        for pass in 0..passes as usize {
            let block_size = k1.saturating_mul(1usize << pass.min(63)).min(n);
            let mut order: Vec<usize> = (0..n).collect();
            if pass > 0 {
                order.shuffle(rng);
            }
            let mut position = vec![0; n];
            for (pos, &bit) in order.iter().enumerate() {
                position[bit] = pos;
            }
            let nblocks = n.div_ceil(block_size);
            session.layouts.push(PassLayout {
                order,
                position,
                block_size,
                alice_parity: vec![false; nblocks],
                bob_parity: vec![false; nblocks],
            });
            session.run_pass(pass, &mut queue);
        }
    }
    let alice_total = session
        .layouts
        .first()
        .map_or(false, |l| l.alice_parity.iter().fold(false, |acc, &p| acc ^ p));
    let bob_total = session.bob.iter().fold(false, |acc, &b| acc ^ b);
    let report = ReconciliationReport {
        corrected_bob_bits: session.bob,
        leaked_bits: session.leaked,
        passes,
        residual_error_detected: n > 0 && alice_total != bob_total,
    };
    Ok((report, session.transcript.unwrap_or_default()))
}

pub fn cascade_reconcile<R: Rng + ?Sized>(
    alice_bits: &[bool],
    bob_bits: &[bool],
    qber_estimate: f64,
    passes: u32,
    rng: &mut R,
) -> Result<ReconciliationReport, ProtocolError> {
    reconcile(alice_bits, bob_bits, qber_estimate, passes, rng, false).map(|(r, _)| r)
}

/// Same as [`cascade_reconcile`] but also returns every disclosed parity.
pub fn cascade_reconcile_with_transcript<R: Rng + ?Sized>(
    alice_bits: &[bool],
    bob_bits: &[bool],
    qber_estimate: f64,
    passes: u32,
    rng: &mut R,
) -> Result<(ReconciliationReport, Vec<ParityDisclosure>), ProtocolError> {
    reconcile(alice_bits, bob_bits, qber_estimate, passes, rng, true)
}
