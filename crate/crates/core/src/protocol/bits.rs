/// Random-access view of a bit string.
pub trait BitLookup {
    fn bit_len(&self) -> usize;
    fn bit(&self, i: usize) -> bool;
}

impl BitLookup for [bool] {
    fn bit_len(&self) -> usize {
        self.len()
    }

    fn bit(&self, i: usize) -> bool {
        self[i]
    }
}

impl BitLookup for Vec<bool> {
    fn bit_len(&self) -> usize {
        self.len()
    }

    fn bit(&self, i: usize) -> bool {
        self[i]
    }
}

/// Bits packed least-significant first into 64-bit words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PackedBits {
    words: Vec<u64>,
    len: usize,
}

impl PackedBits {
    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        assert!(len <= words.len() * 64);
        let mut p = Self { words, len };
        p.words.truncate(len.div_ceil(64));
        p.clear_tail();
        p
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            words[i / 64] |= (b as u64) << (i % 64);
        }
        Self { words, len: bits.len() }
    }

    /// Packs bits in reverse order.
    pub fn from_bools_reversed(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().rev().enumerate() {
            words[i / 64] |= (b as u64) << (i % 64);
        }
        Self { words, len: bits.len() }
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(w) = self.words.last_mut() {
                *w &= (1u64 << r) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    /// 64 bits starting at bit `start`, zero-filled past the end.
    #[inline]
    pub fn window(&self, start: usize) -> u64 {
        let w = start / 64;
        let r = start % 64;
        let lo = self.words.get(w).copied().unwrap_or(0);
        if r == 0 {
            lo
        } else {
            let hi = self.words.get(w + 1).copied().unwrap_or(0);
            (lo >> r) | (hi << (64 - r))
        }
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }
}

impl BitLookup for PackedBits {
    fn bit_len(&self) -> usize {
        self.len
    }

    fn bit(&self, i: usize) -> bool {
        self.get(i)
    }
}
