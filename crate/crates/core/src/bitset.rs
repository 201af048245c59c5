//! Fixed-size bit vector used for per-job `seen` tracking (1 bit per sample).

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSet {
    words: Vec<u64>,
    len: usize,
    ones: usize,
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        BitSet {
            words: vec![0; len.div_ceil(64)],
            len,
            ones: 0,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        debug_assert!(idx < self.len);
        self.words[idx / 64] & (1u64 << (idx % 64)) != 0
    }

    /// Sets the bit, returning whether it was previously clear.
    #[inline]
    pub fn set(&mut self, idx: usize) -> bool {
        debug_assert!(idx < self.len);
        let word = &mut self.words[idx / 64];
        let mask = 1u64 << (idx % 64);
        let was_clear = *word & mask == 0;
        *word |= mask;
        if was_clear {
            self.ones += 1;
        }
        was_clear
    }

    /// Number of set bits. Maintained incrementally, O(1).
    #[inline]
    pub fn count_ones(&self) -> usize {
        self.ones
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
        self.ones = 0;
    }
}
