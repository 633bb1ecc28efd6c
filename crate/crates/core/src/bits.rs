//! Fixed-width bit chains backing determinant occupancies and sign chains.
//!
//! Bit 0 is the first character of the textual form. Chains up to 128 bits
//! stay inline; wider layouts spill to the heap.

use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitChain {
    width: usize,
    words: SmallVec<[u64; 2]>,
}

impl BitChain {
    pub fn zeros(width: usize) -> Self {
        let nwords = width.div_ceil(WORD).max(1);
        BitChain { width, words: SmallVec::from_elem(0, nwords) }
    }

    pub fn from_positions(width: usize, positions: &[usize]) -> Self {
        let mut b = Self::zeros(width);
        for &p in positions {
            b.set(p);
        }
        b
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize) {
        self.words[i / WORD] |= 1 << (i % WORD);
    }

    #[inline]
    pub fn clear(&mut self, i: usize) {
        self.words[i / WORD] &= !(1 << (i % WORD));
    }

    /// XOR with the chain that has every bit above `i` set, which is the
    /// parity chain of the single-bit chain at `i`.
    #[inline]
    pub fn flip_above(&mut self, i: usize) {
        let w = i / WORD;
        let b = i % WORD;
        if b + 1 < WORD {
            self.words[w] ^= !0u64 << (b + 1);
        }
        for word in self.words[w + 1..].iter_mut() {
            *word ^= !0u64;
        }
        self.mask_tail();
    }

    fn mask_tail(&mut self) {
        let used = self.width % WORD;
        if used != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << used) - 1;
        } else if self.width == 0 {
            self.words[0] = 0;
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Popcount restricted to `range`.
    pub fn count_range(&self, range: std::ops::Range<usize>) -> usize {
        range.filter(|&i| self.get(i)).count()
    }

    pub fn and_is_zero(&self, other: &BitChain) -> bool {
        self.words.iter().zip(other.words.iter()).all(|(a, b)| a & b == 0)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(move |&i| self.get(i))
    }

    /// Parses a string of '0'/'1' characters, bit 0 first.
    pub fn parse(s: &str) -> Option<Self> {
        let mut b = Self::zeros(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => b.set(i),
                _ => return None,
            }
        }
        Some(b)
    }
}

/// Running prefix parity: bit `i` of the result is the parity of the
/// occupied positions strictly below `i`.
pub fn parity_chain(val: &BitChain) -> BitChain {
    let mut out = BitChain::zeros(val.width);
    let mut carry = 0u64;
    for (w, &word) in val.words.iter().enumerate() {
        // prefix xor inside the word, then shift by one so bit i sees bits < i
        let mut x = word;
        x ^= x << 1;
        x ^= x << 2;
        x ^= x << 4;
        x ^= x << 8;
        x ^= x << 16;
        x ^= x << 32;
        let exclusive = (x << 1) ^ if carry == 1 { !0u64 } else { 0 };
        out.words[w] = exclusive;
        carry ^= (word.count_ones() & 1) as u64;
    }
    out.mask_tail();
    out
}

impl fmt::Display for BitChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.width {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitChain({self})")
    }
}

/// Lexicographic order of the textual form (bit 0 compared first, '0' < '1').
impl Ord for BitChain {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.words.iter().zip(other.words.iter()) {
            let diff = a ^ b;
            if diff != 0 {
                let low = diff.trailing_zeros();
                return if (a >> low) & 1 == 0 { Ordering::Less } else { Ordering::Greater };
            }
        }
        self.width.cmp(&other.width)
    }
}

impl PartialOrd for BitChain {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
