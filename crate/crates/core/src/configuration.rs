//! Particle configurations on `{0, ..., L}` with frozen endpoints.
//!
//! The occupied sites are stored in a 64-ary bit tree: level 0 holds one
//! bit per site and every higher level holds one bit per nonempty word of
//! the level below. Predecessor and successor queries walk at most
//! `2 * depth` words, i.e. `O(log_64 L)`, no matter how large the gaps are.

use std::fmt;

use crate::error::{contract, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    len: usize,
    levels: Vec<Vec<u64>>,
    count: usize,
}

impl Configuration {
    /// The minimal configuration: only the frozen endpoints `0` and `len`.
    pub fn empty(len: usize) -> Self {
        assert!(len >= 1, "system length must be at least 1");
        let mut levels = Vec::new();
        let mut n = len + 1;
        loop {
            let words = n.div_ceil(64);
            levels.push(vec![0u64; words]);
            if words == 1 {
                break;
            }
            n = words;
        }
        let mut cfg = Self { len, levels, count: 0 };
        cfg.raw_insert(0);
        cfg.raw_insert(len);
        cfg
    }

    /// The maximal configuration: every site occupied.
    pub fn full(len: usize) -> Self {
        let mut cfg = Self::empty(len);
        for x in 1..len {
            cfg.raw_insert(x);
        }
        cfg
    }

    /// Builds from interior sites in any order.
    pub fn from_sites(len: usize, sites: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut cfg = Self::empty(len);
        for x in sites {
            if x > len {
                return contract(format!("site {x} outside [0, {len}]"));
            }
            cfg.raw_insert(x);
        }
        Ok(cfg)
    }

    /// Builds from a bit mask whose bit `x - 1` is site `x`, for `len <= 64`.
    pub fn from_mask(len: usize, mask: u64) -> Self {
        debug_assert!(len <= 64);
        let mut cfg = Self::empty(len);
        let mut m = mask;
        while m != 0 {
            let b = m.trailing_zeros() as usize;
            cfg.raw_insert(b + 1);
            m &= m - 1;
        }
        cfg
    }

    /// Interior occupation as a bit mask (bit `x - 1` is site `x`), `len <= 64`.
    pub fn interior_mask(&self) -> u64 {
        debug_assert!(self.len <= 64);
        self.interior().fold(0u64, |m, x| m | (1u64 << (x - 1)))
    }

    /// System length `L`.
    pub fn len(&self) -> usize {
        self.len
    }

    /// Number of interior particles `n(eta)`.
    pub fn particle_count(&self) -> usize {
        self.count - 2
    }

    pub fn contains(&self, x: usize) -> bool {
        x <= self.len && self.levels[0][x >> 6] >> (x & 63) & 1 == 1
    }

    fn raw_insert(&mut self, x: usize) {
        if self.contains(x) {
            return;
        }
        self.count += 1;
        let mut i = x;
        for level in self.levels.iter_mut() {
            let was_empty = level[i >> 6] == 0;
            level[i >> 6] |= 1u64 << (i & 63);
            if !was_empty {
                break;
            }
            i >>= 6;
        }
    }

    fn raw_remove(&mut self, x: usize) {
        if !self.contains(x) {
            return;
        }
        self.count -= 1;
        let mut i = x;
        for level in self.levels.iter_mut() {
            level[i >> 6] &= !(1u64 << (i & 63));
            if level[i >> 6] != 0 {
                break;
            }
            i >>= 6;
        }
    }

    /// Sets the occupation of interior site `x`; returns whether it changed.
    pub fn set(&mut self, x: usize, occupied: bool) -> bool {
        debug_assert!(x > 0 && x < self.len, "endpoint {x} is frozen");
        let before = self.contains(x);
        if occupied {
            self.raw_insert(x);
        } else {
            self.raw_remove(x);
        }
        before != occupied
    }

    pub fn insert(&mut self, x: usize) -> Result<bool> {
        self.check_interior(x)?;
        Ok(self.set(x, true))
    }

    pub fn remove(&mut self, x: usize) -> Result<bool> {
        self.check_interior(x)?;
        Ok(self.set(x, false))
    }

    fn check_interior(&self, x: usize) -> Result<()> {
        if x == 0 || x >= self.len {
            contract(format!("site {x} is not an interior site of [0, {}]", self.len))
        } else {
            Ok(())
        }
    }

    /// Smallest occupied site `>= x`.
    fn next_at_or_after(&self, x: usize) -> Option<usize> {
        if x > self.len {
            return None;
        }
        let mut i = x;
        let mut depth = 0;
        // Climb until a word has a set bit at or after the current position.
        loop {
            if depth == self.levels.len() {
                return None;
            }
            let word = self.levels[depth].get(i >> 6).copied().unwrap_or(0);
            let masked = word & (!0u64 << (i & 63));
            if masked != 0 {
                i = (i & !63) | masked.trailing_zeros() as usize;
                break;
            }
            i = (i >> 6) + 1;
            depth += 1;
            if i >> 6 >= self.levels.get(depth).map_or(0, |l| l.len()) && depth < self.levels.len() {
                return None;
            }
        }
        // Descend to level 0 following lowest set bits.
        while depth > 0 {
            depth -= 1;
            let word = self.levels[depth][i];
            i = (i << 6) | word.trailing_zeros() as usize;
        }
        Some(i)
    }

    /// Largest occupied site `<= x`.
    fn prev_at_or_before(&self, x: usize) -> Option<usize> {
        let mut i = x.min(self.len) as isize;
        let mut depth = 0;
        loop {
            if i < 0 || depth == self.levels.len() {
                return None;
            }
            let iu = i as usize;
            let word = self.levels[depth][iu >> 6];
            let shift = 63 - (iu & 63);
            let masked = word << shift;
            if masked != 0 {
                i = (iu as isize) - masked.leading_zeros() as isize;
                break;
            }
            i = (iu >> 6) as isize - 1;
            depth += 1;
        }
        let mut iu = i as usize;
        while depth > 0 {
            depth -= 1;
            let word = self.levels[depth][iu];
            iu = (iu << 6) | (63 - word.leading_zeros() as usize);
        }
        Some(iu)
    }

    /// Nearest particle strictly left of `x` (always exists for `x > 0`).
    pub fn predecessor(&self, x: usize) -> usize {
        debug_assert!(x > 0);
        self.prev_at_or_before(x - 1).expect("site 0 is always occupied")
    }

    /// Nearest particle strictly right of `x` (always exists for `x < L`).
    pub fn successor(&self, x: usize) -> usize {
        debug_assert!(x < self.len);
        self.next_at_or_after(x + 1).expect("site L is always occupied")
    }

    /// Largest occupied site `<= x`.
    pub fn last_at_or_before(&self, x: usize) -> usize {
        self.prev_at_or_before(x).expect("site 0 is always occupied")
    }

    /// Smallest occupied site `>= x`.
    pub fn first_at_or_after(&self, x: usize) -> usize {
        self.next_at_or_after(x.min(self.len)).expect("site L is always occupied")
    }

    /// All occupied sites in increasing order, endpoints included.
    pub fn sites(&self) -> Sites<'_> {
        Sites { cfg: self, next: Some(0) }
    }

    /// Interior particles in increasing order.
    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        let len = self.len;
        self.sites().filter(move |&x| x != 0 && x != len)
    }

    /// Gap lengths between consecutive particles.
    pub fn gaps(&self) -> impl Iterator<Item = usize> + '_ {
        let mut prev = None;
        self.sites().filter_map(move |x| {
            let g = prev.map(|p| x - p);
            prev = Some(x);
            g
        })
    }

    /// Componentwise order `self <= other`.
    pub fn is_below(&self, other: &Configuration) -> bool {
        self.len == other.len && self.levels[0].iter().zip(&other.levels[0]).all(|(a, b)| a & !b == 0)
    }

    /// Number of sites where the two configurations differ.
    pub fn hamming(&self, other: &Configuration) -> usize {
        self.levels[0].iter().zip(&other.levels[0]).map(|(a, b)| (a ^ b).count_ones() as usize).sum()
    }

    /// Copies the occupation of `other` on the inclusive site range into `self`.
    pub fn copy_range_from(&mut self, other: &Configuration, lo: usize, hi: usize) {
        for x in lo.max(1)..=hi.min(self.len - 1) {
            self.set(x, other.contains(x));
        }
    }

    /// Run-length encoding of the interior occupation, e.g. `0x3;1x1;0x5`.
    pub fn run_length(&self) -> String {
        let mut out = Vec::new();
        let mut x = 1;
        while x < self.len {
            let occ = self.contains(x);
            let end = if occ {
                let mut e = x;
                while e + 1 < self.len && self.contains(e + 1) {
                    e += 1;
                }
                e
            } else {
                (self.successor(x)).min(self.len) - 1
            };
            out.push(format!("{}x{}", u8::from(occ), end - x + 1));
            x = end + 1;
        }
        out.join(";")
    }
}

pub struct Sites<'a> {
    cfg: &'a Configuration,
    next: Option<usize>,
}

impl Iterator for Sites<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let x = self.next?;
        let found = self.cfg.next_at_or_after(x)?;
        self.next = (found < self.cfg.len).then_some(found + 1);
        Some(found)
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Configuration")
            .field("len", &self.len)
            .field("sites", &self.sites().collect::<Vec<_>>())
            .finish()
    }
}
