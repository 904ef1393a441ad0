//! Packed bit masks recording which data points a candidate cluster covers.
//!
//! Intersection, union and popcount on these masks dominate the search, so
//! they are stored as `u64` blocks rather than `Vec<bool>`.

/// Membership mask over the `n` data points of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoverageMask {
    blocks: Vec<u64>,
    len: usize,
}

impl CoverageMask {
    /// All-zero mask over `len` points.
    pub fn empty(len: usize) -> Self {
        Self {
            blocks: vec![0; len.div_ceil(64)],
            len,
        }
    }

    /// All-one mask over `len` points.
    pub fn full(len: usize) -> Self {
        let mut mask = Self::empty(len);
        for i in 0..len {
            mask.set(i);
        }
        mask
    }

    /// Build a mask from the point indices that satisfy `pred`.
    pub fn from_pred(len: usize, mut pred: impl FnMut(usize) -> bool) -> Self {
        let mut mask = Self::empty(len);
        for i in 0..len {
            if pred(i) {
                mask.set(i);
            }
        }
        mask
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.iter().all(|&b| b == 0)
    }

    pub fn set(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.blocks[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.blocks[i / 64] & (1 << (i % 64)) != 0
    }

    /// Number of covered points.
    pub fn count(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.blocks
            .iter()
            .zip(&other.blocks)
            .all(|(a, b)| a & b == 0)
    }

    /// True when every bit of `self` is also set in `other`.
    pub fn is_subset(&self, other: &Self) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.blocks
            .iter()
            .zip(&other.blocks)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len, other.len);
        Self {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a & b)
                .collect(),
            len: self.len,
        }
    }

    pub fn union_with(&mut self, other: &Self) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a |= b;
        }
    }

    /// Clear every bit that is set in `other`.
    pub fn subtract(&mut self, other: &Self) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a &= !b;
        }
    }

    /// Count of points in `self` but not in `other`.
    pub fn count_minus(&self, other: &Self) -> usize {
        debug_assert_eq!(self.len, other.len);
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (a & !b).count_ones() as usize)
            .sum()
    }

    /// Indices of the covered points, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().enumerate().flat_map(|(w, &block)| {
            let mut bits = block;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + tz)
            })
        })
    }

    /// Lowest covered index, if any.
    pub fn first_one(&self) -> Option<usize> {
        self.blocks.iter().enumerate().find_map(|(w, &b)| {
            if b != 0 {
                Some(w * 64 + b.trailing_zeros() as usize)
            } else {
                None
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_contains_count() {
        let mut m = CoverageMask::empty(130);
        assert!(m.is_empty());
        m.set(0);
        m.set(63);
        m.set(64);
        m.set(129);
        assert_eq!(m.count(), 4);
        assert!(m.contains(63) && m.contains(64));
        assert!(!m.contains(1));
        assert_eq!(m.ones().collect::<Vec<_>>(), vec![0, 63, 64, 129]);
    }

    #[test]
    fn disjoint_and_union() {
        let a = CoverageMask::from_pred(100, |i| i % 2 == 0);
        let b = CoverageMask::from_pred(100, |i| i % 2 == 1);
        assert!(a.is_disjoint(&b));
        assert!(!a.is_disjoint(&a));
        let mut u = a.clone();
        u.union_with(&b);
        assert_eq!(u.count(), 100);
        assert_eq!(u, CoverageMask::full(100));
    }

    #[test]
    fn intersect_subtract() {
        let a = CoverageMask::from_pred(70, |i| i < 40);
        let b = CoverageMask::from_pred(70, |i| i >= 30);
        assert_eq!(a.intersect(&b).ones().collect::<Vec<_>>(), (30..40).collect::<Vec<_>>());
        assert_eq!(a.count_minus(&b), 30);
        let mut c = a.clone();
        c.subtract(&b);
        assert_eq!(c.count(), 30);
        assert_eq!(c.first_one(), Some(0));
    }
}
