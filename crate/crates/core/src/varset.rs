use std::fmt;

/// A set of variable indices, stored as a 64-bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VarSet(u64);

impl VarSet {
    pub const MAX_VARS: usize = 64;

    pub const fn empty() -> Self {
        VarSet(0)
    }

    pub fn singleton(i: usize) -> Self {
        assert!(i < Self::MAX_VARS, "variable index {i} out of range");
        VarSet(1 << i)
    }

    /// All indices in `lo..hi`.
    pub fn range(lo: usize, hi: usize) -> Self {
        (lo..hi).collect()
    }

    pub const fn from_bits(bits: u64) -> Self {
        VarSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < Self::MAX_VARS && self.0 >> i & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        *self = self.with(i);
    }

    pub fn remove(&mut self, i: usize) {
        if i < Self::MAX_VARS {
            self.0 &= !(1 << i);
        }
    }

    pub fn with(self, i: usize) -> Self {
        self.union(Self::singleton(i))
    }

    pub fn without(self, i: usize) -> Self {
        let mut s = self;
        s.remove(i);
        s
    }

    pub const fn union(self, other: Self) -> Self {
        VarSet(self.0 | other.0)
    }

    pub const fn intersection(self, other: Self) -> Self {
        VarSet(self.0 & other.0)
    }

    pub const fn difference(self, other: Self) -> Self {
        VarSet(self.0 & !other.0)
    }

    pub const fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn last(self) -> Option<usize> {
        (self.0 != 0).then(|| 63 - self.0.leading_zeros() as usize)
    }

    /// Indices in ascending order.
    pub fn iter(self) -> VarSetIter {
        VarSetIter(self.0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

pub struct VarSetIter(u64);

impl Iterator for VarSetIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for VarSetIter {}

impl IntoIterator for VarSet {
    type Item = usize;
    type IntoIter = VarSetIter;

    fn into_iter(self) -> VarSetIter {
        self.iter()
    }
}

impl FromIterator<usize> for VarSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = VarSet::empty();
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl<const K: usize> From<[usize; K]> for VarSet {
    fn from(items: [usize; K]) -> Self {
        items.into_iter().collect()
    }
}

impl fmt::Display for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
