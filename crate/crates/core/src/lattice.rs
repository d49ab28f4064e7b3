//! Points and unit steps of the integer lattice Z^d.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

/// Inline capacity; higher dimensions spill to the heap.
const INLINE_DIM: usize = 4;

/// A point (or displacement) of Z^d with exact integer coordinates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeVector(SmallVec<[i64; INLINE_DIM]>);

impl LatticeVector {
    pub fn origin(d: usize) -> Self {
        Self(smallvec::smallvec![0; d])
    }

    pub fn from_coords(coords: &[i64]) -> Self {
        Self(SmallVec::from_slice(coords))
    }

    /// The unit step with index `k` in the fixed ordering
    /// `(+e1, -e1, +e2, -e2, ..., +ed, -ed)`.
    pub fn unit(d: usize, k: usize) -> Self {
        let mut v = Self::origin(d);
        v.0[k / 2] = if k.is_multiple_of(2) { 1 } else { -1 };
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// Coordinate along `e_{axis+1}` (zero-based axis).
    #[inline]
    pub fn coord(&self, axis: usize) -> i64 {
        self.0[axis]
    }

    /// First coordinate, `x · e1`.
    #[inline]
    pub fn e1(&self) -> i64 {
        self.0[0]
    }

    /// Moves by the unit step with ordering index `k`.
    #[inline]
    pub fn apply_step(&mut self, k: usize) {
        self.0[k / 2] += if k.is_multiple_of(2) { 1 } else { -1 };
    }

    /// Moves by `sign * e_{axis+1}`.
    #[inline]
    pub fn shift(&mut self, axis: usize, sign: i64) {
        self.0[axis] += sign;
    }

    /// True when exactly one coordinate is nonzero and it equals ±1.
    pub fn is_unit_step(&self) -> bool {
        let mut nonzero = self.0.iter().filter(|&&c| c != 0);
        matches!(nonzero.next(), Some(&c) if c.abs() == 1) && nonzero.next().is_none()
    }

    /// Largest absolute coordinate.
    pub fn sup_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }
}

impl fmt::Debug for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl Add for &LatticeVector {
    type Output = LatticeVector;

    fn add(self, rhs: &LatticeVector) -> LatticeVector {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticeVector(
            self.0
                .iter()
                .zip(rhs.0.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Sub for &LatticeVector {
    type Output = LatticeVector;

    fn sub(self, rhs: &LatticeVector) -> LatticeVector {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticeVector(
            self.0
                .iter()
                .zip(rhs.0.iter())
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}
