//! Permutations of `{0, .., n-1}` and their permutation matrices.
//!
//! # Matrix convention
//!
//! A permutation `σ` is identified with the matrix `π(σ)` whose entry
//! `(i, j)` is one exactly when `σ(j) = i`. Consequently
//!
//! * `π(σ) x` moves coordinate `j` of `x` to position `σ(j)`, i.e.
//!   `(π(σ) x)[σ(j)] = x[j]`;
//! * `π(ρ ∘ σ) = π(ρ) π(σ)`, so composition is a group homomorphism into
//!   the orthogonal group;
//! * `π(σ)^T = π(σ^{-1})`.
//!
//! Every equivariance statement in this crate (for example
//! `round(ρU, x) = ρ ∘ round(U, x)`) depends on this choice.
//!
//! Internally images are zero-based. Text forms (`Display`, `FromStr`, file
//! I/O) use one-based images, so the transposition of the first two points on
//! three letters prints as `2 1 3`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::gaussian::RandomStream;
use crate::matrix::SquareMatrix;

/// A bijection of `{0, .., n-1}` stored as its image array.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    /// Builds a permutation from zero-based images, `image[j] = σ(j)`.
    pub fn new(image: Vec<usize>) -> Result<Self> {
        if image.is_empty() {
            return Err(Error::InvalidPermutation("empty image".into()));
        }
        let n = image.len();
        let mut seen = vec![false; n];
        for &v in &image {
            if v >= n {
                return Err(Error::InvalidPermutation(format!(
                    "image value {v} out of range for n = {n}"
                )));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidPermutation(format!(
                    "image value {v} repeated"
                )));
            }
        }
        Ok(Self { image })
    }

    /// Builds a permutation from one-based images.
    pub fn from_one_based(image: &[usize]) -> Result<Self> {
        let zero = image
            .iter()
            .map(|&v| {
                v.checked_sub(1).ok_or_else(|| {
                    Error::InvalidPermutation("one-based image contains 0".into())
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero)
    }

    /// Trusted constructor for images produced by sorting.
    pub(crate) fn from_image_unchecked(image: Vec<usize>) -> Self {
        debug_assert!(Self::new(image.clone()).is_ok());
        Self { image }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            image: (0..n).collect(),
        }
    }

    /// The transposition exchanging the zero-based points `a` and `b`.
    pub fn transposition(n: usize, a: usize, b: usize) -> Result<Self> {
        if a >= n || b >= n {
            return Err(Error::InvalidPermutation(format!(
                "transposition ({a} {b}) out of range for n = {n}"
            )));
        }
        let mut image: Vec<usize> = (0..n).collect();
        image.swap(a, b);
        Ok(Self { image })
    }

    /// Uniformly random permutation (Fisher-Yates).
    pub fn random(n: usize, stream: &mut RandomStream) -> Self {
        let mut image: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = stream.next_index(i + 1);
            image.swap(i, j);
        }
        Self { image }
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    /// Zero-based images.
    pub fn image(&self) -> &[usize] {
        &self.image
    }

    /// One-based images, as used in text formats.
    pub fn one_based(&self) -> Vec<usize> {
        self.image.iter().map(|&v| v + 1).collect()
    }

    /// `σ(j)` for zero-based `j`.
    pub fn at(&self, j: usize) -> usize {
        self.image[j]
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(j, &v)| j == v)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (j, &v) in self.image.iter().enumerate() {
            inv[v] = j;
        }
        Self { image: inv }
    }

    /// `self ∘ other`, i.e. `j ↦ self(other(j))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(Self {
            image: other.image.iter().map(|&v| self.image[v]).collect(),
        })
    }

    /// `π(σ) x`: the result satisfies `result[σ(j)] = x[j]`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: x.len(),
            });
        }
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (j, &v) in self.image.iter().enumerate() {
            out[v] = x[j];
        }
    }

    /// The permutation matrix `π(σ)` with `π_{ij} = 1` iff `σ(j) = i`.
    pub fn to_matrix(&self) -> SquareMatrix {
        let n = self.len();
        let mut m = SquareMatrix::zeros(n);
        for (j, &i) in self.image.iter().enumerate() {
            m[(i, j)] = 1.0;
        }
        m
    }

    /// Recovers the permutation from a 0/1 permutation matrix.
    pub fn from_matrix(m: &SquareMatrix) -> Result<Self> {
        let n = m.n();
        let mut image = vec![usize::MAX; n];
        for j in 0..n {
            for i in 0..n {
                let v = m[(i, j)];
                if v == 1.0 {
                    if image[j] != usize::MAX {
                        return Err(Error::InvalidPermutation(format!(
                            "column {j} has more than one unit entry"
                        )));
                    }
                    image[j] = i;
                } else if v != 0.0 {
                    return Err(Error::InvalidPermutation(format!(
                        "entry ({i}, {j}) = {v} is not 0 or 1"
                    )));
                }
            }
        }
        if image.contains(&usize::MAX) {
            return Err(Error::InvalidPermutation("column without a unit entry".into()));
        }
        Self::new(image)
    }

    /// Cycle lengths, in order of their smallest element.
    pub fn cycle_lengths(&self) -> Vec<usize> {
        let n = self.len();
        let mut visited = vec![false; n];
        let mut lengths = Vec::new();
        for start in 0..n {
            if visited[start] {
                continue;
            }
            let mut len = 0;
            let mut j = start;
            while !visited[j] {
                visited[j] = true;
                j = self.image[j];
                len += 1;
            }
            lengths.push(len);
        }
        lengths
    }

    pub fn is_involution(&self) -> bool {
        self.image.iter().enumerate().all(|(j, &v)| self.image[v] == j)
    }

    /// All `n!` permutations in lexicographic order of their images.
    pub fn all(n: usize) -> AllPermutations {
        AllPermutations {
            next: Some((0..n).collect()),
        }
    }
}

/// Iterator over all permutations of a fixed size, see [`Permutation::all`].
pub struct AllPermutations {
    next: Option<Vec<usize>>,
}

impl Iterator for AllPermutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        // next lexicographic arrangement
        if let Some(i) = (0..succ.len().saturating_sub(1))
            .rev()
            .find(|&i| succ[i] < succ[i + 1])
        {
            let j = (i + 1..succ.len()).rev().find(|&j| succ[j] > succ[i]).unwrap();
            succ.swap(i, j);
            succ[i + 1..].reverse();
            self.next = Some(succ);
        }
        Some(Permutation { image: current })
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation[{self}]")
    }
}

/// One-line notation with one-based images, e.g. `2 1 3`.
impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.image.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", v + 1)?;
        }
        Ok(())
    }
}

impl FromStr for Permutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let image = s
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("permutation image {tok:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_one_based(&image)
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
