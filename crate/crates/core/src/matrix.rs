//! Dense square matrices, orthogonal matrices, norms and text/JSON I/O.
//!
//! Storage is row-major `f64`. Heavy products are delegated to `nalgebra`
//! (which dispatches to `matrixmultiply`); everything else is plain loops.

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::permutation::Permutation;

/// Maximum `|U^T U - I|` entry accepted by [`OrthogonalMatrix::new`].
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Maximum `|A - A^T|` entry accepted as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Dense `n x n` real matrix with finite entries, stored row-major.
#[derive(Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    /// Builds a matrix from row-major data of length `n * n`.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k / n,
                col: k % n,
            });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(n, data)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.data[j * n + i] = self.data[i * n + j];
            }
        }
        t
    }

    fn check_same_n(&self, other: &SquareMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    pub fn matmul(&self, other: &SquareMatrix) -> Result<Self> {
        self.check_same_n(other)?;
        Ok(Self::from_dmatrix(&(self.to_dmatrix() * other.to_dmatrix())))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        self.matvec_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.n)) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn sub(&self, other: &SquareMatrix) -> Result<Self> {
        self.check_same_n(other)?;
        Ok(Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &SquareMatrix) -> Result<Self> {
        self.check_same_n(other)?;
        Ok(Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius inner product `Σ a_ij b_ij`.
    pub fn inner(&self, other: &SquareMatrix) -> Result<f64> {
        self.check_same_n(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// `max |β_ij|`.
    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sqrt(Σ β_ij²)`.
    pub fn norm_frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Euclidean norm of every column.
    pub fn column_norms(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for row in self.data.chunks_exact(self.n) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v * v;
            }
        }
        sums.into_iter().map(f64::sqrt).collect()
    }

    /// `max |A - A^T|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(A + A^T) / 2`.
    pub fn symmetric_part(&self) -> Self {
        let n = self.n;
        let mut s = self.clone();
        for i in 0..n {
            for j in 0..n {
                s.data[i * n + j] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    /// `max |M^T M - I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let m = self.to_dmatrix();
        let mut gram = m.transpose() * &m;
        for i in 0..self.n {
            gram[(i, i)] -= 1.0;
        }
        gram.amax()
    }

    /// Operator (spectral) norm by power iteration on `M^T M`.
    pub fn operator_norm(&self) -> f64 {
        let n = self.n;
        let mt = self.transpose();
        // deterministic start vector with no special alignment
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618_033_988_7).fract()).collect();
        let mut estimate = 0.0;
        for _ in 0..1000 {
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|a| *a /= norm);
            let w = mt.matvec(&self.matvec(&v).unwrap()).unwrap();
            let next = w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            v = w;
            if (next - estimate).abs() <= 1e-15 * next.abs() {
                estimate = next;
                break;
            }
            estimate = next;
        }
        estimate.max(0.0).sqrt()
    }

    /// Eigen-decomposition of a symmetric matrix.
    ///
    /// Eigenvalues are sorted descending (ties keep the solver's index
    /// order); column `k` of the returned matrix is the unit eigenvector for
    /// eigenvalue `k`. Only the lower triangle is read.
    pub fn symmetric_eigen(&self) -> Result<(Vec<f64>, SquareMatrix)> {
        let eig = nalgebra::SymmetricEigen::try_new(self.to_dmatrix(), f64::EPSILON, 100_000)
            .ok_or(Error::EigenFailure)?;
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vectors = SquareMatrix::zeros(self.n);
        for (col, &k) in order.iter().enumerate() {
            for i in 0..self.n {
                vectors[(i, col)] = eig.eigenvectors[(i, k)];
            }
        }
        Ok((values, vectors))
    }

    pub(crate) fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        // nalgebra is column-major, so the transpose's storage is our row-major layout
        Self {
            n,
            data: m.transpose().as_slice().to_vec(),
        }
    }

    /// Parses the plain-text format: `n` on the first line, then `n`
    /// whitespace-separated rows.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let n = parse_dimension(tokens.next())?;
        let data = parse_values(&mut tokens, n * n)?;
        if let Some(extra) = tokens.next() {
            return Err(Error::Parse(format!("trailing token {extra:?} after matrix")));
        }
        Self::new(n, data)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        write_rows(&mut out, self);
        out
    }

    /// Parses either the JSON mirror (`{"n": .., "rows": [[..]]}`) or the
    /// plain-text format, chosen by the first non-blank character.
    pub fn parse_any(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
        } else {
            Self::parse_text(text)
        }
    }
}

pub(crate) fn parse_dimension(token: Option<&str>) -> Result<usize> {
    let tok = token.ok_or_else(|| Error::Parse("missing dimension".into()))?;
    tok.parse::<usize>()
        .map_err(|e| Error::Parse(format!("dimension {tok:?}: {e}")))
}

pub(crate) fn parse_values<'a>(
    tokens: &mut impl Iterator<Item = &'a str>,
    count: usize,
) -> Result<Vec<f64>> {
    let mut data = Vec::with_capacity(count);
    for k in 0..count {
        let tok = tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("expected {count} entries, found {k}")))?;
        data.push(
            tok.parse::<f64>()
                .map_err(|e| Error::Parse(format!("entry {tok:?}: {e}")))?,
        );
    }
    Ok(data)
}

/// Shortest round-trip decimal form, switching to exponent notation for very
/// large or very small magnitudes.
pub(crate) fn format_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn write_rows(out: &mut String, m: &SquareMatrix) {
    for row in m.data.chunks_exact(m.n) {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            out.push_str(&format_f64(*v));
        }
        let _ = writeln!(out);
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl std::fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SquareMatrix")
            .field("n", &self.n)
            .field("rows", &self.rows())
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl Serialize for SquareMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr {
            n: self.n,
            rows: self.rows(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SquareMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        if repr.rows.len() != repr.n {
            return Err(serde::de::Error::custom(format!(
                "declared n = {} but found {} rows",
                repr.n,
                repr.rows.len()
            )));
        }
        SquareMatrix::from_rows(&repr.rows).map_err(serde::de::Error::custom)
    }
}

/// A square matrix with `max |U^T U - I| ≤ ORTHOGONALITY_TOL`.
#[derive(Clone, PartialEq, Debug, Serialize)]
#[serde(transparent)]
pub struct OrthogonalMatrix(SquareMatrix);

impl OrthogonalMatrix {
    pub fn new(m: SquareMatrix) -> Result<Self> {
        let deviation = m.orthogonality_defect();
        if deviation > ORTHOGONALITY_TOL {
            return Err(Error::NotOrthogonal { deviation });
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(SquareMatrix::identity(n))
    }

    pub fn from_permutation(p: &Permutation) -> Self {
        Self(p.to_matrix())
    }

    /// Counter-clockwise plane rotation by `theta`.
    pub fn rotation2(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self(SquareMatrix::from_rows(&[vec![c, -s], vec![s, c]]).expect("finite 2x2"))
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn negate(&self) -> Self {
        Self(self.0.scale(-1.0))
    }

    /// `π(ρ) U`, computed by permuting rows (row `i` moves to row `ρ(i)`).
    pub fn left_permute(&self, rho: &Permutation) -> Result<Self> {
        let n = self.n();
        if rho.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rho.len(),
            });
        }
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            let target = rho.at(i);
            out.data[target * n..(target + 1) * n].copy_from_slice(self.0.row(i));
        }
        Ok(Self(out))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.matvec(x)
    }
}

impl<'de> Deserialize<'de> for OrthogonalMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let m = SquareMatrix::deserialize(deserializer)?;
        OrthogonalMatrix::new(m).map_err(serde::de::Error::custom)
    }
}
