//! Monte Carlo non-commutative convex combinations of permutation matrices.
//!
//! For Gaussian draws `x_i` with roundings `σ_i`, the rank-one weights
//! `x_i ⊗ x_i` are positive semidefinite and average to the identity. The
//! estimate
//!
//! ```text
//!     Â = (1/N) Σ_i (x_i ⊗ x_i) π(τ_i)
//! ```
//!
//! is a non-commutative convex combination of permutation matrices that
//! approximates `U`. Taking `τ_i = σ(U^T, x_i)^{-1}` gives the weight-first
//! form `Σ A_τ τ`; the permutation-first form `Σ σ A_σ` uses
//! `Â = (1/N) Σ π(σ(U, x_i)) (x_i ⊗ x_i)` instead. In both cases
//! `U - Â` converges to `∫ z(x) ⊗ x` (or its transpose) where `z` is the
//! rounding residual, which is what makes the error small.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::RandomStream;
use crate::matrix::{OrthogonalMatrix, SquareMatrix};
use crate::parallel::run_chunked;
use crate::permutation::Permutation;
use crate::rounding::{EmpiricalDistribution, RoundingWorkspace, MAX_TIE_RETRIES};

/// Largest dimension for which full per-permutation weight matrices are kept.
pub const MAX_WEIGHT_MATRIX_N: usize = 8;

/// Which side of the permutation matrices the weights multiply.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `Σ A_σ σ`, rounding at `U^T`.
    #[default]
    WeightFirst,
    /// `Σ σ A_σ`, rounding at `U`.
    PermutationFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ApproxOptions {
    pub orientation: Orientation,
    /// Record per-permutation counts and traces. Memory grows with the number
    /// of distinct permutations seen, which is about `N` for large `n`.
    pub track_permutations: bool,
    /// Keep every `A_σ` estimate; only allowed for `n ≤ MAX_WEIGHT_MATRIX_N`.
    pub keep_weight_matrices: bool,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        Self {
            orientation: Orientation::WeightFirst,
            track_permutations: true,
            keep_weight_matrices: false,
        }
    }
}

/// Monte Carlo estimate of `Σ A_σ σ` together with its diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NconvApprox {
    pub n: usize,
    pub sample_count: usize,
    pub orientation: Orientation,
    /// The approximation of `U`.
    pub a_hat: SquareMatrix,
    /// `(1/N) Σ x_i ⊗ x_i`, the estimate of `Σ A_σ = I`.
    pub weight_sum: SquareMatrix,
    /// `(1/N) Σ_{i : τ_i = σ} |x_i|²`, i.e. `trace(A_σ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_perm_trace: Option<BTreeMap<Permutation, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perm_counts: Option<EmpiricalDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_matrices: Option<BTreeMap<Permutation, SquareMatrix>>,
    /// Mean of `|Rx - σx|²` where `R` is the matrix being rounded.
    pub mean_residual_sq: f64,
}

impl NconvApprox {
    /// Smallest eigenvalue of `weight_sum` is at least `-1e-9` times the
    /// largest.
    pub fn weight_sum_is_psd(&self) -> Result<bool> {
        let (values, _) = self.weight_sum.symmetric_eigen()?;
        let largest = values[0];
        let smallest = *values.last().unwrap();
        Ok(smallest >= -1e-9 * largest.abs().max(f64::MIN_POSITIVE))
    }
}

/// `x ⊗ y`, the matrix with entries `x_i y_j`.
pub fn outer_product(x: &[f64], y: &[f64]) -> Result<SquareMatrix> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let data = x.iter().flat_map(|&a| y.iter().map(move |&b| a * b)).collect();
    SquareMatrix::new(x.len(), data)
}

/// Builds the weight-first approximation from `samples` Gaussian draws.
pub fn approximate(u: &OrthogonalMatrix, samples: usize, stream: &mut RandomStream) -> Result<NconvApprox> {
    approximate_with(u, samples, stream, ApproxOptions::default())
}

pub fn approximate_with(
    u: &OrthogonalMatrix,
    samples: usize,
    stream: &mut RandomStream,
    options: ApproxOptions,
) -> Result<NconvApprox> {
    if samples == 0 {
        return Err(Error::Precondition("at least one sample is required".into()));
    }
    let plan = Plan::new(u, options)?;
    let n = u.n();
    let mut acc = Partial::new(n, &options);
    let mut failure = None;
    run_chunked(
        samples,
        stream,
        |len, s| {
            let mut x = DMatrix::zeros(n, len);
            for v in x.iter_mut() {
                *v = s.next_gaussian();
            }
            plan.process(x, Some(s))
        },
        |part| match part {
            Ok(p) => acc.merge(p),
            Err(e) => {
                failure.get_or_insert(e);
            }
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(acc.finish(samples, options.orientation))
}

/// Builds the approximation from caller-supplied draws (no resampling; a
/// tie is an error).
pub fn approximate_from_samples(
    u: &OrthogonalMatrix,
    samples: &[Vec<f64>],
    options: ApproxOptions,
) -> Result<NconvApprox> {
    if samples.is_empty() {
        return Err(Error::Precondition("at least one sample is required".into()));
    }
    let n = u.n();
    if let Some(bad) = samples.iter().find(|x| x.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let plan = Plan::new(u, options)?;
    let x = DMatrix::from_fn(n, samples.len(), |i, j| samples[j][i]);
    let mut acc = Partial::new(n, &options);
    acc.merge(plan.process(x, None)?);
    Ok(acc.finish(samples.len(), options.orientation))
}

struct Plan {
    /// The matrix whose roundings label the terms (`U^T` or `U`).
    rounded: OrthogonalMatrix,
    rounded_dense: DMatrix<f64>,
    options: ApproxOptions,
}

impl Plan {
    fn new(u: &OrthogonalMatrix, options: ApproxOptions) -> Result<Self> {
        if options.keep_weight_matrices && u.n() > MAX_WEIGHT_MATRIX_N {
            return Err(Error::TooLarge {
                n: u.n(),
                max: MAX_WEIGHT_MATRIX_N,
            });
        }
        let rounded = match options.orientation {
            Orientation::WeightFirst => u.transpose(),
            Orientation::PermutationFirst => u.clone(),
        };
        Ok(Self {
            rounded_dense: rounded.matrix().to_dmatrix(),
            rounded,
            options,
        })
    }

    /// Rounds every column of `x` and returns the partial sums. Tied columns
    /// are redrawn from `redraw` when given.
    fn process(&self, mut x: DMatrix<f64>, mut redraw: Option<&mut RandomStream>) -> Result<Partial> {
        let n = x.nrows();
        let len = x.ncols();
        let mut y = &self.rounded_dense * &x;
        let mut moved = DMatrix::zeros(n, len);
        let mut part = Partial::new(n, &self.options);
        let mut ws = RoundingWorkspace::default();
        for j in 0..len {
            let mut attempts = 0;
            let sigma = loop {
                match ws.round(x.column(j).as_slice(), y.column(j).as_slice()) {
                    Ok(sigma) => break sigma,
                    Err(Error::TiedCoordinates) => match redraw.as_deref_mut() {
                        Some(s) if attempts < MAX_TIE_RETRIES => {
                            attempts += 1;
                            for v in x.column_mut(j).iter_mut() {
                                *v = s.next_gaussian();
                            }
                            let fresh = self.rounded.matrix().matvec(x.column(j).as_slice())?;
                            y.column_mut(j).copy_from_slice(&fresh);
                        }
                        Some(_) => {
                            return Err(Error::RetriesExhausted {
                                attempts: MAX_TIE_RETRIES + 1,
                            })
                        }
                        None => return Err(Error::TiedCoordinates),
                    },
                    Err(e) => return Err(e),
                }
            };
            let xj = x.column(j);
            sigma.apply_into(xj.as_slice(), moved.column_mut(j).as_mut_slice());
            part.residual_sq += y
                .column(j)
                .iter()
                .zip(moved.column(j).iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
            // the weight-first term (x ⊗ x) π(σ^{-1}) is labelled by σ^{-1}
            let label = match self.options.orientation {
                Orientation::WeightFirst => sigma.inverse(),
                Orientation::PermutationFirst => sigma,
            };
            if self.options.track_permutations || self.options.keep_weight_matrices {
                let norm_sq = xj.norm_squared();
                if let Some(traces) = part.traces.as_mut() {
                    *traces.entry(label.clone()).or_insert(0.0) += norm_sq;
                }
                if let Some(weights) = part.weights.as_mut() {
                    let outer = xj * xj.transpose();
                    weights
                        .entry(label.clone())
                        .and_modify(|w| *w += &outer)
                        .or_insert(outer);
                }
                if let Some(counts) = part.counts.as_mut() {
                    counts.record(label);
                }
            }
        }
        // weight-first: Σ x ⊗ (σx) = Σ (x ⊗ x) π(σ)^T; permutation-first: Σ (σx) ⊗ x
        match self.options.orientation {
            Orientation::WeightFirst => part.a.gemm(1.0, &x, &moved.transpose(), 0.0),
            Orientation::PermutationFirst => part.a.gemm(1.0, &moved, &x.transpose(), 0.0),
        }
        part.w.gemm(1.0, &x, &x.transpose(), 0.0);
        Ok(part)
    }
}

struct Partial {
    a: DMatrix<f64>,
    w: DMatrix<f64>,
    residual_sq: f64,
    traces: Option<BTreeMap<Permutation, f64>>,
    counts: Option<EmpiricalDistribution>,
    weights: Option<BTreeMap<Permutation, DMatrix<f64>>>,
}

impl Partial {
    fn new(n: usize, options: &ApproxOptions) -> Self {
        Self {
            a: DMatrix::zeros(n, n),
            w: DMatrix::zeros(n, n),
            residual_sq: 0.0,
            traces: options.track_permutations.then(BTreeMap::new),
            counts: options.track_permutations.then(EmpiricalDistribution::new),
            weights: options.keep_weight_matrices.then(BTreeMap::new),
        }
    }

    fn merge(&mut self, other: Partial) {
        self.a += other.a;
        self.w += other.w;
        self.residual_sq += other.residual_sq;
        if let (Some(t), Some(o)) = (self.traces.as_mut(), other.traces) {
            for (k, v) in o {
                *t.entry(k).or_insert(0.0) += v;
            }
        }
        if let (Some(c), Some(o)) = (self.counts.as_mut(), other.counts) {
            c.merge(o);
        }
        if let (Some(w), Some(o)) = (self.weights.as_mut(), other.weights) {
            for (k, v) in o {
                w.entry(k).and_modify(|m| *m += &v).or_insert(v);
            }
        }
    }

    fn finish(self, samples: usize, orientation: Orientation) -> NconvApprox {
        let scale = 1.0 / samples as f64;
        NconvApprox {
            n: self.a.nrows(),
            sample_count: samples,
            orientation,
            a_hat: SquareMatrix::from_dmatrix(&(self.a * scale)),
            weight_sum: SquareMatrix::from_dmatrix(&(self.w * scale)),
            per_perm_trace: self
                .traces
                .map(|t| t.into_iter().map(|(k, v)| (k, v * scale)).collect()),
            perm_counts: self.counts,
            weight_matrices: self.weights.map(|w| {
                w.into_iter()
                    .map(|(k, m)| (k, SquareMatrix::from_dmatrix(&(m * scale))))
                    .collect()
            }),
            mean_residual_sq: self.residual_sq * scale,
        }
    }
}

/// Approximation errors of `approx` against `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `max |U - Â|`.
    pub linf: f64,
    /// `|U - Â|_F`.
    pub frob: f64,
    /// `|u_i - a_i|` for every column.
    pub column_errors: Vec<f64>,
    /// `max |Σ A_σ - I|`.
    pub weight_deviation: f64,
}

impl ErrorReport {
    pub fn max_column_error(&self) -> f64 {
        self.column_errors.iter().fold(0.0, |m: f64, &v| m.max(v))
    }
}

pub fn error_report(u: &OrthogonalMatrix, approx: &NconvApprox) -> Result<ErrorReport> {
    let diff = u.matrix().sub(&approx.a_hat)?;
    let weight_dev = approx.weight_sum.sub(&SquareMatrix::identity(approx.n))?;
    Ok(ErrorReport {
        linf: diff.norm_inf(),
        frob: diff.norm_frobenius(),
        column_errors: diff.column_norms(),
        weight_deviation: weight_dev.norm_inf(),
    })
}

/// `max_σ |trace(A_σ)/n - count(σ)/N|` over observed permutations.
///
/// The traces of all `A_σ` add up to `n`, so the trace is compared with the
/// rounding probability after normalising by `n`.
pub fn trace_probability_check(approx: &NconvApprox) -> Result<f64> {
    let (Some(traces), Some(counts)) = (&approx.per_perm_trace, &approx.perm_counts) else {
        return Err(Error::Precondition(
            "approximation was built without permutation tracking".into(),
        ));
    };
    let n = approx.n as f64;
    Ok(traces
        .iter()
        .map(|(sigma, &t)| (t / n - counts.frequency(sigma)).abs())
        .fold(0.0, f64::max))
}

/// `Σ A_σ σ` or `Σ σ A_σ` for explicit weights.
pub fn combine(weights: &[(Permutation, SquareMatrix)], orientation: Orientation) -> Result<SquareMatrix> {
    let n = weights
        .first()
        .map(|(p, _)| p.len())
        .ok_or_else(|| Error::Precondition("no weights given".into()))?;
    let mut total = SquareMatrix::zeros(n);
    for (sigma, a) in weights {
        let p = sigma.to_matrix();
        let term = match orientation {
            Orientation::WeightFirst => a.matmul(&p)?,
            Orientation::PermutationFirst => p.matmul(a)?,
        };
        total = total.add(&term)?;
    }
    Ok(total)
}

/// Coordinate projections that resolve the identity: `E_11` on the
/// identity and `E_kk` on each transposition `(1 k)`.
pub fn pathological_weights(n: usize) -> Result<Vec<(Permutation, SquareMatrix)>> {
    if n < 2 {
        return Err(Error::Precondition("need n >= 2".into()));
    }
    let projection = |k: usize| {
        let mut e = SquareMatrix::zeros(n);
        e[(k, k)] = 1.0;
        e
    };
    let mut weights = vec![(Permutation::identity(n), projection(0))];
    for k in 1..n {
        weights.push((Permutation::transposition(n, 0, k)?, projection(k)));
    }
    Ok(weights)
}

/// The combination of [`pathological_weights`] whose first row is all ones
/// and whose other entries vanish, so its operator norm is `√n`.
///
/// This is the permutation-first product `Σ σ A_σ`; the weight-first
/// product of the same weights is its transpose (first column of ones).
pub fn pathological_example(n: usize) -> Result<SquareMatrix> {
    let a = combine(&pathological_weights(n)?, Orientation::PermutationFirst)?;
    debug_assert!((0..n).all(|i| (0..n).all(|j| a[(i, j)] == if i == 0 { 1.0 } else { 0.0 })));
    Ok(a)
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub samples: usize,
}

/// Estimates `|L|_F² = E |La|²` over standard Gaussian `a`.
pub fn frobenius_via_gaussian(
    l: &SquareMatrix,
    samples: usize,
    stream: &mut RandomStream,
) -> Result<MonteCarloEstimate> {
    if samples < 2 {
        return Err(Error::Precondition("at least two samples are required".into()));
    }
    let n = l.n();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    run_chunked(
        samples,
        stream,
        |len, s| {
            let (mut a, mut la) = (vec![0.0; n], vec![0.0; n]);
            let (mut ps, mut pq) = (0.0, 0.0);
            for _ in 0..len {
                s.fill_gaussian(&mut a);
                l.matvec_into(&a, &mut la);
                let v: f64 = la.iter().map(|t| t * t).sum();
                ps += v;
                pq += v * v;
            }
            (ps, pq)
        },
        |(ps, pq)| {
            sum += ps;
            sum_sq += pq;
        },
    );
    let count = samples as f64;
    let mean = sum / count;
    let var = ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0);
    Ok(MonteCarloEstimate {
        mean,
        standard_error: (var / count).sqrt(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::haar_orthogonal;
    use crate::rounding::round_at;

    fn tracked() -> ApproxOptions {
        ApproxOptions::default()
    }

    #[test]
    fn outer_product_basics() {
        let m = outer_product(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(m, SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap());
        let mut s = RandomStream::new(1, 0);
        let (x, y, a) = (
            s.sample_gaussian_vector(5),
            s.sample_gaussian_vector(5),
            s.sample_gaussian_vector(5),
        );
        let lhs = outer_product(&x, &y).unwrap().matvec(&a).unwrap();
        let dot: f64 = a.iter().zip(&y).map(|(p, q)| p * q).sum();
        for (l, xi) in lhs.iter().zip(&x) {
            assert!((l - dot * xi).abs() < 1e-12);
        }
        let xx = outer_product(&x, &x).unwrap();
        assert!((xx.trace() - x.iter().map(|v| v * v).sum::<f64>()).abs() < 1e-12);
        assert!(outer_product(&x, &[1.0]).is_err());
    }

    #[test]
    fn estimate_matches_explicit_sum_on_small_run() {
        let mut s = RandomStream::new(2, 0);
        let u = haar_orthogonal(4, &mut s);
        let samples: Vec<Vec<f64>> = (0..50).map(|_| s.sample_gaussian_vector(4)).collect();
        let approx = approximate_from_samples(&u, &samples, tracked()).unwrap();

        let ut = u.transpose();
        let mut a_expected = SquareMatrix::zeros(4);
        let mut w_expected = SquareMatrix::zeros(4);
        for x in &samples {
            let tau = round_at(&ut, x).unwrap().inverse();
            let xx = outer_product(x, x).unwrap();
            a_expected = a_expected.add(&xx.matmul(&tau.to_matrix()).unwrap()).unwrap();
            w_expected = w_expected.add(&xx).unwrap();
        }
        let a_expected = a_expected.scale(1.0 / 50.0);
        let w_expected = w_expected.scale(1.0 / 50.0);
        assert!(approx.a_hat.sub(&a_expected).unwrap().norm_inf() < 1e-12);
        assert!(approx.weight_sum.sub(&w_expected).unwrap().norm_inf() < 1e-12);

        let trace_sum: f64 = approx.per_perm_trace.as_ref().unwrap().values().sum();
        assert!((trace_sum - approx.weight_sum.trace()).abs() < 1e-9);
        assert_eq!(approx.perm_counts.as_ref().unwrap().total(), 50);
        assert!(approx.weight_sum.asymmetry() < 1e-12);
        assert!(approx.weight_sum_is_psd().unwrap());
    }

    #[test]
    fn weight_matrices_resolve_weight_sum_and_rebuild_a_hat() {
        let mut s = RandomStream::new(3, 0);
        let u = haar_orthogonal(3, &mut s);
        for orientation in [Orientation::WeightFirst, Orientation::PermutationFirst] {
            let opts = ApproxOptions {
                orientation,
                track_permutations: true,
                keep_weight_matrices: true,
            };
            let approx = approximate_with(&u, 3000, &mut s, opts).unwrap();
            let weights: Vec<_> = approx.weight_matrices.clone().unwrap().into_iter().collect();
            let mut total = SquareMatrix::zeros(3);
            for (_, w) in &weights {
                total = total.add(w).unwrap();
                let (values, _) = w.symmetric_eigen().unwrap();
                assert!(*values.last().unwrap() >= -1e-12);
            }
            assert!(total.sub(&approx.weight_sum).unwrap().norm_inf() < 1e-12);
            let rebuilt = combine(&weights, orientation).unwrap();
            assert!(rebuilt.sub(&approx.a_hat).unwrap().norm_inf() < 1e-12);
        }
        assert!(matches!(
            approximate_with(
                &haar_orthogonal(9, &mut s),
                10,
                &mut s,
                ApproxOptions { keep_weight_matrices: true, ..Default::default() }
            ),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn permutation_matrix_is_exact_up_to_covariance_noise() {
        let mut s = RandomStream::new(4, 0);
        let rho = Permutation::random(8, &mut s);
        let u = OrthogonalMatrix::from_permutation(&rho);
        let n_samples = 100_000;
        let approx = approximate(&u, n_samples, &mut s).unwrap();
        let counts = approx.perm_counts.as_ref().unwrap();
        assert_eq!(counts.count(&rho), n_samples as u64);
        // A_hat = weight_sum · ρ exactly
        let w_rho = approx.weight_sum.matmul(&rho.to_matrix()).unwrap();
        assert!(approx.a_hat.sub(&w_rho).unwrap().norm_inf() < 1e-12);
        let report = error_report(&u, &approx).unwrap();
        assert!(report.linf <= 5.0 / (n_samples as f64).sqrt(), "{report:?}");
        assert_eq!(approx.mean_residual_sq, 0.0);
    }

    #[test]
    fn mirrored_form_on_permutation_matrix() {
        let mut s = RandomStream::new(5, 0);
        let rho = Permutation::random(6, &mut s);
        let u = OrthogonalMatrix::from_permutation(&rho);
        let opts = ApproxOptions {
            orientation: Orientation::PermutationFirst,
            ..Default::default()
        };
        let approx = approximate_with(&u, 2000, &mut s, opts).unwrap();
        let rho_w = rho.to_matrix().matmul(&approx.weight_sum).unwrap();
        assert!(approx.a_hat.sub(&rho_w).unwrap().norm_inf() < 1e-12);
        assert_eq!(approx.perm_counts.unwrap().count(&rho), 2000);
    }

    #[test]
    fn one_dimensional_case() {
        let u = OrthogonalMatrix::identity(1);
        let approx = approximate(&u, 50_000, &mut RandomStream::new(6, 0)).unwrap();
        assert!((approx.a_hat[(0, 0)] - 1.0).abs() < 0.03);
        assert_eq!(approx.a_hat, approx.weight_sum);
        assert!(trace_probability_check(&approx).unwrap() < 0.03);
    }

    #[test]
    fn identity_error_report() {
        let u = OrthogonalMatrix::identity(4);
        let n_samples = 100_000;
        let approx = approximate(&u, n_samples, &mut RandomStream::new(7, 0)).unwrap();
        let r = error_report(&u, &approx).unwrap();
        assert!(r.linf <= 5.0 / (n_samples as f64).sqrt());
        assert_eq!(r.linf, r.weight_deviation);
        assert!(r.frob < 0.05);
    }

    #[test]
    fn trace_probability_on_permutation_matrix() {
        let mut s = RandomStream::new(8, 0);
        let u = OrthogonalMatrix::from_permutation(&Permutation::random(16, &mut s));
        let approx = approximate(&u, 10_000, &mut s).unwrap();
        assert!(trace_probability_check(&approx).unwrap() <= 0.05);
    }

    #[test]
    fn trace_probability_on_minus_identity() {
        let u = OrthogonalMatrix::identity(4).negate();
        let approx = approximate(&u, 100_000, &mut RandomStream::new(9, 0)).unwrap();
        assert_eq!(approx.perm_counts.as_ref().unwrap().support_size(), 3);
        assert!(trace_probability_check(&approx).unwrap() <= 0.02);
    }

    #[test]
    fn trace_probability_needs_tracking() {
        let opts = ApproxOptions {
            track_permutations: false,
            ..Default::default()
        };
        let approx =
            approximate_with(&OrthogonalMatrix::identity(2), 10, &mut RandomStream::new(1, 1), opts).unwrap();
        assert!(approx.per_perm_trace.is_none());
        assert!(trace_probability_check(&approx).is_err());
    }

    #[test]
    fn pathological_combination() {
        assert_eq!(
            pathological_example(2).unwrap(),
            SquareMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap()
        );
        let a4 = pathological_example(4).unwrap();
        assert!((a4.operator_norm() - 2.0).abs() < 1e-10);
        let weights = pathological_weights(5).unwrap();
        let mut total = SquareMatrix::zeros(5);
        for (_, w) in &weights {
            total = total.add(w).unwrap();
        }
        assert_eq!(total, SquareMatrix::identity(5));
        let transposed = combine(&weights, Orientation::WeightFirst).unwrap();
        assert_eq!(transposed, pathological_example(5).unwrap().transpose());
        assert!(pathological_example(1).is_err());
    }

    #[test]
    fn all_ones_vector_is_fixed_in_expectation() {
        // the exact combination fixes v = (1, ..., 1); the estimate does so up to noise
        let mut s = RandomStream::new(10, 0);
        let u = haar_orthogonal(6, &mut s);
        let v = vec![1.0 / 6f64.sqrt(); 6];
        let deviation = |samples: usize, s: &mut RandomStream| {
            let approx = approximate(&u, samples, s).unwrap();
            let av = approx.a_hat.matvec(&v).unwrap();
            av.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        let coarse = (0..8).map(|_| deviation(2_000, &mut s)).sum::<f64>() / 8.0;
        let fine = (0..8).map(|_| deviation(32_000, &mut s)).sum::<f64>() / 8.0;
        assert!(fine < 0.5 * coarse, "{coarse} -> {fine}");
    }

    #[test]
    fn frobenius_identity_checks() {
        let mut s = RandomStream::new(11, 0);
        let zero = frobenius_via_gaussian(&SquareMatrix::zeros(3), 100, &mut s).unwrap();
        assert_eq!(zero.mean, 0.0);
        let id = frobenius_via_gaussian(&SquareMatrix::identity(5), 20_000, &mut s).unwrap();
        assert!((id.mean - 5.0).abs() <= 3.0 * id.standard_error);
        let l = SquareMatrix::new(8, s.sample_gaussian_vector(64)).unwrap();
        let est = frobenius_via_gaussian(&l, 100_000, &mut s).unwrap();
        let direct: f64 = l.as_slice().iter().map(|v| v * v).sum();
        assert!((est.mean - direct).abs() <= 3.0 * est.standard_error);
        assert!(frobenius_via_gaussian(&l, 1, &mut s).is_err());
    }

    #[test]
    fn left_relabelling_pushes_counts_forward() {
        // approximating ρU on draws x_i matches approximating U on π(ρ^{-1}) x_i
        let mut s = RandomStream::new(12, 0);
        let u = haar_orthogonal(4, &mut s);
        let rho = Permutation::transposition(4, 1, 3).unwrap();
        let rho_u = u.left_permute(&rho).unwrap();
        let xs: Vec<Vec<f64>> = (0..5000).map(|_| s.sample_gaussian_vector(4)).collect();
        let relabelled: Vec<Vec<f64>> = xs.iter().map(|x| rho.inverse().apply(x).unwrap()).collect();
        let left = approximate_from_samples(&rho_u, &xs, tracked()).unwrap();
        let right = approximate_from_samples(&u, &relabelled, tracked()).unwrap();
        let mut pushed = EmpiricalDistribution::new();
        for (p, c) in right.perm_counts.as_ref().unwrap().iter() {
            for _ in 0..c {
                pushed.record(rho.compose(p).unwrap());
            }
        }
        assert_eq!(&pushed, left.perm_counts.as_ref().unwrap());
        let rho_a = rho.to_matrix().matmul(&right.a_hat).unwrap();
        assert!(rho_a.sub(&left.a_hat).unwrap().norm_inf() < 1e-12);
    }

    #[test]
    fn json_shape() {
        let approx = approximate(&OrthogonalMatrix::identity(2), 10, &mut RandomStream::new(1, 0)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&approx).unwrap();
        assert_eq!(v["a_hat"]["n"], 2);
        assert!(v["per_perm_trace"]["1 2"].is_number());
        let back: NconvApprox = serde_json::from_value(v).unwrap();
        assert_eq!(back, approx);
    }
}
