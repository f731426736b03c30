//! Randomized rounding of an orthogonal matrix to a permutation.
//!
//! For `x` with distinct coordinates and `y = Ux` with distinct coordinates,
//! let `φ` and `ψ` list the indices of `x` and `y` in increasing order of
//! value. The rounding `σ(U, x)` is the permutation with `σ(φ(k)) = ψ(k)`:
//! the `k`-th smallest coordinate of `x` is matched with the `k`-th smallest
//! coordinate of `y`. Drawing `x` from the standard Gaussian measure turns
//! this into a probability distribution on permutations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::gaussian::RandomStream;
use crate::matrix::OrthogonalMatrix;
use crate::parallel::run_chunked;
use crate::permutation::Permutation;

/// Redraws allowed when a Gaussian draw has tied coordinates.
pub const MAX_TIE_RETRIES: usize = 8;

/// Scratch space for repeated roundings of the same dimension.
#[derive(Default)]
pub(crate) struct RoundingWorkspace {
    x_order: Vec<(f64, usize)>,
    y_order: Vec<(f64, usize)>,
}

impl RoundingWorkspace {
    pub(crate) fn round(&mut self, x: &[f64], y: &[f64]) -> Result<Permutation> {
        sort_indices(x, &mut self.x_order)?;
        sort_indices(y, &mut self.y_order)?;
        let mut image = vec![0; x.len()];
        for (&(_, phi), &(_, psi)) in self.x_order.iter().zip(&self.y_order) {
            image[phi] = psi;
        }
        Ok(Permutation::from_image_unchecked(image))
    }
}

fn sort_indices(v: &[f64], order: &mut Vec<(f64, usize)>) -> Result<()> {
    order.clear();
    order.extend(v.iter().copied().zip(0..));
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    // `==` also catches +0/-0, which total_cmp orders
    if order.windows(2).any(|w| w[0].0 == w[1].0) || order.iter().any(|p| !p.0.is_finite()) {
        return Err(Error::TiedCoordinates);
    }
    Ok(())
}

/// Matches the rank order of `x` to the rank order of `y`.
pub fn round_images(x: &[f64], y: &[f64]) -> Result<Permutation> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    RoundingWorkspace::default().round(x, y)
}

/// The rounding `σ(U, x)`.
///
/// Fails with [`Error::TiedCoordinates`] if `x` or `Ux` has a repeated
/// coordinate; the caller decides whether to redraw.
pub fn round_at(u: &OrthogonalMatrix, x: &[f64]) -> Result<Permutation> {
    let y = u.matvec(x)?;
    round_images(x, &y)
}

/// `Ux - σx`.
pub fn residual(u: &OrthogonalMatrix, x: &[f64], sigma: &Permutation) -> Result<Vec<f64>> {
    let mut y = u.matvec(x)?;
    let moved = sigma.apply(x)?;
    for (a, b) in y.iter_mut().zip(&moved) {
        *a -= b;
    }
    Ok(y)
}

/// One Gaussian draw together with its rounding and residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingSample {
    pub x: Vec<f64>,
    pub sigma: Permutation,
    pub z: Vec<f64>,
}

impl RoundingSample {
    pub fn residual_norm(&self) -> f64 {
        self.z.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Draws `x` from the standard Gaussian measure and rounds `U` at it.
pub fn sample_rounding(u: &OrthogonalMatrix, stream: &mut RandomStream) -> Result<RoundingSample> {
    let n = u.n();
    let mut ws = RoundingWorkspace::default();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let sigma = draw_and_round(u, stream, &mut ws, &mut x, &mut y)?;
    let mut z = vec![0.0; n];
    sigma.apply_into(&x, &mut z);
    for (zi, yi) in z.iter_mut().zip(&y) {
        *zi = yi - *zi;
    }
    Ok(RoundingSample { x, sigma, z })
}

/// Fills `x` with a Gaussian draw, `y` with `Ux`, and returns the rounding,
/// redrawing on ties.
pub(crate) fn draw_and_round(
    u: &OrthogonalMatrix,
    stream: &mut RandomStream,
    ws: &mut RoundingWorkspace,
    x: &mut [f64],
    y: &mut [f64],
) -> Result<Permutation> {
    for _ in 0..=MAX_TIE_RETRIES {
        stream.fill_gaussian(x);
        u.matrix().matvec_into(x, y);
        match ws.round(x, y) {
            Ok(sigma) => return Ok(sigma),
            Err(Error::TiedCoordinates) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::RetriesExhausted {
        attempts: MAX_TIE_RETRIES + 1,
    })
}

/// Observed counts of permutations.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    counts: BTreeMap<Permutation, u64>,
    total: u64,
}

impl EmpiricalDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, sigma: Permutation) {
        *self.counts.entry(sigma).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: EmpiricalDistribution) {
        for (sigma, c) in other.counts {
            *self.counts.entry(sigma).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, sigma: &Permutation) -> u64 {
        self.counts.get(sigma).copied().unwrap_or(0)
    }

    pub fn frequency(&self, sigma: &Permutation) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(sigma) as f64 / self.total as f64
        }
    }

    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Permutation, u64)> {
        self.counts.iter().map(|(p, &c)| (p, c))
    }

    /// Pearson goodness-of-fit against the uniform distribution on
    /// `support`. Fails if a permutation outside `support` was observed.
    pub fn chi_square_uniform(&self, support: &[Permutation]) -> Result<ChiSquareTest> {
        let inside: u64 = support.iter().map(|p| self.count(p)).sum();
        if inside != self.total {
            return Err(Error::Precondition(format!(
                "{} of {} observations fall outside the support",
                self.total - inside,
                self.total
            )));
        }
        let counts: Vec<u64> = support.iter().map(|p| self.count(p)).collect();
        Ok(chi_square_uniform(&counts))
    }
}

/// Result of a Pearson chi-square test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of `counts` against equal cell probabilities.
pub fn chi_square_uniform(counts: &[u64]) -> ChiSquareTest {
    assert!(counts.len() >= 2, "need at least two cells");
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    let dof = counts.len() - 1;
    let p_value = ChiSquared::new(dof as f64)
        .map(|d| d.sf(statistic))
        .unwrap_or(f64::NAN);
    ChiSquareTest {
        statistic,
        degrees_of_freedom: dof,
        p_value,
    }
}

/// Monte Carlo estimates of `E ζ_i²` and `E |z|²` where `z = Ux - σ(U, x)x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualMoments {
    pub per_coordinate_second_moment: Vec<f64>,
    pub total_second_moment: f64,
    pub sample_count: usize,
    pub standard_errors: Vec<f64>,
    pub total_standard_error: f64,
}

impl ResidualMoments {
    pub fn max_coordinate_moment(&self) -> f64 {
        self.per_coordinate_second_moment
            .iter()
            .fold(0.0, |m: f64, &v| m.max(v))
    }
}

struct MomentSums {
    sq: Vec<f64>,
    quad: Vec<f64>,
    norm_sq: f64,
    norm_quad: f64,
}

pub fn estimate_residual_moments(
    u: &OrthogonalMatrix,
    samples: usize,
    stream: &mut RandomStream,
) -> Result<ResidualMoments> {
    if samples < 2 {
        return Err(Error::Precondition("at least two samples are required".into()));
    }
    let n = u.n();
    let mut acc = MomentSums {
        sq: vec![0.0; n],
        quad: vec![0.0; n],
        norm_sq: 0.0,
        norm_quad: 0.0,
    };
    let mut failure = None;
    run_chunked(
        samples,
        stream,
        |len, s| -> Result<MomentSums> {
            let mut part = MomentSums {
                sq: vec![0.0; n],
                quad: vec![0.0; n],
                norm_sq: 0.0,
                norm_quad: 0.0,
            };
            let mut ws = RoundingWorkspace::default();
            let (mut x, mut y, mut moved) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            for _ in 0..len {
                let sigma = draw_and_round(u, s, &mut ws, &mut x, &mut y)?;
                sigma.apply_into(&x, &mut moved);
                let mut norm_sq = 0.0;
                for i in 0..n {
                    let z2 = (y[i] - moved[i]).powi(2);
                    part.sq[i] += z2;
                    part.quad[i] += z2 * z2;
                    norm_sq += z2;
                }
                part.norm_sq += norm_sq;
                part.norm_quad += norm_sq * norm_sq;
            }
            Ok(part)
        },
        |part| match part {
            Ok(p) => {
                for i in 0..n {
                    acc.sq[i] += p.sq[i];
                    acc.quad[i] += p.quad[i];
                }
                acc.norm_sq += p.norm_sq;
                acc.norm_quad += p.norm_quad;
            }
            Err(e) => {
                failure.get_or_insert(e);
            }
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let count = samples as f64;
    let std_err = |sum: f64, sum_sq: f64| {
        let mean = sum / count;
        let var = ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0);
        (var / count).sqrt()
    };
    let per_coordinate_second_moment: Vec<f64> = acc.sq.iter().map(|s| s / count).collect();
    let standard_errors = acc
        .sq
        .iter()
        .zip(&acc.quad)
        .map(|(&s, &q)| std_err(s, q))
        .collect();
    Ok(ResidualMoments {
        total_second_moment: per_coordinate_second_moment.iter().sum(),
        per_coordinate_second_moment,
        sample_count: samples,
        standard_errors,
        total_standard_error: std_err(acc.norm_sq, acc.norm_quad),
    })
}

/// Counts of `σ(U, x)` over `samples` independent Gaussian draws.
pub fn estimate_distribution(
    u: &OrthogonalMatrix,
    samples: usize,
    stream: &mut RandomStream,
) -> Result<EmpiricalDistribution> {
    if samples == 0 {
        return Err(Error::Precondition("at least one sample is required".into()));
    }
    let n = u.n();
    let mut dist = EmpiricalDistribution::new();
    let mut failure = None;
    run_chunked(
        samples,
        stream,
        |len, s| -> Result<EmpiricalDistribution> {
            let mut part = EmpiricalDistribution::new();
            let mut ws = RoundingWorkspace::default();
            let (mut x, mut y) = (vec![0.0; n], vec![0.0; n]);
            for _ in 0..len {
                part.record(draw_and_round(u, s, &mut ws, &mut x, &mut y)?);
            }
            Ok(part)
        },
        |part| match part {
            Ok(p) => dist.merge(p),
            Err(e) => {
                failure.get_or_insert(e);
            }
        },
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(dist),
    }
}
