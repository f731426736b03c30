//! Seeded Gaussian sampling, the standard normal CDF and its inverse,
//! Haar-random orthogonal matrices and closed-form Gaussian tail bounds.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{OrthogonalMatrix, SquareMatrix};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// A reproducible stream of random numbers.
///
/// Backed by ChaCha20: `seed` expands to the key and `stream_id` selects the
/// 64-bit stream nonce, so distinct stream ids give independent sequences
/// under the same seed. Each stream has period `2^68` 32-bit words.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A child stream that depends only on `(seed, stream_id, index)`, not on
    /// how far this stream has advanced.
    pub fn substream(&self, index: u64) -> RandomStream {
        RandomStream::new(splitmix64(self.seed ^ splitmix64(self.stream_id)), index)
    }

    /// Draws a fresh root seed from this stream for a family of chunk
    /// streams. Advances `self` by one word.
    pub(crate) fn fork_root(&mut self) -> u64 {
        self.next_u64()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw from the open interval `(0, 1)` on the grid
    /// `(k + 1/2) 2^-53`.
    pub fn next_uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..bound`, without modulo bias.
    pub fn next_index(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "empty range");
        let bound = bound as u64;
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % bound) as usize;
            }
        }
    }

    /// Standard normal draw by inversion of a uniform.
    pub fn next_gaussian(&mut self) -> f64 {
        icdf_unchecked(self.next_uniform_open())
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.next_gaussian();
        }
    }

    /// `n` independent standard normal draws.
    pub fn sample_gaussian_vector(&mut self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        self.fill_gaussian(&mut v);
        v
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Free-function form of [`RandomStream::sample_gaussian_vector`].
pub fn sample_gaussian_vector(n: usize, stream: &mut RandomStream) -> Vec<f64> {
    stream.sample_gaussian_vector(n)
}

/// Standard normal density.
pub fn gaussian_pdf(t: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * t * t).exp()
}

/// Standard normal CDF, `Φ(t) = erfc(-t/√2) / 2`.
pub fn gaussian_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / SQRT_2)
}

/// Inverse of [`gaussian_cdf`] on the open unit interval.
pub fn gaussian_icdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(icdf_unchecked(p))
}

fn icdf_unchecked(p: f64) -> f64 {
    // 1 - p is exact for p >= 1/2, so the upper half reuses the lower tail
    if p > 0.5 {
        -icdf_lower(1.0 - p)
    } else {
        icdf_lower(p)
    }
}

// p in (0, 1/2]: Acklam's rational approximation (relative error 1.15e-9),
// then one Newton step against the CDF.
fn icdf_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let density = gaussian_pdf(x);
    if density > 0.0 {
        x - (gaussian_cdf(x) - p) / density
    } else {
        x
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// columns of `Q` multiplied by the signs of `diag(R)`.
pub fn haar_orthogonal(n: usize, stream: &mut RandomStream) -> OrthogonalMatrix {
    assert!(n >= 1, "dimension must be positive");
    let entries = stream.sample_gaussian_vector(n * n);
    let g = DMatrix::from_row_slice(n, n, &entries);
    let qr = g.qr();
    let r_diag = qr.r().diagonal();
    let mut q = qr.q();
    for (j, &r) in r_diag.iter().enumerate() {
        if r < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    OrthogonalMatrix::new(SquareMatrix::from_dmatrix(&q))
        .expect("Householder QR of a Gaussian matrix is orthogonal to working precision")
}

/// `2 exp(-t²/2)`, an upper bound on `P{|ξ| > t}` for a standard normal `ξ`.
pub fn coordinate_tail_bound(t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Precondition(format!("tail threshold must be >= 0, got {t}")));
    }
    Ok(2.0 * (-0.5 * t * t).exp())
}

/// Thresholds and probability bound for the squared norm of a standard
/// Gaussian vector: each of `P{|x|² > upper}` and `P{|x|² ≤ lower}` is at
/// most `probability_bound`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormConcentration {
    pub upper_threshold: f64,
    pub lower_threshold: f64,
    pub probability_bound: f64,
}

pub fn norm_concentration_bound(n: usize, epsilon: f64) -> Result<NormConcentration> {
    if n == 0 {
        return Err(Error::Precondition("dimension must be positive".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Precondition(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let n = n as f64;
    Ok(NormConcentration {
        upper_threshold: n / (1.0 - epsilon),
        lower_threshold: (1.0 - epsilon) * n,
        probability_bound: (-epsilon * epsilon * n / 4.0).exp(),
    })
}

/// `2Φ(-t)`, the exact two-sided tail of a standard normal.
pub fn two_sided_tail(t: f64) -> f64 {
    2.0 * gaussian_cdf(-t.abs())
}
