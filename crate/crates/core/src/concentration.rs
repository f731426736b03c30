//! Concentration bounds for Gaussian order statistics, and simulators that
//! check them.
//!
//! `ω_k` denotes the `k`-th smallest of `n` independent draws. The bound
//! calculators are pure formula evaluators; the simulators share draws
//! across ranks so the per-trial monotonicity `ω_1 ≤ … ≤ ω_n` holds exactly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{gaussian_icdf, RandomStream};
use crate::parallel::run_chunked;

fn check_rank(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Precondition(format!("rank k = {k} must lie in 1..={n}")));
    }
    Ok(())
}

fn check_probability(f: f64) -> Result<()> {
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::ProbabilityOutOfRange(f));
    }
    Ok(())
}

/// Bound on `P{ω_k < α}` given `F(α)`, valid for `F(α) < k/n < 2F(α)`.
///
/// Returns exactly 1 at the boundary `F(α) = k/n`, where the bound is
/// vacuous.
pub fn chernoff_order_stat_lower(k: usize, n: usize, f_alpha: f64) -> Result<f64> {
    check_rank(k, n)?;
    check_probability(f_alpha)?;
    let q = k as f64 / n as f64;
    if f_alpha == q {
        return Ok(1.0);
    }
    if !(f_alpha < q && q < 2.0 * f_alpha) {
        return Err(Error::Precondition(format!(
            "need F(alpha) < k/n < 2 F(alpha), got F(alpha) = {f_alpha}, k/n = {q}"
        )));
    }
    Ok((-(n as f64) / (3.0 * f_alpha) * (q - f_alpha).powi(2)).exp())
}

/// Bound on `P{ω_k > α}` given `F(α)`, valid for `F(α) > k/n`.
///
/// Returns exactly 1 at the boundary `F(α) = k/n`.
pub fn chernoff_order_stat_upper(k: usize, n: usize, f_alpha: f64) -> Result<f64> {
    check_rank(k, n)?;
    check_probability(f_alpha)?;
    let q = k as f64 / n as f64;
    if f_alpha == q {
        return Ok(1.0);
    }
    if f_alpha <= q {
        return Err(Error::Precondition(format!(
            "need F(alpha) > k/n, got F(alpha) = {f_alpha}, k/n = {q}"
        )));
    }
    Ok((-(n as f64) / (2.0 * f_alpha) * (q - f_alpha).powi(2)).exp())
}

/// `exp(-ε²k / (3(1-ε)))`, bounding `P{ω_k < α⁻}` where
/// `F(α⁻) = (1-ε)k/n`. Requires `0 < ε < 1/2`.
pub fn corollary_lower_tail(k: usize, n: usize, epsilon: f64) -> Result<f64> {
    check_rank(k, n)?;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Precondition(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    Ok((-epsilon * epsilon * k as f64 / (3.0 * (1.0 - epsilon))).exp())
}

/// `exp(-ε²k / (2(1+ε)))`, bounding `P{ω_k > α⁺}` where
/// `F(α⁺) = (1+ε)k/n`. Requires `k ≤ n/2` and `0 < ε < 1`.
pub fn corollary_upper_tail(k: usize, n: usize, epsilon: f64) -> Result<f64> {
    check_rank(k, n)?;
    if 2 * k > n {
        return Err(Error::Precondition(format!("need k <= n/2, got k = {k}, n = {n}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Precondition(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok((-epsilon * epsilon * k as f64 / (2.0 * (1.0 + epsilon))).exp())
}

/// Both corollary bounds, `(below α⁻, above α⁺)`.
pub fn corollary_tails(k: usize, n: usize, epsilon: f64) -> Result<(f64, f64)> {
    Ok((
        corollary_lower_tail(k, n, epsilon)?,
        corollary_upper_tail(k, n, epsilon)?,
    ))
}

/// Thresholds and bounds for the `k`-th Gaussian order statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderStatBound {
    pub k: usize,
    pub n: usize,
    pub epsilon: f64,
    /// `Φ⁻¹((1-ε)k/n)`.
    pub alpha_minus: f64,
    /// `Φ⁻¹((1+ε)k/n)`.
    pub alpha_plus: f64,
    /// Bound on `P{ω_k < α⁻}`.
    pub lower_tail_bound: f64,
    /// Bound on `P{ω_k > α⁺}`.
    pub upper_tail_bound: f64,
    /// `ε√(8π)/(1-ε)`.
    pub gap_bound: f64,
}

impl OrderStatBound {
    pub fn gap(&self) -> f64 {
        self.alpha_plus - self.alpha_minus
    }

    /// Bound on `P{ω_k ∉ [α⁻, α⁺]}`.
    pub fn two_sided_bound(&self) -> f64 {
        (self.lower_tail_bound + self.upper_tail_bound).min(1.0)
    }
}

pub fn gaussian_order_stat_bound(k: usize, n: usize, epsilon: f64) -> Result<OrderStatBound> {
    check_rank(k, n)?;
    if 2 * k > n {
        return Err(Error::Precondition(format!("need k <= n/2, got k = {k}, n = {n}")));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Precondition(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    let q = k as f64 / n as f64;
    let alpha_minus = gaussian_icdf((1.0 - epsilon) * q)?;
    let alpha_plus = gaussian_icdf((1.0 + epsilon) * q)?;
    let tail = (-epsilon * epsilon * k as f64 / 3.0).exp();
    let bound = OrderStatBound {
        k,
        n,
        epsilon,
        alpha_minus,
        alpha_plus,
        lower_tail_bound: tail,
        upper_tail_bound: tail,
        gap_bound: epsilon * (8.0 * PI).sqrt() / (1.0 - epsilon),
    };
    if !(bound.gap() >= 0.0 && bound.gap() <= bound.gap_bound) {
        return Err(Error::Precondition(format!(
            "gap {} exceeds {} at k = {k}, n = {n}, epsilon = {epsilon}",
            bound.gap(),
            bound.gap_bound
        )));
    }
    Ok(bound)
}

/// `3√(ln n / k)`.
pub fn epsilon_k(k: usize, n: usize) -> f64 {
    3.0 * ((n as f64).ln() / k as f64).sqrt()
}

/// One rank in [`epsilon_k_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonKCheck {
    pub k: usize,
    pub epsilon: f64,
    /// `exp(-ε²k/3)`, the bound on each tail.
    pub tail_bound: f64,
    /// `n⁻³`.
    pub target: f64,
}

impl EpsilonKCheck {
    /// `ε < 1/2` and `tail_bound ≤ n⁻³` up to rounding in the exponent.
    pub fn holds(&self) -> bool {
        self.epsilon < 0.5 && self.tail_bound <= self.target * (1.0 + 1e-12)
    }
}

/// Evaluates the choice `ε = ε_k` for every `k` with `36 ln n ≤ k ≤ n/2`.
///
/// With this choice `ε²k/3 = 3 ln n`, so each tail bound equals `n⁻³`.
pub fn epsilon_k_check(n: usize) -> Result<Vec<EpsilonKCheck>> {
    if n < 2 {
        return Err(Error::Precondition("need n >= 2".into()));
    }
    let first = (36.0 * (n as f64).ln()).ceil() as usize;
    let target = (n as f64).powi(-3);
    Ok((first.max(1)..=n / 2)
        .map(|k| {
            let epsilon = epsilon_k(k, n);
            EpsilonKCheck {
                k,
                epsilon,
                tail_bound: (-epsilon * epsilon * k as f64 / 3.0).exp(),
                target,
            }
        })
        .collect())
}

/// `trials` independent samples of `ω_k` among `n` standard Gaussians.
pub fn simulate_order_stat(k: usize, n: usize, trials: usize, stream: &mut RandomStream) -> Result<Vec<f64>> {
    Ok(simulate_order_stats(&[k], n, trials, stream)?.pop().unwrap())
}

/// Samples of `ω_k` for each rank in `ks`, computed from shared draws:
/// `result[j][t]` is `ω_{ks[j]}` in trial `t`.
pub fn simulate_order_stats(
    ks: &[usize],
    n: usize,
    trials: usize,
    stream: &mut RandomStream,
) -> Result<Vec<Vec<f64>>> {
    if trials == 0 {
        return Err(Error::Precondition("at least one trial is required".into()));
    }
    for &k in ks {
        check_rank(k, n)?;
    }
    let mut ranks: Vec<usize> = ks.to_vec();
    ranks.sort_unstable();
    ranks.dedup();
    let mut by_rank: Vec<Vec<f64>> = vec![Vec::with_capacity(trials); ranks.len()];
    run_chunked(
        trials,
        stream,
        |len, s| {
            let mut x = vec![0.0; n];
            let mut out = vec![Vec::with_capacity(len); ranks.len()];
            for _ in 0..len {
                s.fill_gaussian(&mut x);
                // select from the top rank down so each call works on a prefix
                let mut hi = n;
                for (j, &k) in ranks.iter().enumerate().rev() {
                    let (_, kth, _) = x[..hi].select_nth_unstable_by(k - 1, f64::total_cmp);
                    out[j].push(*kth);
                    hi = k - 1;
                }
            }
            out
        },
        |part| {
            for (dst, src) in by_rank.iter_mut().zip(part) {
                dst.extend(src);
            }
        },
    );
    Ok(ks
        .iter()
        .map(|k| by_rank[ranks.binary_search(k).unwrap()].clone())
        .collect())
}

/// One grid point of [`verify_grid`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub bound: OrderStatBound,
    pub trials: usize,
    /// Frequency of `ω_k < α⁻`.
    pub empirical_lower: f64,
    /// Frequency of `ω_k > α⁺`.
    pub empirical_upper: f64,
}

impl GridRow {
    /// Frequency of `ω_k ∉ [α⁻, α⁺]`.
    pub fn empirical(&self) -> f64 {
        self.empirical_lower + self.empirical_upper
    }

    fn within(freq: f64, bound: f64, trials: usize) -> bool {
        let sd = (freq * (1.0 - freq) / trials as f64).sqrt();
        freq <= bound + 3.0 * sd
    }

    /// Every tail frequency is at most its bound plus three Monte Carlo
    /// standard deviations, and the gap inequality holds.
    pub fn passes(&self) -> bool {
        let b = &self.bound;
        Self::within(self.empirical_lower, b.lower_tail_bound, self.trials)
            && Self::within(self.empirical_upper, b.upper_tail_bound, self.trials)
            && Self::within(self.empirical(), b.two_sided_bound(), self.trials)
            && b.gap() >= 0.0
            && b.gap() <= b.gap_bound
    }
}

/// The verification grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_values: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub trials: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_values: vec![100, 1000],
            epsilons: vec![0.1, 0.2, 0.4],
            trials: 10_000,
        }
    }
}

/// Ranks `⌈36 ln n⌉`, `n/4`, `n/2`, dropping any above `n/2` (where the
/// bounds do not apply) and duplicates.
pub fn grid_ranks(n: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = [(36.0 * (n as f64).ln()).ceil() as usize, n / 4, n / 2]
        .into_iter()
        .filter(|&k| k >= 1 && 2 * k <= n)
        .collect();
    ks.sort_unstable();
    ks.dedup();
    ks
}

/// Simulates every grid point. One set of draws per `n` is shared by all
/// ranks and all `ε`.
pub fn verify_grid(config: &GridConfig, stream: &mut RandomStream) -> Result<Vec<GridRow>> {
    let mut rows = Vec::new();
    for &n in &config.n_values {
        let ks = grid_ranks(n);
        if ks.is_empty() {
            continue;
        }
        let samples = simulate_order_stats(&ks, n, config.trials, stream)?;
        for (&k, omega) in ks.iter().zip(&samples) {
            for &epsilon in &config.epsilons {
                let bound = gaussian_order_stat_bound(k, n, epsilon)?;
                let t = config.trials as f64;
                let below = omega.iter().filter(|&&w| w < bound.alpha_minus).count();
                let above = omega.iter().filter(|&&w| w > bound.alpha_plus).count();
                rows.push(GridRow {
                    bound,
                    trials: config.trials,
                    empirical_lower: below as f64 / t,
                    empirical_upper: above as f64 / t,
                });
            }
        }
    }
    Ok(rows)
}
