//! Preparation noise on every input mode and the phase-keying average.
//!
//! Each copy `|α⟩` is replaced by the mixture of `|α + β⟩` with `β` a circular
//! complex Gaussian of per-component variance `σ²`; the empty mode `D` gets
//! the same treatment around 0. Under phase keying `α₁` is a complex Gaussian
//! of per-component variance `ξ²` and `α₂ = −α₁`.
//!
//! The noise reaching the two detector modes is uncorrelated (the `D`-mode
//! and unknown-copy contributions cancel in the covariance), so click
//! probabilities factorise and the closed forms below are exact.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::detection::ClickPattern;
use crate::detection::RngStream;
use crate::error::{UiError, UiResult};
use crate::optics::{compose_network, Amplitude};
use crate::parallel::{map_replicas, Execution};
use crate::protocols::{build_two_ref_setup, classify_two_ref, UIOutcome};
use crate::stats::Estimate;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Per-component standard deviation of the preparation displacement.
    pub sigma: f64,
}

impl NoiseParams {
    pub fn new(sigma: f64) -> UiResult<Self> {
        check_sigma(sigma)?;
        Ok(Self { sigma })
    }

    /// `2σ²`, the mean photon number added by the noise.
    pub fn s(&self) -> f64 {
        2.0 * self.sigma * self.sigma
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseKeyingParams {
    /// Per-component standard deviation of `α₁`.
    pub xi: f64,
}

impl PhaseKeyingParams {
    pub fn new(xi: f64) -> UiResult<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(UiError::domain(format!("xi must be positive, got {xi}")));
        }
        Ok(Self { xi })
    }
}

/// Averaged figures of merit under phase keying.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatesReport {
    pub reliability: f64,
    pub p_success: f64,
    pub p_error: f64,
    pub p_failure: f64,
    pub theta: f64,
}

/// Monte Carlo counterpart of [`RatesReport`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatesEstimate {
    /// Correct conclusions among conclusive shots.
    pub reliability: Estimate,
    pub p_success: Estimate,
    pub p_error: Estimate,
    pub p_failure: Estimate,
}

fn check_sigma(sigma: f64) -> UiResult<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(UiError::domain(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    Ok(())
}

fn check_counts(counts: &[f64]) -> UiResult<()> {
    for &n in counts {
        if !(n >= 1.0 && n.is_finite()) {
            return Err(UiError::domain(format!("copy count {n} must be >= 1")));
        }
    }
    Ok(())
}

/// `n_A n_X / (n_A + 2 n_X)`.
fn weight(n_a: f64, n_x: f64) -> f64 {
    n_a * n_x / (n_a + 2.0 * n_x)
}

/// One displacement with independent `N(0, σ²)` components.
pub fn sample_displacement<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> UiResult<Amplitude> {
    check_sigma(sigma)?;
    Ok(gaussian(sigma, rng))
}

#[inline]
fn gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> Amplitude {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Amplitude::new(re * sigma, im * sigma)
}

/// Probability that detector `k` (1 watches `C`, 2 watches `A`) stays dark
/// when the unknown is reference `i`.
#[allow(clippy::too_many_arguments)]
pub fn no_click_prob_closed(
    k: usize,
    i: usize,
    n_a: f64,
    n_b: f64,
    n_c: f64,
    sigma: f64,
    alpha1: Amplitude,
    alpha2: Amplitude,
) -> UiResult<f64> {
    check_sigma(sigma)?;
    check_counts(&[n_a, n_b, n_c])?;
    let unknown = match i {
        1 => alpha1,
        2 => alpha2,
        _ => return Err(UiError::domain(format!("hypothesis {i} not in {{1, 2}}"))),
    };
    let (w, partner) = match k {
        1 => (weight(n_a, n_c), alpha2),
        2 => (weight(n_a, n_b), alpha1),
        _ => return Err(UiError::domain(format!("detector {k} not in {{1, 2}}"))),
    };
    let g = 1.0 / (1.0 + 2.0 * sigma * sigma);
    Ok(g * (-g * w * (unknown - partner).norm_sqr()).exp())
}

/// `Tr(E_i ρ_j)` indexed `[i − 1][j − 1]`.
pub fn conclusive_probs(
    alpha1: Amplitude,
    alpha2: Amplitude,
    sigma: f64,
    n_a: f64,
    n_b: f64,
    n_c: f64,
) -> UiResult<[[f64; 2]; 2]> {
    let dark = |k, i| no_click_prob_closed(k, i, n_a, n_b, n_c, sigma, alpha1, alpha2);
    let mut out = [[0.0; 2]; 2];
    for j in 1..=2 {
        let (d1, d2) = (dark(1, j)?, dark(2, j)?);
        out[0][j - 1] = (1.0 - d1) * d2;
        out[1][j - 1] = d1 * (1.0 - d2);
    }
    Ok(out)
}

/// `θ = ((n_A + 2n_B)/(n_A n_B))(σ/2ξ)²` and `R = (1 + θ)/(1 + 2θ)`.
pub fn reliability_closed(n_a: f64, n_b: f64, sigma: f64, xi: f64) -> UiResult<(f64, f64)> {
    check_sigma(sigma)?;
    check_counts(&[n_a, n_b])?;
    PhaseKeyingParams::new(xi)?;
    let theta = (sigma / (2.0 * xi)).powi(2) / weight(n_a, n_b);
    Ok(((1.0 + theta) / (1.0 + 2.0 * theta), theta))
}

/// Success, error and failure averaged over hypotheses and the phase-keying
/// prior, for `n_B = n_C`.
pub fn averaged_rates_closed(n_a: f64, n_b: f64, sigma: f64, xi: f64) -> UiResult<RatesReport> {
    let (reliability, theta) = reliability_closed(n_a, n_b, sigma, xi)?;
    let s = 2.0 * sigma * sigma;
    let d = 1.0 + s + 8.0 * weight(n_a, n_b) * xi * xi;
    Ok(RatesReport {
        reliability,
        p_success: (1.0 - 1.0 / d) / (1.0 + s),
        p_error: s / d / (1.0 + s),
        p_failure: s / (1.0 + s) + (1.0 - s) / (1.0 + s) / d,
        theta,
    })
}

/// `E[e^{−c|α₁ − α₂|²}]` under phase keying: `|α₁ − α₂|² = 4|α₁|²` is
/// exponential with mean `8ξ²`.
fn keyed_average(c: f64, xi: f64) -> f64 {
    1.0 / (1.0 + 8.0 * c * xi * xi)
}

/// `[R(E₁), R(E₂)]` for arbitrary `n_B`, `n_C`, from the phase-keying
/// average of [`conclusive_probs`]. Reduces to [`reliability_closed`] when
/// `n_B = n_C`.
pub fn reliability_general(
    n_a: f64,
    n_b: f64,
    n_c: f64,
    sigma: f64,
    xi: f64,
) -> UiResult<[f64; 2]> {
    check_sigma(sigma)?;
    check_counts(&[n_a, n_b, n_c])?;
    PhaseKeyingParams::new(xi)?;
    let s = 2.0 * sigma * sigma;
    let g = 1.0 / (1.0 + s);
    let (wb, wc) = (weight(n_a, n_b) * g, weight(n_a, n_c) * g);
    // Averaged Tr(E_i ρ_i) and Tr(E_i ρ_j), common factor g² dropped.
    let right = |w: f64| 1.0 + s - keyed_average(w, xi);
    let wrong = |w: f64| s * keyed_average(w, xi);
    Ok([
        right(wc) / (right(wc) + wrong(wb)),
        right(wb) / (right(wb) + wrong(wc)),
    ])
}

/// Numeric phase-keying average of `Tr(E_i ρ_j)` by radial quadrature,
/// as an independent check of the averaged closed forms.
pub fn keyed_conclusive_numeric(
    n_a: f64,
    n_b: f64,
    n_c: f64,
    sigma: f64,
    xi: f64,
    points: usize,
) -> UiResult<[[f64; 2]; 2]> {
    PhaseKeyingParams::new(xi)?;
    // |α₁| = r has density (r/ξ²)e^{−r²/(2ξ²)}; the phase drops out.
    let r_max = 12.0 * xi;
    let h = r_max / points as f64;
    let mut acc = [[0.0; 2]; 2];
    for step in 0..=points {
        let r = step as f64 * h;
        let w = if step == 0 || step == points {
            0.5
        } else {
            1.0
        };
        let density = r / (xi * xi) * (-r * r / (2.0 * xi * xi)).exp();
        let a1 = Amplitude::new(r, 0.0);
        let tr = conclusive_probs(a1, -a1, sigma, n_a, n_b, n_c)?;
        for (row, tr_row) in acc.iter_mut().zip(tr) {
            for (cell, v) in row.iter_mut().zip(tr_row) {
                *cell += w * h * density * v;
            }
        }
    }
    Ok(acc)
}

/// Monte Carlo of the full network: random `α₁`, `α₂ = −α₁`, a fair-coin
/// hypothesis, and an independent displacement on every input mode.
pub fn mc_rates(
    n_a: usize,
    n_b: usize,
    sigma: f64,
    xi: f64,
    shots: u64,
    seed: u64,
) -> UiResult<RatesEstimate> {
    mc_rates_with(Execution::default(), n_a, n_b, sigma, xi, shots, seed)
}

#[derive(Clone, Copy, Default)]
struct RateCounts {
    correct: u64,
    wrong: u64,
    inconclusive: u64,
}

pub fn mc_rates_with(
    exec: Execution,
    n_a: usize,
    n_b: usize,
    sigma: f64,
    xi: f64,
    shots: u64,
    seed: u64,
) -> UiResult<RatesEstimate> {
    check_sigma(sigma)?;
    PhaseKeyingParams::new(xi)?;
    if shots == 0 {
        return Err(UiError::InvalidShotCount(0));
    }
    let setup = build_two_ref_setup(n_a, n_b, n_b, 0.5)?;
    let u = compose_network(&setup.network);
    let rows: Vec<Vec<Amplitude>> = setup
        .detectors
        .modes()
        .iter()
        .map(|&d| (0..u.dim()).map(|j| u.entry(d, j)).collect())
        .collect();
    let layout = &setup.layout;

    let parts = map_replicas(exec, shots, |replica, n| {
        let mut rng = RngStream::new(seed, replica);
        let mut tally = RateCounts::default();
        let mut input = vec![Amplitude::new(0.0, 0.0); u.dim()];
        for _ in 0..n {
            let a1 = gaussian(xi, &mut rng);
            let truth = if rng.random::<bool>() { 1 } else { 2 };
            let hyp =
                crate::protocols::Hypothesis::new(truth, vec![a1, -a1]).expect("two references");
            layout
                .fill(&hyp, &mut input, |_| gaussian(sigma, &mut rng))
                .expect("layout matches hypothesis");
            let clicks: Vec<bool> = rows
                .iter()
                .map(|row| {
                    let amp: Amplitude = row.iter().zip(&input).map(|(c, x)| c * x).sum();
                    rng.random::<f64>() >= (-amp.norm_sqr()).exp()
                })
                .collect();
            match classify_two_ref(&ClickPattern::from_clicks(&clicks)) {
                UIOutcome::Conclusive(w) if w == truth => tally.correct += 1,
                UIOutcome::Conclusive(_) => tally.wrong += 1,
                UIOutcome::Inconclusive => tally.inconclusive += 1,
            }
        }
        tally
    });
    let total = parts.iter().fold(RateCounts::default(), |a, p| RateCounts {
        correct: a.correct + p.correct,
        wrong: a.wrong + p.wrong,
        inconclusive: a.inconclusive + p.inconclusive,
    });
    Ok(RatesEstimate {
        reliability: Estimate::proportion(total.correct, total.correct + total.wrong),
        p_success: Estimate::proportion(total.correct, shots),
        p_error: Estimate::proportion(total.wrong, shots),
        p_failure: Estimate::proportion(total.inconclusive, shots),
    })
}

fn check_integral_args(a: f64, b: f64, sigma: f64) -> UiResult<()> {
    check_sigma(sigma)?;
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(UiError::domain(format!(
            "need a, b > 0, got a = {a}, b = {b}"
        )));
    }
    Ok(())
}

/// `I_m = b/(b + 2maσ²) · e^{−a|x|²/(b + 2maσ²)}`.
pub fn gaussian_integral_im(m: u32, a: f64, b: f64, x: Amplitude, sigma: f64) -> UiResult<f64> {
    check_integral_args(a, b, sigma)?;
    let denom = b + 2.0 * m as f64 * a * sigma * sigma;
    Ok(b / denom * (-a / denom * x.norm_sqr()).exp())
}

/// `I_m(a, b) = b/(b + 2aσ²) · I_{m−1}(a, b + 2aσ²)`, ending at `I_0 = e^{−(a/b)|x|²}`.
pub fn gaussian_integral_recursive(
    m: u32,
    a: f64,
    b: f64,
    x: Amplitude,
    sigma: f64,
) -> UiResult<f64> {
    check_integral_args(a, b, sigma)?;
    let mut factor = 1.0;
    let mut b_k = b;
    for _ in 0..m {
        let next = b_k + 2.0 * a * sigma * sigma;
        factor *= b_k / next;
        b_k = next;
    }
    Ok(factor * (-a / b_k * x.norm_sqr()).exp())
}

/// `I_1` by a 2D trapezoid over `±8σ` around the Gaussian's centre.
pub fn gaussian_integral_numeric_m1(
    a: f64,
    b: f64,
    x: Amplitude,
    sigma: f64,
    points: usize,
) -> UiResult<f64> {
    check_integral_args(a, b, sigma)?;
    if sigma == 0.0 {
        return Err(UiError::domain("numeric integral needs sigma > 0"));
    }
    let half = 8.0 * sigma;
    let h = 2.0 * half / points as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    let mut sum = 0.0;
    for i in 0..=points {
        let re = -half + i as f64 * h;
        let wi = if i == 0 || i == points { 0.5 } else { 1.0 };
        for j in 0..=points {
            let im = -half + j as f64 * h;
            let wj = if j == 0 || j == points { 0.5 } else { 1.0 };
            let alpha = Amplitude::new(re, im);
            let f =
                (-alpha.norm_sqr() / (2.0 * sigma * sigma) - a / b * (x + alpha).norm_sqr()).exp();
            sum += wi * wj * f;
        }
    }
    Ok(sum * h * h * norm)
}
