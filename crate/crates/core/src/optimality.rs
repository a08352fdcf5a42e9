//! Two-detector bound for linear-optics identification of two references.
//!
//! A detector whose click proves `α_? = α₁` must see `λ₁(α_? − α₂)`, one for
//! `α₂` sees `λ₂(α_? − α₁)`. Orthogonality of the two transfer rows forces
//! `λ₁²λ₂² ≤ (1 − 2λ₁²)(1 − 2λ₂²)`; saturating it and maximising over `λ₁²`
//! lands on `λ₁² = 1/3`, the single-copy setup.

use serde::{Deserialize, Serialize};

use crate::error::{UiError, UiResult};
use crate::optics::{Amplitude, ModeRegister, Network};
use crate::search::golden_section_max;

const SEARCH_TOL: f64 = 1e-8;

/// Squared detector couplings `(|λ₁|², |λ₂|²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorCoupling {
    pub lambda1_sq: f64,
    pub lambda2_sq: f64,
}

impl DetectorCoupling {
    pub fn new(lambda1_sq: f64, lambda2_sq: f64) -> UiResult<Self> {
        let c = Self {
            lambda1_sq,
            lambda2_sq,
        };
        if !c.is_feasible(1e-12) {
            return Err(UiError::domain(format!(
                "couplings ({lambda1_sq}, {lambda2_sq}) violate the row bound"
            )));
        }
        Ok(c)
    }

    /// `(1 − 2λ₁²)(1 − 2λ₂²) − λ₁²λ₂²`; non-negative when realisable.
    pub fn slack(&self) -> f64 {
        let (a, b) = (self.lambda1_sq, self.lambda2_sq);
        (1.0 - 2.0 * a) * (1.0 - 2.0 * b) - a * b
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        let in_range = |x: f64| (0.0..=0.5).contains(&x);
        in_range(self.lambda1_sq) && in_range(self.lambda2_sq) && self.slack() >= -tol
    }

    /// `½Σ(1 − e^{−λ_i²Δ²})`.
    pub fn success(&self, delta: f64) -> f64 {
        let d2 = delta * delta;
        0.5 * (-(-self.lambda1_sq * d2).exp_m1() - (-self.lambda2_sq * d2).exp_m1())
    }
}

fn check_l1(l1: f64) -> UiResult<()> {
    if !(0.0..=0.5).contains(&l1) {
        return Err(UiError::domain(format!("|λ₁|² = {l1} outside [0, 1/2]")));
    }
    Ok(())
}

fn check_delta(delta: f64) -> UiResult<()> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(UiError::domain(format!(
            "separation {delta} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// Largest `|λ₂|²` allowed for a given `|λ₁|²`: `(1 − 2l₁)/(2 − 3l₁)`.
pub fn lambda2_sq_max(l1: f64) -> UiResult<f64> {
    check_l1(l1)?;
    Ok((1.0 - 2.0 * l1) / (2.0 - 3.0 * l1))
}

/// `(1 − l₁)/(2 − 3l₁)`, the exponent as typeset alongside the bound. It
/// exceeds the bound for every `l₁ > 0` and is kept only for comparison.
pub fn lambda2_sq_nominal(l1: f64) -> UiResult<f64> {
    check_l1(l1)?;
    Ok((1.0 - l1) / (2.0 - 3.0 * l1))
}

/// Success with `|λ₂|²` on the bound.
pub fn two_detector_p(l1: f64, delta: f64) -> UiResult<f64> {
    check_delta(delta)?;
    Ok(DetectorCoupling {
        lambda1_sq: l1,
        lambda2_sq: lambda2_sq_max(l1)?,
    }
    .success(delta))
}

/// Same objective with the nominal exponent.
pub fn two_detector_p_nominal(l1: f64, delta: f64) -> UiResult<f64> {
    check_delta(delta)?;
    Ok(DetectorCoupling {
        lambda1_sq: l1,
        lambda2_sq: lambda2_sq_nominal(l1)?,
    }
    .success(delta))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LambdaOptimum {
    Optimum {
        lambda1_sq: f64,
        p: f64,
    },
    /// `Δ = 0`: every coupling gives zero, so there is no unique maximiser.
    Degenerate,
}

impl LambdaOptimum {
    pub fn lambda1_sq(&self) -> Option<f64> {
        match *self {
            LambdaOptimum::Optimum { lambda1_sq, .. } => Some(lambda1_sq),
            LambdaOptimum::Degenerate => None,
        }
    }
}

/// Golden-section maximisation of [`two_detector_p`] over `[0, 1/2]`.
pub fn optimize_lambda1(delta: f64) -> UiResult<LambdaOptimum> {
    check_delta(delta)?;
    if delta == 0.0 {
        return Ok(LambdaOptimum::Degenerate);
    }
    let objective = |l1: f64| two_detector_p(l1, delta).unwrap_or(f64::NEG_INFINITY);
    let (lambda1_sq, p) = golden_section_max(objective, 0.0, 0.5, SEARCH_TOL);
    Ok(LambdaOptimum::Optimum { lambda1_sq, p })
}

/// Pairwise merge cascade sending a real non-negative vector to
/// `(‖v‖, 0, …, 0)`.
pub fn merge_cascade(magnitudes: &[f64]) -> UiResult<Network> {
    if magnitudes.is_empty() {
        return Err(UiError::InvalidCopyCount("empty coupling list".into()));
    }
    let mut net = Network::new(magnitudes.len())?;
    let mut acc = magnitudes[0] * magnitudes[0];
    for (j, &m) in magnitudes.iter().enumerate().skip(1) {
        let next = m * m;
        let t = if acc + next == 0.0 {
            1.0
        } else {
            acc / (acc + next)
        };
        net.add(t, 0, j)?;
        acc += next;
    }
    Ok(net)
}

/// Success of the multi-detector arrangement and of its two-detector
/// reduction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionCheck {
    pub p_multi: f64,
    pub p_two: f64,
    pub kappa1_sq: f64,
    pub kappa2_sq: f64,
}

impl ReductionCheck {
    pub fn agrees(&self, tol: f64) -> bool {
        (self.p_multi - self.p_two).abs() <= tol
    }
}

fn merged_intensity(couplings: &[f64], delta: f64) -> UiResult<f64> {
    let mags: Vec<f64> = couplings.iter().map(|l| l.abs()).collect();
    let net = merge_cascade(&mags)?;
    let input = ModeRegister::new(
        mags.iter()
            .map(|&m| Amplitude::new(m * delta, 0.0))
            .collect(),
    )?;
    let out = net.apply(&input)?;
    Ok(out.amps()[0].norm_sqr())
}

/// `P_multi` from every detector firing independently, `P_two` after the
/// cascade has merged each group onto one port.
pub fn multi_detector_reduction_check(
    list1: &[f64],
    list2: &[f64],
    delta: f64,
) -> UiResult<ReductionCheck> {
    check_delta(delta)?;
    let d2 = delta * delta;
    let dark = |list: &[f64]| list.iter().map(|l| (-l * l * d2).exp()).product::<f64>();
    let p_multi = 0.5 * (1.0 - dark(list1)) + 0.5 * (1.0 - dark(list2));
    let (m1, m2) = (
        merged_intensity(list1, delta)?,
        merged_intensity(list2, delta)?,
    );
    let p_two = 0.5 * (-(-m1).exp_m1()) + 0.5 * (-(-m2).exp_m1());
    Ok(ReductionCheck {
        p_multi,
        p_two,
        kappa1_sq: list1.iter().map(|l| l * l).sum(),
        kappa2_sq: list2.iter().map(|l| l * l).sum(),
    })
}
