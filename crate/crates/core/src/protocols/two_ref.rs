//! The three-splitter identification scheme for two reference kinds.
//!
//! Mode roles: `A` carries the (concentrated) unknown, `B` and `C` the two
//! references, `D` starts in vacuum. Detector `D₁` watches output `C` and
//! `D₂` watches output `A`:
//!
//! ```text
//! B₁(T₁) on (D, A)    B₂(T₂) on (B, A)    B₃(T₃) on (D, C)
//! ```

use crate::detection::{ClickPattern, DetectorBank};
use crate::error::{UiError, UiResult};
use crate::optics::{build_concentrator, Amplitude, Network};
use crate::search::golden_section_max;

use super::{
    check_count, check_weight, ConclusionRule, InputLayout, ModeGroup, Source, UIOutcome, UISetup,
};

/// Convergence tolerance of the numeric `T₁` search.
const T1_SEARCH_TOL: f64 = 1e-8;

/// Transmittivities of the comparison splitters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoRefTransmittivities {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

/// `T₂`, `T₃` that null output `A` when the unknown is reference 1 and
/// output `C` when it is reference 2.
pub fn two_ref_transmittivities(
    n_a: f64,
    n_b: f64,
    n_c: f64,
    t1: f64,
) -> UiResult<TwoRefTransmittivities> {
    for n in [n_a, n_b, n_c] {
        check_weight(n, true)?;
    }
    if !(0.0..=1.0).contains(&t1) {
        return Err(UiError::InvalidTransmittivity(t1));
    }
    let t2 = 1.0 / (1.0 + n_a / n_b * t1);
    let t3 = (1.0 - t1) / (n_c / n_a + 1.0 - t1);
    Ok(TwoRefTransmittivities { t1, t2, t3 })
}

fn comparison_stage(
    net: &mut Network,
    t: &TwoRefTransmittivities,
    [a, b, c, d]: [usize; 4],
) -> UiResult<()> {
    net.add(t.t1, d, a)?;
    net.add(t.t2, b, a)?;
    net.add(t.t3, d, c)
}

/// Full setup with integer copy counts: concentrators for every group,
/// then the comparison stage.
pub fn build_two_ref_setup(n_a: usize, n_b: usize, n_c: usize, t1: f64) -> UiResult<UISetup> {
    check_count(n_a, "n_a")?;
    check_count(n_b, "n_b")?;
    check_count(n_c, "n_c")?;
    let t = two_ref_transmittivities(n_a as f64, n_b as f64, n_c as f64, t1)?;

    let a0 = 0;
    let b0 = n_a;
    let c0 = n_a + n_b;
    let d = n_a + n_b + n_c;
    let mode_count = d + 1;

    let mut net = Network::new(mode_count)?;
    for (start, n) in [(a0, n_a), (b0, n_b), (c0, n_c)] {
        let conc = build_concentrator(n)?;
        let mapping: Vec<usize> = (start..start + n).collect();
        net.append_mapped(&conc, &mapping)?;
    }
    comparison_stage(&mut net, &t, [a0, b0, c0, d])?;

    let group = |label: &str, source, start: usize, n: usize| ModeGroup {
        label: label.into(),
        source,
        modes: (start..start + n).collect(),
        scale: 1.0,
    };
    let layout = InputLayout::new(
        mode_count,
        vec![
            group("A", Source::Unknown, a0, n_a),
            group("B", Source::Reference(1), b0, n_b),
            group("C", Source::Reference(2), c0, n_c),
            group("D", Source::Vacuum, d, 1),
        ],
    )?;
    let detectors = DetectorBank::clicks(vec![c0, a0])?;
    UISetup::assemble(net, detectors, ConclusionRule::TwoRef, layout, 2)
}

/// Comparison stage alone on four single modes `(A, B, C, D)`, with each
/// input carrying `√weight·α`. Weights may be any positive reals, which is
/// how diluted references enter later rounds.
pub fn build_two_ref_weighted(n_a: f64, n_b: f64, n_c: f64, t1: f64) -> UiResult<UISetup> {
    let t = two_ref_transmittivities(n_a, n_b, n_c, t1)?;
    let mut net = Network::new(4)?;
    comparison_stage(&mut net, &t, [0, 1, 2, 3])?;
    let group = |label: &str, source, mode: usize, w: f64| ModeGroup {
        label: label.into(),
        source,
        modes: vec![mode],
        scale: w.sqrt(),
    };
    let layout = InputLayout::new(
        4,
        vec![
            group("A", Source::Unknown, 0, n_a),
            group("B", Source::Reference(1), 1, n_b),
            group("C", Source::Reference(2), 2, n_c),
            group("D", Source::Vacuum, 3, 0.0),
        ],
    )?;
    let detectors = DetectorBank::clicks(vec![2, 0])?;
    UISetup::assemble(net, detectors, ConclusionRule::TwoRef, layout, 2)
}

/// `[D₁, D₂]` pattern → conclusion. A double click is inconclusive.
pub fn classify_two_ref(pattern: &ClickPattern) -> UIOutcome {
    match (pattern.clicked(0), pattern.clicked(1)) {
        (true, false) => UIOutcome::Conclusive(1),
        (false, true) => UIOutcome::Conclusive(2),
        _ => UIOutcome::Inconclusive,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoRefProbabilities {
    /// Success probability when the unknown is reference 1.
    pub p1: f64,
    pub p2: f64,
    /// Prior-weighted total.
    pub total: f64,
}

/// Closed-form success probabilities of the two-reference scheme.
pub fn analytic_two_ref(
    n_a: f64,
    n_b: f64,
    n_c: f64,
    t1: f64,
    alpha1: Amplitude,
    alpha2: Amplitude,
    priors: [f64; 2],
) -> UiResult<TwoRefProbabilities> {
    two_ref_transmittivities(n_a, n_b, n_c, t1)?;
    if priors.iter().any(|&p| p.is_nan() || p < 0.0) || (priors[0] + priors[1] - 1.0).abs() > 1e-12
    {
        return Err(UiError::domain(format!("invalid priors {priors:?}")));
    }
    let d2 = (alpha1 - alpha2).norm_sqr();
    let r1 = 1.0 - t1;
    let k1 = n_c * n_a * r1 / (n_c + n_a * r1);
    let k2 = n_b * n_a * t1 / (n_b + n_a * t1);
    let p1 = -(-k1 * d2).exp_m1();
    let p2 = -(-k2 * d2).exp_m1();
    Ok(TwoRefProbabilities {
        p1,
        p2,
        total: priors[0] * p1 + priors[1] * p2,
    })
}

/// How `T₁` was chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum T1Choice {
    /// Equal reference counts and priors: `T₁ = 1/2` for every pair of states.
    Symmetric(f64),
    /// State-dependent optimum found by golden-section search.
    NumericSearch(f64),
}

impl T1Choice {
    pub fn value(self) -> f64 {
        match self {
            T1Choice::Symmetric(t) | T1Choice::NumericSearch(t) => t,
        }
    }
}

/// Best `T₁` for the given states: exactly 1/2 in the symmetric case,
/// otherwise a numeric maximiser of the total success probability.
pub fn optimal_t1(
    n_a: f64,
    n_b: f64,
    n_c: f64,
    alpha1: Amplitude,
    alpha2: Amplitude,
    priors: [f64; 2],
) -> UiResult<T1Choice> {
    two_ref_transmittivities(n_a, n_b, n_c, 0.5)?;
    if n_b == n_c && priors[0] == priors[1] {
        return Ok(T1Choice::Symmetric(0.5));
    }
    search_t1(n_a, n_b, n_c, alpha1, alpha2, priors).map(T1Choice::NumericSearch)
}

/// Golden-section maximisation of the total success probability over `T₁ ∈ [0, 1]`.
pub fn search_t1(
    n_a: f64,
    n_b: f64,
    n_c: f64,
    alpha1: Amplitude,
    alpha2: Amplitude,
    priors: [f64; 2],
) -> UiResult<f64> {
    analytic_two_ref(n_a, n_b, n_c, 0.5, alpha1, alpha2, priors)?;
    let objective = |t: f64| {
        analytic_two_ref(n_a, n_b, n_c, t, alpha1, alpha2, priors)
            .map(|p| p.total)
            .unwrap_or(f64::NEG_INFINITY)
    };
    Ok(golden_section_max(objective, 0.0, 1.0, T1_SEARCH_TOL).0)
}

/// Best split of `N` modes into unknown copies and two equal reference groups.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResourceSplit {
    pub total: usize,
    pub n_a: usize,
    /// Copies per reference kind (`n_b = n_c`).
    pub n_ref: usize,
    /// `n_a(N − n_a)/(2N)`, the coefficient of `|α₁ − α₂|²` in the exponent.
    pub exponent: f64,
}

impl ResourceSplit {
    /// Success probability for a separation `|α₁ − α₂| = delta`.
    pub fn probability(&self, delta: f64) -> f64 {
        -(-self.exponent * delta * delta).exp_m1()
    }

    /// Exponent coefficient for an arbitrary parity-valid `n_a`.
    pub fn exponent_for(total: usize, n_a: usize) -> f64 {
        (n_a * (total - n_a)) as f64 / (2 * total) as f64
    }
}

/// Chooses `n_a` maximising `n_a(N − n_a)` among splits where `N − n_a` is even
/// and every group gets at least one copy.
pub fn resource_tradeoff(total: usize) -> UiResult<ResourceSplit> {
    if total < 3 {
        return Err(UiError::InvalidTotal(total));
    }
    let half = total / 2;
    let n_a = if (total - half).is_multiple_of(2) {
        half
    } else if total % 2 == 1 {
        // Odd N: ⌈N/2⌉ has the right parity and the same distance to N/2.
        half + 1
    } else {
        half - 1
    };
    let n_a = n_a.min(total - 2).max(1);
    Ok(ResourceSplit {
        total,
        n_a,
        n_ref: (total - n_a) / 2,
        exponent: ResourceSplit::exponent_for(total, n_a),
    })
}

/// Success probability when both references are known exactly (infinitely
/// many reference copies): `1 − e^{−(n_a/2)|α₁−α₂|²}`.
pub fn idp_limit_p(n_a: f64, alpha1: Amplitude, alpha2: Amplitude) -> f64 {
    -(-(n_a / 2.0) * (alpha1 - alpha2).norm_sqr()).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::p_click;
    use crate::protocols::Hypothesis;
    use crate::search::grid_argmax;

    fn c(re: f64, im: f64) -> Amplitude {
        Amplitude::new(re, im)
    }

    #[test]
    fn transmittivity_examples() {
        let t = two_ref_transmittivities(1.0, 1.0, 1.0, 0.5).unwrap();
        assert!((t.t2 - 2.0 / 3.0).abs() < 1e-15 && (t.t3 - 1.0 / 3.0).abs() < 1e-15);
        let t = two_ref_transmittivities(2.0, 1.0, 1.0, 0.5).unwrap();
        assert!((t.t2 - 0.5).abs() < 1e-15 && (t.t3 - 0.5).abs() < 1e-15);
        assert!(matches!(
            build_two_ref_setup(0, 1, 1, 0.5),
            Err(UiError::InvalidCopyCount(_))
        ));
        assert!(matches!(
            build_two_ref_setup(1, 1, 1, 1.5),
            Err(UiError::InvalidTransmittivity(_))
        ));
    }

    #[test]
    fn closed_form_output_amplitudes_reproduced() {
        // Single copies, T = (1/2, 2/3, 1/3); random complex triples against the
        // hand-substituted output expressions.
        let setup = build_two_ref_weighted(1.0, 1.0, 1.0, 0.5).unwrap();
        let t = two_ref_transmittivities(1.0, 1.0, 1.0, 0.5).unwrap();
        let (r1, r2, r3) = (1.0 - t.t1, 1.0 - t.t2, 1.0 - t.t3);
        let mut seed = 0x2545F4914F6CDD1Du64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for _ in 0..20 {
            let (q, a1, a2) = (c(next(), next()), c(next(), next()), c(next(), next()));
            let reg = crate::optics::ModeRegister::new(vec![q, a1, a2, c(0.0, 0.0)]).unwrap();
            let out = setup.network.apply(&reg).unwrap();
            let want = [
                -a1 * r2.sqrt() + q * (t.t2 * t.t1).sqrt(),
                a1 * t.t2.sqrt() + q * (r2 * t.t1).sqrt(),
                -q * (r3 * r1).sqrt() + a2 * t.t3.sqrt(),
                q * (t.t3 * r1).sqrt() + a2 * r3.sqrt(),
            ];
            for (got, w) in out.amps().iter().zip(want) {
                assert!((got - w).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn matching_reference_nulls_its_detector() {
        let (a1, a2) = (c(0.3, -1.2), c(-0.8, 0.5));
        for (n_a, n_b, n_c) in [(1, 1, 1), (2, 1, 1), (3, 2, 4)] {
            let setup = build_two_ref_setup(n_a, n_b, n_c, 0.37).unwrap();
            assert!(setup.unitarity_defect() < 1e-12);
            let t = two_ref_transmittivities(n_a as f64, n_b as f64, n_c as f64, 0.37).unwrap();
            let amps = setup
                .detector_amps(&Hypothesis::new(1, vec![a1, a2]).unwrap())
                .unwrap();
            assert!(amps[1].norm() < 1e-12, "mode A not vacuum");
            let want = (a2 - a1) * (t.t3 * n_c as f64).sqrt();
            assert!((amps[0] - want).norm() < 1e-12);
            let amps = setup
                .detector_amps(&Hypothesis::new(2, vec![a1, a2]).unwrap())
                .unwrap();
            assert!(amps[0].norm() < 1e-12, "mode C not vacuum");
        }
    }

    #[test]
    fn classifier_table() {
        let p = |a, b| ClickPattern::from_clicks(&[a, b]);
        assert_eq!(classify_two_ref(&p(true, false)), UIOutcome::Conclusive(1));
        assert_eq!(classify_two_ref(&p(false, true)), UIOutcome::Conclusive(2));
        assert_eq!(classify_two_ref(&p(false, false)), UIOutcome::Inconclusive);
        assert_eq!(classify_two_ref(&p(true, true)), UIOutcome::Inconclusive);
    }

    #[test]
    fn closed_form_values() {
        let eq = [0.5, 0.5];
        let z = analytic_two_ref(1.0, 1.0, 1.0, 0.5, c(1.0, 1.0), c(1.0, 1.0), eq).unwrap();
        assert_eq!((z.p1, z.p2, z.total), (0.0, 0.0, 0.0));
        let p = analytic_two_ref(1.0, 1.0, 1.0, 0.5, c(0.0, 0.0), c(2.0, 0.0), eq).unwrap();
        assert!((p.total - 0.736403).abs() < 5e-7);
        let p = analytic_two_ref(2.0, 1.0, 1.0, 0.5, c(0.0, 0.0), c(0.0, 1.0), eq).unwrap();
        assert!((p.total - 0.393469).abs() < 5e-7);
        assert!(
            analytic_two_ref(1.0, 1.0, 1.0, 0.5, c(0.0, 0.0), c(1.0, 0.0), [0.6, 0.6]).is_err()
        );
    }

    #[test]
    fn closed_form_matches_detector_amplitudes() {
        // Independent route: click probability of the evolved detector mode.
        let (a1, a2) = (c(0.4, 0.9), c(-0.6, 0.1));
        for (n_a, n_b, n_c, t1) in [(1, 1, 1, 0.5), (2, 3, 1, 0.2), (4, 2, 2, 0.8)] {
            let setup = build_two_ref_setup(n_a, n_b, n_c, t1).unwrap();
            let d1 = setup
                .detector_amps(&Hypothesis::new(1, vec![a1, a2]).unwrap())
                .unwrap()[0];
            let d2 = setup
                .detector_amps(&Hypothesis::new(2, vec![a1, a2]).unwrap())
                .unwrap()[1];
            let p = analytic_two_ref(n_a as f64, n_b as f64, n_c as f64, t1, a1, a2, [0.5, 0.5])
                .unwrap();
            assert!((p.p1 - p_click(d1)).abs() < 1e-12);
            assert!((p.p2 - p_click(d2)).abs() < 1e-12);
        }
    }

    #[test]
    fn t1_choice() {
        let (a1, a2) = (c(0.0, 0.0), c(1.3, 0.2));
        let eq = [0.5, 0.5];
        assert_eq!(
            optimal_t1(2.0, 3.0, 3.0, a1, a2, eq).unwrap(),
            T1Choice::Symmetric(0.5)
        );
        let t = search_t1(1.0, 1.0, 1.0, a1, a2, eq).unwrap();
        assert!((t - 0.5).abs() < 1e-6);

        let choice = optimal_t1(1.0, 1.0, 4.0, a1, a2, eq).unwrap();
        assert!(matches!(choice, T1Choice::NumericSearch(_)));
        let f = |t| {
            analytic_two_ref(1.0, 1.0, 4.0, t, a1, a2, eq)
                .unwrap()
                .total
        };
        let (grid_t, _) = grid_argmax(f, 0.0, 1.0, 100_001);
        assert!((choice.value() - grid_t).abs() < 1e-4);
    }

    #[test]
    fn resource_split_examples() {
        let s = resource_tradeoff(8).unwrap();
        assert_eq!((s.n_a, s.n_ref), (4, 2));
        assert!((s.probability(1.0) - 0.632121).abs() < 5e-7);
        let s = resource_tradeoff(4).unwrap();
        assert_eq!(s.n_a, 2);
        assert_eq!(s.exponent, 0.5);
        assert_eq!(resource_tradeoff(2), Err(UiError::InvalidTotal(2)));
        assert_eq!(resource_tradeoff(3).unwrap().n_a, 1);
    }

    #[test]
    fn resource_split_is_exhaustive_optimum() {
        for total in 3..60usize {
            let best = (1..=total - 2)
                .filter(|n_a| (total - n_a) % 2 == 0)
                .max_by(|&x, &y| {
                    ResourceSplit::exponent_for(total, x)
                        .partial_cmp(&ResourceSplit::exponent_for(total, y))
                        .unwrap()
                        .then(y.cmp(&x))
                })
                .unwrap();
            let got = resource_tradeoff(total).unwrap();
            assert_eq!(
                got.exponent,
                ResourceSplit::exponent_for(total, best),
                "N = {total}"
            );
            assert_eq!((total - got.n_a) % 2, 0);
        }
        assert_eq!(resource_tradeoff(12).unwrap().n_a, 6);
    }

    #[test]
    fn known_reference_limit() {
        assert_eq!(idp_limit_p(1.0, c(0.5, 0.0), c(0.5, 0.0)), 0.0);
        assert!((idp_limit_p(1.0, c(0.0, 0.0), c(2f64.sqrt(), 0.0)) - 0.632121).abs() < 5e-7);
        for delta in [0.1, 0.7, 1.5, 3.0, 4.0] {
            let (a1, a2) = (c(0.0, 0.0), c(delta, 0.0));
            let p = analytic_two_ref(1.0, 1e6, 1e6, 0.5, a1, a2, [0.5, 0.5]).unwrap();
            assert!((p.total - idp_limit_p(1.0, a1, a2)).abs() < 1e-5);
        }
    }
}
