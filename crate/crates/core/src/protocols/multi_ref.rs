//! Identification among `m ≥ 2` reference kinds with equal copy counts.
//!
//! The concentrated unknown is cut into `m` equal parts by a splitter
//! cascade; part `k` meets reference `k` on comparison splitter `C_k`, whose
//! second output (watched by `D_k`) is vacuum exactly when the unknown is
//! reference `k`. Conclusion `k` requires every detector except `D_k` to fire.

use crate::detection::DetectorBank;
use crate::error::{UiError, UiResult};
use crate::optics::{build_concentrator, Amplitude, Network};

use super::{check_count, ConclusionRule, InputLayout, ModeGroup, Source, UISetup};

/// `T_k = n_a / (n_a + m·n_b)` for every comparison splitter.
pub fn comparison_transmittivity(m: usize, n_a: f64, n_b: f64) -> f64 {
    n_a / (n_a + m as f64 * n_b)
}

/// Transmittivities of the equal-split cascade: stage `j` (1-based) keeps
/// `1 − 1/(m − j + 1)` of what is left on the carrier.
pub fn split_cascade(m: usize) -> Vec<f64> {
    (1..m).map(|j| 1.0 - 1.0 / (m - j + 1) as f64).collect()
}

/// Mode layout: `[A × n_a | R₁ × n_b | … | R_m × n_b | S₁ … S_{m−1}]`.
pub fn build_multi_ref_setup(m: usize, n_a: usize, n_b: usize) -> UiResult<UISetup> {
    if m < 2 {
        return Err(UiError::InvalidCopyCount(format!(
            "need at least two reference kinds, got {m}"
        )));
    }
    check_count(n_a, "n_a")?;
    check_count(n_b, "n_b")?;

    let ref_start = |k: usize| n_a + (k - 1) * n_b;
    let split_mode = |j: usize| n_a + m * n_b + (j - 1);
    let mode_count = n_a + m * n_b + (m - 1);
    let mut net = Network::new(mode_count)?;

    let conc_a = build_concentrator(n_a)?;
    net.append_mapped(&conc_a, &(0..n_a).collect::<Vec<_>>())?;
    let conc_b = build_concentrator(n_b)?;
    for k in 1..=m {
        let s = ref_start(k);
        net.append_mapped(&conc_b, &(s..s + n_b).collect::<Vec<_>>())?;
    }

    // Part j < m leaves on S_j with positive sign; the carrier (mode 0) ends as part m.
    for (j, t) in split_cascade(m).into_iter().enumerate() {
        net.add(t, split_mode(j + 1), 0)?;
    }
    let part = |k: usize| if k < m { split_mode(k) } else { 0 };

    let t_cmp = comparison_transmittivity(m, n_a as f64, n_b as f64);
    for k in 1..=m {
        net.add(t_cmp, part(k), ref_start(k))?;
    }

    let mut groups = vec![ModeGroup {
        label: "A".into(),
        source: Source::Unknown,
        modes: (0..n_a).collect(),
        scale: 1.0,
    }];
    for k in 1..=m {
        groups.push(ModeGroup {
            label: format!("R{k}"),
            source: Source::Reference(k),
            modes: (ref_start(k)..ref_start(k) + n_b).collect(),
            scale: 1.0,
        });
    }
    groups.push(ModeGroup {
        label: "S".into(),
        source: Source::Vacuum,
        modes: (1..m).map(split_mode).collect(),
        scale: 1.0,
    });
    let layout = InputLayout::new(mode_count, groups)?;
    let detectors = DetectorBank::clicks((1..=m).map(ref_start).collect())?;
    UISetup::assemble(net, detectors, ConclusionRule::AllButOne, layout, m)
}

/// Closed-form success probability with equal priors:
/// `Σ_j (1/m) Π_{k≠j} (1 − e^{−(n_a n_b/(n_a + m n_b))|α_j − α_k|²})`.
pub fn analytic_multi_ref_p(m: usize, n_a: f64, n_b: f64, ref_amps: &[Amplitude]) -> UiResult<f64> {
    if ref_amps.len() != m {
        return Err(UiError::domain(format!(
            "{} reference amplitudes for m = {m}",
            ref_amps.len()
        )));
    }
    if m < 2 {
        return Err(UiError::InvalidCopyCount(format!("m = {m}")));
    }
    super::check_weight(n_a, true)?;
    super::check_weight(n_b, true)?;
    let coeff = n_a * n_b / (n_a + m as f64 * n_b);
    let total: f64 = ref_amps
        .iter()
        .enumerate()
        .map(|(j, aj)| {
            ref_amps
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, ak)| -(-coeff * (aj - ak).norm_sqr()).exp_m1())
                .product::<f64>()
        })
        .sum();
    Ok(total / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::p_click;
    use crate::protocols::{analytic_two_ref, Hypothesis, UIOutcome};

    fn c(re: f64, im: f64) -> Amplitude {
        Amplitude::new(re, im)
    }

    #[test]
    fn transmittivities() {
        assert_eq!(comparison_transmittivity(3, 1.0, 1.0), 0.25);
        let cascade = split_cascade(4);
        assert_eq!(cascade.len(), 3);
        assert!((cascade[0] - 0.75).abs() < 1e-15);
        assert!((cascade[2] - 0.5).abs() < 1e-15);
        assert!(build_multi_ref_setup(1, 1, 1).is_err());
        assert!(build_multi_ref_setup(3, 0, 1).is_err());
    }

    #[test]
    fn equal_split_and_cancellation() {
        let refs = vec![c(0.2, 0.1), c(-1.0, 0.7), c(0.9, -0.4), c(0.0, 1.5)];
        for (n_a, n_b) in [(1, 1), (2, 3), (3, 1)] {
            let setup = build_multi_ref_setup(4, n_a, n_b).unwrap();
            assert!(setup.unitarity_defect() < 1e-12);
            for k in 1..=4 {
                let hyp = Hypothesis::new(k, refs.clone()).unwrap();
                let amps = setup.detector_amps(&hyp).unwrap();
                assert!(amps[k - 1].norm() < 1e-12, "D{k} not vacuum");
                // Other detectors see √(T n_b)(α_j − α_k).
                let coeff = comparison_transmittivity(4, n_a as f64, n_b as f64) * n_b as f64;
                for (j, a) in amps.iter().enumerate() {
                    let want = (refs[j] - refs[k - 1]) * coeff.sqrt();
                    assert!((a - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        let same = vec![c(0.3, 0.3); 3];
        assert_eq!(analytic_multi_ref_p(3, 1.0, 1.0, &same).unwrap(), 0.0);

        for (n_a, n_b, d) in [(1.0, 1.0, 1.3), (2.0, 3.0, 0.6)] {
            let (a1, a2) = (c(0.1, 0.0), c(0.1 + d, 0.0));
            let two = analytic_two_ref(n_a, n_b, n_b, 0.5, a1, a2, [0.5, 0.5]).unwrap();
            let multi = analytic_multi_ref_p(2, n_a, n_b, &[a1, a2]).unwrap();
            assert!((two.total - multi).abs() < 1e-14);
        }

        // Brute-force expansion over j and k ≠ j for {0, 2, 2i}, coefficient 1/4.
        let q = |x: f64| 1.0 - (-x / 4.0).exp();
        let want = (q(4.0) * q(4.0) + q(4.0) * q(8.0) + q(4.0) * q(8.0)) / 3.0;
        let got =
            analytic_multi_ref_p(3, 1.0, 1.0, &[c(0.0, 0.0), c(2.0, 0.0), c(0.0, 2.0)]).unwrap();
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.497574).abs() < 5e-7);
    }

    #[test]
    fn closed_form_matches_pattern_enumeration() {
        let refs = vec![c(0.0, 0.0), c(2.0, 0.0), c(0.0, 2.0)];
        let setup = build_multi_ref_setup(3, 1, 1).unwrap();
        let mut p = 0.0;
        for k in 1..=3 {
            let hyp = Hypothesis::new(k, refs.clone()).unwrap();
            p += setup
                .outcome_probability(&hyp, UIOutcome::Conclusive(k))
                .unwrap()
                / 3.0;
            for j in (1..=3).filter(|&j| j != k) {
                assert!(
                    setup
                        .outcome_probability(&hyp, UIOutcome::Conclusive(j))
                        .unwrap()
                        < 1e-24
                );
            }
        }
        assert!((p - analytic_multi_ref_p(3, 1.0, 1.0, &refs).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn two_kinds_reduce_to_two_reference_exponent() {
        let (a1, a2) = (c(0.5, -0.2), c(-0.3, 0.8));
        for (n_a, n_b) in [(1usize, 1usize), (3, 2)] {
            let setup = build_multi_ref_setup(2, n_a, n_b).unwrap();
            let hyp = Hypothesis::new(1, vec![a1, a2]).unwrap();
            let amps = setup.detector_amps(&hyp).unwrap();
            let coeff = (n_a * n_b) as f64 / (n_a + 2 * n_b) as f64;
            let want = -(-coeff * (a1 - a2).norm_sqr()).exp_m1();
            assert!((p_click(amps[1]) - want).abs() < 1e-12);
        }
    }
}
