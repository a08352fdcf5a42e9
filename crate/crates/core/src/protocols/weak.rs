//! Weak implementation: every resource is cut into `N` equal parts and the
//! single-copy comparison is repeated on the parts until one round concludes.
//!
//! The overall success matches a single strong round, and the untouched parts
//! are merged back into diluted references.

use rand::Rng;

use crate::detection::{sample_mode, ClickPattern, RngStream};
use crate::error::{UiError, UiResult};
use crate::optics::{build_concentrator, Amplitude, ModeRegister};
use crate::parallel::{map_replicas, Execution};

use super::{build_two_ref_setup, Hypothesis, OutcomeCounts, UIOutcome, UISetup};

/// Outcome of one weak run.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakRun {
    pub outcome: UIOutcome,
    /// 1-based round that concluded, if any.
    pub round: Option<usize>,
    /// Concentrated leftovers `(reference 1, reference 2)`; `None` when no round concluded.
    pub leftover: Option<ModeRegister>,
}

fn check_rounds(n: usize) -> UiResult<()> {
    if n == 0 {
        return Err(UiError::InvalidShotCount(0));
    }
    Ok(())
}

fn round_setup() -> UiResult<UISetup> {
    build_two_ref_setup(1, 1, 1, 0.5)
}

/// Merges `count` copies of `amp` into one mode; vacuum when `count` is 0.
fn concentrate(amp: Amplitude, count: usize) -> UiResult<Amplitude> {
    if count == 0 {
        return Ok(Amplitude::new(0.0, 0.0));
    }
    let net = build_concentrator(count)?;
    let out = net.apply(&ModeRegister::new(vec![amp; count])?)?;
    Ok(out.amps()[0])
}

fn leftover_after(n: usize, k: usize, winner: usize, hyp: &Hypothesis) -> UiResult<ModeRegister> {
    let part = 1.0 / (n as f64).sqrt();
    let rest = n - k;
    // The unknown's remaining parts are copies of the winning reference.
    let amps: Vec<Amplitude> = (1..=2)
        .map(|r| {
            let copies = if r == winner { 2 * rest } else { rest };
            concentrate(hyp.ref_amps()[r - 1] * part, copies)
        })
        .collect::<UiResult<_>>()?;
    ModeRegister::new(amps)?.with_labels(vec!["ref1", "ref2"])
}

fn run_with_means<R: Rng + ?Sized>(
    n: usize,
    setup: &UISetup,
    means: &[f64],
    rng: &mut R,
) -> Option<(usize, usize)> {
    let mut clicks = vec![0u32; means.len()];
    for k in 1..=n {
        for (c, &mean) in clicks.iter_mut().zip(means) {
            *c = sample_mode(mean, false, rng);
        }
        if let UIOutcome::Conclusive(w) = setup.classify(&ClickPattern::new(clicks.clone())) {
            return Some((k, w));
        }
    }
    None
}

fn round_means(n: usize, setup: &UISetup, hyp: &Hypothesis) -> UiResult<Vec<f64>> {
    Ok(setup
        .detector_amps(&hyp.scaled(1.0 / (n as f64).sqrt()))?
        .iter()
        .map(|a| a.norm_sqr())
        .collect())
}

fn check_hypothesis(hyp: &Hypothesis) -> UiResult<()> {
    if hyp.ref_amps().len() != 2 {
        return Err(UiError::domain(
            "weak implementation needs exactly two references",
        ));
    }
    Ok(())
}

/// One weak run with `n` rounds.
pub fn weak_ui_run<R: Rng + ?Sized>(n: usize, hyp: &Hypothesis, rng: &mut R) -> UiResult<WeakRun> {
    check_rounds(n)?;
    check_hypothesis(hyp)?;
    let setup = round_setup()?;
    let means = round_means(n, &setup, hyp)?;
    match run_with_means(n, &setup, &means, rng) {
        Some((k, w)) => Ok(WeakRun {
            outcome: UIOutcome::Conclusive(w),
            round: Some(k),
            leftover: Some(leftover_after(n, k, w, hyp)?),
        }),
        None => Ok(WeakRun {
            outcome: UIOutcome::Inconclusive,
            round: None,
            leftover: None,
        }),
    }
}

/// `1 − (e^{−Δ²/(3N)})^N`, which does not depend on `N`.
pub fn weak_ui_success_p(n: usize, delta: f64) -> UiResult<f64> {
    check_rounds(n)?;
    let fail_round = (-delta * delta / (3.0 * n as f64)).exp();
    Ok(1.0 - fail_round.powi(n as i32))
}

/// Outcome tally over `runs` weak runs, replica-parallel.
pub fn weak_ui_frequency(
    n: usize,
    hyp: &Hypothesis,
    runs: u64,
    seed: u64,
    exec: Execution,
) -> UiResult<OutcomeCounts> {
    check_rounds(n)?;
    check_hypothesis(hyp)?;
    if runs == 0 {
        return Err(UiError::InvalidShotCount(0));
    }
    let setup = round_setup()?;
    let means = round_means(n, &setup, hyp)?;
    let parts = map_replicas(exec, runs, |replica, count| {
        let mut rng = RngStream::new(seed, replica);
        let mut tally = OutcomeCounts::new(2);
        for _ in 0..count {
            let outcome = match run_with_means(n, &setup, &means, &mut rng) {
                Some((_, w)) => UIOutcome::Conclusive(w),
                None => UIOutcome::Inconclusive,
            };
            tally.record(outcome);
        }
        tally
    });
    let mut total = OutcomeCounts::new(2);
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Estimate;

    fn hyp(index: usize) -> Hypothesis {
        Hypothesis::new(
            index,
            vec![Amplitude::new(0.4, -0.2), Amplitude::new(-0.6, 0.8)],
        )
        .unwrap()
    }

    #[test]
    fn success_is_round_independent() {
        let want = 1.0 - (-1.0f64 / 3.0).exp();
        for n in [1, 4, 16, 100] {
            assert!((weak_ui_success_p(n, 1.0).unwrap() - want).abs() < 1e-14);
        }
        assert!((want - 0.283469).abs() < 5e-7);
        assert!(weak_ui_success_p(0, 1.0).is_err());
    }

    #[test]
    fn leftover_dilution() {
        let h = hyp(1);
        let left = leftover_after(4, 1, 1, &h).unwrap();
        let (a1, a2) = (h.ref_amps()[0], h.ref_amps()[1]);
        assert!((left.amps()[0] - a1 * 1.5f64.sqrt()).norm() < 1e-12);
        assert!((left.amps()[1] - a2 * 0.75f64.sqrt()).norm() < 1e-12);

        let left = leftover_after(5, 2, 2, &h).unwrap();
        assert!((left.amps()[0] - a1 * (3.0f64 / 5.0).sqrt()).norm() < 1e-12);
        assert!((left.amps()[1] - a2 * (6.0f64 / 5.0).sqrt()).norm() < 1e-12);

        let left = leftover_after(3, 3, 1, &h).unwrap();
        assert_eq!(left.total_intensity(), 0.0);
    }

    #[test]
    fn run_is_deterministic_and_never_wrong() {
        let h = hyp(2);
        let mut r1 = RngStream::new(5, 0);
        let mut r2 = RngStream::new(5, 0);
        for _ in 0..2000 {
            let a = weak_ui_run(4, &h, &mut r1).unwrap();
            let b = weak_ui_run(4, &h, &mut r2).unwrap();
            assert_eq!(a, b);
            assert_ne!(a.outcome, UIOutcome::Conclusive(1));
            assert_eq!(a.round.is_some(), a.leftover.is_some());
        }
    }

    #[test]
    fn single_round_matches_strong_setup() {
        let h = hyp(1);
        let setup = round_setup().unwrap();
        let strong = setup
            .outcome_probability(&h, UIOutcome::Conclusive(1))
            .unwrap();
        let counts = weak_ui_frequency(1, &h, 100_000, 9, Execution::default()).unwrap();
        let est = Estimate::proportion(counts.correct(1), counts.total());
        assert!(est.within_sigmas(strong, 3.0), "{est:?} vs {strong}");
    }

    #[test]
    fn frequency_independent_of_execution() {
        let h = hyp(1);
        let a = weak_ui_frequency(4, &h, 20_000, 3, Execution::Sequential).unwrap();
        let b = weak_ui_frequency(4, &h, 20_000, 3, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
