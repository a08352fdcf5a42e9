//! Reusing the unmeasured modes of a two-reference round.
//!
//! After a conclusive round the modes `B` and `D` of the comparison stage
//! still carry both references, mixed with the winning amplitude. Two
//! splitters and a vacuum ancilla turn them back into equally diluted
//! references `|√λ′α₁⟩, |√λ′α₂⟩` for the next round. After an inconclusive
//! round no linear combination does this, but the same modes can still test
//! the same unknown a second time.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detection::sample_counts;
use crate::error::{UiError, UiResult};
use crate::optics::{compose_network, Amplitude, ModeRegister, Network};
use crate::protocols::{
    analytic_two_ref, build_two_ref_setup, build_two_ref_weighted, ConclusionRule, Hypothesis,
    InputLayout, ModeGroup, Source, UIOutcome, UISetup,
};

/// Which closed form drives `λ_k → λ_{k+1}`.
///
/// Both agree at `λ = 1`. Only [`LambdaRecursion::Network`] is produced by
/// the recovery splitters for `λ < 1`; the other is kept so that the
/// reference round curves can be regenerated and compared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRecursion {
    /// Largest dilution reachable by linear optics from the round outputs:
    /// `T₁ᴿ = 1 − (2λ + √(4λ² + (1+2λ)²))/(1+2λ)²`.
    #[default]
    Network,
    /// `T₁ᴿ = 1 − (2λ² + √(4λ⁴ + (1+2λ)²))/(1+2λ)²`.
    Nominal,
}

impl LambdaRecursion {
    /// Transmittivity of the first recovery splitter. Both forms are
    /// rewritten without the cancelling subtraction, so tiny `λ` stays exact.
    pub fn recovery_t1(self, lambda: f64) -> UiResult<f64> {
        check_lambda(lambda)?;
        let s = (1.0 + 2.0 * lambda).powi(2);
        Ok(match self {
            LambdaRecursion::Network => {
                let l2 = lambda * lambda;
                4.0 * l2 / (s - 2.0 * lambda + (4.0 * l2 + s).sqrt())
            }
            LambdaRecursion::Nominal => {
                let l2 = lambda * lambda;
                4.0 * lambda / (s - 2.0 * l2 + (4.0 * l2 * l2 + s).sqrt())
            }
        })
    }

    /// `λ_{k+1} = T₁ᴿ(1 + 2λ_k)/2`.
    pub fn step(self, lambda: f64) -> UiResult<f64> {
        Ok(self.recovery_t1(lambda)? * (1.0 + 2.0 * lambda) / 2.0)
    }
}

fn check_lambda(lambda: f64) -> UiResult<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(UiError::domain(format!(
            "dilution factor {lambda} outside [0, 1]"
        )));
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

/// One step of the dilution recursion realised by the recovery network.
pub fn lambda_step(x: f64) -> UiResult<f64> {
    LambdaRecursion::Network.step(x)
}

/// `((1+2x)² − 2x² − √(4x⁴+(1+2x)²)) / (2(1+2x))`, the nominal recursion.
pub fn lambda_step_nominal(x: f64) -> UiResult<f64> {
    LambdaRecursion::Nominal.step(x)
}

/// Dilution bookkeeping at the start of a round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryState {
    /// 1-based round number.
    pub round: usize,
    pub lambda: f64,
}

impl RecoveryState {
    pub fn initial() -> Self {
        Self {
            round: 1,
            lambda: 1.0,
        }
    }

    pub fn next(self, rec: LambdaRecursion) -> UiResult<Self> {
        Ok(Self {
            round: self.round + 1,
            lambda: rec.step(self.lambda)?,
        })
    }
}

/// `λ_1 … λ_rounds`.
pub fn lambda_sequence(rounds: usize, rec: LambdaRecursion) -> UiResult<Vec<f64>> {
    let mut out = Vec::with_capacity(rounds);
    let mut state = RecoveryState::initial();
    for _ in 0..rounds {
        out.push(state.lambda);
        state = state.next(rec)?;
    }
    Ok(out)
}

/// Comparison-stage and recovery transmittivities for one round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTransmittivities {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t1r: f64,
    pub t2r: f64,
}

pub fn round_transmittivities(lambda: f64) -> UiResult<RoundTransmittivities> {
    round_transmittivities_with(LambdaRecursion::Network, lambda)
}

/// `T₂ᴿ` always follows from cancelling the winner's amplitude in `D`.
pub fn round_transmittivities_with(
    rec: LambdaRecursion,
    lambda: f64,
) -> UiResult<RoundTransmittivities> {
    let t1r = rec.recovery_t1(lambda)?;
    let s = (1.0 + 2.0 * lambda).powi(2);
    let rs = (1.0 - t1r) * s;
    Ok(RoundTransmittivities {
        t1: 0.5,
        t2: 2.0 * lambda / (1.0 + 2.0 * lambda),
        t3: 1.0 / (1.0 + 2.0 * lambda),
        t1r,
        t2r: rs / (1.0 + rs),
    })
}

fn winner_modes(winner: usize) -> UiResult<(usize, usize)> {
    match winner {
        1 => Ok((0, 1)),
        2 => Ok((1, 0)),
        _ => Err(UiError::domain(format!("winner {winner} not in {{1, 2}}"))),
    }
}

/// Recovery splitters on `[B, D, ancilla]`. The winner's concentrated mode
/// feeds `B₁`; its reflected part cancels the winner's amplitude in the other
/// mode through `B₂`. Mode 0 leaves as reference 1, mode 1 as reference 2,
/// mode 2 is discarded.
pub fn build_recovery_network(lambda: f64, winner: usize) -> UiResult<Network> {
    build_recovery_network_with(LambdaRecursion::Network, lambda, winner)
}

pub fn build_recovery_network_with(
    rec: LambdaRecursion,
    lambda: f64,
    winner: usize,
) -> UiResult<Network> {
    let (strong, mixed) = winner_modes(winner)?;
    let t = round_transmittivities_with(rec, lambda)?;
    let mut net = Network::new(3)?;
    net.add(t.t1r, 2, strong)?;
    net.add(t.t2r, 2, mixed)?;
    Ok(net)
}

/// Comparison stage of a round whose references carry weight `λ`.
pub fn round_setup(lambda: f64) -> UiResult<UISetup> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Err(UiError::domain("references fully diluted"));
    }
    build_two_ref_weighted(1.0, lambda, lambda, 0.5)
}

/// Mode indices of `B` and `D` in [`round_setup`].
const B_MODE: usize = 1;
const D_MODE: usize = 3;

/// Runs the comparison stage on `[α_?, r₁, r₂, 0]` and recovers references
/// from `B`, `D` assuming `winner` was concluded. Returns the detector
/// amplitudes `[D₁, D₂]` and the recovered `(ref1, ref2, junk)` register.
pub fn round_and_recover(
    rec: LambdaRecursion,
    lambda: f64,
    unknown: Amplitude,
    refs: [Amplitude; 2],
    winner: usize,
) -> UiResult<([Amplitude; 2], ModeRegister)> {
    let setup = round_setup(lambda)?;
    let out = setup.network.apply(&ModeRegister::new(vec![
        unknown,
        refs[0],
        refs[1],
        Amplitude::new(0.0, 0.0),
    ])?)?;
    let a = out.amps();
    let detectors = [a[setup.detectors.modes()[0]], a[setup.detectors.modes()[1]]];
    let recovered = build_recovery_network_with(rec, lambda, winner)?
        .apply(&ModeRegister::new(vec![
            a[B_MODE],
            a[D_MODE],
            Amplitude::new(0.0, 0.0),
        ])?)?
        .with_labels(vec!["ref1", "ref2", "junk"])?;
    Ok((detectors, recovered))
}

/// `1 − e^{−(λ/(1+2λ))Δ²}`.
pub fn round_success_prob(lambda: f64, delta: f64) -> UiResult<f64> {
    check_lambda(lambda)?;
    check_delta(delta)?;
    Ok(-(-(lambda / (1.0 + 2.0 * lambda)) * delta * delta).exp_m1())
}

/// Probability that rounds `1..=k` all conclude.
pub fn cumulative_success(k: usize, delta: f64, rec: LambdaRecursion) -> UiResult<f64> {
    if k == 0 {
        return Err(UiError::domain("round index starts at 1"));
    }
    lambda_sequence(k, rec)?
        .into_iter()
        .try_fold(1.0, |acc, l| Ok(acc * round_success_prob(l, delta)?))
}

/// Outcome of one round of a sequential recovery run.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundResult {
    pub round: usize,
    pub outcome: UIOutcome,
    /// Closed-form probability that every round so far concluded.
    pub cumulative_success: f64,
    /// References for the next round; `None` after an inconclusive round.
    pub recovered: Option<ModeRegister>,
}

/// Sequential rounds with fresh unknowns `ref_amps[unknowns[k] − 1]`,
/// feeding the recovered amplitudes forward. Stops after the first
/// inconclusive round.
pub fn run_recovery_rounds<R: Rng + ?Sized>(
    ref_amps: [Amplitude; 2],
    unknowns: &[usize],
    rec: LambdaRecursion,
    rng: &mut R,
) -> UiResult<Vec<RoundResult>> {
    let delta = (ref_amps[0] - ref_amps[1]).norm();
    let mut refs = ref_amps;
    let mut state = RecoveryState::initial();
    let mut cumulative = 1.0;
    let mut results = Vec::new();
    for &idx in unknowns {
        let hyp = Hypothesis::new(idx, ref_amps.to_vec())?;
        let setup = round_setup(state.lambda)?;
        let input = ModeRegister::new(vec![
            hyp.unknown(),
            refs[0],
            refs[1],
            Amplitude::new(0.0, 0.0),
        ])?;
        let out = setup.network.apply(&input)?;
        let outcome = setup.classify(&sample_counts(&out, &setup.detectors, rng)?);
        cumulative *= round_success_prob(state.lambda, delta)?;
        let recovered = match outcome {
            UIOutcome::Conclusive(w) => {
                let a = out.amps();
                let reg = build_recovery_network_with(rec, state.lambda, w)?
                    .apply(&ModeRegister::new(vec![
                        a[B_MODE],
                        a[D_MODE],
                        Amplitude::new(0.0, 0.0),
                    ])?)?
                    .with_labels(vec!["ref1", "ref2", "junk"])?;
                refs = [reg.amps()[0], reg.amps()[1]];
                Some(reg)
            }
            UIOutcome::Inconclusive => None,
        };
        let stop = recovered.is_none();
        results.push(RoundResult {
            round: state.round,
            outcome,
            cumulative_success: cumulative,
            recovered,
        });
        if stop {
            break;
        }
        state = state.next(rec)?;
        if state.lambda == 0.0 {
            break;
        }
    }
    Ok(results)
}

/// Least-squares residual of asking `a·out_B + b·out_D = α₁` to hold as an
/// identity in `(α₁, α₂)` under both hypotheses after a round with weight
/// `λ`. A positive residual means no fixed linear recovery of reference 1
/// exists once the winner is unknown.
pub fn inconclusive_recovery_residual(lambda: f64) -> UiResult<f64> {
    let setup = round_setup(lambda)?;
    let u = compose_network(&setup.network);
    let w = lambda.sqrt();
    // Coefficients of (α₁, α₂) in mode `row` when the unknown is reference `h`.
    let coeff = |row: usize, h: usize| -> [Amplitude; 2] {
        let mut c = [u.entry(row, 1) * w, u.entry(row, 2) * w];
        c[h - 1] += u.entry(row, 0);
        c
    };
    let mut m = DMatrix::<Amplitude>::zeros(4, 2);
    let mut rhs = DVector::<Amplitude>::zeros(4);
    for h in 1..=2 {
        let (cb, cd) = (coeff(B_MODE, h), coeff(D_MODE, h));
        for j in 0..2 {
            let r = 2 * (h - 1) + j;
            m[(r, 0)] = cb[j];
            m[(r, 1)] = cd[j];
        }
        rhs[2 * (h - 1)] = Amplitude::new(1.0, 0.0);
    }
    let svd = m.clone().svd(true, true);
    let x = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| UiError::domain(format!("least squares failed: {e}")))?;
    Ok((m * x - rhs).norm())
}

/// Two concatenated rounds testing the same unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct SameUnknown {
    /// Success of the second round given an inconclusive first round.
    pub conditional_p: f64,
    pub overall_p: f64,
    pub setup: UISetup,
}

/// Modes `[A₁, B, C, D, A₂, D₂]`. The first round is the single-copy
/// comparison; its `B`, `D` outputs act as references for the second copy
/// `A₂` with `(T₁, T₂, T₃) = (1/2, 3/4, 1/4)`. Detectors `[C, A₁, D, A₂]`.
pub fn build_same_unknown_setup() -> UiResult<UISetup> {
    let first = build_two_ref_setup(1, 1, 1, 0.5)?;
    let mut net = Network::new(6)?;
    net.append_mapped(&first.network, &[0, 1, 2, 3])?;
    net.add(0.5, 5, 4)?;
    net.add(0.75, 1, 4)?;
    net.add(0.25, 5, 3)?;
    let one = |label: &str, source, mode| ModeGroup {
        label: label.into(),
        source,
        modes: vec![mode],
        scale: 1.0,
    };
    let layout = InputLayout::new(
        6,
        vec![
            one("A1", Source::Unknown, 0),
            one("B", Source::Reference(1), 1),
            one("C", Source::Reference(2), 2),
            one("D", Source::Vacuum, 3),
            one("A2", Source::Unknown, 4),
            one("D2", Source::Vacuum, 5),
        ],
    )?;
    let detectors = crate::detection::DetectorBank::clicks(vec![2, 0, 3, 4])?;
    UISetup::assemble(net, detectors, ConclusionRule::SameUnknown, layout, 2)
}

/// Closed forms `1 − e^{−Δ²/6}` and `1 − e^{−Δ²/2}` with the setup.
pub fn same_unknown_second_round(delta: f64) -> UiResult<SameUnknown> {
    check_delta(delta)?;
    let d2 = delta * delta;
    Ok(SameUnknown {
        conditional_p: -(-d2 / 6.0).exp_m1(),
        overall_p: -(-d2 / 2.0).exp_m1(),
        setup: build_same_unknown_setup()?,
    })
}

/// `(1 − e^{−Δ²/(N+2)})^N`: references split into `N` parts up front.
pub fn splitting_strategy_p(n: usize, delta: f64) -> UiResult<f64> {
    if n == 0 {
        return Err(UiError::InvalidShotCount(0));
    }
    check_delta(delta)?;
    let weight = 1.0 / n as f64;
    let round = analytic_two_ref(
        1.0,
        weight,
        weight,
        0.5,
        Amplitude::new(0.0, 0.0),
        Amplitude::new(delta, 0.0),
        [0.5, 0.5],
    )?
    .total;
    Ok(round.powi(n as i32))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub recovery_p: f64,
    pub splitting_p: f64,
    pub difference: f64,
}

pub fn compare_strategies(
    n: usize,
    delta: f64,
    rec: LambdaRecursion,
) -> UiResult<StrategyComparison> {
    let splitting_p = splitting_strategy_p(n, delta)?;
    let recovery_p = cumulative_success(n, delta, rec)?;
    Ok(StrategyComparison {
        recovery_p,
        splitting_p,
        difference: recovery_p - splitting_p,
    })
}
