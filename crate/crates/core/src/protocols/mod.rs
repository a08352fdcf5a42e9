//! Unambiguous-identification setups built from beam splitters and click detectors.
//!
//! A [`UISetup`] bundles the network, the watched output modes, the rule
//! mapping click patterns to conclusions, and the input layout that turns a
//! [`Hypothesis`] into the initial mode register.

mod multi_ref;
mod two_ref;
mod weak;

pub use multi_ref::{
    analytic_multi_ref_p, build_multi_ref_setup, comparison_transmittivity, split_cascade,
};
pub use two_ref::{
    analytic_two_ref, build_two_ref_setup, build_two_ref_weighted, classify_two_ref, idp_limit_p,
    optimal_t1, resource_tradeoff, search_t1, two_ref_transmittivities, ResourceSplit, T1Choice,
    TwoRefProbabilities, TwoRefTransmittivities,
};
pub use weak::{weak_ui_frequency, weak_ui_run, weak_ui_success_p, WeakRun};

use serde::{Deserialize, Serialize};

use crate::detection::{p_click, sample_mode, ClickPattern, DetectorBank, Histogram, RngStream};
use crate::error::{UiError, UiResult};
use crate::optics::{check_unitarity, compose_network, Amplitude, ModeRegister, Network};
use crate::parallel::{map_replicas, Execution};

/// Result of one identification attempt. Indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UIOutcome {
    Conclusive(usize),
    Inconclusive,
}

impl UIOutcome {
    pub fn is_conclusive(self) -> bool {
        matches!(self, UIOutcome::Conclusive(_))
    }
}

/// Which reference the unknown equals, together with all reference amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    index: usize,
    ref_amps: Vec<Amplitude>,
}

impl Hypothesis {
    pub fn new(index: usize, ref_amps: Vec<Amplitude>) -> UiResult<Self> {
        if index == 0 || index > ref_amps.len() {
            return Err(UiError::domain(format!(
                "hypothesis index {index} outside 1..={}",
                ref_amps.len()
            )));
        }
        Ok(Self { index, ref_amps })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn ref_amps(&self) -> &[Amplitude] {
        &self.ref_amps
    }

    pub fn unknown(&self) -> Amplitude {
        self.ref_amps[self.index - 1]
    }

    /// Same hypothesis with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            index: self.index,
            ref_amps: self.ref_amps.iter().map(|a| a * factor).collect(),
        }
    }
}

/// Copy counts and priors of an identification task.
///
/// Counts are real weights so that diluted references (recovery rounds,
/// splitting strategy) fit the same description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UIConfig {
    pub m: usize,
    pub n_a: f64,
    pub n_refs: Vec<f64>,
    pub priors: Vec<f64>,
    pub t1_override: Option<f64>,
}

impl UIConfig {
    /// Integer copy counts and equal priors.
    pub fn uniform(n_a: usize, n_refs: &[usize]) -> UiResult<Self> {
        let m = n_refs.len();
        let cfg = Self {
            m,
            n_a: n_a as f64,
            n_refs: n_refs.iter().map(|&n| n as f64).collect(),
            priors: vec![1.0 / m.max(1) as f64; m],
            t1_override: None,
        };
        cfg.validate(false)?;
        Ok(cfg)
    }

    /// Checks the invariants; `fractional` admits positive non-integer weights.
    pub fn validate(&self, fractional: bool) -> UiResult<()> {
        if self.m < 2 {
            return Err(UiError::InvalidCopyCount(format!(
                "need at least two reference kinds, got {}",
                self.m
            )));
        }
        if self.n_refs.len() != self.m || self.priors.len() != self.m {
            return Err(UiError::domain(format!(
                "{} reference counts and {} priors for m = {}",
                self.n_refs.len(),
                self.priors.len(),
                self.m
            )));
        }
        for &n in std::iter::once(&self.n_a).chain(&self.n_refs) {
            check_weight(n, fractional)?;
        }
        if self.priors.iter().any(|&p| p.is_nan() || p < 0.0) {
            return Err(UiError::domain("priors must be nonnegative"));
        }
        let total: f64 = self.priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(UiError::domain(format!("priors sum to {total}, not 1")));
        }
        if let Some(t) = self.t1_override {
            if !(0.0..=1.0).contains(&t) {
                return Err(UiError::InvalidTransmittivity(t));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_weight(n: f64, fractional: bool) -> UiResult<()> {
    let ok = n.is_finite()
        && if fractional {
            n > 0.0
        } else {
            n >= 1.0 && n.fract() == 0.0
        };
    if ok {
        Ok(())
    } else {
        Err(UiError::InvalidCopyCount(format!(
            "copy count {n} must be {}",
            if fractional {
                "positive"
            } else {
                "a positive integer"
            }
        )))
    }
}

pub(crate) fn check_count(n: usize, what: &str) -> UiResult<()> {
    if n == 0 {
        Err(UiError::InvalidCopyCount(format!(
            "{what} must be at least 1"
        )))
    } else {
        Ok(())
    }
}

/// What feeds a group of input modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Unknown,
    /// 1-based reference index.
    Reference(usize),
    Vacuum,
}

/// A labelled block of input modes sharing one source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeGroup {
    pub label: String,
    pub source: Source,
    pub modes: Vec<usize>,
    /// Amplitude multiplier per mode (√weight for diluted single-mode inputs).
    pub scale: f64,
}

/// How a hypothesis is laid out on the network's input modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputLayout {
    mode_count: usize,
    groups: Vec<ModeGroup>,
}

impl InputLayout {
    pub fn new(mode_count: usize, groups: Vec<ModeGroup>) -> UiResult<Self> {
        let mut seen = vec![false; mode_count];
        for g in &groups {
            for &m in &g.modes {
                if m >= mode_count {
                    return Err(UiError::IndexOutOfRange {
                        index: m,
                        mode_count,
                    });
                }
                if std::mem::replace(&mut seen[m], true) {
                    return Err(UiError::domain(format!("mode {m} assigned twice")));
                }
            }
        }
        Ok(Self { mode_count, groups })
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn groups(&self) -> &[ModeGroup] {
        &self.groups
    }

    pub fn group(&self, label: &str) -> Option<&ModeGroup> {
        self.groups.iter().find(|g| g.label == label)
    }

    /// Number of modes fed by `source`.
    pub fn copies_of(&self, source: Source) -> usize {
        self.groups
            .iter()
            .filter(|g| g.source == source)
            .map(|g| g.modes.len())
            .sum()
    }

    fn source_amp(source: Source, hyp: &Hypothesis) -> UiResult<Amplitude> {
        Ok(match source {
            Source::Unknown => hyp.unknown(),
            Source::Reference(k) => *hyp.ref_amps.get(k.wrapping_sub(1)).ok_or_else(|| {
                UiError::domain(format!(
                    "layout needs reference {k}, hypothesis has {}",
                    hyp.ref_amps.len()
                ))
            })?,
            Source::Vacuum => Amplitude::new(0.0, 0.0),
        })
    }

    /// Noiseless input register for `hyp`.
    pub fn prepare(&self, hyp: &Hypothesis) -> UiResult<ModeRegister> {
        let mut amps = vec![Amplitude::new(0.0, 0.0); self.mode_count];
        self.fill(hyp, &mut amps, |_| Amplitude::new(0.0, 0.0))?;
        ModeRegister::new(amps)
    }

    /// Writes the input for `hyp` into `amps`, adding `noise(mode)` to every
    /// mode (vacuum ones included).
    pub fn fill(
        &self,
        hyp: &Hypothesis,
        amps: &mut [Amplitude],
        mut noise: impl FnMut(usize) -> Amplitude,
    ) -> UiResult<()> {
        for a in amps.iter_mut() {
            *a = Amplitude::new(0.0, 0.0);
        }
        for g in &self.groups {
            let base = Self::source_amp(g.source, hyp)? * g.scale;
            for &m in &g.modes {
                amps[m] = base;
            }
        }
        for (m, a) in amps.iter_mut().enumerate() {
            *a += noise(m);
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = (0..self.mode_count).map(|m| format!("m{m}")).collect();
        for g in &self.groups {
            for (i, &m) in g.modes.iter().enumerate() {
                labels[m] = if g.modes.len() == 1 {
                    g.label.clone()
                } else {
                    format!("{}_{}", g.label, i + 1)
                };
            }
        }
        labels
    }
}

/// Mapping from detector click patterns to conclusions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConclusionRule {
    /// Detectors `[D₁, D₂]`: only D₁ → 1, only D₂ → 2.
    TwoRef,
    /// Detectors `[D₁..D_m]`: every detector except D_k fired → k.
    AllButOne,
    /// Two concatenated two-reference rounds on the same unknown, detectors
    /// `[D₁, D₂, D₁′, D₂′]`; the first conclusive round decides.
    SameUnknown,
}

impl ConclusionRule {
    pub fn classify(self, pattern: &ClickPattern) -> UIOutcome {
        match self {
            ConclusionRule::TwoRef => classify_two_ref(pattern),
            ConclusionRule::AllButOne => {
                let silent: Vec<usize> = (0..pattern.len())
                    .filter(|&d| !pattern.clicked(d))
                    .collect();
                match silent.as_slice() {
                    [k] => UIOutcome::Conclusive(k + 1),
                    _ => UIOutcome::Inconclusive,
                }
            }
            ConclusionRule::SameUnknown => {
                let first = ClickPattern::new(pattern.counts()[..2].to_vec());
                match classify_two_ref(&first) {
                    UIOutcome::Inconclusive => {
                        classify_two_ref(&ClickPattern::new(pattern.counts()[2..4].to_vec()))
                    }
                    done => done,
                }
            }
        }
    }
}

/// Tally of outcomes over many shots.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    /// `conclusive[k-1]` counts `Conclusive(k)`.
    pub conclusive: Vec<u64>,
    pub inconclusive: u64,
}

impl OutcomeCounts {
    pub fn new(m: usize) -> Self {
        Self {
            conclusive: vec![0; m],
            inconclusive: 0,
        }
    }

    pub fn record(&mut self, outcome: UIOutcome) {
        match outcome {
            UIOutcome::Conclusive(k) => self.conclusive[k - 1] += 1,
            UIOutcome::Inconclusive => self.inconclusive += 1,
        }
    }

    pub fn merge(&mut self, other: &OutcomeCounts) {
        for (a, b) in self.conclusive.iter_mut().zip(&other.conclusive) {
            *a += b;
        }
        self.inconclusive += other.inconclusive;
    }

    pub fn total(&self) -> u64 {
        self.conclusive.iter().sum::<u64>() + self.inconclusive
    }

    pub fn correct(&self, true_index: usize) -> u64 {
        self.conclusive[true_index - 1]
    }

    pub fn wrong(&self, true_index: usize) -> u64 {
        self.conclusive
            .iter()
            .enumerate()
            .filter(|&(k, _)| k + 1 != true_index)
            .map(|(_, n)| n)
            .sum()
    }
}

/// A complete identification experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct UISetup {
    pub network: Network,
    pub detectors: DetectorBank,
    pub rule: ConclusionRule,
    pub layout: InputLayout,
    /// Number of reference kinds the rule can conclude.
    pub m: usize,
}

impl UISetup {
    pub(crate) fn assemble(
        network: Network,
        detectors: DetectorBank,
        rule: ConclusionRule,
        layout: InputLayout,
        m: usize,
    ) -> UiResult<Self> {
        if layout.mode_count() != network.mode_count() {
            return Err(UiError::domain("layout and network disagree on mode count"));
        }
        detectors.check_for(network.mode_count())?;
        Ok(Self {
            network,
            detectors,
            rule,
            layout,
            m,
        })
    }

    /// Max entry of `U†U − I` for the composed network.
    pub fn unitarity_defect(&self) -> f64 {
        check_unitarity(&compose_network(&self.network))
    }

    pub fn input(&self, hyp: &Hypothesis) -> UiResult<ModeRegister> {
        self.layout.prepare(hyp)
    }

    pub fn evolve(&self, hyp: &Hypothesis) -> UiResult<ModeRegister> {
        self.network.apply(&self.input(hyp)?)
    }

    /// Output amplitudes on the watched modes, in detector order.
    pub fn detector_amps(&self, hyp: &Hypothesis) -> UiResult<Vec<Amplitude>> {
        let out = self.evolve(hyp)?;
        Ok(self
            .detectors
            .modes()
            .iter()
            .map(|&m| out.amps()[m])
            .collect())
    }

    pub fn classify(&self, pattern: &ClickPattern) -> UIOutcome {
        self.rule.classify(pattern)
    }

    /// Exact outcome probabilities by enumerating every click pattern.
    pub fn outcome_distribution(&self, hyp: &Hypothesis) -> UiResult<Vec<(UIOutcome, f64)>> {
        let probs: Vec<f64> = self.detector_amps(hyp)?.into_iter().map(p_click).collect();
        let d = probs.len();
        if d > 20 {
            return Err(UiError::domain("too many detectors to enumerate"));
        }
        let mut acc: Vec<(UIOutcome, f64)> = Vec::new();
        for mask in 0u32..(1 << d) {
            let clicks: Vec<bool> = (0..d).map(|i| mask >> i & 1 == 1).collect();
            let p: f64 = clicks
                .iter()
                .zip(&probs)
                .map(|(&c, &q)| if c { q } else { 1.0 - q })
                .product();
            let outcome = self.classify(&ClickPattern::from_clicks(&clicks));
            match acc.iter_mut().find(|(o, _)| *o == outcome) {
                Some(slot) => slot.1 += p,
                None => acc.push((outcome, p)),
            }
        }
        acc.sort_by_key(|a| a.0);
        Ok(acc)
    }

    /// Exact probability that `hyp` yields `outcome`.
    pub fn outcome_probability(&self, hyp: &Hypothesis, outcome: UIOutcome) -> UiResult<f64> {
        Ok(self
            .outcome_distribution(hyp)?
            .into_iter()
            .filter(|(o, _)| *o == outcome)
            .map(|(_, p)| p)
            .sum())
    }

    /// Detector histogram for `shots` noiseless runs of `hyp`.
    pub fn run_shots(&self, hyp: &Hypothesis, shots: u64, seed: u64) -> UiResult<Histogram> {
        crate::detection::run_shots(
            &self.network,
            &self.input(hyp)?,
            &self.detectors,
            shots,
            seed,
        )
    }

    /// Outcome tally for `shots` noiseless runs of `hyp`.
    pub fn sample_outcomes(
        &self,
        hyp: &Hypothesis,
        shots: u64,
        seed: u64,
    ) -> UiResult<OutcomeCounts> {
        self.sample_outcomes_with(Execution::default(), hyp, shots, seed)
    }

    pub fn sample_outcomes_with(
        &self,
        exec: Execution,
        hyp: &Hypothesis,
        shots: u64,
        seed: u64,
    ) -> UiResult<OutcomeCounts> {
        if shots == 0 {
            return Err(UiError::InvalidShotCount(0));
        }
        let means: Vec<f64> = self
            .detector_amps(hyp)?
            .iter()
            .map(|a| a.norm_sqr())
            .collect();
        let parts = map_replicas(exec, shots, |replica, n| {
            let mut rng = RngStream::new(seed, replica);
            let mut counts = OutcomeCounts::new(self.m);
            let mut clicks = vec![0u32; means.len()];
            for _ in 0..n {
                for (c, &mean) in clicks.iter_mut().zip(&means) {
                    *c = sample_mode(mean, false, &mut rng);
                }
                counts.record(self.rule.classify(&ClickPattern::new(clicks.clone())));
            }
            counts
        });
        let mut total = OutcomeCounts::new(self.m);
        for p in &parts {
            total.merge(p);
        }
        Ok(total)
    }

    /// One noiseless shot drawn from `rng`.
    pub fn sample_once<R: rand::Rng + ?Sized>(
        &self,
        hyp: &Hypothesis,
        rng: &mut R,
    ) -> UiResult<(UIOutcome, ModeRegister)> {
        let out = self.evolve(hyp)?;
        let pattern = crate::detection::sample_counts(&out, &self.detectors, rng)?;
        Ok((self.classify(&pattern), out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let cfg = UIConfig::uniform(2, &[1, 1]).unwrap();
        assert_eq!(cfg.priors, vec![0.5, 0.5]);
        assert!(UIConfig::uniform(1, &[1]).is_err());
        assert!(UIConfig::uniform(0, &[1, 1]).is_err());
        let mut frac = cfg.clone();
        frac.n_refs = vec![0.5657, 0.5657];
        assert!(frac.validate(false).is_err());
        assert!(frac.validate(true).is_ok());
        frac.priors = vec![0.7, 0.2];
        assert!(frac.validate(true).is_err());
        frac.priors = vec![0.5, 0.5];
        frac.t1_override = Some(1.2);
        assert!(matches!(
            frac.validate(true),
            Err(UiError::InvalidTransmittivity(_))
        ));
    }

    #[test]
    fn hypothesis_index_range() {
        let amps = vec![Amplitude::new(1.0, 0.0), Amplitude::new(-1.0, 0.0)];
        assert!(Hypothesis::new(0, amps.clone()).is_err());
        assert!(Hypothesis::new(3, amps.clone()).is_err());
        assert_eq!(
            Hypothesis::new(2, amps).unwrap().unknown(),
            Amplitude::new(-1.0, 0.0)
        );
    }

    #[test]
    fn all_but_one_rule() {
        let r = ConclusionRule::AllButOne;
        let p = |c: &[bool]| ClickPattern::from_clicks(c);
        assert_eq!(
            r.classify(&p(&[true, false, true])),
            UIOutcome::Conclusive(2)
        );
        assert_eq!(
            r.classify(&p(&[false, false, true])),
            UIOutcome::Inconclusive
        );
        assert_eq!(r.classify(&p(&[true, true, true])), UIOutcome::Inconclusive);
        assert_eq!(r.classify(&p(&[true, false])), UIOutcome::Conclusive(2));
    }

    #[test]
    fn same_unknown_rule_prefers_first_round() {
        let r = ConclusionRule::SameUnknown;
        let p = |c: &[bool]| ClickPattern::from_clicks(c);
        assert_eq!(
            r.classify(&p(&[true, false, false, true])),
            UIOutcome::Conclusive(1)
        );
        assert_eq!(
            r.classify(&p(&[false, false, false, true])),
            UIOutcome::Conclusive(2)
        );
        assert_eq!(
            r.classify(&p(&[true, true, true, false])),
            UIOutcome::Conclusive(1)
        );
        assert_eq!(
            r.classify(&p(&[true, true, true, true])),
            UIOutcome::Inconclusive
        );
    }

    #[test]
    fn layout_rejects_overlaps() {
        let g = |modes: Vec<usize>| ModeGroup {
            label: "X".into(),
            source: Source::Vacuum,
            modes,
            scale: 1.0,
        };
        assert!(InputLayout::new(3, vec![g(vec![0, 1]), g(vec![1])]).is_err());
        assert!(InputLayout::new(3, vec![g(vec![3])]).is_err());
    }
}
