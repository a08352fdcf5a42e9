//! Ideal photodetection on coherent modes and the seeded shot engine.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{UiError, UiResult};
use crate::optics::{Amplitude, ModeRegister, Network};
use crate::parallel::{map_replicas, Execution};

/// Below this mean photon number counts are drawn by CDF inversion.
const INVERSION_LIMIT: f64 = 30.0;

/// Probability of at least one photon in a coherent mode, `1 − e^{−|α|²}`.
#[inline]
pub fn p_click(amp: Amplitude) -> f64 {
    -(-amp.norm_sqr()).exp_m1()
}

/// A reproducible random stream keyed by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id selecting one of its 2⁶⁴ streams, so
/// distinct replicas never overlap.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
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
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Which output modes are watched, and whether photon numbers are resolved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorBank {
    modes: Vec<usize>,
    resolve_numbers: bool,
}

impl DetectorBank {
    pub fn new(modes: Vec<usize>, resolve_numbers: bool) -> UiResult<Self> {
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(UiError::domain(format!("mode {m} monitored twice")));
            }
        }
        Ok(Self {
            modes,
            resolve_numbers,
        })
    }

    /// Click-only detectors on `modes`.
    pub fn clicks(modes: Vec<usize>) -> UiResult<Self> {
        Self::new(modes, false)
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn resolves_numbers(&self) -> bool {
        self.resolve_numbers
    }

    pub fn check_for(&self, mode_count: usize) -> UiResult<()> {
        match self.modes.iter().find(|&&m| m >= mode_count) {
            Some(&index) => Err(UiError::IndexOutOfRange { index, mode_count }),
            None => Ok(()),
        }
    }
}

/// Per-detector photon counts (0/1 for click-only banks).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClickPattern {
    counts: Vec<u32>,
}

impl ClickPattern {
    pub fn new(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    /// Pattern from click flags.
    pub fn from_clicks(clicks: &[bool]) -> Self {
        Self::new(clicks.iter().map(|&c| c as u32).collect())
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn clicked(&self, detector: usize) -> bool {
        self.counts.get(detector).is_some_and(|&c| c > 0)
    }

    /// Short form such as `"10"` for (click, silent).
    pub fn key(&self) -> String {
        if self.counts.iter().all(|&c| c <= 1) {
            self.counts.iter().map(|c| c.to_string()).collect()
        } else {
            self.counts
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
    }
}

/// Poisson draw by CDF inversion from one uniform variate.
///
/// `u < e^{−mean}` yields 0, so thresholding at one photon gives exactly the
/// click decision made from the same `u`.
pub fn poisson_by_inversion(mean: f64, u: f64) -> u32 {
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0u32;
    while u >= cdf {
        k += 1;
        p *= mean / k as f64;
        if p == 0.0 {
            break;
        }
        cdf += p;
    }
    k
}

/// Samples one count for a mode with the given mean photon number.
#[inline]
pub fn sample_mode<R: Rng + ?Sized>(mean: f64, resolve: bool, rng: &mut R) -> u32 {
    if !resolve {
        let u: f64 = rng.random();
        return (u >= (-mean).exp()) as u32;
    }
    if mean < INVERSION_LIMIT {
        poisson_by_inversion(mean, rng.random())
    } else {
        Poisson::new(mean)
            .expect("finite positive mean")
            .sample(rng) as u32
    }
}

/// Independent Poisson(|amp|²) counts on every monitored mode.
pub fn sample_counts<R: Rng + ?Sized>(
    reg: &ModeRegister,
    bank: &DetectorBank,
    rng: &mut R,
) -> UiResult<ClickPattern> {
    bank.check_for(reg.len())?;
    let counts = bank
        .modes
        .iter()
        .map(|&m| sample_mode(reg.amps()[m].norm_sqr(), bank.resolve_numbers, rng))
        .collect();
    Ok(ClickPattern::new(counts))
}

/// Shot counts keyed by click pattern.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    bins: BTreeMap<ClickPattern, u64>,
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, pattern: ClickPattern, n: u64) {
        *self.bins.entry(pattern).or_insert(0) += n;
    }

    pub fn merge(&mut self, other: Histogram) {
        for (p, n) in other.bins {
            self.record(p, n);
        }
    }

    pub fn total(&self) -> u64 {
        self.bins.values().sum()
    }

    pub fn count(&self, pattern: &ClickPattern) -> u64 {
        self.bins.get(pattern).copied().unwrap_or(0)
    }

    /// Total count of patterns satisfying `pred`.
    pub fn count_where(&self, pred: impl Fn(&ClickPattern) -> bool) -> u64 {
        self.bins
            .iter()
            .filter(|(p, _)| pred(p))
            .map(|(_, n)| n)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ClickPattern, u64)> {
        self.bins.iter().map(|(p, &n)| (p, n))
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// Evolves `input` once through `net`, then samples `shots` detector readouts.
pub fn run_shots(
    net: &Network,
    input: &ModeRegister,
    bank: &DetectorBank,
    shots: u64,
    seed: u64,
) -> UiResult<Histogram> {
    run_shots_with(Execution::default(), net, input, bank, shots, seed)
}

pub fn run_shots_with(
    exec: Execution,
    net: &Network,
    input: &ModeRegister,
    bank: &DetectorBank,
    shots: u64,
    seed: u64,
) -> UiResult<Histogram> {
    if shots == 0 {
        return Err(UiError::InvalidShotCount(shots));
    }
    let out = net.apply(input)?;
    bank.check_for(out.len())?;
    let means: Vec<f64> = bank
        .modes
        .iter()
        .map(|&m| out.amps()[m].norm_sqr())
        .collect();
    let resolve = bank.resolve_numbers;

    let parts = map_replicas(exec, shots, |replica, n| {
        let mut rng = RngStream::new(seed, replica);
        let mut hist = Histogram::new();
        let mut counts = vec![0u32; means.len()];
        for _ in 0..n {
            for (c, &mean) in counts.iter_mut().zip(&means) {
                *c = sample_mode(mean, resolve, &mut rng);
            }
            *hist
                .bins
                .entry(ClickPattern::new(counts.clone()))
                .or_insert(0) += 1;
        }
        hist
    });
    let mut hist = Histogram::new();
    for part in parts {
        hist.merge(part);
    }
    Ok(hist)
}
