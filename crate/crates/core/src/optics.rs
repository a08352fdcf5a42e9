//! Coherent-state amplitudes and passive beam-splitter networks.
//!
//! A product of coherent states stays a product under linear optics, so the
//! whole optical state is carried as one complex amplitude per mode. Every
//! splitter acts on an ordered mode pair `(first, second)`:
//!
//! ```text
//! first'  =  √T·first + √R·second
//! second' = −√R·first + √T·second        R = 1 − T
//! ```

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{UiError, UiResult};

/// Complex field amplitude of a single coherent mode.
pub type Amplitude = Complex64;

/// The amplitudes of every mode in the system, optionally labelled.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeRegister {
    amps: Vec<Amplitude>,
    labels: Option<Vec<String>>,
}

impl ModeRegister {
    pub fn new(amps: Vec<Amplitude>) -> UiResult<Self> {
        if amps.is_empty() {
            return Err(UiError::domain("mode register needs at least one mode"));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(UiError::domain("mode amplitudes must be finite"));
        }
        Ok(Self { amps, labels: None })
    }

    pub fn vacuum(mode_count: usize) -> UiResult<Self> {
        Self::new(vec![Amplitude::new(0.0, 0.0); mode_count])
    }

    /// Attaches mode names; they must be unique and one per mode.
    pub fn with_labels<S: Into<String>>(mut self, labels: Vec<S>) -> UiResult<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != self.amps.len() {
            return Err(UiError::domain(format!(
                "{} labels for {} modes",
                labels.len(),
                self.amps.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(UiError::domain(format!("duplicate mode label `{l}`")));
            }
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amps(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn amp(&self, mode: usize) -> UiResult<Amplitude> {
        self.amps
            .get(mode)
            .copied()
            .ok_or(UiError::IndexOutOfRange {
                index: mode,
                mode_count: self.amps.len(),
            })
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn mode_by_label(&self, label: &str) -> Option<usize> {
        self.labels.as_ref()?.iter().position(|l| l == label)
    }

    /// Mean total photon number, Σ|α_j|².
    pub fn total_intensity(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn into_amps(self) -> Vec<Amplitude> {
        self.amps
    }
}

/// One beam splitter: transmittivity and the ordered pair of modes it mixes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSplitter {
    t: f64,
    first: usize,
    second: usize,
}

impl BeamSplitter {
    pub fn new(t: f64, first: usize, second: usize) -> UiResult<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(UiError::InvalidTransmittivity(t));
        }
        if first == second {
            return Err(UiError::RepeatedMode(first));
        }
        Ok(Self { t, first, second })
    }

    pub fn transmittivity(&self) -> f64 {
        self.t
    }

    pub fn reflectivity(&self) -> f64 {
        1.0 - self.t
    }

    pub fn modes(&self) -> (usize, usize) {
        (self.first, self.second)
    }

    fn coefficients(&self) -> (f64, f64) {
        (self.t.sqrt(), (1.0 - self.t).sqrt())
    }

    fn check_range(&self, mode_count: usize) -> UiResult<()> {
        for index in [self.first, self.second] {
            if index >= mode_count {
                return Err(UiError::IndexOutOfRange { index, mode_count });
            }
        }
        Ok(())
    }

    #[inline]
    fn act(&self, amps: &mut [Amplitude]) {
        let (st, sr) = self.coefficients();
        let a = amps[self.first];
        let b = amps[self.second];
        amps[self.first] = a * st + b * sr;
        amps[self.second] = -a * sr + b * st;
    }
}

/// Applies a single splitter to a register, returning the new register.
pub fn apply_beamsplitter(reg: &ModeRegister, bs: &BeamSplitter) -> UiResult<ModeRegister> {
    bs.check_range(reg.len())?;
    let mut out = reg.clone();
    bs.act(&mut out.amps);
    Ok(out)
}

/// An ordered list of splitters on a fixed number of modes.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    mode_count: usize,
    elements: Vec<BeamSplitter>,
}

impl Network {
    pub fn new(mode_count: usize) -> UiResult<Self> {
        if mode_count == 0 {
            return Err(UiError::domain("network needs at least one mode"));
        }
        Ok(Self {
            mode_count,
            elements: Vec::new(),
        })
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn elements(&self) -> &[BeamSplitter] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn push(&mut self, bs: BeamSplitter) -> UiResult<()> {
        bs.check_range(self.mode_count)?;
        self.elements.push(bs);
        Ok(())
    }

    /// Convenience for `push(BeamSplitter::new(t, first, second)?)`.
    pub fn add(&mut self, t: f64, first: usize, second: usize) -> UiResult<()> {
        self.push(BeamSplitter::new(t, first, second)?)
    }

    /// Appends `other` with its mode `j` mapped to `mapping[j]`.
    pub fn append_mapped(&mut self, other: &Network, mapping: &[usize]) -> UiResult<()> {
        if mapping.len() != other.mode_count {
            return Err(UiError::domain(format!(
                "mode map has {} entries for a {}-mode network",
                mapping.len(),
                other.mode_count
            )));
        }
        for bs in &other.elements {
            self.add(bs.t, mapping[bs.first], mapping[bs.second])?;
        }
        Ok(())
    }

    /// Sequentially applies every element to `reg`.
    pub fn apply(&self, reg: &ModeRegister) -> UiResult<ModeRegister> {
        if reg.len() != self.mode_count {
            return Err(UiError::domain(format!(
                "register has {} modes, network expects {}",
                reg.len(),
                self.mode_count
            )));
        }
        let mut out = reg.clone();
        self.apply_in_place(&mut out.amps);
        Ok(out)
    }

    /// Allocation-free evolution used by the shot loops.
    ///
    /// Panics if `amps.len() != self.mode_count()`.
    #[inline]
    pub fn apply_in_place(&self, amps: &mut [Amplitude]) {
        assert_eq!(
            amps.len(),
            self.mode_count,
            "register/network size mismatch"
        );
        for bs in &self.elements {
            bs.act(amps);
        }
    }
}

/// Builds the `k − 1` splitter cascade that merges `k` equal coherent modes
/// into mode 0 with amplitude `√k·β`, leaving modes `1..k` in vacuum.
///
/// Step `j` merges the accumulated `√j·β` with copy `j` using `T = j/(j+1)`.
pub fn build_concentrator(k: usize) -> UiResult<Network> {
    if k == 0 {
        return Err(UiError::InvalidCopyCount(
            "concentrator needs k >= 1".into(),
        ));
    }
    let mut net = Network::new(k)?;
    for j in 1..k {
        net.add(j as f64 / (j as f64 + 1.0), 0, j)?;
    }
    Ok(net)
}

/// Dense amplitude-space transfer matrix of a network, `out = U·in`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(DMatrix<Complex64>);

impl UnitaryMatrix {
    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Wraps an arbitrary square matrix; unitarity is not checked here.
    pub fn from_matrix(m: DMatrix<Complex64>) -> UiResult<Self> {
        if !m.is_square() {
            return Err(UiError::domain("transfer matrix must be square"));
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn apply(&self, reg: &ModeRegister) -> UiResult<ModeRegister> {
        if reg.len() != self.dim() {
            return Err(UiError::domain(format!(
                "register has {} modes, matrix is {}x{}",
                reg.len(),
                self.dim(),
                self.dim()
            )));
        }
        let v = nalgebra::DVector::from_column_slice(reg.amps());
        let out = &self.0 * v;
        let mut next = ModeRegister::new(out.iter().copied().collect())?;
        next.labels = reg.labels.clone();
        Ok(next)
    }
}

impl fmt::Display for UnitaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Product of the embedded 2×2 blocks in application order.
pub fn compose_network(net: &Network) -> UnitaryMatrix {
    let n = net.mode_count;
    let mut u = DMatrix::<Complex64>::identity(n, n);
    for bs in &net.elements {
        // Left-multiplying by the block only touches rows `first` and `second`.
        let (st, sr) = bs.coefficients();
        for col in 0..n {
            let a = u[(bs.first, col)];
            let b = u[(bs.second, col)];
            u[(bs.first, col)] = a * st + b * sr;
            u[(bs.second, col)] = -a * sr + b * st;
        }
    }
    UnitaryMatrix(u)
}

/// Largest absolute entry of `U†U − I`.
pub fn check_unitarity(u: &UnitaryMatrix) -> f64 {
    let n = u.dim();
    let g = u.0.adjoint() * &u.0;
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}
