//! Sparse pure states over a fixed register of named bosonic modes.
//!
//! A [`PureState`] maps occupation-number vectors ([`BasisKet`]) to complex
//! amplitudes. NOON-type states touch only a handful of kets even for large
//! photon numbers, so the representation is exact at any N without a
//! truncated dense Hilbert space.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Amplitudes with modulus below this are dropped after every operation.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

/// Tolerance used when a state is required to be normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Label of a spatial mode, e.g. `a1` or `d2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeId(String);

impl ModeId {
    pub fn new(label: impl Into<String>) -> Self {
        ModeId(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ModeId {
    fn from(label: &str) -> Self {
        ModeId(label.to_owned())
    }
}

impl From<String> for ModeId {
    fn from(label: String) -> Self {
        ModeId(label)
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered list of distinct modes. Ket entries follow this order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register(Vec<ModeId>);

impl Register {
    pub fn new<I, M>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = M>,
        M: Into<ModeId>,
    {
        let modes: Vec<ModeId> = labels.into_iter().map(Into::into).collect();
        if modes.is_empty() {
            return Err(Error::Config("register must contain at least one mode".into()));
        }
        for (i, m) in modes.iter().enumerate() {
            if m.as_str().is_empty() {
                return Err(Error::Config("empty mode label".into()));
            }
            if modes[..i].contains(m) {
                return Err(Error::Config(format!("duplicate mode label `{m}`")));
            }
        }
        Ok(Register(modes))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.0
    }

    pub fn contains(&self, label: &str) -> bool {
        self.0.iter().any(|m| m.as_str() == label)
    }

    /// Position of `label` in the register.
    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.0
            .iter()
            .position(|m| m.as_str() == label)
            .ok_or_else(|| Error::Register(format!("mode `{label}` not in register {self}")))
    }

    pub(crate) fn without(&self, drop: &[usize]) -> Register {
        Register(
            self.0
                .iter()
                .enumerate()
                .filter(|(i, _)| !drop.contains(i))
                .map(|(_, m)| m.clone())
                .collect(),
        )
    }

    pub(crate) fn relabeled(&self, slot: usize, label: ModeId) -> Register {
        let mut modes = self.0.clone();
        modes[slot] = label;
        Register(modes)
    }

    fn concat(&self, other: &Register) -> Result<Register> {
        Register::new(self.0.iter().chain(other.0.iter()).cloned())
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str("]")
    }
}

/// Photon counts, one per register mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisKet(Vec<u32>);

impl BasisKet {
    pub fn new(occupations: Vec<u32>) -> Self {
        BasisKet(occupations)
    }

    pub fn occupations(&self) -> &[u32] {
        &self.0
    }

    pub fn occupation(&self, slot: usize) -> u32 {
        self.0[slot]
    }

    pub fn total_photons(&self) -> u32 {
        self.0.iter().sum()
    }

    pub(crate) fn with_occupation(&self, slot: usize, n: u32) -> BasisKet {
        let mut occ = self.0.clone();
        occ[slot] = n;
        BasisKet(occ)
    }

    pub(crate) fn without(&self, drop: &[usize]) -> BasisKet {
        BasisKet(
            self.0
                .iter()
                .enumerate()
                .filter(|(i, _)| !drop.contains(i))
                .map(|(_, &n)| n)
                .collect(),
        )
    }
}

impl fmt::Display for BasisKet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("|")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{n}")?;
        }
        f.write_str("⟩")
    }
}

/// Sparse superposition of Fock basis kets.
///
/// Values are immutable: every operation returns a new state with amplitudes
/// below [`PRUNE_THRESHOLD`] removed. Nothing is renormalized implicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    register: Register,
    terms: BTreeMap<BasisKet, Complex64>,
}

impl PureState {
    /// All modes empty, amplitude one.
    pub fn vacuum<I, M>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = M>,
        M: Into<ModeId>,
    {
        let register = Register::new(labels)?;
        let ket = BasisKet(vec![0; register.len()]);
        Ok(PureState {
            register,
            terms: BTreeMap::from([(ket, Complex64::new(1.0, 0.0))]),
        })
    }

    /// Builds a state from explicit kets; repeated kets are summed.
    pub fn from_terms<I>(register: Register, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BasisKet, Complex64)>,
    {
        let mut map = BTreeMap::new();
        for (ket, amp) in terms {
            if ket.0.len() != register.len() {
                return Err(Error::Register(format!(
                    "ket {ket} has {} entries, register {register} has {}",
                    ket.0.len(),
                    register.len()
                )));
            }
            if !(amp.re.is_finite() && amp.im.is_finite()) {
                return Err(Error::Parameter(format!("non-finite amplitude on {ket}")));
            }
            *map.entry(ket).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        Ok(PureState::pruned(register, map))
    }

    /// A single basis ket with unit amplitude.
    pub fn basis(register: Register, occupations: &[u32]) -> Result<Self> {
        PureState::from_terms(
            register,
            [(BasisKet(occupations.to_vec()), Complex64::new(1.0, 0.0))],
        )
    }

    pub(crate) fn pruned(register: Register, mut terms: BTreeMap<BasisKet, Complex64>) -> Self {
        terms.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        PureState { register, terms }
    }

    pub fn register(&self) -> &Register {
        &self.register
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisKet, &Complex64)> {
        self.terms.iter()
    }

    /// Number of stored kets.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Amplitude on the ket with the given occupations (zero if absent).
    pub fn amplitude(&self, occupations: &[u32]) -> Complex64 {
        self.terms
            .get(&BasisKet(occupations.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    /// Applies the creation operator of `mode` `n` times.
    ///
    /// Occupation m becomes m + n and the amplitude gains √((m+n)!/m!).
    pub fn create(&self, mode: &str, n: u32) -> Result<PureState> {
        if n == 0 {
            return Err(Error::Parameter("creation count must be positive".into()));
        }
        let slot = self.register.index_of(mode)?;
        let terms = self
            .terms
            .iter()
            .map(|(ket, &amp)| {
                let m = ket.0[slot];
                let gain: f64 = (1..=n).map(|j| f64::from(m + j).sqrt()).product();
                (ket.with_occupation(slot, m + n), amp * gain)
            })
            .collect();
        Ok(PureState::pruned(self.register.clone(), terms))
    }

    /// Linear combination Σ cᵢ|ψᵢ⟩ over states sharing one register.
    pub fn superpose(terms: &[(Complex64, &PureState)]) -> Result<PureState> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::Contract("superposition of zero states".into()))?;
        let register = first.register.clone();
        let mut map = BTreeMap::new();
        for (c, state) in terms {
            if state.register != register {
                return Err(Error::Register(format!(
                    "cannot superpose states on {} and {}",
                    register, state.register
                )));
            }
            for (ket, amp) in &state.terms {
                *map.entry(ket.clone()).or_insert(Complex64::new(0.0, 0.0)) += c * amp;
            }
        }
        Ok(PureState::pruned(register, map))
    }

    pub fn norm_sq(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sq() - 1.0).abs() <= NORM_TOLERANCE
    }

    pub fn scaled(&self, c: Complex64) -> PureState {
        PureState::pruned(
            self.register.clone(),
            self.terms.iter().map(|(k, a)| (k.clone(), a * c)).collect(),
        )
    }

    pub fn normalized(&self) -> Result<PureState> {
        let n = self.norm_sq();
        if n <= 0.0 {
            return Err(Error::Contract("cannot normalize the zero vector".into()));
        }
        Ok(self.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)))
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.register != other.register {
            return Err(Error::Register(format!(
                "inner product across registers {} and {}",
                self.register, other.register
            )));
        }
        Ok(self
            .terms
            .iter()
            .filter_map(|(k, a)| other.terms.get(k).map(|b| a.conj() * b))
            .sum())
    }

    /// |⟨self|other⟩|² for normalized states.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        for s in [self, other] {
            if !s.is_normalized() {
                return Err(Error::Contract(format!(
                    "fidelity needs normalized states, got norm² {}",
                    s.norm_sq()
                )));
            }
        }
        Ok(self.inner(other)?.norm_sqr().min(1.0))
    }

    /// Tensor product; the registers are concatenated and must be disjoint.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let register = self.register.concat(&other.register)?;
        let mut map = BTreeMap::new();
        for (ka, a) in &self.terms {
            for (kb, b) in &other.terms {
                let mut occ = ka.0.clone();
                occ.extend_from_slice(&kb.0);
                map.insert(BasisKet(occ), a * b);
            }
        }
        Ok(PureState::pruned(register, map))
    }

    /// Multiplies every amplitude by a factor chosen per ket.
    pub(crate) fn map_amplitudes(&self, f: impl Fn(&BasisKet) -> Complex64) -> PureState {
        PureState::pruned(
            self.register.clone(),
            self.terms.iter().map(|(k, a)| (k.clone(), a * f(k))).collect(),
        )
    }

    /// Rotates the global phase so the first stored amplitude is real and
    /// positive.
    pub fn with_canonical_phase(&self) -> PureState {
        match self.terms.values().next() {
            Some(a) if a.norm() > 0.0 => self.scaled(a.conj() / a.norm()),
            _ => self.clone(),
        }
    }
}

/// |⟨a|b⟩|², insensitive to a global phase on either argument.
pub fn fidelity_up_to_global_phase(a: &PureState, b: &PureState) -> Result<f64> {
    a.fidelity(b)
}

impl fmt::Display for PureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0 on {}", self.register);
        }
        for (i, (ket, a)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({:.6}{:+.6}i){ket}", a.re, a.im)?;
        }
        write!(f, " on {}", self.register)
    }
}
