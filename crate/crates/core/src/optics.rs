//! Linear-optical elements, photon detection and the idealized cross-Kerr
//! QND readout.
//!
//! The coherent probe of a cross-Kerr interaction is not simulated. Each
//! branch only carries the phase the probe would have picked up, and the
//! homodyne step discriminates phases perfectly except for sign: an
//! X-quadrature measurement cannot tell +θ from −θ, so branches are grouped
//! by |phase|.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{BasisKet, ModeId, PureState, Register, NORM_TOLERANCE, PRUNE_THRESHOLD};

/// Two probe phases fall in one homodyne class iff their moduli differ by
/// less than this (radians).
pub const PHASE_TOLERANCE: f64 = 1e-9;

/// Default per-photon cross-Kerr phase θ in radians.
pub const DEFAULT_THETA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedTerm {
    pub ket: BasisKet,
    pub amplitude: Complex64,
    /// Phase accumulated by the (unmodeled) coherent probe on this branch.
    pub probe_phase: f64,
}

/// A pure signal state whose branches carry a probe phase label.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedState {
    register: Register,
    terms: Vec<TaggedTerm>,
}

impl TaggedState {
    fn build(register: Register, raw: Vec<TaggedTerm>) -> TaggedState {
        let mut terms: Vec<TaggedTerm> = Vec::with_capacity(raw.len());
        for t in raw {
            match terms
                .iter_mut()
                .find(|u| u.ket == t.ket && (u.probe_phase - t.probe_phase).abs() < PHASE_TOLERANCE)
            {
                Some(u) => u.amplitude += t.amplitude,
                None => terms.push(t),
            }
        }
        terms.retain(|t| t.amplitude.norm() >= PRUNE_THRESHOLD);
        terms.sort_by(|a, b| {
            a.ket
                .cmp(&b.ket)
                .then(a.probe_phase.total_cmp(&b.probe_phase))
        });
        TaggedState { register, terms }
    }

    pub fn register(&self) -> &Register {
        &self.register
    }

    pub fn terms(&self) -> &[TaggedTerm] {
        &self.terms
    }

    pub fn norm_sq(&self) -> f64 {
        self.terms.iter().map(|t| t.amplitude.norm_sqr()).sum()
    }

    /// Shifts each branch's probe phase by (photons in `mode`) × `per_photon_phase`.
    pub fn cross_kerr_tag(&self, mode: &str, per_photon_phase: f64) -> Result<TaggedState> {
        if !per_photon_phase.is_finite() {
            return Err(Error::Parameter("cross-Kerr phase must be finite".into()));
        }
        let slot = self.register.index_of(mode)?;
        let terms = self
            .terms
            .iter()
            .map(|t| TaggedTerm {
                ket: t.ket.clone(),
                amplitude: t.amplitude,
                probe_phase: t.probe_phase + f64::from(t.ket.occupation(slot)) * per_photon_phase,
            })
            .collect();
        Ok(TaggedState::build(self.register.clone(), terms))
    }
}

impl From<&PureState> for TaggedState {
    fn from(state: &PureState) -> Self {
        let terms = state
            .terms()
            .map(|(k, a)| TaggedTerm {
                ket: k.clone(),
                amplitude: *a,
                probe_phase: 0.0,
            })
            .collect();
        TaggedState::build(state.register().clone(), terms)
    }
}

impl From<PureState> for TaggedState {
    fn from(state: PureState) -> Self {
        TaggedState::from(&state)
    }
}

/// Couples `mode` to the probe: every branch gains
/// (occupation of `mode`) × `per_photon_phase`. Amplitudes are untouched.
pub fn cross_kerr_tag(
    state: impl Into<TaggedState>,
    mode: &str,
    per_photon_phase: f64,
) -> Result<TaggedState> {
    state.into().cross_kerr_tag(mode, per_photon_phase)
}

/// One homodyne measurement class.
#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneOutcome {
    /// |probe phase| shared by the branches of this class.
    pub phase_class: f64,
    /// Renormalized signal state conditioned on this class.
    pub branch: PureState,
    pub probability: f64,
}

/// Ideal homodyne readout of the probe.
///
/// Branches are grouped by |probe phase|; classes are returned in order of
/// increasing phase. A class holding the same ket under two different phases
/// would leave the signal entangled with the probe, which this pure-state
/// model cannot represent, so it is rejected.
pub fn homodyne_partition(state: &TaggedState) -> Result<Vec<HomodyneOutcome>> {
    let total = state.norm_sq();
    if (total - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Contract(format!(
            "homodyne readout needs a normalized state, got norm² {total}"
        )));
    }
    let mut order: Vec<&TaggedTerm> = state.terms.iter().collect();
    order.sort_by(|a, b| a.probe_phase.abs().total_cmp(&b.probe_phase.abs()));

    let mut classes: Vec<(f64, Vec<&TaggedTerm>)> = Vec::new();
    for t in order {
        let mag = t.probe_phase.abs();
        match classes.last_mut() {
            Some((rep, members)) if (mag - *rep).abs() < PHASE_TOLERANCE => members.push(t),
            _ => classes.push((mag, vec![t])),
        }
    }

    classes
        .into_iter()
        .map(|(phase_class, members)| {
            let mut seen: BTreeMap<&BasisKet, f64> = BTreeMap::new();
            for t in &members {
                if let Some(p) = seen.insert(&t.ket, t.probe_phase) {
                    if (p - t.probe_phase).abs() >= PHASE_TOLERANCE {
                        return Err(Error::Contract(format!(
                            "ket {} carries probe phases {p} and {} in one class",
                            t.ket, t.probe_phase
                        )));
                    }
                }
            }
            let raw = PureState::from_terms(
                state.register.clone(),
                members.iter().map(|t| (t.ket.clone(), t.amplitude)),
            )?;
            let probability = raw.norm_sq() / total;
            Ok(HomodyneOutcome {
                phase_class,
                branch: raw.normalized()?,
                probability,
            })
        })
        .collect()
}

/// Sign convention of a two-port beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignConvention {
    /// in₁† → √(1−t) out₁† − √t out₂†, in₂† → √t out₁† + √(1−t) out₂†.
    Ecp1,
    /// in₁† → √(1−t) out₁† + √t out₂†, in₂† → √t out₁† − √(1−t) out₂†.
    Ecp2,
}

/// A (variable) beam splitter acting on two modes.
///
/// If both output labels are absent from the register, the input slots are
/// relabeled in place (in₁ → out₁, in₂ → out₂). Otherwise both outputs must
/// already be register modes.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSplitterSpec {
    pub mode_in: (ModeId, ModeId),
    pub mode_out: (ModeId, ModeId),
    transmissivity: f64,
    reflectivity: f64,
    pub convention: SignConvention,
}

impl BeamSplitterSpec {
    pub fn new(
        mode_in: (&str, &str),
        mode_out: (&str, &str),
        transmissivity: f64,
        convention: SignConvention,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmissivity) {
            return Err(Error::Parameter(format!(
                "transmissivity {transmissivity} outside [0, 1]"
            )));
        }
        Self::with_weights(mode_in, mode_out, 1.0 - transmissivity, transmissivity, convention)
    }

    /// Splitter from unnormalized reflected/transmitted intensity weights.
    ///
    /// Lets callers pass 1−t directly when t is within rounding of 1.
    pub fn with_weights(
        mode_in: (&str, &str),
        mode_out: (&str, &str),
        reflected: f64,
        transmitted: f64,
        convention: SignConvention,
    ) -> Result<Self> {
        if !(reflected >= 0.0 && transmitted >= 0.0) || !(reflected + transmitted).is_finite() {
            return Err(Error::Parameter(format!(
                "invalid splitting weights ({reflected}, {transmitted})"
            )));
        }
        let sum = reflected + transmitted;
        if sum <= 0.0 {
            return Err(Error::Parameter("splitting weights sum to zero".into()));
        }
        if mode_in.0 == mode_in.1 || mode_out.0 == mode_out.1 {
            return Err(Error::Register("beam splitter ports must be distinct".into()));
        }
        Ok(BeamSplitterSpec {
            mode_in: (mode_in.0.into(), mode_in.1.into()),
            mode_out: (mode_out.0.into(), mode_out.1.into()),
            transmissivity: transmitted / sum,
            reflectivity: reflected / sum,
            convention,
        })
    }

    /// Balanced 50:50 splitter.
    pub fn balanced(
        mode_in: (&str, &str),
        mode_out: (&str, &str),
        convention: SignConvention,
    ) -> Result<Self> {
        Self::with_weights(mode_in, mode_out, 1.0, 1.0, convention)
    }

    pub fn transmissivity(&self) -> f64 {
        self.transmissivity
    }

    /// Row i gives the output-mode coefficients of input creation operator i.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let r = self.reflectivity.sqrt();
        let t = self.transmissivity.sqrt();
        match self.convention {
            SignConvention::Ecp1 => [[r, -t], [t, r]],
            SignConvention::Ecp2 => [[r, t], [t, -r]],
        }
    }

    /// The splitter that undoes this one, mapping the outputs back onto the
    /// inputs.
    pub fn inverse(&self) -> BeamSplitterSpec {
        let (i1, i2) = self.mode_in.clone();
        let (o1, o2) = self.mode_out.clone();
        let (mode_in, mode_out) = match self.convention {
            // the rotation's transpose is the same rotation with both port
            // pairs swapped
            SignConvention::Ecp1 => ((o2, o1), (i2, i1)),
            // symmetric and self-inverse
            SignConvention::Ecp2 => ((o1, o2), (i1, i2)),
        };
        BeamSplitterSpec {
            mode_in,
            mode_out,
            ..self.clone()
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// √(n!) as a product, exact enough for the photon numbers used here.
fn sqrt_factorial_ratio(from: u32, to: u32) -> f64 {
    (from + 1..=to).map(|j| f64::from(j).sqrt()).product()
}

/// Rewrites both input creation operators through the splitter's 2×2 unitary.
///
/// Multi-photon inputs are expanded binomially with bosonic √(n!) factors,
/// so the map is exact for any occupation.
pub fn beam_splitter(state: &PureState, spec: &BeamSplitterSpec) -> Result<PureState> {
    let reg = state.register();
    let i1 = reg.index_of(spec.mode_in.0.as_str())?;
    let i2 = reg.index_of(spec.mode_in.1.as_str())?;
    let out_present = (
        reg.contains(spec.mode_out.0.as_str()),
        reg.contains(spec.mode_out.1.as_str()),
    );
    let (register, o1, o2) = match out_present {
        (true, true) => (
            reg.clone(),
            reg.index_of(spec.mode_out.0.as_str())?,
            reg.index_of(spec.mode_out.1.as_str())?,
        ),
        (false, false) => (
            reg.relabeled(i1, spec.mode_out.0.clone())
                .relabeled(i2, spec.mode_out.1.clone()),
            i1,
            i2,
        ),
        _ => {
            return Err(Error::Register(format!(
                "beam splitter outputs ({}, {}) partially present in {reg}",
                spec.mode_out.0, spec.mode_out.1
            )))
        }
    };
    let u = spec.matrix();

    let mut out: BTreeMap<BasisKet, Complex64> = BTreeMap::new();
    for (ket, &amp) in state.terms() {
        let m1 = ket.occupation(i1);
        let m2 = ket.occupation(i2);
        let base = ket.with_occupation(i1, 0).with_occupation(i2, 0);
        let b1 = base.occupation(o1);
        let b2 = base.occupation(o2);
        let prefactor = amp / (sqrt_factorial_ratio(0, m1) * sqrt_factorial_ratio(0, m2));
        for j in 0..=m1 {
            let c1 = binomial(m1, j) * u[0][0].powi(j as i32) * u[0][1].powi((m1 - j) as i32);
            if c1 == 0.0 {
                continue;
            }
            for k in 0..=m2 {
                let c2 = binomial(m2, k) * u[1][0].powi(k as i32) * u[1][1].powi((m2 - k) as i32);
                if c2 == 0.0 {
                    continue;
                }
                let n1 = b1 + j + k;
                let n2 = b2 + (m1 - j) + (m2 - k);
                let gain = sqrt_factorial_ratio(b1, n1) * sqrt_factorial_ratio(b2, n2);
                let key = base.with_occupation(o1, n1).with_occupation(o2, n2);
                *out.entry(key).or_default() += prefactor * (c1 * c2 * gain);
            }
        }
    }
    PureState::from_terms(register, out)
}

/// One click of a single-photon detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub fired: ModeId,
    /// Remaining modes, renormalized, with all detector modes traced out.
    pub branch: PureState,
    pub probability: f64,
}

/// Projects onto "exactly one of `modes` registered a photon".
///
/// Every branch must hold exactly one photon across the detector modes.
/// Outcomes follow the order of `modes`; modes that never fire are omitted.
pub fn detect_photon(state: &PureState, modes: &[&str]) -> Result<Vec<Detection>> {
    let reg = state.register();
    let slots = modes
        .iter()
        .map(|m| reg.index_of(m))
        .collect::<Result<Vec<_>>>()?;
    let remaining = reg.without(&slots);
    let total = state.norm_sq();
    if total <= 0.0 {
        return Err(Error::Contract("detection on the zero vector".into()));
    }

    let mut per_mode: Vec<Vec<(BasisKet, Complex64)>> = vec![Vec::new(); slots.len()];
    for (ket, &amp) in state.terms() {
        let counts: Vec<u32> = slots.iter().map(|&s| ket.occupation(s)).collect();
        let clicks: u32 = counts.iter().sum();
        if clicks != 1 {
            return Err(Error::Contract(format!(
                "branch {ket} has {clicks} photons across detector modes, expected 1"
            )));
        }
        let which = counts.iter().position(|&c| c == 1).expect("one click");
        per_mode[which].push((ket.without(&slots), amp));
    }

    let mut outcomes = Vec::new();
    for (idx, terms) in per_mode.into_iter().enumerate() {
        if terms.is_empty() {
            continue;
        }
        let raw = PureState::from_terms(remaining.clone(), terms)?;
        let mass = raw.norm_sq();
        if mass == 0.0 {
            continue;
        }
        outcomes.push(Detection {
            fired: reg.modes()[slots[idx]].clone(),
            probability: mass / total,
            branch: raw.normalized()?,
        });
    }
    Ok(outcomes)
}

/// Half-wave-plate phase flip: amplitude × (−1)^(photons in `mode`).
pub fn phase_flip(state: &PureState, mode: &str) -> Result<PureState> {
    let slot = state.register().index_of(mode)?;
    Ok(state.map_amplitudes(|k| {
        if k.occupation(slot) % 2 == 1 {
            Complex64::new(-1.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    }))
}

/// Negates every branch in which `mode` is occupied.
///
/// On a NOON state this flips the sign of the |0,N⟩ component for either
/// parity of N; for odd N it coincides with [`phase_flip`].
pub fn flip_occupied_sign(state: &PureState, mode: &str) -> Result<PureState> {
    let slot = state.register().index_of(mode)?;
    Ok(state.map_amplitudes(|k| {
        if k.occupation(slot) > 0 {
            Complex64::new(-1.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    }))
}
