//! Concentration rounds for both protocol variants, failure-branch
//! recycling and the transmission-loss model.
//!
//! The NOON pair lives on modes `a1` (Alice) and `b1` (Bob). A round tags
//! the joint N+1 photon state with two cross-Kerr couplings, keeps the ±θ
//! homodyne class as the success branch, and interferes the auxiliary
//! photon on a balanced splitter before a single-photon detector pair.
//! The 0-phase class is processed the same way and becomes the input of the
//! next round with squared coefficients.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{BasisKet, ModeId, PureState, Register};
use crate::optics::{
    beam_splitter, cross_kerr_tag, detect_photon, flip_occupied_sign, homodyne_partition,
    BeamSplitterSpec, SignConvention, DEFAULT_THETA, PHASE_TOLERANCE,
};

pub const MODE_A1: &str = "a1";
pub const MODE_B1: &str = "b1";

/// Round cap used when none is given.
pub const DEFAULT_ROUNDS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Auxiliary photon shared between Alice and Bob.
    Ecp1,
    /// Auxiliary photon prepared locally by Bob with a variable splitter.
    Ecp2,
}

impl Protocol {
    /// Modes carrying the auxiliary photon, and the detector modes after the
    /// balanced splitter.
    fn aux_modes(self) -> ((&'static str, &'static str), (&'static str, &'static str)) {
        match self {
            Protocol::Ecp1 => (("a2", "b2"), ("d1", "d2")),
            Protocol::Ecp2 => (("c1", "c2"), ("e1", "e2")),
        }
    }

    /// Auxiliary mode coupled to the probe together with `b1`.
    fn qnd_mode(self) -> &'static str {
        match self {
            Protocol::Ecp1 => "b2",
            Protocol::Ecp2 => "c1",
        }
    }

    fn convention(self) -> SignConvention {
        match self {
            Protocol::Ecp1 => SignConvention::Ecp1,
            Protocol::Ecp2 => SignConvention::Ecp2,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Ecp1 => "ecp1",
            Protocol::Ecp2 => "ecp2",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ecp1" => Ok(Protocol::Ecp1),
            "ecp2" => Ok(Protocol::Ecp2),
            other => Err(Error::Parameter(format!("unknown protocol `{other}`"))),
        }
    }
}

/// Inputs of a concentration run. β is derived as √(1−α²).
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    alpha: f64,
    pub n_photons: u32,
    pub max_rounds: u32,
    pub theta: f64,
    /// Survival probability of one nonlocal photon transmission.
    pub loss_eta: f64,
}

impl ProtocolConfig {
    pub fn new(
        protocol: Protocol,
        alpha: f64,
        n_photons: u32,
        max_rounds: u32,
        theta: f64,
        loss_eta: f64,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if n_photons == 0 {
            return Err(Error::Parameter("photon number N must be positive".into()));
        }
        if max_rounds == 0 {
            return Err(Error::Parameter("round count K must be positive".into()));
        }
        if !theta.is_finite() || theta.abs() < PHASE_TOLERANCE {
            return Err(Error::Parameter(format!(
                "cross-Kerr phase θ = {theta} must be finite and nonzero"
            )));
        }
        if !(0.0..=1.0).contains(&loss_eta) {
            return Err(Error::Parameter(format!("loss η = {loss_eta} outside [0, 1]")));
        }
        Ok(ProtocolConfig {
            protocol,
            alpha,
            n_photons,
            max_rounds,
            theta,
            loss_eta,
        })
    }

    /// Lossless config with default θ.
    pub fn lossless(protocol: Protocol, alpha: f64, n_photons: u32, max_rounds: u32) -> Result<Self> {
        Self::new(protocol, alpha, n_photons, max_rounds, DEFAULT_THETA, 1.0)
    }

    /// Config from α² rather than α.
    pub fn from_alpha_sq(
        protocol: Protocol,
        alpha_sq: f64,
        n_photons: u32,
        max_rounds: u32,
        theta: f64,
        loss_eta: f64,
    ) -> Result<Self> {
        if !(alpha_sq > 0.0 && alpha_sq < 1.0) {
            return Err(Error::Parameter(format!("α² = {alpha_sq} outside (0, 1)")));
        }
        Self::new(protocol, alpha_sq.sqrt(), n_photons, max_rounds, theta, loss_eta)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        (1.0 - self.alpha * self.alpha).sqrt()
    }

    pub fn with_protocol(&self, protocol: Protocol) -> ProtocolConfig {
        ProtocolConfig {
            protocol,
            ..self.clone()
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("α = {alpha} outside (0, 1)")))
    }
}

/// Intensity weights (α^{2^k}, β^{2^k}) of the coefficient pair after
/// k − 1 squarings, normalized to sum to one.
///
/// Evaluated through the ratio (β/α)^{2^k} in log space so that neither
/// weight underflows before normalization.
pub fn recycled_weights(alpha: f64, round_k: u32) -> (f64, f64) {
    let a2 = alpha * alpha;
    let b2 = 1.0 - a2;
    let exponent = 2f64.powi(round_k as i32 - 1);
    let log_ratio = exponent * (b2.ln() - a2.ln());
    if log_ratio <= 0.0 {
        let r = log_ratio.exp();
        (1.0 / (1.0 + r), r / (1.0 + r))
    } else {
        let r = (-log_ratio).exp();
        (r / (1.0 + r), 1.0 / (1.0 + r))
    }
}

/// α|N,0⟩ + β|0,N⟩ on `modes`.
pub fn prepare_less_entangled_noon(alpha: f64, n: u32, modes: (&str, &str)) -> Result<PureState> {
    check_alpha(alpha)?;
    noon_from_weights(alpha * alpha, 1.0 - alpha * alpha, n, modes)
}

/// The NOON state left after `squarings` failed rounds, coefficients
/// ∝ (α^{2^s}, β^{2^s}).
pub fn recycled_noon(alpha: f64, n: u32, squarings: u32, modes: (&str, &str)) -> Result<PureState> {
    check_alpha(alpha)?;
    let (wa, wb) = recycled_weights(alpha, squarings + 1);
    noon_from_weights(wa, wb, n, modes)
}

fn noon_from_weights(wa: f64, wb: f64, n: u32, modes: (&str, &str)) -> Result<PureState> {
    if n == 0 {
        return Err(Error::Parameter("photon number N must be positive".into()));
    }
    let register = Register::new([modes.0, modes.1])?;
    let norm = (wa + wb).sqrt();
    PureState::from_terms(
        register,
        [
            (BasisKet::new(vec![n, 0]), Complex64::new(wa.sqrt() / norm, 0.0)),
            (BasisKet::new(vec![0, n]), Complex64::new(wb.sqrt() / norm, 0.0)),
        ],
    )
}

/// Shared single-photon state α|1,0⟩ + β|0,1⟩.
pub fn prepare_aux_ecp1(alpha: f64, modes: (&str, &str)) -> Result<PureState> {
    check_alpha(alpha)?;
    single_photon_from_weights(alpha * alpha, 1.0 - alpha * alpha, modes)
}

fn single_photon_from_weights(w1: f64, w2: f64, modes: (&str, &str)) -> Result<PureState> {
    let register = Register::new([modes.0, modes.1])?;
    let norm = (w1 + w2).sqrt();
    PureState::from_terms(
        register,
        [
            (BasisKet::new(vec![1, 0]), Complex64::new(w1.sqrt() / norm, 0.0)),
            (BasisKet::new(vec![0, 1]), Complex64::new(w2.sqrt() / norm, 0.0)),
        ],
    )
}

/// One photon sent through a variable splitter of transmissivity `t`:
/// √(1−t)|1,0⟩ + √t|0,1⟩ on `modes`.
pub fn prepare_aux_ecp2(t: f64, modes: (&str, &str)) -> Result<PureState> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Parameter(format!("transmissivity {t} outside [0, 1]")));
    }
    aux_through_vbs(1.0 - t, t, modes)
}

fn aux_through_vbs(reflected: f64, transmitted: f64, modes: (&str, &str)) -> Result<PureState> {
    const SOURCE: &str = "vbs_in";
    const VACUUM: &str = "vbs_vac";
    let photon = PureState::vacuum([SOURCE, VACUUM])?.create(SOURCE, 1)?;
    let vbs = BeamSplitterSpec::with_weights(
        (SOURCE, VACUUM),
        modes,
        reflected,
        transmitted,
        SignConvention::Ecp2,
    )?;
    beam_splitter(&photon, &vbs)
}

/// VBS transmissivity for round k: |α|^{2^k} / (|α|^{2^k} + |β|^{2^k}).
pub fn vbs_transmission(alpha: f64, round_k: u32) -> f64 {
    recycled_weights(alpha, round_k).0
}

/// Which post-selected branch a detection belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    Success,
    Failure,
}

/// A detector click and the state it heralds, before and after correction.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedBranch {
    pub kind: BranchKind,
    pub fired: ModeId,
    /// Probability of this click given the branch's homodyne class.
    pub probability: f64,
    pub raw: PureState,
    pub corrected: PureState,
    /// Whether the |0,N⟩ sign flip was applied.
    pub sign_flipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub round_index: u32,
    /// `None` when the ±θ class is empty (the input had collapsed to a
    /// product state).
    pub success_state: Option<PureState>,
    /// Conditioned on reaching this round.
    pub success_prob: f64,
    pub failure_state: Option<PureState>,
    pub failure_prob: f64,
    /// Transmissivity of the local VBS (ECP2 only).
    pub vbs_transmission_used: Option<f64>,
    /// Every detector outcome of both branches with its correction.
    pub heralds: Vec<HeraldedBranch>,
}

impl RoundOutcome {
    pub fn corrections_applied(&self) -> impl Iterator<Item = &HeraldedBranch> {
        self.heralds.iter().filter(|h| h.sign_flipped)
    }
}

/// Reads (amplitude of |N,0⟩, amplitude of |0,N⟩) from a state on (a1, b1).
fn noon_coefficients(state: &PureState, n: u32) -> Result<(Complex64, Complex64)> {
    let reg = state.register();
    if reg.len() != 2 || reg.index_of(MODE_A1)? != 0 || reg.index_of(MODE_B1)? != 1 {
        return Err(Error::Contract(format!(
            "expected a state on [{MODE_A1},{MODE_B1}], got {reg}"
        )));
    }
    for (ket, _) in state.terms() {
        let occ = ket.occupations();
        if occ != [n, 0] && occ != [0, n] {
            return Err(Error::Contract(format!("ket {ket} is not of N00N form for N = {n}")));
        }
    }
    if !state.is_normalized() {
        return Err(Error::Contract(format!(
            "round input must be normalized, got norm² {}",
            state.norm_sq()
        )));
    }
    Ok((state.amplitude(&[n, 0]), state.amplitude(&[0, n])))
}

/// Runs one concentration round on a normalized NOON state over (a1, b1).
///
/// The auxiliary photon is prepared from the config's α for round `round_k`
/// (coefficients (α^{2^{k-1}}, β^{2^{k-1}}) for ECP1, transmissivity t_k for
/// ECP2), as the parties are assumed to know α in advance.
pub fn run_round(state: &PureState, config: &ProtocolConfig, round_k: u32) -> Result<RoundOutcome> {
    if round_k == 0 {
        return Err(Error::Parameter("rounds are numbered from 1".into()));
    }
    let n = config.n_photons;
    noon_coefficients(state, n)?;

    let protocol = config.protocol;
    let (aux_modes, detector_modes) = protocol.aux_modes();
    let (wa, wb) = recycled_weights(config.alpha, round_k);
    let (aux, vbs_t) = match protocol {
        Protocol::Ecp1 => (single_photon_from_weights(wa, wb, aux_modes)?, None),
        // t = wa, 1 − t = wb, passed separately to keep 1 − t exact
        Protocol::Ecp2 => (aux_through_vbs(wb, wa, aux_modes)?, Some(wa)),
    };
    let joint = state.tensor(&aux)?;

    let tagged = cross_kerr_tag(&joint, MODE_B1, -config.theta / f64::from(n))?
        .cross_kerr_tag(protocol.qnd_mode(), config.theta)?;
    let classes = homodyne_partition(&tagged)?;

    let mut success = None;
    let mut failure = None;
    for class in classes {
        if class.phase_class < PHASE_TOLERANCE {
            failure = Some(class);
        } else if (class.phase_class - config.theta.abs()).abs() < PHASE_TOLERANCE {
            success = Some(class);
        } else {
            return Err(Error::Contract(format!(
                "unexpected probe phase class {}",
                class.phase_class
            )));
        }
    }

    let bs = BeamSplitterSpec::balanced(aux_modes, detector_modes, protocol.convention())?;
    let mut heralds = Vec::new();
    let mut settle = |kind: BranchKind, branch: &PureState| -> Result<PureState> {
        let after = beam_splitter(branch, &bs)?;
        let clicks = detect_photon(&after, &[detector_modes.0, detector_modes.1])?;
        let mut folded: Option<PureState> = None;
        for click in clicks {
            // the second detector heralds a relative minus sign on |0,N⟩
            let flip = click.fired.as_str() == detector_modes.1;
            let corrected = if flip {
                flip_occupied_sign(&click.branch, MODE_B1)?
            } else {
                click.branch.clone()
            }
            .with_canonical_phase();
            if folded.is_none() {
                folded = Some(corrected.clone());
            }
            heralds.push(HeraldedBranch {
                kind,
                fired: click.fired,
                probability: click.probability,
                raw: click.branch,
                corrected,
                sign_flipped: flip,
            });
        }
        folded.ok_or_else(|| Error::Contract("no detector fired".into()))
    };

    let success_prob = success.as_ref().map_or(0.0, |c| c.probability);
    let failure_prob = failure.as_ref().map_or(0.0, |c| c.probability);
    let success_state = success
        .as_ref()
        .map(|c| settle(BranchKind::Success, &c.branch))
        .transpose()?;
    let failure_state = failure
        .as_ref()
        .map(|c| settle(BranchKind::Failure, &c.branch))
        .transpose()?;

    Ok(RoundOutcome {
        round_index: round_k,
        success_state,
        success_prob,
        failure_state,
        failure_prob,
        vbs_transmission_used: vbs_t,
        heralds,
    })
}

/// Per-round entry of a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u32,
    /// VBS transmissivity t_K (ECP2 only).
    pub t_k: Option<f64>,
    /// Success probability given failure in every earlier round.
    pub p_conditional: f64,
    /// Probability that the run first succeeds in this round.
    pub p_unconditional: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub per_round: Vec<RoundRecord>,
    pub p_total: f64,
}

impl Schedule {
    fn from_rounds(per_round: Vec<RoundRecord>) -> Schedule {
        let p_total = per_round.iter().map(|r| r.p_unconditional).sum();
        Schedule { per_round, p_total }
    }
}

/// Full record of a multi-round run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub schedule: Schedule,
    pub rounds: Vec<RoundOutcome>,
    /// Probability that all K rounds failed.
    pub residual_failure: f64,
}

/// Iterates [`run_round`] on the recycled failure branch for up to K rounds.
pub fn run_protocol(config: &ProtocolConfig) -> Result<ProtocolRun> {
    let mut state = prepare_less_entangled_noon(config.alpha, config.n_photons, (MODE_A1, MODE_B1))?;
    let mut reach = 1.0;
    let mut records = Vec::new();
    let mut rounds = Vec::new();
    for k in 1..=config.max_rounds {
        let outcome = run_round(&state, config, k)?;
        records.push(RoundRecord {
            round: k,
            t_k: outcome.vbs_transmission_used,
            p_conditional: outcome.success_prob,
            p_unconditional: outcome.success_prob * reach,
        });
        reach *= outcome.failure_prob;
        let next = outcome.failure_state.clone();
        rounds.push(outcome);
        match next {
            Some(s) => state = s,
            None => break,
        }
    }
    Ok(ProtocolRun {
        schedule: Schedule::from_rounds(records),
        rounds,
        residual_failure: reach,
    })
}

pub fn run_schedule(config: &ProtocolConfig) -> Result<Schedule> {
    Ok(run_protocol(config)?.schedule)
}

/// Scales each round's success probability by the survival of the
/// auxiliary photon's nonlocal transmissions: two passes (η²) for ECP1,
/// none for ECP2. Failure recycling is left untouched.
pub fn apply_loss_model(schedule: &Schedule, config: &ProtocolConfig) -> Schedule {
    let factor = match config.protocol {
        Protocol::Ecp1 => config.loss_eta * config.loss_eta,
        Protocol::Ecp2 => 1.0,
    };
    Schedule::from_rounds(
        schedule
            .per_round
            .iter()
            .map(|r| RoundRecord {
                p_conditional: r.p_conditional * factor,
                p_unconditional: r.p_unconditional * factor,
                ..r.clone()
            })
            .collect(),
    )
}

/// (|N,0⟩ + |0,N⟩)/√2 on (a1, b1).
pub fn max_entangled_noon(n: u32) -> Result<PureState> {
    noon_from_weights(0.5, 0.5, n, (MODE_A1, MODE_B1))
}
