//! Closed-form success probabilities of the concentration chain.
//!
//! With F_j = |α|^{2^j} + |β|^{2^j},
//!
//! P_K = 2|αβ|^{2^K} / (F_2 F_3 ⋯ F_K)
//!
//! where the empty product for K = 1 gives P_1 = 2|αβ|². Factors are
//! evaluated as logarithms so that K = 10 does not underflow.

use rayon::prelude::*;

use crate::ecp::{run_schedule, Protocol, ProtocolConfig};
use crate::error::{Error, Result};

/// One point of the P_total(α) curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub p_total: f64,
    pub per_round_p: Vec<f64>,
    /// Same quantity from the state-vector simulation, when requested.
    pub simulated: Option<f64>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("α = {alpha} outside (0, 1)")))
    }
}

/// ln(x^m + y^m) for x, y > 0.
fn ln_power_sum(x: f64, y: f64, m: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    m * hi.ln() + (m * (lo / hi).ln()).exp().ln_1p()
}

/// ln F_j with F_j = |α|^{2^j} + |β|^{2^j}.
fn ln_f(a_sq: f64, b_sq: f64, j: u32) -> f64 {
    ln_power_sum(a_sq, b_sq, 2f64.powi(j as i32 - 1))
}

fn ln_p_round(a_sq: f64, b_sq: f64, k: u32) -> f64 {
    let numerator = std::f64::consts::LN_2 + 2f64.powi(k as i32 - 1) * (a_sq * b_sq).ln();
    let denominator: f64 = (2..=k).map(|j| ln_f(a_sq, b_sq, j)).sum();
    numerator - denominator
}

/// Unconditional success probability of round `k`.
pub fn p_round_closed_form(alpha: f64, k: u32) -> Result<f64> {
    check_alpha(alpha)?;
    if k == 0 {
        return Err(Error::Parameter("rounds are numbered from 1".into()));
    }
    let a_sq = alpha * alpha;
    Ok(ln_p_round(a_sq, 1.0 - a_sq, k).exp())
}

/// P_1 + ⋯ + P_K.
pub fn p_total_closed_form(alpha: f64, rounds: u32) -> Result<f64> {
    Ok(per_round_closed_form(alpha, rounds)?.iter().sum())
}

pub fn per_round_closed_form(alpha: f64, rounds: u32) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if rounds == 0 {
        return Err(Error::Parameter("round count K must be positive".into()));
    }
    let a_sq = alpha * alpha;
    let b_sq = 1.0 - a_sq;
    Ok((1..=rounds).map(|k| ln_p_round(a_sq, b_sq, k).exp()).collect())
}

/// Probability that all of the first K rounds fail: F_{K+1} / (F_2 ⋯ F_K).
pub fn residual_failure_closed_form(alpha: f64, rounds: u32) -> Result<f64> {
    check_alpha(alpha)?;
    let a_sq = alpha * alpha;
    let b_sq = 1.0 - a_sq;
    let denominator: f64 = (2..=rounds).map(|j| ln_f(a_sq, b_sq, j)).sum();
    Ok((ln_f(a_sq, b_sq, rounds + 1) - denominator).exp())
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (count - 1) as f64;
            (0..count)
                .map(|i| if i + 1 == count { stop } else { start + step * i as f64 })
                .collect()
        }
    }
}

/// α from 0.01 to 0.999 in 199 equal steps.
pub fn default_alpha_grid() -> Vec<f64> {
    linear_grid(0.01, 0.999, 200)
}

/// Closed-form P_total over `grid` with K = `rounds`.
pub fn figure3_sweep(rounds: u32, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    grid.par_iter()
        .map(|&alpha| {
            let per_round_p = per_round_closed_form(alpha, rounds)?;
            Ok(SweepPoint {
                alpha,
                p_total: per_round_p.iter().sum(),
                per_round_p,
                simulated: None,
            })
        })
        .collect()
}

/// Like [`figure3_sweep`], also running the simulation at each point.
pub fn figure3_sweep_checked(
    rounds: u32,
    grid: &[f64],
    protocol: Protocol,
    n_photons: u32,
) -> Result<Vec<SweepPoint>> {
    let mut points = figure3_sweep(rounds, grid)?;
    points.par_iter_mut().try_for_each(|p| -> Result<()> {
        let config = ProtocolConfig::lossless(protocol, p.alpha, n_photons, rounds)?;
        p.simulated = Some(run_schedule(&config)?.p_total);
        Ok(())
    })?;
    Ok(points)
}
