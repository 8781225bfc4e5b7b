// Copyright 2026 qheom Contributors
// SPDX-License-Identifier: Apache-2.0

//! Drude-Lorentz bath: spectral density, Matsubara expansion, counter-term.
//!
//! The spectral density is J(w) = 2 lambda gamma w / (gamma^2 + w^2) with
//! reorganization energy lambda and cutoff gamma. Its correlation function
//! at inverse temperature beta expands into decaying exponentials
//!
//! ```text
//! L(t) = sum_k c_k exp(-nu_k t),   k = 0 .. M,
//! nu_0 = gamma,            c_0 = lambda gamma (cot(beta gamma / 2) - i),
//! nu_k = 2 pi k / beta,    c_k = (4 lambda gamma / beta) nu_k / (nu_k^2 - gamma^2).
//! ```
//!
//! Truncating at M leaves the tail sum_{k>M} c_k / nu_k, which re-enters the
//! equations of motion as a Markovian counter-term with the real coefficient
//!
//! ```text
//! Delta(M) = 2 lambda / (beta gamma) - lambda cot(beta gamma / 2)
//!            - sum_{k=1..M} c_k / nu_k,
//! ```
//!
//! equal to 2 lambda / (beta gamma) - i lambda - sum_{k=0..M} c_k / nu_k,
//! whose imaginary part cancels identically. Delta(M) is positive, strictly
//! decreasing, and falls off like lambda gamma beta / (pi^2 M).

use crate::qmat::C64;
use thiserror::Error;

/// Tolerance for the cot singularity and Matsubara pole rejection checks.
pub const POLE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BathError {
    #[error("invalid bath parameter: {0}")]
    InvalidParameter(String),
    #[error("cot(beta gamma / 2) singular: beta gamma / 2 = {x} is within {POLE_TOL} of {k} pi")]
    CotSingularity { x: f64, k: u64 },
    #[error("gamma = {gamma} collides with Matsubara frequency nu_{k} = {nu}")]
    MatsubaraPole { gamma: f64, k: usize, nu: f64 },
}

/// Drude-Lorentz bath parameters. `lambda = 0` is the decoupled limit and is
/// accepted; all coefficient formulas degrade to zero there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrudeParams {
    pub lambda: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl DrudeParams {
    pub fn new(lambda: f64, gamma: f64, beta: f64) -> Result<Self, BathError> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(BathError::InvalidParameter(format!(
                "lambda must be >= 0, got {lambda}"
            )));
        }
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(BathError::InvalidParameter(format!(
                "gamma must be > 0, got {gamma}"
            )));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(BathError::InvalidParameter(format!(
                "beta must be > 0, got {beta}"
            )));
        }
        let x = beta * gamma / 2.0;
        let k = (x / std::f64::consts::PI).round();
        if k >= 1.0 && (x - k * std::f64::consts::PI).abs() <= POLE_TOL {
            return Err(BathError::CotSingularity { x, k: k as u64 });
        }
        Ok(DrudeParams { lambda, gamma, beta })
    }
}

/// J(w) = 2 lambda gamma w / (gamma^2 + w^2); odd in w, peak value lambda
/// at w = gamma.
pub fn spectral_density(p: &DrudeParams, omega: f64) -> f64 {
    2.0 * p.lambda * p.gamma * omega / (p.gamma * p.gamma + omega * omega)
}

/// Exponential expansion of the bath correlation function, truncated after
/// M Matsubara terms, plus the counter-term coefficient for the tail.
#[derive(Debug, Clone)]
pub struct BathExpansion {
    /// Decay rates nu_0 .. nu_M; nu_0 = gamma.
    pub nu: Vec<f64>,
    /// Prefactors c_0 .. c_M; only c_0 has an imaginary part.
    pub c: Vec<C64>,
    /// Counter-term coefficient Delta(M); real and nonnegative.
    pub delta: f64,
    /// Parameters the expansion was built from.
    pub params: DrudeParams,
}

impl BathExpansion {
    /// Number of Matsubara terms M (the expansion holds M + 1 exponentials).
    pub fn n_matsubara(&self) -> usize {
        self.nu.len() - 1
    }
}

/// Builds the M-term Matsubara expansion. Rejects gamma within [`POLE_TOL`]
/// of any retained Matsubara frequency, where c_k has a pole.
pub fn build_expansion(p: &DrudeParams, m: usize) -> Result<BathExpansion, BathError> {
    let DrudeParams { lambda, gamma, beta } = *p;
    let mut nu = Vec::with_capacity(m + 1);
    let mut c = Vec::with_capacity(m + 1);

    let cot = |x: f64| x.cos() / x.sin();
    nu.push(gamma);
    c.push(C64::new(
        lambda * gamma * cot(beta * gamma / 2.0),
        -lambda * gamma,
    ));

    for k in 1..=m {
        let nu_k = 2.0 * std::f64::consts::PI * k as f64 / beta;
        if (gamma - nu_k).abs() <= POLE_TOL {
            return Err(BathError::MatsubaraPole { gamma, k, nu: nu_k });
        }
        nu.push(nu_k);
        c.push(C64::new(
            4.0 * lambda * gamma / beta * nu_k / (nu_k * nu_k - gamma * gamma),
            0.0,
        ));
    }

    // Tail of the full sum-over-poles identity; the imaginary parts of
    // -i lambda and c_0 / nu_0 cancel exactly, so this is real arithmetic.
    let mut delta = 2.0 * lambda / (beta * gamma) - lambda * cot(beta * gamma / 2.0);
    for k in 1..=m {
        delta -= c[k].re / nu[k];
    }

    Ok(BathExpansion {
        nu,
        c,
        delta,
        params: *p,
    })
}

/// Truncated correlation function L(t) = sum_k c_k exp(-nu_k t) for t >= 0.
pub fn correlation_function(exp: &BathExpansion, t: f64) -> C64 {
    assert!(t >= 0.0, "correlation function defined for t >= 0");
    let mut acc = C64::new(0.0, 0.0);
    for (ck, nuk) in exp.c.iter().zip(&exp.nu) {
        acc += ck * (-nuk * t).exp();
    }
    acc
}

/// Counter-term coefficient evaluated through the complex route
/// 2 lambda / (beta gamma) - i lambda - sum_{k=0..M} c_k / nu_k.
///
/// Kept separate from [`build_expansion`] so tests can verify that the
/// imaginary part cancels rather than being discarded.
pub fn counter_term_complex(exp: &BathExpansion) -> C64 {
    let p = &exp.params;
    let mut z = C64::new(2.0 * p.lambda / (p.beta * p.gamma), -p.lambda);
    for (ck, nuk) in exp.c.iter().zip(&exp.nu) {
        z -= ck / nuk;
    }
    z
}
