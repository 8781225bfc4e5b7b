// Copyright 2026 qheom Contributors
// SPDX-License-Identifier: Apache-2.0

//! Exactly solvable miniature of the correlated-equilibrium story: one system
//! two-level site exchange-coupled to a single bath two-level site, the pair
//! held in thermal equilibrium.
//!
//! The joint Gibbs state carries a nonzero matrix element between
//! |0_S 1_B> and |1_S 0_B>, a system-bath coherence with the closed form
//! -(1/Z) e^{-beta eps} sinh(beta g), while the reduced system state stays
//! exactly diagonal. The pair of facts is the whole point: tracing out the
//! bath hides a correlation that is plainly there in the joint state, and the
//! closed forms here pin the numerics that the hierarchy reproduces at scale.

use crate::qmat::{C64, ComplexMatrix, DensityMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ToyModelError {
    #[error("invalid toy-model parameter: {0}")]
    InvalidParameter(String),
}

/// Shared transition energy, exchange coupling, inverse temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyParams {
    pub epsilon: f64,
    pub g: f64,
    pub beta: f64,
}

impl ToyParams {
    pub fn new(epsilon: f64, g: f64, beta: f64) -> Result<Self, ToyModelError> {
        if !epsilon.is_finite() || !g.is_finite() {
            return Err(ToyModelError::InvalidParameter(format!(
                "epsilon and g must be finite, got {epsilon}, {g}"
            )));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(ToyModelError::InvalidParameter(format!(
                "beta must be > 0, got {beta}"
            )));
        }
        Ok(ToyParams { epsilon, g, beta })
    }
}

/// Joint Hamiltonian over (|0_S 0_B>, |0_S 1_B>, |1_S 0_B>, |1_S 1_B>):
/// eps on each excitation plus g hopping inside the single-excitation block.
pub fn toy_hamiltonian(p: &ToyParams) -> ComplexMatrix {
    ComplexMatrix::from_real(
        4,
        &[
            0.0, 0.0, 0.0, 0.0, //
            0.0, p.epsilon, p.g, 0.0, //
            0.0, p.g, p.epsilon, 0.0, //
            0.0, 0.0, 0.0, 2.0 * p.epsilon,
        ],
    )
}

/// Four-state partition function 1 + 2 e^{-beta eps} cosh(beta g) + e^{-2 beta eps}.
pub fn partition_function(p: &ToyParams) -> f64 {
    let be = (-p.beta * p.epsilon).exp();
    1.0 + 2.0 * be * (p.beta * p.g).cosh() + be * be
}

/// Joint thermal state exp(-beta H) / Z.
pub fn toy_thermal_state(p: &ToyParams) -> ComplexMatrix {
    DensityMatrix::thermal(&toy_hamiltonian(p), p.beta).into_matrix()
}

/// The system-bath coherence <0_S 1_B| R |1_S 0_B>, both ways: closed form
/// and read out of the numerically exponentiated thermal state. The two agree
/// to 1e-12; the pairing keeps the partition-function convention honest.
#[derive(Debug, Clone, Copy)]
pub struct SystemBathCoherence {
    /// -(1/Z) e^{-beta eps} sinh(beta g); real and <= 0 for g >= 0.
    pub closed_form: f64,
    /// Matrix element of [`toy_thermal_state`].
    pub numeric: C64,
}

pub fn system_bath_coherence(p: &ToyParams) -> SystemBathCoherence {
    let closed_form =
        -(1.0 / partition_function(p)) * (-p.beta * p.epsilon).exp() * (p.beta * p.g).sinh();
    let numeric = toy_thermal_state(p)[(1, 2)];
    debug_assert!(
        (numeric - C64::new(closed_form, 0.0)).norm() <= 1e-12,
        "coherence disagreement: closed {closed_form} vs numeric {numeric}"
    );
    SystemBathCoherence {
        closed_form,
        numeric,
    }
}

/// Partial trace over the bath site (right factor).
pub fn reduced_system_state(p: &ToyParams) -> ComplexMatrix {
    partial_trace_right(&toy_thermal_state(p))
}

fn partial_trace_right(r: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(2);
    for i in 0..2 {
        for j in 0..2 {
            out[(i, j)] = r[(2 * i, 2 * j)] + r[(2 * i + 1, 2 * j + 1)];
        }
    }
    out
}

fn partial_trace_left(r: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(2);
    for a in 0..2 {
        for b in 0..2 {
            out[(a, b)] = r[(a, b)] + r[(2 + a, 2 + b)];
        }
    }
    out
}

/// Max-norm distance between the joint state and the product of its own
/// marginals; strictly positive for g > 0, which is the separability failure
/// the closed-form coherence quantifies.
pub fn product_state_defect(p: &ToyParams) -> f64 {
    let r = toy_thermal_state(p);
    let product = partial_trace_right(&r).kron(&partial_trace_left(&r));
    r.sub(&product).max_abs()
}
