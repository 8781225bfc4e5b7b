// Copyright 2026 qheom Contributors
// SPDX-License-Identifier: Apache-2.0

//! Two-qubit entanglement measures and sudden-death bookkeeping.
//!
//! Concurrence follows Wootters' construction: C = max(0, l1 - l2 - l3 - l4)
//! with l_i the descending square roots of the eigenvalues of rho rho~, where
//! rho~ = (sy (x) sy) rho* (sy (x) sy) is the spin-flipped state. Factoring
//! rho = L L^dag through its eigensystem turns the l_i into the singular
//! values of the small complex symmetric matrix L^T (sy (x) sy) L, and a
//! Hermitian embedding delivers singular values at absolute accuracy. No
//! square root of a near-zero eigenvalue ever enters, so the result holds to
//! ~1e-14 even for rank-deficient states, where the naive spectral route
//! loses half the significant digits.
//!
//! Entanglement of formation is the binary-entropy map of concurrence; a
//! closed-form Gibbs-state concurrence for the hopping-coupled qubit pair and
//! a death/revival interval scanner round out the module.

use crate::qmat::{C64, ComplexMatrix, QmatError};
use thiserror::Error;

/// Concurrence at or below this value counts as zero when scanning for death
/// intervals.
pub const DEFAULT_ZERO_TOL: f64 = 1e-6;

/// Most negative density-matrix eigenvalue accepted by [`concurrence`].
/// Values in `[-NEGATIVE_EIG_TOL, 0)` are clipped to zero before the square
/// root; anything below is rejected as unphysical. Matches the positivity
/// floor the propagation diagnostics enforce.
pub const NEGATIVE_EIG_TOL: f64 = 1e-6;

/// Hermiticity-defect and trace-error gate on [`concurrence`] input.
pub const STATE_INPUT_TOL: f64 = 1e-6;

/// Spectral weight below this is treated as exactly zero when the state is
/// factored for the concurrence computation. True null directions of a
/// numerical state come back as +-1e-16 from the eigensolver; keeping them
/// would re-enter through square roots amplified to 1e-8.
pub const EIG_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EntangleError {
    #[error("unphysical state: {0}")]
    Unphysical(String),
    #[error("concurrence out of range: {value}")]
    OutOfRange { value: f64 },
    #[error(transparent)]
    Eigen(#[from] QmatError),
}

/// One point of a concurrence trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcurrenceSample {
    pub t: f64,
    pub c: f64,
    pub eof: f64,
}

/// Maximal intervals of vanishing concurrence and the revival times that end
/// them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeathRevivalReport {
    /// Disjoint ordered `(t_start, t_end)` pairs of sample times bracketing
    /// each maximal run with `C <= zeroTol`.
    pub death_intervals: Vec<(f64, f64)>,
    /// Right endpoints of death intervals that end before the trajectory
    /// does; concurrence returns to positive values right after these.
    pub revival_times: Vec<f64>,
}

impl DeathRevivalReport {
    /// Summed length of all death intervals. The `max` keeps the empty sum
    /// at positive zero (`Sum<f64>` folds from -0.0).
    pub fn total_death_length(&self) -> f64 {
        let total: f64 = self.death_intervals.iter().map(|(a, b)| b - a).sum();
        total.max(0.0)
    }
}

/// sy (x) sy, the two-qubit spin-flip conjugator; real and symmetric.
fn spin_flip_operator() -> ComplexMatrix {
    ComplexMatrix::from_real(
        4,
        &[
            0.0, 0.0, 0.0, -1.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            -1.0, 0.0, 0.0, 0.0,
        ],
    )
}

/// rho~ = (sy (x) sy) rho* (sy (x) sy).
pub fn spin_flip(rho: &ComplexMatrix) -> ComplexMatrix {
    let f = spin_flip_operator();
    f.mul(&rho.conj()).mul(&f)
}

/// Wootters concurrence of a two-qubit state.
///
/// Accepts slightly imperfect numerical states: hermiticity defect and trace
/// error up to [`STATE_INPUT_TOL`], eigenvalues down to
/// `-`[`NEGATIVE_EIG_TOL`]. Spectral weight below [`EIG_FLOOR`] is dropped;
/// the clipped magnitude stays visible to callers through the min-eigenvalue
/// diagnostic they record alongside. Result is clamped to `[0, 1]`.
pub fn concurrence(rho: &ComplexMatrix) -> Result<f64, EntangleError> {
    if rho.dim() != 4 {
        return Err(EntangleError::Unphysical(format!(
            "expected a 4x4 two-qubit state, got dim {}",
            rho.dim()
        )));
    }
    let defect = rho.hermiticity_defect();
    if defect > STATE_INPUT_TOL {
        return Err(EntangleError::Unphysical(format!(
            "hermiticity defect {defect:e}"
        )));
    }
    let trace_err = (rho.trace() - C64::new(1.0, 0.0)).norm();
    if trace_err > STATE_INPUT_TOL {
        return Err(EntangleError::Unphysical(format!(
            "trace error {trace_err:e}"
        )));
    }

    // Exactly Hermitian average, then keep only the spectral components with
    // genuine weight; the propagation is allowed tiny negative eigenvalues
    // and the eigensolver reports true zeros as +-1e-16.
    let herm = rho.add(&rho.dagger()).scale(C64::new(0.5, 0.0));
    let eig = herm.hermitian_eigen()?;
    if eig.values[0] < -NEGATIVE_EIG_TOL {
        return Err(EntangleError::Unphysical(format!(
            "eigenvalue {:e} below -{NEGATIVE_EIG_TOL:e}",
            eig.values[0]
        )));
    }
    let kept: Vec<(f64, Vec<C64>)> = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= EIG_FLOOR)
        .map(|(k, &p)| (p, eig.vector(k)))
        .collect();
    if kept.is_empty() {
        return Ok(0.0);
    }

    // With rho = L L^dag, L = V sqrt(P), the spectrum of rho rho~ equals that
    // of M M^dag for M = L^dag Y L^* (Y the spin flip), an r x r complex
    // symmetric matrix; the l_i are its singular values.
    let y = spin_flip_operator();
    let r = kept.len();
    let mut m = vec![C64::new(0.0, 0.0); r * r];
    for k in 0..r {
        for l in k..r {
            let mut s = C64::new(0.0, 0.0);
            for a in 0..4 {
                for b in 0..4 {
                    let w = y[(a, b)].re;
                    if w != 0.0 {
                        s += w * (kept[k].1[a] * kept[l].1[b]).conj();
                    }
                }
            }
            let z = (kept[k].0 * kept[l].0).sqrt() * s;
            m[k * r + l] = z;
            m[l * r + k] = z;
        }
    }

    // Singular values without squaring: [[0, M], [M^dag, 0]] is Hermitian
    // with eigenvalues +-sigma_i, so even the smallest sigma comes out with
    // absolute accuracy.
    let mut aug = ComplexMatrix::zeros(2 * r);
    for k in 0..r {
        for l in 0..r {
            let z = m[k * r + l];
            aug[(k, r + l)] = z;
            aug[(r + l, k)] = z.conj();
        }
    }
    let sv = aug.hermitian_eigen()?;
    let mut lambda = [0.0f64; 4];
    for (i, &sigma) in sv.values[r..].iter().enumerate() {
        lambda[4 - r + i] = sigma.max(0.0);
    }
    let c = lambda[3] - lambda[2] - lambda[1] - lambda[0];
    Ok(c.clamp(0.0, 1.0))
}

/// Binary-entropy map from concurrence to entanglement of formation,
/// h((1 + sqrt(1 - C^2)) / 2); strictly increasing with 0 -> 0 and 1 -> 1.
pub fn entanglement_of_formation(c: f64) -> Result<f64, EntangleError> {
    if !(-1e-12..=1.0 + 1e-12).contains(&c) {
        return Err(EntangleError::OutOfRange { value: c });
    }
    let c = c.clamp(0.0, 1.0);
    let x = 0.5 * (1.0 + (1.0 - c * c).sqrt());
    Ok(binary_entropy(x))
}

fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Hopping-coupled qubit pair: diag(0, eps, eps, 2 eps) plus J exchange on
/// the single-excitation block. This is the Hamiltonian whose Gibbs state
/// [`gibbs_concurrence_closed_form`] describes; the dynamics elsewhere in the
/// crate uses a different (counter-rotating) coupling.
pub fn exchange_hamiltonian(epsilon: f64, j: f64) -> ComplexMatrix {
    ComplexMatrix::from_real(
        4,
        &[
            0.0, 0.0, 0.0, 0.0, //
            0.0, epsilon, j, 0.0, //
            0.0, j, epsilon, 0.0, //
            0.0, 0.0, 0.0, 2.0 * epsilon,
        ],
    )
}

/// Closed-form Gibbs concurrence of [`exchange_hamiltonian`]:
/// max(0, (-1 + sinh(beta J)) / (cosh(beta eps) + cosh(beta J))).
/// Positive exactly for beta J > asinh(1).
pub fn gibbs_concurrence_closed_form(epsilon: f64, j: f64, beta: f64) -> f64 {
    assert!(beta > 0.0, "beta must be positive");
    let raw = (-1.0 + (beta * j).sinh()) / ((beta * epsilon).cosh() + (beta * j).cosh());
    raw.max(0.0)
}

/// Scans a uniformly sampled concurrence trajectory for death intervals.
///
/// A death interval is a maximal run of samples with `C <= zero_tol` that
/// begins after at least one sample with `C > zero_tol`: entanglement must
/// have existed before it can die, so a trajectory that starts at zero does
/// not open an interval until it has first risen. The right endpoint of an
/// interval that ends before the last sample is a revival time.
pub fn detect_death_revival(
    samples: &[ConcurrenceSample],
    zero_tol: f64,
) -> DeathRevivalReport {
    let mut report = DeathRevivalReport::default();
    let mut seen_alive = false;
    let mut run_start: Option<usize> = None;
    for (idx, s) in samples.iter().enumerate() {
        if s.c <= zero_tol {
            if seen_alive && run_start.is_none() {
                run_start = Some(idx);
            }
        } else {
            if let Some(start) = run_start.take() {
                let end = samples[idx - 1].t;
                report.death_intervals.push((samples[start].t, end));
                report.revival_times.push(end);
            }
            seen_alive = true;
        }
    }
    if let Some(start) = run_start {
        let end = samples.last().unwrap().t;
        report.death_intervals.push((samples[start].t, end));
        // ends with the trajectory: no revival
    }
    report
}
