// Copyright 2026 qheom Contributors
// SPDX-License-Identifier: Apache-2.0

//! Sampled output of a propagation run.
//!
//! Every sample carries the reduced two-qubit state together with the derived
//! entanglement measures and the conservation diagnostics (trace error,
//! hermiticity defect, minimum eigenvalue). Integrators append samples through
//! [`TrajectorySample::measure`]; analysis helpers on [`Trajectory`] compare
//! runs on a shared grid and extract summary numbers.

use crate::entangle::{self, ConcurrenceSample, EntangleError};
use crate::qmat::{C64, ComplexMatrix, DensityMatrix, QmatError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Entangle(#[from] EntangleError),
    #[error(transparent)]
    Qmat(#[from] QmatError),
    #[error("trajectory grids differ: {0}")]
    GridMismatch(String),
    #[error("empty trajectory")]
    Empty,
}

/// One sampled instant: state, measures, diagnostics.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub rho: DensityMatrix,
    pub concurrence: f64,
    pub eof: f64,
    pub trace_error: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

impl TrajectorySample {
    /// Measures a raw reduced state. Diagnostics are recorded from the state
    /// exactly as handed in; the entanglement measures go through the
    /// validation and clipping in [`entangle::concurrence`].
    pub fn measure(t: f64, rho: &ComplexMatrix) -> Result<Self, TrajectoryError> {
        let trace_error = (rho.trace() - C64::new(1.0, 0.0)).norm();
        let hermiticity_defect = rho.hermiticity_defect();
        let herm = rho.add(&rho.dagger()).scale(C64::new(0.5, 0.0));
        let min_eigenvalue = herm.hermitian_eigen()?.values[0];
        let concurrence = entangle::concurrence(rho)?;
        let eof = entangle::entanglement_of_formation(concurrence)?;
        Ok(TrajectorySample {
            t,
            rho: DensityMatrix::from_matrix_unchecked(rho.clone()),
            concurrence,
            eof,
            trace_error,
            hermiticity_defect,
            min_eigenvalue,
        })
    }
}

/// Ordered samples of one run; time strictly increasing.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, sample: TrajectorySample) {
        if let Some(last) = self.samples.last() {
            debug_assert!(sample.t > last.t, "samples must advance in time");
        }
        self.samples.push(sample);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The (t, C, eof) series for death/revival scanning.
    pub fn concurrence_series(&self) -> Vec<ConcurrenceSample> {
        self.samples
            .iter()
            .map(|s| ConcurrenceSample {
                t: s.t,
                c: s.concurrence,
                eof: s.eof,
            })
            .collect()
    }

    /// Largest concurrence difference between two runs on the same grid.
    pub fn sup_norm_concurrence_diff(&self, other: &Trajectory) -> Result<f64, TrajectoryError> {
        if self.len() != other.len() {
            return Err(TrajectoryError::GridMismatch(format!(
                "{} vs {} samples",
                self.len(),
                other.len()
            )));
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.samples.iter().zip(&other.samples) {
            if (a.t - b.t).abs() > 1e-9 {
                return Err(TrajectoryError::GridMismatch(format!(
                    "sample times {} vs {}",
                    a.t, b.t
                )));
            }
            worst = worst.max((a.concurrence - b.concurrence).abs());
        }
        Ok(worst)
    }

    /// Mean concurrence over the final tenth of the samples; the long-time
    /// plateau estimate used in summaries.
    pub fn equilibrium_concurrence(&self) -> Result<f64, TrajectoryError> {
        if self.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        let tail = (self.len() / 10).max(1);
        let start = self.len() - tail;
        let sum: f64 = self.samples[start..].iter().map(|s| s.concurrence).sum();
        Ok(sum / tail as f64)
    }

    /// Largest concurrence among samples with `t_lo <= t <= t_hi`.
    pub fn max_concurrence_in_window(&self, t_lo: f64, t_hi: f64) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.t >= t_lo && s.t <= t_hi)
            .map(|s| s.concurrence)
            .fold(0.0, f64::max)
    }

    /// Number of interior samples that are strict local minima of C(t) with
    /// strictly positive concurrence. Zero for a curve that decays monotonely
    /// to its plateau after a single maximum; positive when the curve rings.
    pub fn strict_positive_local_minima(&self) -> usize {
        self.samples
            .windows(3)
            .filter(|w| {
                w[1].concurrence > 0.0
                    && w[1].concurrence < w[0].concurrence
                    && w[1].concurrence < w[2].concurrence
            })
            .count()
    }

    pub fn worst_trace_error(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.trace_error)
            .fold(0.0, f64::max)
    }

    pub fn worst_hermiticity_defect(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.hermiticity_defect)
            .fold(0.0, f64::max)
    }

    pub fn lowest_min_eigenvalue(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}
