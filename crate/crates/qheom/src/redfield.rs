// Copyright 2026 qheom Contributors
// SPDX-License-Identifier: Apache-2.0

//! Secular weak-coupling (Redfield) master equation for the two-qubit system.
//!
//! This is the perturbative reference the hierarchy results are compared
//! against. In the eigenbasis of the system Hamiltonian the secular generator
//! splits into a classical rate equation for the populations and independent
//! damped rotations for the coherences:
//!
//! ```text
//! dp_i/dt     = sum_{j != i} R(j -> i) p_j  -  p_i sum_{j != i} R(i -> j),
//! ds_ij/dt    = (-i (E_i - E_j) - (out_i + out_j) / 2) s_ij,   i != j,
//! R(i -> j)   = sum_alpha |<i| V_alpha |j>|^2  W(E_i - E_j),
//! W(omega)    = 2 J(omega) (nbar(omega) + 1),
//! ```
//!
//! with `nbar` the Bose occupation at the bath temperature. `W` is a single
//! formula for both signs: `J` is odd and `nbar(-omega) = -(nbar(omega) + 1)`,
//! so downhill transitions get `2 J (nbar + 1)` and uphill ones `2 J nbar`,
//! both nonnegative, with detailed balance `R(i->j)/R(j->i) = exp(-beta
//! (E_j - E_i))`. `J(0) = 0` kills the pure-dephasing channel, and for this
//! system the diagonal elements `<i| V_alpha |i>` vanish anyway because the
//! coupling operators flip excitation parity while the eigenstates carry a
//! definite parity.
//!
//! Both blocks integrate exactly over a sample interval (a 4x4 matrix
//! exponential for the populations, a complex scalar factor per coherence),
//! so the trajectory has no time-stepping error at the sample points. The
//! secular form requires a nondegenerate spectrum; degeneracies are rejected
//! at build time.

use crate::bath::{spectral_density, DrudeParams};
use crate::heom::{PropagateOptions, SystemModel};
use crate::qmat::{C64, ComplexMatrix, QmatError};
use crate::trajectory::{Trajectory, TrajectoryError, TrajectorySample};
use thiserror::Error;

/// Spectral gaps at or below this are treated as degenerate and rejected.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RedfieldError {
    #[error(
        "eigenvalues {e_i} and {e_j} are within {gap:e}; the secular generator \
         needs a nondegenerate spectrum"
    )]
    DegenerateSpectrum { e_i: f64, e_j: f64, gap: f64 },
    #[error("invalid integration step: {0}")]
    InvalidStep(String),
    #[error("state must be 4x4, got {0}x{0}")]
    BadDimension(usize),
    #[error(transparent)]
    Eigen(#[from] QmatError),
    #[error(transparent)]
    Sample(#[from] TrajectoryError),
}

/// Golden-rule weight `2 J(omega) (nbar(omega) + 1)`, valid for either sign
/// of omega and strictly positive for omega != 0 when `lambda > 0`.
fn golden_rule_weight(p: &DrudeParams, omega: f64) -> f64 {
    // nbar + 1 = 1 / (1 - exp(-beta omega)); expm1 keeps small gaps accurate.
    let occupation = -1.0 / f64::exp_m1(-p.beta * omega);
    2.0 * spectral_density(p, omega) * occupation
}

/// Precomputed secular generator: system eigenbasis, golden-rule rates, and
/// total outflow per eigenstate.
#[derive(Debug)]
pub struct RedfieldGenerator {
    /// Columns are the eigenvectors of the system Hamiltonian.
    basis: ComplexMatrix,
    /// Eigenvalues in ascending order.
    energies: Vec<f64>,
    /// `rates[i][j] = R(i -> j)`; zero on the diagonal.
    rates: [[f64; 4]; 4],
    /// `out_rate[i] = sum_j rates[i][j]`.
    out_rate: [f64; 4],
}

/// Diagonalize the system and assemble the golden-rule rates for both bath
/// coupling operators.
pub fn build_redfield(
    sys: &SystemModel,
    params: &DrudeParams,
) -> Result<RedfieldGenerator, RedfieldError> {
    let eig = sys.h_s.hermitian_eigen()?;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let gap = (eig.values[i] - eig.values[j]).abs();
            if gap <= DEGENERACY_TOL {
                return Err(RedfieldError::DegenerateSpectrum {
                    e_i: eig.values[i],
                    e_j: eig.values[j],
                    gap,
                });
            }
        }
    }
    let basis = eig.vectors;
    let basis_dag = basis.dagger();
    let v_eig = [
        basis_dag.mul(&sys.v[0]).mul(&basis),
        basis_dag.mul(&sys.v[1]).mul(&basis),
    ];
    let mut rates = [[0.0; 4]; 4];
    let mut out_rate = [0.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i == j {
                continue;
            }
            let omega = eig.values[i] - eig.values[j];
            let coupling: f64 = v_eig.iter().map(|v| v[(i, j)].norm_sqr()).sum();
            rates[i][j] = coupling * golden_rule_weight(params, omega);
            out_rate[i] += rates[i][j];
        }
    }
    Ok(RedfieldGenerator {
        basis,
        energies: eig.values,
        rates,
        out_rate,
    })
}

impl RedfieldGenerator {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Transition rate from eigenstate `i` to eigenstate `j`.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[i][j]
    }

    /// Apply the generator once: `d rho / dt` in the site basis.
    pub fn generator_apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let basis_dag = self.basis.dagger();
        let sigma = basis_dag.mul(rho).mul(&self.basis);
        let mut d = ComplexMatrix::zeros(4);
        for i in 0..4 {
            let mut gain = C64::new(0.0, 0.0);
            for j in 0..4 {
                if j != i {
                    gain += self.rates[j][i] * sigma[(j, j)];
                }
            }
            d[(i, i)] = gain - self.out_rate[i] * sigma[(i, i)];
            for j in 0..4 {
                if j == i {
                    continue;
                }
                let omega = self.energies[i] - self.energies[j];
                let damping = 0.5 * (self.out_rate[i] + self.out_rate[j]);
                d[(i, j)] = C64::new(-damping, -omega) * sigma[(i, j)];
            }
        }
        self.basis.mul(&d).mul(&basis_dag)
    }
}

/// The same grid contract as the hierarchy integrator: `t_end` must be an
/// integer number of steps within a relative 1e-9.
fn checked_steps(opts: &PropagateOptions) -> Result<usize, RedfieldError> {
    if !opts.dt.is_finite() || opts.dt <= 0.0 {
        return Err(RedfieldError::InvalidStep(format!(
            "dt must be > 0, got {}",
            opts.dt
        )));
    }
    if !opts.t_end.is_finite() || opts.t_end <= 0.0 {
        return Err(RedfieldError::InvalidStep(format!(
            "t_end must be > 0, got {}",
            opts.t_end
        )));
    }
    if opts.sample_stride == 0 {
        return Err(RedfieldError::InvalidStep(
            "sample_stride must be >= 1".to_string(),
        ));
    }
    let steps = (opts.t_end / opts.dt).round();
    if steps < 1.0 || (steps * opts.dt - opts.t_end).abs() > 1e-9 * opts.t_end.max(1.0) {
        return Err(RedfieldError::InvalidStep(format!(
            "t_end = {} is not an integer number of steps dt = {}",
            opts.t_end, opts.dt
        )));
    }
    Ok(steps as usize)
}

/// Integrate the secular master equation from `rho0` and sample on the same
/// grid the hierarchy uses (step 0 and every `sample_stride` steps). Each
/// sample interval is integrated exactly, so `dt` only fixes the grid.
pub fn propagate_redfield(
    gen: &RedfieldGenerator,
    rho0: &ComplexMatrix,
    opts: &PropagateOptions,
) -> Result<Trajectory, RedfieldError> {
    if rho0.dim() != 4 {
        return Err(RedfieldError::BadDimension(rho0.dim()));
    }
    let n_steps = checked_steps(opts)?;
    let n_samples = n_steps / opts.sample_stride;
    let delta = opts.dt * opts.sample_stride as f64;

    let basis_dag = gen.basis.dagger();
    let sigma0 = basis_dag.mul(rho0).mul(&gen.basis);
    let mut pops = [0.0f64; 4];
    let mut coh = [[C64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        pops[i] = sigma0[(i, i)].re;
        for j in 0..4 {
            if j != i {
                coh[i][j] = sigma0[(i, j)];
            }
        }
    }

    // Population propagator over one sample interval. The generator matrix is
    // real, so the exponential is too; the imaginary rounding is dropped.
    let mut k = ComplexMatrix::zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            if j != i {
                k[(j, i)] = C64::new(gen.rates[i][j], 0.0);
            }
        }
        k[(i, i)] = C64::new(-gen.out_rate[i], 0.0);
    }
    let pm_full = k.scale(C64::new(delta, 0.0)).matrix_exp();
    let mut pm = [[0.0f64; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            pm[i][j] = pm_full[(i, j)].re;
        }
    }
    // Coherence factor over one sample interval.
    let mut fac = [[C64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            if j != i {
                let omega = gen.energies[i] - gen.energies[j];
                let damping = 0.5 * (gen.out_rate[i] + gen.out_rate[j]);
                fac[i][j] = C64::new(-damping * delta, -omega * delta).exp();
            }
        }
    }

    let mut traj = Trajectory::new();
    let mut sigma = ComplexMatrix::zeros(4);
    for s in 0..=n_samples {
        if s > 0 {
            let mut next = [0.0f64; 4];
            for i in 0..4 {
                for j in 0..4 {
                    next[i] += pm[i][j] * pops[j];
                }
            }
            pops = next;
            for i in 0..4 {
                for j in 0..4 {
                    if j != i {
                        coh[i][j] *= fac[i][j];
                    }
                }
            }
        }
        for i in 0..4 {
            sigma[(i, i)] = C64::new(pops[i], 0.0);
            for j in 0..4 {
                if j != i {
                    sigma[(i, j)] = coh[i][j];
                }
            }
        }
        let rho = gen.basis.mul(&sigma).mul(&basis_dag);
        let t = s as f64 * delta;
        traj.push(TrajectorySample::measure(t, &rho)?);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{commutator, DensityMatrix};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn default_setup() -> (SystemModel, DrudeParams) {
        (
            SystemModel::new(1.5, 1.0),
            DrudeParams::new(0.3, 0.5, 2.5).unwrap(),
        )
    }

    fn singlet() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::projector(&[c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)])
    }

    #[test]
    fn spectrum_is_frozen_and_rates_are_parity_selective() {
        let (sys, params) = default_setup();
        let gen = build_redfield(&sys, &params).unwrap();
        let expect = [
            -0.302775637731994646,
            0.5,
            2.5,
            3.30277563773199465,
        ];
        for (got, want) in gen.energies().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "energy {got} vs {want}");
        }
        // Eigenstates 0 and 3 live in the even-parity sector, 1 and 2 in the
        // odd one; the coupling operators only connect opposite parities.
        for (i, j) in [(0, 3), (3, 0), (1, 2), (2, 1)] {
            assert_eq!(gen.rate(i, j), 0.0, "parity-forbidden rate {i}->{j}");
        }
        for (i, j) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
            assert!(gen.rate(i, j) > 0.0, "uphill rate {i}->{j}");
            assert!(gen.rate(j, i) > gen.rate(i, j), "downhill beats uphill");
        }
        for i in 0..4 {
            for j in 0..4 {
                assert!(gen.rate(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn rates_obey_detailed_balance() {
        let (sys, params) = default_setup();
        let gen = build_redfield(&sys, &params).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if gen.rate(i, j) == 0.0 {
                    assert_eq!(gen.rate(j, i), 0.0);
                    continue;
                }
                let ratio = gen.rate(i, j) / gen.rate(j, i);
                let boltzmann =
                    (-params.beta * (gen.energies()[j] - gen.energies()[i])).exp();
                assert!(
                    (ratio - boltzmann).abs() <= 1e-10 * boltzmann,
                    "balance {i}<->{j}: {ratio} vs {boltzmann}"
                );
            }
        }
    }

    #[test]
    fn gibbs_state_is_stationary() {
        let (sys, params) = default_setup();
        let gen = build_redfield(&sys, &params).unwrap();
        let gibbs = DensityMatrix::thermal(&sys.h_s, params.beta);
        let residual = gen.generator_apply(gibbs.matrix()).max_abs();
        assert!(residual <= 1e-10, "Gibbs residual {residual:e}");
    }

    #[test]
    fn decoupled_generator_is_pure_von_neumann() {
        let sys = SystemModel::new(1.5, 1.0);
        let params = DrudeParams::new(0.0, 0.5, 2.5).unwrap();
        let gen = build_redfield(&sys, &params).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(gen.rate(i, j), 0.0);
            }
        }
        let rho = ComplexMatrix::projector(&[c(0.5, 0.0), c(0.5, 0.2), c(-0.4, 0.1), c(0.3, 0.0)]);
        let got = gen.generator_apply(&rho);
        let want = commutator(&sys.h_s, &rho).scale(c(0.0, -1.0));
        assert!(got.sub(&want).max_abs() < 1e-12);
    }

    #[test]
    fn decoupled_identity_stays_put() {
        let sys = SystemModel::new(1.5, 1.0);
        let params = DrudeParams::new(0.0, 0.5, 2.5).unwrap();
        let gen = build_redfield(&sys, &params).unwrap();
        let mixed = ComplexMatrix::identity(4).scale(c(0.25, 0.0));
        let opts = PropagateOptions {
            dt: 1e-3,
            t_end: 1.0,
            sample_stride: 100,
        };
        let traj = propagate_redfield(&gen, &mixed, &opts).unwrap();
        assert_eq!(traj.len(), 11);
        for sample in &traj.samples {
            let diff = sample.rho.matrix().sub(&mixed).max_abs();
            assert!(diff < 1e-13, "t = {}: drift {diff:e}", sample.t);
            assert!(sample.concurrence == 0.0);
        }
    }

    #[test]
    fn long_time_state_is_gibbs_from_any_start() {
        let (sys, params) = default_setup();
        let gen = build_redfield(&sys, &params).unwrap();
        let gibbs = DensityMatrix::thermal(&sys.h_s, params.beta);
        let opts = PropagateOptions {
            dt: 1e-3,
            t_end: 2000.0,
            sample_stride: 100_000,
        };
        let ground =
            ComplexMatrix::projector(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        for start in [singlet(), ground] {
            let traj = propagate_redfield(&gen, &start, &opts).unwrap();
            let last = traj.samples.last().unwrap();
            let diff = last.rho.matrix().sub(gibbs.matrix()).max_abs();
            assert!(diff <= 1e-8, "relaxation residual {diff:e}");
            assert!(
                (last.concurrence - 0.36931285203876835).abs() <= 1e-9,
                "equilibrium concurrence {}",
                last.concurrence
            );
        }
    }

    #[test]
    fn singlet_run_keeps_the_positivity_proxy() {
        let (sys, params) = default_setup();
        let gen = build_redfield(&sys, &params).unwrap();
        let opts = PropagateOptions {
            dt: 1e-3,
            t_end: 10.0,
            sample_stride: 10,
        };
        let traj = propagate_redfield(&gen, &singlet(), &opts).unwrap();
        assert_eq!(traj.len(), 1001);
        let basis_dag = gen.basis.dagger();
        for sample in &traj.samples {
            let sigma = basis_dag.mul(sample.rho.matrix()).mul(&gen.basis);
            let p: Vec<f64> = (0..4).map(|i| sigma[(i, i)].re).collect();
            for &pi in &p {
                assert!((-1e-12..=1.0 + 1e-12).contains(&pi), "population {pi}");
            }
            for i in 0..4 {
                for j in 0..4 {
                    if j != i {
                        let bound = (p[i].max(0.0) * p[j].max(0.0)).sqrt();
                        assert!(
                            sigma[(i, j)].norm() <= bound + 1e-12,
                            "coherence bound at t = {}",
                            sample.t
                        );
                    }
                }
            }
        }
        // The initial entanglement decays into a shallow dip near t = 1.2 and
        // recovers toward the thermal equilibrium value without ever reaching
        // the death threshold: no death interval, hence no revival.
        let report = crate::entangle::detect_death_revival(&traj.concurrence_series(), 1e-6);
        assert!(report.death_intervals.is_empty());
        assert!(report.revival_times.is_empty());
        let dip = traj
            .samples
            .iter()
            .map(|s| s.concurrence)
            .fold(f64::INFINITY, f64::min);
        assert!(dip > 1e-4, "dip {dip:e} would be a death");
        assert!(dip < 1e-2, "dip {dip:e} should be deep");
    }

    #[test]
    fn degenerate_spectrum_is_rejected() {
        let sys = SystemModel::new(1.5, 0.0);
        let params = DrudeParams::new(0.3, 0.5, 2.5).unwrap();
        match build_redfield(&sys, &params) {
            Err(RedfieldError::DegenerateSpectrum { gap, .. }) => assert!(gap <= 1e-9),
            other => panic!("expected degeneracy rejection, got {other:?}"),
        }
    }

    #[test]
    fn grid_contract_matches_the_hierarchy() {
        let (sys, params) = default_setup();
        let gen = build_redfield(&sys, &params).unwrap();
        let rho = singlet();
        for (dt, t_end, stride) in [(0.0, 1.0, 1), (1e-3, 0.0, 1), (1e-3, 1.0, 0), (1e-3, 0.00375, 1)] {
            let opts = PropagateOptions {
                dt,
                t_end,
                sample_stride: stride,
            };
            assert!(matches!(
                propagate_redfield(&gen, &rho, &opts),
                Err(RedfieldError::InvalidStep(_))
            ));
        }
        let opts = PropagateOptions {
            dt: 1e-3,
            t_end: 1.0,
            sample_stride: 10,
        };
        let traj = propagate_redfield(&gen, &rho, &opts).unwrap();
        assert_eq!(traj.len(), 101);
        for (k, sample) in traj.samples.iter().enumerate() {
            assert!((sample.t - 0.01 * k as f64).abs() < 1e-12);
        }
    }
}
