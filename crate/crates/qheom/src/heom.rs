// Copyright 2026 qheom Contributors
// SPDX-License-Identifier: Apache-2.0

//! Hierarchy engine: auxiliary-density-operator bookkeeping, the coupled
//! right-hand side, fixed-step RK4 propagation, equilibration, pulses.
//!
//! The reduced state of the two qubits is the root of a hierarchy of 4x4
//! auxiliary matrices rho^n labeled by a multi-index n_{ak} over bath
//! a in {1,2} and exponential term k in {0..M}. Each ADO obeys
//!
//! ```text
//! d/dt rho^n = -(i [H,.] + sum_{ak} n_{ak} nu_k) rho^n
//!              - Delta sum_a [V_a, [V_a, rho^n]]
//!              - i sum_{ak} [V_a, rho^{n_{ak}+1}]
//!              - i sum_{ak} n_{ak} (c_k V_a rho^{n_{ak}-1}
//!                                   - conj(c_k) rho^{n_{ak}-1} V_a)
//! ```
//!
//! with Delta the counter-term for the truncated Matsubara tail and the
//! index set cut off at total tier L (raised neighbors beyond L read as
//! zero). Both bath coupling operators are qubit flips, so every V_a product
//! is a basis permutation; the hot path exploits that instead of doing dense
//! multiplications. The state vector is one flat complex array, 16 entries
//! per ADO, and all loops run in a fixed order so results are bit-identical
//! between runs.

use std::collections::HashMap;

use crate::bath::BathExpansion;
use crate::qmat::{C64, ComplexMatrix, DensityMatrix};
use crate::trajectory::{Trajectory, TrajectoryError, TrajectorySample};
use thiserror::Error;

const NONE: u32 = u32::MAX;
const ZERO: C64 = C64::new(0.0, 0.0);

/// Basis permutation of V_1 = sx (x) I (flip qubit 1) on |q1 q2>.
const PERM1: [usize; 4] = [2, 3, 0, 1];
/// Basis permutation of V_2 = I (x) sx (flip qubit 2).
const PERM2: [usize; 4] = [1, 0, 3, 2];

#[derive(Debug, Error)]
pub enum HeomError {
    #[error("matsubara count mismatch: hierarchy wants M = {m}, bath carries {bath_m}")]
    MatsubaraMismatch { m: usize, bath_m: usize },
    #[error("unsupported system: {0}")]
    UnsupportedSystem(String),
    #[error("invalid propagation setup: {0}")]
    InvalidStep(String),
    #[error("non-finite ADO entry at t = {t}")]
    NonFinite { t: f64 },
    #[error("stationarity not reached: max |rhs| = {residual:e} > {tol:e}")]
    NotStationary {
        residual: f64,
        tol: f64,
        /// Where the equilibration run ended; callers may keep integrating.
        state: Box<HierarchyState>,
    },
    #[error(transparent)]
    Sample(#[from] TrajectoryError),
}

/// Which qubit a pulse rotates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Qubit {
    One,
    Two,
}

/// Two qubits with counter-rotating flip-flip coupling, each flip-coupled to
/// its own bath.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub epsilon: f64,
    pub j: f64,
    /// 4x4 Hamiltonian over |00>, |01>, |10>, |11> (qubit 1 is the left
    /// factor): eps per excitation plus J (x (x) x) coupling.
    pub h_s: ComplexMatrix,
    /// Bath coupling operators V_1 = sx (x) I, V_2 = I (x) sx.
    pub v: [ComplexMatrix; 2],
}

impl SystemModel {
    pub fn new(epsilon: f64, j: f64) -> Self {
        let h_s = ComplexMatrix::from_real(
            4,
            &[
                0.0, 0.0, 0.0, j, //
                0.0, epsilon, j, 0.0, //
                0.0, j, epsilon, 0.0, //
                j, 0.0, 0.0, 2.0 * epsilon,
            ],
        );
        let sx = ComplexMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0]);
        let id = ComplexMatrix::identity(2);
        SystemModel {
            epsilon,
            j,
            h_s,
            v: [sx.kron(&id), id.kron(&sx)],
        }
    }
}

/// Number of multi-indices with 2(M+1) slots and tier at most L.
pub fn hierarchy_size(m: usize, l: usize) -> usize {
    // C(L + s, s) with s = 2(M+1), evaluated multiplicatively
    let s = 2 * (m + 1);
    let mut count: u128 = 1;
    for i in 1..=s {
        count = count * (l + i) as u128 / i as u128;
    }
    count as usize
}

/// All multi-indices with tier <= L, graded by tier, first slots filled
/// greedily inside a tier so e.g. M = 0, L = 1 yields (0,0), (1,0), (0,1).
/// Slot layout is bath-major: slots 0..=M belong to bath 1, M+1..=2M+1 to
/// bath 2, with Matsubara term k = slot mod (M+1).
pub fn enumerate_indices(m: usize, l: usize) -> Vec<Vec<u8>> {
    assert!(l <= u8::MAX as usize, "tier cutoff exceeds index storage");
    let slots = 2 * (m + 1);
    let mut out = Vec::with_capacity(hierarchy_size(m, l));
    let mut cur = vec![0u8; slots];
    for tier in 0..=l {
        fill(tier as u8, 0, &mut cur, &mut out);
    }
    out
}

fn fill(remaining: u8, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for v in (0..=remaining).rev() {
        cur[pos] = v;
        fill(remaining - v, pos + 1, cur, out);
        cur[pos] = 0;
    }
}

/// Flat hierarchy snapshot: 16 complex entries per ADO, root first.
#[derive(Debug, Clone)]
pub struct HierarchyState {
    pub t: f64,
    data: Vec<C64>,
}

impl HierarchyState {
    pub fn n_ados(&self) -> usize {
        self.data.len() / 16
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// Conjugates every ADO by sy on the chosen qubit: rho -> U rho U^dag
    /// with U = sy (x) I or I (x) sy. ADOs transform covariantly under
    /// system unitaries, so the rotation applies to the whole hierarchy, not
    /// just the root.
    pub fn apply_pulse(&mut self, qubit: Qubit) {
        let sy = ComplexMatrix::from_row_major(
            2,
            &[ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO],
        );
        let id = ComplexMatrix::identity(2);
        let u = match qubit {
            Qubit::One => sy.kron(&id),
            Qubit::Two => id.kron(&sy),
        };
        let udag = u.dagger();
        for block in self.data.chunks_exact_mut(16) {
            let m = ComplexMatrix::from_row_major(4, block);
            let rotated = u.mul(&m).mul(&udag);
            block.copy_from_slice(rotated.data());
        }
    }

    /// Drops all system-bath correlations: zeroes every ADO except the root.
    /// Idempotent; the reduced state is untouched.
    pub fn factorize(&mut self) {
        for z in &mut self.data[16..] {
            *z = ZERO;
        }
    }

    fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Fixed-step propagation controls. `t_end` must sit on the step grid;
/// samples are taken every `sample_stride` steps, including step zero.
#[derive(Debug, Clone, Copy)]
pub struct PropagateOptions {
    pub dt: f64,
    pub t_end: f64,
    pub sample_stride: usize,
}

/// Equilibration controls: integrate for `t_eq`, then require the max-norm
/// of the full-hierarchy derivative to be below `stationarity_tol`.
#[derive(Debug, Clone, Copy)]
pub struct EquilibrateOptions {
    pub t_eq: f64,
    pub dt: f64,
    pub stationarity_tol: f64,
}

impl Default for EquilibrateOptions {
    fn default() -> Self {
        // A coarser step than the sampled dynamics is safe here: stationary
        // states of the linear hierarchy are exact fixed points of the RK4
        // map at any stable step, and the per-mode decay rate per unit time
        // does not depend on dt.
        EquilibrateOptions {
            t_eq: 50.0,
            dt: 1e-2,
            stationarity_tol: 1e-7,
        }
    }
}

/// Precomputed hierarchy structure: index tables, damping rates, coupling
/// coefficients, and the flattened Hamiltonian.
pub struct Hierarchy {
    sys: SystemModel,
    bath: BathExpansion,
    l: usize,
    m: usize,
    indices: Vec<Vec<u8>>,
    h_real: [f64; 16],
    delta: f64,
    // Struct-of-arrays ADO plans, slot-major within each ADO.
    damp: Vec<f64>,
    raise_pos: Vec<u32>,
    lower_pos: Vec<u32>,
    lower_coef: Vec<C64>,
}

impl Hierarchy {
    pub fn new(
        sys: SystemModel,
        bath: BathExpansion,
        l: usize,
        m: usize,
    ) -> Result<Self, HeomError> {
        if bath.n_matsubara() != m {
            return Err(HeomError::MatsubaraMismatch {
                m,
                bath_m: bath.n_matsubara(),
            });
        }

        // The kernels assume a real Hamiltonian and flip-type couplings;
        // SystemModel::new always satisfies this, anything else is refused.
        let mut h_real = [0.0; 16];
        for (i, z) in sys.h_s.data().iter().enumerate() {
            if z.im != 0.0 {
                return Err(HeomError::UnsupportedSystem(
                    "Hamiltonian must be real in the site basis".into(),
                ));
            }
            h_real[i] = z.re;
        }
        if sys.h_s.hermiticity_defect() != 0.0 {
            return Err(HeomError::UnsupportedSystem(
                "Hamiltonian must be symmetric".into(),
            ));
        }
        for (alpha, perm) in [(0usize, PERM1), (1usize, PERM2)] {
            for r in 0..4 {
                for c in 0..4 {
                    let expect = if perm[r] == c { 1.0 } else { 0.0 };
                    if sys.v[alpha][(r, c)] != C64::new(expect, 0.0) {
                        return Err(HeomError::UnsupportedSystem(format!(
                            "coupling operator {} is not the expected qubit flip",
                            alpha + 1
                        )));
                    }
                }
            }
        }

        let indices = enumerate_indices(m, l);
        let slots = 2 * (m + 1);
        let mut position = HashMap::with_capacity(indices.len());
        for (i, n) in indices.iter().enumerate() {
            position.insert(n.clone(), i as u32);
        }

        let mut damp = Vec::with_capacity(indices.len());
        let mut raise_pos = vec![NONE; indices.len() * slots];
        let mut lower_pos = vec![NONE; indices.len() * slots];
        let mut lower_coef = vec![ZERO; indices.len() * slots];
        let mut scratch = vec![0u8; slots];
        for (i, n) in indices.iter().enumerate() {
            let mut d = 0.0;
            for (s, &count) in n.iter().enumerate() {
                d += count as f64 * bath.nu[s % (m + 1)];
            }
            damp.push(d);
            for s in 0..slots {
                scratch.copy_from_slice(n);
                scratch[s] += 1;
                if let Some(&p) = position.get(&scratch) {
                    raise_pos[i * slots + s] = p;
                }
                if n[s] > 0 {
                    scratch.copy_from_slice(n);
                    scratch[s] -= 1;
                    let p = position[&scratch];
                    lower_pos[i * slots + s] = p;
                    lower_coef[i * slots + s] = n[s] as f64 * bath.c[s % (m + 1)];
                }
            }
        }

        let delta = bath.delta;
        Ok(Hierarchy {
            sys,
            bath,
            l,
            m,
            indices,
            h_real,
            delta,
            damp,
            raise_pos,
            lower_pos,
            lower_coef,
        })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_ados(&self) -> usize {
        self.indices.len()
    }

    pub fn sys(&self) -> &SystemModel {
        &self.sys
    }

    pub fn bath(&self) -> &BathExpansion {
        &self.bath
    }

    pub fn indices(&self) -> &[Vec<u8>] {
        &self.indices
    }

    /// Position of a multi-index in the ADO ordering.
    pub fn position_of(&self, n: &[u8]) -> Option<usize> {
        self.indices.iter().position(|v| v.as_slice() == n)
    }

    /// State with the given root and every other ADO zero, at t = 0.
    pub fn initial_state(&self, root: &ComplexMatrix) -> HierarchyState {
        assert_eq!(root.dim(), 4, "root ADO must be 4x4");
        let mut data = vec![ZERO; self.n_ados() * 16];
        data[..16].copy_from_slice(root.data());
        HierarchyState { t: 0.0, data }
    }

    /// ADO at a given position as a matrix.
    pub fn ado_matrix(&self, state: &HierarchyState, pos: usize) -> ComplexMatrix {
        ComplexMatrix::from_row_major(4, &state.data[pos * 16..pos * 16 + 16])
    }

    /// The physical reduced state (root ADO).
    pub fn root_matrix(&self, state: &HierarchyState) -> ComplexMatrix {
        self.ado_matrix(state, 0)
    }

    /// Full right-hand side as a new hierarchy-shaped object; the tests and
    /// stationarity checks use this, the integrator uses the buffer form.
    pub fn rhs(&self, state: &HierarchyState) -> HierarchyState {
        let mut out = vec![ZERO; state.data.len()];
        self.rhs_into(&state.data, &mut out);
        HierarchyState {
            t: state.t,
            data: out,
        }
    }

    /// Largest derivative entry; the equilibration stationarity measure.
    pub fn rhs_max_abs(&self, state: &HierarchyState) -> f64 {
        let d = self.rhs(state);
        d.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn rhs_into(&self, y: &[C64], out: &mut [C64]) {
        debug_assert_eq!(y.len(), self.n_ados() * 16);
        let mp1 = self.m + 1;
        let slots = 2 * mp1;
        let two_delta = 2.0 * self.delta;
        let h = &self.h_real;

        for i in 0..self.n_ados() {
            let rho = &y[i * 16..i * 16 + 16];
            let mut acc = [ZERO; 16];

            // -i [H, rho] - (damp + 4 Delta) rho. H is real, so the products
            // are real-by-complex; the double commutator with each flip V
            // contributes 2 Delta (rho - V rho V) because V^2 = I.
            let mut hr = [ZERO; 16];
            let mut rh = [ZERO; 16];
            for r in 0..4 {
                for k in 0..4 {
                    let hrk = h[r * 4 + k];
                    if hrk != 0.0 {
                        for c in 0..4 {
                            hr[r * 4 + c] += hrk * rho[k * 4 + c];
                            rh[c * 4 + r] += rho[c * 4 + k] * hrk;
                        }
                    }
                }
            }
            let decay = self.damp[i] + 4.0 * self.delta;
            for idx in 0..16 {
                let z = hr[idx] - rh[idx];
                // -i z
                acc[idx] = C64::new(z.im, -z.re) - decay * rho[idx];
            }
            if self.delta != 0.0 {
                for r in 0..4 {
                    for c in 0..4 {
                        acc[r * 4 + c] += two_delta
                            * (rho[PERM1[r] * 4 + PERM1[c]] + rho[PERM2[r] * 4 + PERM2[c]]);
                    }
                }
            }

            // Upward coupling: -i [V_a, sum_k rho^{n_{ak}+1}].
            // Downward: -i (V_a P_a - Q_a V_a) with P_a = sum_k n c_k rho^-,
            // Q_a its conjugate-coefficient partner. Left-multiplying by a
            // flip permutes rows; right-multiplying permutes columns.
            let plan = &self.raise_pos[i * slots..(i + 1) * slots];
            let lplan = &self.lower_pos[i * slots..(i + 1) * slots];
            let lcoef = &self.lower_coef[i * slots..(i + 1) * slots];
            for (alpha, perm) in [(0usize, &PERM1), (1usize, &PERM2)] {
                let base = alpha * mp1;
                let mut b = [ZERO; 16];
                let mut any_up = false;
                for k in 0..mp1 {
                    let p = plan[base + k];
                    if p != NONE {
                        any_up = true;
                        let blk = &y[p as usize * 16..p as usize * 16 + 16];
                        for idx in 0..16 {
                            b[idx] += blk[idx];
                        }
                    }
                }
                if any_up {
                    for r in 0..4 {
                        for c in 0..4 {
                            let z = b[perm[r] * 4 + c] - b[r * 4 + perm[c]];
                            acc[r * 4 + c] += C64::new(z.im, -z.re);
                        }
                    }
                }

                let mut p_acc = [ZERO; 16];
                let mut q_acc = [ZERO; 16];
                let mut any_down = false;
                for k in 0..mp1 {
                    let p = lplan[base + k];
                    if p != NONE {
                        any_down = true;
                        let coef = lcoef[base + k];
                        let blk = &y[p as usize * 16..p as usize * 16 + 16];
                        for idx in 0..16 {
                            p_acc[idx] += coef * blk[idx];
                            q_acc[idx] += coef.conj() * blk[idx];
                        }
                    }
                }
                if any_down {
                    for r in 0..4 {
                        for c in 0..4 {
                            let z = p_acc[perm[r] * 4 + c] - q_acc[r * 4 + perm[c]];
                            acc[r * 4 + c] += C64::new(z.im, -z.re);
                        }
                    }
                }
            }

            out[i * 16..i * 16 + 16].copy_from_slice(&acc);
        }
    }

    /// One classical RK4 step; allocates its stage buffers, so use
    /// [`Hierarchy::propagate`] for long runs.
    pub fn rk4_step(&self, state: &mut HierarchyState, dt: f64) {
        let n = state.data.len();
        let mut buffers = StageBuffers::new(n);
        self.rk4_step_with(&mut state.data, dt, &mut buffers);
        state.t += dt;
    }

    fn rk4_step_with(&self, y: &mut [C64], dt: f64, bufs: &mut StageBuffers) {
        let StageBuffers { k, acc, stage } = bufs;
        let half = 0.5 * dt;

        self.rhs_into(y, k);
        for i in 0..y.len() {
            acc[i] = k[i];
            stage[i] = y[i] + half * k[i];
        }
        self.rhs_into(stage, k);
        for i in 0..y.len() {
            acc[i] += 2.0 * k[i];
            stage[i] = y[i] + half * k[i];
        }
        self.rhs_into(stage, k);
        for i in 0..y.len() {
            acc[i] += 2.0 * k[i];
            stage[i] = y[i] + dt * k[i];
        }
        self.rhs_into(stage, k);
        let sixth = dt / 6.0;
        for i in 0..y.len() {
            y[i] += sixth * (acc[i] + k[i]);
        }
    }

    /// Integrates to `t_end`, sampling the root every `sample_stride` steps
    /// (step 0 included). Fails on non-finite entries or unphysical samples.
    pub fn propagate(
        &self,
        state: &mut HierarchyState,
        opts: &PropagateOptions,
    ) -> Result<Trajectory, HeomError> {
        self.propagate_observed(state, opts, |_| {})
    }

    /// [`Hierarchy::propagate`] with a per-sample callback.
    pub fn propagate_observed(
        &self,
        state: &mut HierarchyState,
        opts: &PropagateOptions,
        mut observer: impl FnMut(&TrajectorySample),
    ) -> Result<Trajectory, HeomError> {
        let n_steps = self.step_count(state.t, opts.t_end, opts.dt)?;
        if opts.sample_stride == 0 {
            return Err(HeomError::InvalidStep("sample stride must be >= 1".into()));
        }
        let t0 = state.t;
        let mut bufs = StageBuffers::new(state.data.len());
        let mut traj = Trajectory::new();

        let sample = TrajectorySample::measure(t0, &self.root_matrix(state))?;
        observer(&sample);
        traj.push(sample);

        for step in 1..=n_steps {
            self.rk4_step_with(&mut state.data, opts.dt, &mut bufs);
            state.t = t0 + step as f64 * opts.dt;
            if !state.all_finite() {
                return Err(HeomError::NonFinite { t: state.t });
            }
            if step % opts.sample_stride == 0 {
                let sample = TrajectorySample::measure(state.t, &self.root_matrix(state))?;
                observer(&sample);
                traj.push(sample);
            }
        }
        Ok(traj)
    }

    /// Integrates without sampling; equilibration and its extensions.
    pub fn advance(
        &self,
        state: &mut HierarchyState,
        t_span: f64,
        dt: f64,
    ) -> Result<(), HeomError> {
        let n_steps = self.step_count(state.t, state.t + t_span, dt)?;
        let t0 = state.t;
        let mut bufs = StageBuffers::new(state.data.len());
        for step in 1..=n_steps {
            self.rk4_step_with(&mut state.data, dt, &mut bufs);
            state.t = t0 + step as f64 * dt;
            if !state.all_finite() {
                return Err(HeomError::NonFinite { t: state.t });
            }
        }
        Ok(())
    }

    fn step_count(&self, t0: f64, t_end: f64, dt: f64) -> Result<usize, HeomError> {
        if !(dt > 0.0) {
            return Err(HeomError::InvalidStep(format!("dt must be > 0, got {dt}")));
        }
        let span = t_end - t0;
        if span <= 0.0 {
            return Err(HeomError::InvalidStep(format!(
                "t_end {t_end} must exceed start time {t0}"
            )));
        }
        let n = (span / dt).round();
        if (n * dt - span).abs() > 1e-9 * span.max(1.0) {
            return Err(HeomError::InvalidStep(format!(
                "time span {span} is not a whole number of dt = {dt} steps"
            )));
        }
        Ok(n as usize)
    }

    /// Relaxes the hierarchy to its correlated stationary state: seeds the
    /// root with Gibbs(H_S), integrates for `t_eq`, then demands the full
    /// derivative be small. The converged state carries nonzero higher-tier
    /// ADOs; they are the system-bath correlations the factorized treatment
    /// throws away. On failure the partial state rides along in the error so
    /// callers can extend the run instead of starting over.
    pub fn equilibrate(&self, opts: &EquilibrateOptions) -> Result<HierarchyState, HeomError> {
        let gibbs = DensityMatrix::thermal(&self.sys.h_s, self.bath.params.beta);
        let mut state = self.initial_state(gibbs.matrix());
        self.advance(&mut state, opts.t_eq, opts.dt)?;
        let residual = self.rhs_max_abs(&state);
        if residual > opts.stationarity_tol {
            return Err(HeomError::NotStationary {
                residual,
                tol: opts.stationarity_tol,
                state: Box::new(state),
            });
        }
        Ok(state)
    }
}

struct StageBuffers {
    k: Vec<C64>,
    acc: Vec<C64>,
    stage: Vec<C64>,
}

impl StageBuffers {
    fn new(n: usize) -> Self {
        StageBuffers {
            k: vec![ZERO; n],
            acc: vec![ZERO; n],
            stage: vec![ZERO; n],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{self, DrudeParams};
    use crate::qmat::commutator;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn default_params() -> DrudeParams {
        DrudeParams::new(0.3, 0.5, 2.5).unwrap()
    }

    fn hierarchy(lambda: f64, l: usize, m: usize) -> Hierarchy {
        let p = DrudeParams::new(lambda, 0.5, 2.5).unwrap();
        let bath = bath::build_expansion(&p, m).unwrap();
        Hierarchy::new(SystemModel::new(1.5, 1.0), bath, l, m).unwrap()
    }

    fn singlet() -> ComplexMatrix {
        let psi = [c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)];
        DensityMatrix::pure(&psi).into_matrix()
    }

    fn random_state(hier: &Hierarchy, rng: &mut StdRng, hermitian: bool) -> HierarchyState {
        let mut state = hier.initial_state(&ComplexMatrix::zeros(4));
        for block in state.data_mut().chunks_exact_mut(16) {
            let mut m = ComplexMatrix::zeros(4);
            for r in 0..4 {
                for cc in 0..4 {
                    m[(r, cc)] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
            if hermitian {
                m = m.add(&m.dagger()).scale(c(0.5, 0.0));
            }
            block.copy_from_slice(m.data());
        }
        state
    }

    #[test]
    fn system_model_matches_its_definition() {
        let sys = SystemModel::new(1.5, 1.0);
        let expect = ComplexMatrix::from_real(
            4,
            &[
                0.0, 0.0, 0.0, 1.0, //
                0.0, 1.5, 1.0, 0.0, //
                0.0, 1.0, 1.5, 0.0, //
                1.0, 0.0, 0.0, 3.0,
            ],
        );
        assert!(sys.h_s.sub(&expect).max_abs() == 0.0);
        let sx = ComplexMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0]);
        let id = ComplexMatrix::identity(2);
        assert!(sys.v[0].sub(&sx.kron(&id)).max_abs() == 0.0);
        assert!(sys.v[1].sub(&id.kron(&sx)).max_abs() == 0.0);
    }

    #[test]
    fn system_spectrum_at_default_parameters() {
        // eps +- J and eps +- sqrt(eps^2 + J^2), frozen at eps = 1.5, J = 1
        let eig = SystemModel::new(1.5, 1.0).h_s.hermitian_eigen().unwrap();
        let expect = [
            -0.302775637731994646,
            0.5,
            2.5,
            3.30277563773199465,
        ];
        for (got, want) in eig.values.iter().zip(&expect) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn index_enumeration_counts_and_order() {
        let small = enumerate_indices(0, 1);
        assert_eq!(small, vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
        assert_eq!(enumerate_indices(1, 2).len(), 15);
        assert_eq!(enumerate_indices(2, 6).len(), 924);
        assert_eq!(hierarchy_size(1, 2), 15);
        assert_eq!(hierarchy_size(2, 6), 924);
        assert_eq!(hierarchy_size(2, 8), 3003);
        assert_eq!(hierarchy_size(3, 6), 3003);
    }

    #[test]
    fn index_enumeration_is_graded() {
        let indices = enumerate_indices(2, 4);
        let mut prev_tier = 0;
        for n in &indices {
            let tier: u8 = n.iter().sum();
            assert!(tier >= prev_tier, "tier order broken");
            assert!(tier <= 4);
            prev_tier = tier;
        }
        let unique: std::collections::HashSet<_> = indices.iter().collect();
        assert_eq!(unique.len(), indices.len());
    }

    #[test]
    fn neighbor_tables_are_mutually_inverse() {
        let hier = hierarchy(0.3, 2, 1);
        let slots = 2 * (hier.m() + 1);
        for (i, n) in hier.indices().iter().enumerate() {
            for s in 0..slots {
                let up = hier.raise_pos[i * slots + s];
                if up != NONE {
                    let j = up as usize;
                    assert_eq!(hier.lower_pos[j * slots + s], i as u32);
                    let mut expect = n.clone();
                    expect[s] += 1;
                    assert_eq!(hier.indices()[j], expect);
                } else {
                    let tier: u8 = n.iter().sum();
                    assert_eq!(tier as usize, hier.l(), "missing raise below cutoff");
                }
            }
        }
    }

    #[test]
    fn mismatched_matsubara_count_is_rejected() {
        let bath = bath::build_expansion(&default_params(), 1).unwrap();
        assert!(matches!(
            Hierarchy::new(SystemModel::new(1.5, 1.0), bath, 2, 2),
            Err(HeomError::MatsubaraMismatch { .. })
        ));
    }

    #[test]
    fn decoupled_rhs_is_pure_commutator_on_the_root() {
        let hier = hierarchy(0.0, 2, 1);
        let state = hier.initial_state(&singlet());
        let d = hier.rhs(&state);
        let expect = commutator(&hier.sys().h_s, &singlet()).scale(c(0.0, -1.0));
        assert!(hier.ado_matrix(&d, 0).sub(&expect).max_abs() < 1e-15);
        for pos in 1..hier.n_ados() {
            assert!(hier.ado_matrix(&d, pos).max_abs() == 0.0);
        }
    }

    #[test]
    fn maximally_mixed_root_is_stationary_at_the_root() {
        // I/4 commutes with H and satisfies V rho V = rho for both flips, so
        // the root derivative cancels exactly even with coupling on.
        let hier = hierarchy(0.3, 2, 1);
        let quarter = ComplexMatrix::identity(4).scale(c(0.25, 0.0));
        let state = hier.initial_state(&quarter);
        let d = hier.rhs(&state);
        assert!(hier.ado_matrix(&d, 0).max_abs() < 1e-16);
    }

    #[test]
    fn rhs_is_linear() {
        let hier = hierarchy(0.3, 2, 1);
        let mut rng = StdRng::seed_from_u64(12);
        let s1 = random_state(&hier, &mut rng, false);
        let s2 = random_state(&hier, &mut rng, false);
        let a = 0.73;
        let mut combo = s1.clone();
        for (z, w) in combo.data_mut().iter_mut().zip(s2.data()) {
            *z = *z * a + w;
        }
        let lhs = hier.rhs(&combo);
        let d1 = hier.rhs(&s1);
        let d2 = hier.rhs(&s2);
        for i in 0..lhs.data().len() {
            let expect = d1.data()[i] * a + d2.data()[i];
            assert!((lhs.data()[i] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn rhs_preserves_hermiticity_blockwise() {
        let hier = hierarchy(0.3, 3, 1);
        let mut rng = StdRng::seed_from_u64(21);
        let state = random_state(&hier, &mut rng, true);
        let d = hier.rhs(&state);
        for pos in 0..hier.n_ados() {
            let defect = hier.ado_matrix(&d, pos).hermiticity_defect();
            assert!(defect < 1e-13, "ADO {pos} derivative defect {defect:e}");
        }
    }

    /// Straightforward dense re-evaluation of the equation of motion using
    /// matrix products and explicit neighbor search; the production kernels
    /// must agree with it entry for entry.
    fn rhs_reference(hier: &Hierarchy, state: &HierarchyState) -> Vec<ComplexMatrix> {
        let m = hier.m();
        let indices = hier.indices();
        let bath = hier.bath();
        let sys = hier.sys();
        let find = |n: &[u8]| indices.iter().position(|v| v.as_slice() == n);
        let mut out = Vec::new();
        for (pos, n) in indices.iter().enumerate() {
            let rho = hier.ado_matrix(state, pos);
            let mut d = commutator(&sys.h_s, &rho).scale(c(0.0, -1.0));
            let mut damp = 0.0;
            for (s, &count) in n.iter().enumerate() {
                damp += count as f64 * bath.nu[s % (m + 1)];
            }
            d = d.sub(&rho.scale(c(damp, 0.0)));
            for alpha in 0..2 {
                let v = &sys.v[alpha];
                let dd = commutator(v, &commutator(v, &rho));
                d = d.sub(&dd.scale(c(bath.delta, 0.0)));
                for k in 0..=m {
                    let slot = alpha * (m + 1) + k;
                    let mut up = n.clone();
                    up[slot] += 1;
                    if let Some(pos) = find(&up) {
                        let raised = hier.ado_matrix(state, pos);
                        d = d.sub(&commutator(v, &raised).scale(c(0.0, 1.0)));
                    }
                    if n[slot] > 0 {
                        let mut down = n.clone();
                        down[slot] -= 1;
                        let lowered = hier.ado_matrix(state, find(&down).unwrap());
                        let ck = bath.c[k];
                        let term = v
                            .mul(&lowered)
                            .scale(ck)
                            .sub(&lowered.mul(v).scale(ck.conj()))
                            .scale(c(0.0, -(n[slot] as f64)));
                        d = d.add(&term);
                    }
                }
            }
            out.push(d);
        }
        out
    }

    #[test]
    fn rhs_matches_dense_reference() {
        let mut rng = StdRng::seed_from_u64(2025);
        for (l, m) in [(2usize, 1usize), (3, 0), (2, 2)] {
            let hier = hierarchy(0.3, l, m);
            let state = random_state(&hier, &mut rng, false);
            let fast = hier.rhs(&state);
            let reference = rhs_reference(&hier, &state);
            for (pos, expect) in reference.iter().enumerate() {
                let got = hier.ado_matrix(&fast, pos);
                let diff = got.sub(expect).max_abs();
                assert!(diff < 1e-12, "ADO {pos} differs by {diff:e} at L={l} M={m}");
            }
        }
    }

    #[test]
    fn decoupled_propagation_is_unitary_evolution() {
        let hier = hierarchy(0.0, 2, 1);
        let psi = [c(0.6, 0.0), c(0.0, 0.5), c(-0.4, 0.2), c(0.3, -0.1)];
        let rho0 = DensityMatrix::pure(&psi).into_matrix();
        let mut state = hier.initial_state(&rho0);
        let opts = PropagateOptions {
            dt: 1e-3,
            t_end: 2.0,
            sample_stride: 200,
        };
        let traj = hier.propagate(&mut state, &opts).unwrap();
        assert_eq!(traj.len(), 11);

        let u = hier.sys().h_s.scale(c(0.0, -2.0)).matrix_exp();
        let expect = u.mul(&rho0).mul(&u.dagger());
        let got = hier.root_matrix(&state);
        assert!(got.sub(&expect).max_abs() < 1e-8);
        // higher tiers never get populated without coupling
        for pos in 1..hier.n_ados() {
            assert!(hier.ado_matrix(&state, pos).max_abs() == 0.0);
        }
    }

    #[test]
    fn short_coupled_run_conserves_trace_and_hermiticity() {
        let hier = hierarchy(0.3, 2, 1);
        let mut state = hier.initial_state(&singlet());
        let opts = PropagateOptions {
            dt: 1e-3,
            t_end: 1.0,
            sample_stride: 100,
        };
        let traj = hier.propagate(&mut state, &opts).unwrap();
        assert!(traj.worst_trace_error() < 1e-10);
        assert!(traj.worst_hermiticity_defect() < 1e-10);
        // coupling populates the first tier
        let tier1 = hier.position_of(&[1, 0, 0, 0]).unwrap();
        assert!(hier.ado_matrix(&state, tier1).max_abs() > 1e-6);
    }

    #[test]
    fn propagation_validates_its_grid() {
        let hier = hierarchy(0.3, 1, 0);
        let mut state = hier.initial_state(&singlet());
        for bad in [
            PropagateOptions { dt: 0.0, t_end: 1.0, sample_stride: 1 },
            PropagateOptions { dt: 1e-3, t_end: 0.0, sample_stride: 1 },
            PropagateOptions { dt: 1e-3, t_end: 0.00375, sample_stride: 1 },
            PropagateOptions { dt: 1e-3, t_end: 1.0, sample_stride: 0 },
        ] {
            assert!(matches!(
                hier.propagate(&mut state, &bad),
                Err(HeomError::InvalidStep(_))
            ));
        }
    }

    #[test]
    fn unstable_step_size_reports_blowup() {
        // dt far beyond the stability bound of the damped modes
        let hier = hierarchy(0.3, 3, 1);
        let mut state = hier.initial_state(&singlet());
        let opts = PropagateOptions {
            dt: 5.0,
            t_end: 500.0,
            sample_stride: 1000,
        };
        match hier.propagate(&mut state, &opts) {
            Err(HeomError::NonFinite { t }) => assert!(t > 0.0),
            other => panic!("expected blowup, got {other:?}"),
        }
    }

    #[test]
    fn pulse_flips_populations_and_squares_to_identity() {
        let hier = hierarchy(0.3, 2, 1);
        let ket00 = ComplexMatrix::diag_real(&[1.0, 0.0, 0.0, 0.0]);
        let mut state = hier.initial_state(&ket00);
        state.apply_pulse(Qubit::One);
        let expect10 = ComplexMatrix::diag_real(&[0.0, 0.0, 1.0, 0.0]);
        assert!(hier.root_matrix(&state).sub(&expect10).max_abs() < 1e-15);
        state.apply_pulse(Qubit::Two);
        let expect11 = ComplexMatrix::diag_real(&[0.0, 0.0, 0.0, 1.0]);
        assert!(hier.root_matrix(&state).sub(&expect11).max_abs() < 1e-15);

        let mut rng = StdRng::seed_from_u64(8);
        let full = random_state(&hier, &mut rng, false);
        let mut twice = full.clone();
        twice.apply_pulse(Qubit::One);
        twice.apply_pulse(Qubit::One);
        for (a, b) in twice.data().iter().zip(full.data()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn factorize_zeroes_everything_but_the_root() {
        let hier = hierarchy(0.3, 2, 1);
        let mut rng = StdRng::seed_from_u64(9);
        let mut state = random_state(&hier, &mut rng, true);
        let root_before = hier.root_matrix(&state);
        state.factorize();
        assert!(hier.root_matrix(&state).sub(&root_before).max_abs() == 0.0);
        for pos in 1..hier.n_ados() {
            assert!(hier.ado_matrix(&state, pos).max_abs() == 0.0);
        }
        let again = {
            let mut s = state.clone();
            s.factorize();
            s
        };
        for (a, b) in again.data().iter().zip(state.data()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn decoupled_equilibration_returns_gibbs_immediately() {
        let hier = hierarchy(0.0, 2, 1);
        let opts = EquilibrateOptions {
            t_eq: 0.05,
            dt: 1e-3,
            stationarity_tol: 1e-10,
        };
        let state = hier.equilibrate(&opts).unwrap();
        let gibbs = DensityMatrix::thermal(&hier.sys().h_s, 2.5);
        assert!(hier.root_matrix(&state).sub(gibbs.matrix()).max_abs() < 1e-12);
        for pos in 1..hier.n_ados() {
            assert!(hier.ado_matrix(&state, pos).max_abs() < 1e-15);
        }
    }

    #[test]
    fn unconverged_equilibration_hands_back_the_state() {
        let hier = hierarchy(0.3, 2, 1);
        let opts = EquilibrateOptions {
            t_eq: 0.01,
            dt: 1e-3,
            stationarity_tol: 1e-12,
        };
        match hier.equilibrate(&opts) {
            Err(HeomError::NotStationary { residual, state, .. }) => {
                assert!(residual > 1e-12);
                assert_abs_diff_eq!(state.t, 0.01, epsilon = 1e-12);
            }
            other => panic!("expected NotStationary, got {other:?}"),
        }
    }
}
