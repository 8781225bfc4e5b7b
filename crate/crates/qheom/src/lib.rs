// Copyright 2026 qheom Contributors
// SPDX-License-Identifier: Apache-2.0

//! Numerically exact open-system dynamics for two coupled qubits, each with
//! its own Drude-Lorentz bath, via the hierarchical equations of motion
//! (HEOM), plus a secular Redfield reference solver and Wootters entanglement
//! measures on the reduced two-qubit state.
//!
//! The crate is organized bottom-up:
//!
//! * [`qmat`]: dense complex matrices, Hermitian eigensolver, matrix
//!   exponential, density-matrix validation.
//! * [`bath`]: Drude-Lorentz spectral density and its Matsubara expansion,
//!   bath correlation function, truncation counter-term.
//! * [`entangle`]: concurrence, entanglement of formation, death/revival
//!   detection, closed-form thermal concurrence for the exchange model.
//! * [`toymodel`]: exactly solvable single-qubit/single-mode cross-check for
//!   thermal system-bath coherence.
//! * [`heom`]: the hierarchy itself - index enumeration, right-hand side,
//!   RK4 propagation, equilibration, pulses, factorized initial states.
//! * [`redfield`]: secular Redfield generator and propagator for comparison.
//! * [`trajectory`]: sampled reduced states with entanglement measures and
//!   conservation diagnostics.
//! * [`cli`]: run configuration, named scenarios, CSV emission.

pub mod bath;
pub mod cli;
pub mod entangle;
pub mod heom;
pub mod qmat;
pub mod redfield;
pub mod toymodel;
pub mod trajectory;
