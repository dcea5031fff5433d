//! Simulation and analysis toolkit for spin-orbit entanglement experiments
//! with single photons, photon pairs, and classical beams.
//!
//! The crate is organized around the life of a photon in the apparatus:
//!
//! - [`hilbert`] — sparse complex state algebra on the SAM ⊗ OAM space,
//! - [`elements`] — the optical components (q-plate, wave plates, polarizers,
//!   sector holograms, fiber couplers) as linear maps on that space,
//! - [`source`] — down-conversion pair states, heralding and post-selection,
//! - [`experiments`] — the three measurement pipelines, noise model, and
//!   Monte Carlo coincidence counting,
//! - [`analysis`] — correlation estimators, CHSH statistics with Poisson
//!   error propagation, and sinusoidal fringe fitting,
//! - [`fieldmap`] — transverse field rendering and Stokes-parameter maps of
//!   vector vortex modes.
//!
//! All state and operator types are immutable values; every operation is a
//! pure function, so everything here is trivially `Send + Sync`.

pub mod analysis;
pub mod elements;
pub mod experiments;
pub mod fieldmap;
pub mod hilbert;
pub mod source;

pub use hilbert::{Arm, ModeLabel, SinglePhotonState, Spin, TwoPhotonState};
pub use num_complex::Complex64;
