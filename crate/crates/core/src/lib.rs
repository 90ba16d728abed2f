//! Reconstruction of ocean-wave hydrodynamics from stereo observations of the
//! free surface: surface kinematics, subsurface potential flow, stereo
//! geometry, disparity operators and the spectral/error evaluation toolkit.

pub mod field;
pub mod geometry;
pub mod kinematics;
pub mod occlusion;
pub mod potential;
pub mod rng;
pub mod spectra;
pub mod synth;
pub mod whvs;
