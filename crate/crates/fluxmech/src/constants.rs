//! Physical constants (SI, CODATA 2018).

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant (J/K), exact in the 2019 SI.
pub const KB: f64 = 1.380_649e-23;

/// Vacuum permeability (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;

/// Magnetic flux quantum h/2e (Wb).
pub const PHI0: f64 = 2.067_833_848e-15;

/// Full turn, 2π.
pub const TAU: f64 = std::f64::consts::TAU;
