//! Mechanics of the levitated superconducting sphere in the quadrupole trap:
//! mode frequencies, zero-point motion, thermal occupation and linewidths.

use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, KB, MU0};
use crate::error::{Error, Result};

/// Translational degree of freedom of the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Levitated sphere. The mass is always derived from radius and density.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SphereParams {
    /// Radius (m).
    pub radius: f64,
    /// Mass density (kg/m³).
    pub density: f64,
    mass: f64,
}

impl SphereParams {
    pub fn new(radius: f64, density: f64) -> Result<Self> {
        if radius <= 0.0 || density <= 0.0 {
            return Err(Error::Domain(format!(
                "sphere radius and density must be positive (got {radius:.3e} m, {density:.3e} kg/m^3)"
            )));
        }
        let mass = 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3) * density;
        Ok(Self {
            radius,
            density,
            mass,
        })
    }

    /// Mass (kg), 4/3·π·r³·ρ.
    pub fn mass(&self) -> f64 {
        self.mass
    }
}

/// Mapping from stored gradient magnitudes to the signed, solenoidal field model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignConvention {
    /// x and y gradients positive, z opposite in sign (anti-Helmholtz axis).
    ZNegativeSum,
}

/// Maximum tolerated non-solenoidal residual |Σb_i| relative to max|b_i|.
/// The published per-ampere magnitudes sum to 47.7 vs 48.1 on the strong axis.
pub const SOLENOIDAL_TOLERANCE: f64 = 0.02;

/// Quadrupole trap configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Gradient magnitudes per applied ampere (T/m per A), axes x, y, z.
    pub gradient_per_ampere: [f64; 3],
    /// Trap current (A).
    pub current: f64,
    /// Mechanical quality factor.
    pub quality: f64,
    /// Bath temperature (K).
    pub bath_temperature: f64,
    pub sign_convention: SignConvention,
}

impl TrapConfig {
    pub fn new(
        gradient_per_ampere: [f64; 3],
        current: f64,
        quality: f64,
        bath_temperature: f64,
        sign_convention: SignConvention,
    ) -> Result<Self> {
        if quality <= 0.0 || bath_temperature <= 0.0 {
            return Err(Error::Domain(
                "quality factor and bath temperature must be positive".into(),
            ));
        }
        if current < 0.0 {
            return Err(Error::Domain("trap current must be non-negative".into()));
        }
        let cfg = Self {
            gradient_per_ampere,
            current,
            quality,
            bath_temperature,
            sign_convention,
        };
        let signed = cfg.signed_gradient_per_ampere();
        let max = signed.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let sum: f64 = signed.iter().sum();
        if max > 0.0 && sum.abs() > SOLENOIDAL_TOLERANCE * max {
            return Err(Error::Domain(format!(
                "signed gradients are not solenoidal: sum {sum:.3} exceeds {:.1}% of max |b|",
                SOLENOIDAL_TOLERANCE * 100.0
            )));
        }
        Ok(cfg)
    }

    fn signed_gradient_per_ampere(&self) -> [f64; 3] {
        let b = self.gradient_per_ampere;
        match self.sign_convention {
            SignConvention::ZNegativeSum => [b[0].abs(), b[1].abs(), -b[2].abs()],
        }
    }
}

/// One translational mode of the levitated oscillator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MechMode {
    pub axis: Axis,
    /// Angular frequency Ω_m (rad/s).
    pub omega: f64,
    /// Zero-point motion (m).
    pub xzpf: f64,
    /// Intrinsic linewidth Γ_m = Ω_m/Q (rad/s).
    pub gamma: f64,
    /// Thermal phonon occupation.
    pub n_th: f64,
    /// Effective linewidth Γ_m·n_th after cooling to the ground state (rad/s).
    pub gamma_eff: f64,
}

/// Trap frequency sqrt(3/(2 μ0 ρ))·|b| (rad/s) for gradient b (T/m) and
/// density ρ (kg/m³).
pub fn trap_frequency(gradient: f64, density: f64) -> Result<f64> {
    if density <= 0.0 {
        return Err(Error::Domain(format!(
            "density must be positive (got {density:.3e})"
        )));
    }
    Ok((3.0 / (2.0 * MU0 * density)).sqrt() * gradient.abs())
}

/// Signed gradient vector b_i = sign_i·B_I,i·I_trap (T/m).
pub fn gradient_from_current(cfg: &TrapConfig) -> [f64; 3] {
    let signed = cfg.signed_gradient_per_ampere();
    [
        signed[0] * cfg.current,
        signed[1] * cfg.current,
        signed[2] * cfg.current,
    ]
}

/// Zero-point motion sqrt(ħ/(2 m Ω)) (m).
pub fn zero_point_motion(mass: f64, omega: f64) -> Result<f64> {
    if mass <= 0.0 || omega <= 0.0 {
        return Err(Error::Domain(format!(
            "mass and frequency must be positive (got {mass:.3e} kg, {omega:.3e} rad/s)"
        )));
    }
    Ok((HBAR / (2.0 * mass * omega)).sqrt())
}

/// Thermal phonon occupation k_B T/(ħ Ω), the high-temperature form without
/// the Bose correction (matches the published occupation numbers).
pub fn thermal_occupation(temperature: f64, omega: f64) -> f64 {
    KB * temperature / (HBAR * omega)
}

/// Assemble the full mode record for one axis of a trap configuration.
pub fn mode_from_config(cfg: &TrapConfig, sphere: &SphereParams, axis: Axis) -> Result<MechMode> {
    let b = gradient_from_current(cfg)[axis.index()];
    let omega = trap_frequency(b, sphere.density)?;
    let xzpf = zero_point_motion(sphere.mass(), omega)?;
    let gamma = omega / cfg.quality;
    let n_th = thermal_occupation(cfg.bath_temperature, omega);
    Ok(MechMode {
        axis,
        omega,
        xzpf,
        gamma,
        n_th,
        gamma_eff: gamma * n_th,
    })
}
