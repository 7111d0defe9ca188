//! Noise and efficiency accounting: quantum-limited imprecision, detection and
//! measurement efficiencies, back-action densities, the Friis amplifier
//! cascade, cryogenic loss inversion, cooperativity and the improvement ledger.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, KB, MU0, TAU};
use crate::error::{Error, Result};
use crate::mech::{self, Axis, SphereParams, TrapConfig};

/// One amplifier in the readout cascade.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AmplifierStage {
    /// Noise temperature (K).
    pub noise_temperature: f64,
    /// Power gain (dB).
    pub gain_db: f64,
}

impl AmplifierStage {
    pub fn new(noise_temperature: f64, gain_db: f64) -> Result<Self> {
        if noise_temperature < 0.0 || !gain_db.is_finite() {
            return Err(Error::Unphysical(
                "amplifier stage needs finite gain and non-negative noise temperature".into(),
            ));
        }
        Ok(Self {
            noise_temperature,
            gain_db,
        })
    }

    pub fn gain_linear(&self) -> f64 {
        10f64.powf(self.gain_db / 10.0)
    }
}

/// Detection-efficiency decomposition of the readout chain.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EfficiencyBudget {
    pub eta_cav: f64,
    pub eta_cryo: f64,
    pub eta_warm: f64,
    /// η_d = η_cav·η_cryo·η_warm.
    pub eta_d: f64,
    /// Photons added by the cryogenic segment, from η_cryo = 1/(1+2 n_add).
    pub n_add_cryo: f64,
}

/// Quantum-limited imprecision κ/(16 n_r G²)·(1 + 4Ω²/κ²) in m²/Hz.
///
/// κ and Ω are angular (rad/s), G is the angular coupling ∂ω_res/∂x
/// (rad s⁻¹ m⁻¹). The bracket uses 4Ω²/κ², the dimensionally consistent form;
/// in the regime Ω ≪ κ it is indistinguishable from unity.
pub fn imprecision_quantum(kappa: f64, n_r: f64, big_g: f64, omega: f64) -> Result<f64> {
    if n_r <= 0.0 || big_g <= 0.0 || kappa <= 0.0 {
        return Err(Error::Domain(
            "imprecision needs positive kappa, photon number and coupling".into(),
        ));
    }
    let bracket = 1.0 + 4.0 * omega * omega / (kappa * kappa);
    Ok(kappa / (16.0 * n_r * big_g * big_g) * bracket)
}

/// Detection efficiency η_d = S_imp(quantum)/S_imp(detected).
pub fn detection_efficiency(s_imp_quantum: f64, s_imp_detected: f64) -> Result<f64> {
    if s_imp_detected < s_imp_quantum {
        return Err(Error::Unphysical(format!(
            "detected imprecision {s_imp_detected:.3e} below the quantum floor {s_imp_quantum:.3e}"
        )));
    }
    Ok(s_imp_quantum / s_imp_detected)
}

/// Quantum cooperativity 4 n_r g0²/(κ Γ_m n_th). All rates angular.
pub fn cooperativity(n_r: f64, g0: f64, kappa: f64, gamma_m: f64, n_th: f64) -> f64 {
    4.0 * n_r * g0 * g0 / (kappa * gamma_m * n_th)
}

/// Measurement efficiency η_e = (1 + 1/C_q)⁻¹.
pub fn measurement_efficiency(c_q: f64) -> Result<f64> {
    if c_q <= 0.0 {
        return Err(Error::Domain("cooperativity must be positive".into()));
    }
    Ok(1.0 / (1.0 + 1.0 / c_q))
}

/// Total measurement efficiency η = η_d·η_e.
pub fn total_efficiency(eta_d: f64, eta_e: f64) -> f64 {
    eta_d * eta_e
}

/// Minimum phonon occupation reachable by feedback, (1/√η − 1)/2.
pub fn min_phonons(eta: f64) -> Result<f64> {
    if eta <= 0.0 {
        return Err(Error::Domain(
            "total efficiency must be positive for a finite phonon floor".into(),
        ));
    }
    Ok((1.0 / eta.sqrt() - 1.0) / 2.0)
}

/// Ground-state displacement scale S_gs = 4 x_zpf²/(Γ_m n_th) in m²/Hz.
pub fn ground_state_density(xzpf: f64, gamma_m: f64, n_th: f64) -> f64 {
    4.0 * xzpf * xzpf / (gamma_m * n_th)
}

/// Mechanical susceptibility χ(Ω) = 1/(m(Ω_m² − Ω² − iΓΩ)) in m/N.
pub fn susceptibility(omega: f64, mass: f64, omega_m: f64, gamma: f64) -> Complex64 {
    let denom = Complex64::new(omega_m * omega_m - omega * omega, -gamma * omega);
    1.0 / (mass * denom)
}

/// Inputs for the on-resonance back-action displacement densities.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BackActionInputs {
    /// Angular electromechanical coupling ∂ω_res/∂x (rad s⁻¹ m⁻¹).
    pub big_g: f64,
    pub n_r: f64,
    /// Cavity linewidth (rad/s).
    pub kappa: f64,
    /// Oscillator mass (kg).
    pub mass: f64,
    /// Mode frequency (rad/s).
    pub omega_m: f64,
    /// Intrinsic linewidth (rad/s).
    pub gamma_m: f64,
    /// Broadened linewidth Γ_m·n_th (rad/s).
    pub gamma_eff: f64,
}

/// Back-action force noise density S_FF = 4ħ²G²n_r/κ (N²/Hz).
pub fn back_action_force_density(big_g: f64, n_r: f64, kappa: f64) -> f64 {
    4.0 * HBAR * HBAR * big_g * big_g * n_r / kappa
}

/// On-resonance back-action displacement densities (thermal-equilibrium and
/// ground-state-broadened linewidths), in m²/Hz.
pub fn back_action_densities(inputs: &BackActionInputs) -> (f64, f64) {
    let s_ff = back_action_force_density(inputs.big_g, inputs.n_r, inputs.kappa);
    let chi_th = susceptibility(inputs.omega_m, inputs.mass, inputs.omega_m, inputs.gamma_m);
    let chi_gs = susceptibility(inputs.omega_m, inputs.mass, inputs.omega_m, inputs.gamma_eff);
    (s_ff * chi_th.norm_sqr(), s_ff * chi_gs.norm_sqr())
}

/// Cascade noise temperature T_tot = T₁ + T₂/G₁ + T₃/(G₁G₂) + ⋯ (K).
pub fn friis(stages: &[AmplifierStage]) -> Result<f64> {
    if stages.is_empty() {
        return Err(Error::Argument("amplifier chain is empty".into()));
    }
    let mut total = 0.0;
    let mut gain = 1.0;
    for stage in stages {
        total += stage.noise_temperature / gain;
        gain *= stage.gain_linear();
    }
    Ok(total)
}

/// Thermal photon number k_B T/(ħ ω) of a noise temperature at angular
/// frequency ω.
pub fn added_photons(temperature: f64, omega: f64) -> f64 {
    KB * temperature / (HBAR * omega)
}

/// Effective added photons of a lossy line (transmissivity Λ) followed by an
/// amplifier adding n_HEMT photons: n_add = n_HEMT/Λ + (1−Λ)/(2Λ).
pub fn cryo_chain(n_hemt: f64, lambda: f64) -> Result<f64> {
    if lambda <= 0.0 || lambda > 1.0 {
        return Err(Error::Domain(format!(
            "transmissivity must lie in (0, 1], got {lambda}"
        )));
    }
    Ok(n_hemt / lambda + (1.0 - lambda) / (2.0 * lambda))
}

/// Invert the beamsplitter relation for the line transmissivity,
/// Λ = (n_HEMT + 1/2)/(n_add + 1/2).
pub fn invert_loss(n_hemt: f64, n_add: f64) -> Result<f64> {
    if n_add < n_hemt {
        return Err(Error::Unphysical(format!(
            "added photons {n_add} below amplifier contribution {n_hemt}"
        )));
    }
    Ok((n_hemt + 0.5) / (n_add + 0.5))
}

/// Cavity output efficiency η_cav = (1 + κ_int/κ_ext)⁻¹.
pub fn cavity_efficiency(kappa_int: f64, kappa_ext: f64) -> Result<f64> {
    if kappa_ext <= 0.0 || kappa_int < 0.0 {
        return Err(Error::Domain(
            "cavity efficiency needs kappa_ext > 0 and kappa_int >= 0".into(),
        ));
    }
    Ok(1.0 / (1.0 + kappa_int / kappa_ext))
}

/// Combine the three efficiency factors into the full budget record.
pub fn budget_assemble(eta_cav: f64, eta_cryo: f64, eta_warm: f64) -> Result<EfficiencyBudget> {
    for (name, eta) in [
        ("eta_cav", eta_cav),
        ("eta_cryo", eta_cryo),
        ("eta_warm", eta_warm),
    ] {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Unphysical(format!(
                "{name} = {eta} outside (0, 1]"
            )));
        }
    }
    Ok(EfficiencyBudget {
        eta_cav,
        eta_cryo,
        eta_warm,
        eta_d: eta_cav * eta_cryo * eta_warm,
        n_add_cryo: (1.0 / eta_cryo - 1.0) / 2.0,
    })
}

/// Solve for the one unknown factor given the measured total η_d and the other
/// two factors.
pub fn residual_efficiency(eta_d: f64, known_a: f64, known_b: f64) -> Result<f64> {
    if eta_d <= 0.0 || known_a <= 0.0 || known_b <= 0.0 {
        return Err(Error::Domain("efficiencies must be positive".into()));
    }
    let eta = eta_d / (known_a * known_b);
    if eta > 1.0 {
        return Err(Error::Unphysical(format!(
            "implied residual efficiency {eta:.3e} exceeds one"
        )));
    }
    Ok(eta)
}

/// Cooperativity evaluated from platform parameters, both as the printed
/// closed form and by assembling g0 through the flux chain.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DesignCooperativity {
    /// Closed-form expression, taken literally with the geometric flux factor
    /// standing in for the undetermined symbol in its prefactor.
    pub printed: f64,
    /// 4 n_r g0²/(κ Γ_m n_th) with g0 assembled from the same parameters.
    pub assembled: f64,
}

/// Evaluate the design cooperativity along one trap axis.
///
/// `s_w_hz_per_phi0` is the cavity flux responsivity in Hz/Φ0, `alpha` the
/// flux-transfer efficiency and `f_factor` the geometric coupling factor of
/// the probed axis. The two routes agree up to a constant prefactor; the
/// assembled value is the canonical one.
pub fn design_cooperativity(
    trap: &TrapConfig,
    sphere: &SphereParams,
    axis: Axis,
    n_r: f64,
    kappa: f64,
    s_w_hz_per_phi0: f64,
    alpha: f64,
    f_factor: f64,
) -> Result<DesignCooperativity> {
    let b = mech::gradient_from_current(trap)[axis.index()].abs();
    let grad_per_ampere = trap.gradient_per_ampere[axis.index()];
    let mode = mech::mode_from_config(trap, sphere, axis)?;

    let printed = (3.0 * MU0 / (2.0 * sphere.density)).sqrt()
        * grad_per_ampere
        * trap.current
        * n_r
        * trap.quality
        * sphere.radius
        / (KB * trap.bath_temperature * kappa)
        * (TAU * HBAR * s_w_hz_per_phi0 * alpha * f_factor).powi(2);

    let g0_cyc = crate::geometry::assemble_g0(
        s_w_hz_per_phi0,
        alpha,
        f_factor,
        b,
        sphere.radius,
        mode.xzpf,
    );
    let assembled = cooperativity(n_r, TAU * g0_cyc, kappa, mode.gamma, mode.n_th);
    Ok(DesignCooperativity { printed, assembled })
}

/// One multiplicative improvement entry of the projection ledger.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerFactor {
    pub name: String,
    pub multiplier: f64,
    pub note: String,
}

/// Cooperativity improvement ledger: a base value and ordered multiplicative
/// factors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionLedger {
    pub base_cq: f64,
    pub factors: Vec<LedgerFactor>,
}

/// One row of the cumulative projection table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionStep {
    pub name: String,
    pub multiplier: f64,
    pub cumulative_cq: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Projection {
    pub base_cq: f64,
    pub steps: Vec<ProjectionStep>,
    pub projected_cq: f64,
}

/// Apply the ledger factors in order, reporting every intermediate value.
pub fn project(ledger: &ProjectionLedger) -> Result<Projection> {
    if ledger.base_cq <= 0.0 {
        return Err(Error::Domain("ledger base must be positive".into()));
    }
    let mut cumulative = ledger.base_cq;
    let mut steps = Vec::with_capacity(ledger.factors.len());
    for factor in &ledger.factors {
        if !(factor.multiplier > 0.0 && factor.multiplier.is_finite()) {
            return Err(Error::Domain(format!(
                "ledger factor `{}` must be positive and finite",
                factor.name
            )));
        }
        cumulative *= factor.multiplier;
        steps.push(ProjectionStep {
            name: factor.name.clone(),
            multiplier: factor.multiplier,
            cumulative_cq: cumulative,
        });
    }
    Ok(Projection {
        base_cq: ledger.base_cq,
        steps,
        projected_cq: cumulative,
    })
}

/// First-order uncertainty of `f` at `x` for independent input sigmas
/// (gradient by central differences).
pub fn first_order_sigma(f: impl Fn(&[f64]) -> f64, x: &[f64], sigma: &[f64]) -> f64 {
    assert_eq!(x.len(), sigma.len());
    let mut var = 0.0;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        if sigma[i] == 0.0 {
            continue;
        }
        let h = 1e-6 * x[i].abs().max(1e-12);
        probe[i] = x[i] + h;
        let hi = f(&probe);
        probe[i] = x[i] - h;
        let lo = f(&probe);
        probe[i] = x[i];
        let grad = (hi - lo) / (2.0 * h);
        var += (grad * sigma[i]).powi(2);
    }
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mech::SignConvention;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn imprecision_matches_published_megahertz_product() {
        // κ/2π = 135 MHz, n_r = 0.05: S_imp·(G/2π)² = κ/(16 n_r 2π) = 26.9 MHz.
        let kappa = TAU * 135e6;
        let g_cyc = 1.36e11; // arbitrary but realistic G/2π in Hz/m
        let s = imprecision_quantum(kappa, 0.05, TAU * g_cyc, 0.0).unwrap();
        let product = s * g_cyc * g_cyc;
        assert!(rel_err(product, 2.6857e7) < 1e-3, "got {product:.4e}");
        assert!((product - 26e6).abs() < 13e6);
        // Doubling n_r halves the floor.
        let s2 = imprecision_quantum(kappa, 0.10, TAU * g_cyc, 0.0).unwrap();
        assert!(rel_err(s2, s / 2.0) < 1e-12);
        // Ω = κ/2 doubles it through the bracket.
        let sb = imprecision_quantum(kappa, 0.05, TAU * g_cyc, kappa / 2.0).unwrap();
        assert!(rel_err(sb, 2.0 * s) < 1e-12);
    }

    #[test]
    fn detection_efficiency_examples() {
        let eta = detection_efficiency(26e6, 0.61e12).unwrap();
        assert!(rel_err(eta, 4.26e-5) < 1e-2, "got {eta:.3e}");
        assert_eq!(detection_efficiency(5.0, 5.0).unwrap(), 1.0);
        assert!(rel_err(detection_efficiency(1.0, 10.0).unwrap(), 0.1) < 1e-12);
        assert!(detection_efficiency(2.0, 1.0).is_err());
    }

    #[test]
    fn cooperativity_at_the_weak_probe_operating_point() {
        // z-mode at s_w = 1.7 GHz/Φ0: g0/2π = 0.425 mHz, Ω_m/2π = 140 Hz.
        let g0 = TAU * 0.425e-3;
        let kappa = TAU * 135e6;
        let omega_m = TAU * 140.0;
        let gamma_m = omega_m / 2.6e7;
        let n_th = mech::thermal_occupation(15e-3, omega_m);
        let cq = cooperativity(0.05, g0, kappa, gamma_m, n_th);
        assert!(rel_err(cq, 2.2e-17) < 0.02, "got {cq:.3e}");
        // Within an order of magnitude of the published 5e-17.
        assert!(cq > 5e-18 && cq < 5e-16);
        // Doubling g0 quadruples C_q; the algebraic inverse closes.
        assert!(rel_err(cooperativity(0.05, 2.0 * g0, kappa, gamma_m, n_th), 4.0 * cq) < 1e-12);
        assert!(rel_err(cq * kappa * gamma_m * n_th / (4.0 * 0.05), g0 * g0) < 1e-12);
    }

    #[test]
    fn efficiency_chain_and_phonon_floor() {
        // η = 1/9 is the ground-state threshold n_min = 1.
        assert!(rel_err(min_phonons(1.0 / 9.0).unwrap(), 1.0) < 1e-12);
        assert_eq!(min_phonons(1.0).unwrap(), 0.0);
        assert!(min_phonons(0.0).is_err());
        // η_d = 0.4 with C_q = 0.38 sits at the threshold.
        let eta_e = measurement_efficiency(0.38).unwrap();
        let eta = total_efficiency(0.4, eta_e);
        assert!(rel_err(eta, 0.110) < 0.01, "got {eta}");
        assert!(measurement_efficiency(0.0).is_err());
    }

    #[test]
    fn measurement_efficiency_monotone_in_cooperativity() {
        let mut last = 0.0;
        for cq in [1e-6, 1e-3, 0.1, 0.38, 1.0, 10.0, 1e4] {
            let eta = measurement_efficiency(cq).unwrap();
            assert!(eta > last);
            last = eta;
        }
        let mut last = f64::INFINITY;
        for eta in [0.01, 0.1, 1.0 / 9.0 + 1e-3, 0.5, 1.0] {
            let n = min_phonons(eta).unwrap();
            assert!(n < last);
            last = n;
        }
    }

    #[test]
    fn ground_state_density_published_scale() {
        // 150 Hz z-mode at 15 mK, Q = 2.6e7, m = 5.7 μg.
        let omega_m = TAU * 150.0;
        let xzpf = mech::zero_point_motion(5.7e-9, omega_m).unwrap();
        let gamma_m = omega_m / 2.6e7;
        let n_th = mech::thermal_occupation(15e-3, omega_m);
        let s_gs = ground_state_density(xzpf, gamma_m, n_th);
        let root = s_gs.sqrt();
        assert!(rel_err(root, 0.721e-15) < 1e-2, "got {root:.4e}");
        // Within the published (0.8 fm)²/Hz scale.
        assert!(rel_err(root, 0.8e-15) < 0.2);
        // n_th doubled halves S_gs.
        assert!(rel_err(ground_state_density(xzpf, gamma_m, 2.0 * n_th), s_gs / 2.0) < 1e-12);
    }

    #[test]
    fn imprecision_cooperativity_exact_relation() {
        // The shorthand S_imp = S_gs/C_q circulating for this readout scheme
        // is off by a constant: the component formulas imply exactly
        // S_gs = 16·C_q·S_imp for any consistent parameter set.
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let omega_m = TAU * rng.gen_range(50.0..500.0);
            let mass = rng.gen_range(1e-10..1e-8);
            let q = rng.gen_range(1e5..1e8);
            let temp = rng.gen_range(1e-3..1.0);
            let kappa = TAU * rng.gen_range(1e6..1e9);
            let n_r = rng.gen_range(1e-3..10.0);
            let g_cyc = rng.gen_range(1e9..1e13);
            let xzpf = mech::zero_point_motion(mass, omega_m).unwrap();
            let gamma_m = omega_m / q;
            let n_th = mech::thermal_occupation(temp, omega_m);
            let g0 = TAU * g_cyc * xzpf;
            let cq = cooperativity(n_r, g0, kappa, gamma_m, n_th);
            let s_imp = imprecision_quantum(kappa, n_r, TAU * g_cyc, 0.0).unwrap();
            let s_gs = ground_state_density(xzpf, gamma_m, n_th);
            assert!(rel_err(s_gs, 16.0 * cq * s_imp) < 1e-9);
        }
    }

    #[test]
    fn imprecision_back_action_product() {
        // S_imp·S_FF = ħ²/4·(1 + 4Ω²/κ²).
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..20 {
            let kappa = TAU * rng.gen_range(1e6..1e9);
            let n_r = rng.gen_range(1e-3..100.0);
            let big_g = TAU * rng.gen_range(1e8..1e13);
            let omega = rng.gen_range(0.0..kappa);
            let s_imp = imprecision_quantum(kappa, n_r, big_g, omega).unwrap();
            let s_ff = back_action_force_density(big_g, n_r, kappa);
            let expected = HBAR * HBAR / 4.0 * (1.0 + 4.0 * omega * omega / (kappa * kappa));
            assert!(rel_err(s_imp * s_ff, expected) < 1e-9);
        }
    }

    #[test]
    fn back_action_density_ratio_is_occupation_squared() {
        let omega_m = TAU * 140.0;
        let gamma_m = omega_m / 2.6e7;
        let n_th = mech::thermal_occupation(15e-3, omega_m);
        let inputs = BackActionInputs {
            big_g: TAU * 1.36e11,
            n_r: 0.05,
            kappa: TAU * 135e6,
            mass: 5.7e-9,
            omega_m,
            gamma_m,
            gamma_eff: gamma_m * n_th,
        };
        let (th, gs) = back_action_densities(&inputs);
        assert!(rel_err(th / gs, n_th * n_th) < 1e-9);
        let zero = BackActionInputs { n_r: 0.0, ..inputs };
        let (th0, gs0) = back_action_densities(&zero);
        assert_eq!(th0, 0.0);
        assert_eq!(gs0, 0.0);
    }

    #[test]
    fn susceptibility_limits() {
        let m = 5.7e-9;
        let omega_m = TAU * 140.0;
        let gamma = 3.4e-5;
        let dc = susceptibility(0.0, m, omega_m, gamma);
        assert!(rel_err(dc.re, 1.0 / (m * omega_m * omega_m)) < 1e-12);
        assert!(dc.im.abs() < 1e-30);
        let res = susceptibility(omega_m, m, omega_m, gamma);
        assert!(rel_err(res.norm(), 1.0 / (m * gamma * omega_m)) < 1e-12);
        // |χ(Ω_m, Γ_eff)|/|χ(Ω_m, Γ_m)| = Γ_m/Γ_eff.
        let n_th = 2.2e6;
        let broad = susceptibility(omega_m, m, omega_m, gamma * n_th);
        assert!(rel_err(broad.norm() / res.norm(), 1.0 / n_th) < 1e-9);
    }

    #[test]
    fn friis_cascade() {
        let single = friis(&[AmplifierStage::new(2.5, 42.0).unwrap()]).unwrap();
        assert!(rel_err(single, 2.5) < 1e-12);
        let two = friis(&[
            AmplifierStage::new(2.5, 42.0).unwrap(),
            AmplifierStage::new(300.0, 30.0).unwrap(),
        ])
        .unwrap();
        assert!(rel_err(two, 2.5189) < 1e-4, "got {two}");
        assert!(friis(&[]).is_err());
    }

    #[test]
    fn friis_low_noise_first_is_never_worse() {
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..100 {
            let a = AmplifierStage::new(rng.gen_range(0.5..5.0), rng.gen_range(10.0..45.0)).unwrap();
            let b = AmplifierStage::new(
                a.noise_temperature + rng.gen_range(0.1..500.0),
                rng.gen_range(10.0..45.0),
            )
            .unwrap();
            let good = friis(&[a, b]).unwrap();
            let bad = friis(&[b, a]).unwrap();
            assert!(bad >= good - 1e-12, "{bad} < {good}");
        }
    }

    #[test]
    fn friis_appended_stage_contribution() {
        // Appending a stage after cumulative linear gain g adds exactly T/g.
        let mut rng = StdRng::seed_from_u64(10);
        for _ in 0..50 {
            let n = rng.gen_range(1..5);
            let chain: Vec<_> = (0..n)
                .map(|_| {
                    AmplifierStage::new(rng.gen_range(0.5..300.0), rng.gen_range(5.0..40.0))
                        .unwrap()
                })
                .collect();
            let base = friis(&chain).unwrap();
            let gain: f64 = chain.iter().map(|s| s.gain_linear()).product();
            let extra = AmplifierStage::new(rng.gen_range(0.5..300.0), 20.0).unwrap();
            let mut longer = chain.clone();
            longer.push(extra);
            let total = friis(&longer).unwrap();
            assert!(rel_err(total, base + extra.noise_temperature / gain) < 1e-12);
        }
    }

    #[test]
    fn added_photons_of_the_hemt() {
        let n = added_photons(2.5, TAU * 4.3e9);
        assert!(rel_err(n, 12.1) < 1e-2, "got {n}");
        assert_eq!(added_photons(0.0, TAU * 4.3e9), 0.0);
        assert!(rel_err(added_photons(5.0, TAU * 4.3e9), 2.0 * n) < 1e-12);
    }

    #[test]
    fn cryo_loss_inversion() {
        let lambda = invert_loss(12.0, 28.0).unwrap();
        assert!(rel_err(lambda, 0.43860) < 1e-4, "got {lambda}");
        let db = 10.0 * lambda.log10();
        assert!((db + 3.58).abs() < 0.01, "got {db}");
        assert!((db + 3.5).abs() < 2.4);
        // Lossless line adds nothing.
        assert!(rel_err(cryo_chain(12.0, 1.0).unwrap(), 12.0) < 1e-12);
        assert!(invert_loss(12.0, 5.0).is_err());
        assert!(cryo_chain(12.0, 0.0).is_err());
    }

    #[test]
    fn cryo_chain_round_trip() {
        for lambda in [0.011, 0.05, 0.2, 0.4386, 0.7, 1.0] {
            let n_add = cryo_chain(12.0, lambda).unwrap();
            let back = invert_loss(12.0, n_add).unwrap();
            assert!(rel_err(back, lambda) < 1e-12);
        }
    }

    #[test]
    fn cavity_efficiency_values() {
        let eta = cavity_efficiency(TAU * 110e6, TAU * 25e6).unwrap();
        assert!(rel_err(eta, 0.185185) < 1e-4, "got {eta}");
        assert!((eta - 0.19).abs() < 0.04);
        assert_eq!(cavity_efficiency(0.0, 1.0).unwrap(), 1.0);
        assert!(rel_err(cavity_efficiency(1.0, 1.0).unwrap(), 0.5) < 1e-12);
    }

    #[test]
    fn budget_assembly_and_residual_solve() {
        let eta_cryo = residual_efficiency(4.3e-5, 0.19, 1.3e-2).unwrap();
        assert!(rel_err(eta_cryo, 1.74e-2) < 1e-2, "got {eta_cryo:.3e}");
        let all_ones = budget_assemble(1.0, 1.0, 1.0).unwrap();
        assert_eq!(all_ones.eta_d, 1.0);
        let upgrade = budget_assemble(0.5, 0.81, 0.99).unwrap();
        assert!(rel_err(upgrade.eta_d, 0.40) < 0.01, "got {}", upgrade.eta_d);
        assert!(residual_efficiency(0.5, 0.1, 0.1).is_err());
        assert!(budget_assemble(1.5, 1.0, 1.0).is_err());
        // n_add consistent with η_cryo = 1/(1+2 n_add).
        let b = budget_assemble(0.19, eta_cryo, 1.3e-2).unwrap();
        assert!(rel_err(1.0 / (1.0 + 2.0 * b.n_add_cryo), eta_cryo) < 1e-9);
    }

    #[test]
    fn design_cooperativity_routes_agree_up_to_constant() {
        let sphere = SphereParams::new(50e-6, 1.09e4).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        let mut ratios = Vec::new();
        for _ in 0..5 {
            let trap = TrapConfig::new(
                [23.5, 24.2, 48.1],
                rng.gen_range(0.2..5.0),
                rng.gen_range(1e6..1e8),
                rng.gen_range(5e-3..0.1),
                SignConvention::ZNegativeSum,
            )
            .unwrap();
            let dc = design_cooperativity(
                &trap,
                &sphere,
                Axis::Z,
                rng.gen_range(0.01..10.0),
                TAU * rng.gen_range(1e7..1e9),
                rng.gen_range(1e8..5e9),
                rng.gen_range(1e-4..1e-2),
                rng.gen_range(1e-4..1e-2),
            )
            .unwrap();
            ratios.push(dc.assembled / dc.printed);
        }
        let mean: f64 = ratios.iter().sum::<f64>() / ratios.len() as f64;
        for r in &ratios {
            assert!(rel_err(*r, mean) < 1e-9, "ratios not constant: {ratios:?}");
        }
    }

    #[test]
    fn design_cooperativity_scalings() {
        let sphere = SphereParams::new(50e-6, 1.09e4).unwrap();
        let trap = |i: f64| {
            TrapConfig::new(
                [23.5, 24.2, 48.1],
                i,
                2.6e7,
                15e-3,
                SignConvention::ZNegativeSum,
            )
            .unwrap()
        };
        let kappa = TAU * 135e6;
        let base = design_cooperativity(&trap(1.0), &sphere, Axis::Z, 0.05, kappa, 1.7e9, 5e-3, 6.1e-4)
            .unwrap();
        // Linear in n_r and in I_trap, quadratic in s_w — both routes.
        let nr2 = design_cooperativity(&trap(1.0), &sphere, Axis::Z, 0.10, kappa, 1.7e9, 5e-3, 6.1e-4)
            .unwrap();
        assert!(rel_err(nr2.assembled, 2.0 * base.assembled) < 1e-12);
        assert!(rel_err(nr2.printed, 2.0 * base.printed) < 1e-12);
        let i2 = design_cooperativity(&trap(2.0), &sphere, Axis::Z, 0.05, kappa, 1.7e9, 5e-3, 6.1e-4)
            .unwrap();
        assert!(rel_err(i2.assembled, 2.0 * base.assembled) < 1e-12);
        assert!(rel_err(i2.printed, 2.0 * base.printed) < 1e-12);
        let sw2 = design_cooperativity(&trap(1.0), &sphere, Axis::Z, 0.05, kappa, 3.4e9, 5e-3, 6.1e-4)
            .unwrap();
        assert!(rel_err(sw2.assembled, 4.0 * base.assembled) < 1e-12);
        assert!(rel_err(sw2.printed, 4.0 * base.printed) < 1e-12);
    }

    #[test]
    fn projection_ledger_reaches_published_target() {
        let ledger = ProjectionLedger {
            base_cq: 5e-17,
            factors: vec![
                ("readout", 200.0),
                ("positioning", 4e10),
                ("transformer", 2.5e3),
                ("slope", 10.0),
                ("linewidth", 300.0),
                ("current-switch", 19.0),
            ]
            .into_iter()
            .map(|(name, multiplier)| LedgerFactor {
                name: name.into(),
                multiplier,
                note: String::new(),
            })
            .collect(),
        };
        let projection = project(&ledger).unwrap();
        assert!(rel_err(projection.projected_cq, 5.7e4) < 1e-9);
        assert!(projection.projected_cq > 1e4);
        assert_eq!(projection.steps.len(), 6);
        assert!(rel_err(projection.steps[1].cumulative_cq, 5e-17 * 200.0 * 4e10) < 1e-12);

        let empty = project(&ProjectionLedger {
            base_cq: 5e-17,
            factors: vec![],
        })
        .unwrap();
        assert_eq!(empty.projected_cq, 5e-17);
    }

    #[test]
    fn positioning_factor_is_coupling_gain_squared() {
        let coupling_gain: f64 = 2e5;
        assert!(rel_err(coupling_gain * coupling_gain, 4e10) < 1e-12);
    }

    #[test]
    fn first_order_sigma_reproduces_published_error_bars() {
        // η_cav = (1+κi/κe)⁻¹ with κ = (110±13, 25±5) MHz → 0.19±0.04.
        let sigma = first_order_sigma(
            |p| 1.0 / (1.0 + p[0] / p[1]),
            &[110.0, 25.0],
            &[13.0, 5.0],
        );
        assert!((sigma - 0.035).abs() < 0.005, "got {sigma}");
    }
}
