//! Flux-tunable resonator modeling: complex reflection lineshape and fit,
//! SQUID inductance under flux bias, the participation tuning model and
//! flux-responsivity extraction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{PHI0, TAU};
use crate::error::{Error, Result};
use crate::fitting::{levenberg_marquardt, LmOptions};

/// Exclusion window (in Φ0) around half-integer flux where the Josephson
/// inductance diverges.
pub const EPS_GAP: f64 = 1e-3;

/// Resonator state at one bias point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CavityParams {
    /// Resonance frequency (rad/s).
    pub omega_r: f64,
    /// Internal linewidth (rad/s).
    pub kappa_int: f64,
    /// External linewidth (rad/s).
    pub kappa_ext: f64,
    /// Flux responsivity ∂ω_r/(2π ∂Φ) (Hz/Φ0).
    pub s_w_hz_per_phi0: f64,
    /// Bias flux (Φ0).
    pub bias_flux_phi0: f64,
    /// Mean readout photon number.
    pub n_r: f64,
}

impl CavityParams {
    pub fn new(
        omega_r: f64,
        kappa_int: f64,
        kappa_ext: f64,
        s_w_hz_per_phi0: f64,
        bias_flux_phi0: f64,
        n_r: f64,
    ) -> Result<Self> {
        if kappa_int < 0.0 || kappa_ext < 0.0 || n_r < 0.0 {
            return Err(Error::Domain(
                "linewidths and photon number must be non-negative".into(),
            ));
        }
        Ok(Self {
            omega_r,
            kappa_int,
            kappa_ext,
            s_w_hz_per_phi0,
            bias_flux_phi0,
            n_r,
        })
    }

    /// Total linewidth κ_int + κ_ext (rad/s).
    pub fn kappa_tot(&self) -> f64 {
        self.kappa_int + self.kappa_ext
    }
}

/// SQUID element of the resonator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SquidParams {
    /// Critical current per junction (A).
    pub critical_current: f64,
    /// Geometric loop inductance (H).
    pub loop_inductance: f64,
    /// Screening parameter β_L (stored for documentation; screening
    /// corrections are not applied at β_L ≈ 0.06).
    pub screening: f64,
    /// Lumped equivalent resonator inductance (H).
    pub resonator_inductance: f64,
    /// Lumped equivalent resonator capacitance (F).
    pub resonator_capacitance: f64,
    /// Effective loop area (m²).
    pub effective_area: f64,
}

impl SquidParams {
    pub fn new(
        critical_current: f64,
        loop_inductance: f64,
        screening: f64,
        resonator_inductance: f64,
        resonator_capacitance: f64,
        effective_area: f64,
    ) -> Result<Self> {
        if critical_current <= 0.0 || loop_inductance <= 0.0 {
            return Err(Error::Domain(
                "critical current and loop inductance must be positive".into(),
            ));
        }
        // β_L = 2 L_s I_c/Φ0 within 20% of the stored (approximate) value.
        let implied = 2.0 * loop_inductance * critical_current / PHI0;
        if (implied - screening).abs() > 0.2 * screening {
            return Err(Error::Unphysical(format!(
                "screening parameter {screening} inconsistent with 2·Ls·Ic/Phi0 = {implied:.3}"
            )));
        }
        Ok(Self {
            critical_current,
            loop_inductance,
            screening,
            resonator_inductance,
            resonator_capacitance,
            effective_area,
        })
    }
}

/// Complex reflection coefficient of the single-port resonator.
///
/// S21 = [(ω−ω_r)² + iκ_int(ω−ω_r) + (κ_ext²−κ_int²)/4] / [(ω−ω_r) + i(κ_ext+κ_int)/2]².
pub fn s21_model(omega: f64, omega_r: f64, kappa_int: f64, kappa_ext: f64) -> Complex64 {
    let delta = omega - omega_r;
    let numerator = Complex64::new(
        delta * delta + (kappa_ext * kappa_ext - kappa_int * kappa_int) / 4.0,
        kappa_int * delta,
    );
    let root = Complex64::new(delta, (kappa_ext + kappa_int) / 2.0);
    numerator / (root * root)
}

/// Result of a complex lineshape fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct S21Fit {
    /// Fitted resonance frequency (rad/s).
    pub omega_r: f64,
    /// Fitted internal linewidth (rad/s).
    pub kappa_int: f64,
    /// Fitted external linewidth (rad/s).
    pub kappa_ext: f64,
    /// Standard errors of (ω_r, κ_int, κ_ext) from the Jacobian (rad/s).
    pub std_errors: [f64; 3],
    /// Residual sum of squares over stacked Re/Im residuals.
    pub ssr: f64,
    pub iterations: usize,
}

/// Derive a starting point from the |S21| dip: the resonance sits at the
/// minimum, κ_tot is the full width at half depth of 1−|S21|², and the real
/// part of the dip splits κ_tot into internal and external parts.
pub fn initial_guess_s21(trace: &[(f64, Complex64)]) -> Result<[f64; 3]> {
    let (min_idx, min_val) = trace
        .iter()
        .enumerate()
        .map(|(i, (_, s))| (i, s.norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::FitInit("empty trace".into()))?;
    let max_val = trace
        .iter()
        .map(|(_, s)| s.norm())
        .fold(0.0f64, f64::max);
    if min_val > 0.95 * max_val {
        return Err(Error::FitInit("no resonance dip in the trace".into()));
    }
    let omega_r = trace[min_idx].0;

    // Half level of the dip in |S21|².
    let depth = max_val * max_val - min_val * min_val;
    let half_level = max_val * max_val - depth / 2.0;
    let mut lo = trace[0].0;
    for window in trace.windows(2) {
        let (w0, s0) = window[0];
        let (w1, s1) = window[1];
        if s0.norm_sqr() >= half_level && s1.norm_sqr() < half_level && w1 <= omega_r {
            let t = (s0.norm_sqr() - half_level) / (s0.norm_sqr() - s1.norm_sqr());
            lo = w0 + t * (w1 - w0);
        }
    }
    let mut hi = trace[trace.len() - 1].0;
    for window in trace.windows(2) {
        let (w0, s0) = window[0];
        let (w1, s1) = window[1];
        if s0.norm_sqr() < half_level && s1.norm_sqr() >= half_level && w0 >= omega_r {
            let t = (half_level - s0.norm_sqr()) / (s1.norm_sqr() - s0.norm_sqr());
            hi = w0 + t * (w1 - w0);
            break;
        }
    }
    let kappa_tot = (hi - lo).abs().max(trace[1].0 - trace[0].0);
    // On resonance S21 = (κ_int − κ_ext)/κ_tot (real).
    let dip = trace[min_idx].1.re.clamp(-0.95, 0.95);
    let kappa_int = kappa_tot * (1.0 + dip) / 2.0;
    let kappa_ext = kappa_tot * (1.0 - dip) / 2.0;
    Ok([omega_r, kappa_int.max(1e-6), kappa_ext.max(1e-6)])
}

/// Fit ω_r, κ_int and κ_ext to a complex trace by damped least squares on the
/// stacked real and imaginary residuals, with the analytic Jacobian.
pub fn fit_s21(trace: &[(f64, Complex64)], initial: Option<[f64; 3]>) -> Result<S21Fit> {
    if trace.len() < 20 {
        return Err(Error::Argument(format!(
            "need at least 20 trace points, got {}",
            trace.len()
        )));
    }
    let start = match initial {
        Some(p) => p,
        None => initial_guess_s21(trace)?,
    };

    let fit = levenberg_marquardt(
        |p, res, jac| {
            res.clear();
            jac.clear();
            let (omega_r, kappa_int, kappa_ext) = (p[0], p[1], p[2]);
            for &(omega, measured) in trace {
                // S21 = 1 − iκ_ext/D with D = (ω−ω_r) + iκ_tot/2 (equivalent
                // compact form of the model; derivatives are simplest here).
                let d = Complex64::new(omega - omega_r, (kappa_int + kappa_ext) / 2.0);
                let inv = 1.0 / d;
                let inv2 = inv * inv;
                let model = Complex64::new(1.0, 0.0) - Complex64::i() * kappa_ext * inv;
                let d_omega_r = -Complex64::i() * kappa_ext * inv2;
                let d_kappa_int = -kappa_ext * inv2 / 2.0;
                let d_kappa_ext = -Complex64::i() * inv - kappa_ext * inv2 / 2.0;
                let diff = model - measured;
                res.push(diff.re);
                jac.push(vec![d_omega_r.re, d_kappa_int.re, d_kappa_ext.re]);
                res.push(diff.im);
                jac.push(vec![d_omega_r.im, d_kappa_int.im, d_kappa_ext.im]);
            }
        },
        &start,
        &LmOptions::default(),
    )?;

    let errors = fit.std_errors();
    Ok(S21Fit {
        omega_r: fit.params[0],
        kappa_int: fit.params[1],
        kappa_ext: fit.params[2],
        std_errors: [errors[0], errors[1], errors[2]],
        ssr: fit.ssr,
        iterations: fit.iterations,
    })
}

/// Flux-dependent inductance of the two-junction SQUID,
/// L(Φ) = Φ0/(4π I_c |cos(πΦ/Φ0)|).
pub fn squid_inductance(flux_phi0: f64, critical_current: f64) -> Result<f64> {
    if critical_current <= 0.0 {
        return Err(Error::Domain("critical current must be positive".into()));
    }
    let c = (std::f64::consts::PI * flux_phi0).cos().abs();
    if c <= EPS_GAP {
        return Err(Error::Domain(format!(
            "flux bias {flux_phi0} Phi0 within the divergence window around half flux"
        )));
    }
    Ok(PHI0 / (2.0 * TAU * critical_current * c))
}

/// Participation model ω_r(Φ) = ω0/sqrt(1 + (L_sq(Φ) + L_s)/L_r).
///
/// ω0 and L_r act as fit parameters against measured or synthetic tuning data;
/// they are not derived from layout.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TuningModel {
    /// Bare mode frequency (rad/s).
    pub omega0: f64,
    /// Participation inductance (H).
    pub l_resonator: f64,
    /// Geometric SQUID loop inductance (H).
    pub l_squid_geo: f64,
    /// Critical current per junction (A).
    pub critical_current: f64,
}

impl TuningModel {
    /// Resonance frequency at a flux bias (Φ in Φ0 units).
    pub fn omega_r(&self, flux_phi0: f64) -> Result<f64> {
        let l_sq = squid_inductance(flux_phi0, self.critical_current)?;
        let participation = 1.0 + (l_sq + self.l_squid_geo) / self.l_resonator;
        Ok(self.omega0 / participation.sqrt())
    }

    /// Analytic flux responsivity s_w = ∂ω_r/(2π ∂Φ) in Hz/Φ0.
    pub fn slope_hz_per_phi0(&self, flux_phi0: f64) -> Result<f64> {
        let l_sq = squid_inductance(flux_phi0, self.critical_current)?;
        let participation = 1.0 + (l_sq + self.l_squid_geo) / self.l_resonator;
        let u = std::f64::consts::PI * flux_phi0;
        // dL_sq/dΦ in H per Φ0; sign of cos handled through tan.
        let dl = l_sq * std::f64::consts::PI * u.tan();
        let domega = -self.omega0 / 2.0 * participation.powf(-1.5) * dl / self.l_resonator;
        Ok(domega / TAU)
    }
}

/// Tuning model together with the flux range it was fitted on.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TuningFit {
    pub model: TuningModel,
    pub flux_range_phi0: (f64, f64),
    pub ssr: f64,
}

/// Evaluate the tuning curve on a flux grid (Φ0 units), returning (Φ, ω_r).
pub fn tuning_curve(model: &TuningModel, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    grid.iter()
        .map(|&phi| model.omega_r(phi).map(|w| (phi, w)))
        .collect()
}

/// Fit ω0 and L_r of the participation model to (Φ, ω_r) data at fixed SQUID
/// parameters.
pub fn fit_tuning(
    data: &[(f64, f64)],
    l_squid_geo: f64,
    critical_current: f64,
) -> Result<TuningFit> {
    if data.len() < 3 {
        return Err(Error::Argument("need at least 3 tuning points".into()));
    }
    let omega_max = data.iter().map(|(_, w)| *w).fold(0.0f64, f64::max);
    let scale = omega_max;
    let l_sq0 = squid_inductance(0.0, critical_current)?;
    let start = [1.2 * omega_max, l_sq0];

    let fit = levenberg_marquardt(
        |p, res, jac| {
            res.clear();
            jac.clear();
            for &(phi, omega_obs) in data {
                let Ok(l_sq) = squid_inductance(phi, critical_current) else {
                    res.push(1e6);
                    jac.push(vec![0.0, 0.0]);
                    continue;
                };
                let participation = 1.0 + (l_sq + l_squid_geo) / p[1];
                let omega = p[0] / participation.sqrt();
                res.push((omega - omega_obs) / scale);
                let d_omega0 = 1.0 / participation.sqrt();
                let d_lr = p[0] * (l_sq + l_squid_geo)
                    / (2.0 * p[1] * p[1] * participation.powf(1.5));
                jac.push(vec![d_omega0 / scale, d_lr / scale]);
            }
        },
        &start,
        &LmOptions::default(),
    )?;

    let lo = data.iter().map(|(p, _)| *p).fold(f64::INFINITY, f64::min);
    let hi = data.iter().map(|(p, _)| *p).fold(f64::NEG_INFINITY, f64::max);
    Ok(TuningFit {
        model: TuningModel {
            omega0: fit.params[0],
            l_resonator: fit.params[1],
            l_squid_geo,
            critical_current,
        },
        flux_range_phi0: (lo, hi),
        ssr: fit.ssr,
    })
}

/// Flux responsivity at a bias interior to the fitted range.
pub fn slope_at_bias(fit: &TuningFit, flux_phi0: f64) -> Result<f64> {
    let (lo, hi) = fit.flux_range_phi0;
    if flux_phi0 < lo || flux_phi0 > hi {
        return Err(Error::Range {
            msg: format!("bias {flux_phi0} Phi0 outside the fitted range [{lo}, {hi}]"),
            max_achievable: hi,
        });
    }
    fit.model.slope_hz_per_phi0(flux_phi0)
}

/// Smallest non-negative bias reaching |s_w| ≥ target, by bisection on the
/// monotone branch between the sweet spot and the positive range edge.
pub fn bias_for_slope(fit: &TuningFit, target_hz_per_phi0: f64) -> Result<f64> {
    if target_hz_per_phi0 <= 0.0 {
        return Ok(0.0);
    }
    let phi_max = fit.flux_range_phi0.1;
    let max_slope = fit.model.slope_hz_per_phi0(phi_max)?.abs();
    if target_hz_per_phi0 > max_slope {
        return Err(Error::Range {
            msg: format!("target slope {target_hz_per_phi0:.3e} Hz/Phi0 not achievable"),
            max_achievable: max_slope,
        });
    }
    let mut lo = 0.0;
    let mut hi = phi_max;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fit.model.slope_hz_per_phi0(mid)?.abs() >= target_hz_per_phi0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(hi)
}
