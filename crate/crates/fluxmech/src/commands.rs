//! CLI command implementations. Every command maps onto library operations,
//! writes its artifact files under the output directory, and returns a
//! [`Report`] for stdout.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::budget::{self, AmplifierStage, BackActionInputs};
use crate::cavity::{self, TuningModel};
use crate::config::RunConfig;
use crate::constants::TAU;
use crate::error::{Error, Result};
use crate::geometry::{self, LocateOptions};
use crate::io;
use crate::mech::{self, Axis};
use crate::report::Report;
use crate::spectral::{self, ExclusionRules, SpectrumRecord, SynthConfig, SynthTone, TimeTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

pub struct CommandContext {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub format: OutputFormat,
}

impl CommandContext {
    fn artifact(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)?;
        Ok(self.out_dir.join(name))
    }
}

fn config_echo(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

/// Fit the complex reflection of a VNA trace (CSV: frequency_Hz,re_S21,im_S21).
pub fn fit_s21(ctx: &CommandContext, input: &Path) -> Result<Report> {
    let trace = io::read_s21_csv(input)?;
    let fit = cavity::fit_s21(&trace, None)?;
    let results = json!({
        "f_r_GHz": fit.omega_r / TAU / 1e9,
        "f_r_sigma_GHz": fit.std_errors[0] / TAU / 1e9,
        "kappa_int_MHz": fit.kappa_int / TAU / 1e6,
        "kappa_int_sigma_MHz": fit.std_errors[1] / TAU / 1e6,
        "kappa_ext_MHz": fit.kappa_ext / TAU / 1e6,
        "kappa_ext_sigma_MHz": fit.std_errors[2] / TAU / 1e6,
        "kappa_tot_MHz": (fit.kappa_int + fit.kappa_ext) / TAU / 1e6,
        "ssr": fit.ssr,
        "iterations": fit.iterations,
        "n_points": trace.len(),
    });
    let path = ctx.artifact("fit_s21.json")?;
    std::fs::write(&path, serde_json::to_string_pretty(&results)?)?;
    Ok(Report::new(
        "fit-s21",
        &ctx.config,
        ctx.seed,
        json!({"config": config_echo(&ctx.config), "input": input.display().to_string()}),
        results,
        vec![path.display().to_string()],
    ))
}

/// Tuning model with ω0 fixed by the configured sweet spot.
fn tuning_model_from_config(cfg: &RunConfig) -> Result<TuningModel> {
    let l_sq0 = cavity::squid_inductance(0.0, cfg.cavity.critical_current_a)?;
    let participation = 1.0 + (l_sq0 + cfg.transformer.l_squid_h) / cfg.cavity.l_resonator_h;
    Ok(TuningModel {
        omega0: TAU * cfg.cavity.sweet_spot_hz * participation.sqrt(),
        l_resonator: cfg.cavity.l_resonator_h,
        l_squid_geo: cfg.transformer.l_squid_h,
        critical_current: cfg.cavity.critical_current_a,
    })
}

/// Evaluate (or fit, when measured data is given) the flux tuning curve and
/// its responsivity.
pub fn tuning_curve(ctx: &CommandContext, input: Option<&Path>) -> Result<Report> {
    let (model, fitted, data_points) = match input {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let mut data = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let t = line.trim();
                if t.is_empty() || t.starts_with('#') || t.starts_with(|c: char| c.is_alphabetic())
                {
                    continue;
                }
                let cols: Vec<&str> = t.split(',').collect();
                if cols.len() < 2 {
                    return Err(Error::Argument(format!(
                        "line {}: expected phi_Phi0,f_r_GHz",
                        lineno + 1
                    )));
                }
                let phi: f64 = cols[0].trim().parse().map_err(|e| {
                    Error::Argument(format!("line {}: {e}", lineno + 1))
                })?;
                let f_ghz: f64 = cols[1].trim().parse().map_err(|e| {
                    Error::Argument(format!("line {}: {e}", lineno + 1))
                })?;
                data.push((phi, TAU * f_ghz * 1e9));
            }
            let fit = cavity::fit_tuning(
                &data,
                ctx.config.transformer.l_squid_h,
                ctx.config.cavity.critical_current_a,
            )?;
            (fit.model, true, data.len())
        }
        None => (tuning_model_from_config(&ctx.config)?, false, 0),
    };

    let grid: Vec<f64> = (-90..=90).map(|i| i as f64 * 0.005).collect();
    let curve = cavity::tuning_curve(&model, &grid)?;
    let path = ctx.artifact("tuning_curve.csv")?;
    {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(out, "phi_Phi0,f_r_GHz,s_w_GHz_per_Phi0")?;
        for &(phi, omega) in &curve {
            let slope = model.slope_hz_per_phi0(phi)?;
            writeln!(out, "{phi},{},{}", omega / TAU / 1e9, slope / 1e9)?;
        }
    }
    let max_slope = grid
        .iter()
        .map(|&p| model.slope_hz_per_phi0(p).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    let results = json!({
        "sweet_spot_GHz": model.omega_r(0.0)? / TAU / 1e9,
        "edge_f_r_GHz": curve.last().unwrap().1 / TAU / 1e9,
        "max_abs_s_w_GHz_per_Phi0": max_slope / 1e9,
        "fitted_to_data": fitted,
        "n_data_points": data_points,
        "omega0_over_2pi_GHz": model.omega0 / TAU / 1e9,
        "l_resonator_nH": model.l_resonator * 1e9,
    });
    Ok(Report::new(
        "tuning-curve",
        &ctx.config,
        ctx.seed,
        config_echo(&ctx.config),
        results,
        vec![path.display().to_string()],
    ))
}

fn raw_spectrum(cfg: &RunConfig, trace: &TimeTrace, segment: Option<usize>) -> Result<SpectrumRecord> {
    let voltage = spectral::demodulated_voltage(trace, cfg.calibration.mix_freq_hz)?;
    let segment = segment.unwrap_or_else(|| (voltage.len() / 10).max(16));
    spectral::welch_psd(&voltage, trace.sample_rate, segment)
}

/// Welch spectrum of a demodulated trace.
pub fn psd(ctx: &CommandContext, input: &Path, segment: Option<usize>) -> Result<Report> {
    let trace = io::read_trace(input)?;
    let spectrum = raw_spectrum(&ctx.config, &trace, segment)?;
    let path = ctx.artifact("psd.csv")?;
    io::write_spectrum_csv(&path, &spectrum)?;
    let results = json!({
        "enbw_Hz": spectrum.enbw,
        "bin_width_Hz": spectrum.bin_width(),
        "n_bins": spectrum.psd.len(),
        "units": spectrum.units.label(),
        "duration_s": trace.duration(),
    });
    Ok(Report::new(
        "psd",
        &ctx.config,
        ctx.seed,
        json!({"config": config_echo(&ctx.config), "input": input.display().to_string()}),
        results,
        vec![path.display().to_string()],
    ))
}

struct CalibratedSpectra {
    raw: SpectrumRecord,
    flux: SpectrumRecord,
    freq: SpectrumRecord,
    displacement: SpectrumRecord,
    floor_m2_per_hz: f64,
}

fn calibrate_chain(cfg: &RunConfig, trace: &TimeTrace) -> Result<CalibratedSpectra> {
    let raw = raw_spectrum(cfg, trace, None)?;
    let flux = spectral::calibrate_flux_axis(&raw, &cfg.calibration_chain())?;
    let freq = spectral::flux_to_frequency(&flux, cfg.calibration.slope_hz_per_phi0)?;
    let displacement = spectral::calibrate_displacement(
        &raw,
        cfg.calibration.camera_amplitude_m,
        cfg.calibration.mode_freq_hz,
    )?;
    let rules = ExclusionRules {
        mains_fundamental: cfg.calibration.mains_hz,
        tones: vec![
            cfg.calibration.cal_tone_hz,
            cfg.calibration.phase_mod_hz,
            cfg.calibration.mode_freq_hz,
        ],
        ..ExclusionRules::default()
    };
    let nyquist = trace.sample_rate / 2.0;
    let floor = spectral::imprecision_floor(
        &displacement,
        (0.76 * nyquist, 0.99 * nyquist),
        &rules,
    )?;
    Ok(CalibratedSpectra {
        raw,
        flux,
        freq,
        displacement,
        floor_m2_per_hz: floor,
    })
}

/// Run the full calibration chain on a trace and export every stage.
pub fn calibrate(ctx: &CommandContext, input: &Path) -> Result<Report> {
    let trace = io::read_trace(input)?;
    let spectra = calibrate_chain(&ctx.config, &trace)?;
    let mut artifacts = Vec::new();
    for (name, spec) in [
        ("spectrum_raw.csv", &spectra.raw),
        ("spectrum_flux.csv", &spectra.flux),
        ("spectrum_freq.csv", &spectra.freq),
        ("spectrum_displacement.csv", &spectra.displacement),
    ] {
        let path = ctx.artifact(name)?;
        io::write_spectrum_csv(&path, spec)?;
        artifacts.push(path.display().to_string());
    }
    let results = json!({
        "enbw_Hz": spectra.raw.enbw,
        "cal_tone_ps_Phi0_sq": spectra.flux.power_peaks.last().map(|p| p.1),
        "mode_ps_m_sq": spectra.displacement.power_peaks.last().map(|p| p.1),
        "imprecision_floor_m2_per_Hz": spectra.floor_m2_per_hz,
        "imprecision_floor_sqrt_nm_per_sqrtHz": spectra.floor_m2_per_hz.sqrt() * 1e9,
    });
    Ok(Report::new(
        "calibrate",
        &ctx.config,
        ctx.seed,
        json!({"config": config_echo(&ctx.config), "input": input.display().to_string()}),
        results,
        artifacts,
    ))
}

/// Extract the electromechanical coupling from a calibrated trace.
pub fn coupling(ctx: &CommandContext, input: &Path) -> Result<Report> {
    let trace = io::read_trace(input)?;
    let spectra = calibrate_chain(&ctx.config, &trace)?;
    let sphere = ctx.config.sphere()?;
    let omega_m = TAU * ctx.config.calibration.mode_freq_hz;
    let xzpf = mech::zero_point_motion(sphere.mass(), omega_m)?;
    let estimate = spectral::extract_coupling(
        &spectra.freq,
        &spectra.displacement,
        ctx.config.calibration.mode_freq_hz,
        xzpf,
    )?;
    let results = json!({
        "G_over_2pi_THz_per_m": estimate.big_g_cyc / 1e12,
        "g0_over_2pi_mHz": estimate.g0_cyc * 1e3,
        "xzpf_fm": xzpf * 1e15,
        "mode_freq_Hz": ctx.config.calibration.mode_freq_hz,
        "imprecision_floor_sqrt_nm_per_sqrtHz": spectra.floor_m2_per_hz.sqrt() * 1e9,
    });
    let path = ctx.artifact("coupling.json")?;
    std::fs::write(&path, serde_json::to_string_pretty(&results)?)?;
    Ok(Report::new(
        "coupling",
        &ctx.config,
        ctx.seed,
        json!({"config": config_echo(&ctx.config), "input": input.display().to_string()}),
        results,
        vec![path.display().to_string()],
    ))
}

/// Export the geometric coupling factors over a lateral grid.
pub fn fluxmap(ctx: &CommandContext, span_m: f64, pitch_m: f64) -> Result<Report> {
    let shape = ctx.config.pickup_loop()?;
    let trap = ctx.config.trap()?;
    let b = mech::gradient_from_current(&trap);
    let rows = geometry::sensitivity_map(
        &shape,
        b,
        ctx.config.sphere.radius_m,
        ctx.config.pickup.offset_m[2],
        span_m,
        pitch_m,
    );
    let path = ctx.artifact("fluxmap.csv")?;
    io::write_sensitivity_map_csv(&path, &rows)?;
    let f_max = rows
        .iter()
        .flat_map(|r| r.f_factor.iter())
        .filter(|v| v.is_finite())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let results = json!({
        "rows": rows.len(),
        "dz_um": ctx.config.pickup.offset_m[2] * 1e6,
        "max_abs_F": f_max,
    });
    Ok(Report::new(
        "fluxmap",
        &ctx.config,
        ctx.seed,
        config_echo(&ctx.config),
        results,
        vec![path.display().to_string()],
    ))
}

/// Invert measured flux sensitivities for the pickup placement.
pub fn locate_pul(
    ctx: &CommandContext,
    dz_prior_m: Option<f64>,
    ratio_tolerance: f64,
    pitch_m: f64,
) -> Result<Report> {
    let shape = ctx.config.pickup_loop()?;
    let trap = ctx.config.trap()?;
    let b = mech::gradient_from_current(&trap);
    let dz_prior = dz_prior_m.unwrap_or(ctx.config.pickup.offset_m[2]);
    let options = LocateOptions {
        ratio_tolerance,
        pitch: pitch_m,
        ..LocateOptions::default()
    };
    let search = geometry::locate_pickup(
        ctx.config.budget.flux_sensitivity_phi0_per_m,
        b,
        ctx.config.sphere.radius_m,
        &shape,
        dz_prior,
        &options,
    )?;
    // Diagnostic misfit map for plotting the matching loci.
    let map_path = ctx.artifact("locate_misfit.csv")?;
    {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(&map_path)?);
        writeln!(out, "dx_m,dy_m,ratio_misfit")?;
        for (iy, &dy) in search.diagnostic.dy.iter().enumerate() {
            for (ix, &dx) in search.diagnostic.dx.iter().enumerate() {
                let m = search.diagnostic.misfit[iy * search.diagnostic.dx.len() + ix];
                writeln!(out, "{dx},{dy},{m:e}")?;
            }
        }
    }
    let results = json!({
        "n_solutions": search.solutions.len(),
        "solutions": search.solutions.iter().map(|s| json!({
            "offset_um": [s.offset[0] * 1e6, s.offset[1] * 1e6, s.offset[2] * 1e6],
            "alpha": s.alpha,
            "residual": s.residual,
            "symmetry_partner": s.symmetry_partner,
            "rank_deficient": s.rank_deficient,
        })).collect::<Vec<_>>(),
        "dz_prior_um": dz_prior * 1e6,
        "ratio_tolerance": ratio_tolerance,
    });
    let path = ctx.artifact("locate_pul.json")?;
    std::fs::write(&path, serde_json::to_string_pretty(&results)?)?;
    Ok(Report::new(
        "locate-pul",
        &ctx.config,
        ctx.seed,
        config_echo(&ctx.config),
        results,
        vec![path.display().to_string(), map_path.display().to_string()],
    ))
}

/// Full noise, efficiency and cooperativity budget at the configured
/// operating point, with first-order uncertainties.
pub fn budget_report(cfg: &RunConfig) -> Result<Value> {
    let b = &cfg.budget;
    let kappa_int = TAU * b.kappa_int_hz;
    let kappa_ext = TAU * b.kappa_ext_hz;
    let kappa = kappa_int + kappa_ext;

    let eta_cav = budget::cavity_efficiency(kappa_int, kappa_ext)?;
    let eta_cav_sigma = budget::first_order_sigma(
        |p| 1.0 / (1.0 + p[0] / p[1]),
        &[b.kappa_int_hz, b.kappa_ext_hz],
        &[b.kappa_int_sigma_hz, b.kappa_ext_sigma_hz],
    );

    // Mechanics at the measured mode frequency.
    let sphere = cfg.sphere()?;
    let omega_m = TAU * b.mode_freq_hz;
    let xzpf = mech::zero_point_motion(sphere.mass(), omega_m)?;
    let gamma_m = omega_m / cfg.trap.quality;
    let n_th = mech::thermal_occupation(cfg.trap.temperature_k, omega_m);

    // Coupling from the measured flux sensitivity of the probed (z) axis.
    let d_phi_z = b.flux_sensitivity_phi0_per_m[2];
    let big_g_cyc = b.slope_hz_per_phi0 * d_phi_z;
    let g0_cyc = big_g_cyc * xzpf;

    let s_impc = budget::imprecision_quantum(kappa, b.n_r, TAU * big_g_cyc, omega_m)?;
    let s_quantum_g2 = s_impc * big_g_cyc * big_g_cyc;
    let eta_d = budget::detection_efficiency(s_quantum_g2, b.detected_imprecision_hz)?;
    let eta_d_sigma = budget::first_order_sigma(
        |p| (p[0] + p[1]) / (16.0 * p[2] * TAU) / p[3],
        &[b.kappa_int_hz, b.kappa_ext_hz, b.n_r, b.detected_imprecision_hz],
        &[
            b.kappa_int_sigma_hz,
            b.kappa_ext_sigma_hz,
            b.n_r_sigma,
            b.detected_imprecision_sigma_hz,
        ],
    );

    let eta_cryo = budget::residual_efficiency(eta_d, eta_cav, b.eta_warm)?;
    let eta_cryo_sigma = eta_cryo
        * ((eta_d_sigma / eta_d).powi(2) + (eta_cav_sigma / eta_cav).powi(2)).sqrt();
    let n_add = (1.0 / eta_cryo - 1.0) / 2.0;
    let n_add_sigma = eta_cryo_sigma / (2.0 * eta_cryo * eta_cryo);

    let omega_readout = TAU * b.readout_freq_hz;
    let n_hemt = budget::added_photons(b.hemt_temperature_k, omega_readout);
    let lambda = budget::invert_loss(n_hemt, n_add)?;
    let lambda_sigma = (n_hemt + 0.5) / ((n_add + 0.5) * (n_add + 0.5)) * n_add_sigma;
    let lambda_db = 10.0 * lambda.log10();
    let lambda_db_sigma = 10.0 / std::f64::consts::LN_10 * lambda_sigma / lambda;

    let t_total = budget::friis(&[
        AmplifierStage::new(b.hemt_temperature_k, b.hemt_gain_db)?,
        AmplifierStage::new(b.warm_temperature_k, b.warm_gain_db)?,
    ])?;

    let cq = budget::cooperativity(b.n_r, TAU * g0_cyc, kappa, gamma_m, n_th);
    let eta_e = budget::measurement_efficiency(cq)?;
    let eta = budget::total_efficiency(eta_d, eta_e);
    let n_min = budget::min_phonons(eta)?;
    let s_gs = budget::ground_state_density(xzpf, gamma_m, n_th);

    let inputs = BackActionInputs {
        big_g: TAU * big_g_cyc,
        n_r: b.n_r,
        kappa,
        mass: sphere.mass(),
        omega_m,
        gamma_m,
        gamma_eff: gamma_m * n_th,
    };
    let (s_ba_th, s_ba_gs) = budget::back_action_densities(&inputs);
    let s_ff = budget::back_action_force_density(inputs.big_g, b.n_r, kappa);

    // Upgrade path: quantum-limited amplifier and critically coupled cavity.
    let upgrade = budget::budget_assemble(b.upgrade_eta_cav, b.upgrade_eta_cryo, b.upgrade_eta_warm)?;
    let eta_e_required = (1.0 / 9.0) / upgrade.eta_d;
    let cq_required = eta_e_required / (1.0 - eta_e_required);

    // Design cross-check through the transformer and dipole-model geometry.
    let trap = cfg.trap()?;
    let alpha = geometry::transformer_efficiency(&cfg.transformer()?);
    let loop_ = cfg.pickup_loop()?;
    let grad = mech::gradient_from_current(&trap);
    let f_model = geometry::flux_sensitivity(&loop_, grad, sphere.radius, alpha)?
        .f_factor[Axis::Z.index()]
        .map(f64::abs);
    let design = f_model
        .map(|f| {
            budget::design_cooperativity(
                &trap,
                &sphere,
                Axis::Z,
                b.n_r,
                kappa,
                b.slope_hz_per_phi0,
                alpha,
                f,
            )
        })
        .transpose()?;

    Ok(json!({
        "eta_cav": eta_cav,
        "eta_cav_sigma": eta_cav_sigma,
        "s_imp_quantum_G2_MHz": s_quantum_g2 / 1e6,
        "detected_imprecision_G2_THz": b.detected_imprecision_hz / 1e12,
        "eta_d": eta_d,
        "eta_d_sigma": eta_d_sigma,
        "eta_warm": b.eta_warm,
        "eta_cryo": eta_cryo,
        "eta_cryo_sigma": eta_cryo_sigma,
        "n_add_cryo": n_add,
        "n_add_cryo_sigma": n_add_sigma,
        "n_hemt": n_hemt,
        "lambda": lambda,
        "lambda_dB": lambda_db,
        "lambda_dB_sigma": lambda_db_sigma,
        "friis_total_K": t_total,
        "mode_freq_Hz": b.mode_freq_hz,
        "xzpf_fm": xzpf * 1e15,
        "gamma_m_rad_per_s": gamma_m,
        "n_th": n_th,
        "G_over_2pi_THz_per_m": big_g_cyc / 1e12,
        "g0_over_2pi_mHz": g0_cyc * 1e3,
        "C_q": cq,
        "eta_e": eta_e,
        "eta": eta,
        "n_min": n_min,
        "S_gs_m2_per_Hz": s_gs,
        "sqrt_S_gs_fm_per_sqrtHz": s_gs.sqrt() * 1e15,
        "S_FF_ba_N2_per_Hz": s_ff,
        "S_ba_th_m2_per_Hz": s_ba_th,
        "S_ba_gs_m2_per_Hz": s_ba_gs,
        "Sgs_over_SimpC_times_Cq": s_gs / (s_impc * cq),
        "upgrade": {
            "eta_cav": upgrade.eta_cav,
            "eta_cryo": upgrade.eta_cryo,
            "eta_warm": upgrade.eta_warm,
            "eta_d": upgrade.eta_d,
            "C_q_required_for_ground_state": cq_required,
        },
        "design_route": design.map(|d| json!({
            "alpha_design": alpha,
            "F_z_model": f_model,
            "C_q_printed_form": d.printed,
            "C_q_assembled": d.assembled,
        })),
    }))
}

pub fn budget_cmd(ctx: &CommandContext) -> Result<Report> {
    let results = budget_report(&ctx.config)?;
    let path = ctx.artifact("budget.json")?;
    std::fs::write(&path, serde_json::to_string_pretty(&results)?)?;
    Ok(Report::new(
        "budget",
        &ctx.config,
        ctx.seed,
        config_echo(&ctx.config),
        results,
        vec![path.display().to_string()],
    ))
}

/// Apply the cooperativity improvement ledger.
pub fn project(ctx: &CommandContext) -> Result<Report> {
    let projection = budget::project(&ctx.config.ledger())?;
    let artifact = match ctx.format {
        OutputFormat::Json => {
            let path = ctx.artifact("projection.json")?;
            std::fs::write(&path, serde_json::to_string_pretty(&projection)?)?;
            path
        }
        OutputFormat::Csv => {
            use std::io::Write;
            let path = ctx.artifact("projection.csv")?;
            let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
            writeln!(out, "step,multiplier,cumulative_Cq")?;
            writeln!(out, "base,1,{:e}", projection.base_cq)?;
            for step in &projection.steps {
                writeln!(out, "{},{:e},{:e}", step.name, step.multiplier, step.cumulative_cq)?;
            }
            path
        }
    };
    let results = serde_json::to_value(&projection)?;
    Ok(Report::new(
        "project",
        &ctx.config,
        ctx.seed,
        config_echo(&ctx.config),
        results,
        vec![artifact.display().to_string()],
    ))
}

/// Synthesizer profile mirroring the calibrated-spectrum feature set: three
/// mechanical modes, the calibration tone, a phase-modulation tone, mains
/// harmonics and a white phase floor.
pub fn synth_profile(cfg: &RunConfig, seed: u64) -> SynthConfig {
    let chain = cfg.calibration_chain();
    let kappa = TAU * (cfg.budget.kappa_int_hz + cfg.budget.kappa_ext_hz);
    // On-resonance phase transduction of a slow cavity-frequency shift.
    let phase_per_phi0 = 4.0 * TAU * cfg.calibration.slope_hz_per_phi0 / kappa;
    let sens = cfg.budget.flux_sensitivity_phi0_per_m;
    // Representative mode set: the calibrated mode carries the optical
    // amplitude; the others are micron-scale bystanders, comfortably above
    // the designed noise floor.
    let modes = [
        (65.0, 2.0e-6, sens[0]),
        (cfg.calibration.mode_freq_hz, cfg.calibration.camera_amplitude_m, sens[1]),
        (95.0, 1.5e-6, sens[2]),
    ];
    let mut tones: Vec<SynthTone> = modes
        .iter()
        .enumerate()
        .map(|(k, &(freq, amp_m, d_phi))| SynthTone {
            freq,
            phase_amplitude: amp_m * d_phi * phase_per_phi0,
            start_phase: 0.7 * (k as f64 + 1.0),
        })
        .collect();
    tones.push(SynthTone {
        freq: chain.cal_tone_freq,
        phase_amplitude: chain.injected_flux_amplitude() * phase_per_phi0,
        start_phase: 0.1,
    });
    tones.push(SynthTone {
        freq: cfg.calibration.phase_mod_hz,
        phase_amplitude: 0.01,
        start_phase: 0.2,
    });
    for (k, mains) in [1.0, 2.0, 3.0].into_iter().enumerate() {
        tones.push(SynthTone {
            freq: mains * cfg.calibration.mains_hz,
            phase_amplitude: 2e-3 / (k as f64 + 1.0),
            start_phase: 0.3 * (k as f64 + 1.0),
        });
    }
    // Floor sized to land near the observed 102 nm/√Hz displacement floor.
    let beta_mode = tones[1].phase_amplitude;
    let floor_m2 = (102e-9f64).powi(2);
    let phase_noise_density =
        floor_m2 * beta_mode * beta_mode / cfg.calibration.camera_amplitude_m.powi(2);
    SynthConfig {
        sample_rate: 1000.0,
        duration: 120.0,
        carrier_amplitude: 1.0,
        carrier_phase: 0.0,
        tones,
        phase_noise_density,
        seed,
    }
}

/// Generate a deterministic synthetic trace file.
pub fn synth(ctx: &CommandContext, output: Option<&Path>, duration_s: f64) -> Result<Report> {
    let mut profile = synth_profile(&ctx.config, ctx.seed);
    profile.duration = duration_s;
    let trace = spectral::synth_trace(&profile)?;
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => ctx.artifact("trace.levi")?,
    };
    io::write_trace_binary(&path, &trace)?;
    let results = json!({
        "samples": trace.len(),
        "fs_Hz": trace.sample_rate,
        "duration_s": trace.duration(),
        "tones": profile.tones.iter().map(|t| json!({
            "freq_Hz": t.freq,
            "phase_amplitude_rad": t.phase_amplitude,
        })).collect::<Vec<_>>(),
        "phase_noise_density_rad2_per_Hz": profile.phase_noise_density,
    });
    Ok(Report::new(
        "synth",
        &ctx.config,
        ctx.seed,
        config_echo(&ctx.config),
        results,
        vec![path.display().to_string()],
    ))
}

/// Planted coupling of the synth profile's calibrated mode (Hz/m), for round
/// trips.
pub fn planted_coupling(cfg: &RunConfig) -> f64 {
    cfg.calibration.slope_hz_per_phi0 * cfg.budget.flux_sensitivity_phi0_per_m[1]
}
