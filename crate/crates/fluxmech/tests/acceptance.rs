//! Acceptance suite: every headline capability is checked at a pinned
//! tolerance, one pass/fail line per criterion.
//!
//! The expected values are frozen here from independent evaluation of the
//! published formulas; the library is never used as its own oracle where a
//! finite-difference or synthetic-round-trip check is available.
//!
//! One criterion is red by construction: the verbatim identity relating the
//! quantum imprecision floor to the ground-state scale and cooperativity is
//! inconsistent by a constant factor of 16 with the component formulas that
//! the other criteria pin numerically. It is asserted verbatim (and fails)
//! rather than silently rescaled; the exact relation carrying the 16 is
//! asserted alongside.

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use fluxmech::budget;
use fluxmech::cavity;
use fluxmech::commands;
use fluxmech::config::RunConfig;
use fluxmech::constants::{HBAR, MU0, PHI0, TAU};
use fluxmech::geometry::{self, GradiometricLoop, LocateOptions};
use fluxmech::mech;
use fluxmech::spectral;

fn rel_err(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

#[test]
fn c01_trap_law() {
    // Eq-oracle: sqrt(3/(2 μ0 ρ))·b evaluated independently gives
    // (39.140, 40.305, 80.111) Hz per ampere at ρ = 1.09e4 kg/m³.
    let prefactor = (3.0 / (2.0 * MU0 * 1.09e4)).sqrt();
    let frozen = [39.140, 40.305, 80.111];
    let published = [39.0, 40.0, 80.0];
    let mut detail = String::new();
    let mut pass = true;
    for i in 0..3 {
        let b = [23.5, 24.2, 48.1][i];
        let f = mech::trap_frequency(b, 1.09e4).unwrap() / TAU;
        pass &= rel_err(f, prefactor * b / TAU) < 1e-12;
        pass &= rel_err(f, frozen[i]) < 1e-3;
        pass &= rel_err(f, published[i]) < 0.02;
        detail.push_str(&format!("{f:.2}/{} ", published[i]));
    }
    report("c01-trap-law", pass, &format!("Hz per A: {detail}(tol 2%)"));
}

#[test]
fn c02_coupling_arithmetic() {
    // 0.35 MHz/√Hz over 2.2 μm/√Hz → 0.159 THz/m; ×4.6 fm → 0.732 mHz,
    // printed as 0.7 at one digit.
    let freqs: Vec<f64> = (0..300).map(|k| k as f64).collect();
    let mut ww = vec![0.0; 300];
    let mut xx = vec![0.0; 300];
    ww[140] = (0.35e6f64).powi(2);
    xx[140] = (2.2e-6f64).powi(2);
    let s_ww = spectral::SpectrumRecord {
        freqs: freqs.clone(),
        psd: ww,
        enbw: 1.0,
        units: spectral::SpectrumUnits::HzSquaredPerHz,
        power_peaks: Vec::new(),
    };
    let s_xx = spectral::SpectrumRecord {
        freqs,
        psd: xx,
        enbw: 1.0,
        units: spectral::SpectrumUnits::MetersSquaredPerHz,
        power_peaks: Vec::new(),
    };
    let est = spectral::extract_coupling(&s_ww, &s_xx, 140.0, 4.6e-15).unwrap();
    let pass = rel_err(est.big_g_cyc, 0.16e12) < 0.01
        && rel_err(est.big_g_cyc, 1.5909091e11) < 1e-5
        && rel_err(est.g0_cyc, 7.3181818e-4) < 1e-5
        && est.g0_cyc > 0.65e-3
        && est.g0_cyc < 0.75e-3;
    report(
        "c02-coupling-arithmetic",
        pass,
        &format!(
            "G/2pi = {:.4} THz/m (vs 0.16, tol 1%), g0/2pi = {:.3} mHz (rounds to 0.7)",
            est.big_g_cyc / 1e12,
            est.g0_cyc * 1e3
        ),
    );
}

#[test]
fn c03_coupling_per_slope() {
    // (70, 800, 80) Φ0/m with x_zpf = (4.6, 4.6, 3.2) fm at 1 GHz/Φ0:
    // independent evaluation gives (0.322, 3.680, 0.256) mHz.
    let d_phi = [70.0, 800.0, 80.0];
    let xzpf = [4.6e-15, 4.6e-15, 3.2e-15];
    let published = [0.33e-3, 3.8e-3, 0.25e-3];
    let frozen = [0.322e-3, 3.680e-3, 0.256e-3];
    let mut pass = true;
    let mut detail = String::new();
    for i in 0..3 {
        let g0 = geometry::assemble_g0(1e9, 1.0, d_phi[i] * PHI0, 1.0, 1.0, xzpf[i]);
        pass &= rel_err(g0, frozen[i]) < 1e-3;
        pass &= rel_err(g0, published[i]) < 0.05;
        detail.push_str(&format!("{:.2}/{:.2} ", g0 * 1e3, published[i] * 1e3));
    }
    report(
        "c03-coupling-per-slope",
        pass,
        &format!("mHz per GHz/Phi0: {detail}(tol 5%)"),
    );
}

#[test]
fn c04_imprecision_chain() {
    // κ/2π = 135 MHz, n_r = 0.05: S·(G/2π)² = κ_cyc/(16 n_r 2π) = 26.857 MHz;
    // against 0.61 THz detected, η_d = 4.40e-5.
    let g_cyc = 1.36e11;
    let s = budget::imprecision_quantum(TAU * 135e6, 0.05, TAU * g_cyc, TAU * 140.0).unwrap();
    let product = s * g_cyc * g_cyc;
    let eta_d = budget::detection_efficiency(product, 0.61e12).unwrap();
    let pass = rel_err(product, 26.857e6) < 1e-3
        && rel_err(product, 26.9e6) < 0.01
        && (product - 26e6).abs() < 13e6
        && rel_err(eta_d, 4.4e-5) < 0.01
        && (eta_d - 4.3e-5).abs() < 2.1e-5;
    report(
        "c04-imprecision-chain",
        pass,
        &format!(
            "S·(G/2pi)^2 = {:.2} MHz (26±13), eta_d = {eta_d:.3e} (4.3±2.1e-5)",
            product / 1e6
        ),
    );
}

#[test]
fn c05_efficiency_decomposition() {
    let eta_cav = budget::cavity_efficiency(TAU * 110e6, TAU * 25e6).unwrap();
    let eta_cryo = budget::residual_efficiency(4.3e-5, 0.19, 1.3e-2).unwrap();
    let lambda_db = 10.0 * budget::invert_loss(12.0, 28.0).unwrap().log10();
    let upgrade = budget::budget_assemble(0.5, 0.81, 0.99).unwrap();
    let eta_e_req = (1.0 / 9.0) / upgrade.eta_d;
    let cq_req = eta_e_req / (1.0 - eta_e_req);
    let pass = rel_err(eta_cav, 0.185) < 0.05
        && rel_err(eta_cryo, 1.74e-2) < 0.05
        && rel_err(lambda_db, -3.58) < 0.05
        && (lambda_db + 3.5).abs() < 2.4
        && rel_err(upgrade.eta_d, 0.40) < 0.05
        && rel_err(cq_req, 0.38) < 0.05;
    report(
        "c05-efficiency-decomposition",
        pass,
        &format!(
            "eta_cav {eta_cav:.3}, eta_cryo {eta_cryo:.3e}, lambda {lambda_db:.2} dB, upgrade eta_d {:.3}, Cq_req {cq_req:.3} (tol 5%)",
            upgrade.eta_d
        ),
    );
}

#[test]
fn c06_ground_state_scale() {
    // Independent evaluation: sqrt(4 x_zpf²/(Γ_m n_th)) = 0.7210 fm/√Hz for
    // the 150 Hz, 15 mK, Q = 2.6e7, 5.7 μg mode — inside 20% of the published
    // 0.8 fm scale.
    let omega = TAU * 150.0;
    let xzpf = mech::zero_point_motion(5.7e-9, omega).unwrap();
    let n_th = mech::thermal_occupation(15e-3, omega);
    let s_gs = budget::ground_state_density(xzpf, omega / 2.6e7, n_th);
    let root_fm = s_gs.sqrt() * 1e15;
    let pass = rel_err(root_fm, 0.7210) < 1e-3 && rel_err(root_fm, 0.8) < 0.20;
    report(
        "c06-ground-state-scale",
        pass,
        &format!("sqrt(S_gs) = {root_fm:.4} fm/sqrtHz vs 0.8 (tol 20%)"),
    );
}

#[test]
fn c07_cooperativity_and_ledger() {
    // Assembled C_q at the weak-probe operating point, within one order of
    // magnitude of 5e-17; the six-factor ledger reaches 5.7e4 > 1e4.
    let omega_m = TAU * 140.0;
    let g0 = TAU * 1.7e9 * 80.0 * mech::zero_point_motion(5.7e-9, omega_m).unwrap();
    let cq = budget::cooperativity(
        0.05,
        g0,
        TAU * 135e6,
        omega_m / 2.6e7,
        mech::thermal_occupation(15e-3, omega_m),
    );
    let projection = budget::project(&RunConfig::default().ledger()).unwrap();
    let pass = rel_err(cq, 2.397e-17) < 1e-3
        && cq > 5e-18
        && cq < 5e-16
        && rel_err(projection.projected_cq, 5.7e4) < 1e-9
        && projection.projected_cq > 1e4;
    report(
        "c07-cooperativity",
        pass,
        &format!(
            "C_q = {cq:.3e} (within 10x of 5e-17), ledger -> {:.2e} (> 1e4)",
            projection.projected_cq
        ),
    );
}

#[test]
fn c08_enbw() {
    // 120 s record, tenth-length Hamming segments: ENBW = 0.11357 Hz.
    let mut rng = StdRng::seed_from_u64(8);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let x: Vec<f64> = (0..120_000).map(|_| normal.sample(&mut rng)).collect();
    let spec = spectral::welch_psd(&x, 1000.0, 12_000).unwrap();
    let pass = rel_err(spec.enbw, 0.1136) < 0.01;
    report(
        "c08-enbw",
        pass,
        &format!("ENBW = {:.5} Hz vs 0.1136 (tol 1%)", spec.enbw),
    );
}

#[test]
fn c09_flux_calibration_chain() {
    // 21.7 mV/V against 467 mV/Φ0 gives 46.47 mΦ0/V.
    let chain = spectral::CalibrationChain {
        ext_coil_periodicity: 0.467,
        cal_coil_ratio: 0.0217,
        cal_tone_freq: 223.0,
        cal_tone_amplitude: 1.0,
    };
    let value = chain.cal_coil_flux();
    let pass = rel_err(value, 46.5e-3) < 0.01 && rel_err(value, 4.64668e-2) < 1e-5;
    report(
        "c09-flux-calibration-chain",
        pass,
        &format!("{:.4} mPhi0/V vs 46.5 (tol 1%)", value * 1e3),
    );
}

fn experiment_shape() -> GradiometricLoop {
    GradiometricLoop::new(
        150e-6,
        158e-6,
        std::f64::consts::FRAC_PI_4,
        [0.0; 3],
        [1, -1],
        64,
    )
    .unwrap()
}

#[test]
fn c10a_gradiometric_rejection() {
    let mut rng = StdRng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let shape = experiment_shape().with_offset([
            rng.gen_range(-5e-4..5e-4),
            rng.gen_range(-5e-4..5e-4),
            rng.gen_range(1e-4..5e-4),
        ]);
        let b0 = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let flux = geometry::flux_of_potential(&shape, |r| {
            [
                0.5 * (b0[1] * r[2] - b0[2] * r[1]),
                0.5 * (b0[2] * r[0] - b0[0] * r[2]),
                0.5 * (b0[0] * r[1] - b0[1] * r[0]),
            ]
        });
        let norm_b = (b0[0] * b0[0] + b0[1] * b0[1] + b0[2] * b0[2]).sqrt();
        worst = worst.max(flux.abs() / (norm_b * shape.square_side * shape.square_side));
    }
    report(
        "c10a-gradiometric-rejection",
        worst <= 1e-12,
        &format!("worst |flux|/(B·area) = {worst:.2e} (tol 1e-12)"),
    );
}

#[test]
fn c10b_sensitivity_fd_oracle() {
    // Central finite differences of the quadrature flux are the oracle for
    // the analytic derivative-dipole sensitivity.
    let b = [39.0, 40.0, -80.0];
    let radius = 50e-6;
    let mut rng = StdRng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let shape = experiment_shape().with_offset([
            rng.gen_range(-5e-4..5e-4),
            rng.gen_range(-5e-4..5e-4),
            rng.gen_range(1.5e-4..5e-4),
        ]);
        let sens = geometry::flux_sensitivity(&shape, b, radius, 1.0).unwrap();
        for i in 0..3 {
            let h = 1e-8;
            let mut hi = [0.0; 3];
            hi[i] = h;
            let mut lo = [0.0; 3];
            lo[i] = -h;
            let fd = (geometry::loop_flux(&shape, b, radius, hi).unwrap()
                - geometry::loop_flux(&shape, b, radius, lo).unwrap())
                / (2.0 * h);
            worst = worst.max(rel_err(sens.d_phi_pul[i].unwrap(), fd));
        }
    }
    report(
        "c10b-sensitivity-fd-oracle",
        worst <= 1e-6,
        &format!("worst relative error {worst:.2e} over 10 placements (tol 1e-6)"),
    );
}

#[test]
fn c10c_locate_round_trip() {
    let b = [39.0, 40.0, -80.0];
    let radius = 50e-6;
    let shape = experiment_shape();
    let truth = [450e-6, 250e-6, 250e-6];
    let truth_alpha = 5e-3;
    let sens =
        geometry::flux_sensitivity(&shape.with_offset(truth), b, radius, truth_alpha).unwrap();
    let measured = [
        sens.d_phi_squid[0].unwrap().abs() / PHI0,
        sens.d_phi_squid[1].unwrap().abs() / PHI0,
        sens.d_phi_squid[2].unwrap().abs() / PHI0,
    ];
    let search = geometry::locate_pickup(
        measured,
        b,
        radius,
        &shape,
        truth[2],
        &LocateOptions::default(),
    )
    .unwrap();
    let hit = search.solutions.iter().find(|s| {
        let direct = (0..3)
            .map(|i| (s.offset[i] - truth[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let image = ((s.offset[0] + truth[0]).powi(2)
            + (s.offset[1] + truth[1]).powi(2)
            + (s.offset[2] - truth[2]).powi(2))
        .sqrt();
        direct.min(image) < 5e-6 && rel_err(s.alpha, truth_alpha) < 0.02
    });
    let paired = search
        .solutions
        .iter()
        .all(|s| s.symmetry_partner.is_some());
    let pass = hit.is_some() && paired && search.solutions.len() % 2 == 0;
    let detail = match hit {
        Some(sol) => format!(
            "recovered ({:.1}, {:.1}, {:.1}) um / alpha {:.3e} among {} paired solutions (tol 5 um / 2%)",
            sol.offset[0] * 1e6,
            sol.offset[1] * 1e6,
            sol.offset[2] * 1e6,
            sol.alpha,
            search.solutions.len()
        ),
        None => format!("planted placement missing from {} solutions", search.solutions.len()),
    };
    report("c10c-locate-round-trip", pass, &detail);
}

#[test]
fn c10d_s21_fit_coverage() {
    let truth = [TAU * 4.44e9, TAU * 5e6, TAU * 18e6];
    let noise = Normal::new(0.0, 0.01).unwrap();
    let seeds = 100;
    let mut covered = 0;
    for seed in 0..seeds {
        let mut rng = StdRng::seed_from_u64(1000 + seed);
        let trace: Vec<(f64, Complex64)> = (0..201)
            .map(|i| {
                let omega = truth[0] - TAU * 100e6 + TAU * 1e6 * i as f64;
                let s = cavity::s21_model(omega, truth[0], truth[1], truth[2])
                    + Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng));
                (omega, s)
            })
            .collect();
        if let Ok(fit) = cavity::fit_s21(&trace, None) {
            let params = [fit.omega_r, fit.kappa_int, fit.kappa_ext];
            if (0..3).all(|i| (params[i] - truth[i]).abs() <= 3.0 * fit.std_errors[i]) {
                covered += 1;
            }
        }
    }
    let coverage = covered as f64 / seeds as f64;
    report(
        "c10d-s21-fit-coverage",
        coverage >= 0.95,
        &format!("3-sigma coverage {covered}/{seeds} (needs >= 95%)"),
    );
}

#[test]
fn c10e_pipeline_round_trip() {
    // Plant the coupling through the synth profile, run the spectral chain,
    // and recover the coupling and the imprecision floor.
    let cfg = RunConfig::default();
    let mut profile = commands::synth_profile(&cfg, 77);
    profile.duration = 480.0;
    let trace = spectral::synth_trace(&profile).unwrap();
    let voltage = spectral::demodulated_voltage(&trace, cfg.calibration.mix_freq_hz).unwrap();
    let raw = spectral::welch_psd(&voltage, trace.sample_rate, voltage.len() / 10).unwrap();
    let flux = spectral::calibrate_flux_axis(&raw, &cfg.calibration_chain()).unwrap();
    let freq = spectral::flux_to_frequency(&flux, cfg.calibration.slope_hz_per_phi0).unwrap();
    let disp = spectral::calibrate_displacement(
        &raw,
        cfg.calibration.camera_amplitude_m,
        cfg.calibration.mode_freq_hz,
    )
    .unwrap();
    let est =
        spectral::extract_coupling(&freq, &disp, cfg.calibration.mode_freq_hz, 1.0).unwrap();
    let planted = commands::planted_coupling(&cfg);
    let rules = spectral::ExclusionRules {
        tones: vec![
            cfg.calibration.cal_tone_hz,
            cfg.calibration.phase_mod_hz,
            cfg.calibration.mode_freq_hz,
        ],
        ..Default::default()
    };
    let floor = spectral::imprecision_floor(&disp, (380.0, 495.0), &rules).unwrap();
    let planted_floor = (102e-9f64).powi(2);
    let pass = rel_err(est.big_g_cyc, planted) < 0.02 && rel_err(floor, planted_floor) < 0.05;
    report(
        "c10e-pipeline-round-trip",
        pass,
        &format!(
            "G {:.4e} vs planted {planted:.4e} Hz/m (tol 2%), floor {:.1} vs 102 nm/sqrtHz (tol 5%)",
            est.big_g_cyc,
            floor.sqrt() * 1e9
        ),
    );
}

#[test]
fn c_note_field_model_order_of_magnitude() {
    // The absolute geometric factors rest on an image-dipole model, so they
    // are held to order-of-magnitude agreement with the measured
    // (5.7, 67, 6.1)e-4 set, and the model must reproduce the z-coupling
    // valley at the located placement and the point-symmetry structure.
    let b = [39.0, 40.0, -80.0];
    let shape = experiment_shape();
    let placement = [450e-6, 250e-6, 250e-6];
    let sens = geometry::flux_sensitivity(&shape.with_offset(placement), b, 50e-6, 1.0).unwrap();
    let published = [5.7e-4, 67e-4, 6.1e-4];
    let mut pass = true;
    let mut detail = String::new();
    for i in 0..3 {
        let f = sens.f_factor[i].unwrap().abs();
        pass &= f > published[i] / 10.0 && f < published[i] * 10.0;
        detail.push_str(&format!("{:.1e}/{:.1e} ", f, published[i]));
    }
    // Valley: the signed z-factor changes sign within one particle radius of
    // the placement and is tiny there.
    let f_z = |dx: f64| {
        geometry::flux_sensitivity(&shape.with_offset([dx, 250e-6, 250e-6]), b, 50e-6, 1.0)
            .unwrap()
            .f_factor[2]
            .unwrap()
    };
    let mut crossing = false;
    let mut prev = f_z(400e-6);
    for i in 1..=40 {
        let val = f_z(400e-6 + 100e-6 * i as f64 / 40.0);
        if prev.signum() != val.signum() {
            crossing = true;
            break;
        }
        prev = val;
    }
    pass &= crossing;
    // Point symmetry of the magnitudes.
    let image =
        geometry::flux_sensitivity(&shape.with_offset([-450e-6, -250e-6, 250e-6]), b, 50e-6, 1.0)
            .unwrap();
    for i in 0..3 {
        pass &= rel_err(
            image.d_phi_pul[i].unwrap().abs(),
            sens.d_phi_pul[i].unwrap().abs(),
        ) < 1e-9;
    }
    report(
        "c-note-field-model",
        pass,
        &format!("|F| model/measured: {detail}(order-of-magnitude only); z-valley and point symmetry present"),
    );
}

#[test]
fn c10f_imprecision_backaction_product() {
    // S_imp·S_FF = (ħ²/4)(1 + 4Ω²/κ²) for any parameters.
    let mut rng = StdRng::seed_from_u64(15);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let kappa = TAU * rng.gen_range(1e6..1e9);
        let n_r = rng.gen_range(1e-3..100.0);
        let big_g = TAU * rng.gen_range(1e8..1e13);
        let omega = rng.gen_range(0.0..kappa);
        let s_imp = budget::imprecision_quantum(kappa, n_r, big_g, omega).unwrap();
        let s_ff = budget::back_action_force_density(big_g, n_r, kappa);
        let expected = HBAR * HBAR / 4.0 * (1.0 + 4.0 * omega * omega / (kappa * kappa));
        worst = worst.max(rel_err(s_imp * s_ff, expected));
    }
    report(
        "c10f-imprecision-backaction-product",
        worst <= 1e-9,
        &format!("worst relative error {worst:.2e} (tol 1e-9)"),
    );
}

/// The identity S_imp = S_gs/C_q quoted for this readout formalism cannot
/// hold together with the component formulas pinned by c04, c06 and c07: they
/// imply S_gs = 16·C_q·S_imp exactly (the exact relation is asserted below).
/// The verbatim identity is asserted here anyway and is expected to stay red;
/// rescaling one of the component formulas to force it green would break the
/// numerically pinned criteria instead.
#[test]
fn c10f_imprecision_identity_verbatim() {
    let omega_m = TAU * 140.0;
    let mass = 5.7e-9;
    let kappa = TAU * 135e6;
    let n_r = 0.05;
    let g_cyc = 1.36e11;
    let xzpf = mech::zero_point_motion(mass, omega_m).unwrap();
    let gamma_m = omega_m / 2.6e7;
    let n_th = mech::thermal_occupation(15e-3, omega_m);
    let cq = budget::cooperativity(n_r, TAU * g_cyc * xzpf, kappa, gamma_m, n_th);
    let s_imp = budget::imprecision_quantum(kappa, n_r, TAU * g_cyc, 0.0).unwrap();
    let s_gs = budget::ground_state_density(xzpf, gamma_m, n_th);

    // Exact relation of the implemented formulas.
    assert!(
        rel_err(s_gs, 16.0 * cq * s_imp) < 1e-9,
        "exact relation S_gs = 16 C_q S_imp violated"
    );

    let deviation = rel_err(s_imp, s_gs / cq);
    report(
        "c10f-imprecision-identity-verbatim",
        deviation <= 1e-9,
        &format!(
            "S_imp vs S_gs/C_q deviates by {deviation:.6} (the component formulas imply exactly S_gs = 16 C_q S_imp; see README)"
        ),
    );
}
