//! Run configuration: a sectioned key-value text format with explicit unit
//! suffixes in the key names (`kappa_ext_MHz = 18`), JSON accepted as an
//! alternative, and a built-in default profile carrying the measured device
//! parameters. Unknown keys are rejected; a known field with the wrong unit
//! suffix is reported as a unit mismatch.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;

use crate::budget::LedgerFactor;
use crate::error::{Error, Result};
use crate::geometry::{GradiometricLoop, TransformerParams};
use crate::mech::{SignConvention, SphereParams, TrapConfig};
use crate::spectral::CalibrationChain;

pub const SCHEMA_VERSION: u32 = 1;

/// All stored values are SI; the field names carry the unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema_version: u32,
    pub sphere: SphereSection,
    pub trap: TrapSection,
    #[serde(rename = "loop")]
    pub pickup: LoopSection,
    pub transformer: TransformerSection,
    pub cavity: CavitySection,
    pub calibration: CalibrationSection,
    pub budget: BudgetSection,
    pub ledger: LedgerSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphereSection {
    pub radius_m: f64,
    pub density_kg_per_m3: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrapSection {
    pub gradient_per_ampere_t_per_m: [f64; 3],
    pub current_a: f64,
    pub quality: f64,
    pub temperature_k: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopSection {
    pub square_side_m: f64,
    pub center_separation_m: f64,
    pub rotation_rad: f64,
    pub offset_m: [f64; 3],
    pub segments_per_side: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformerSection {
    pub l_squid_h: f64,
    pub l_input_h: f64,
    pub l_twisted_h: f64,
    pub l_pickup_h: f64,
    pub coupling: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CavitySection {
    pub sweet_spot_hz: f64,
    pub kappa_int_hz: f64,
    pub kappa_ext_hz: f64,
    pub critical_current_a: f64,
    pub beta_screening: f64,
    pub l_resonator_h: f64,
    pub c_resonator_f: f64,
    pub effective_area_m2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationSection {
    pub ext_coil_v_per_phi0: f64,
    pub cal_coil_v_per_v: f64,
    pub cal_tone_hz: f64,
    pub cal_tone_v: f64,
    pub phase_mod_hz: f64,
    pub mains_hz: f64,
    pub mix_freq_hz: f64,
    pub camera_amplitude_m: f64,
    pub mode_freq_hz: f64,
    /// Flux responsivity at the calibration working point (Hz/Φ0).
    pub slope_hz_per_phi0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetSection {
    pub kappa_int_hz: f64,
    pub kappa_int_sigma_hz: f64,
    pub kappa_ext_hz: f64,
    pub kappa_ext_sigma_hz: f64,
    pub n_r: f64,
    pub n_r_sigma: f64,
    pub slope_hz_per_phi0: f64,
    pub readout_freq_hz: f64,
    /// Measured S_imp·(G/2π)² (Hz).
    pub detected_imprecision_hz: f64,
    pub detected_imprecision_sigma_hz: f64,
    pub eta_warm: f64,
    pub hemt_temperature_k: f64,
    pub hemt_gain_db: f64,
    pub warm_temperature_k: f64,
    pub warm_gain_db: f64,
    pub mode_freq_hz: f64,
    pub flux_sensitivity_phi0_per_m: [f64; 3],
    pub upgrade_eta_cav: f64,
    pub upgrade_eta_cryo: f64,
    pub upgrade_eta_warm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerSection {
    pub base_cq: f64,
    pub factors: Vec<LedgerFactor>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            sphere: SphereSection {
                radius_m: 50e-6,
                density_kg_per_m3: 1.09e4,
            },
            trap: TrapSection {
                gradient_per_ampere_t_per_m: [23.5, 24.2, 48.1],
                // Current of the coupling-scan operating point, b ≈ (39, 40, 80) T/m.
                current_a: 1.66,
                quality: 2.6e7,
                temperature_k: 15e-3,
            },
            pickup: LoopSection {
                square_side_m: 150e-6,
                center_separation_m: 158e-6,
                rotation_rad: std::f64::consts::FRAC_PI_4,
                offset_m: [450e-6, 250e-6, 250e-6],
                segments_per_side: 64,
            },
            transformer: TransformerSection {
                l_squid_h: 0.12e-9,
                l_input_h: 20.5e-9,
                l_twisted_h: 100e-9,
                l_pickup_h: 0.9e-9,
                coupling: 0.1,
            },
            cavity: CavitySection {
                sweet_spot_hz: 4.44e9,
                kappa_int_hz: 5e6,
                kappa_ext_hz: 18e6,
                critical_current_a: 0.5e-6,
                beta_screening: 0.06,
                l_resonator_h: 1.4e-9,
                c_resonator_f: 310e-15,
                effective_area_m2: 56e-6 * 56e-6,
            },
            calibration: CalibrationSection {
                ext_coil_v_per_phi0: 0.467,
                cal_coil_v_per_v: 0.0217,
                cal_tone_hz: 223.0,
                cal_tone_v: 1.0,
                phase_mod_hz: 133.0,
                mains_hz: 50.0,
                mix_freq_hz: 400.0,
                camera_amplitude_m: 740e-9,
                mode_freq_hz: 140.0,
                slope_hz_per_phi0: 188e6,
            },
            budget: BudgetSection {
                kappa_int_hz: 110e6,
                kappa_int_sigma_hz: 13e6,
                kappa_ext_hz: 25e6,
                kappa_ext_sigma_hz: 5e6,
                n_r: 0.05,
                n_r_sigma: 0.026,
                slope_hz_per_phi0: 1.7e9,
                readout_freq_hz: 4.3e9,
                detected_imprecision_hz: 0.61e12,
                detected_imprecision_sigma_hz: 0.02e12,
                eta_warm: 1.3e-2,
                hemt_temperature_k: 2.5,
                hemt_gain_db: 42.0,
                warm_temperature_k: 300.0,
                warm_gain_db: 30.0,
                mode_freq_hz: 140.0,
                flux_sensitivity_phi0_per_m: [70.0, 800.0, 80.0],
                upgrade_eta_cav: 0.5,
                upgrade_eta_cryo: 0.81,
                upgrade_eta_warm: 0.99,
            },
            ledger: LedgerSection {
                base_cq: 5e-17,
                factors: default_ledger_factors(),
            },
        }
    }
}

fn default_ledger_factors() -> Vec<LedgerFactor> {
    [
        ("readout", 200.0, "readout photon number raised to n_r = 10"),
        ("positioning", 4e10, "pickup repositioned towards the sphere"),
        ("transformer", 2.5e3, "full-chip transformer, better input coupling"),
        ("slope", 10.0, "flux responsivity at its maximum"),
        ("linewidth", 300.0, "critically coupled narrow-linewidth cavity"),
        ("current_switch", 19.0, "persistent current switch, higher gradient"),
    ]
    .into_iter()
    .map(|(name, multiplier, note)| LedgerFactor {
        name: name.into(),
        multiplier,
        note: note.into(),
    })
    .collect()
}

impl RunConfig {
    pub fn sphere(&self) -> Result<SphereParams> {
        SphereParams::new(self.sphere.radius_m, self.sphere.density_kg_per_m3)
    }

    pub fn trap(&self) -> Result<TrapConfig> {
        TrapConfig::new(
            self.trap.gradient_per_ampere_t_per_m,
            self.trap.current_a,
            self.trap.quality,
            self.trap.temperature_k,
            SignConvention::ZNegativeSum,
        )
    }

    pub fn pickup_loop(&self) -> Result<GradiometricLoop> {
        GradiometricLoop::new(
            self.pickup.square_side_m,
            self.pickup.center_separation_m,
            self.pickup.rotation_rad,
            self.pickup.offset_m,
            [1, -1],
            self.pickup.segments_per_side,
        )
    }

    pub fn transformer(&self) -> Result<TransformerParams> {
        TransformerParams::new(
            self.transformer.l_squid_h,
            self.transformer.l_input_h,
            self.transformer.l_twisted_h,
            self.transformer.l_pickup_h,
            self.transformer.coupling,
        )
    }

    pub fn calibration_chain(&self) -> CalibrationChain {
        CalibrationChain {
            ext_coil_periodicity: self.calibration.ext_coil_v_per_phi0,
            cal_coil_ratio: self.calibration.cal_coil_v_per_v,
            cal_tone_freq: self.calibration.cal_tone_hz,
            cal_tone_amplitude: self.calibration.cal_tone_v,
        }
    }

    pub fn ledger(&self) -> crate::budget::ProjectionLedger {
        crate::budget::ProjectionLedger {
            base_cq: self.ledger.base_cq,
            factors: self.ledger.factors.clone(),
        }
    }

    /// Canonical serialized form used for the provenance hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Field descriptor: full key with unit suffix, bare name, SI scale, arity.
struct FieldSpec {
    key: &'static str,
    base: &'static str,
    scale: f64,
    arity: usize,
}

const fn field(key: &'static str, base: &'static str, scale: f64, arity: usize) -> FieldSpec {
    FieldSpec {
        key,
        base,
        scale,
        arity,
    }
}

fn section_fields(section: &str) -> Option<&'static [FieldSpec]> {
    const SPHERE: &[FieldSpec] = &[
        field("radius_um", "radius", 1e-6, 1),
        field("density_kg_m3", "density", 1.0, 1),
    ];
    const TRAP: &[FieldSpec] = &[
        field("gradient_per_ampere_T_m", "gradient_per_ampere", 1.0, 3),
        field("current_A", "current", 1.0, 1),
        field("quality", "quality", 1.0, 1),
        field("temperature_mK", "temperature", 1e-3, 1),
    ];
    const LOOP: &[FieldSpec] = &[
        field("square_side_um", "square_side", 1e-6, 1),
        field("center_separation_um", "center_separation", 1e-6, 1),
        field("rotation_deg", "rotation", std::f64::consts::PI / 180.0, 1),
        field("offset_um", "offset", 1e-6, 3),
        field("segments_per_side", "segments_per_side", 1.0, 1),
    ];
    const TRANSFORMER: &[FieldSpec] = &[
        field("l_squid_nH", "l_squid", 1e-9, 1),
        field("l_input_nH", "l_input", 1e-9, 1),
        field("l_twisted_nH", "l_twisted", 1e-9, 1),
        field("l_pickup_nH", "l_pickup", 1e-9, 1),
        field("coupling", "coupling", 1.0, 1),
    ];
    const CAVITY: &[FieldSpec] = &[
        field("sweet_spot_GHz", "sweet_spot", 1e9, 1),
        field("kappa_int_MHz", "kappa_int", 1e6, 1),
        field("kappa_ext_MHz", "kappa_ext", 1e6, 1),
        field("critical_current_uA", "critical_current", 1e-6, 1),
        field("beta_screening", "beta_screening", 1.0, 1),
        field("l_resonator_nH", "l_resonator", 1e-9, 1),
        field("c_resonator_fF", "c_resonator", 1e-15, 1),
        field("effective_area_um2", "effective_area", 1e-12, 1),
    ];
    const CALIBRATION: &[FieldSpec] = &[
        field("ext_coil_mV_per_Phi0", "ext_coil", 1e-3, 1),
        field("cal_coil_mV_per_V", "cal_coil", 1e-3, 1),
        field("cal_tone_Hz", "cal_tone", 1.0, 1),
        field("cal_tone_amplitude_V", "cal_tone_amplitude", 1.0, 1),
        field("phase_mod_Hz", "phase_mod", 1.0, 1),
        field("mains_Hz", "mains", 1.0, 1),
        field("mix_freq_Hz", "mix_freq", 1.0, 1),
        field("camera_amplitude_nm", "camera_amplitude", 1e-9, 1),
        field("mode_freq_Hz", "mode_freq", 1.0, 1),
        field("slope_MHz_per_Phi0", "slope", 1e6, 1),
    ];
    const BUDGET: &[FieldSpec] = &[
        field("kappa_int_MHz", "kappa_int", 1e6, 1),
        field("kappa_int_sigma_MHz", "kappa_int_sigma", 1e6, 1),
        field("kappa_ext_MHz", "kappa_ext", 1e6, 1),
        field("kappa_ext_sigma_MHz", "kappa_ext_sigma", 1e6, 1),
        field("n_r", "n_r", 1.0, 1),
        field("n_r_sigma", "n_r_sigma", 1.0, 1),
        field("slope_GHz_per_Phi0", "slope", 1e9, 1),
        field("readout_freq_GHz", "readout_freq", 1e9, 1),
        field("detected_imprecision_THz", "detected_imprecision", 1e12, 1),
        field(
            "detected_imprecision_sigma_THz",
            "detected_imprecision_sigma",
            1e12,
            1,
        ),
        field("eta_warm", "eta_warm", 1.0, 1),
        field("hemt_temperature_K", "hemt_temperature", 1.0, 1),
        field("hemt_gain_dB", "hemt_gain", 1.0, 1),
        field("warm_temperature_K", "warm_temperature", 1.0, 1),
        field("warm_gain_dB", "warm_gain", 1.0, 1),
        field("mode_freq_Hz", "mode_freq", 1.0, 1),
        field("flux_sensitivity_Phi0_m", "flux_sensitivity", 1.0, 3),
        field("upgrade_eta_cav", "upgrade_eta_cav", 1.0, 1),
        field("upgrade_eta_cryo", "upgrade_eta_cryo", 1.0, 1),
        field("upgrade_eta_warm", "upgrade_eta_warm", 1.0, 1),
    ];
    const LEDGER: &[FieldSpec] = &[field("base_cq", "base_cq", 1.0, 1)];
    match section {
        "sphere" => Some(SPHERE),
        "trap" => Some(TRAP),
        "loop" => Some(LOOP),
        "transformer" => Some(TRANSFORMER),
        "cavity" => Some(CAVITY),
        "calibration" => Some(CALIBRATION),
        "budget" => Some(BUDGET),
        "ledger" => Some(LEDGER),
        _ => None,
    }
}

struct Assignment<'a> {
    section: &'a str,
    key: &'a str,
    values: Vec<f64>,
    line: usize,
    column: usize,
}

impl RunConfig {
    fn apply(&mut self, a: &Assignment, ledger_touched: &mut bool) -> Result<()> {
        if a.section == "meta" || a.section.is_empty() {
            if a.key == "schema_version" {
                self.schema_version = require_one(a)? as u32;
                return Ok(());
            }
            return Err(unknown_or_unit(a));
        }
        if a.section == "ledger" {
            if let Some(name) = a.key.strip_prefix("factor_") {
                if !*ledger_touched {
                    self.ledger.factors.clear();
                    *ledger_touched = true;
                }
                self.ledger.factors.push(LedgerFactor {
                    name: name.to_string(),
                    multiplier: require_one(a)?,
                    note: "from config".into(),
                });
                return Ok(());
            }
            if a.key == "base_cq" {
                self.ledger.base_cq = require_one(a)?;
                return Ok(());
            }
            return Err(unknown_or_unit(a));
        }

        let Some(fields) = section_fields(a.section) else {
            return Err(Error::UnknownKey {
                path: a.section.to_string(),
            });
        };
        let Some(spec) = fields.iter().find(|f| f.key == a.key) else {
            return Err(unknown_or_unit(a));
        };
        if a.values.len() != spec.arity {
            return Err(Error::ConfigParse {
                line: a.line,
                column: a.column,
                msg: format!(
                    "{}.{} expects {} value(s), got {}",
                    a.section,
                    a.key,
                    spec.arity,
                    a.values.len()
                ),
            });
        }
        let scaled: Vec<f64> = a.values.iter().map(|v| v * spec.scale).collect();
        self.store(a.section, spec.key, &scaled);
        Ok(())
    }

    fn store(&mut self, section: &str, key: &str, v: &[f64]) {
        match (section, key) {
            ("sphere", "radius_um") => self.sphere.radius_m = v[0],
            ("sphere", "density_kg_m3") => self.sphere.density_kg_per_m3 = v[0],
            ("trap", "gradient_per_ampere_T_m") => {
                self.trap.gradient_per_ampere_t_per_m = [v[0], v[1], v[2]]
            }
            ("trap", "current_A") => self.trap.current_a = v[0],
            ("trap", "quality") => self.trap.quality = v[0],
            ("trap", "temperature_mK") => self.trap.temperature_k = v[0],
            ("loop", "square_side_um") => self.pickup.square_side_m = v[0],
            ("loop", "center_separation_um") => self.pickup.center_separation_m = v[0],
            ("loop", "rotation_deg") => self.pickup.rotation_rad = v[0],
            ("loop", "offset_um") => self.pickup.offset_m = [v[0], v[1], v[2]],
            ("loop", "segments_per_side") => self.pickup.segments_per_side = v[0] as usize,
            ("transformer", "l_squid_nH") => self.transformer.l_squid_h = v[0],
            ("transformer", "l_input_nH") => self.transformer.l_input_h = v[0],
            ("transformer", "l_twisted_nH") => self.transformer.l_twisted_h = v[0],
            ("transformer", "l_pickup_nH") => self.transformer.l_pickup_h = v[0],
            ("transformer", "coupling") => self.transformer.coupling = v[0],
            ("cavity", "sweet_spot_GHz") => self.cavity.sweet_spot_hz = v[0],
            ("cavity", "kappa_int_MHz") => self.cavity.kappa_int_hz = v[0],
            ("cavity", "kappa_ext_MHz") => self.cavity.kappa_ext_hz = v[0],
            ("cavity", "critical_current_uA") => self.cavity.critical_current_a = v[0],
            ("cavity", "beta_screening") => self.cavity.beta_screening = v[0],
            ("cavity", "l_resonator_nH") => self.cavity.l_resonator_h = v[0],
            ("cavity", "c_resonator_fF") => self.cavity.c_resonator_f = v[0],
            ("cavity", "effective_area_um2") => self.cavity.effective_area_m2 = v[0],
            ("calibration", "ext_coil_mV_per_Phi0") => {
                self.calibration.ext_coil_v_per_phi0 = v[0]
            }
            ("calibration", "cal_coil_mV_per_V") => self.calibration.cal_coil_v_per_v = v[0],
            ("calibration", "cal_tone_Hz") => self.calibration.cal_tone_hz = v[0],
            ("calibration", "cal_tone_amplitude_V") => self.calibration.cal_tone_v = v[0],
            ("calibration", "phase_mod_Hz") => self.calibration.phase_mod_hz = v[0],
            ("calibration", "mains_Hz") => self.calibration.mains_hz = v[0],
            ("calibration", "mix_freq_Hz") => self.calibration.mix_freq_hz = v[0],
            ("calibration", "camera_amplitude_nm") => self.calibration.camera_amplitude_m = v[0],
            ("calibration", "mode_freq_Hz") => self.calibration.mode_freq_hz = v[0],
            ("calibration", "slope_MHz_per_Phi0") => self.calibration.slope_hz_per_phi0 = v[0],
            ("budget", "kappa_int_MHz") => self.budget.kappa_int_hz = v[0],
            ("budget", "kappa_int_sigma_MHz") => self.budget.kappa_int_sigma_hz = v[0],
            ("budget", "kappa_ext_MHz") => self.budget.kappa_ext_hz = v[0],
            ("budget", "kappa_ext_sigma_MHz") => self.budget.kappa_ext_sigma_hz = v[0],
            ("budget", "n_r") => self.budget.n_r = v[0],
            ("budget", "n_r_sigma") => self.budget.n_r_sigma = v[0],
            ("budget", "slope_GHz_per_Phi0") => self.budget.slope_hz_per_phi0 = v[0],
            ("budget", "readout_freq_GHz") => self.budget.readout_freq_hz = v[0],
            ("budget", "detected_imprecision_THz") => self.budget.detected_imprecision_hz = v[0],
            ("budget", "detected_imprecision_sigma_THz") => {
                self.budget.detected_imprecision_sigma_hz = v[0]
            }
            ("budget", "eta_warm") => self.budget.eta_warm = v[0],
            ("budget", "hemt_temperature_K") => self.budget.hemt_temperature_k = v[0],
            ("budget", "hemt_gain_dB") => self.budget.hemt_gain_db = v[0],
            ("budget", "warm_temperature_K") => self.budget.warm_temperature_k = v[0],
            ("budget", "warm_gain_dB") => self.budget.warm_gain_db = v[0],
            ("budget", "mode_freq_Hz") => self.budget.mode_freq_hz = v[0],
            ("budget", "flux_sensitivity_Phi0_m") => {
                self.budget.flux_sensitivity_phi0_per_m = [v[0], v[1], v[2]]
            }
            ("budget", "upgrade_eta_cav") => self.budget.upgrade_eta_cav = v[0],
            ("budget", "upgrade_eta_cryo") => self.budget.upgrade_eta_cryo = v[0],
            ("budget", "upgrade_eta_warm") => self.budget.upgrade_eta_warm = v[0],
            _ => unreachable!("store called for unvalidated key"),
        }
    }
}

fn require_one(a: &Assignment) -> Result<f64> {
    if a.values.len() != 1 {
        return Err(Error::ConfigParse {
            line: a.line,
            column: a.column,
            msg: format!("{}.{} expects a single value", a.section, a.key),
        });
    }
    Ok(a.values[0])
}

/// Distinguish "known field, wrong unit suffix" from "unknown key". The
/// longest matching base wins so sibling fields with common prefixes report
/// correctly.
fn unknown_or_unit(a: &Assignment) -> Error {
    if let Some(fields) = section_fields(a.section) {
        let mut best: Option<&FieldSpec> = None;
        for spec in fields {
            let is_prefix = a.key == spec.base
                || (a.key.starts_with(spec.base)
                    && a.key.as_bytes().get(spec.base.len()) == Some(&b'_'));
            if is_prefix
                && a.key != spec.key
                && best.map_or(true, |b| spec.base.len() > b.base.len())
            {
                best = Some(spec);
            }
        }
        if let Some(spec) = best {
            return Error::UnitMismatch {
                field: format!("{}.{}", a.section, spec.base),
                expected: spec.key.to_string(),
            };
        }
    }
    Error::UnknownKey {
        path: format!("{}.{}", a.section, a.key),
    }
}

/// Parse the key-value text format on top of the default profile.
pub fn parse_config_text(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut ledger_touched = false;
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(Error::ConfigParse {
                    line: line_no,
                    column: line.find('[').unwrap_or(0) + 1,
                    msg: "unterminated section header".into(),
                });
            };
            section = name.trim().to_string();
            continue;
        }
        let Some(eq) = trimmed.find('=') else {
            return Err(Error::ConfigParse {
                line: line_no,
                column: 1,
                msg: format!("expected `key = value`, got `{trimmed}`"),
            });
        };
        let key = trimmed[..eq].trim();
        let value_str = trimmed[eq + 1..].trim();
        let column = line.find('=').map(|p| p + 2).unwrap_or(1);
        if key.is_empty() {
            return Err(Error::ConfigParse {
                line: line_no,
                column: 1,
                msg: "empty key".into(),
            });
        }
        if value_str.is_empty() {
            return Err(Error::MissingKey {
                path: format!("{section}.{key}"),
            });
        }
        let values: Result<Vec<f64>> = value_str
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|e| Error::ConfigParse {
                    line: line_no,
                    column,
                    msg: format!("bad number `{}`: {e}", v.trim()),
                })
            })
            .collect();
        cfg.apply(
            &Assignment {
                section: &section,
                key,
                values: values?,
                line: line_no,
                column,
            },
            &mut ledger_touched,
        )?;
    }
    Ok(cfg)
}

/// Parse the JSON alternative: an object of sections holding the same keys as
/// the text format.
pub fn parse_config_json(text: &str) -> Result<RunConfig> {
    let root: Value = serde_json::from_str(text)?;
    let Value::Object(sections) = root else {
        return Err(Error::Argument("config JSON must be an object".into()));
    };
    let mut cfg = RunConfig::default();
    let mut ledger_touched = false;
    for (section, body) in &sections {
        if section == "schema_version" {
            cfg.schema_version = body
                .as_u64()
                .ok_or_else(|| Error::MissingKey {
                    path: "schema_version".into(),
                })? as u32;
            continue;
        }
        let Value::Object(entries) = body else {
            return Err(Error::UnknownKey {
                path: section.clone(),
            });
        };
        for (key, value) in entries {
            let values: Vec<f64> = match value {
                Value::Number(n) => vec![n.as_f64().unwrap_or(f64::NAN)],
                Value::Array(items) => items
                    .iter()
                    .map(|v| v.as_f64().unwrap_or(f64::NAN))
                    .collect(),
                _ => {
                    return Err(Error::MissingKey {
                        path: format!("{section}.{key}"),
                    })
                }
            };
            if values.iter().any(|v| v.is_nan()) {
                return Err(Error::MissingKey {
                    path: format!("{section}.{key}"),
                });
            }
            cfg.apply(
                &Assignment {
                    section,
                    key,
                    values,
                    line: 0,
                    column: 0,
                },
                &mut ledger_touched,
            )?;
        }
    }
    Ok(cfg)
}

/// Load a config file (key-value text or JSON); an absent or empty file means
/// the default profile.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        parse_config_json(&text)
    } else {
        parse_config_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_the_device_table() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.sphere.radius_m, 50e-6);
        assert_eq!(cfg.trap.quality, 2.6e7);
        assert_eq!(cfg.cavity.kappa_ext_hz, 18e6);
        assert_eq!(cfg.cavity.sweet_spot_hz, 4.44e9);
        assert_eq!(cfg.budget.flux_sensitivity_phi0_per_m, [70.0, 800.0, 80.0]);
        let sphere = cfg.sphere().unwrap();
        assert!((sphere.mass() - 5.7e-9).abs() / 5.7e-9 < 0.01);
    }

    #[test]
    fn empty_text_is_the_default_profile() {
        let cfg = parse_config_text("").unwrap();
        assert_eq!(cfg.canonical_json(), RunConfig::default().canonical_json());
    }

    #[test]
    fn text_overrides_apply_with_units() {
        let text = "
            schema_version = 1
            [cavity]
            kappa_ext_MHz = 25    # with the trap connected
            [sphere]
            radius_um = 40
            [trap]
            gradient_per_ampere_T_m = 20, 21, 41
        ";
        let cfg = parse_config_text(text).unwrap();
        assert_eq!(cfg.cavity.kappa_ext_hz, 25e6);
        assert!((cfg.sphere.radius_m - 40e-6).abs() < 1e-20);
        assert_eq!(cfg.trap.gradient_per_ampere_t_per_m, [20.0, 21.0, 41.0]);
    }

    #[test]
    fn wrong_unit_suffix_names_the_field() {
        let err = parse_config_text("[trap]\ngradient_per_ampere_T = 20, 21, 41\n").unwrap_err();
        match err {
            Error::UnitMismatch { field, expected } => {
                assert_eq!(field, "trap.gradient_per_ampere");
                assert_eq!(expected, "gradient_per_ampere_T_m");
            }
            other => panic!("expected unit mismatch, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = parse_config_text("[sphere]\ncolour = 3\n").unwrap_err();
        assert!(matches!(err, Error::UnknownKey { ref path } if path == "sphere.colour"));
        let err = parse_config_text("[warp]\nfactor = 3\n").unwrap_err();
        assert!(matches!(err, Error::UnknownKey { ref path } if path == "warp"));
    }

    #[test]
    fn parse_errors_carry_line_and_column() {
        let err = parse_config_text("[sphere]\nradius_um = fifty\n").unwrap_err();
        match err {
            Error::ConfigParse { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 1);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_value_reports_full_path() {
        let err = parse_config_text("[sphere]\nradius_um =\n").unwrap_err();
        assert!(matches!(err, Error::MissingKey { ref path } if path == "sphere.radius_um"));
    }

    #[test]
    fn json_alternative_round_trip() {
        let json = r#"{
            "schema_version": 1,
            "cavity": {"kappa_ext_MHz": 25},
            "trap": {"gradient_per_ampere_T_m": [20, 21, 41]},
            "ledger": {"base_cq": 1e-16, "factor_readout": 100}
        }"#;
        let cfg = parse_config_json(json).unwrap();
        assert_eq!(cfg.cavity.kappa_ext_hz, 25e6);
        assert_eq!(cfg.trap.gradient_per_ampere_t_per_m, [20.0, 21.0, 41.0]);
        assert_eq!(cfg.ledger.base_cq, 1e-16);
        assert_eq!(cfg.ledger.factors.len(), 1);
        assert_eq!(cfg.ledger.factors[0].name, "readout");
    }

    #[test]
    fn ledger_factors_replace_defaults_in_order() {
        let text = "
            [ledger]
            factor_one = 2
            factor_two = 3
        ";
        let cfg = parse_config_text(text).unwrap();
        assert_eq!(cfg.ledger.factors.len(), 2);
        assert_eq!(cfg.ledger.factors[0].name, "one");
        assert_eq!(cfg.ledger.factors[1].multiplier, 3.0);
        // Untouched ledger keeps the six default factors.
        let cfg = parse_config_text("").unwrap();
        assert_eq!(cfg.ledger.factors.len(), 6);
    }
}
