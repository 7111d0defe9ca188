//! Time series to calibrated spectral densities.
//!
//! Welch estimation with a Hamming window, quasi-heterodyne phase extraction
//! from I/Q records, the calibration-tone chain from detector units through
//! flux and cavity-frequency densities to displacement, coupling extraction,
//! imprecision floors, and a deterministic synthesizer for end-to-end round
//! trips.
//!
//! Densities are one-sided. The power of a spectral peak follows the PS
//! convention: PS = PSD·ENBW equals the mean square of the underlying
//! oscillation, so a sine of amplitude A carries a peak PS of A²/2.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::constants::TAU;
use crate::error::{Error, Result};

/// Digitized I/Q record.
#[derive(Debug, Clone)]
pub struct TimeTrace {
    /// Sample rate (Hz).
    pub sample_rate: f64,
    /// In-phase channel (V).
    pub i: Vec<f64>,
    /// Quadrature channel (V).
    pub q: Vec<f64>,
}

impl TimeTrace {
    pub fn new(sample_rate: f64, i: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if i.len() != q.len() {
            return Err(Error::Argument(format!(
                "channel lengths differ: {} vs {}",
                i.len(),
                q.len()
            )));
        }
        if sample_rate <= 0.0 {
            return Err(Error::Argument("sample rate must be positive".into()));
        }
        Ok(Self { sample_rate, i, q })
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    /// Record duration (s).
    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }
}

/// Calibration stage of a spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumUnits {
    /// Raw detector-voltage density.
    VoltsSquaredPerHz,
    /// Flux density in flux quanta.
    Phi0SquaredPerHz,
    /// Cavity-frequency density (cyclic frequency).
    HzSquaredPerHz,
    /// Displacement density.
    MetersSquaredPerHz,
}

impl SpectrumUnits {
    pub fn label(&self) -> &'static str {
        match self {
            SpectrumUnits::VoltsSquaredPerHz => "V^2/Hz",
            SpectrumUnits::Phi0SquaredPerHz => "Phi0^2/Hz",
            SpectrumUnits::HzSquaredPerHz => "Hz^2/Hz",
            SpectrumUnits::MetersSquaredPerHz => "m^2/Hz",
        }
    }
}

impl std::fmt::Display for SpectrumUnits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One-sided spectral density with its equivalent noise bandwidth.
#[derive(Debug, Clone)]
pub struct SpectrumRecord {
    /// Frequency grid (Hz), DC to Nyquist.
    pub freqs: Vec<f64>,
    /// Density values in `units`.
    pub psd: Vec<f64>,
    /// Equivalent noise bandwidth of the analysis window (Hz).
    pub enbw: f64,
    pub units: SpectrumUnits,
    /// Extracted peaks as (frequency, mean-square power).
    pub power_peaks: Vec<(f64, f64)>,
}

impl SpectrumRecord {
    pub fn bin_width(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    /// Peak power PS = PSD·ENBW near a nominal frequency, taking the maximum
    /// over ±2 bins to absorb drift. Returns (bin frequency, PS).
    pub fn peak_ps(&self, nominal_freq: f64) -> Result<(f64, f64)> {
        let k = self.bin_index(nominal_freq)?;
        let lo = k.saturating_sub(2);
        let hi = (k + 2).min(self.psd.len() - 1);
        let (best, &val) = self.psd[lo..=hi]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        Ok((self.freqs[lo + best], val * self.enbw))
    }

    /// Peak signal-to-floor ratio: peak PSD against the median PSD of the
    /// surrounding ±48 bins (the ±2-bin peak region excluded).
    pub fn peak_snr(&self, nominal_freq: f64) -> Result<f64> {
        let k = self.bin_index(nominal_freq)?;
        let lo = k.saturating_sub(50);
        let hi = (k + 50).min(self.psd.len() - 1);
        let mut surround: Vec<f64> = (lo..=hi)
            .filter(|&j| j + 2 < k || j > k + 2)
            .map(|j| self.psd[j])
            .collect();
        if surround.is_empty() {
            return Err(Error::Argument("spectrum too short for an SNR estimate".into()));
        }
        surround.sort_by(f64::total_cmp);
        let floor = surround[surround.len() / 2];
        let peak = self.psd[(k.saturating_sub(2)..=(k + 2).min(self.psd.len() - 1))
            .max_by(|&a, &b| self.psd[a].total_cmp(&self.psd[b]))
            .unwrap()];
        if floor == 0.0 {
            return Ok(if peak > 0.0 { f64::INFINITY } else { 0.0 });
        }
        Ok(peak / floor)
    }

    fn bin_index(&self, freq: f64) -> Result<usize> {
        let bw = self.bin_width();
        if bw <= 0.0 || freq < 0.0 || freq > *self.freqs.last().unwrap_or(&0.0) {
            return Err(Error::Argument(format!(
                "frequency {freq} Hz outside the spectrum"
            )));
        }
        Ok((freq / bw).round() as usize)
    }

    /// Same grid with all densities multiplied by `factor` and relabeled.
    pub fn rescaled(&self, factor: f64, units: SpectrumUnits) -> SpectrumRecord {
        SpectrumRecord {
            freqs: self.freqs.clone(),
            psd: self.psd.iter().map(|v| v * factor).collect(),
            enbw: self.enbw,
            units,
            power_peaks: self
                .power_peaks
                .iter()
                .map(|&(f, p)| (f, p * factor))
                .collect(),
        }
    }
}

/// Periodic (DFT-even) Hamming window; its ENBW is exactly 1.362826·fs/N for
/// every length.
pub fn hamming_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (TAU * i as f64 / n as f64).cos())
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct WelchConfig {
    pub segment_length: usize,
    /// Fractional segment overlap; 0.5 unless there is a reason otherwise.
    pub overlap: f64,
}

/// Welch PSD of a real sequence with a Hamming window.
pub fn welch_psd(x: &[f64], sample_rate: f64, segment_length: usize) -> Result<SpectrumRecord> {
    welch_psd_with(
        x,
        sample_rate,
        &WelchConfig {
            segment_length,
            overlap: 0.5,
        },
    )
}

pub fn welch_psd_with(x: &[f64], sample_rate: f64, cfg: &WelchConfig) -> Result<SpectrumRecord> {
    let n = cfg.segment_length;
    if n < 16 || n > x.len() {
        return Err(Error::Argument(format!(
            "segment length {n} invalid for a record of {} samples",
            x.len()
        )));
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(Error::Argument("overlap must lie in [0, 1)".into()));
    }
    let step = ((n as f64 * (1.0 - cfg.overlap)).round() as usize).max(1);
    let n_segments = if x.len() >= n { (x.len() - n) / step + 1 } else { 0 };
    if n_segments < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 segments, got {n_segments}"
        )));
    }

    let window = hamming_periodic(n);
    let sum_w: f64 = window.iter().sum();
    let sum_w2: f64 = window.iter().map(|w| w * w).sum();
    let enbw = sample_rate * sum_w2 / (sum_w * sum_w);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let half = n / 2;
    let mut acc = vec![0.0f64; half + 1];
    let mut buffer = vec![Complex64::default(); n];
    for s in 0..n_segments {
        let start = s * step;
        for (j, w) in window.iter().enumerate() {
            buffer[j] = Complex64::new(x[start + j] * w, 0.0);
        }
        fft.process(&mut buffer);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buffer[k].norm_sqr();
        }
    }

    let norm = 1.0 / (n_segments as f64 * sample_rate * sum_w2);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (n % 2 == 0 && k == half) {
                1.0
            } else {
                2.0
            };
            one_sided * a * norm
        })
        .collect();
    let freqs = (0..=half).map(|k| k as f64 * sample_rate / n as f64).collect();
    Ok(SpectrumRecord {
        freqs,
        psd,
        enbw,
        units: SpectrumUnits::VoltsSquaredPerHz,
        power_peaks: Vec::new(),
    })
}

/// Reduce a phase to the principal interval (−π, π]. The turn count enters
/// through a single product, so unwrap followed by wrap retraces exactly on
/// values whose sums stay representable.
pub fn wrap_phase(x: f64) -> f64 {
    let k = ((x + std::f64::consts::PI) / TAU).floor();
    let mut y = x - k * TAU;
    if y <= -std::f64::consts::PI {
        y += TAU;
    } else if y > std::f64::consts::PI {
        y -= TAU;
    }
    y
}

/// Unwrap a phase sequence: a jump of more than π between successive samples
/// adds a compensating ±2π, tracked as an integer turn count.
pub fn unwrap_phase(wrapped: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut turns: i64 = 0;
    let mut prev: Option<f64> = None;
    for &w in wrapped {
        if let Some(p) = prev {
            let d = w - p;
            if d > std::f64::consts::PI {
                turns -= 1;
            } else if d < -std::f64::consts::PI {
                turns += 1;
            }
        }
        prev = Some(w);
        out.push(w + turns as f64 * TAU);
    }
    out
}

fn mixed_phase(trace: &TimeTrace, mix_freq: f64) -> Result<(Vec<f64>, f64)> {
    if mix_freq <= 0.0 || mix_freq >= trace.sample_rate / 2.0 {
        return Err(Error::Argument(format!(
            "mix frequency {mix_freq} Hz must lie in (0, fs/2)"
        )));
    }
    let fs = trace.sample_rate;
    let mut wrapped = Vec::with_capacity(trace.len());
    let mut amplitude = 0.0;
    for n in 0..trace.len() {
        let z = Complex64::new(trace.i[n], trace.q[n]);
        let theta = TAU * mix_freq * n as f64 / fs;
        let mixed = z * Complex64::new(theta.cos(), -theta.sin());
        wrapped.push(mixed.arg());
        amplitude += z.norm();
    }
    amplitude /= trace.len().max(1) as f64;
    let unwrapped = unwrap_phase(&wrapped);
    // Re-add the known heterodyne ramp so the output is the signal phase.
    let phase = unwrapped
        .iter()
        .enumerate()
        .map(|(n, u)| u + TAU * mix_freq * n as f64 / fs)
        .collect();
    Ok((phase, amplitude))
}

/// Quasi-heterodyne phase extraction: digitally mix I+iQ with e^(−i2π·f_mix·t),
/// unwrap, and compensate the deterministic mixing ramp. Returns the unwrapped
/// signal phase (rad). The mix frequency must lie above the band of interest
/// (and below Nyquist, which is enforced).
pub fn quasi_heterodyne_phase(trace: &TimeTrace, mix_freq: f64) -> Result<Vec<f64>> {
    mixed_phase(trace, mix_freq).map(|(phase, _)| phase)
}

/// Phase-quadrature voltage: the unwrapped phase scaled by the mean carrier
/// amplitude, so the result is linear in the raw I/Q scale (V).
pub fn demodulated_voltage(trace: &TimeTrace, mix_freq: f64) -> Result<Vec<f64>> {
    let (phase, amplitude) = mixed_phase(trace, mix_freq)?;
    Ok(phase.into_iter().map(|p| p * amplitude).collect())
}

/// Calibration-coil chain constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalibrationChain {
    /// Flux periodicity of the external bias coil as seen by the readout (V/Φ0).
    pub ext_coil_periodicity: f64,
    /// Countering voltage on the external coil per volt on the calibration
    /// coil (V/V).
    pub cal_coil_ratio: f64,
    /// Calibration tone frequency (Hz).
    pub cal_tone_freq: f64,
    /// Calibration tone amplitude applied to the coil (V).
    pub cal_tone_amplitude: f64,
}

impl CalibrationChain {
    /// Flux injected per applied volt on the calibration coil (Φ0/V).
    pub fn cal_coil_flux(&self) -> f64 {
        self.cal_coil_ratio / self.ext_coil_periodicity
    }

    /// Amplitude of the injected flux tone (Φ0).
    pub fn injected_flux_amplitude(&self) -> f64 {
        self.cal_tone_amplitude * self.cal_coil_flux()
    }
}

/// Minimum peak-to-floor ratio for a calibration feature to count as present.
pub const CALIBRATION_MIN_SNR: f64 = 3.0;

/// Rescale a raw detector spectrum to flux units using the calibration tone:
/// the tone's measured power is matched to the known injected flux.
pub fn calibrate_flux_axis(
    spectrum: &SpectrumRecord,
    chain: &CalibrationChain,
) -> Result<SpectrumRecord> {
    let snr = spectrum.peak_snr(chain.cal_tone_freq)?;
    if !(snr >= CALIBRATION_MIN_SNR) {
        return Err(Error::Calibration(format!(
            "calibration tone at {} Hz has SNR {snr:.2} < {CALIBRATION_MIN_SNR}",
            chain.cal_tone_freq
        )));
    }
    let (f_peak, ps_tone) = spectrum.peak_ps(chain.cal_tone_freq)?;
    if ps_tone <= 0.0 {
        return Err(Error::Calibration("calibration tone has no power".into()));
    }
    let injected = chain.injected_flux_amplitude();
    let scale = injected * injected / 2.0 / ps_tone;
    let mut out = spectrum.rescaled(scale, SpectrumUnits::Phi0SquaredPerHz);
    out.power_peaks.push((f_peak, injected * injected / 2.0));
    Ok(out)
}

/// Convert a flux density (Φ0²/Hz) to a cavity-frequency density (Hz²/Hz)
/// through the flux responsivity s_w (Hz/Φ0).
pub fn flux_to_frequency(spectrum: &SpectrumRecord, s_w_hz_per_phi0: f64) -> Result<SpectrumRecord> {
    if s_w_hz_per_phi0 <= 0.0 {
        return Err(Error::Domain("flux responsivity must be positive".into()));
    }
    Ok(spectrum.rescaled(
        s_w_hz_per_phi0 * s_w_hz_per_phi0,
        SpectrumUnits::HzSquaredPerHz,
    ))
}

/// Rescale a spectrum to displacement units from an optically measured mode
/// amplitude: the mode's peak power is matched to ⟨x²⟩ = A²/2. Each mode needs
/// its own calibration.
pub fn calibrate_displacement(
    spectrum: &SpectrumRecord,
    amplitude_m: f64,
    mode_freq: f64,
) -> Result<SpectrumRecord> {
    if amplitude_m <= 0.0 {
        return Err(Error::Calibration(
            "optical amplitude must be positive for displacement calibration".into(),
        ));
    }
    let snr = spectrum.peak_snr(mode_freq)?;
    if !(snr >= CALIBRATION_MIN_SNR) {
        return Err(Error::Calibration(format!(
            "mechanical peak at {mode_freq} Hz has SNR {snr:.2} < {CALIBRATION_MIN_SNR}"
        )));
    }
    let (f_peak, ps_mech) = spectrum.peak_ps(mode_freq)?;
    if ps_mech <= 0.0 {
        return Err(Error::Calibration("mechanical peak has no power".into()));
    }
    let target = amplitude_m * amplitude_m / 2.0;
    let mut out = spectrum.rescaled(target / ps_mech, SpectrumUnits::MetersSquaredPerHz);
    out.power_peaks.push((f_peak, target));
    Ok(out)
}

/// Electromechanical coupling from the frequency- and displacement-calibrated
/// spectra at the mechanical peak.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CouplingEstimate {
    /// G/2π = sqrt(S_ωω/S_xx) at the peak (Hz/m).
    pub big_g_cyc: f64,
    /// g0/2π = (G/2π)·x_zpf (Hz).
    pub g0_cyc: f64,
}

pub fn extract_coupling(
    s_ww: &SpectrumRecord,
    s_xx: &SpectrumRecord,
    mode_freq: f64,
    xzpf: f64,
) -> Result<CouplingEstimate> {
    if s_ww.units != SpectrumUnits::HzSquaredPerHz || s_xx.units != SpectrumUnits::MetersSquaredPerHz
    {
        return Err(Error::Argument(format!(
            "coupling extraction needs Hz^2/Hz and m^2/Hz spectra, got {} and {}",
            s_ww.units, s_xx.units
        )));
    }
    let (f_ww, ps_ww) = s_ww.peak_ps(mode_freq)?;
    let (f_xx, ps_xx) = s_xx.peak_ps(mode_freq)?;
    if (f_ww - f_xx).abs() > 0.5 * s_ww.bin_width() {
        return Err(Error::Argument(format!(
            "peaks disagree on the mode frequency: {f_ww} vs {f_xx} Hz"
        )));
    }
    if ps_xx <= 0.0 {
        return Err(Error::Domain(
            "displacement peak vanishes; coupling undefined".into(),
        ));
    }
    let big_g_cyc = (ps_ww / ps_xx).sqrt();
    Ok(CouplingEstimate {
        big_g_cyc,
        g0_cyc: big_g_cyc * xzpf,
    })
}

/// Frequency regions removed before reading a noise floor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExclusionRules {
    /// Power-grid fundamental (Hz); all harmonics are excluded.
    pub mains_fundamental: f64,
    /// Half-width of each mains exclusion (Hz).
    pub mains_halfwidth: f64,
    /// Everything below this is vibration-dominated (Hz).
    pub low_freq_cutoff: f64,
    /// Discrete tones to exclude (mechanical modes, calibration tones).
    pub tones: Vec<f64>,
    /// Half-width of each tone exclusion (Hz).
    pub tone_halfwidth: f64,
}

impl Default for ExclusionRules {
    fn default() -> Self {
        Self {
            mains_fundamental: 50.0,
            mains_halfwidth: 2.0,
            low_freq_cutoff: 30.0,
            tones: Vec::new(),
            tone_halfwidth: 2.0,
        }
    }
}

impl ExclusionRules {
    pub fn excludes(&self, freq: f64) -> bool {
        if freq < self.low_freq_cutoff {
            return true;
        }
        if self.mains_fundamental > 0.0 {
            let nearest = (freq / self.mains_fundamental).round() * self.mains_fundamental;
            if nearest > 0.0 && (freq - nearest).abs() <= self.mains_halfwidth {
                return true;
            }
        }
        self.tones
            .iter()
            .any(|t| (freq - t).abs() <= self.tone_halfwidth)
    }
}

/// Median density over a band after removing excluded regions.
pub fn imprecision_floor(
    spectrum: &SpectrumRecord,
    band: (f64, f64),
    rules: &ExclusionRules,
) -> Result<f64> {
    let mut values: Vec<f64> = spectrum
        .freqs
        .iter()
        .zip(&spectrum.psd)
        .filter(|(f, _)| **f >= band.0 && **f <= band.1 && !rules.excludes(**f))
        .map(|(_, v)| *v)
        .collect();
    if values.is_empty() {
        return Err(Error::Argument(format!(
            "band [{}, {}] Hz is empty after exclusions",
            band.0, band.1
        )));
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Ok(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// One deterministic phase tone of the synthesizer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthTone {
    pub freq: f64,
    /// Phase-modulation amplitude (rad).
    pub phase_amplitude: f64,
    pub start_phase: f64,
}

/// Synthesizer configuration: tones modulate the phase quadrature of a
/// constant-amplitude carrier, plus a white phase-noise floor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub sample_rate: f64,
    pub duration: f64,
    pub carrier_amplitude: f64,
    pub carrier_phase: f64,
    pub tones: Vec<SynthTone>,
    /// One-sided white phase-noise density (rad²/Hz).
    pub phase_noise_density: f64,
    pub seed: u64,
}

/// Deterministic I/Q synthesis; identical seeds give identical traces.
pub fn synth_trace(cfg: &SynthConfig) -> Result<TimeTrace> {
    if cfg.sample_rate <= 0.0 || cfg.duration <= 0.0 {
        return Err(Error::Argument(
            "sample rate and duration must be positive".into(),
        ));
    }
    for tone in &cfg.tones {
        if tone.freq >= cfg.sample_rate / 2.0 {
            return Err(Error::Argument(format!(
                "tone at {} Hz aliases at fs = {} Hz",
                tone.freq, cfg.sample_rate
            )));
        }
    }
    let n = (cfg.duration * cfg.sample_rate).round() as usize;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let sigma = (cfg.phase_noise_density * cfg.sample_rate / 2.0).sqrt();
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Argument(e.to_string()))?;
    let mut i_ch = Vec::with_capacity(n);
    let mut q_ch = Vec::with_capacity(n);
    for s in 0..n {
        let t = s as f64 / cfg.sample_rate;
        let mut phase = cfg.carrier_phase;
        for tone in &cfg.tones {
            phase += tone.phase_amplitude * (TAU * tone.freq * t + tone.start_phase).sin();
        }
        if sigma > 0.0 {
            phase += sigma * normal.sample(&mut rng);
        }
        i_ch.push(cfg.carrier_amplitude * phase.cos());
        q_ch.push(cfg.carrier_amplitude * phase.sin());
    }
    TimeTrace::new(cfg.sample_rate, i_ch, q_ch)
}
