//! TOML configuration. Frequencies are given in Hz and converted to rad/s
//! here, once. Errors carry the section and line they refer to.
//!
//! ```toml
//! [cavity]
//! kappa_hz = 1.9e6
//! g0_hz = 30.0
//! delta_hz = 200e3
//!
//! [mechanics]
//! omega_m0_hz = 530e3
//! quality_factor = 6.4e6
//!
//! [bath]
//! temperature_k = 7.0
//!
//! [pump]
//! minus = [1.6e6, 0.0]   # magnitude √(photons/s), phase in degrees
//! plus = [4e5, 0.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::study::Truth;
use crate::params::{PumpConfig, SystemParams};
use crate::scalar::hz_to_rad;
use crate::synth::Detection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cavity {
    pub kappa_hz: f64,
    /// Defaults to κ/2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_in_hz: Option<f64>,
    pub g0_hz: f64,
    #[serde(default)]
    pub delta_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mechanics {
    pub omega_m0_hz: f64,
    /// Either this or `quality_factor` (Γ_m = Ω_m⁰/Q).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_m_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality_factor: Option<f64>,
    /// Extra occupancy added to n̄ (probe back-action).
    #[serde(default)]
    pub n_extra: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bath {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_th: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
}

/// Tone amplitudes as `[magnitude, phase_deg]`. The `off_*` pair describes
/// the drive-off configuration; when absent the drive-off spectrum uses the
/// same tones with the parametric coupling removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pump {
    pub minus: [f64; 2],
    pub plus: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub off_minus: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub off_plus: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Run {
    pub seed: u64,
    /// Bias-study trials.
    pub trials: usize,
    /// Experiment campaigns.
    pub repeats: usize,
    /// Multiplies every fitted area ratio.
    pub ratio_correction: f64,
    /// Excluded `[lo, hi]` ranges, Hz.
    pub mask_hz: Vec<[f64; 2]>,
}

impl Default for Run {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 6000,
            repeats: 100,
            ratio_correction: 1.0,
            mask_hz: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    ParametricGainS,
    GammaEff,
    DetuningDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    R0,
    RPlus,
    RMinus,
    S,
    Variances,
    Criterion,
}

impl Observable {
    pub const ALL: [Observable; 6] = [
        Observable::S,
        Observable::R0,
        Observable::RPlus,
        Observable::RMinus,
        Observable::Variances,
        Observable::Criterion,
    ];
}

/// Axis values are s (dimensionless), Γ_eff in Hz or Δ in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub n_points: usize,
    #[serde(default = "all_observables")]
    pub outputs: Vec<Observable>,
    /// `[gamma_eff_hz, s]` pairs, interpolated linearly, replacing s(Γ_eff)
    /// on a Γ_eff sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s_override: Vec<[f64; 2]>,
}

fn all_observables() -> Vec<Observable> {
    Observable::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cavity: Option<Cavity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mechanics: Option<Mechanics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bath: Option<Bath>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pump: Option<Pump>,
    #[serde(default)]
    pub detection: Detection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<Truth>,
    #[serde(default)]
    pub run: Run,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(skip)]
    source: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            cavity: None,
            mechanics: None,
            bath: None,
            pump: None,
            detection: Detection::default(),
            truth: None,
            run: Run::default(),
            sweep: None,
            source: None,
        }
    }
}

/// 1-based line of byte `offset`, and the `[section]` it falls in.
fn position(text: &str, offset: usize) -> (String, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let section = before
        .lines()
        .rev()
        .find_map(|l| {
            let t = l.trim();
            t.strip_prefix('[').and_then(|t| t.split(']').next()).map(str::to_string)
        })
        .unwrap_or_default();
    (section, line)
}

/// Line of `key` inside `[section]`, else of the section header, else 0.
fn locate(text: &str, section: &str, key: &str) -> usize {
    let header = format!("[{section}]");
    let mut inside = false;
    let mut header_line = 0;
    for (i, l) in text.lines().enumerate() {
        let t = l.trim();
        if t.starts_with('[') {
            inside = t == header;
            if inside {
                header_line = i + 1;
            }
            continue;
        }
        if inside && t.split('=').next().is_some_and(|k| k.trim() == key) {
            return i + 1;
        }
    }
    header_line
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| {
            let (section, line) = match e.span() {
                Some(span) => position(text, span.start),
                None => (String::new(), 0),
            };
            Error::Config {
                section,
                line,
                message: e.message().to_string(),
            }
        })?;
        cfg.source = Some(text.to_string());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn error(&self, section: &str, key: &str, message: impl Into<String>) -> Error {
        let line = self.source.as_deref().map_or(0, |t| locate(t, section, key));
        Error::Config {
            section: section.to_string(),
            line,
            message: message.into(),
        }
    }

    /// Checks every section that is present.
    pub fn validate(&self) -> Result<()> {
        if self.cavity.is_some() || self.mechanics.is_some() || self.bath.is_some() {
            self.system_params()?;
        }
        if let Some(p) = &self.pump {
            for (key, v) in [("minus", p.minus), ("plus", p.plus)] {
                if !(v[0] >= 0.0 && v[0].is_finite() && v[1].is_finite()) {
                    return Err(self.error("pump", key, "magnitude must be finite and >= 0"));
                }
            }
        }
        self.detection.validate().map_err(|e| self.error("detection", field_of(&e), e.to_string()))?;
        if let Some(t) = &self.truth {
            if !(t.gamma_eff_hz > 0.0) {
                return Err(self.error("truth", "gamma_eff_hz", "must be > 0"));
            }
            if !(t.n_bar >= 0.0) {
                return Err(self.error("truth", "n_bar", "must be >= 0"));
            }
            if !(t.s.abs() < 1.0) {
                return Err(self.error("truth", "s", "|s| must be < 1"));
            }
            if !(t.center_hz > self.detection.delta_lo_hz) {
                return Err(self.error("truth", "center_hz", "must exceed detection.delta_lo_hz"));
            }
        }
        if !(self.run.ratio_correction > 0.0) {
            return Err(self.error("run", "ratio_correction", "must be > 0"));
        }
        if let Some(m) = self.run.mask_hz.iter().find(|m| !(m[0] <= m[1])) {
            return Err(self.error("run", "mask_hz", format!("range [{}, {}] is reversed", m[0], m[1])));
        }
        if let Some(s) = &self.sweep {
            if !(s.start < s.stop) && s.n_points > 1 {
                return Err(self.error("sweep", "start", "start must be below stop"));
            }
            if s.n_points == 0 {
                return Err(self.error("sweep", "n_points", "must be >= 1"));
            }
            if s.s_override.windows(2).any(|w| !(w[0][0] < w[1][0])) {
                return Err(self.error("sweep", "s_override", "entries must be ascending in gamma_eff_hz"));
            }
        }
        Ok(())
    }

    /// Physical parameters in rad/s.
    pub fn system_params(&self) -> Result<SystemParams<f64>> {
        let cavity = self.cavity.as_ref().ok_or_else(|| self.error("cavity", "", "section [cavity] is missing"))?;
        let mech = self.mechanics.as_ref().ok_or_else(|| self.error("mechanics", "", "section [mechanics] is missing"))?;
        let bath = self.bath.as_ref().ok_or_else(|| self.error("bath", "", "section [bath] is missing"))?;
        let gamma_m_hz = match (mech.gamma_m_hz, mech.quality_factor) {
            (Some(g), None) => g,
            (None, Some(q)) if q > 0.0 => mech.omega_m0_hz / q,
            (None, Some(_)) => return Err(self.error("mechanics", "quality_factor", "must be > 0")),
            _ => return Err(self.error("mechanics", "gamma_m_hz", "give exactly one of gamma_m_hz and quality_factor")),
        };
        let n_th = match (bath.n_th, bath.temperature_k) {
            (Some(n), None) => n,
            (None, Some(_)) => 0.0,
            _ => return Err(self.error("bath", "n_th", "give exactly one of n_th and temperature_k")),
        };
        let map = |e: Error| {
            let (section, key) = match &e {
                Error::InvalidParameter { name, .. } => match *name {
                    "kappa" => ("cavity", "kappa_hz"),
                    "kappa_in" => ("cavity", "kappa_in_hz"),
                    "g0" => ("cavity", "g0_hz"),
                    "delta" => ("cavity", "delta_hz"),
                    "omega_m0" | "omega" => ("mechanics", "omega_m0_hz"),
                    "gamma_m" => ("mechanics", if mech.quality_factor.is_some() { "quality_factor" } else { "gamma_m_hz" }),
                    "n_extra" => ("mechanics", "n_extra"),
                    "temperature" => ("bath", "temperature_k"),
                    _ => ("bath", "n_th"),
                },
                _ => ("cavity", ""),
            };
            self.error(section, key, e.to_string())
        };
        let mut p = SystemParams::new(
            hz_to_rad(cavity.kappa_hz),
            hz_to_rad(cavity.g0_hz),
            hz_to_rad(mech.omega_m0_hz),
            hz_to_rad(gamma_m_hz),
            hz_to_rad(cavity.delta_hz),
            n_th,
        )
        .map_err(map)?;
        if let Some(k) = cavity.kappa_in_hz {
            p = p.with_kappa_in(hz_to_rad(k)).map_err(map)?;
        }
        if let Some(t) = bath.temperature_k {
            p = p.with_temperature(t).map_err(map)?;
        }
        p.with_n_extra(mech.n_extra).map_err(map)
    }

    pub fn has_physics(&self) -> bool {
        self.cavity.is_some() && self.mechanics.is_some() && self.bath.is_some() && self.pump.is_some()
    }

    pub fn pump(&self) -> Result<PumpConfig<f64>> {
        let p = self.pump.as_ref().ok_or_else(|| self.error("pump", "", "section [pump] is missing"))?;
        Ok(PumpConfig::from_polar_deg((p.minus[0], p.minus[1]), (p.plus[0], p.plus[1])))
    }

    /// The drive-off tones, if configured separately.
    pub fn pump_off(&self) -> Result<Option<PumpConfig<f64>>> {
        let p = self.pump.as_ref().ok_or_else(|| self.error("pump", "", "section [pump] is missing"))?;
        Ok(match (p.off_minus, p.off_plus) {
            (None, None) => None,
            (m, q) => {
                let m = m.unwrap_or(p.minus);
                let q = q.unwrap_or(p.plus);
                Some(PumpConfig::from_polar_deg((m[0], m[1]), (q[0], q[1])))
            }
        })
    }

    /// The configured truth, or the default one.
    pub fn truth(&self) -> Truth {
        self.truth.unwrap_or_default()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config {
            section: String::new(),
            line: 0,
            message: e.to_string(),
        })
    }
}

fn field_of(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter { name, .. } => name,
        _ => "",
    }
}
