//! TOML scenario files: a `[model]` section describing the lattice, a `[run]`
//! section with experiment settings, and an optional `[output]` section.
//!
//! ```toml
//! [model]
//! n_sites = 101
//! profile = "paper_defect"
//! k = 0.3
//! g = 0.21
//! gamma = 1.0
//! gamma_norm = 2.4308
//! omega = 1.0
//!
//! [run]
//! gamma_norm = { start = 1.5, stop = 3.5, points = 201 }
//! ```
//!
//! Overrides use dotted keys (`model.gamma=0.5`, `run.gamma=[0, 1]`); the
//! value is read as TOML and falls back to a bare string.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::{OmegaTuning, PacketSpec, Probe};
use crate::floquet::ClassifyParams;
use crate::integrator::{Frame, DEFAULT_STEPS_PER_PERIOD};
use crate::lattice::{Boundary, DriveStrength, LatticeError, ModelSpec, Profile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("invalid override `{0}`: expected key=value with a dotted key such as model.gamma")]
    BadOverride(String),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

fn invalid(key: &'static str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        key,
        message: message.into(),
    }
}

/// A list of values, or `points` evenly spaced values from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, points: usize },
    Log { log_start: f64, log_stop: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let spaced = |a: f64, b: f64, n: usize| -> Vec<f64> {
            match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            }
        };
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, points } => spaced(*start, *stop, *points),
            Grid::Log {
                log_start,
                log_stop,
                points,
            } => spaced(log_start.log10(), log_stop.log10(), *points)
                .into_iter()
                .map(|e| 10f64.powf(e))
                .collect(),
        }
    }

    fn checked(&self, key: &'static str) -> Result<Vec<f64>, ScenarioError> {
        let v = self.values();
        if v.is_empty() {
            return Err(invalid(key, "grid is empty"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(invalid(key, "grid contains non-finite values"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Uniform,
    #[default]
    PaperDefect,
    Multimode,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_sites: usize,
    #[serde(default)]
    pub profile: ProfileKind,
    pub k: Option<f64>,
    pub g: Option<f64>,
    #[serde(default)]
    pub gamma: f64,
    pub f0: Option<f64>,
    pub gamma_norm: Option<f64>,
    pub omega: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(rename = "M")]
    pub modes: Option<usize>,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub boundary: Boundary,
    pub hopping: Option<Vec<f64>>,
    pub loss: Option<Vec<f64>>,
    pub nonlinearity: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

impl ModelSection {
    pub fn to_spec(&self) -> Result<ModelSpec, ScenarioError> {
        let strength = match (self.f0, self.gamma_norm) {
            (Some(f0), None) => DriveStrength::Amplitude(f0),
            (None, Some(gn)) => DriveStrength::Normalized(gn),
            (None, None) => return Err(ScenarioError::Missing("model.gamma_norm (or model.f0)")),
            (Some(_), Some(_)) => return Err(invalid("model.f0", "give either f0 or gamma_norm, not both")),
        };
        let k = || self.k.ok_or(ScenarioError::Missing("model.k"));
        let g = || self.g.ok_or(ScenarioError::Missing("model.g"));
        let profile = match self.profile {
            ProfileKind::Uniform => Profile::Uniform { k: k()? },
            ProfileKind::PaperDefect => Profile::PaperDefect { k: k()?, g: g()? },
            ProfileKind::Multimode => Profile::Multimode {
                modes: self.modes.ok_or(ScenarioError::Missing("model.M"))?,
                k: k()?,
                g: g()?,
            },
            ProfileKind::Explicit => Profile::Explicit {
                hopping: self.hopping.clone().ok_or(ScenarioError::Missing("model.hopping"))?,
                loss: self.loss.clone().ok_or(ScenarioError::Missing("model.loss"))?,
                nonlinearity: self.nonlinearity.clone(),
            },
        };
        if self.profile != ProfileKind::Explicit && (self.hopping.is_some() || self.loss.is_some() || self.nonlinearity.is_some()) {
            return Err(invalid("model.hopping", "explicit arrays need profile = \"explicit\""));
        }
        let spec = ModelSpec {
            n_sites: self.n_sites,
            profile,
            gamma: self.gamma,
            strength,
            omega: self.omega,
            lattice_constant: self.a,
            u: self.u,
            boundary: self.boundary,
        };
        spec.build()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    DarkBic,
    Packet,
    Site,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub steps_per_period: Option<usize>,
    pub frame: Option<Frame>,
    pub ipr_threshold: Option<f64>,
    pub dark_tol: Option<f64>,
    pub pop_tol: Option<f64>,
    pub band_margin: Option<f64>,
    pub defect_weight: Option<f64>,
    pub gamma_norm: Option<Grid>,
    pub gamma: Option<Grid>,
    pub omega: Option<Grid>,
    pub omega_tuning: Option<OmegaTuning>,
    pub u: Option<Grid>,
    #[serde(rename = "M")]
    pub modes: Option<Vec<usize>>,
    pub periods: Option<f64>,
    pub probe_periods: Option<f64>,
    pub probe_time: Option<f64>,
    pub samples_per_period: Option<usize>,
    pub initial: Option<InitialKind>,
    pub site: Option<i64>,
    pub packet: Option<PacketSpec>,
    pub bracket: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    /// Write per-mode profiles next to spectra.
    pub profiles: Option<bool>,
    /// Write full trajectories next to summaries.
    pub trajectory: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().ok_or(())?;
    if last.is_empty() || parts.is_empty() {
        return Err(());
    }
    let mut cur = table;
    for p in parts {
        if p.is_empty() {
            return Err(());
        }
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or(())?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(text: &str) -> toml::Value {
    let wrapped = format!("v = {text}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.to_string())),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

impl Scenario {
    /// Parses scenario text and applies `key=value` overrides.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ScenarioError> {
        let base: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        if overrides.is_empty() {
            return Ok(base);
        }
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
        for o in overrides {
            let (key, value) = o.split_once('=').ok_or_else(|| ScenarioError::BadOverride(o.clone()))?;
            set_dotted(&mut table, key.trim(), parse_value(value.trim())).map_err(|_| ScenarioError::BadOverride(o.clone()))?;
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| ScenarioError::Parse(format!("after overrides: {e}")))
    }

    pub fn from_file(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, overrides)
    }

    /// Canonical TOML rendering of the resolved scenario.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn model_spec(&self) -> Result<ModelSpec, ScenarioError> {
        self.model.to_spec()
    }

    pub fn steps_per_period(&self) -> Result<usize, ScenarioError> {
        let spp = self.run.steps_per_period.unwrap_or(DEFAULT_STEPS_PER_PERIOD);
        if spp < crate::integrator::MIN_STEPS_PER_PERIOD {
            return Err(invalid("run.steps_per_period", format!("must be at least {}", crate::integrator::MIN_STEPS_PER_PERIOD)));
        }
        Ok(spp)
    }

    pub fn frame(&self) -> Frame {
        self.run.frame.unwrap_or_default()
    }

    pub fn classify_params(&self) -> Result<ClassifyParams, ScenarioError> {
        let d = ClassifyParams::default();
        let r = &self.run;
        let p = ClassifyParams {
            ipr_threshold: r.ipr_threshold.unwrap_or(d.ipr_threshold),
            dark_tol: r.dark_tol.unwrap_or(d.dark_tol),
            pop_tol: r.pop_tol.unwrap_or(d.pop_tol),
            band_margin: r.band_margin.unwrap_or(d.band_margin),
            defect_weight: r.defect_weight.unwrap_or(d.defect_weight),
        };
        for (key, v) in [
            ("run.ipr_threshold", p.ipr_threshold),
            ("run.dark_tol", p.dark_tol),
            ("run.pop_tol", p.pop_tol),
            ("run.band_margin", p.band_margin),
            ("run.defect_weight", p.defect_weight),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(key, "must be finite and non-negative"));
            }
        }
        Ok(p)
    }

    pub fn gamma_norm_grid(&self) -> Result<Vec<f64>, ScenarioError> {
        self.run
            .gamma_norm
            .as_ref()
            .ok_or(ScenarioError::Missing("run.gamma_norm"))?
            .checked("run.gamma_norm")
    }

    pub fn gamma_grid(&self) -> Result<Vec<f64>, ScenarioError> {
        let v = self.run.gamma.as_ref().ok_or(ScenarioError::Missing("run.gamma"))?.checked("run.gamma")?;
        if v.iter().any(|&g| g < 0.0) {
            return Err(invalid("run.gamma", "loss strengths must be non-negative"));
        }
        Ok(v)
    }

    pub fn omega_grid(&self) -> Result<Option<Vec<f64>>, ScenarioError> {
        match &self.run.omega {
            None => Ok(None),
            Some(g) => {
                let v = g.checked("run.omega")?;
                if v.iter().any(|&w| w <= 0.0) {
                    return Err(invalid("run.omega", "frequencies must be positive"));
                }
                Ok(Some(v))
            }
        }
    }

    pub fn u_grid(&self) -> Result<Vec<f64>, ScenarioError> {
        self.run.u.as_ref().ok_or(ScenarioError::Missing("run.u"))?.checked("run.u")
    }

    pub fn modes(&self) -> Result<Vec<usize>, ScenarioError> {
        let m = self.run.modes.clone().ok_or(ScenarioError::Missing("run.M"))?;
        if m.is_empty() {
            return Err(invalid("run.M", "grid is empty"));
        }
        Ok(m)
    }

    /// Evolution horizon in periods.
    pub fn periods(&self, default: f64) -> Result<f64, ScenarioError> {
        let p = self.run.periods.unwrap_or(default);
        if !(p.is_finite() && p >= 0.0) {
            return Err(invalid("run.periods", "must be finite and non-negative"));
        }
        Ok(p)
    }

    pub fn whole_periods(&self, default: usize) -> Result<usize, ScenarioError> {
        let p = self.periods(default as f64)?;
        if p.fract() != 0.0 {
            return Err(invalid("run.periods", "must be a whole number of periods"));
        }
        Ok(p as usize)
    }

    pub fn probe(&self, default: Probe) -> Result<Probe, ScenarioError> {
        match (self.run.probe_periods, self.run.probe_time) {
            (Some(_), Some(_)) => Err(invalid("run.probe_time", "give either probe_periods or probe_time")),
            (Some(p), None) if p >= 0.0 => Ok(Probe::Periods(p)),
            (None, Some(t)) if t >= 0.0 => Ok(Probe::Time(t)),
            (None, None) => Ok(default),
            _ => Err(invalid("run.probe_time", "must be non-negative")),
        }
    }

    pub fn samples_per_period(&self, default: usize) -> Result<usize, ScenarioError> {
        match self.run.samples_per_period.unwrap_or(default) {
            0 => Err(invalid("run.samples_per_period", "must be positive")),
            n => Ok(n),
        }
    }

    pub fn packet(&self) -> PacketSpec {
        self.run.packet.unwrap_or_default()
    }

    pub fn bracket(&self) -> (f64, f64) {
        self.run.bracket.map(|[a, b]| (a, b)).unwrap_or(crate::hfe::DEFAULT_BETA_BRACKET)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3: &str = r#"
[model]
n_sites = 101
profile = "paper_defect"
k = 0.3
g = 0.21
gamma = 1.0
gamma_norm = 2.4308
omega = 1.0

[run]
gamma = { start = 0.0, stop = 1.0, points = 3 }
"#;

    #[test]
    fn parses_model_and_grid() {
        let s = Scenario::parse(FIG3, &[]).unwrap();
        let spec = s.model_spec().unwrap();
        assert_eq!(spec, ModelSpec::paper(101, 0.3, 0.21, 1.0, 2.4308, 1.0));
        assert_eq!(s.gamma_grid().unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(s.steps_per_period().unwrap(), DEFAULT_STEPS_PER_PERIOD);
        assert_eq!(s.classify_params().unwrap(), ClassifyParams::default());
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let text = FIG3.replace("omega = 1.0", "omega = 1.0\nomegaa = 2.0");
        let err = Scenario::parse(&text, &[]).unwrap_err().to_string();
        assert!(err.contains("omegaa"), "{err}");
        assert!(err.contains("line 10"), "{err}");
    }

    #[test]
    fn overrides_replace_values() {
        let s = Scenario::parse(FIG3, &["model.gamma=0.1".into(), "run.gamma=[0.25]".into(), "run.frame=lab".into()]).unwrap();
        assert_eq!(s.model.gamma, 0.1);
        assert_eq!(s.gamma_grid().unwrap(), vec![0.25]);
        assert_eq!(s.frame(), Frame::Lab);
        assert!(matches!(Scenario::parse(FIG3, &["gamma".into()]), Err(ScenarioError::BadOverride(_))));
        assert!(matches!(Scenario::parse(FIG3, &["gamma=1".into()]), Err(ScenarioError::BadOverride(_))));
        assert!(Scenario::parse(FIG3, &["model.nope=1".into()]).is_err());
    }

    #[test]
    fn empty_grid_is_invalid() {
        let s = Scenario::parse(FIG3, &["run.gamma=[]".into()]).unwrap();
        assert!(matches!(s.gamma_grid(), Err(ScenarioError::Invalid { key: "run.gamma", .. })));
        let s = Scenario::parse(FIG3, &["run.gamma={start=0.0, stop=1.0, points=0}".into()]).unwrap();
        assert!(s.gamma_grid().is_err());
    }

    #[test]
    fn drive_strength_must_be_unique() {
        let s = Scenario::parse(FIG3, &["model.f0=1.0".into()]).unwrap();
        assert!(s.model_spec().is_err());
        let text = FIG3.replace("gamma_norm = 2.4308\n", "");
        assert!(matches!(Scenario::parse(&text, &[]).unwrap().model_spec(), Err(ScenarioError::Missing(_))));
    }

    #[test]
    fn profile_kinds() {
        let s = Scenario::parse(FIG3, &["model.profile=multimode".into(), "model.M=4".into()]).unwrap();
        assert!(matches!(s.model_spec().unwrap().profile, Profile::Multimode { modes: 4, .. }));
        let s = Scenario::parse(FIG3, &["model.profile=uniform".into(), "model.gamma=0".into()]).unwrap();
        assert!(matches!(s.model_spec().unwrap().profile, Profile::Uniform { .. }));
        let s = Scenario::parse(
            FIG3,
            &[
                "model.profile=explicit".into(),
                "model.n_sites=3".into(),
                "model.hopping=[0.1, 0.2]".into(),
                "model.loss=[0, 0.5, 0]".into(),
            ],
        )
        .unwrap();
        assert_eq!(s.model_spec().unwrap().build().unwrap().loss(), &[0.0, 0.5, 0.0]);
        let s = Scenario::parse(FIG3, &["model.hopping=[0.1]".into()]).unwrap();
        assert!(s.model_spec().is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let s = Scenario::parse(FIG3, &["run.packet={center=-20.0, width=4.0, momentum=1.5}".into()]).unwrap();
        let again = Scenario::parse(&s.to_toml(), &[]).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn log_grid() {
        let v = Grid::Log {
            log_start: 0.1,
            log_stop: 10.0,
            points: 3,
        }
        .values();
        assert!((v[0] - 0.1).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15 && (v[2] - 10.0).abs() < 1e-13);
    }

    #[test]
    fn probe_choice() {
        let s = Scenario::parse(FIG3, &["run.probe_time=50".into()]).unwrap();
        assert_eq!(s.probe(Probe::Periods(8.0)).unwrap(), Probe::Time(50.0));
        let s = Scenario::parse(FIG3, &["run.probe_time=50".into(), "run.probe_periods=8".into()]).unwrap();
        assert!(s.probe(Probe::Periods(8.0)).is_err());
    }
}
