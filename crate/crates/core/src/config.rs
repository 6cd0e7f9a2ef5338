//! Experiment configuration.

/// Complex numbers written either as a bare real number or as `[re, im]`.
pub mod cplx {
    use crate::fock::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum Repr {
        Real(f64),
        Pair([f64; 2]),
    }

    impl From<Repr> for C64 {
        fn from(r: Repr) -> Self {
            match r {
                Repr::Real(x) => C64::new(x, 0.0),
                Repr::Pair([a, b]) => C64::new(a, b),
            }
        }
    }

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        Repr::deserialize(d).map(C64::from)
    }
}

pub mod cplx_vec {
    use super::cplx::Repr;
    use crate::fock::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        Vec::<Repr>::deserialize(d).map(|v| v.into_iter().map(C64::from).collect())
    }
}

use crate::detection::{ResponseFilter, SpectrumConfig, Window};
use crate::error::{Error, Result};
use crate::noise::{Kernel, LocalOscillatorSpec};
use crate::oracle::HomodyneRegime;
use crate::oscillator::{derive_params, Mode, OscillatorParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// What a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    #[default]
    Simulate,
    Counting,
    Spectrum,
    Oracle,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Counting => "counting",
            Command::Spectrum => "spectrum",
            Command::Oracle => "oracle",
            Command::Validate => "validate",
        }
    }
}

/// Probability law the trajectories are drawn under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SimulationLaw {
    #[default]
    Physical,
    Reference,
}

impl From<SimulationLaw> for Mode {
    fn from(l: SimulationLaw) -> Self {
        match l {
            SimulationLaw::Physical => Mode::Physical,
            SimulationLaw::Reference => Mode::Reference,
        }
    }
}

/// Unit of the time column in output tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    #[default]
    Raw,
    /// Multiples of the mode lifetime 1/γ₀.
    ModeLifetime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunControls {
    pub trajectories: u64,
    pub horizon: f64,
    pub dt: f64,
    /// Leading interval discarded by stationary estimators.
    pub burn_in: f64,
    pub seed: u64,
    pub law: SimulationLaw,
    /// Keep every `record_stride`-th grid point in trajectory tables.
    pub record_stride: usize,
    /// Trajectories written out in full by `simulate`.
    pub keep_trajectories: u64,
    pub time_unit: TimeUnit,
}

impl Default for RunControls {
    fn default() -> Self {
        Self {
            trajectories: 100,
            horizon: 20.0,
            dt: 1e-3,
            burn_in: 0.0,
            seed: 0,
            law: SimulationLaw::Physical,
            record_stride: 10,
            keep_trajectories: 4,
            time_unit: TimeUnit::Raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionControls {
    pub filter: ResponseFilter,
    pub spectrum: SpectrumConfig,
    /// Counting window lengths, each starting at the burn-in time.
    pub count_windows: Vec<f64>,
    /// Constant test function `k` of the counting functional.
    pub functional_k: f64,
    /// Oracle frequency grid `[mu_min, mu_max]` with `mu_points` points.
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_points: usize,
    pub homodyne_regime: HomodyneRegime,
    pub perfect_lo: bool,
}

impl Default for DetectionControls {
    fn default() -> Self {
        Self {
            filter: ResponseFilter::default(),
            spectrum: SpectrumConfig {
                segment_length: 4096,
                overlap: 0.5,
                window: Window::Hann,
            },
            count_windows: vec![1.0],
            functional_k: 1.0,
            mu_min: -10.0,
            mu_max: 10.0,
            mu_points: 401,
            homodyne_regime: HomodyneRegime::Balanced,
            perfect_lo: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateControls {
    /// Acceptance criteria to run, numbered from 1.
    pub criteria: Vec<u32>,
}

impl Default for ValidateControls {
    fn default() -> Self {
        Self {
            criteria: (1..=10).collect(),
        }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub command: Command,
    pub model: OscillatorParams,
    #[serde(default)]
    pub run: RunControls,
    #[serde(default)]
    pub detection: DetectionControls,
    #[serde(default)]
    pub validate: ValidateControls,
}

impl ExperimentConfig {
    pub fn new(model: OscillatorParams) -> Self {
        Self {
            command: Command::default(),
            model,
            run: RunControls::default(),
            detection: DetectionControls::default(),
            validate: ValidateControls::default(),
        }
    }

    /// Every invariant violation, each naming its field.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let m = &self.model;
        let mut nonneg = |name: &str, x: f64| {
            if !(x >= 0.0) || !x.is_finite() {
                v.push(format!("{name} must be finite and >= 0 (got {x})"));
            }
        };
        nonneg("model.count_rate", m.count_rate);
        nonneg("model.laser.bandwidth", m.laser.bandwidth);
        match m.local_oscillator {
            LocalOscillatorSpec::Heterodyne { linewidth, .. } => nonneg("model.local_oscillator.linewidth", linewidth),
            LocalOscillatorSpec::Homodyne { delay, .. } => nonneg("model.local_oscillator.delay", delay),
        }
        for (j, ch) in m.channels.iter().enumerate() {
            if let Kernel::Exponential { decay, .. } = ch.kernel {
                nonneg(&format!("model.channels[{j}].kernel.decay"), decay);
            }
        }
        match &self.detection.filter {
            ResponseFilter::Exponential { rate, .. } => nonneg("detection.filter.rate", *rate),
            ResponseFilter::Tabulated { .. } => {}
        }
        let r = &self.run;
        if r.trajectories < 1 {
            v.push("run.trajectories must be >= 1".into());
        }
        // TOML integers are signed 64-bit.
        for (name, x) in [("run.seed", r.seed), ("run.trajectories", r.trajectories), ("run.keep_trajectories", r.keep_trajectories)] {
            if x > i64::MAX as u64 {
                v.push(format!("{name} must be at most {} (got {x})", i64::MAX));
            }
        }
        if !(r.horizon > 0.0) || !r.horizon.is_finite() {
            v.push(format!("run.horizon must be positive (got {})", r.horizon));
        }
        if !(r.burn_in >= 0.0) || !(r.burn_in < r.horizon) {
            v.push(format!("run.burn_in must lie in [0, horizon) (got {})", r.burn_in));
        }
        if r.record_stride < 1 {
            v.push("run.record_stride must be >= 1".into());
        }
        if !(r.dt > 0.0) || !r.dt.is_finite() {
            v.push(format!("run.dt must be positive (got {})", r.dt));
        }
        let d = &self.detection;
        for (i, &w) in d.count_windows.iter().enumerate() {
            if !(w > 0.0) || !(r.burn_in + w <= r.horizon * (1.0 + 1e-12)) {
                v.push(format!("detection.count_windows[{i}] must be positive and end by the horizon (got {w})"));
            }
        }
        if !d.functional_k.is_finite() {
            v.push("detection.functional_k must be finite".into());
        }
        if d.spectrum.segment_length < 8 {
            v.push("detection.spectrum.segment_length must be >= 8".into());
        }
        if !(d.spectrum.overlap >= 0.0 && d.spectrum.overlap < 1.0) {
            v.push("detection.spectrum.overlap must lie in [0, 1)".into());
        }
        if !(d.mu_min.is_finite() && d.mu_max.is_finite() && d.mu_min <= d.mu_max) || d.mu_points < 1 {
            v.push("detection.mu_min <= mu_max and mu_points >= 1 required".into());
        }
        if let Err(e) = d.filter.validate() {
            v.push(format!("detection.filter: {e}"));
        }
        for &c in &self.validate.criteria {
            if !(1..=10).contains(&c) {
                v.push(format!("validate.criteria: no criterion {c}"));
            }
        }
        if v.is_empty() {
            match derive_params(m) {
                Ok(p) => {
                    let fastest = m.count_rate.max(p.gamma0);
                    if r.dt * fastest > 0.01 {
                        v.push(format!(
                            "run.dt * max(count_rate, gamma0) must be <= 0.01 (got {:.4})",
                            r.dt * fastest
                        ));
                    }
                }
                Err(e) => v.push(format!("model: {e}")),
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(vec![format!("serialize: {e}")]))
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> Result<String> {
        let text = self.to_toml()?;
        Ok(Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
    }
}

fn unknown_field(msg: &str) -> Option<String> {
    let rest = msg.split("unknown field `").nth(1)?;
    Some(rest.split('`').next()?.to_string())
}

/// Removes `key` from the table at `path`, from its parent when the path
/// ends at the key itself, or else from the first nested table holding it.
fn remove_key(root: &mut toml::Value, path: &serde_path_to_error::Path, key: &str) -> bool {
    use serde_path_to_error::Segment;
    let mut segs: Vec<&Segment> = path.iter().filter(|s| !matches!(s, Segment::Enum { .. } | Segment::Unknown)).collect();
    if let Some(Segment::Map { key: last }) = segs.last() {
        if last == key {
            segs.pop();
        }
    }
    let mut node = root;
    for s in segs {
        node = match (s, node) {
            (Segment::Map { key }, toml::Value::Table(t)) => match t.get_mut(key) {
                Some(n) => n,
                None => return false,
            },
            (Segment::Seq { index }, toml::Value::Array(a)) => match a.get_mut(*index) {
                Some(n) => n,
                None => return false,
            },
            _ => return false,
        };
    }
    remove_nested(node, key)
}

fn remove_at(root: &mut toml::Value, path: &serde_path_to_error::Path) -> bool {
    use serde_path_to_error::Segment;
    let segs: Vec<&Segment> = path.iter().filter(|s| !matches!(s, Segment::Enum { .. } | Segment::Unknown)).collect();
    let Some((last, parents)) = segs.split_last() else {
        return false;
    };
    let mut node = root;
    for s in parents {
        node = match (s, node) {
            (Segment::Map { key }, toml::Value::Table(t)) => match t.get_mut(key) {
                Some(n) => n,
                None => return false,
            },
            (Segment::Seq { index }, toml::Value::Array(a)) => match a.get_mut(*index) {
                Some(n) => n,
                None => return false,
            },
            _ => return false,
        };
    }
    match (last, node) {
        (Segment::Map { key }, toml::Value::Table(t)) => t.remove(key).is_some(),
        (Segment::Seq { index }, toml::Value::Array(a)) if *index < a.len() => {
            a.remove(*index);
            true
        }
        _ => false,
    }
}

fn remove_nested(node: &mut toml::Value, key: &str) -> bool {
    match node {
        toml::Value::Table(t) => {
            if t.remove(key).is_some() {
                return true;
            }
            t.iter_mut().any(|(_, n)| remove_nested(n, key))
        }
        toml::Value::Array(a) => a.iter_mut().any(|n| remove_nested(n, key)),
        _ => false,
    }
}

fn path_label(path: &serde_path_to_error::Path) -> String {
    let s = path.to_string();
    if s == "." {
        String::new()
    } else {
        format!("{s}: ")
    }
}

/// Parses and validates a TOML experiment description. Unknown keys and
/// invariant violations are all reported together.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut value: toml::Value = toml::from_str(text).map_err(|e| Error::Config(vec![format!("syntax: {}", e.message())]))?;
    let mut unknown = Vec::new();
    loop {
        match serde_path_to_error::deserialize::<_, ExperimentConfig>(value.clone()) {
            Ok(cfg) => {
                if !unknown.is_empty() {
                    return Err(Error::Config(unknown));
                }
                cfg.validate()?;
                return Ok(cfg);
            }
            Err(e) => {
                let path = e.path().clone();
                let msg = e.into_inner().to_string();
                let removed = match unknown_field(&msg) {
                    Some(key) => {
                        unknown.push(format!("{}unknown key `{key}`", path_label(&path)));
                        remove_key(&mut value, &path, &key)
                    }
                    None => {
                        // Drop the offending entry so later problems still surface.
                        unknown.push(format!("{}{}", path_label(&path), msg.lines().next().unwrap_or("")));
                        remove_at(&mut value, &path)
                    }
                };
                if !removed || unknown.len() >= 256 {
                    return Err(Error::Config(unknown));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::C64;

    const MINIMAL: &str = r#"
[model]
mode_frequency = 1.0
alpha1 = 0.5
beta = [1.0, 0.0]
count_rate = 0.5
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.command, Command::Simulate);
        assert_eq!(cfg.model.alpha1, C64::new(0.5, 0.0));
        assert_eq!(cfg.run, RunControls::default());
        let p = derive_params(&cfg.model).unwrap();
        assert!((p.gamma0 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn negative_rate_names_field() {
        let text = MINIMAL.replace("count_rate = 0.5", "count_rate = -0.5");
        let Err(Error::Config(v)) = parse_config(&text) else {
            panic!("accepted")
        };
        assert!(v.iter().any(|m| m.contains("model.count_rate")), "{v:?}");
    }

    #[test]
    fn all_violations_reported() {
        let text = format!("{MINIMAL}\n[run]\ntrajectories = 0\ndt = 0.5\nhorizon = -1.0\n");
        let Err(Error::Config(v)) = parse_config(&text) else {
            panic!("accepted")
        };
        assert!(v.len() >= 3, "{v:?}");
        assert!(v.iter().any(|m| m.contains("run.trajectories")));
        assert!(v.iter().any(|m| m.contains("run.horizon")));
    }

    #[test]
    fn step_size_bound() {
        let text = format!("{MINIMAL}\n[run]\ndt = 0.05\n");
        let Err(Error::Config(v)) = parse_config(&text) else {
            panic!("accepted")
        };
        assert!(v[0].contains("run.dt"), "{v:?}");
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let text = r#"
colour = "red"
[model]
alpha1 = 0.5
typo = 1
[model.laser]
amplitude = 0.1
bandwith = 0.2
[[model.channels]]
b = 0.1
[model.channels.kernel]
type = "exponential"
amplitude = 0.1
decay = 1.0
centre = 0.0
[run]
trajectoires = 5
"#;
        let Err(Error::Config(v)) = parse_config(text) else {
            panic!("accepted")
        };
        for key in ["colour", "typo", "bandwith", "centre", "trajectoires"] {
            assert!(v.iter().any(|m| m.contains(&format!("`{key}`"))), "{key}: {v:?}");
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let text = r#"
command = "spectrum"
[model]
mode_frequency = 1.25
alpha1 = [0.3, -0.1]
alpha2 = 0.4
beta = 1.0
count_rate = 0.5
initial_amplitude = [0.1, 0.2]
[model.laser]
amplitude = [0.3, 0.0]
frequency = 1.0
bandwidth = 0.05
[model.local_oscillator]
mode = "homodyne"
phase = 0.3
delay = 2.0
[[model.channels]]
b = [0.1, 0.2]
[[model.channels]]
kernel = { type = "exponential", amplitude = 0.2, decay = 0.3, center = 1.0 }
[[model.channels]]
kernel = { type = "tabulated", times = [0.0, 1.0, 2.0], values = [1.0, [0.5, 0.1], 0.0] }
[detection]
filter = { type = "tabulated", times = [0.0, 0.1, 0.2], values = [10.0, 5.0, 0.0] }
count_windows = [1.0, 5.0]
"#;
        let a = parse_config(text).unwrap();
        let s = a.to_toml().unwrap();
        let b = parse_config(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(s, b.to_toml().unwrap());
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn type_errors_are_reported_with_path() {
        let text = MINIMAL.replace("alpha1 = 0.5", "alpha1 = \"big\"");
        let Err(Error::Config(v)) = parse_config(&text) else {
            panic!("accepted")
        };
        assert!(v[0].contains("alpha1"), "{v:?}");
    }
}
