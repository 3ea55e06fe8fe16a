//! Experiment configuration: JSON schema, defaults and semantic checks.

use std::fmt;
use std::path::{Path, PathBuf};

use psz_core::{default_beta, ListenerDisplacement, RenderingMode, Scene64, UncertaintyModel64, Vec3d, Zone};
use serde::{Deserialize, Serialize};

pub const PAPER_DEFAULT: &str = "paper-default";

/// A config problem, anchored to a line of the source file when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn semantic(field: &str, message: impl Into<String>) -> Self {
        Self { path: None, line: None, column: None, field: Some(field.to_string()), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}", p.display())?;
            if let Some(l) = self.line {
                write!(f, ":{l}")?;
                if let Some(c) = self.column {
                    write!(f, ":{c}")?;
                }
            }
            write!(f, ": ")?;
        } else if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(field) = &self.field {
            write!(f, "`{field}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneSpec {
    Preset(String),
    Layout(Box<SceneLayout>),
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec::Preset(PAPER_DEFAULT.to_string())
    }
}

/// Explicit layout. Indices are 1-based. With `preset` set, omitted fields
/// fall back to the preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneLayout {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speakers: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_points: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone_a: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone_b: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program_a: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program_b: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub virtual_sources: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sound_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub piston_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub start_hz: f64,
    pub stop_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_octave: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_hz: Option<f64>,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self { start_hz: 100.0, stop_hz: 10_000.0, points_per_octave: Some(48), step_hz: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySpec {
    /// Shared amplitude and phase variance.
    pub sigma_sq: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_amp_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_phase_sq: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_trials() -> usize {
    10
}

impl Default for UncertaintySpec {
    fn default() -> Self {
        Self { sigma_sq: 1e-4, sigma_amp_sq: None, sigma_phase_sq: None, trials: 10, seed: 2022 }
    }
}

/// `"auto"` (β = K·σ²), a constant, or a per-frequency table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegularizationSpec {
    Rule(String),
    Constant(f64),
    Table { table: Vec<[f64; 2]> },
}

impl Default for RegularizationSpec {
    fn default() -> Self {
        RegularizationSpec::Rule("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ListenerCase {
    pub name: String,
    pub listener: String,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignSource {
    /// Filters re-optimised for the displaced listener.
    Moved,
    /// Filters designed for the centred listeners.
    Centered,
}

impl DesignSource {
    pub fn name(self) -> &'static str {
        match self {
            DesignSource::Moved => "moved",
            DesignSource::Centered => "centered",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapRequest {
    #[serde(default = "default_map_mode")]
    pub mode: String,
    /// Listener whose program is the target.
    #[serde(default = "default_map_listener")]
    pub listener: String,
    pub frequencies_hz: Vec<f64>,
    pub levels_db: Vec<f64>,
    #[serde(default = "default_region")]
    pub region: RegionSpec,
    #[serde(default = "default_resolution")]
    pub resolution_m: f64,
    #[serde(default = "default_cap")]
    pub cap_db: f64,
}

fn default_map_mode() -> String {
    "mono".into()
}
fn default_map_listener() -> String {
    "A".into()
}
fn default_region() -> RegionSpec {
    RegionSpec { x_min: -1.0, x_max: 0.0, y_min: 0.0, y_max: 2.0 }
}
fn default_resolution() -> f64 {
    0.02
}
fn default_cap() -> f64 {
    40.0
}

fn default_modes() -> Vec<String> {
    vec!["mono".into(), "stereo".into(), "xtc".into()]
}

fn default_designs() -> Vec<DesignSource> {
    vec![DesignSource::Moved, DesignSource::Centered]
}

/// On-disk experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scene: SceneSpec,
    #[serde(default)]
    pub frequencies: FrequencyGrid,
    #[serde(default = "default_modes")]
    pub modes: Vec<String>,
    #[serde(default)]
    pub uncertainty: UncertaintySpec,
    #[serde(default)]
    pub regularization: RegularizationSpec,
    #[serde(default)]
    pub listener_cases: Vec<ListenerCase>,
    #[serde(default = "default_designs")]
    pub design_sources: Vec<DesignSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps: Option<MapRequest>,
    #[serde(default)]
    pub export_filters: bool,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Free-field two-listener study: 8-unit array, σ² = 1e-4 on amplitude
    /// and phase, 10-trial averaging, β = K·σ², listener A displaced by
    /// (-0.3, -0.2) m, IPI maps at 0.5/1/2 kHz with 20 and 30 dB contours.
    pub fn paper_default() -> Self {
        Self {
            scene: SceneSpec::default(),
            frequencies: FrequencyGrid::default(),
            modes: default_modes(),
            uncertainty: UncertaintySpec::default(),
            regularization: RegularizationSpec::default(),
            listener_cases: vec![ListenerCase { name: "moved_a".into(), listener: "A".into(), dx: -0.3, dy: -0.2 }],
            design_sources: default_designs(),
            maps: Some(MapRequest {
                mode: default_map_mode(),
                listener: default_map_listener(),
                frequencies_hz: vec![500.0, 1000.0, 2000.0],
                levels_db: vec![20.0, 30.0],
                region: default_region(),
                resolution_m: default_resolution(),
                cap_db: default_cap(),
            }),
            export_filters: false,
            output_dir: PathBuf::from("psz-output"),
        }
    }

    pub fn template_json() -> String {
        serde_json::to_string_pretty(&Self::paper_default()).expect("serializable") + "\n"
    }

    /// Parses JSON text; syntax errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError {
            path: None,
            line: Some(e.line()),
            column: Some(e.column()),
            field: None,
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            line: None,
            column: None,
            field: None,
            message: format!("cannot read config: {e}"),
        })?;
        let cfg = Self::from_json(&text).map_err(|e| ConfigError { path: Some(path.to_path_buf()), ..e })?;
        Ok((cfg, text))
    }
}

/// Regularization rule after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaRule {
    /// `β = K σ²` with the stored value.
    Auto(f64),
    Constant(f64),
    /// Piecewise-linear in frequency, clamped at the ends.
    Table(Vec<(f64, f64)>),
}

impl BetaRule {
    pub fn at(&self, frequency: f64) -> f64 {
        match self {
            BetaRule::Auto(b) | BetaRule::Constant(b) => *b,
            BetaRule::Table(t) => {
                let (first, last) = (t[0], t[t.len() - 1]);
                if frequency <= first.0 {
                    return first.1;
                }
                if frequency >= last.0 {
                    return last.1;
                }
                let idx = t.partition_point(|&(f, _)| f <= frequency);
                let (f0, b0) = t[idx - 1];
                let (f1, b1) = t[idx];
                b0 + (b1 - b0) * (frequency - f0) / (f1 - f0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedCase {
    pub name: String,
    pub displacement: ListenerDisplacement<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedMap {
    pub mode: RenderingMode,
    pub listener: Zone,
    pub frequencies: Vec<f64>,
    pub levels_db: Vec<f64>,
    pub region: psz_core::Region64,
    pub resolution: f64,
    pub cap_db: f64,
}

/// Fully validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub source: ExperimentConfig,
    pub scene: Scene64,
    pub frequencies: Vec<f64>,
    pub modes: Vec<RenderingMode>,
    pub uncertainty: UncertaintyModel64,
    pub beta: BetaRule,
    pub cases: Vec<ResolvedCase>,
    pub designs: Vec<DesignSource>,
    pub map: Option<ResolvedMap>,
    pub output_dir: PathBuf,
}

/// Log-spaced (`points_per_octave`) or linear (`step_hz`) grid from start to stop inclusive.
pub fn frequency_grid(grid: &FrequencyGrid) -> Result<Vec<f64>, ConfigError> {
    let f = "frequencies";
    if !(grid.start_hz > 0.0) || !grid.start_hz.is_finite() {
        return Err(ConfigError::semantic("frequencies.start_hz", "must be positive"));
    }
    if !(grid.stop_hz > grid.start_hz) || !grid.stop_hz.is_finite() {
        return Err(ConfigError::semantic("frequencies.stop_hz", "stop frequency must exceed start frequency"));
    }
    let tol = 1e-9 * grid.stop_hz;
    match (grid.points_per_octave, grid.step_hz) {
        (Some(ppo), None) => {
            if ppo == 0 {
                return Err(ConfigError::semantic("frequencies.points_per_octave", "must be at least 1"));
            }
            let octaves = (grid.stop_hz / grid.start_hz).log2();
            let n = (octaves * f64::from(ppo) + 1e-9).floor() as usize;
            Ok((0..=n)
                .map(|i| grid.start_hz * 2f64.powf(i as f64 / f64::from(ppo)))
                .filter(|&x| x <= grid.stop_hz + tol)
                .collect())
        }
        (None, Some(step)) => {
            if !(step > 0.0) {
                return Err(ConfigError::semantic("frequencies.step_hz", "must be positive"));
            }
            let n = ((grid.stop_hz - grid.start_hz) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| grid.start_hz + step * i as f64).collect())
        }
        _ => Err(ConfigError::semantic(f, "set exactly one of `points_per_octave` or `step_hz`")),
    }
}

fn one_based(field: &str, idx: &[usize]) -> Result<Vec<usize>, ConfigError> {
    idx.iter()
        .map(|&i| i.checked_sub(1).ok_or_else(|| ConfigError::semantic(field, "indices are 1-based; 0 is not valid")))
        .collect()
}

fn vec3(p: [f64; 3]) -> Vec3d {
    Vec3d::new(p[0], p[1], p[2])
}

fn resolve_scene(spec: &SceneSpec) -> Result<Scene64, ConfigError> {
    let layout = match spec {
        SceneSpec::Preset(name) => SceneLayout { preset: Some(name.clone()), ..Default::default() },
        SceneSpec::Layout(l) => (**l).clone(),
    };
    let base = match layout.preset.as_deref() {
        Some(PAPER_DEFAULT) => Some(Scene64::paper_default()),
        Some(other) => return Err(ConfigError::semantic("scene", format!("unknown preset `{other}`"))),
        None => None,
    };
    macro_rules! pick {
        ($field:ident, $conv:expr, $name:literal) => {
            match (&layout.$field, &base) {
                (Some(v), _) => $conv(v)?,
                (None, Some(b)) => b.$field.clone(),
                (None, None) => {
                    return Err(ConfigError::semantic(concat!("scene.", $name), "required when no preset is given"))
                }
            }
        };
    }
    let pts = |v: &Vec<[f64; 3]>| -> Result<Vec<Vec3d>, ConfigError> { Ok(v.iter().copied().map(vec3).collect()) };
    let scene = Scene64 {
        speakers: pick!(speakers, pts, "speakers"),
        speaker_axis: match layout.speaker_axis {
            Some(a) => vec3(a),
            None => base.as_ref().map_or(Vec3d::new(0.0, 1.0, 0.0), |b| b.speaker_axis),
        },
        control_points: pick!(control_points, pts, "control_points"),
        zone_a: pick!(zone_a, |v: &Vec<usize>| one_based("scene.zone_a", v), "zone_a"),
        zone_b: pick!(zone_b, |v: &Vec<usize>| one_based("scene.zone_b", v), "zone_b"),
        program_a: pick!(program_a, |v: &Vec<usize>| one_based("scene.program_a", v), "program_a"),
        program_b: pick!(program_b, |v: &Vec<usize>| one_based("scene.program_b", v), "program_b"),
        virtual_sources: pick!(
            virtual_sources,
            |v: &Vec<usize>| one_based("scene.virtual_sources", v),
            "virtual_sources"
        ),
        sound_speed: layout.sound_speed.or(base.as_ref().map(|b| b.sound_speed)).unwrap_or(343.0),
        piston_radius: layout.piston_radius.or(base.as_ref().map(|b| b.piston_radius)).unwrap_or(0.05),
    };
    let violations = scene.validate();
    if !violations.is_empty() {
        let msg = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        return Err(ConfigError::semantic("scene", msg));
    }
    Ok(scene)
}

fn parse_modes(modes: &[String], field: &str) -> Result<Vec<RenderingMode>, ConfigError> {
    let mut out = Vec::new();
    for m in modes {
        let mode: RenderingMode =
            m.parse().map_err(|e: psz_core::PszError| ConfigError::semantic(field, e.to_string()))?;
        if !out.contains(&mode) {
            out.push(mode);
        }
    }
    Ok(out)
}

impl ResolvedConfig {
    pub fn resolve(cfg: ExperimentConfig) -> Result<Self, ConfigError> {
        let scene = resolve_scene(&cfg.scene)?;
        let frequencies = frequency_grid(&cfg.frequencies)?;

        if cfg.modes.is_empty() {
            return Err(ConfigError::semantic("modes", "at least one rendering mode is required"));
        }
        let modes = parse_modes(&cfg.modes, "modes")?;
        for &m in &modes {
            if m == RenderingMode::Xtc {
                for z in [Zone::A, Zone::B] {
                    if scene.program_channels(z).len() != scene.zone_points(z).len() {
                        return Err(ConfigError::semantic(
                            "modes",
                            format!("xtc needs one channel per control point in zone {z}"),
                        ));
                    }
                }
            }
        }

        let u = &cfg.uncertainty;
        let sigma_amp = u.sigma_amp_sq.unwrap_or(u.sigma_sq);
        let sigma_phase = u.sigma_phase_sq.unwrap_or(u.sigma_sq);
        for (field, v) in [
            ("uncertainty.sigma_sq", u.sigma_sq),
            ("uncertainty.sigma_amp_sq", sigma_amp),
            ("uncertainty.sigma_phase_sq", sigma_phase),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ConfigError::semantic(field, format!("variance must be nonnegative, got {v}")));
            }
        }
        if u.trials == 0 {
            return Err(ConfigError::semantic("uncertainty.trials", "must be at least 1"));
        }
        let uncertainty =
            UncertaintyModel64 { sigma_amp_sq: sigma_amp, sigma_phase_sq: sigma_phase, trials: u.trials, seed: u.seed };

        let beta = match &cfg.regularization {
            RegularizationSpec::Rule(r) if r == "auto" => {
                BetaRule::Auto(default_beta(scene.control_points.len(), u.sigma_sq))
            }
            RegularizationSpec::Rule(r) => {
                return Err(ConfigError::semantic(
                    "regularization",
                    format!("unknown rule `{r}` (use \"auto\", a number or a table)"),
                ))
            }
            RegularizationSpec::Constant(b) => {
                if !(*b >= 0.0) || !b.is_finite() {
                    return Err(ConfigError::semantic("regularization", "beta must be nonnegative"));
                }
                BetaRule::Constant(*b)
            }
            RegularizationSpec::Table { table } => {
                if table.is_empty() {
                    return Err(ConfigError::semantic("regularization.table", "table is empty"));
                }
                if table.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    return Err(ConfigError::semantic(
                        "regularization.table",
                        "frequencies must be strictly increasing",
                    ));
                }
                if table.iter().any(|e| !(e[1] >= 0.0)) {
                    return Err(ConfigError::semantic("regularization.table", "beta must be nonnegative"));
                }
                BetaRule::Table(table.iter().map(|e| (e[0], e[1])).collect())
            }
        };

        let mut cases = Vec::new();
        for (n, c) in cfg.listener_cases.iter().enumerate() {
            let field = format!("listener_cases[{n}]");
            let listener: Zone =
                c.listener.parse().map_err(|e: psz_core::PszError| ConfigError::semantic(&field, e.to_string()))?;
            if c.name.is_empty()
                || c.name == "centered"
                || !c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-')
            {
                return Err(ConfigError::semantic(&field, "name must be nonempty [A-Za-z0-9_-] and not `centered`"));
            }
            if cases.iter().any(|x: &ResolvedCase| x.name == c.name) {
                return Err(ConfigError::semantic(&field, format!("duplicate case name `{}`", c.name)));
            }
            if !c.dx.is_finite() || !c.dy.is_finite() {
                return Err(ConfigError::semantic(&field, "displacement must be finite"));
            }
            let displacement = ListenerDisplacement::new(listener, c.dx, c.dy);
            let moved = scene.move_listener(&displacement);
            if let Some(v) = moved.validate().first() {
                return Err(ConfigError::semantic(&field, format!("moved scene invalid: {v}")));
            }
            cases.push(ResolvedCase { name: c.name.clone(), displacement });
        }
        let mut designs = cfg.design_sources.clone();
        designs.sort();
        designs.dedup();
        if designs.is_empty() && !cases.is_empty() {
            return Err(ConfigError::semantic("design_sources", "at least one design source is required"));
        }

        let map = match &cfg.maps {
            None => None,
            Some(m) => {
                let mode = parse_modes(std::slice::from_ref(&m.mode), "maps.mode")?[0];
                let listener: Zone = m
                    .listener
                    .parse()
                    .map_err(|e: psz_core::PszError| ConfigError::semantic("maps.listener", e.to_string()))?;
                if m.frequencies_hz.is_empty() || m.frequencies_hz.iter().any(|f| !(*f > 0.0)) {
                    return Err(ConfigError::semantic("maps.frequencies_hz", "need at least one positive frequency"));
                }
                if m.levels_db.is_empty() || m.levels_db.iter().any(|l| !l.is_finite()) {
                    return Err(ConfigError::semantic("maps.levels_db", "need at least one finite level"));
                }
                if !(m.resolution_m > 0.0) {
                    return Err(ConfigError::semantic("maps.resolution_m", "must be positive"));
                }
                if !m.cap_db.is_finite() {
                    return Err(ConfigError::semantic("maps.cap_db", "must be finite"));
                }
                let r = &m.region;
                let region = psz_core::Region64::new(r.x_min, r.x_max, r.y_min, r.y_max)
                    .map_err(|e| ConfigError::semantic("maps.region", e.to_string()))?;
                Some(ResolvedMap {
                    mode,
                    listener,
                    frequencies: m.frequencies_hz.clone(),
                    levels_db: m.levels_db.clone(),
                    region,
                    resolution: m.resolution_m,
                    cap_db: m.cap_db,
                })
            }
        };

        Ok(Self {
            output_dir: cfg.output_dir.clone(),
            source: cfg,
            scene,
            frequencies,
            modes,
            uncertainty,
            beta,
            cases,
            designs,
            map,
        })
    }

    /// Loads, parses and resolves a config file; semantic errors are
    /// anchored to the line where the offending key first appears.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let (cfg, text) = ExperimentConfig::load(path)?;
        Self::resolve(cfg).map_err(|e| {
            let line = e.field.as_deref().and_then(|f| locate_field(&text, f));
            ConfigError { path: Some(path.to_path_buf()), line: e.line.or(line), ..e }
        })
    }

    /// Overrides the RNG seed (e.g. from the command line).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.uncertainty.seed = seed;
        self.source.uncertainty.seed = seed;
        self
    }

    pub fn with_output_dir(mut self, dir: PathBuf) -> Self {
        self.output_dir = dir.clone();
        self.source.output_dir = dir;
        self
    }

    /// Resolved settings as JSON, defaults filled in.
    pub fn summary(&self) -> serde_json::Value {
        let beta = match &self.beta {
            BetaRule::Auto(b) => {
                serde_json::json!({ "rule": "K*sigma^2", "points": self.scene.control_points.len(), "value": b })
            }
            BetaRule::Constant(b) => serde_json::json!({ "rule": "constant", "value": b }),
            BetaRule::Table(t) => serde_json::json!({ "rule": "table", "table": t }),
        };
        serde_json::json!({
            "config": self.source,
            "resolved": {
                "speakers": self.scene.speakers.len(),
                "control_points": self.scene.control_points.len(),
                "frequency_points": self.frequencies.len(),
                "first_frequency_hz": self.frequencies.first(),
                "last_frequency_hz": self.frequencies.last(),
                "modes": self.modes.iter().map(|m| m.name()).collect::<Vec<_>>(),
                "beta": beta,
                "sigma_amp_sq": self.uncertainty.sigma_amp_sq,
                "sigma_phase_sq": self.uncertainty.sigma_phase_sq,
                "trials": self.uncertainty.trials,
                "seed": self.uncertainty.seed,
            }
        })
    }
}

/// 1-based line of the deepest key of a dotted field path, e.g.
/// `uncertainty.sigma_sq` or `listener_cases[0]`.
fn locate_field(text: &str, field: &str) -> Option<usize> {
    let keys: Vec<&str> = field.split('.').map(|k| k.split('[').next().unwrap_or(k)).collect();
    let mut from = 0usize;
    let mut found = None;
    for key in keys {
        let needle = format!("\"{key}\"");
        if let Some(pos) = text[from..].find(&needle) {
            from += pos;
            found = Some(from);
        }
    }
    found.map(|pos| text[..pos].matches('\n').count() + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_round_trips() {
        let text = ExperimentConfig::template_json();
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg, ExperimentConfig::paper_default());
        let r = ResolvedConfig::resolve(cfg).unwrap();
        assert_eq!(r.beta, BetaRule::Auto(4.0 * 1e-4));
        assert!((r.beta.at(1000.0) - 4e-4).abs() < 1e-18);
        assert_eq!(r.modes.len(), 3);
        assert_eq!(r.cases.len(), 1);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = frequency_grid(&FrequencyGrid::default()).unwrap();
        assert_eq!(g[0], 100.0);
        // log2(100) octaves * 48 = 318.9 -> 318 whole steps
        assert_eq!(g.len(), 318 + 1);
        let last = *g.last().unwrap();
        assert!(last < 10_000.0 && last * 2f64.powf(1.0 / 48.0) > 10_000.0);
        let lin = frequency_grid(&FrequencyGrid {
            start_hz: 100.0,
            stop_hz: 200.0,
            points_per_octave: None,
            step_hz: Some(25.0),
        })
        .unwrap();
        assert_eq!(lin, vec![100.0, 125.0, 150.0, 175.0, 200.0]);
    }

    #[test]
    fn negative_variance_rejected_with_line() {
        let text = ExperimentConfig::template_json().replace("\"sigma_sq\": 0.0001", "\"sigma_sq\": -0.0001");
        assert!(text.contains("-0.0001"));
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        let err = ResolvedConfig::resolve(cfg).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("uncertainty.sigma_sq"));
        let line = locate_field(&text, "uncertainty.sigma_sq").unwrap();
        assert!(text.lines().nth(line - 1).unwrap().contains("sigma_sq"));
    }

    #[test]
    fn reversed_band_rejected() {
        let mut cfg = ExperimentConfig::paper_default();
        cfg.frequencies.start_hz = 5000.0;
        cfg.frequencies.stop_hz = 100.0;
        let err = ResolvedConfig::resolve(cfg).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("frequencies.stop_hz"));
    }

    #[test]
    fn syntax_error_has_position() {
        let err = ExperimentConfig::from_json("{\n  \"output_dir\": \"x\",\n  oops\n}").unwrap_err();
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn unknown_fields_and_modes_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"output_dir": "x", "bogus": 1}"#).is_err());
        let mut cfg = ExperimentConfig::paper_default();
        cfg.modes = vec!["surround".into()];
        assert!(ResolvedConfig::resolve(cfg).is_err());
        let mut cfg = ExperimentConfig::paper_default();
        cfg.modes.clear();
        assert!(ResolvedConfig::resolve(cfg).is_err());
    }

    #[test]
    fn custom_layout_is_one_based() {
        let text = r#"{
          "scene": {
            "speakers": [[-0.5, 0, 0], [0.5, 0, 0]],
            "control_points": [[-0.5, 1, 0], [0.5, 1, 0]],
            "zone_a": [1], "zone_b": [2],
            "program_a": [1], "program_b": [2],
            "virtual_sources": [1, 2]
          },
          "modes": ["mono", "stereo", "xtc"],
          "output_dir": "out"
        }"#;
        let r = ResolvedConfig::resolve(ExperimentConfig::from_json(text).unwrap()).unwrap();
        assert_eq!(r.scene.zone_a, vec![0]);
        assert_eq!(r.scene.virtual_sources, vec![0, 1]);
        assert_eq!(r.scene.sound_speed, 343.0);

        let bad = text.replace("\"zone_b\": [2]", "\"zone_b\": [1]");
        assert!(ResolvedConfig::resolve(ExperimentConfig::from_json(&bad).unwrap()).is_err());
        let zero = text.replace("\"zone_b\": [2]", "\"zone_b\": [0]");
        assert!(ResolvedConfig::resolve(ExperimentConfig::from_json(&zero).unwrap()).is_err());
    }

    #[test]
    fn preset_with_overrides() {
        let text = r#"{"scene": {"preset": "paper-default", "piston_radius": 0.04}, "output_dir": "o"}"#;
        let r = ResolvedConfig::resolve(ExperimentConfig::from_json(text).unwrap()).unwrap();
        assert_eq!(r.scene.piston_radius, 0.04);
        assert_eq!(r.scene.speakers.len(), 8);
    }

    #[test]
    fn beta_table_interpolates() {
        let rule = BetaRule::Table(vec![(100.0, 1e-3), (1000.0, 1e-4)]);
        assert_eq!(rule.at(50.0), 1e-3);
        assert_eq!(rule.at(5000.0), 1e-4);
        assert!((rule.at(550.0) - 5.5e-4).abs() < 1e-15);
    }
}
