//! `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, strings are double
//! quoted, booleans are `true`/`false`, numbers are integers or floats.
//! Dotted keys such as `elasticity.bone = 10.0` address per-label tables.
//! Known keys are type-checked at parse time; unknown keys are kept and
//! reported with a warning.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::evolver::{EvolverConfig, NoiseMethod, RepairMethod};
use crate::meshgen::PointPlacementConfig;
use crate::objectives::{MagnitudeMetric, ObjectiveConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Integer(i64),
    Float(f64),
    String(String),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "boolean",
            Value::Integer(_) => "integer",
            Value::Float(_) => "float",
            Value::String(_) => "string",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::String(s) => {
                let quoted = serde_json::to_string(s).map_err(|_| fmt::Error)?;
                f.write_str(&quoted)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Bool,
    Count,
    Float,
    Str,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Bool => "a boolean",
            Kind::Count => "a non-negative integer",
            Kind::Float => "a number",
            Kind::Str => "a string",
        }
    }

    fn accepts(self, v: &Value) -> bool {
        match (self, v) {
            (Kind::Bool, Value::Bool(_)) => true,
            (Kind::Count, Value::Integer(i)) => *i >= 0,
            (Kind::Float, Value::Integer(_) | Value::Float(_)) => true,
            (Kind::Str, Value::String(_)) => true,
            _ => false,
        }
    }
}

const KEYS: &[(&str, Kind)] = &[
    ("seed", Kind::Count),
    ("ea_num_generations", Kind::Count),
    ("ea_population_size", Kind::Count),
    ("ea_num_clusters", Kind::Count),
    ("ea_archive_size", Kind::Count),
    ("ea_selection_fraction", Kind::Float),
    ("ea_adaptive_steering_enabled", Kind::Bool),
    ("ea_adaptive_steering_activated_at_num_generations", Kind::Count),
    ("ea_adaptive_steering_guidance_threshold", Kind::Float),
    ("morea_repair_method", Kind::Str),
    ("morea_repair_num_samples", Kind::Count),
    ("morea_repair_sigma_scale", Kind::Float),
    ("morea_init_noise_method", Kind::Str),
    ("morea_init_noise_factor", Kind::Float),
    ("morea_init_noise_num_kernels", Kind::Count),
    ("morea_init_noise_rounds", Kind::Count),
    ("morea_mesh_num_points", Kind::Count),
    ("morea_mesh_random_fraction", Kind::Float),
    ("morea_mesh_surface_object", Kind::Str),
    ("morea_mesh_surface_budget", Kind::Count),
    ("morea_max_num_mesh_levels", Kind::Count),
    ("morea_sampling_rate", Kind::Float),
    ("morea_magnitude_metric", Kind::Str),
    ("morea_image_metric", Kind::Str),
    ("morea_guidance_metric", Kind::Str),
    ("morea_guidance_radius_mm", Kind::Float),
    ("morea_fos_type", Kind::Str),
    ("morea_symmetry_mode", Kind::Str),
    ("morea_dual_dynamic_mode", Kind::Str),
    ("morea_ams_strategy", Kind::Str),
];

const TABLES: &[(&str, Kind)] = &[("elasticity", Kind::Float), ("allocation", Kind::Float)];

const FIXED: &[(&str, &str)] = &[
    ("morea_image_metric", "squared-differences"),
    ("morea_guidance_metric", "continuous-per-group"),
    ("morea_fos_type", "edges"),
    ("morea_symmetry_mode", "transform-both"),
    ("morea_dual_dynamic_mode", "dual"),
    ("morea_ams_strategy", "none"),
];

fn kind_of(key: &str) -> Option<Kind> {
    if let Some(&(_, k)) = KEYS.iter().find(|(name, _)| *name == key) {
        return Some(k);
    }
    let (table, rest) = key.split_once('.')?;
    if rest.is_empty() {
        return None;
    }
    TABLES.iter().find(|(t, _)| *t == table).map(|&(_, k)| k)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, Value>,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let syntax = |reason: &str| Error::ConfigSyntax {
            line,
            reason: reason.to_string(),
        };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, rest) = trimmed.split_once('=').ok_or_else(|| syntax("expected `key = value`"))?;
        let key = key.trim();
        let valid_key = !key.is_empty()
            && key.split('.').all(|part| {
                !part.is_empty()
                    && part
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            });
        if !valid_key {
            return Err(syntax("invalid key"));
        }
        let value = parse_value(rest.trim()).map_err(|reason| syntax(&reason))?;
        if entries.contains_key(key) {
            return Err(Error::DuplicateKey(key.to_string()));
        }
        match kind_of(key) {
            Some(kind) if !kind.accepts(&value) => {
                return Err(Error::TypeMismatch {
                    key: key.to_string(),
                    expected: kind.name(),
                    found: format!("{} {value}", value.type_name()),
                })
            }
            Some(_) => {}
            None => log::warn!("unknown config key `{key}` kept but ignored"),
        }
        entries.insert(key.to_string(), value);
    }
    Ok(RunConfig { entries })
}

fn parse_value(text: &str) -> std::result::Result<Value, String> {
    if text.starts_with('"') {
        let bytes = text.as_bytes();
        let mut end = None;
        let mut i = 1;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 2,
                b'"' => {
                    end = Some(i);
                    break;
                }
                _ => i += 1,
            }
        }
        let end = end.ok_or("unterminated string")?;
        let tail = text[end + 1..].trim();
        if !tail.is_empty() && !tail.starts_with('#') {
            return Err(format!("unexpected text after string: {tail}"));
        }
        let s: String =
            serde_json::from_str(&text[..=end]).map_err(|e| format!("bad string: {e}"))?;
        return Ok(Value::String(s));
    }
    let token = text.split('#').next().unwrap_or("").trim();
    match token {
        "" => Err("missing value".into()),
        "true" => Ok(Value::Bool(true)),
        "false" => Ok(Value::Bool(false)),
        _ => {
            let plain = token.replace('_', "");
            if let Ok(i) = plain.parse::<i64>() {
                Ok(Value::Integer(i))
            } else if plain.contains(|c: char| c.is_ascii_digit()) {
                match plain.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(Value::Float(x)),
                    _ => Err(format!("unrecognized value `{token}`")),
                }
            } else {
                Err(format!("unrecognized value `{token}` (strings must be quoted)"))
            }
        }
    }
}

impl RunConfig {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn unknown_keys(&self) -> Vec<&str> {
        self.entries
            .keys()
            .filter(|k| kind_of(k).is_none())
            .map(String::as_str)
            .collect()
    }

    pub fn set(&mut self, key: &str, value: Value) -> Result<()> {
        if let Some(kind) = kind_of(key) {
            if !kind.accepts(&value) {
                return Err(Error::TypeMismatch {
                    key: key.to_string(),
                    expected: kind.name(),
                    found: format!("{} {value}", value.type_name()),
                });
            }
        }
        self.entries.insert(key.to_string(), value);
        Ok(())
    }

    pub fn require(&self, keys: &[&str]) -> Result<()> {
        match keys.iter().find(|k| !self.entries.contains_key(**k)) {
            Some(k) => Err(Error::MissingKey(k.to_string())),
            None => Ok(()),
        }
    }

    pub fn bool(&self, key: &str) -> Option<bool> {
        match self.entries.get(key)? {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn count(&self, key: &str) -> Option<u64> {
        match self.entries.get(key)? {
            Value::Integer(i) => u64::try_from(*i).ok(),
            _ => None,
        }
    }

    pub fn float(&self, key: &str) -> Option<f64> {
        match self.entries.get(key)? {
            Value::Integer(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn string(&self, key: &str) -> Option<&str> {
        match self.entries.get(key)? {
            Value::String(s) => Some(s),
            _ => None,
        }
    }

    fn size(&self, key: &str) -> Option<usize> {
        self.count(key).map(|c| c as usize)
    }

    /// Entries `table.<label> = <number>` in label order.
    pub fn table(&self, table: &str) -> Vec<(String, f64)> {
        let prefix = format!("{table}.");
        self.entries
            .iter()
            .filter_map(|(k, _)| {
                let label = k.strip_prefix(&prefix)?;
                Some((label.to_string(), self.float(k)?))
            })
            .collect()
    }

    pub fn seed(&self) -> Result<u64> {
        self.require(&["seed"])?;
        Ok(self.count("seed").unwrap_or(0))
    }

    fn check_fixed(&self) -> Result<()> {
        for (key, only) in FIXED {
            if let Some(v) = self.string(key) {
                if v != *only {
                    return Err(Error::Config(format!(
                        "`{key}` = {v:?} is not supported (only {only:?})"
                    )));
                }
            }
        }
        if let Some(levels) = self.count("morea_max_num_mesh_levels") {
            if levels != 1 {
                return Err(Error::Config(
                    "`morea_max_num_mesh_levels` must be 1".to_string(),
                ));
            }
        }
        Ok(())
    }

    pub fn evolver_config(&self) -> Result<EvolverConfig> {
        self.check_fixed()?;
        let mut cfg = EvolverConfig::default();
        if let Some(v) = self.size("ea_num_generations") {
            cfg.num_generations = v;
        }
        if let Some(v) = self.size("ea_population_size") {
            cfg.population_size = v;
        }
        if let Some(v) = self.size("ea_num_clusters") {
            cfg.num_clusters = v;
        }
        if let Some(v) = self.size("ea_archive_size") {
            cfg.archive_capacity = v;
        }
        if let Some(v) = self.float("ea_selection_fraction") {
            cfg.selection_fraction = v;
        }
        if let Some(v) = self.bool("ea_adaptive_steering_enabled") {
            cfg.steering_enabled = v;
        }
        if let Some(v) = self.size("ea_adaptive_steering_activated_at_num_generations") {
            cfg.steering_activation_generation = v;
        }
        if let Some(v) = self.float("ea_adaptive_steering_guidance_threshold") {
            cfg.steering_ratio = v;
        }
        if let Some(v) = self.string("morea_repair_method") {
            cfg.repair_method = v.parse::<RepairMethod>()?;
        }
        if let Some(v) = self.size("morea_repair_num_samples") {
            cfg.repair.samples = v;
        }
        if let Some(v) = self.float("morea_repair_sigma_scale") {
            cfg.repair.sigma_scale = v;
        }
        if let Some(v) = self.string("morea_init_noise_method") {
            cfg.noise.method = v.parse::<NoiseMethod>()?;
        }
        if let Some(v) = self.float("morea_init_noise_factor") {
            cfg.noise.factor = v;
        }
        if let Some(v) = self.size("morea_init_noise_num_kernels") {
            cfg.noise.kernel_count = v;
        }
        if let Some(v) = self.size("morea_init_noise_rounds") {
            cfg.noise.rounds = v;
        }
        if let Some(v) = self.count("seed") {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn objective_config(&self) -> Result<ObjectiveConfig> {
        self.check_fixed()?;
        let mut cfg = ObjectiveConfig::default();
        if let Some(v) = self.float("morea_sampling_rate") {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(
                    "morea_sampling_rate must be positive".to_string(),
                ));
            }
            cfg.sampling_rate = v;
        }
        if let Some(v) = self.string("morea_magnitude_metric") {
            cfg.magnitude_metric = match v {
                "biomechanical" => MagnitudeMetric::Biomechanical,
                "homogeneous" => MagnitudeMetric::Homogeneous,
                other => {
                    return Err(Error::Config(format!("unknown magnitude metric {other:?}")))
                }
            };
        }
        for (label, factor) in self.table("elasticity") {
            if !(factor > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "elasticity.{label} must be positive"
                )));
            }
            match cfg.elasticity.iter_mut().find(|(l, _)| *l == label) {
                Some(entry) => entry.1 = factor,
                None => cfg.elasticity.push((label, factor)),
            }
        }
        if let Some(v) = self.float("morea_guidance_radius_mm") {
            cfg.guidance_radius_mm = Some(v);
        }
        Ok(cfg)
    }

    pub fn placement_config(&self) -> Result<PointPlacementConfig> {
        self.check_fixed()?;
        let mut cfg = PointPlacementConfig::default();
        if let Some(v) = self.size("morea_mesh_num_points") {
            cfg.total_points = v;
        }
        if let Some(v) = self.float("morea_mesh_random_fraction") {
            cfg.random_fraction = v;
        }
        if let Some(v) = self.string("morea_mesh_surface_object") {
            cfg.surface_object = Some(v.to_string());
        }
        if let Some(v) = self.size("morea_mesh_surface_budget") {
            cfg.surface_budget = v;
        }
        cfg.allocation = self.table("allocation");
        Ok(cfg)
    }

    /// Canonical text form: one line per key in key order. Parsing it back
    /// yields an equal configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_parameter_file() {
        let text = r#"
# evolutionary settings
ea_num_generations = 500
ea_population_size = 700
ea_num_clusters = 10
ea_archive_size = 2000
ea_adaptive_steering_enabled = true
ea_adaptive_steering_activated_at_num_generations = 100
ea_adaptive_steering_guidance_threshold = 1.5
morea_init_noise_method = "global-gaussian"
morea_init_noise_factor = 1.0
morea_sampling_rate = 1.0   # inline comment
morea_repair_method = "gaussian"
cuda_gpu_id = 0
elasticity.bone = 10
seed = 3
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.get("ea_num_clusters"), Some(&Value::Integer(10)));
        assert_eq!(cfg.unknown_keys(), vec!["cuda_gpu_id"]);
        let ev = cfg.evolver_config().unwrap();
        assert_eq!(ev.population_size, 700);
        assert_eq!(ev.steering_ratio, 1.5);
        assert_eq!(ev.seed, 3);
        let obj = cfg.objective_config().unwrap();
        assert!(obj.elasticity.contains(&("bone".to_string(), 10.0)));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_config("ea_num_generations = \"abc\""),
            Err(Error::TypeMismatch { .. })
        ));
        assert!(matches!(
            parse_config("seed = 1\nseed = 2"),
            Err(Error::DuplicateKey(k)) if k == "seed"
        ));
        assert!(matches!(
            parse_config("").unwrap().seed(),
            Err(Error::MissingKey(k)) if k == "seed"
        ));
        assert!(matches!(
            parse_config("ea_population_size = -3"),
            Err(Error::TypeMismatch { .. })
        ));
        assert!(matches!(
            parse_config("name = bare"),
            Err(Error::ConfigSyntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("morea_fos_type = \"tets\"").unwrap().evolver_config(),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn text_round_trip() {
        let cfg = parse_config(
            "a = \"q\\\"x # y\"\nb = 1e-7\nc = false\nseed = 9\nelasticity.bone = 2.5",
        )
        .unwrap();
        let again = parse_config(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.string("a"), Some("q\"x # y"));
        assert_eq!(again.to_text(), cfg.to_text());
    }
}
