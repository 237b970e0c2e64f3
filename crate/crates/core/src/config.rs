//! Run configuration: a single JSON document describing data, model,
//! priors, likelihood, sampler and report settings.
//!
//! ```json
//! {
//!   "data": "film.dat",
//!   "model": {
//!     "fronting": {"sld": 0.0},
//!     "layers": [{"name": "film",
//!                 "thickness": {"value": 50, "prior": {"type": "uniform", "lower": 30, "upper": 70}},
//!                 "sld": 4.0, "roughness": 3.0}],
//!     "backing": {"sld": 2.074, "roughness": 3.0}
//!   },
//!   "likelihood": {"kind": "gaussian", "transform": "linear"},
//!   "sampler": {"walkers": 64, "steps": 4000, "seed": 1},
//!   "report": {"threshold": 0.001, "ci_level": 95}
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain_io::{load_kde_samples, ChainIoError};
use crate::data::{BoundModel, DataError, Layer, LayerField, ModelField, Parameter, SlabModel};
use crate::likelihood::LikelihoodSpec;
use crate::priors::{PriorSpec, ResolveError};
use crate::sampler::SamplerSettings;
use crate::summary::SummaryOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config JSON: {0}")]
    Json(String),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

impl ConfigError {
    fn field(field: impl Into<String>, message: impl ToString) -> Self {
        ConfigError::Field {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

/// A model quantity: a bare number (constrained) or a full description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Fixed(f64),
    Full(FullParamSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullParamSpec {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
    /// Walker initialisation range `[lower, upper)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    pub sld: ParamSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roughness: Option<ParamSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub thickness: ParamSpec,
    pub sld: ParamSpec,
    pub roughness: ParamSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub fronting: MediumSpec,
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
    pub backing: MediumSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ParamSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<ParamSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walkers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stretch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stuck_window: Option<usize>,
    /// Burn-in outlier reset gap in nats; `null` disables it.
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub outlier_gap: Option<Option<f64>>,
}

/// Distinguishes an explicit `null` (`Some(None)`) from an absent field.
fn present<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Option<f64>>, D::Error> {
    Option::<f64>::deserialize(d).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_ci")]
    pub ci_level: f64,
    #[serde(default = "default_normality_samples")]
    pub normality_samples: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_threshold() -> f64 {
    SummaryOptions::default().threshold
}
fn default_ci() -> f64 {
    SummaryOptions::default().ci_level
}
fn default_normality_samples() -> usize {
    SummaryOptions::default().normality_samples
}
fn default_output_dir() -> String {
    "out".into()
}

impl Default for ReportSpec {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
            ci_level: default_ci(),
            normality_samples: default_normality_samples(),
            output_dir: default_output_dir(),
        }
    }
}

pub const DEFAULT_STEPS: usize = 4000;

/// The config document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub likelihood: LikelihoodSpec,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub report: ReportSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf), ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }

    /// Binds the model spec to parameters, resolving priors (KDE sources are
    /// read relative to `base_dir`).
    pub fn bound_model(&self, base_dir: &Path) -> Result<BoundModel, ConfigError> {
        let mut params = Vec::new();
        let template = build_template(&self.model);
        let mut push = |spec: &ParamSpec, field: ModelField, default_name: String, path: String| {
            params.push(to_parameter(spec, field, default_name, &path, base_dir)?);
            Ok::<_, ConfigError>(())
        };
        let m = &self.model;
        push(
            &m.fronting.sld,
            ModelField::Fronting(LayerField::Sld),
            "fronting_sld".into(),
            "model.fronting.sld".into(),
        )?;
        if let Some(r) = &m.fronting.roughness {
            push(
                r,
                ModelField::Fronting(LayerField::Roughness),
                "fronting_roughness".into(),
                "model.fronting.roughness".into(),
            )?;
        }
        for (i, layer) in m.layers.iter().enumerate() {
            let stem = layer.name.clone().unwrap_or_else(|| format!("layer{}", i + 1));
            for (spec, lf, suffix) in [
                (&layer.thickness, LayerField::Thickness, "thickness"),
                (&layer.sld, LayerField::Sld, "sld"),
                (&layer.roughness, LayerField::Roughness, "roughness"),
            ] {
                push(
                    spec,
                    ModelField::Layer(i, lf),
                    format!("{stem}_{suffix}"),
                    format!("model.layers[{i}].{suffix}"),
                )?;
            }
        }
        push(
            &m.backing.sld,
            ModelField::Backing(LayerField::Sld),
            "backing_sld".into(),
            "model.backing.sld".into(),
        )?;
        if let Some(r) = &m.backing.roughness {
            push(
                r,
                ModelField::Backing(LayerField::Roughness),
                "backing_roughness".into(),
                "model.backing.roughness".into(),
            )?;
        }
        if let Some(s) = &m.scale {
            push(s, ModelField::Scale, "scale".into(), "model.scale".into())?;
        }
        if let Some(b) = &m.background {
            push(b, ModelField::Background, "background".into(), "model.background".into())?;
        }
        let bound = BoundModel::new(template, params).map_err(|e| ConfigError::field("model", e))?;
        bound.template().validate().map_err(|e| ConfigError::field("model", e))?;
        Ok(bound)
    }

    /// Sampler settings with defaults filled in; `seed_override` beats the
    /// config. Returns whether the seed had to be generated.
    pub fn sampler_settings(&self, dim: usize, seed_override: Option<u64>) -> Result<(SamplerSettings, bool), ConfigError> {
        let s = &self.sampler;
        let steps = s.steps.unwrap_or(DEFAULT_STEPS);
        let (seed, generated) = match seed_override.or(s.seed) {
            Some(seed) => (seed, false),
            None => (generate_seed(), true),
        };
        let mut settings = SamplerSettings::with_defaults(dim, steps, seed);
        if let Some(w) = s.walkers {
            settings.walkers = w;
        }
        if let Some(b) = s.burn {
            settings.burn = b;
        }
        if let Some(a) = s.stretch {
            settings.stretch = a;
        }
        if let Some(win) = s.stuck_window {
            settings.stuck_window = win;
        }
        if let Some(gap) = s.outlier_gap {
            if gap.is_some_and(|g| !(g > 0.0)) {
                return Err(ConfigError::field("sampler.outlier_gap", "must be > 0 or null"));
            }
            settings.outlier_gap = gap;
        }
        if steps == 0 {
            return Err(ConfigError::field("sampler.steps", "must be > 0"));
        }
        if settings.burn >= steps {
            return Err(ConfigError::field("sampler.burn", format!("must be < steps ({steps})")));
        }
        if !(settings.stretch > 1.0) {
            return Err(ConfigError::field("sampler.stretch", "must be > 1"));
        }
        if settings.walkers < 2 * dim.max(1) {
            return Err(ConfigError::field(
                "sampler.walkers",
                format!("need at least {} walkers for {dim} free parameters", 2 * dim.max(1)),
            ));
        }
        Ok((settings, generated))
    }

    pub fn summary_options(&self) -> Result<SummaryOptions, ConfigError> {
        let r = &self.report;
        if !(r.threshold > 0.0 && r.threshold < 1.0) {
            return Err(ConfigError::field("report.threshold", "must lie in (0, 1)"));
        }
        if !(r.ci_level > 0.0 && r.ci_level < 100.0) {
            return Err(ConfigError::field("report.ci_level", "must lie in (0, 100)"));
        }
        if r.normality_samples < 20 {
            return Err(ConfigError::field("report.normality_samples", "must be >= 20"));
        }
        Ok(SummaryOptions {
            threshold: r.threshold,
            ci_level: r.ci_level,
            normality_samples: r.normality_samples,
        })
    }
}

fn generate_seed() -> u64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
    (nanos as u64) ^ ((nanos >> 64) as u64) ^ u64::from(std::process::id()).rotate_left(32)
}

fn value_of(spec: &ParamSpec) -> f64 {
    match spec {
        ParamSpec::Fixed(v) => *v,
        ParamSpec::Full(f) => f.value,
    }
}

fn build_template(m: &ModelSpec) -> SlabModel {
    let rough = |r: &Option<ParamSpec>| r.as_ref().map_or(0.0, value_of);
    let mut model = SlabModel::new(
        Layer::medium(value_of(&m.fronting.sld), rough(&m.fronting.roughness)),
        m.layers
            .iter()
            .map(|l| Layer::new(value_of(&l.thickness), value_of(&l.sld), value_of(&l.roughness)))
            .collect(),
        Layer::medium(value_of(&m.backing.sld), rough(&m.backing.roughness)),
    );
    model.scale = m.scale.as_ref().map_or(1.0, value_of);
    model.background = m.background.as_ref().map_or(0.0, value_of);
    model
}

fn to_parameter(
    spec: &ParamSpec,
    field: ModelField,
    default_name: String,
    path: &str,
    base_dir: &Path,
) -> Result<Parameter, ConfigError> {
    match spec {
        ParamSpec::Fixed(v) => Ok(Parameter::fixed(default_name, field, *v)),
        ParamSpec::Full(f) => {
            let name = f.name.clone().unwrap_or(default_name);
            let mut p = match &f.prior {
                None => Parameter::fixed(name, field, f.value),
                Some(ps) => {
                    let prior = ps
                        .resolve(|src| load_kde_samples(src, base_dir))
                        .map_err(|e: ResolveError<ChainIoError>| ConfigError::field(format!("{path}.prior"), e))?;
                    Parameter::varying(name, field, f.value, prior)
                }
            };
            if let Some(u) = &f.unit {
                p.unit = u.clone();
            }
            if let Some([lo, hi]) = f.init {
                if !(lo < hi) {
                    return Err(ConfigError::field(format!("{path}.init"), "need lower < upper"));
                }
                if f.prior.is_none() {
                    return Err(ConfigError::field(format!("{path}.init"), "init range given for a constrained parameter"));
                }
                p.init_range = Some((lo, hi));
            }
            Ok(p)
        }
    }
}

/// Joins `rel` onto `base` and checks the file exists.
pub fn resolve_path(base: &Path, rel: &str, field: &str) -> Result<PathBuf, ConfigError> {
    let p = base.join(rel);
    if !p.exists() {
        return Err(ConfigError::field(field, format!("file not found: {}", p.display())));
    }
    Ok(p)
}

impl From<DataError> for ConfigError {
    fn from(e: DataError) -> Self {
        ConfigError::field("data", e)
    }
}
