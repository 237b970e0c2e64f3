//! Domain types for measured data and slab models, plus ASCII data ingestion.
//!
//! Scattering length densities are stored in units of 10⁻⁶ Å⁻² everywhere in
//! this module. The reflectivity kernel converts to Å⁻² at its entry point.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::priors::Prior;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("data file not found: {0}")]
    MissingFile(String),
    #[error("could not read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: malformed row ({reason})")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: reflectivity uncertainty must be > 0")]
    NonPositiveSigma { line: usize },
    #[error("line {line}: q must be > 0")]
    NonPositiveQ { line: usize },
    #[error("line {line}: reflectivity must be >= 0")]
    NegativeReflectivity { line: usize },
    #[error("line {line}: duplicate q value")]
    DuplicateQ { line: usize },
    #[error("data file contains no rows")]
    Empty,
    #[error("column lengths differ")]
    LengthMismatch,
    #[error("unknown parameter binding: {0}")]
    UnknownBinding(String),
    #[error("duplicate parameter name: {0}")]
    DuplicateName(String),
    #[error("parameter {0}: varying parameters need a prior and constrained ones must not have one")]
    PriorMismatch(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Column layout hint for [`load_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CurveFormat {
    /// Accept whitespace- or comma-delimited columns.
    #[default]
    Auto,
    /// Whitespace-delimited columns only.
    Columns,
}

/// Measured specular reflectivity: (q, R, σ_R) triples sorted by q.
///
/// `sigma_r` holds absolute one-standard-deviation uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectivityCurve {
    q: Vec<f64>,
    r: Vec<f64>,
    sigma_r: Vec<f64>,
    counts: Option<Vec<f64>>,
    source_path: String,
}

impl ReflectivityCurve {
    /// Builds a curve from columns, sorting by q and checking every invariant.
    pub fn new(
        q: Vec<f64>,
        r: Vec<f64>,
        sigma_r: Vec<f64>,
        counts: Option<Vec<f64>>,
        source_path: impl Into<String>,
    ) -> Result<Self, DataError> {
        let n = q.len();
        if r.len() != n || sigma_r.len() != n || counts.as_ref().is_some_and(|c| c.len() != n) {
            return Err(DataError::LengthMismatch);
        }
        let rows = (0..n)
            .map(|i| Row {
                line: i + 1,
                q: q[i],
                r: r[i],
                sigma: sigma_r[i],
                count: counts.as_ref().map(|c| c[i]),
            })
            .collect();
        Self::from_rows(rows, source_path.into())
    }

    fn from_rows(mut rows: Vec<Row>, source_path: String) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        for row in &rows {
            if !(row.q > 0.0) || !row.q.is_finite() {
                return Err(DataError::NonPositiveQ { line: row.line });
            }
            if !(row.r >= 0.0) || !row.r.is_finite() {
                return Err(DataError::NegativeReflectivity { line: row.line });
            }
            if !(row.sigma > 0.0) || !row.sigma.is_finite() {
                return Err(DataError::NonPositiveSigma { line: row.line });
            }
            if let Some(k) = row.count {
                if !(k >= 0.0) || k.fract() != 0.0 {
                    return Err(DataError::MalformedRow {
                        line: row.line,
                        reason: "counts must be non-negative integers".into(),
                    });
                }
            }
        }
        let has_counts = rows[0].count.is_some();
        if rows.iter().any(|r| r.count.is_some() != has_counts) {
            let line = rows.iter().find(|r| r.count.is_some() != has_counts).unwrap().line;
            return Err(DataError::MalformedRow {
                line,
                reason: "inconsistent column count".into(),
            });
        }
        rows.sort_by(|a, b| a.q.total_cmp(&b.q));
        for pair in rows.windows(2) {
            if pair[0].q == pair[1].q {
                return Err(DataError::DuplicateQ {
                    line: pair[0].line.max(pair[1].line),
                });
            }
        }
        Ok(Self {
            q: rows.iter().map(|r| r.q).collect(),
            r: rows.iter().map(|r| r.r).collect(),
            sigma_r: rows.iter().map(|r| r.sigma).collect(),
            counts: has_counts.then(|| rows.iter().map(|r| r.count.unwrap()).collect()),
            source_path,
        })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn sigma_r(&self) -> &[f64] {
        &self.sigma_r
    }

    pub fn counts(&self) -> Option<&[f64]> {
        self.counts.as_deref()
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    /// Renders the curve in the same ASCII format [`load_curve`] reads.
    ///
    /// Floats use the shortest representation that parses back to the same
    /// binary64 value, so load → serialize → load is exact.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# q [1/angstrom]  R  sigma_R");
        if self.counts.is_some() {
            out.push_str("  counts");
        }
        out.push('\n');
        for i in 0..self.len() {
            out.push_str(&format!("{:?} {:?} {:?}", self.q[i], self.r[i], self.sigma_r[i]));
            if let Some(c) = &self.counts {
                out.push_str(&format!(" {:?}", c[i]));
            }
            out.push('\n');
        }
        out
    }
}

struct Row {
    line: usize,
    q: f64,
    r: f64,
    sigma: f64,
    count: Option<f64>,
}

/// Parses reflectivity data from text. `source` is recorded as provenance.
pub fn parse_curve(text: &str, format: CurveFormat, source: &str) -> Result<ReflectivityCurve, DataError> {
    let mut rows = Vec::new();
    let mut warned = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = match format {
            CurveFormat::Auto => trimmed
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect(),
            CurveFormat::Columns => trimmed.split_whitespace().collect(),
        };
        if fields.len() < 3 {
            return Err(DataError::MalformedRow {
                line,
                reason: format!("expected at least 3 columns, found {}", fields.len()),
            });
        }
        if fields.len() > 4 && !warned {
            log::warn!("{source}: ignoring columns beyond the fourth (first seen on line {line})");
            warned = true;
        }
        let mut values = [0.0; 4];
        for (slot, field) in values.iter_mut().zip(fields.iter().take(4)) {
            *slot = field.parse::<f64>().map_err(|_| DataError::MalformedRow {
                line,
                reason: format!("not a number: {field:?}"),
            })?;
        }
        rows.push(Row {
            line,
            q: values[0],
            r: values[1],
            sigma: values[2],
            count: (fields.len() >= 4).then_some(values[3]),
        });
    }
    ReflectivityCurve::from_rows(rows, source.to_string())
}

/// Loads a reflectivity data file: `#` comments, then `q R sigma_R [counts]`
/// rows separated by whitespace or commas.
pub fn load_curve(path: impl AsRef<Path>, format: CurveFormat) -> Result<ReflectivityCurve, DataError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DataError::MissingFile(display.clone()),
        _ => DataError::Io {
            path: display.clone(),
            message: e.to_string(),
        },
    })?;
    parse_curve(&text, format, &display)
}

/// One homogeneous slab. `sld` is in 10⁻⁶ Å⁻², `thickness` and
/// `roughness` in Å; roughness belongs to the layer's upper interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub thickness: f64,
    pub sld: f64,
    pub roughness: f64,
}

impl Layer {
    pub fn new(thickness: f64, sld: f64, roughness: f64) -> Self {
        Self { thickness, sld, roughness }
    }

    /// A semi-infinite medium; only the SLD and roughness are meaningful.
    pub fn medium(sld: f64, roughness: f64) -> Self {
        Self { thickness: 0.0, sld, roughness }
    }
}

/// Layers stacked between a semi-infinite fronting and backing medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabModel {
    pub fronting: Layer,
    pub layers: Vec<Layer>,
    pub backing: Layer,
    pub scale: f64,
    pub background: f64,
}

impl SlabModel {
    pub fn new(fronting: Layer, layers: Vec<Layer>, backing: Layer) -> Self {
        Self {
            fronting,
            layers,
            backing,
            scale: 1.0,
            background: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(DataError::InvalidModel(format!("scale must be > 0, got {}", self.scale)));
        }
        if !(self.background >= 0.0) || !self.background.is_finite() {
            return Err(DataError::InvalidModel(format!(
                "background must be >= 0, got {}",
                self.background
            )));
        }
        let media = std::iter::once(&self.fronting)
            .chain(self.layers.iter())
            .chain(std::iter::once(&self.backing));
        for (i, layer) in media.enumerate() {
            if !layer.sld.is_finite() {
                return Err(DataError::InvalidModel(format!("medium {i}: non-finite SLD")));
            }
            if !(layer.roughness >= 0.0) || !layer.roughness.is_finite() {
                return Err(DataError::InvalidModel(format!("medium {i}: roughness must be >= 0")));
            }
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if !(layer.thickness >= 0.0) || !layer.thickness.is_finite() {
                return Err(DataError::InvalidModel(format!("layer {i}: thickness must be >= 0")));
            }
        }
        Ok(())
    }

    /// Mutable access to the field a parameter is bound to.
    pub fn field_mut(&mut self, field: ModelField) -> Result<&mut f64, DataError> {
        let missing = || DataError::UnknownBinding(field.to_string());
        Ok(match field {
            ModelField::Scale => &mut self.scale,
            ModelField::Background => &mut self.background,
            ModelField::Fronting(f) => f.select(&mut self.fronting),
            ModelField::Backing(f) => f.select(&mut self.backing),
            ModelField::Layer(i, f) => f.select(self.layers.get_mut(i).ok_or_else(missing)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerField {
    Thickness,
    Sld,
    Roughness,
}

impl LayerField {
    fn select(self, layer: &mut Layer) -> &mut f64 {
        match self {
            LayerField::Thickness => &mut layer.thickness,
            LayerField::Sld => &mut layer.sld,
            LayerField::Roughness => &mut layer.roughness,
        }
    }

    pub fn default_unit(self) -> &'static str {
        match self {
            LayerField::Thickness | LayerField::Roughness => "Å",
            LayerField::Sld => "10⁻⁶ Å⁻²",
        }
    }
}

/// Address of a scalar inside a [`SlabModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelField {
    Scale,
    Background,
    Fronting(LayerField),
    Layer(usize, LayerField),
    Backing(LayerField),
}

impl ModelField {
    pub fn default_unit(self) -> &'static str {
        match self {
            ModelField::Scale | ModelField::Background => "",
            ModelField::Fronting(f) | ModelField::Layer(_, f) | ModelField::Backing(f) => f.default_unit(),
        }
    }
}

impl fmt::Display for ModelField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |lf: &LayerField| match lf {
            LayerField::Thickness => "thickness",
            LayerField::Sld => "sld",
            LayerField::Roughness => "roughness",
        };
        match self {
            ModelField::Scale => write!(f, "scale"),
            ModelField::Background => write!(f, "background"),
            ModelField::Fronting(lf) => write!(f, "fronting.{}", name(lf)),
            ModelField::Layer(i, lf) => write!(f, "layers[{i}].{}", name(lf)),
            ModelField::Backing(lf) => write!(f, "backing.{}", name(lf)),
        }
    }
}

/// A named model quantity: either constrained to `value` or varied under `prior`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub unit: String,
    pub vary: bool,
    pub prior: Option<Prior>,
    /// Walker initialisation range `[lower, upper)`, required for improper priors.
    pub init_range: Option<(f64, f64)>,
    pub field: ModelField,
}

impl Parameter {
    pub fn fixed(name: impl Into<String>, field: ModelField, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            unit: field.default_unit().to_string(),
            vary: false,
            prior: None,
            init_range: None,
            field,
        }
    }

    pub fn varying(name: impl Into<String>, field: ModelField, value: f64, prior: Prior) -> Self {
        Self {
            vary: true,
            prior: Some(prior),
            ..Self::fixed(name, field, value)
        }
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn with_init_range(mut self, lower: f64, upper: f64) -> Self {
        self.init_range = Some((lower, upper));
        self
    }
}

/// A slab model template plus the parameters bound to its fields.
#[derive(Debug, Clone)]
pub struct BoundModel {
    template: SlabModel,
    parameters: Vec<Parameter>,
    free: Vec<usize>,
}

impl BoundModel {
    /// Checks every binding against the template and applies constrained values.
    pub fn new(template: SlabModel, parameters: Vec<Parameter>) -> Result<Self, DataError> {
        let mut names = HashSet::new();
        let mut fields = HashSet::new();
        let mut template = template;
        for p in &parameters {
            if !names.insert(p.name.as_str()) {
                return Err(DataError::DuplicateName(p.name.clone()));
            }
            if !fields.insert(p.field) {
                return Err(DataError::UnknownBinding(format!("{} bound twice", p.field)));
            }
            if p.vary != p.prior.is_some() {
                return Err(DataError::PriorMismatch(p.name.clone()));
            }
            *template.field_mut(p.field)? = p.value;
        }
        let free = parameters
            .iter()
            .enumerate()
            .filter(|(_, p)| p.vary)
            .map(|(i, _)| i)
            .collect();
        Ok(Self {
            template,
            parameters,
            free,
        })
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    /// Varying parameters in declaration order; this order defines chain columns.
    pub fn free_parameters(&self) -> Vec<&Parameter> {
        self.free.iter().map(|&i| &self.parameters[i]).collect()
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    pub fn free_names(&self) -> Vec<String> {
        self.free_parameters().iter().map(|p| p.name.clone()).collect()
    }

    /// The model with constrained values only (free ones at their stated value).
    pub fn template(&self) -> &SlabModel {
        &self.template
    }

    /// Substitutes a free-parameter vector into the template.
    pub fn model_at(&self, free_values: &[f64]) -> Result<SlabModel, DataError> {
        if free_values.len() != self.free.len() {
            return Err(DataError::LengthMismatch);
        }
        let mut model = self.template.clone();
        for (&idx, &v) in self.free.iter().zip(free_values) {
            *model.field_mut(self.parameters[idx].field)? = v;
        }
        Ok(model)
    }
}

/// Convenience used when a caller only has the raw list.
pub fn free_parameters(template: &SlabModel, parameters: &[Parameter]) -> Result<Vec<Parameter>, DataError> {
    let bound = BoundModel::new(template.clone(), parameters.to_vec())?;
    Ok(bound.free_parameters().into_iter().cloned().collect())
}
