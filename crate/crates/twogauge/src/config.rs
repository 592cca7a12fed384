//! Run configuration: JSON schema, validation, and construction of core objects.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use twogauge_core::algebra2group::{FiniteCrossedModule, FiniteGroup, MatrixCrossedModule, MatrixFamily};
use twogauge_core::dsl::{parse, Expr};
use twogauge_core::forms::{BField, Coefficients, DslOneForm, ExpField, Side, TwoConnection};
use twogauge_core::geometry::{Chart, DslMap, Map};
use twogauge_core::morphisms::{OneMorphism, TwoMorphismA, TwoMorphismForm};

/// Malformed configuration, located by a JSON path.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for SchemaError {}

fn schema(path: impl Into<String>, message: impl Into<String>) -> SchemaError {
    SchemaError { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub crossed_module: CrossedModuleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lie2algebra: Option<Lie2Spec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<ConnectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_point: Option<BasePointSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<ShapeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bigons: Vec<ShapeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cubes: Vec<ShapeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morphism: Option<MorphismSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_morphism: Option<TwoMorphismSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambrose_singer: Option<AmbroseSingerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruct: Option<ReconstructSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum CrossedModuleSpec {
    Matrix(MatrixSpec),
    /// One of `z2_z3`, `z4_id`, `z2_z4_inversion`.
    Preset(String),
    Finite(FiniteSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    /// One of `su2_id_conj`, `u1_id`, `u1_trivial`, `u2_to_pu2`.
    pub family: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteSpec {
    pub g: Vec<Vec<usize>>,
    pub h: Vec<Vec<usize>>,
    pub t: Vec<usize>,
    pub alpha: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lie2Spec {
    #[serde(default = "yes")]
    pub validate: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    /// One row of `𝔤` coordinates per chart direction.
    pub a: Vec<Vec<String>>,
    pub b: BSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(f64, f64)>>,
    /// One Richardson level on top of the derivative stencil.
    #[serde(default)]
    pub richardson: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum BSpec {
    /// `b = section(F_a) + extra`; one row of `𝔥` coordinates per coordinate pair.
    FakeFlat(Vec<Vec<String>>),
    Explicit(Vec<Vec<String>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasePointSpec {
    /// `𝔤` coordinates of the log of the initial frame.
    #[serde(default)]
    pub frame: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub name: String,
    /// Chart coordinates as DSL in `u` (paths), `u, v` (bigons) or `u, v, w` (cubes).
    pub coords: Vec<String>,
    /// Abelian oracle: the expected value is `exp(i·phase)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_phase: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphismSpec {
    pub g: Vec<String>,
    pub phi: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FormSpec {
    #[default]
    Definition,
    Lemma,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoMorphismSpec {
    pub a: Vec<String>,
    #[serde(default)]
    pub form: FormSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbroseSingerSpec {
    pub sample_points: Vec<Vec<f64>>,
    #[serde(default = "default_probe")]
    pub probe_size: f64,
}

fn default_probe() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructSpec {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Half-width of the sampling box around the origin.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Resolution of the transport oracles.
    #[serde(default = "default_oracle_steps")]
    pub oracle_steps: usize,
}

fn default_points() -> usize {
    10
}
fn default_delta() -> f64 {
    1e-3
}
fn default_radius() -> f64 {
    0.5
}
fn default_oracle_steps() -> usize {
    16
}

impl Default for ReconstructSpec {
    fn default() -> Self {
        ReconstructSpec { points: default_points(), delta: default_delta(), radius: default_radius(), oracle_steps: default_oracle_steps() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub sweep: usize,
    /// Random samples for algebraic checks.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Points per axis for grid checks.
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_steps() -> usize {
    64
}
fn default_samples() -> usize {
    200
}
fn default_grid() -> usize {
    5
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics { steps: default_steps(), sweep: 0, samples: default_samples(), grid: default_grid() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
}

/// A parsed config together with the hash of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub hash: String,
}

pub fn load_str(text: &str) -> Result<LoadedConfig, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(if path == "." { "$".to_string() } else { format!("$.{path}") }, e.into_inner().to_string())
    })?;
    let hash = hex::encode(Sha256::digest(text.as_bytes()));
    Ok(LoadedConfig { config, hash })
}

pub enum ModuleKind {
    Matrix(Arc<MatrixCrossedModule>),
    Finite(FiniteCrossedModule),
}

fn finite_preset(name: &str) -> Option<FiniteCrossedModule> {
    Some(match name {
        "z2_z3" => FiniteCrossedModule::trivial(FiniteGroup::cyclic(2), FiniteGroup::cyclic(3)),
        "z4_id" => FiniteCrossedModule::identity_conjugation(FiniteGroup::cyclic(4)),
        "z2_z4_inversion" => {
            let t = (0..4).map(|x| x % 2).collect();
            let alpha = vec![(0..4).collect(), (0..4).map(|x| (4 - x) % 4).collect()];
            FiniteCrossedModule::new(FiniteGroup::cyclic(2), FiniteGroup::cyclic(4), t, alpha).ok()?
        }
        _ => return None,
    })
}

fn parse_at(src: &str, path: &str) -> Result<Expr, SchemaError> {
    parse(src).map_err(|e| schema(path, e.to_string()))
}

fn coefficients(rows: &[Vec<String>], path: &str) -> Result<Vec<Coefficients>, SchemaError> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let exprs = row
                .iter()
                .enumerate()
                .map(|(j, s)| parse_at(s, &format!("{path}[{i}][{j}]")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Coefficients::new(exprs))
        })
        .collect()
}

fn single_row(row: &[String], path: &str) -> Result<Coefficients, SchemaError> {
    let exprs = row.iter().enumerate().map(|(j, s)| parse_at(s, &format!("{path}[{j}]"))).collect::<Result<Vec<_>, _>>()?;
    Ok(Coefficients::new(exprs))
}

impl RunConfig {
    pub fn module(&self) -> Result<ModuleKind, SchemaError> {
        match &self.crossed_module {
            CrossedModuleSpec::Matrix(MatrixSpec { family }) => MatrixFamily::from_name(family)
                .map(|f| ModuleKind::Matrix(Arc::new(MatrixCrossedModule::new(f))))
                .ok_or_else(|| schema("$.crossed_module.matrix.family", format!("unknown family `{family}`"))),
            CrossedModuleSpec::Preset(name) => finite_preset(name)
                .map(ModuleKind::Finite)
                .ok_or_else(|| schema("$.crossed_module.preset", format!("unknown preset `{name}`"))),
            CrossedModuleSpec::Finite(f) => {
                let g = FiniteGroup::new(f.g.clone()).map_err(|e| schema("$.crossed_module.finite.g", e.to_string()))?;
                let h = FiniteGroup::new(f.h.clone()).map_err(|e| schema("$.crossed_module.finite.h", e.to_string()))?;
                FiniteCrossedModule::new(g, h, f.t.clone(), f.alpha.clone())
                    .map(ModuleKind::Finite)
                    .map_err(|e| schema("$.crossed_module.finite", e.to_string()))
            }
        }
    }

    pub fn matrix_module(&self) -> Result<Arc<MatrixCrossedModule>, SchemaError> {
        match self.module()? {
            ModuleKind::Matrix(cm) => Ok(cm),
            ModuleKind::Finite(_) => Err(schema("$.crossed_module", "this command needs a matrix family")),
        }
    }

    pub fn connection(&self) -> Result<Arc<TwoConnection>, SchemaError> {
        let spec = self.connection.as_ref().ok_or_else(|| schema("$.connection", "missing key"))?;
        let cm = self.matrix_module()?;
        let dim = spec.a.len();
        if dim < 2 {
            return Err(schema("$.connection.a", "need one row per chart direction, at least two"));
        }
        let chart = match &spec.bounds {
            Some(b) if b.len() != dim => return Err(schema("$.connection.bounds", format!("expected {dim} intervals"))),
            Some(b) => Chart::with_bounds(dim, b.clone()),
            None => Chart::new(dim),
        };
        let a = coefficients(&spec.a, "$.connection.a")?;
        let b = match &spec.b {
            BSpec::FakeFlat(rows) => BField::FakeFlat { extra: coefficients(rows, "$.connection.b.fake_flat")? },
            BSpec::Explicit(rows) => BField::Dsl(coefficients(rows, "$.connection.b.explicit")?),
        };
        TwoConnection::new(chart, cm, a, b).map(|c| Arc::new(c.with_richardson(spec.richardson))).map_err(|e| schema("$.connection", e.to_string()))
    }

    pub fn frame(&self, cm: &MatrixCrossedModule) -> Result<twogauge_core::matrix::CMat, SchemaError> {
        match &self.base_point {
            None => Ok(cm.g_identity()),
            Some(bp) if bp.frame.is_empty() => Ok(cm.g_identity()),
            Some(bp) if bp.frame.len() != cm.g_alg().dim() => {
                Err(schema("$.base_point.frame", format!("expected {} coordinates", cm.g_alg().dim())))
            }
            Some(bp) => Ok(cm.exp_g(&cm.g_alg().from_coords(&bp.frame))),
        }
    }

    pub fn shapes(&self, which: ShapeKind, dim: usize) -> Result<Vec<(String, Map, Option<f64>)>, SchemaError> {
        let (list, key, arity) = match which {
            ShapeKind::Path => (&self.paths, "paths", 1),
            ShapeKind::Bigon => (&self.bigons, "bigons", 2),
            ShapeKind::Cube => (&self.cubes, "cubes", 3),
        };
        if list.is_empty() {
            return Err(schema(format!("$.{key}"), "missing key"));
        }
        list.iter()
            .enumerate()
            .map(|(i, s)| {
                let path = format!("$.{key}[{i}].coords");
                if s.coords.len() != dim {
                    return Err(schema(&path, format!("expected {dim} coordinates, found {}", s.coords.len())));
                }
                let exprs = s.coords.iter().enumerate().map(|(j, c)| parse_at(c, &format!("{path}[{j}]"))).collect::<Result<Vec<_>, _>>()?;
                let map = DslMap::new(arity, exprs).map_err(|e| schema(&path, e.to_string()))?;
                Ok((s.name.clone(), Arc::new(map) as Map, s.expected_phase))
            })
            .collect()
    }

    pub fn morphism(&self, cm: &Arc<MatrixCrossedModule>, dim: usize) -> Result<OneMorphism, SchemaError> {
        let spec = self.morphism.as_ref().ok_or_else(|| schema("$.morphism", "missing key"))?;
        let g = ExpField::new(cm.clone(), Side::G, single_row(&spec.g, "$.morphism.g")?, dim)
            .map_err(|e| schema("$.morphism.g", e.to_string()))?;
        let phi = DslOneForm::new(cm.h_alg(), coefficients(&spec.phi, "$.morphism.phi")?, dim)
            .map_err(|e| schema("$.morphism.phi", e.to_string()))?;
        Ok(OneMorphism::new(cm.clone(), Arc::new(g), Arc::new(phi)))
    }

    pub fn two_morphism(&self, cm: &Arc<MatrixCrossedModule>, dim: usize) -> Result<Option<(TwoMorphismA, TwoMorphismForm)>, SchemaError> {
        let Some(spec) = &self.two_morphism else { return Ok(None) };
        let a = ExpField::new(cm.clone(), Side::H, single_row(&spec.a, "$.two_morphism.a")?, dim)
            .map_err(|e| schema("$.two_morphism.a", e.to_string()))?;
        let form = match spec.form {
            FormSpec::Definition => TwoMorphismForm::Definition,
            FormSpec::Lemma => TwoMorphismForm::Lemma,
        };
        Ok(Some((TwoMorphismA::new(Arc::new(a)), form)))
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ShapeKind {
    Path,
    Bigon,
    Cube,
}
