//! Convergence studies: sweep `q = L = n = p`, measure errors against an
//! exact or a fine numerical solution, fit exponential rates, export.

pub mod export;
pub mod fit;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem_core::{norm_parts, solve, Analytic, Coefficients, DiscreteField, Difference, Foreign, NormParts};
use crate::geometry::Point;
use crate::layer_oracles::manufactured_layer_solution;
use crate::macro_mesh::{
    assign_refinement_patterns, build_geo_bl_mesh, builtin_layout, macro_from_triangulation, scale_resolution_l,
    validate_mesh, Domain, MacroTriangulation, Mesh, Polygon, Triangulation,
};
use crate::patch_catalog::PatchParams;

pub use export::{read_csv, table_csv, write_csv, write_outputs, convergence_svg};
pub use fit::{fit_exponential, fit_table, FitMode, RateFit};

/// Which norm the error is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// `(ε²|v|²₁ + ‖v‖²)^{1/2}`.
    #[default]
    Energy,
    /// `(ε|v|²₁ + ‖v‖²)^{1/2}`.
    Balanced,
    /// `(|v|²₁ + ‖v‖²)^{1/2}`.
    H1,
}

impl Norm {
    pub fn of(self, parts: NormParts, eps: f64) -> f64 {
        match self {
            Norm::Energy => parts.energy(eps),
            Norm::Balanced => parts.balanced(eps),
            Norm::H1 => parts.energy(1.0),
        }
    }
}

/// What the discrete solutions are compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// `f = 1`, compared with a solve at `p_max + 2`.
    #[default]
    Numerical,
    /// `u = X(x)X(y)` on the unit square, compared with `u` itself.
    Manufactured,
}

/// Number of anisotropic layers `L` used for degree `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Layers {
    /// `L = p`.
    #[default]
    EqualP,
    /// `L = max(p, L₀)` with `L₀` the smallest `L` such that `σ^L ≤ c₁ε`.
    ScaleResolved { c1: f64 },
    /// `L = max(p, ⌈C |ln ε|⌉)`.
    LogEps { c: f64 },
}

impl Layers {
    pub fn count(self, p: usize, sigma: f64, eps: f64) -> Result<usize> {
        Ok(match self {
            Layers::EqualP => p,
            Layers::ScaleResolved { c1 } => p.max(scale_resolution_l(sigma, eps.min(1.0), c1)?),
            Layers::LogEps { c } => {
                if !(c > 0.0) {
                    return Err(Error::Parameter(format!("layer factor must be positive, got {c}")));
                }
                p.max((c * eps.ln().abs()).ceil() as usize)
            }
        })
    }
}

/// Polygon plus macro triangulation read from a TOML file. Either `quads`
/// (counterclockwise) or `triangles` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomDomain {
    #[serde(default)]
    pub name: Option<String>,
    pub loops: Vec<Vec<Point>>,
    pub vertices: Vec<Point>,
    #[serde(default)]
    pub quads: Vec<[usize; 4]>,
    #[serde(default)]
    pub triangles: Vec<[usize; 3]>,
}

impl CustomDomain {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
    }

    pub fn layout(&self) -> Result<(Polygon, MacroTriangulation)> {
        let poly = Polygon::new(self.loops.clone())?;
        let m = match (self.quads.is_empty(), self.triangles.is_empty()) {
            (false, true) => MacroTriangulation { vertices: self.vertices.clone(), quads: self.quads.clone() },
            (true, false) => macro_from_triangulation(
                &Triangulation { vertices: self.vertices.clone(), triangles: self.triangles.clone() },
                &poly,
            )?,
            _ => return Err(Error::Input("give exactly one of `quads` and `triangles`".into())),
        };
        m.check(&poly)?;
        Ok((poly, m))
    }
}

/// Built-in domain name or path to a [`CustomDomain`] file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum DomainSpec {
    Builtin(Domain),
    Custom(PathBuf),
}

impl From<String> for DomainSpec {
    fn from(s: String) -> Self {
        match s.parse() {
            Ok(d) => DomainSpec::Builtin(d),
            Err(_) => DomainSpec::Custom(PathBuf::from(s)),
        }
    }
}

impl From<DomainSpec> for String {
    fn from(d: DomainSpec) -> String {
        match d {
            DomainSpec::Builtin(d) => d.name().to_string(),
            DomainSpec::Custom(p) => p.display().to_string(),
        }
    }
}

impl DomainSpec {
    pub fn name(&self) -> String {
        match self {
            DomainSpec::Builtin(d) => d.name().to_string(),
            DomainSpec::Custom(p) => CustomDomain::from_file(p)
                .ok()
                .and_then(|c| c.name)
                .unwrap_or_else(|| p.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned())),
        }
    }

    pub fn layout(&self) -> Result<(Polygon, MacroTriangulation)> {
        match self {
            DomainSpec::Builtin(d) => Ok(builtin_layout(*d)),
            DomainSpec::Custom(p) => CustomDomain::from_file(p)?.layout(),
        }
    }
}

fn default_sigma() -> f64 {
    0.25
}

fn default_p_min() -> usize {
    1
}

fn default_p_max() -> usize {
    6
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// A convergence study. Read from TOML; every field but `domain` and `eps`
/// has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub eps: Vec<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_p_min")]
    pub p_min: usize,
    #[serde(default = "default_p_max")]
    pub p_max: usize,
    #[serde(default)]
    pub layers: Layers,
    #[serde(default)]
    pub norm: Norm,
    #[serde(default)]
    pub reference: Reference,
    /// Degree and layer increment of the numerical reference solution.
    #[serde(default = "default_reference_offset")]
    pub reference_offset: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Seed for randomized checks; the pipeline itself is deterministic.
    #[serde(default)]
    pub seed: u64,
    /// Write wall times to the CSV; off by default so output is reproducible.
    #[serde(default)]
    pub timings: bool,
}

fn default_reference_offset() -> usize {
    2
}

impl ExperimentConfig {
    pub fn new(domain: Domain, eps: Vec<f64>) -> Self {
        ExperimentConfig {
            domain: DomainSpec::Builtin(domain),
            eps,
            sigma: default_sigma(),
            p_min: default_p_min(),
            p_max: default_p_max(),
            layers: Layers::default(),
            norm: Norm::default(),
            reference: Reference::default(),
            reference_offset: default_reference_offset(),
            out: default_out(),
            seed: 0,
            timings: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Input(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_min == 0 || self.p_min > self.p_max {
            return Err(Error::Parameter(format!("need 1 <= p_min <= p_max, got {}..{}", self.p_min, self.p_max)));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::Parameter(format!("sigma must lie in (0,1), got {}", self.sigma)));
        }
        if self.eps.is_empty() {
            return Err(Error::Parameter("no eps values".into()));
        }
        for &e in &self.eps {
            let ok = e > 0.0 && (e <= 1.0 || self.norm == Norm::H1) && e.is_finite();
            if !ok {
                return Err(Error::Parameter(format!("eps = {e} outside (0,1] (eps > 1 needs norm = \"h1\")")));
            }
        }
        if self.reference == Reference::Manufactured && self.domain != DomainSpec::Builtin(Domain::Square) {
            return Err(Error::Parameter("the manufactured solution lives on the unit square".into()));
        }
        if self.reference == Reference::Manufactured && self.eps.iter().any(|&e| e > 1.0) {
            return Err(Error::Parameter("the manufactured solution needs eps <= 1".into()));
        }
        if self.reference_offset == 0 {
            return Err(Error::Parameter("reference_offset must be >= 1".into()));
        }
        Ok(())
    }

    pub fn patch_params(&self, p: usize, eps: f64) -> Result<PatchParams> {
        let l = self.layers.count(p, self.sigma, eps)?;
        PatchParams::new(self.sigma, l, l)
    }
}

/// Mesh of the configured domain for degree `p`.
pub fn build_mesh(config: &ExperimentConfig, p: usize, eps: f64) -> Result<(Polygon, Mesh)> {
    let (poly, m) = config.domain.layout()?;
    let assign = assign_refinement_patterns(&m, &poly)?;
    let mesh = build_geo_bl_mesh(&m, &assign, config.patch_params(p, eps)?)?;
    let report = validate_mesh(&mesh, &poly);
    if !report.clean() {
        return Err(Error::Consistency(format!("mesh validation failed: {:?}", report.errors)));
    }
    Ok((poly, mesh))
}

/// One `(p, ε)` cell of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub p: usize,
    pub layers: usize,
    pub elements: usize,
    /// Free degrees of freedom.
    pub n: usize,
    pub error: f64,
    /// Error of the nodal interpolant of the exact solution (manufactured
    /// mode only).
    pub interp_error: Option<f64>,
    pub iterations: usize,
    pub seconds: f64,
}

/// Errors of one `(domain, ε, σ)` series.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub domain: String,
    pub eps: f64,
    pub sigma: f64,
    pub norm: Norm,
    pub rows: Vec<Row>,
}

/// Quadrature points per direction for error integrals at degree `q`.
pub fn error_quadrature(q: usize) -> usize {
    2 * q + 4
}

type CacheKey = (String, u64, u64, usize, usize, String);

fn reference_cache() -> &'static Mutex<HashMap<CacheKey, Arc<DiscreteField>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<DiscreteField>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Solution with `q = L = n = p_max + offset` (layers per `config.layers`),
/// `f = 1`; cached per domain and `ε`.
pub fn reference_solution(config: &ExperimentConfig, eps: f64) -> Result<Arc<DiscreteField>> {
    let q = config.p_max + config.reference_offset;
    let key = (
        String::from(config.domain.clone()),
        eps.to_bits(),
        config.sigma.to_bits(),
        q,
        config.layers.count(q, config.sigma, eps)?,
        format!("{:?}", config.reference),
    );
    if let Some(f) = reference_cache().lock().unwrap().get(&key) {
        return Ok(f.clone());
    }
    let (_, mesh) = build_mesh(config, q, eps)?;
    let field = Arc::new(solve_on(config, &mesh, q, eps)?.0);
    reference_cache().lock().unwrap().insert(key, field.clone());
    Ok(field)
}

fn solve_on(config: &ExperimentConfig, mesh: &Mesh, q: usize, eps: f64) -> Result<(DiscreteField, usize)> {
    let sol = match config.reference {
        Reference::Numerical => solve(mesh, q, &Coefficients::model(eps, |_| 1.0))?,
        Reference::Manufactured => {
            let m = manufactured_layer_solution(eps)?;
            solve(mesh, q, &Coefficients::model(eps, move |x| m.f(x)))?
        }
    };
    Ok((sol.field, sol.iterations))
}

/// One cell of the sweep.
pub fn run_cell(config: &ExperimentConfig, p: usize, eps: f64) -> Result<Row> {
    let start = Instant::now();
    let (_, mesh) = build_mesh(config, p, eps)?;
    let (field, iterations) = solve_on(config, &mesh, p, eps)?;
    let points = error_quadrature(p.max(config.p_max + config.reference_offset));
    let (error, interp_error) = match config.reference {
        Reference::Manufactured => {
            let m = manufactured_layer_solution(eps)?;
            let exact = Analytic { u: move |x| m.u(x), grad: move |x| m.gradient(x) };
            let e = norm_parts(&mesh, &Difference(&field, &exact), points)?;
            let pi = DiscreteField::interpolate(&mesh, p, |x| m.u(x))?;
            let ie = norm_parts(&mesh, &Difference(&pi, &exact), points)?;
            (config.norm.of(e, eps), Some(config.norm.of(ie, eps)))
        }
        Reference::Numerical => {
            let r = reference_solution(config, eps)?;
            let e = norm_parts(&mesh, &Difference(&field, Foreign(&r)), points)?;
            (config.norm.of(e, eps), None)
        }
    };
    Ok(Row {
        p,
        layers: mesh.params.l,
        elements: mesh.num_elements(),
        n: field.dofs.n_free,
        error,
        interp_error,
        iterations,
        seconds: if config.timings { start.elapsed().as_secs_f64() } else { 0.0 },
    })
}

/// Runs every `(p, ε)` cell in parallel; one table per `ε`, rows by `p`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ConvergenceTable>> {
    config.validate()?;
    let wrap = |p: usize, eps: f64| move |e: Error| Error::Experiment { p, eps, source: Box::new(e) };
    if config.reference == Reference::Numerical {
        config
            .eps
            .par_iter()
            .map(|&eps| reference_solution(config, eps).map(|_| ()).map_err(wrap(config.p_max + config.reference_offset, eps)))
            .collect::<Result<Vec<_>>>()?;
    }
    let cells: Vec<(f64, usize)> =
        config.eps.iter().flat_map(|&e| (config.p_min..=config.p_max).map(move |p| (e, p))).collect();
    let rows = cells
        .par_iter()
        .map(|&(eps, p)| run_cell(config, p, eps).map_err(wrap(p, eps)))
        .collect::<Result<Vec<_>>>()?;
    let name = config.domain.name();
    let per = config.p_max - config.p_min + 1;
    Ok(config
        .eps
        .iter()
        .zip(rows.chunks(per))
        .map(|(&eps, rows)| ConvergenceTable {
            domain: name.clone(),
            eps,
            sigma: config.sigma,
            norm: config.norm,
            rows: rows.to_vec(),
        })
        .collect())
}
