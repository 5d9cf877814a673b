//! Batch pipelines driven by a flat TOML config.
//!
//! A run writes `summary.json` (deterministic given the config), one CSV per
//! field where the pipeline produces tabular data, and `manifest.json` with
//! the resolved config, versions and wall time.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::clifford::{build_gamma_rep, GammaRep};
use crate::continuum::continuum_kernel;
use crate::error::{Error, Result};
use crate::gauge::{
    discretize, gauge_transform, make_generalized_link, plaquette_charge, random_gauge, read_link_table,
    ConnectionDescriptor, FourierMode, GeneralizedLink, LinkField, Perturbation,
};
use crate::interp::{check_dirac_convergence, check_f_bounds, staple_samples, CombinedOperator, StapleConfig};
use crate::latops::{a_priori_check, wilson_dirac, wilson_term};
use crate::overlap::{build_overlap, gw_residual, overlap_trace, TRACE_TOL};
use crate::spectral::{eta, spectral_flow, AffineFamily, MassGrid};

pub const MANIFEST_SCHEMA: u32 = 1;
pub const SUMMARY_SCHEMA: u32 = 1;
pub const CSV_SCHEMA: u32 = 1;

/// Positive masses at which `η(H_W(m))` must vanish.
pub const POSITIVE_MASSES: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineKind {
    Spectrum,
    Flow,
    Index,
    Overlap,
    Verify,
    Interp,
}

impl PipelineKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Flow => "flow",
            Self::Index => "index",
            Self::Overlap => "overlap",
            Self::Verify => "verify",
            Self::Interp => "interp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    Trivial,
    U1Flux,
    U1FluxPlusSmooth,
    External,
}

fn default_background() -> Background {
    Background::Trivial
}
fn default_n() -> usize {
    2
}
fn default_one() -> usize {
    1
}
fn default_m_max() -> f64 {
    1.0
}
fn default_mass_points() -> usize {
    65
}
fn default_continuum_cutoff() -> usize {
    8
}
fn default_seed() -> u64 {
    1
}
fn default_a_priori_trials() -> usize {
    1000
}
fn default_gauge_transforms() -> usize {
    20
}
fn default_interp_sizes() -> Vec<usize> {
    vec![4, 8, 16]
}
fn default_interp_sections() -> usize {
    10
}
fn default_interp_trials() -> usize {
    5
}
fn default_gap_tol() -> f64 {
    crate::interp::GAP_TOL
}
fn default_staple_mass_points() -> usize {
    33
}
fn default_staple_t_points() -> usize {
    11
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: PipelineKind,
    #[serde(default = "default_background")]
    pub background: Background,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_one")]
    pub n_c: usize,
    /// Single charge; mutually exclusive with `charges`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge: Option<i64>,
    #[serde(default)]
    pub charges: Option<Vec<i64>>,
    /// Rows `[direction, k1, k2, cos, sin]` of the smooth perturbation.
    #[serde(default)]
    pub perturbation: Vec<[f64; 5]>,
    #[serde(default)]
    pub link_table: Option<PathBuf>,
    #[serde(default)]
    pub stripe: Option<f64>,
    /// Single size; mutually exclusive with `sizes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
    #[serde(default = "default_m_max")]
    pub m_max: f64,
    #[serde(default = "default_mass_points")]
    pub mass_points: usize,
    #[serde(default)]
    pub window: Option<f64>,
    /// Mass of the `spectrum` pipeline, `−m_max` if unset.
    #[serde(default)]
    pub mass: Option<f64>,
    /// Continuum cutoff `K` of the staple scan, `2N` if unset.
    #[serde(default)]
    pub cutoff: Option<usize>,
    /// Continuum cutoff used for the continuum index.
    #[serde(default = "default_continuum_cutoff")]
    pub continuum_cutoff: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_a_priori_trials")]
    pub a_priori_trials: usize,
    #[serde(default = "default_gauge_transforms")]
    pub gauge_transforms: usize,
    #[serde(default = "default_interp_sizes")]
    pub interp_sizes: Vec<usize>,
    #[serde(default = "default_interp_sections")]
    pub interp_sections: usize,
    #[serde(default = "default_interp_trials")]
    pub interp_trials: usize,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    /// `M₀` of the bounded transform in the staple scan.
    #[serde(default)]
    pub bounded_m0: Option<f64>,
    #[serde(default = "default_staple_mass_points")]
    pub staple_mass_points: usize,
    #[serde(default = "default_staple_t_points")]
    pub staple_t_points: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Folds `charge`/`size` into the list forms and fills derived defaults.
    pub fn resolved(&self) -> Result<Self> {
        let mut out = self.clone();
        out.charges = match (self.charge, &self.charges) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `charge` or `charges`, not both".into())),
            (Some(q), None) => Some(vec![q]),
            (None, Some(list)) => Some(list.clone()),
            (None, None) => Some(vec![0]),
        };
        out.charge = None;
        out.sizes = match (self.size, &self.sizes) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `size` or `sizes`, not both".into())),
            (Some(s), None) => Some(vec![s]),
            (None, Some(list)) => Some(list.clone()),
            (None, None) => Some(vec![12]),
        };
        out.size = None;
        if out.mass.is_none() {
            out.mass = Some(-self.m_max);
        }
        if out.output_dir.is_none() {
            out.output_dir = Some(PathBuf::from("out"));
        }
        if out.charges.as_ref().is_some_and(|c| c.is_empty()) || out.sizes.as_ref().is_some_and(|s| s.is_empty()) {
            return Err(Error::Config("`charges` and `sizes` must be non-empty".into()));
        }
        if !(out.m_max > 0.0) {
            return Err(Error::Config("`m_max` must be positive".into()));
        }
        if self.background == Background::Trivial && out.charges.as_deref() != Some(&[0]) {
            return Err(Error::Config("the trivial background has charge 0".into()));
        }
        if self.background == Background::External && self.link_table.is_none() {
            return Err(Error::Config("the external background needs `link_table`".into()));
        }
        if self.background != Background::U1FluxPlusSmooth && !self.perturbation.is_empty() {
            return Err(Error::Config("`perturbation` needs background = \"u1_flux_plus_smooth\"".into()));
        }
        Ok(out)
    }

    fn perturbation(&self) -> Result<Perturbation> {
        let modes = self
            .perturbation
            .iter()
            .map(|row| {
                let int = |v: f64, what: &str| {
                    if v.fract() != 0.0 {
                        Err(Error::Config(format!("perturbation {what} {v} is not an integer")))
                    } else {
                        Ok(v as i64)
                    }
                };
                let direction = int(row[0], "direction")?;
                if !(0..2).contains(&direction) {
                    return Err(Error::Config(format!("perturbation direction {direction} not in {{0, 1}}")));
                }
                Ok(FourierMode {
                    direction: direction as usize,
                    k: [int(row[1], "wavenumber")?, int(row[2], "wavenumber")?],
                    cos: row[3],
                    sin: row[4],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Perturbation::new(modes))
    }
}

/// One background at one lattice size.
#[derive(Debug, Clone)]
pub struct Field {
    pub label: String,
    pub charge: Option<i64>,
    pub size: usize,
    pub link: GeneralizedLink,
    pub lf: LinkField,
}

fn descriptor(cfg: &RunConfig, charge: i64) -> Result<ConnectionDescriptor> {
    Ok(match cfg.background {
        Background::Trivial => ConnectionDescriptor::trivial(cfg.n, cfg.n_c),
        Background::U1Flux => ConnectionDescriptor::u1_flux(charge),
        Background::U1FluxPlusSmooth => ConnectionDescriptor::u1_flux_plus_smooth(charge, cfg.perturbation()?),
        Background::External => {
            let path = cfg.link_table.as_ref().expect("checked in resolved()");
            let file = File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ConnectionDescriptor::external(read_link_table(std::io::BufReader::new(file))?)
        }
    })
}

/// Fields of a resolved config, in `(charge, size)` order.
pub fn fields(cfg: &RunConfig) -> Result<Vec<Field>> {
    let mut out = Vec::new();
    for &q in cfg.charges.as_deref().unwrap_or(&[0]) {
        let desc = descriptor(cfg, q)?;
        let charge = desc.charge();
        let table_size = match &desc.kind {
            crate::gauge::ConnectionKind::External(t) => Some(t.size),
            _ => None,
        };
        let link = match cfg.stripe {
            Some(s) => GeneralizedLink::with_stripe(desc, s)?,
            None => make_generalized_link(desc)?,
        };
        let sizes = match table_size {
            Some(s) => vec![s],
            None => cfg.sizes.clone().unwrap_or_else(|| vec![12]),
        };
        for size in sizes {
            let lf = discretize(&link, size)?;
            let label = match charge {
                Some(q) => format!("q{q}_n{size}"),
                None => format!("external_n{size}"),
            };
            out.push(Field { label, charge, size, link: link.clone(), lf });
        }
        if table_size.is_some() {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub field: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub pipeline: &'static str,
    pub results: Vec<Value>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    rep: GammaRep,
    out_dir: PathBuf,
    checks: Vec<Check>,
    artifacts: Vec<String>,
}

impl Ctx<'_> {
    fn check(&mut self, field: &str, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { field: field.into(), name: name.into(), passed, detail });
    }

    /// Records a failed check for a computation that returned an error.
    fn attempt<T>(&mut self, field: &str, name: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.check(field, name, false, e.to_string());
                None
            }
        }
    }

    fn csv(&mut self, name: String, write: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
        let file = File::create(self.out_dir.join(&name))?;
        write(BufWriter::new(file))?;
        self.artifacts.push(name);
        Ok(())
    }
}

/// Runs the pipeline, writing artifacts into `out_dir`.
///
/// Errors are configuration or I/O problems; numerical failures are recorded
/// as failed checks in the report.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    let start = Instant::now();
    let cfg = cfg.resolved()?;
    let rep = build_gamma_rep(cfg.n)?;
    if cfg.pipeline != PipelineKind::Interp || cfg.n % 2 == 0 {
        rep.require_chirality()?;
    }
    let fields = fields(&cfg)?;
    if cfg.pipeline == PipelineKind::Interp && fields.iter().any(|f| !f.link.is_continuum()) {
        return Err(Error::Config("the interp pipeline needs a continuum background".into()));
    }
    if matches!(cfg.pipeline, PipelineKind::Flow | PipelineKind::Verify) {
        MassGrid::uniform(cfg.m_max, cfg.mass_points)?;
    }
    fs::create_dir_all(out_dir)?;
    let mut ctx = Ctx { cfg: &cfg, rep, out_dir: out_dir.to_path_buf(), checks: Vec::new(), artifacts: Vec::new() };
    let mut results = Vec::new();
    for field in &fields {
        let value = match cfg.pipeline {
            PipelineKind::Spectrum => spectrum(&mut ctx, field)?,
            PipelineKind::Flow => flow(&mut ctx, field)?,
            PipelineKind::Index => index(&mut ctx, field),
            PipelineKind::Overlap => overlap(&mut ctx, field),
            PipelineKind::Verify => verify(&mut ctx, field),
            PipelineKind::Interp => interp(&mut ctx, field)?,
        };
        results.push(value);
    }
    let passed = ctx.checks.iter().all(|c| c.passed);
    let mut artifacts = ctx.artifacts;
    artifacts.push("summary.json".into());
    artifacts.push("manifest.json".into());
    let report = RunReport { pipeline: cfg.pipeline.name(), results, checks: ctx.checks, passed, artifacts };

    let summary = json!({
        "schema_version": SUMMARY_SCHEMA,
        "pipeline": report.pipeline,
        "passed": report.passed,
        "results": report.results,
        "checks": report.checks,
    });
    fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    let manifest = json!({
        "tool": "wilson-index",
        "version": env!("CARGO_PKG_VERSION"),
        "schema_versions": {
            "manifest": MANIFEST_SCHEMA,
            "summary": SUMMARY_SCHEMA,
            "csv": CSV_SCHEMA,
        },
        "csv_columns": {
            "spectrum": "m,index,lambda",
            "flow": "m,index,lambda",
            "staple": "m,t,min_abs_eig",
        },
        "config": cfg,
        "threads": rayon::current_num_threads(),
        "artifacts": report.artifacts,
        "passed": report.passed,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(report)
}

fn base_entry(field: &Field) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("field".into(), json!(field.label));
    m.insert("charge".into(), json!(field.charge));
    m.insert("size".into(), json!(field.size));
    m
}

fn spectrum(ctx: &mut Ctx, field: &Field) -> Result<Value> {
    let mut entry = base_entry(field);
    let mass = ctx.cfg.mass.expect("resolved");
    let label = field.label.as_str();
    let Some(h) = ctx.attempt(label, "wilson_operator", wilson_dirac(&field.lf, &ctx.rep, mass)) else {
        return Ok(Value::Object(entry));
    };
    if let Some(vals) = ctx.attempt(label, "eigenvalues", h.eigenvalues()) {
        ctx.csv(format!("spectrum_{label}.csv"), |mut out| {
            use std::io::Write;
            writeln!(out, "m,index,lambda")?;
            for (i, l) in vals.iter().enumerate() {
                writeln!(out, "{mass:.12e},{i},{l:.12e}")?;
            }
            Ok(())
        })?;
        let min_abs = vals.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
        entry.insert("mass".into(), json!(mass));
        entry.insert("min_abs_eig".into(), json!(min_abs));
        if let Some(e) = ctx.attempt(label, "eta_defined", crate::spectral::eta_of_eigenvalues(&vals)) {
            entry.insert("eta".into(), json!(e.eta));
        }
    }
    wilson_term_check(ctx, field, &mut entry);
    if field.lf.n() == 2 && field.lf.n_c() == 1 {
        if let Some(r) = ctx.attempt(label, "plaquette_charge", plaquette_charge(&field.lf)) {
            entry.insert("plaquette_charge".into(), json!(r.charge));
        }
    }
    Ok(Value::Object(entry))
}

fn wilson_term_check(ctx: &mut Ctx, field: &Field, entry: &mut serde_json::Map<String, Value>) {
    let label = field.label.as_str();
    if let Some(vals) = ctx.attempt(label, "wilson_term_nonnegative", wilson_term(&field.lf, &ctx.rep).and_then(|w| w.eigenvalues())) {
        let min = vals.first().copied().unwrap_or(0.0);
        entry.insert("wilson_term_min_eig".into(), json!(min));
        ctx.check(label, "wilson_term_nonnegative", min >= -1e-10, format!("min eig W = {min:.3e}"));
    }
}

fn flow(ctx: &mut Ctx, field: &Field) -> Result<Value> {
    let mut entry = base_entry(field);
    let label = field.label.as_str();
    let grid = MassGrid::uniform(ctx.cfg.m_max, ctx.cfg.mass_points)?;
    let result = AffineFamily::wilson(&field.lf, &ctx.rep).and_then(|fam| spectral_flow(&fam, &grid, ctx.cfg.window));
    if let Some(r) = ctx.attempt(label, "two_method_sf", result) {
        ctx.csv(format!("flow_{label}.csv"), |out| r.write_csv(out))?;
        let by_eta = r.sf_from_eta();
        ctx.check(label, "two_method_sf", r.sf == by_eta, format!("crossings {} vs eta {}", r.sf, by_eta));
        entry.insert("sf".into(), json!(r.sf));
        entry.insert("eta_minus".into(), json!(r.eta_minus));
        entry.insert("eta_plus".into(), json!(r.eta_plus));
        entry.insert("crossings".into(), json!(r.crossings));
        entry.insert("bisections".into(), json!(r.bisections));
        entry.insert("window".into(), json!(r.window));
    }
    Ok(Value::Object(entry))
}

fn index(ctx: &mut Ctx, field: &Field) -> Value {
    let mut entry = base_entry(field);
    let label = field.label.as_str();
    let e = wilson_dirac(&field.lf, &ctx.rep, -ctx.cfg.m_max).and_then(|h| eta(&h));
    if let Some(e) = ctx.attempt(label, "eta_defined", e) {
        entry.insert("index".into(), json!(-e.eta / 2));
        entry.insert("eta_minus".into(), json!(e.eta));
        entry.insert("method".into(), json!("wilson"));
        ctx.check(label, "eta_defined", e.eta % 2 == 0, format!("eta = {}", e.eta));
    }
    Value::Object(entry)
}

fn overlap(ctx: &mut Ctx, field: &Field) -> Value {
    let mut entry = base_entry(field);
    let label = field.label.as_str();
    let Some(ov) = ctx.attempt(label, "sign_defined", build_overlap(&field.lf, &ctx.rep, ctx.cfg.m_max)) else {
        return Value::Object(entry);
    };
    let tr = overlap_trace(&ov);
    ctx.check(label, "integer_trace", tr.residual < TRACE_TOL, format!("Tr Γ = {:.12}", tr.trace));
    let gw = gw_residual(&ov);
    ctx.check(label, "ginsparg_wilson", gw < 1e-9, format!("residual {gw:.3e}"));
    if let Some(bad) = ctx.attempt(label, "corrupted_control", ov.corrupted()) {
        let r = gw_residual(&bad);
        ctx.check(label, "corrupted_control", r > 0.1, format!("residual {r:.3e}"));
        entry.insert("corrupted_gw_residual".into(), json!(r));
    }
    entry.insert("index".into(), json!(tr.index));
    entry.insert("trace".into(), json!(tr.trace));
    entry.insert("gw_residual".into(), json!(gw));
    entry.insert("min_abs_eig_hw".into(), json!(ov.min_abs_eig()));
    entry.insert("method".into(), json!("overlap"));
    Value::Object(entry)
}

/// Wilson index, `η(±M)` and overlap index of one field.
fn invariants(lf: &LinkField, rep: &GammaRep, m_max: f64) -> Result<(i64, i64, i64)> {
    let minus = eta(&wilson_dirac(lf, rep, -m_max)?)?.eta;
    let plus = eta(&wilson_dirac(lf, rep, m_max)?)?.eta;
    let ov = crate::overlap::overlap_index(&build_overlap(lf, rep, m_max)?)?;
    Ok((minus, plus, ov))
}

fn verify(ctx: &mut Ctx, field: &Field) -> Value {
    let mut entry = base_entry(field);
    let label = field.label.as_str();
    let cfg = ctx.cfg;
    let rep = ctx.rep.clone();

    let grid = MassGrid::uniform(cfg.m_max, cfg.mass_points).expect("validated in run()");
    let flow = AffineFamily::wilson(&field.lf, &rep).and_then(|fam| spectral_flow(&fam, &grid, cfg.window));
    let flow = ctx.attempt(label, "two_method_sf", flow);
    let base = ctx.attempt(label, "invariants_defined", invariants(&field.lf, &rep, cfg.m_max));
    let cont = if field.link.is_continuum() {
        ctx.attempt(label, "continuum_index", continuum_kernel(field.link.descriptor(), &rep, cfg.continuum_cutoff))
    } else {
        None
    };

    if let (Some(f), Some((eta_minus, eta_plus, ov))) = (&flow, base) {
        let wilson = -eta_minus / 2;
        ctx.check(label, "two_method_sf", f.sf == f.sf_from_eta(), format!("crossings {} vs eta {}", f.sf, f.sf_from_eta()));
        ctx.check(label, "eta_plus_zero", eta_plus == 0, format!("eta(+M) = {eta_plus}"));
        ctx.check(label, "wilson_equals_overlap", wilson == ov, format!("wilson {wilson}, overlap {ov}"));
        ctx.check(label, "wilson_equals_sf", wilson == f.sf, format!("wilson {wilson}, sf {}", f.sf));
        if let Some(k) = &cont {
            ctx.check(label, "wilson_equals_continuum", wilson == k.index, format!("wilson {wilson}, continuum {}", k.index));
            entry.insert("continuum_index".into(), json!(k.index));
        }
        if let Some(q) = field.charge {
            ctx.check(label, "index_equals_charge", wilson == q, format!("index {wilson}, charge {q}"));
        }
        entry.insert("wilson_index".into(), json!(wilson));
        entry.insert("overlap_index".into(), json!(ov));
        entry.insert("sf".into(), json!(f.sf));
        entry.insert("eta_minus".into(), json!(eta_minus));
        entry.insert("eta_plus".into(), json!(eta_plus));

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut changed = 0;
        for _ in 0..cfg.gauge_transforms {
            let g = random_gauge(&mut rng, field.lf.lattice(), field.lf.n_c());
            let same = gauge_transform(&field.lf, &g)
                .and_then(|lf| invariants(&lf, &rep, cfg.m_max))
                .map(|v| v == (eta_minus, eta_plus, ov))
                .unwrap_or(false);
            if !same {
                changed += 1;
            }
        }
        ctx.check(
            label,
            "gauge_invariance",
            changed == 0,
            format!("{changed} of {} transforms changed an invariant", cfg.gauge_transforms),
        );
    }

    let mut etas = Vec::new();
    for m in POSITIVE_MASSES {
        if let Some(e) = ctx.attempt(label, "eta_positive_mass", wilson_dirac(&field.lf, &rep, m).and_then(|h| eta(&h))) {
            etas.push(e.eta);
        }
    }
    if etas.len() == POSITIVE_MASSES.len() {
        ctx.check(label, "eta_positive_mass", etas.iter().all(|&e| e == 0), format!("eta = {etas:?}"));
    }
    entry.insert("eta_positive_masses".into(), json!(etas));

    wilson_term_check(ctx, field, &mut entry);

    if let Some(ov) = ctx.attempt(label, "ginsparg_wilson", build_overlap(&field.lf, &rep, cfg.m_max)) {
        let gw = gw_residual(&ov);
        ctx.check(label, "ginsparg_wilson", gw < 1e-9, format!("residual {gw:.3e}"));
        entry.insert("gw_residual".into(), json!(gw));
        if let Some(bad) = ctx.attempt(label, "corrupted_control", ov.corrupted()) {
            let r = gw_residual(&bad);
            ctx.check(label, "corrupted_control", r > 0.1, format!("residual {r:.3e}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    if let Some(r) = ctx.attempt(label, "a_priori", a_priori_check(&field.lf, &rep, cfg.a_priori_trials, &mut rng)) {
        ctx.check(
            label,
            "a_priori",
            r.violations == 0,
            format!("{} violations in {} trials, C = {:.3}", r.violations, r.trials, r.constant),
        );
        entry.insert("a_priori".into(), json!(r));
    }
    Value::Object(entry)
}

fn interp(ctx: &mut Ctx, field: &Field) -> Result<Value> {
    let mut entry = base_entry(field);
    let label = field.label.as_str();
    let cfg = ctx.cfg;
    let rep = ctx.rep.clone();
    let n = field.lf.n() as i32;
    // scaling checks depend on the background only, run them once per charge
    let first_size = cfg.sizes.as_ref().and_then(|s| s.first()).copied() == Some(field.size);
    if first_size {
        let bounds = check_f_bounds(&field.link, &rep, &cfg.interp_sizes, cfg.interp_trials, cfg.interp_sections, cfg.seed);
        if let Some(b) = ctx.attempt(label, "f_bounds", bounds) {
            let bound = 4f64.powi(n);
            let max_norm = b.op_norms.iter().copied().fold(0.0, f64::max);
            let sampled_ok = b.sampled_ratios.iter().zip(&b.op_norms).all(|(r, o)| *r <= o + 1e-9);
            ctx.check(label, "f_norm_bounded", max_norm <= bound && sampled_ok, format!("max ‖f_a‖ = {max_norm:.6}"));
            ctx.check(label, "f_star_f_order", b.residual_order >= 0.8, format!("order {:.3}", b.residual_order));
            ctx.check(label, "f_f_star_decreasing", b.reconstruction_decreasing, "10 band-limited sections".into());
            entry.insert("f_bounds".into(), json!(b));
        }
        let conv = check_dirac_convergence(&field.link, &rep, &cfg.interp_sizes, 4, 3, cfg.seed);
        if let Some(d) = ctx.attempt(label, "dirac_convergence", conv) {
            ctx.check(label, "dirac_convergence", d.order >= 0.8, format!("order {:.3}", d.order));
            entry.insert("dirac_convergence".into(), json!(d));
        }
    }

    let cutoff = cfg.cutoff.unwrap_or(2 * field.size);
    let staple = StapleConfig {
        m_max: cfg.m_max,
        mass_points: cfg.staple_mass_points,
        t_points: cfg.staple_t_points,
        gap_tol: cfg.gap_tol,
        bounded: cfg.bounded_m0,
    };
    if cutoff < 2 * field.size {
        ctx.check(label, "staple_gap", false, format!("cutoff {cutoff} below 2N"));
    } else if let Some(r) = ctx.attempt(label, "staple_gap", staple_samples(&field.link, &rep, field.size, cutoff, &staple)) {
        ctx.csv(format!("staple_{label}.csv"), |out| r.write_csv(out))?;
        ctx.check(label, "staple_gap", r.min_gap > cfg.gap_tol, format!("min gap {:.6} at (m, t) = {:?}", r.min_gap, r.at));
        entry.insert("staple_min_gap".into(), json!(r.min_gap));
        entry.insert("staple_at".into(), json!([r.at.0, r.at.1]));
        entry.insert("route".into(), json!(r.route));
        if field.charge.is_some_and(|q| q != 0) {
            let control = CombinedOperator::new(&field.link, &rep, field.size, cutoff, cfg.bounded_m0)
                .and_then(|op| op.min_abs_eig(0.0, 0.0));
            if let Some(g) = ctx.attempt(label, "staple_control", control) {
                ctx.check(label, "staple_control", g < 1e-6, format!("gap at (0, 0) = {g:.3e}"));
                entry.insert("control_gap".into(), json!(g));
            }
        }
    }
    Ok(Value::Object(entry))
}
