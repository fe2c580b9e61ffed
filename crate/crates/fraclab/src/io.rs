//! Experiment configuration, the four experiments behind the command-line tool, and
//! deterministic CSV/JSON/matrix output.
//!
//! Files are written to a temporary sibling and renamed into place. CSV files start with a
//! `# config sha256=…` comment followed by a header row; JSON objects have sorted keys.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::discretization::{
    assemble_1d_grid, assemble_1d_spectral, assemble_2d_grid_capped, assemble_transformed_form, Basis,
    DiscreteOperator, DEFAULT_NODE_CAP,
};
use crate::genericity::{simplify_with_log, Mode, SimplificationContext, SimplificationPlan, SimplificationReport};
use crate::geometry::{apply_perturbation, Domain, PerturbationField};
use crate::shape_calculus::{pohozaev_residual, splitting_matrix_domain, tracked_slopes};
use crate::spectrum::{cluster, cluster_ids, default_cluster_tolerance, solve};
use crate::{Error, Result};

/// Which experiment a configuration describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Pohozaev,
    HadamardCheck,
    Simplify,
}

/// A scalar or a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// How the operator is discretized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DiscretizationSpec {
    /// Weighted Jacobi polynomials on an interval.
    Spectral { n: usize },
    /// Vertex lattice of spacing `h`.
    Grid {
        h: f64,
        #[serde(default = "default_cap")]
        node_cap: usize,
    },
}

fn default_cap() -> usize {
    DEFAULT_NODE_CAP
}

/// A perturbation field described relative to the configured domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FieldSpec {
    /// `ψ = x - center`.
    Dilation,
    /// `ψ = direction`.
    Translation { direction: [f64; 2] },
    /// `cos(kθ) N` (or `sin(kθ) N`) with a smooth cutoff.
    Normal {
        k: usize,
        #[serde(default)]
        sine: bool,
    },
    /// One-dimensional bump field `P(u) η(u)`, `u = (x - center)/radius`.
    Bump { center: f64, radius: f64, coeffs: Vec<f64> },
}

impl FieldSpec {
    pub fn label(&self) -> String {
        match self {
            FieldSpec::Dilation => "dilation".into(),
            FieldSpec::Translation { direction } => format!("translation({} {})", direction[0], direction[1]),
            FieldSpec::Normal { k, sine } => format!("normal {}({}θ)", if *sine { "sin" } else { "cos" }, k),
            FieldSpec::Bump { center, radius, .. } => format!("bump({center} {radius})"),
        }
    }

    /// The unit-amplitude field on `domain`.
    pub fn build(&self, domain: &Domain) -> Result<PerturbationField> {
        let c = domain.center();
        Ok(match self {
            FieldSpec::Dilation => PerturbationField::affine([-c[0], -c[1]], [[1.0, 0.0], [0.0, 1.0]], 1.0),
            FieldSpec::Translation { direction } => PerturbationField::translation(*direction, 1.0),
            FieldSpec::Normal { k, sine } => {
                if domain.dim() != 2 || *k == 0 {
                    return Err(Error::Config {
                        field: "fields".into(),
                        message: "normal fields need a planar domain and k ≥ 1".into(),
                    });
                }
                PerturbationField::normal_mode(domain, *k, *sine, 1.0)
            }
            FieldSpec::Bump { center, radius, coeffs } => {
                PerturbationField::bump_1d(*center, *radius, coeffs.clone(), 1.0)
            }
        })
    }
}

/// Settings of the simplicity loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplifySpec {
    pub mode: Mode,
    pub q: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_tol: Option<f64>,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_iterations() -> usize {
    20
}

/// Output locations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
}

/// A complete experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub s: OneOrMany,
    /// Number of eigenvalues.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_tol: Option<f64>,
    /// Step `τ` of the finite-difference slopes (`t ∈ {±τ, ±2τ}`).
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub domain: Domain,
    pub discretization: DiscretizationSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simplify: Option<SimplifySpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_k() -> usize {
    5
}

fn default_fd_step() -> f64 {
    0.01
}

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

impl ExperimentConfig {
    /// Defaults on `(-1, 1)` with 64 spectral modes.
    pub fn interval_defaults(command: Command) -> Self {
        ExperimentConfig {
            command,
            s: OneOrMany::Many(vec![0.25, 0.5, 0.75]),
            k: 5,
            cluster_tol: None,
            fd_step: default_fd_step(),
            seed: None,
            domain: Domain::Interval { a: -1.0, b: 1.0 },
            discretization: DiscretizationSpec::Spectral { n: 64 },
            fields: vec![FieldSpec::Dilation, FieldSpec::Translation { direction: [1.0, 0.0] }],
            simplify: Some(SimplifySpec { mode: Mode::Domain, q: 10, epsilon: 0.1, max_iterations: 20, cluster_tol: None }),
            output: OutputSpec::default(),
        }
    }

    /// Defaults on the unit disk, `s = 1/2`, `h = 1/16`.
    pub fn disk_defaults(command: Command) -> Self {
        ExperimentConfig {
            command,
            s: OneOrMany::One(0.5),
            k: 5,
            cluster_tol: None,
            fd_step: default_fd_step(),
            seed: None,
            domain: Domain::Star2d { center: [0.0, 0.0], cos: vec![1.0], sin: vec![] },
            discretization: DiscretizationSpec::Grid { h: 1.0 / 16.0, node_cap: DEFAULT_NODE_CAP },
            fields: vec![FieldSpec::Dilation, FieldSpec::Normal { k: 2, sine: false }],
            simplify: Some(SimplifySpec { mode: Mode::Domain, q: 5, epsilon: 0.1, max_iterations: 20, cluster_tol: None }),
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let span = e.message().to_string();
            config_error("config", span)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical TOML rendering, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.s.values();
        if s.is_empty() {
            return Err(config_error("s", "no values"));
        }
        if let Some(bad) = s.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(config_error("s", format!("{bad} is outside (0, 1)")));
        }
        if self.k == 0 {
            return Err(config_error("k", "must be positive"));
        }
        if let Some(t) = self.cluster_tol {
            if !(t > 0.0) {
                return Err(config_error("cluster_tol", "must be positive"));
            }
        }
        if !(self.fd_step > 0.0 && self.fd_step < 0.2) {
            return Err(config_error("fd_step", "must lie in (0, 0.2)"));
        }
        self.domain.validate().map_err(|e| config_error("domain", e.to_string()))?;
        match (&self.discretization, &self.domain) {
            (DiscretizationSpec::Spectral { n }, Domain::Interval { .. }) => {
                if *n < 2 {
                    return Err(config_error("discretization.n", "must be at least 2"));
                }
            }
            (DiscretizationSpec::Spectral { .. }, _) => {
                return Err(config_error("discretization.method", "spectral needs an interval"));
            }
            (DiscretizationSpec::Grid { h, node_cap }, _) => {
                if !(*h > 0.0) {
                    return Err(config_error("discretization.h", "must be positive"));
                }
                if *node_cap == 0 {
                    return Err(config_error("discretization.node_cap", "must be positive"));
                }
            }
        }
        if let Some(sp) = &self.simplify {
            if sp.q == 0 {
                return Err(config_error("simplify.q", "must be positive"));
            }
            if !(sp.epsilon > 0.0 && sp.epsilon < 1.0) {
                return Err(config_error("simplify.epsilon", "budgets need 0 < epsilon < 1"));
            }
        }
        if self.command == Command::Simplify && self.simplify.is_none() {
            return Err(config_error("simplify", "missing section"));
        }
        Ok(())
    }

    /// The operator for order `s`.
    pub fn operator(&self, s: f64) -> Result<DiscreteOperator> {
        match (&self.discretization, &self.domain) {
            (DiscretizationSpec::Spectral { n }, d) => assemble_1d_spectral(s, *n, d),
            (DiscretizationSpec::Grid { h, .. }, d @ Domain::Interval { .. }) => assemble_1d_grid(s, *h, d),
            (DiscretizationSpec::Grid { h, node_cap }, d) => assemble_2d_grid_capped(s, *h, d, *node_cap),
        }
    }

    fn boundary_nodes(&self) -> usize {
        if self.domain.dim() == 1 {
            2
        } else {
            256
        }
    }
}

/// A table destined for CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    /// CSV text with a leading `# config sha256=…` comment.
    pub fn to_csv(&self, config_hash: &str) -> Result<String> {
        let mut out = format!("# config sha256={config_hash}\n").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.header).map_err(|e| Error::Io(e.to_string()))?;
            for r in &self.rows {
                w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
            }
            w.flush()?;
        }
        String::from_utf8(out).map_err(|e| Error::Io(e.to_string()))
    }

    /// Parses text produced by [`to_csv`](Self::to_csv); returns the table and the hash.
    pub fn from_csv(text: &str) -> Result<(Self, Option<String>)> {
        let hash = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# config sha256="))
            .map(str::to_string);
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| Error::Io(e.to_string()))?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(|e| Error::Io(e.to_string()))?.iter().map(str::to_string).collect());
        }
        Ok((Table { header, rows }, hash))
    }
}

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

/// Writes `contents` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}

/// Pretty JSON with sorted keys.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
    serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))
}

/// Row-major text export: a `# basis …` header, the dimensions, then one row per line.
pub fn matrix_to_text(m: &DMatrix<f64>, meta: &str) -> String {
    let mut out = format!("# basis {meta}\n{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.17e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Inverse of [`matrix_to_text`]; returns the matrix and the basis description.
pub fn matrix_from_text(text: &str) -> Result<(DMatrix<f64>, String)> {
    let bad = |m: &str| Error::Io(format!("matrix file: {m}"));
    let mut lines = text.lines();
    let meta = lines.next().and_then(|l| l.strip_prefix("# basis ")).ok_or_else(|| bad("missing header"))?;
    let dims: Vec<usize> = lines
        .next()
        .ok_or_else(|| bad("missing dimensions"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad dimension")))
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(bad("bad dimensions"));
    }
    let mut data = Vec::with_capacity(dims[0] * dims[1]);
    for l in lines {
        for t in l.split_whitespace() {
            data.push(t.parse::<f64>().map_err(|_| bad("bad entry"))?);
        }
    }
    if data.len() != dims[0] * dims[1] {
        return Err(bad("entry count does not match"));
    }
    Ok((DMatrix::from_row_slice(dims[0], dims[1], &data), meta.to_string()))
}

/// Writes the stiffness and mass of `op` next to each other (`<stem>.stiffness.txt`,
/// `<stem>.mass.txt`).
pub fn export_operator(op: &DiscreteOperator, stem: &Path) -> Result<()> {
    let meta = op.basis.describe();
    let with = |suffix: &str| {
        let mut p = stem.as_os_str().to_owned();
        p.push(suffix);
        std::path::PathBuf::from(p)
    };
    write_atomic(&with(".stiffness.txt"), matrix_to_text(&op.stiffness, &meta).as_bytes())?;
    write_atomic(&with(".mass.txt"), matrix_to_text(&op.mass, &meta).as_bytes())
}

fn cluster_tol_for(cfg: &ExperimentConfig, op: &DiscreteOperator) -> f64 {
    cfg.cluster_tol.unwrap_or_else(|| default_cluster_tolerance(op))
}

/// Eigenvalues with cluster ids: columns `s, k, lambda, cluster`.
pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(&["s", "k", "lambda", "cluster"]);
    for s in cfg.s.values() {
        let op = cfg.operator(s)?;
        if cfg.k > op.size() {
            return Err(config_error("k", format!("{} exceeds the {} unknowns", cfg.k, op.size())));
        }
        let spec = solve(&op, cfg.k)?;
        let ids = cluster_ids(&cluster(&spec, cluster_tol_for(cfg, &op)));
        for (k, (v, id)) in spec.eigenvalues.iter().zip(ids).enumerate() {
            t.rows.push(vec![s.to_string(), (k + 1).to_string(), num(*v), (id + 1).to_string()]);
        }
    }
    Ok(t)
}

/// Pohozaev residuals: columns `s, k, residual`.
pub fn run_pohozaev(cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(&["s", "k", "residual"]);
    let bq = cfg.domain.boundary_quadrature(cfg.boundary_nodes());
    for s in cfg.s.values() {
        let op = cfg.operator(s)?;
        if cfg.k > op.size() {
            return Err(config_error("k", format!("{} exceeds the {} unknowns", cfg.k, op.size())));
        }
        let spec = solve(&op, cfg.k)?;
        for k in 0..cfg.k {
            t.rows.push(vec![s.to_string(), (k + 1).to_string(), num(pohozaev_residual(&spec, k, &bq)?)]);
        }
    }
    Ok(t)
}

/// Boundary-route slopes against tracked finite-difference slopes: columns
/// `s, field, k, slope_formula, slope_fd, error, error_kind`. Errors are relative unless the
/// finite-difference slope is below `1e-6 λ_k`, in which case they are absolute.
pub fn run_hadamard_check(cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(&["s", "field", "k", "slope_formula", "slope_fd", "error", "error_kind"]);
    let bq = cfg.domain.boundary_quadrature(cfg.boundary_nodes());
    if cfg.fields.is_empty() {
        return Err(config_error("fields", "no perturbation fields given"));
    }
    for s in cfg.s.values() {
        let op = cfg.operator(s)?;
        let count = (cfg.k + 2).min(op.size());
        let spec = solve(&op, count)?;
        let clusters = cluster(&spec, cluster_tol_for(cfg, &op));
        for f in &cfg.fields {
            let psi = f.build(&cfg.domain)?;
            let family = |t: f64| -> Result<DiscreteOperator> {
                match &op.basis {
                    Basis::Grid { .. } => assemble_transformed_form(&op, &psi.with_amplitude(t)),
                    Basis::Spectral1d(info) => {
                        let d = apply_perturbation(&cfg.domain, &psi.with_amplitude(t))?;
                        assemble_1d_spectral(s, info.n, &d)
                    }
                }
            };
            for cl in clusters.iter().filter(|c| c.start < cfg.k) {
                let m = splitting_matrix_domain(cl, &spec, &psi, &bq)?;
                let fd = tracked_slopes(&family, cl, cfg.fd_step)?;
                for (j, (a, b)) in m.eigenvalues.iter().zip(&fd).enumerate() {
                    let k = cl.start + j;
                    if k >= cfg.k {
                        break;
                    }
                    let floor = 1e-6 * spec.eigenvalues[k].abs();
                    let (err, kind) =
                        if b.abs() > floor { ((a - b).abs() / b.abs(), "relative") } else { ((a - b).abs(), "absolute") };
                    t.rows.push(vec![
                        s.to_string(),
                        f.label(),
                        (k + 1).to_string(),
                        num(*a),
                        num(*b),
                        num(err),
                        kind.to_string(),
                    ]);
                }
            }
        }
    }
    Ok(t)
}

/// Runs the simplicity loop for the first value of `s`.
pub fn run_simplify(cfg: &ExperimentConfig, log: impl FnMut(&str)) -> Result<SimplificationReport> {
    let sp = cfg.simplify.as_ref().ok_or_else(|| config_error("simplify", "missing section"))?;
    let s = cfg.s.values()[0];
    let op = cfg.operator(s)?;
    let mut plan = SimplificationPlan::new(sp.mode, sp.q, &op);
    plan.epsilon = sp.epsilon;
    plan.max_iterations = sp.max_iterations;
    if let Some(t) = sp.cluster_tol.or(cfg.cluster_tol) {
        plan.cluster_tol = t;
    }
    let ctx = SimplificationContext { base: op, domain: cfg.domain.clone() };
    simplify_with_log(&ctx, &plan, log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        for cfg in [ExperimentConfig::interval_defaults(Command::Spectrum), ExperimentConfig::disk_defaults(Command::Simplify)] {
            let text = cfg.to_toml();
            let back = ExperimentConfig::from_toml(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.to_toml(), text);
            assert_eq!(back.hash(), cfg.hash());
        }
    }

    #[test]
    fn invalid_order_names_the_field() {
        let mut cfg = ExperimentConfig::interval_defaults(Command::Spectrum);
        cfg.s = OneOrMany::One(1.5);
        let err = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "s"));
        assert!(err.is_config_error());
    }

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.rows.push(vec!["1".into(), "x y".into()]);
        let text = t.to_csv("abc").unwrap();
        assert!(text.starts_with("# config sha256=abc\na,b\n"));
        let (back, hash) = Table::from_csv(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(hash.as_deref(), Some("abc"));
    }

    #[test]
    fn matrix_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 1e-300, 0.1, 3.0, f64::MAX]);
        let (back, meta) = matrix_from_text(&matrix_to_text(&m, "test basis")).unwrap();
        assert_eq!(back, m);
        assert_eq!(meta, "test basis");
    }
}
