//! Command-line front end: toy-model sweeps, probability tables, sampling,
//! hafnian evaluation and the cross-route validation report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hybrid_gbs::gaussian::{
    covariance_from_quasiparticles, covariance_via_coth, marginal_photon, single_mode_stats, thermal_covariance,
};
use hybrid_gbs::hafnian::{hafnian, pattern_probability, HafnianEngine};
use hybrid_gbs::model::build_toy_hamiltonian;
use hybrid_gbs::oracle::{fock_oracle_auto, series_probabilities};
use hybrid_gbs::sampler::{draw_samples, enumerate_distribution, suggest_cutoff};
use hybrid_gbs::symplectic::{
    bloch_messiah, check_pseudo_unitarity, diagonalization_residual, reconstruction_residual, solve_bdg,
};
use hybrid_gbs::{CovarianceMatrix, GrandDynamicalMatrix, ProbabilityTable, SymmetricComplexMatrix, ToyParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Tail weight left out when the cutoff is chosen automatically.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-9;
/// Photon-number cutoff of the oracle comparison when none is configured.
pub const DEFAULT_ORACLE_CUTOFF: usize = 10;
/// Orders up to this use matching enumeration in the `hafnian` subcommand.
pub const SMALL_HAFNIAN_ORDER: usize = 12;
/// Largest cutoff the oracle comparison attempts before skipping.
pub const MAX_ORACLE_CUTOFF: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] hybrid_gbs::Error),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(hybrid_gbs::Error::Json(_) | hybrid_gbs::Error::Ingest(_)) => 2,
            CliError::Run(_) | CliError::Validation(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ToySweep,
    Probs,
    Sample,
    Hafnian,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "T")]
    Temperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    #[serde(default)]
    pub log_scale: bool,
}

impl Sweep {
    pub fn default_for(variable: SweepVariable) -> Self {
        match variable {
            SweepVariable::Gamma => Self { variable, from: 0.01, to: 3.0, points: 60, log_scale: true },
            SweepVariable::Temperature => Self { variable, from: 0.01, to: 2.0, points: 40, log_scale: false },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(CliError::Config(format!("sweep needs at least 2 points, got {}", self.points)));
        }
        if !(self.from < self.to) || !self.from.is_finite() || !self.to.is_finite() {
            return Err(CliError::Config(format!("sweep needs from < to, got {} and {}", self.from, self.to)));
        }
        if self.log_scale && self.from <= 0.0 {
            return Err(CliError::Config("a log-scaled sweep needs a positive start".into()));
        }
        if self.from < 0.0 {
            return Err(CliError::Config(format!("sweep values must be nonnegative, got {}", self.from)));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let s = i as f64 / last;
                if self.log_scale {
                    (self.from.ln() + s * (self.to.ln() - self.from.ln())).exp()
                } else {
                    self.from + s * (self.to - self.from)
                }
            })
            .collect()
    }
}

impl Default for Sweep {
    fn default() -> Self {
        Self::default_for(SweepVariable::Gamma)
    }
}

/// Configuration file of a run. Toy energies and `T_eff` are ratios to the
/// bare atomic energy `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub toy: ToyParams,
    #[serde(rename = "T_eff", alias = "t_eff")]
    pub t_eff: f64,
    pub sweep: Option<Sweep>,
    pub cutoff: Option<usize>,
    pub seed: u64,
    pub count: usize,
    pub output_path: Option<PathBuf>,
    /// Covariance file for `probs`, `sample` and `validate`; the toy thermal
    /// state is used when absent.
    pub covariance_path: Option<PathBuf>,
    /// Symmetric matrix file for `hafnian`.
    pub matrix_path: Option<PathBuf>,
    /// Probability table for `sample` and `validate`.
    pub table_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: None,
            toy: ToyParams::default(),
            t_eff: 0.0,
            sweep: None,
            cutoff: None,
            seed: 0,
            count: 1000,
            output_path: None,
            covariance_path: None,
            matrix_path: None,
            table_path: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.toy.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.t_eff >= 0.0) || !self.t_eff.is_finite() {
            return Err(CliError::Config(format!("T_eff must be finite and >= 0, got {}", self.t_eff)));
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        Ok(())
    }

    /// Toy parameters in units of `epsilon`.
    pub fn toy_in_units(&self) -> ToyParams {
        let e = self.toy.epsilon;
        ToyParams { hbar_omega: self.toy.hbar_omega / e, epsilon: 1.0, gamma: self.toy.gamma / e, ..self.toy }
    }

    pub fn temperature_in_units(&self) -> f64 {
        self.t_eff / self.toy.epsilon
    }

    fn toy_hamiltonian(&self) -> Result<GrandDynamicalMatrix> {
        Ok(build_toy_hamiltonian(&self.toy_in_units())?)
    }

    /// The covariance file if configured, otherwise the toy thermal state.
    pub fn covariance(&self) -> Result<CovarianceMatrix> {
        match &self.covariance_path {
            Some(p) => Ok(CovarianceMatrix::from_path(p)?),
            None => Ok(thermal_covariance(&self.toy_hamiltonian()?, self.temperature_in_units())?),
        }
    }

    fn cutoff_for(&self, g: &CovarianceMatrix) -> Result<usize> {
        match self.cutoff {
            Some(c) => Ok(c),
            None => Ok(suggest_cutoff(g, DEFAULT_TAIL_TOLERANCE)?),
        }
    }
}

/// One row of the toy sweep; every field but `sweep_value` is NaN when the
/// point failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub eta: f64,
    pub alpha_abs: f64,
    pub alpha_c: f64,
    pub alpha_max: f64,
    pub r_eff: f64,
    pub q_eff: f64,
}

impl SweepRow {
    pub const HEADER: &'static str = "sweep_value,eta,alpha_abs,alpha_c,alpha_max,r_eff,q_eff";

    fn failed(sweep_value: f64) -> Self {
        let n = f64::NAN;
        Self { sweep_value, eta: n, alpha_abs: n, alpha_c: n, alpha_max: n, r_eff: n, q_eff: n }
    }

    pub fn is_failed(&self) -> bool {
        self.eta.is_nan()
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.sweep_value, self.eta, self.alpha_abs, self.alpha_c, self.alpha_max, self.r_eff, self.q_eff
        )
    }
}

fn sweep_point(cfg: &RunConfig, variable: SweepVariable, value: f64) -> hybrid_gbs::Result<SweepRow> {
    let mut toy = cfg.toy_in_units();
    let mut t = cfg.temperature_in_units();
    match variable {
        SweepVariable::Gamma => toy.gamma = value,
        SweepVariable::Temperature => t = value,
    }
    let g = thermal_covariance(&build_toy_hamiltonian(&toy)?, t)?;
    let s = single_mode_stats(&marginal_photon(&g), 0)?;
    Ok(SweepRow {
        sweep_value: value,
        eta: s.eta,
        alpha_abs: s.alpha_abs(),
        alpha_c: s.alpha_c,
        alpha_max: s.alpha_max,
        r_eff: s.r_eff,
        q_eff: s.q_eff,
    })
}

/// Evaluates the sweep in parallel; rows come back in sweep order.
pub fn toy_sweep_rows(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let sweep = cfg.sweep.unwrap_or_default();
    let rows: Vec<SweepRow> = sweep
        .values()
        .into_par_iter()
        .map(|v| {
            sweep_point(cfg, sweep.variable, v).unwrap_or_else(|e| {
                log::warn!("sweep point {v}: {e}");
                SweepRow::failed(v)
            })
        })
        .collect();
    if rows.iter().all(SweepRow::is_failed) {
        return Err(CliError::Run(hybrid_gbs::Error::Unstable("every sweep point failed".into())));
    }
    Ok(rows)
}

pub fn run_toy_sweep(cfg: &RunConfig) -> Result<String> {
    let mut out = String::from(SweepRow::HEADER);
    out.push('\n');
    for row in toy_sweep_rows(cfg)? {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    Ok(out)
}

pub fn run_probs(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let g = cfg.covariance()?;
    g.validate_physical()?;
    let table = enumerate_distribution(&g, cfg.cutoff_for(&g)?)?;
    Ok(table.to_json_string()?)
}

/// One pattern per line as comma-separated counts, no header.
pub fn run_sample(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let table = match &cfg.table_path {
        Some(p) => ProbabilityTable::from_path(p)?,
        None => {
            let g = cfg.covariance()?;
            g.validate_physical()?;
            enumerate_distribution(&g, cfg.cutoff_for(&g)?)?
        }
    };
    let samples = draw_samples(&table, cfg.seed, cfg.count)?;
    let mut out = String::new();
    for s in samples {
        writeln!(out, "{s}").expect("writing to a String");
    }
    Ok(out)
}

fn format_real(x: f64) -> String {
    // avoid printing "-0"
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x}")
    }
}

/// Prints the hafnian as `"re im"`.
pub fn run_hafnian(cfg: &RunConfig) -> Result<String> {
    let path = cfg
        .matrix_path
        .as_ref()
        .ok_or_else(|| CliError::Config("hafnian needs a matrix file (matrix_path or --input)".into()))?;
    let m = SymmetricComplexMatrix::from_path(path)?;
    // small orders are summed exactly over matchings so integer inputs print
    // integer results
    let engine = if m.order() <= SMALL_HAFNIAN_ORDER { HafnianEngine::Matching } else { HafnianEngine::Trace };
    let h = hafnian(&m, engine)?;
    Ok(format!("{} {}\n", format_real(h.re), format_real(h.im)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn measured(name: &str, residual: f64, tolerance: f64) -> Self {
        let status = if residual <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail };
        Self { name: name.into(), residual: Some(residual), tolerance, status, detail: None }
    }

    fn failed(name: &str, tolerance: f64, detail: String) -> Self {
        Self { name: name.into(), residual: None, tolerance, status: CheckStatus::Fail, detail: Some(detail) }
    }

    fn skipped(name: &str, tolerance: f64, detail: String) -> Self {
        Self { name: name.into(), residual: None, tolerance, status: CheckStatus::Skipped, detail: Some(detail) }
    }

    fn from_result(name: &str, tolerance: f64, r: hybrid_gbs::Result<f64>) -> Self {
        match r {
            Ok(x) => Self::measured(name, x, tolerance),
            Err(e) => Self::failed(name, tolerance, e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn toy_checks(h: &GrandDynamicalMatrix, t: f64, checks: &mut Vec<Check>) {
    let scale = h.scale().max(1.0);
    checks.push(Check::measured("hamiltonian_hermiticity", h.symmetrization_residual() / scale, 1e-12));
    let bdg = match solve_bdg(h) {
        Ok(b) => b,
        Err(e) => {
            checks.push(Check::failed("bogoliubov_solve", 0.0, e.to_string()));
            return;
        }
    };
    checks.push(Check::measured("pseudo_unitarity", check_pseudo_unitarity(&bdg), 1e-10));
    checks.push(Check::measured("diagonalization", diagonalization_residual(h, &bdg) / scale, 1e-9));
    checks.push(Check::from_result(
        "bloch_messiah_reconstruction",
        1e-9,
        bloch_messiah(&bdg).map(|f| reconstruction_residual(&bdg, &f)),
    ));
    if t > 0.0 {
        checks.push(Check::from_result(
            "covariance_routes",
            1e-9,
            covariance_via_coth(h, t).and_then(|a| {
                let b = covariance_from_quasiparticles(&bdg, t)?;
                Ok(max_entry_diff(&a, &b))
            }),
        ));
    } else {
        checks.push(Check::skipped("covariance_routes", 1e-9, "coth route needs T_eff > 0".into()));
    }
}

fn max_entry_diff(a: &CovarianceMatrix, b: &CovarianceMatrix) -> f64 {
    a.full().iter().zip(b.full().iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

fn triple_route(h: &GrandDynamicalMatrix, t: f64, total: usize) -> hybrid_gbs::Result<f64> {
    let g = thermal_covariance(h, t)?;
    let fock = fock_oracle_auto(h, t, total)?;
    let series = series_probabilities(&g, total)?;
    let mut worst: f64 = 0.0;
    for (pattern, p_fock) in &fock.probabilities {
        let p_haf = pattern_probability(&g, pattern)?;
        let p_series = series.probability(pattern).unwrap_or(f64::NAN);
        for d in [p_haf - p_fock, p_haf - p_series, p_fock - p_series] {
            worst = if d.is_nan() { f64::NAN } else { worst.max(d.abs()) };
            if worst.is_nan() {
                return Ok(worst);
            }
        }
    }
    Ok(worst)
}

/// Largest probability difference between `table` and a fresh evaluation of
/// the same patterns, deficit included.
fn table_residual(table: &ProbabilityTable, g: &CovarianceMatrix) -> hybrid_gbs::Result<f64> {
    let fresh = enumerate_distribution(g, table.cutoff())?;
    if fresh.len() != table.len() {
        return Err(hybrid_gbs::Error::Dimension(format!(
            "table has {} entries, expected {}",
            table.len(),
            fresh.len()
        )));
    }
    let mut worst = (fresh.deficit() - table.deficit()).abs();
    for (p, v) in table.entries() {
        let w = fresh
            .probability(&p)
            .ok_or_else(|| hybrid_gbs::Error::Dimension(format!("pattern {p} missing from evaluation")))?;
        worst = worst.max((v - w).abs());
    }
    Ok(worst)
}

fn covariance_checks(cfg: &RunConfig, g: &CovarianceMatrix, checks: &mut Vec<Check>) {
    let cutoff = match cfg.cutoff_for(g) {
        Ok(c) => c,
        Err(e) => {
            checks.push(Check::skipped("normalization", 1e-6, e.to_string()));
            checks.push(Check::skipped("table_round_trip", 0.0, e.to_string()));
            return;
        }
    };
    match enumerate_distribution(g, cutoff) {
        Ok(table) => {
            let deficit = table.deficit();
            // an excess above 1 is held to a tighter bound than the tail deficit
            let mut c = Check::measured("normalization", deficit, 1e-6);
            if deficit < -1e-9 {
                c.status = CheckStatus::Fail;
            }
            c.detail = Some(format!("cutoff {cutoff}, 1 - sum = {deficit:.3e}, excess bound 1e-9"));
            checks.push(c);
            let reread = match &cfg.table_path {
                Some(p) => ProbabilityTable::from_path(p),
                None => table.to_json_string().and_then(|s| ProbabilityTable::from_json_str(&s)),
            };
            checks.push(Check::from_result("table_round_trip", 0.0, reread.and_then(|t| table_residual(&t, g))));
        }
        Err(e @ hybrid_gbs::Error::Size(_)) => {
            checks.push(Check::skipped("normalization", 1e-6, e.to_string()));
            checks.push(Check::skipped("table_round_trip", 0.0, e.to_string()));
        }
        Err(e) => {
            checks.push(Check::failed("normalization", 1e-6, e.to_string()));
            checks.push(Check::skipped("table_round_trip", 0.0, "normalization failed".into()));
        }
    }
}

pub fn validation_report(cfg: &RunConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let mut checks = Vec::new();
    let h = cfg.toy_hamiltonian()?;
    let t = cfg.temperature_in_units();
    toy_checks(&h, t, &mut checks);

    let total = cfg.cutoff.unwrap_or(DEFAULT_ORACLE_CUTOFF);
    if t <= 0.0 {
        checks.push(Check::skipped("triple_route", 1e-7, "Fock oracle needs T_eff > 0".into()));
    } else if total > MAX_ORACLE_CUTOFF {
        checks.push(Check::skipped(
            "triple_route",
            1e-7,
            format!("cutoff {total} above the oracle limit {MAX_ORACLE_CUTOFF}"),
        ));
    } else {
        let mut c = Check::from_result("triple_route", 1e-7, triple_route(&h, t, total));
        c.detail.get_or_insert_with(|| format!("patterns with total <= {total}"));
        checks.push(c);
    }

    match cfg.covariance() {
        Ok(g) => match g.validate_physical() {
            Ok(()) => {
                checks.push(Check::measured("covariance_physical", 0.0, 0.0));
                covariance_checks(cfg, &g, &mut checks);
            }
            Err(e) => {
                checks.push(Check::failed("covariance_physical", 0.0, e.to_string()));
                checks.push(Check::skipped("normalization", 1e-6, "unphysical covariance".into()));
                checks.push(Check::skipped("table_round_trip", 0.0, "unphysical covariance".into()));
            }
        },
        Err(CliError::Run(e @ (hybrid_gbs::Error::Io(_) | hybrid_gbs::Error::Json(_) | hybrid_gbs::Error::Ingest(_)))) => {
            return Err(CliError::Config(format!("covariance file: {e}")));
        }
        Err(e) => checks.push(Check::failed("covariance_physical", 0.0, e.to_string())),
    }

    let passed = checks.iter().all(|c| c.status != CheckStatus::Fail);
    Ok(ValidationReport { passed, checks })
}

/// Returns the report text and whether every check passed or was skipped.
pub fn run_validate(cfg: &RunConfig) -> Result<(String, bool)> {
    let report = validation_report(cfg)?;
    let text = serde_json::to_string_pretty(&report).map_err(hybrid_gbs::Error::from)?;
    Ok((text, report.passed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grid_endpoints() {
        let s = Sweep { variable: SweepVariable::Gamma, from: 0.01, to: 3.0, points: 5, log_scale: true };
        let v = s.values();
        assert_eq!(v.len(), 5);
        assert!((v[0] - 0.01).abs() < 1e-15 && (v[4] - 3.0).abs() < 1e-12);
        assert!((v[1] / v[0] - v[4] / v[3]).abs() < 1e-9);
        let lin = Sweep { log_scale: false, from: 0.0, ..s }.values();
        assert!((lin[2] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn config_invariants() {
        let bad = |s: Sweep| RunConfig { sweep: Some(s), ..Default::default() }.validate().is_err();
        let s = Sweep::default();
        assert!(bad(Sweep { points: 1, ..s }));
        assert!(bad(Sweep { from: 3.0, to: 1.0, ..s }));
        assert!(bad(Sweep { from: 0.0, ..s }));
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig { t_eff: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn config_json_fields() {
        let cfg = RunConfig::from_json_str(
            r#"{"mode": "toy-sweep", "T_eff": 0.5, "sweep": {"variable": "T", "from": 0.1, "to": 1, "points": 3},
                "toy": {"hbar_omega": 2, "epsilon": 1, "gamma": 0.3, "n0": 1, "q0": 7}}"#,
        )
        .unwrap();
        assert_eq!(cfg.mode, Some(Mode::ToySweep));
        assert_eq!(cfg.sweep.unwrap().variable, SweepVariable::Temperature);
        assert!(RunConfig::from_json_str(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn energies_are_ratios() {
        let cfg = RunConfig {
            toy: ToyParams { hbar_omega: 4.0, epsilon: 2.0, gamma: 1.0, n0: 1.0, q0: 7.0 },
            t_eff: 0.4,
            ..Default::default()
        };
        let toy = cfg.toy_in_units();
        assert_eq!((toy.hbar_omega, toy.epsilon, toy.gamma), (2.0, 1.0, 0.5));
        assert_eq!(cfg.temperature_in_units(), 0.2);
    }

    #[test]
    fn failed_rows_are_nan() {
        let row = SweepRow::failed(0.5);
        assert!(row.is_failed());
        assert_eq!(row.csv_line(), "0.5,NaN,NaN,NaN,NaN,NaN,NaN");
    }

    #[test]
    fn negative_zero_prints_plain() {
        assert_eq!(format_real(-0.0), "0");
        assert_eq!(format_real(3.0), "3");
    }
}
