//! Trial-outcome statistics: fixed-effects logistic regression with nested
//! position factors, Wald inference, odds ratios and success-rate tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use thiserror::Error;

pub const INTERCEPT: &str = "Intercept";
/// Column header of the trials file, in order.
pub const TRIALS_HEADER: [&str; 6] = ["environment", "position", "target", "model", "success", "episode_len"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("trials file line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("trials file line {line}: empty `{field}` label")]
    EmptyLabel { line: u64, field: &'static str },
    #[error("no trial records")]
    NoRecords,
    #[error("the response has a single value; a logistic fit needs successes and failures")]
    ConstantResponse,
    #[error("design matrix is rank deficient (rank {rank} < {columns} columns); collinear: {culprit}")]
    RankDeficiency { rank: usize, columns: usize, culprit: String },
    #[error("unknown coefficient `{0}`")]
    UnknownCoefficient(String),
    #[error("unknown factor `{0}` (expected model, target, environment or position)")]
    UnknownFactor(String),
    #[error("fit did not converge after {} iterations", .0.iterations)]
    NonConvergence(Box<RegressionReport>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub environment: String,
    /// Starting position label, nested within `environment`.
    pub position: String,
    pub target: String,
    pub model: String,
    pub success: bool,
    pub episode_len: Option<u32>,
}

#[derive(Deserialize)]
struct RawTrial {
    environment: String,
    position: String,
    target: String,
    model: String,
    success: String,
    #[serde(default)]
    episode_len: Option<u32>,
}

/// Parse a trials CSV. Labels are taken verbatim (no trimming or case
/// folding); `success` is `1`/`0` or `true`/`false`.
pub fn read_trials(bytes: &[u8]) -> Result<Vec<TrialRecord>, AnalysisError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::None).from_reader(bytes);
    let headers = rdr.headers().map_err(|e| AnalysisError::Csv {
        line: 1,
        message: e.to_string(),
    })?;
    let got: Vec<&str> = headers.iter().collect();
    let required = &TRIALS_HEADER[..5];
    if got.len() < 5 || got[..5] != *required || (got.len() > 5 && got[5..] != TRIALS_HEADER[5..]) {
        return Err(AnalysisError::Csv {
            line: 1,
            message: format!("header must be `{}` (episode_len optional)", TRIALS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<RawTrial>() {
        let row = row.map_err(|e| AnalysisError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = out.len() as u64 + 2;
        let success = match row.success.as_str() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(AnalysisError::Csv {
                    line,
                    message: format!("success must be 1, 0, true or false, got `{other}`"),
                })
            }
        };
        for (field, v) in [
            ("environment", &row.environment),
            ("position", &row.position),
            ("target", &row.target),
            ("model", &row.model),
        ] {
            if v.is_empty() {
                return Err(AnalysisError::EmptyLabel { line, field });
            }
        }
        out.push(TrialRecord {
            environment: row.environment,
            position: row.position,
            target: row.target,
            model: row.model,
            success,
            episode_len: row.episode_len,
        });
    }
    Ok(out)
}

pub fn write_trials(records: &[TrialRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIALS_HEADER).expect("in-memory write");
    for r in records {
        let len = r.episode_len.map(|l| l.to_string()).unwrap_or_default();
        w.write_record([
            r.environment.as_str(),
            &r.position,
            &r.target,
            &r.model,
            if r.success { "1" } else { "0" },
            &len,
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Model,
    Target,
    Environment,
    /// Starting position, coded within each environment.
    Position,
}

impl Factor {
    pub const ALL: [Factor; 4] = [Factor::Model, Factor::Target, Factor::Environment, Factor::Position];

    pub fn parse_list(s: &str) -> Result<Vec<Factor>, AnalysisError> {
        let mut out = BTreeSet::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            out.insert(match part {
                "model" => Factor::Model,
                "target" => Factor::Target,
                "environment" => Factor::Environment,
                "position" => Factor::Position,
                other => return Err(AnalysisError::UnknownFactor(other.to_string())),
            });
        }
        Ok(out.into_iter().collect())
    }
}

/// Named design matrix with a binary response.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    names: Vec<String>,
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Design {
    /// Checks shapes, a two-valued response and full column rank.
    pub fn new(names: Vec<String>, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self, AnalysisError> {
        assert_eq!(names.len(), x.ncols(), "one name per column");
        assert_eq!(x.nrows(), y.len(), "one response per row");
        if y.is_empty() {
            return Err(AnalysisError::NoRecords);
        }
        if y.iter().all(|v| *v == y[0]) {
            return Err(AnalysisError::ConstantResponse);
        }
        check_rank(&names, &x)?;
        Ok(Design { names, x, y })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }
}

fn rank_of(x: &DMatrix<f64>) -> usize {
    if x.ncols() == 0 {
        return 0;
    }
    let sv = x.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let tol = max * x.nrows().max(x.ncols()) as f64 * f64::EPSILON * 16.0;
    sv.iter().filter(|s| **s > tol).count()
}

fn check_rank(names: &[String], x: &DMatrix<f64>) -> Result<(), AnalysisError> {
    let p = x.ncols();
    let rank = rank_of(x);
    if rank == p {
        return Ok(());
    }
    // first column that adds nothing to the span of its predecessors
    let culprit = (1..=p)
        .find(|&k| rank_of(&x.columns(0, k).into_owned()) < k)
        .map(|k| names[k - 1].clone())
        .unwrap_or_default();
    Err(AnalysisError::RankDeficiency { rank, columns: p, culprit })
}

fn levels<'a>(records: &'a [TrialRecord], f: impl Fn(&'a TrialRecord) -> &'a str) -> Vec<&'a str> {
    records.iter().map(f).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Intercept plus treatment-coded dummies for the requested factors, with
/// the lexicographically first label of each factor as reference. Positions
/// are coded within each environment: one column per non-reference position
/// of each environment. Labels are compared verbatim.
pub fn build_design(records: &[TrialRecord], factors: &[Factor]) -> Result<Design, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::NoRecords);
    }
    let factors: BTreeSet<Factor> = factors.iter().copied().collect();
    let mut names = vec![INTERCEPT.to_string()];
    let mut cols: Vec<Box<dyn Fn(&TrialRecord) -> bool + '_>> = vec![Box::new(|_| true)];
    let main = |names: &mut Vec<String>,
                    cols: &mut Vec<Box<dyn Fn(&TrialRecord) -> bool + '_>>,
                    key: &'static str,
                    get: fn(&TrialRecord) -> &str| {
        for level in levels(records, get).into_iter().skip(1) {
            let level = level.to_string();
            names.push(format!("{key}={level}"));
            cols.push(Box::new(move |r| get(r) == level));
        }
    };
    if factors.contains(&Factor::Model) {
        main(&mut names, &mut cols, "model", |r| &r.model);
    }
    if factors.contains(&Factor::Target) {
        main(&mut names, &mut cols, "target", |r| &r.target);
    }
    if factors.contains(&Factor::Environment) {
        main(&mut names, &mut cols, "environment", |r| &r.environment);
    }
    if factors.contains(&Factor::Position) {
        let mut by_env: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for r in records {
            by_env.entry(&r.environment).or_default().insert(&r.position);
        }
        for (env, positions) in by_env {
            for pos in positions.into_iter().skip(1) {
                let (env, pos) = (env.to_string(), pos.to_string());
                names.push(format!("environment={env}:position={pos}"));
                cols.push(Box::new(move |r| r.environment == env && r.position == pos));
            }
        }
    }
    let x = DMatrix::from_fn(records.len(), cols.len(), |i, j| if cols[j](&records[i]) { 1.0 } else { 0.0 });
    let y = DVector::from_iterator(records.len(), records.iter().map(|r| if r.success { 1.0 } else { 0.0 }));
    Design::new(names, x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    /// Converged when the largest coefficient update is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Ridge penalty on every non-intercept coefficient; 0 disables it.
    pub ridge: f64,
    /// Confidence level of the reported odds-ratio intervals.
    pub level: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 100,
            ridge: 0.0,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatio {
    pub name: String,
    pub point: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub coefficients: Vec<Coefficient>,
    pub odds_ratios: Vec<OddsRatio>,
    pub converged: bool,
    pub iterations: usize,
    pub n: usize,
    pub log_likelihood: f64,
    /// Some coefficient exceeds 10 in magnitude, a sign of (quasi-)separation.
    pub separation_warning: bool,
    pub ridge: f64,
}

impl RegressionReport {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Bernoulli log-likelihood of `beta`.
pub fn log_likelihood(d: &Design, beta: &DVector<f64>) -> f64 {
    let eta = &d.x * beta;
    eta.iter().zip(d.y.iter()).map(|(e, y)| y * e - softplus(*e)).sum()
}

/// Gradient of the log-likelihood, `Xᵀ(y - μ)`.
pub fn gradient(d: &Design, beta: &DVector<f64>) -> DVector<f64> {
    let eta = &d.x * beta;
    let resid = DVector::from_iterator(d.y.len(), eta.iter().zip(d.y.iter()).map(|(e, y)| y - sigmoid(*e)));
    d.x.transpose() * resid
}

fn penalty_mask(d: &Design) -> DVector<f64> {
    DVector::from_iterator(d.names.len(), d.names.iter().map(|n| if n == INTERCEPT { 0.0 } else { 1.0 }))
}

fn penalized(d: &Design, beta: &DVector<f64>, ridge: f64, mask: &DVector<f64>) -> f64 {
    log_likelihood(d, beta) - 0.5 * ridge * beta.component_mul(mask).norm_squared()
}

/// Weighted information matrix `XᵀWX + ridge·M`.
fn information(d: &Design, beta: &DVector<f64>, ridge: f64, mask: &DVector<f64>) -> DMatrix<f64> {
    let eta = &d.x * beta;
    let mut xw = d.x.clone();
    for (i, e) in eta.iter().enumerate() {
        let mu = sigmoid(*e);
        let w = mu * (1.0 - mu);
        xw.row_mut(i).scale_mut(w);
    }
    let mut h = d.x.transpose() * xw;
    for j in 0..h.ncols() {
        h[(j, j)] += ridge * mask[j];
    }
    h
}

/// Two-sided standard-normal quantile for confidence `level`.
pub fn z_for_level(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + 0.5 * level)
}

/// Odds ratio `exp(estimate)` with interval `exp(estimate ± z·se)`.
pub fn odds_ratio_from(name: &str, estimate: f64, std_error: f64, level: f64) -> OddsRatio {
    let z = z_for_level(level);
    OddsRatio {
        name: name.to_string(),
        point: estimate.exp(),
        ci_lo: (estimate - z * std_error).exp(),
        ci_hi: (estimate + z * std_error).exp(),
        level,
    }
}

pub fn odds_ratio(report: &RegressionReport, name: &str, level: f64) -> Result<OddsRatio, AnalysisError> {
    let c = report
        .coefficient(name)
        .ok_or_else(|| AnalysisError::UnknownCoefficient(name.to_string()))?;
    Ok(odds_ratio_from(name, c.estimate, c.std_error, level))
}

/// Maximum-likelihood fit by iteratively reweighted least squares (Newton's
/// method with step halving). Standard errors come from the inverse
/// information at the final estimate and p-values from two-sided Wald tests.
/// A fit that fails to converge is returned inside
/// [`AnalysisError::NonConvergence`].
pub fn fit_logistic(d: &Design, opts: &FitOptions) -> Result<RegressionReport, AnalysisError> {
    let p = d.names.len();
    let mask = penalty_mask(d);
    let mut beta = DVector::zeros(p);
    let mut ll = penalized(d, &beta, opts.ridge, &mask);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let h = information(d, &beta, opts.ridge, &mask);
        let g = gradient(d, &beta) - (beta.component_mul(&mask) * opts.ridge);
        let Some(chol) = h.cholesky() else {
            break;
        };
        let mut step = chol.solve(&g);
        let mut next = &beta + &step;
        let mut next_ll = penalized(d, &next, opts.ridge, &mask);
        let mut halvings = 0;
        while next_ll < ll - 1e-12 * ll.abs().max(1.0) && halvings < 30 {
            step *= 0.5;
            next = &beta + &step;
            next_ll = penalized(d, &next, opts.ridge, &mask);
            halvings += 1;
        }
        let change = step.amax();
        beta = next;
        ll = next_ll;
        if !change.is_finite() {
            break;
        }
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let h = information(d, &beta, opts.ridge, &mask);
    let cov = h.clone().cholesky().map(|c| c.inverse()).or_else(|| h.try_inverse());
    let coefficients: Vec<Coefficient> = (0..p)
        .map(|j| {
            let var = cov.as_ref().map_or(f64::INFINITY, |c| c[(j, j)]);
            let se = if var.is_finite() && var >= 0.0 { var.sqrt() } else { f64::INFINITY };
            let z = if se.is_finite() && se > 0.0 { beta[j] / se } else { 0.0 };
            Coefficient {
                name: d.names[j].clone(),
                estimate: beta[j],
                std_error: se,
                z,
                p_value: erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0),
            }
        })
        .collect();
    let odds_ratios = coefficients
        .iter()
        .filter(|c| c.name != INTERCEPT)
        .map(|c| odds_ratio_from(&c.name, c.estimate, c.std_error, opts.level))
        .collect();
    let report = RegressionReport {
        separation_warning: beta.iter().any(|b| b.abs() > 10.0),
        coefficients,
        odds_ratios,
        converged,
        iterations,
        n: d.y.len(),
        log_likelihood: log_likelihood(d, &beta),
        ridge: opts.ridge,
    };
    if converged {
        Ok(report)
    } else {
        Err(AnalysisError::NonConvergence(Box::new(report)))
    }
}

/// Coefficient table (name, Coef., Std.Err., z, p-value) followed by one
/// odds-ratio line per non-intercept coefficient.
pub fn render_report(r: &RegressionReport) -> String {
    let name_w = r.coefficients.iter().map(|c| c.name.chars().count()).max().unwrap_or(0).max(4);
    let mut s = String::new();
    let _ = writeln!(s, "{:<name_w$}  {:>8}  {:>8}  {:>7}  {:>7}", "", "Coef.", "Std.Err.", "z", "p-value");
    for c in &r.coefficients {
        let _ = writeln!(
            s,
            "{:<name_w$}  {:>8.2}  {:>8.3}  {:>7.2}  {:>7.3}",
            c.name, c.estimate, c.std_error, c.z, c.p_value
        );
    }
    let _ = writeln!(
        s,
        "\nn = {}, log-likelihood = {:.4}, converged = {} after {} iterations{}",
        r.n,
        r.log_likelihood,
        r.converged,
        r.iterations,
        if r.ridge > 0.0 { format!(", ridge = {}", r.ridge) } else { String::new() }
    );
    if r.separation_warning {
        s.push_str("warning: a coefficient exceeds 10 in magnitude; the data may be separable\n");
    }
    s.push('\n');
    for o in &r.odds_ratios {
        let _ = writeln!(
            s,
            "odds ratio {}: exp({:.2}) = {:.3}, {:.0}% CI [{:.3}, {:.3}]",
            o.name,
            o.point.ln(),
            o.point,
            o.level * 100.0,
            o.ci_lo,
            o.ci_hi
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub trials: usize,
    pub successes: usize,
    /// Percentage of successful trials.
    pub success_rate: f64,
    pub mean_episode_len: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub models: Vec<String>,
    pub environments: Vec<String>,
    /// `cells[e][m]` for environment `e` and model `m`; `None` when no trial
    /// has that combination.
    pub cells: Vec<Vec<Option<SummaryCell>>>,
    /// Per-model totals over all environments.
    pub aggregate: Vec<Option<SummaryCell>>,
}

fn cell_of<'a>(rs: impl Iterator<Item = &'a TrialRecord>) -> Option<SummaryCell> {
    let rs: Vec<&TrialRecord> = rs.collect();
    if rs.is_empty() {
        return None;
    }
    let successes = rs.iter().filter(|r| r.success).count();
    let lens: Vec<f64> = rs.iter().filter_map(|r| r.episode_len.map(f64::from)).collect();
    Some(SummaryCell {
        trials: rs.len(),
        successes,
        success_rate: 100.0 * successes as f64 / rs.len() as f64,
        mean_episode_len: (!lens.is_empty()).then(|| lens.iter().sum::<f64>() / lens.len() as f64),
    })
}

/// Success rates by environment and model, plus per-model aggregates.
pub fn summarize_trials(records: &[TrialRecord]) -> Result<TrialSummary, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::NoRecords);
    }
    let models: Vec<String> = levels(records, |r| &r.model).into_iter().map(String::from).collect();
    let environments: Vec<String> = levels(records, |r| &r.environment).into_iter().map(String::from).collect();
    let cells = environments
        .iter()
        .map(|e| {
            models
                .iter()
                .map(|m| cell_of(records.iter().filter(|r| &r.environment == e && &r.model == m)))
                .collect()
        })
        .collect();
    let aggregate = models
        .iter()
        .map(|m| cell_of(records.iter().filter(|r| &r.model == m)))
        .collect();
    Ok(TrialSummary {
        models,
        environments,
        cells,
        aggregate,
    })
}

fn render_cell(c: &Option<SummaryCell>) -> String {
    match c {
        None => "n/a".to_string(),
        Some(c) => match c.mean_episode_len {
            Some(l) => format!("{:.1}% ({}/{}, len {:.1})", c.success_rate, c.successes, c.trials, l),
            None => format!("{:.1}% ({}/{})", c.success_rate, c.successes, c.trials),
        },
    }
}

/// Aligned text table: one row per environment and an `Aggregate` row, one
/// column per model. Missing combinations print as `n/a`.
pub fn render_summary(s: &TrialSummary) -> String {
    let mut rows: Vec<Vec<String>> = vec![std::iter::once("Environment".to_string()).chain(s.models.iter().cloned()).collect()];
    for (e, env) in s.environments.iter().enumerate() {
        rows.push(std::iter::once(env.clone()).chain(s.cells[e].iter().map(render_cell)).collect());
    }
    rows.push(std::iter::once("Aggregate".to_string()).chain(s.aggregate.iter().map(render_cell)).collect());
    let ncol = rows[0].len();
    let widths: Vec<usize> = (0..ncol)
        .map(|k| rows.iter().map(|r| r[k].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let mut line = String::new();
        for k in 0..ncol {
            let pad = widths[k] - r[k].chars().count();
            if k == 0 {
                line.push_str(&r[k]);
                line.push_str(&" ".repeat(pad));
            } else {
                line.push_str("  ");
                line.push_str(&" ".repeat(pad));
                line.push_str(&r[k]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
        if i == 0 || i == rows.len() - 2 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (ncol - 1)));
            out.push('\n');
        }
    }
    out
}
