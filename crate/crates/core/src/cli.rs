//! Experiment runner: configuration file, CSV/JSON writers and the
//! `evaluate`, `selectivity`, `theorem`, `mp` and `mp-search` commands.
//!
//! Exit codes: 0 success, 1 multiplicity condition fails, 2 input error,
//! 3 numerical error.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::json;

use crate::error::{param, Error, Result};
use crate::evaluate::{
    collect_evidence, compare_evidence, estimate_kind, estimate_selectivity, pdet_curve,
    ComparisonVerdict, EvalReport, McConfig, Outcome, RuleEvidence, SelectivityReport,
};
use crate::model::{check_q, InterferenceModel, StressKind};
use crate::preorder::{
    build_empirical, mp_search, mp_verify, truncated_family_mp_diagnostic, DiagnosticVerdict,
    FinitePreorder, MpCondition, MpResult, TruncationDiagnostic,
};
use crate::rules::{np_build, oracle_build, rdt_build, DecisionRule, Family};

pub const OUTPUT_DIR_ENV: &str = "MPDETECT_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "results";

pub const CSV_HEADER: &str =
    "rule_id,family,n,gamma,tau,q,interference,epsilon,trials,positives,p_hat,ci_lo,ci_hi,seed";

fn default_conf() -> f64 {
    0.99
}

fn default_slack() -> f64 {
    0.005
}

fn default_families() -> Vec<Family> {
    vec![Family::Np, Family::Rdt]
}

fn default_suite() -> Vec<StressKind> {
    StressKind::default_suite()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub gamma: f64,
    pub tau: f64,
    pub n_list: Vec<usize>,
    pub q_grid: Vec<f64>,
    #[serde(default = "default_suite")]
    pub stress_suite: Vec<StressKind>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_conf")]
    pub conf: f64,
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default = "default_families")]
    pub families: Vec<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.05,
            tau: 0.2,
            n_list: vec![4, 16, 64],
            q_grid: vec![0.0, 0.1, 0.2, 0.3],
            stress_suite: default_suite(),
            trials: 100_000,
            seed: 20_190_601,
            conf: default_conf(),
            slack: default_slack(),
            families: default_families(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("malformed config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn mc(&self) -> McConfig {
        McConfig {
            trials: self.trials,
            seed: self.seed,
            conf: self.conf,
            slack: self.slack,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return param(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.tau >= 0.0 && self.tau < 1.0) {
            return param(format!("tau must lie in [0, 1), got {}", self.tau));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return param("n_list must be a nonempty list of positive integers");
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return param("n_list must be strictly increasing");
        }
        if self.q_grid.is_empty() {
            return param("q_grid must not be empty");
        }
        for &q in &self.q_grid {
            check_q(q)?;
        }
        if self.q_grid.windows(2).any(|w| w[0] >= w[1]) {
            return param("q_grid must be strictly ascending");
        }
        // Grid points above tau are kept: they probe where the size guarantee ends.
        if let Some(&q) = self.q_grid.iter().find(|&&q| self.tau >= 1.0 - q) {
            return param(format!(
                "tau must satisfy tau < 1 - q, got tau = {} at q = {q}",
                self.tau
            ));
        }
        if !self.stress_suite.contains(&StressKind::ConstantPlus) {
            return param("stress_suite must include constant_plus");
        }
        for kind in &self.stress_suite {
            kind.at(0.0)?;
        }
        if self.families.is_empty() {
            return param("families must not be empty");
        }
        self.mc().validate()
    }

    /// Rules of one family at this configuration's level.
    pub fn rules(&self, family: Family, tau: f64) -> Result<Vec<DecisionRule>> {
        match family {
            Family::Np => self
                .n_list
                .iter()
                .map(|&n| np_build(n, self.gamma))
                .collect(),
            Family::Rdt => self
                .n_list
                .iter()
                .map(|&n| rdt_build(n, self.gamma, tau))
                .collect(),
            Family::Oracle => Ok(vec![oracle_build(self.gamma)?]),
            Family::AlwaysZero => Ok(vec![DecisionRule::AlwaysZero]),
            Family::AlwaysOne => Ok(vec![DecisionRule::AlwaysOne]),
        }
    }
}

/// `%.12g`-style rendering: 12 significant digits, trailing zeros trimmed.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let mantissa = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt_real(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn csv_row(r: &EvalReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.rule_id,
        r.family,
        r.n.map(|n| n.to_string()).unwrap_or_default(),
        opt_real(r.gamma),
        opt_real(r.tau),
        fmt_real(r.q),
        r.interference_id,
        r.epsilon,
        r.trials,
        r.positives,
        fmt_real(r.p_hat),
        fmt_real(r.ci_lo),
        fmt_real(r.ci_hi),
        r.seed
    )
}

fn row_order(a: &EvalReport, b: &EvalReport) -> Ordering {
    a.rule_id
        .cmp(&b.rule_id)
        .then(a.q.total_cmp(&b.q))
        .then(a.interference_id.cmp(&b.interference_id))
        .then(a.epsilon.cmp(&b.epsilon))
}

pub fn to_csv(reports: &[EvalReport]) -> String {
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by(|a, b| row_order(a, b));
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

/// One row per (rule, q, interference, epsilon) over the selected families.
pub fn run_evaluate(
    config: &ExperimentConfig,
    families: &[Family],
    tau: f64,
) -> Result<Vec<EvalReport>> {
    config.validate()?;
    let mc = config.mc();
    let mut reports = Vec::new();
    for &family in families {
        for rule in config.rules(family, tau)? {
            for &q in &config.q_grid {
                for kind in &config.stress_suite {
                    for epsilon in [0u8, 1] {
                        reports.push(estimate_kind(&rule, epsilon, kind, q, &mc)?);
                    }
                }
            }
        }
    }
    Ok(reports)
}

pub fn evaluate_csv(config: &ExperimentConfig, families: &[Family], tau: f64) -> Result<String> {
    Ok(to_csv(&run_evaluate(config, families, tau)?))
}

/// Selectivity of every rule in `families`, plus the always-zero control.
pub fn run_selectivity(
    config: &ExperimentConfig,
    families: &[Family],
    tau: f64,
) -> Result<Vec<SelectivityReport>> {
    config.validate()?;
    let mc = config.mc();
    let mut fams: Vec<Family> = families.to_vec();
    if !fams.contains(&Family::AlwaysZero) {
        fams.push(Family::AlwaysZero);
    }
    let mut out = Vec::new();
    for family in fams {
        for rule in config.rules(family, tau)? {
            out.push(estimate_selectivity(
                &rule,
                config.gamma,
                &config.q_grid,
                &config.stress_suite,
                &mc,
            )?);
        }
    }
    Ok(out)
}

pub fn selectivity_csv(reports: &[SelectivityReport]) -> String {
    let mut rows: Vec<(&EvalReport, &str)> = reports
        .iter()
        .flat_map(|s| {
            s.points
                .iter()
                .flat_map(|p| p.reports.iter().map(move |r| (r, p.verdict.as_str())))
        })
        .collect();
    rows.sort_by(|a, b| row_order(a.0, b.0));
    let mut out = format!("{CSV_HEADER},verdict\n");
    for (r, verdict) in rows {
        let _ = writeln!(out, "{},{verdict}", csv_row(r));
    }
    out
}

pub fn selectivity_summary(reports: &[SelectivityReport]) -> String {
    let mut out = String::new();
    for s in reports {
        let cells: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("q={}:{}", fmt_real(p.q), p.verdict.as_str()))
            .collect();
        let _ = writeln!(out, "{:<20} {}", s.rule_id, cells.join(" "));
    }
    out
}

/// `true`, `false` or the string `"undecided"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Claim {
    True,
    False,
    Undecided,
}

impl Serialize for Claim {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Claim::True => s.serialize_bool(true),
            Claim::False => s.serialize_bool(false),
            Claim::Undecided => s.serialize_str("undecided"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitStatus {
    Consistent,
    Inconsistent,
    Undecided,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremClaims {
    pub incomparable: Claim,
    pub strict_mp_on_truncation: bool,
    pub strict_mp_failing_condition: Option<MpCondition>,
    pub limit_diagnostic: LimitStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremReport {
    pub claims: TheoremClaims,
    pub selectivity: Vec<SelectivityReport>,
    pub comparisons: Vec<ComparisonVerdict>,
    pub elements: Vec<String>,
    pub empirical_preorder: String,
    pub undecided_pairs: Vec<(String, String)>,
    pub strict_mp: MpResult,
    pub diagnostic: TruncationDiagnostic,
    pub pdet_curve_np: Vec<EvalReport>,
    pub pdet_curve_rdt: Vec<EvalReport>,
    pub warnings: Vec<String>,
}

/// Full pipeline: evidence for both families, pairwise comparison, the
/// empirical preorder, the strict multiplicity check on the truncated
/// families and the limit diagnostic.
pub fn run_theorem(config: &ExperimentConfig) -> Result<TheoremReport> {
    config.validate()?;
    if !(config.families.contains(&Family::Np) && config.families.contains(&Family::Rdt)) {
        return param("theorem mode requires two families: np and rdt");
    }
    let mc = config.mc();
    let np = config.rules(Family::Np, config.tau)?;
    let rdt = config.rules(Family::Rdt, config.tau)?;
    let oracle = oracle_build(config.gamma)?;

    let mut rules: Vec<DecisionRule> = np.iter().chain(&rdt).copied().collect();
    rules.push(oracle);
    let evidence = rules
        .iter()
        .map(|r| collect_evidence(r, config.gamma, &config.q_grid, &config.stress_suite, &mc))
        .collect::<Result<Vec<RuleEvidence>>>()?;

    let mut comparisons = Vec::new();
    for i in 0..evidence.len() {
        for j in i + 1..evidence.len() {
            comparisons.push(compare_evidence(&evidence[i], &evidence[j])?);
        }
    }

    let elements: Vec<String> = rules.iter().map(|r| r.id()).collect();
    let oracle_id = oracle.id();
    let empirical = build_empirical(&elements, &comparisons, &oracle_id)?;

    let np_ids: Vec<String> = np.iter().map(|r| r.id()).collect();
    let rdt_ids: Vec<String> = rdt.iter().map(|r| r.id()).collect();
    let strict_mp = mp_verify(&empirical.preorder, &np_ids, &rdt_ids)?;

    let np_curve = pdet_curve(&np, 1, InterferenceModel::None, &mc)?;
    // Detection curve for RDT under the adverse shift -q at q = tau (capped to the grid).
    let q_adverse = config.tau.min(max_q(config));
    let adverse = InterferenceModel::Constant {
        c: -q_adverse,
        q: q_adverse,
    };
    let rdt_curve = pdet_curve(&rdt, 1, adverse, &mc)?;
    let diagnostic = truncated_family_mp_diagnostic(
        &empirical.preorder,
        &np_ids,
        &rdt_ids,
        &[oracle_id.as_str()],
        &np_curve,
        &rdt_curve,
    )?;

    let cross: Vec<&ComparisonVerdict> = comparisons
        .iter()
        .filter(|c| {
            (np_ids.contains(&c.left) && rdt_ids.contains(&c.right))
                || (rdt_ids.contains(&c.left) && np_ids.contains(&c.right))
        })
        .collect();
    let incomparable = if cross.iter().all(|c| c.outcome == Outcome::Incomparable) {
        Claim::True
    } else if cross
        .iter()
        .any(|c| c.outcome != Outcome::Undecided && c.outcome != Outcome::Incomparable)
    {
        Claim::False
    } else {
        Claim::Undecided
    };

    let limit_diagnostic = match diagnostic.verdict {
        DiagnosticVerdict::ConsistentWithMpInTheLimit => LimitStatus::Consistent,
        DiagnosticVerdict::Inconsistent if !empirical.undecided.is_empty() => {
            LimitStatus::Undecided
        }
        DiagnosticVerdict::Inconsistent if !(diagnostic.growth_a && diagnostic.growth_b) => {
            LimitStatus::Undecided
        }
        DiagnosticVerdict::Inconsistent => LimitStatus::Inconsistent,
    };

    let mut warnings = Vec::new();
    if !empirical.undecided.is_empty() {
        warnings.push(format!(
            "{} comparisons stayed undecided; increase trials to separate the intervals",
            empirical.undecided.len()
        ));
    }
    if !(diagnostic.growth_a && diagnostic.growth_b) {
        warnings.push("detection curves are not CI-separated along n".to_string());
    }

    Ok(TheoremReport {
        claims: TheoremClaims {
            incomparable,
            strict_mp_on_truncation: strict_mp.holds,
            strict_mp_failing_condition: strict_mp.failing_condition,
            limit_diagnostic,
        },
        selectivity: evidence
            .iter()
            .filter_map(|e| e.selectivity.clone())
            .collect(),
        comparisons,
        elements,
        empirical_preorder: empirical.preorder.to_edge_list(),
        undecided_pairs: empirical.undecided,
        strict_mp,
        diagnostic,
        pdet_curve_np: np_curve,
        pdet_curve_rdt: rdt_curve,
        warnings,
    })
}

fn max_q(config: &ExperimentConfig) -> f64 {
    config.q_grid.iter().copied().fold(0.0, f64::max)
}

pub fn theorem_json(config: &ExperimentConfig, report: &TheoremReport) -> Result<String> {
    let value = json!({
        "claims": report.claims,
        "reports": {
            "selectivity": report.selectivity,
            "comparisons": report.comparisons,
            "elements": report.elements,
            "empirical_preorder": report.empirical_preorder,
            "undecided_pairs": report.undecided_pairs,
            "strict_mp": report.strict_mp,
            "diagnostic": report.diagnostic,
            "pdet_curve_np": report.pdet_curve_np,
            "pdet_curve_rdt": report.pdet_curve_rdt,
            "warnings": report.warnings,
        },
        "config_echo": config,
        "seed": config.seed,
    });
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn split_ids(list: &str) -> Vec<String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn mp_text(result: &MpResult) -> String {
    let mut out = String::new();
    if result.holds {
        let _ = writeln!(out, "holds");
    } else {
        let _ = writeln!(out, "fails");
    }
    let _ = writeln!(
        out,
        "upper_bounds(A) = {{{}}}",
        result.upper_bounds_a.join(", ")
    );
    let _ = writeln!(
        out,
        "upper_bounds(B) = {{{}}}",
        result.upper_bounds_b.join(", ")
    );
    let _ = writeln!(
        out,
        "witness a = {}",
        result.cond_a_witness.as_deref().unwrap_or("-")
    );
    let _ = writeln!(
        out,
        "witness b = {}",
        result.cond_b_witness.as_deref().unwrap_or("-")
    );
    if let (Some(cond), Some(detail)) = (&result.failing_condition, &result.failing_detail) {
        let _ = writeln!(out, "failing condition: {cond}: {detail}");
    }
    out
}

#[derive(Debug, Parser)]
#[command(
    name = "mpdetect",
    version,
    about = "NP and RDT detection experiments and multiplicity checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment configuration (JSON). Defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; falls back to the config, then $MPDETECT_OUTPUT_DIR, then ./results.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo false alarm and detection rates as CSV.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Rule families to evaluate (repeatable).
        #[arg(long, value_enum, num_args = 1.., default_values = ["np", "rdt"])]
        family: Vec<FamilyArg>,
        /// Overrides the configuration tolerance for RDT rules.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Empirical selectivity verdicts per rule and interference bound.
    Selectivity {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, num_args = 1.., default_values = ["np", "rdt"])]
        family: Vec<FamilyArg>,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Incomparability, strict multiplicity on the truncation and the limit diagnostic, as JSON.
    Theorem {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Checks the multiplicity condition for subsets A and B of a preorder file.
    Mp {
        /// Edge-list preorder file.
        #[arg(long)]
        preorder: PathBuf,
        /// Comma-separated identifiers of A.
        #[arg(long = "a")]
        set_a: String,
        /// Comma-separated identifiers of B.
        #[arg(long = "b")]
        set_b: String,
    },
    /// Lists all subset pairs satisfying the multiplicity condition.
    MpSearch {
        #[arg(long)]
        preorder: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_size: usize,
    },
    /// Prints the default configuration.
    DefaultConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FamilyArg {
    Np,
    Rdt,
    Oracle,
    AlwaysZero,
    AlwaysOne,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Np => Family::Np,
            FamilyArg::Rdt => Family::Rdt,
            FamilyArg::Oracle => Family::Oracle,
            FamilyArg::AlwaysZero => Family::AlwaysZero,
            FamilyArg::AlwaysOne => Family::AlwaysOne,
        }
    }
}

fn load_config(run: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = match &run.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = run.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn output_dir(run: &RunArgs, config: &ExperimentConfig) -> PathBuf {
    run.output_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Evaluate { run, family, tau } => {
            let config = load_config(&run)?;
            let families: Vec<Family> = family.into_iter().map(Family::from).collect();
            let csv = evaluate_csv(&config, &families, tau.unwrap_or(config.tau))?;
            let path = write_output(&output_dir(&run, &config), "evaluate.csv", &csv)?;
            println!(
                "wrote {} rows to {}",
                csv.lines().count() - 1,
                path.display()
            );
            Ok(0)
        }
        Command::Selectivity { run, family, tau } => {
            let config = load_config(&run)?;
            let families: Vec<Family> = family.into_iter().map(Family::from).collect();
            let reports = run_selectivity(&config, &families, tau.unwrap_or(config.tau))?;
            let path = write_output(
                &output_dir(&run, &config),
                "selectivity.csv",
                &selectivity_csv(&reports),
            )?;
            print!("{}", selectivity_summary(&reports));
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::Theorem { run } => {
            let config = load_config(&run)?;
            let report = run_theorem(&config)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let path = write_output(
                &output_dir(&run, &config),
                "theorem.json",
                &theorem_json(&config, &report)?,
            )?;
            println!("{}", serde_json::to_string_pretty(&report.claims)?);
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::Mp {
            preorder,
            set_a,
            set_b,
        } => {
            let text = fs::read_to_string(&preorder)
                .map_err(|e| Error::Parse(format!("cannot read {}: {e}", preorder.display())))?;
            let p = FinitePreorder::parse_edge_list(&text)?;
            let (a, b) = (split_ids(&set_a), split_ids(&set_b));
            if let Some(shared) = a.iter().find(|x| b.contains(x)) {
                return param(format!("A and B must be disjoint; both contain {shared}"));
            }
            let result = mp_verify(&p, &a, &b)?;
            print!("{}", mp_text(&result));
            Ok(if result.holds { 0 } else { 1 })
        }
        Command::MpSearch { preorder, max_size } => {
            let text = fs::read_to_string(&preorder)
                .map_err(|e| Error::Parse(format!("cannot read {}: {e}", preorder.display())))?;
            let p = FinitePreorder::parse_edge_list(&text)?;
            let found = mp_search(&p, max_size)?;
            for (a, b) in &found {
                println!("A={{{}}} B={{{}}}", a.join(","), b.join(","));
            }
            Ok(if found.is_empty() { 1 } else { 0 })
        }
        Command::DefaultConfig => {
            println!("{}", ExperimentConfig::default().to_json());
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting() {
        assert_eq!(fmt_real(0.0), "0");
        assert_eq!(fmt_real(0.05), "0.05");
        assert_eq!(fmt_real(1.0), "1");
        assert_eq!(fmt_real(0.1 + 0.2), "0.3");
        assert_eq!(fmt_real(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_real(-2.5), "-2.5");
        assert_eq!(fmt_real(6.6e-5), "6.6e-05");
        assert_eq!(fmt_real(123456789012345.0), "1.23456789012e+14");
        assert_eq!(fmt_real(0.99959541), "0.99959541");
    }

    #[test]
    fn config_round_trip() {
        let config = ExperimentConfig::default();
        let back = ExperimentConfig::from_json(&config.to_json()).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn config_rejects_bad_values() {
        let c = ExperimentConfig {
            q_grid: vec![0.0, 0.5],
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            tau: 0.75,
            q_grid: vec![0.0, 0.3],
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            n_list: vec![],
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            stress_suite: vec![StressKind::Uniform],
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(matches!(
            ExperimentConfig::from_json("{\"gamma\": 0.05}"),
            Err(Error::Parse(_))
        ));
        assert!(ExperimentConfig::from_json("not json").is_err());
    }

    #[test]
    fn theorem_needs_both_families() {
        let config = ExperimentConfig {
            families: vec![Family::Np],
            ..ExperimentConfig::default()
        };
        assert!(matches!(run_theorem(&config), Err(Error::Parameter(_))));
    }

    #[test]
    fn csv_layout() {
        let config = ExperimentConfig {
            n_list: vec![4],
            q_grid: vec![0.0, 0.1],
            trials: 200,
            ..ExperimentConfig::default()
        };
        let csv = evaluate_csv(&config, &[Family::Np, Family::AlwaysZero], 0.2).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let rows: Vec<&str> = lines.collect();
        // 2 rules x 2 q x 5 laws x 2 epsilons
        assert_eq!(rows.len(), 40);
        assert!(rows.iter().all(|r| r.split(',').count() == 14));
        assert!(rows[0].starts_with("always_zero,always_zero,,,,0,"));
    }
}
