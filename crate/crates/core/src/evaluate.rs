//! Monte Carlo estimation of false alarm and detection rates, empirical
//! selectivity over a grid of interference bounds, and pairwise comparison of
//! tests under the selectivity/detection preorder.
//!
//! Every estimate made with the same seed uses the same noise realizations
//! (common random numbers), so estimates at different cells of a grid are
//! positively coupled and differences between them are less noisy.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Result};
use crate::model::{
    check_q, fill_row, substream, InterferenceModel, SignalScenario, StreamTag, StressKind,
};
use crate::numerics::gaussian_quantile;
use crate::rules::{reject_prob_closed, DecisionRule, Family};

/// Monte Carlo settings shared by all estimates of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    /// Confidence level of the Wilson intervals.
    pub conf: f64,
    /// Tolerance above gamma still counted as a size-respecting estimate.
    pub slack: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: 0,
            conf: 0.99,
            slack: 0.005,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return param("trials must be at least 1");
        }
        if !(self.conf > 0.0 && self.conf < 1.0) {
            return param(format!(
                "confidence level must lie in (0, 1), got {}",
                self.conf
            ));
        }
        if !(self.slack >= 0.0 && self.slack.is_finite()) {
            return param(format!("slack must be nonnegative, got {}", self.slack));
        }
        Ok(())
    }
}

/// Wilson score interval for `positives` successes out of `trials`.
pub fn wilson_interval(positives: u64, trials: u64, conf: f64) -> Result<(f64, f64)> {
    if trials == 0 || positives > trials {
        return param(format!("invalid binomial counts {positives}/{trials}"));
    }
    let z = gaussian_quantile(1.0 - 0.5 * (1.0 - conf))?;
    let n = trials as f64;
    let p = positives as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = (center - half).clamp(0.0, 1.0).min(p);
    let hi = (center + half).clamp(0.0, 1.0).max(p);
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rule_id: String,
    pub family: Family,
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub tau: Option<f64>,
    pub interference_id: String,
    pub q: f64,
    pub epsilon: u8,
    pub trials: usize,
    pub positives: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed: u64,
}

/// Fraction of `trials` scenario draws on which `rule` decides 1.
pub fn estimate(
    rule: &DecisionRule,
    scenario: &SignalScenario,
    trials: usize,
    seed: u64,
    conf: f64,
) -> Result<EvalReport> {
    scenario.validate()?;
    if trials == 0 {
        return param("trials must be at least 1");
    }
    if !(conf > 0.0 && conf < 1.0) {
        return param(format!("confidence level must lie in (0, 1), got {conf}"));
    }
    if let Some(n) = rule.n() {
        if n != scenario.n {
            return param(format!(
                "rule {} expects {n} samples but the scenario has {}",
                rule.id(),
                scenario.n
            ));
        }
    }

    let reads_data = rule.n().is_some();
    let positives: u64 = (0..trials as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; scenario.n],
            |row, t| {
                if reads_data {
                    fill_row(scenario, seed, t, row);
                }
                let aux: f64 = substream(seed, t, StreamTag::Aux).random();
                let decision = rule
                    .decide(row, scenario.epsilon, aux)
                    .expect("row length checked above");
                u64::from(decision.value())
            },
        )
        .sum();

    let (ci_lo, ci_hi) = wilson_interval(positives, trials as u64, conf)?;
    Ok(EvalReport {
        rule_id: rule.id(),
        family: rule.family(),
        n: rule.n(),
        gamma: rule.gamma(),
        tau: rule.tau(),
        interference_id: scenario.interference.label(),
        q: scenario.interference.q(),
        epsilon: scenario.epsilon,
        trials,
        positives,
        p_hat: positives as f64 / trials as f64,
        ci_lo,
        ci_hi,
        seed,
    })
}

/// Estimate under the stress law `kind` at bound `q`, labelled by the kind.
pub fn estimate_kind(
    rule: &DecisionRule,
    epsilon: u8,
    kind: &StressKind,
    q: f64,
    mc: &McConfig,
) -> Result<EvalReport> {
    let scenario = SignalScenario::new(rule.n().unwrap_or(1), epsilon, kind.at(q)?)?;
    let mut report = estimate(rule, &scenario, mc.trials, mc.seed, mc.conf)?;
    report.interference_id = kind.label();
    report.q = q;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    In,
    Out,
    Undecided,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::In => "IN",
            Verdict::Out => "OUT",
            Verdict::Undecided => "UNDECIDED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectivityPoint {
    pub q: f64,
    pub verdict: Verdict,
    /// Exact false alarm rate under Constant(+q), where a closed form exists.
    pub worst_case_pfa_closed: Option<f64>,
    pub reports: Vec<EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectivityReport {
    pub rule_id: String,
    pub gamma: f64,
    pub slack: f64,
    pub points: Vec<SelectivityPoint>,
}

impl SelectivityReport {
    pub fn q_grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.q).collect()
    }

    pub fn verdicts(&self) -> Vec<Verdict> {
        self.points.iter().map(|p| p.verdict).collect()
    }
}

/// Three-valued membership of `q` in the selectivity set, from the false
/// alarm estimates of every stress law at that bound. `In` takes precedence:
/// every upper bound within `gamma + slack` is read as size respected.
pub fn selectivity_verdict(reports: &[EvalReport], gamma: f64, slack: f64) -> Verdict {
    if reports.iter().all(|r| r.ci_hi <= gamma + slack) {
        Verdict::In
    } else if reports.iter().any(|r| r.ci_lo > gamma) {
        Verdict::Out
    } else {
        Verdict::Undecided
    }
}

fn check_grid(q_grid: &[f64]) -> Result<()> {
    if q_grid.is_empty() {
        return param("q grid must not be empty");
    }
    for &q in q_grid {
        check_q(q)?;
    }
    if q_grid.windows(2).any(|w| w[0] >= w[1]) {
        return param("q grid must be strictly ascending");
    }
    Ok(())
}

fn check_suite(suite: &[StressKind]) -> Result<()> {
    if suite.is_empty() {
        return param("stress suite must not be empty");
    }
    if !suite.contains(&StressKind::ConstantPlus) {
        return param("stress suite must contain the worst case constant_plus");
    }
    Ok(())
}

fn check_rule_gamma(rule: &DecisionRule, gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return param(format!("gamma must lie in (0, 1), got {gamma}"));
    }
    match rule.gamma() {
        Some(g) if g != gamma => param(format!(
            "rule {} has level {g}, expected {gamma}",
            rule.id()
        )),
        _ => Ok(()),
    }
}

/// Empirical selectivity of `rule` on `q_grid`.
pub fn estimate_selectivity(
    rule: &DecisionRule,
    gamma: f64,
    q_grid: &[f64],
    stress_suite: &[StressKind],
    mc: &McConfig,
) -> Result<SelectivityReport> {
    mc.validate()?;
    check_rule_gamma(rule, gamma)?;
    check_grid(q_grid)?;
    check_suite(stress_suite)?;

    let mut points = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        let reports = stress_suite
            .iter()
            .map(|kind| estimate_kind(rule, 0, kind, q, mc))
            .collect::<Result<Vec<_>>>()?;
        points.push(SelectivityPoint {
            q,
            verdict: selectivity_verdict(&reports, gamma, mc.slack),
            worst_case_pfa_closed: reject_prob_closed(rule, q, 0),
            reports,
        });
    }
    Ok(SelectivityReport {
        rule_id: rule.id(),
        gamma,
        slack: mc.slack,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    LeftBelow,
    RightBelow,
    Equivalent,
    Incomparable,
    Undecided,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::LeftBelow => "LEFT_BELOW",
            Outcome::RightBelow => "RIGHT_BELOW",
            Outcome::Equivalent => "EQUIVALENT",
            Outcome::Incomparable => "INCOMPARABLE",
            Outcome::Undecided => "UNDECIDED",
        }
    }
}

/// Ordering of two detection estimates at one (q, interference) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellOrder {
    Below,
    Above,
    Overlap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdetCell {
    pub q: f64,
    pub interference_id: String,
    pub left: EvalReport,
    pub right: EvalReport,
    pub order: CellOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonVerdict {
    pub left: String,
    pub right: String,
    pub outcome: Outcome,
    pub left_selectivity: Vec<Verdict>,
    pub right_selectivity: Vec<Verdict>,
    pub pdet_cells: Vec<PdetCell>,
    pub note: String,
}

/// Everything [`compare_evidence`] needs about one rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleEvidence {
    pub rule_id: String,
    pub is_oracle: bool,
    pub selectivity: Option<SelectivityReport>,
    /// Detection estimates at every grid point judged `In`, one per stress law.
    pub pdet: Vec<EvalReport>,
}

/// Selectivity plus detection estimates on the selectivity set. Oracles need
/// no evidence: they sit above every test by definition.
pub fn collect_evidence(
    rule: &DecisionRule,
    gamma: f64,
    q_grid: &[f64],
    stress_suite: &[StressKind],
    mc: &McConfig,
) -> Result<RuleEvidence> {
    check_rule_gamma(rule, gamma)?;
    if rule.is_oracle() {
        return Ok(RuleEvidence {
            rule_id: rule.id(),
            is_oracle: true,
            selectivity: None,
            pdet: Vec::new(),
        });
    }
    let selectivity = estimate_selectivity(rule, gamma, q_grid, stress_suite, mc)?;
    let mut pdet = Vec::new();
    for point in selectivity
        .points
        .iter()
        .filter(|p| p.verdict == Verdict::In)
    {
        for kind in stress_suite {
            pdet.push(estimate_kind(rule, 1, kind, point.q, mc)?);
        }
    }
    Ok(RuleEvidence {
        rule_id: rule.id(),
        is_oracle: false,
        selectivity: Some(selectivity),
        pdet,
    })
}

fn cell_order(left: &EvalReport, right: &EvalReport) -> CellOrder {
    if left.ci_hi < right.ci_lo {
        CellOrder::Below
    } else if left.ci_lo > right.ci_hi {
        CellOrder::Above
    } else {
        CellOrder::Overlap
    }
}

/// Decides `left ⊲ right`, `right ⊲ left`, both, or neither from collected
/// evidence.
pub fn compare_evidence(left: &RuleEvidence, right: &RuleEvidence) -> Result<ComparisonVerdict> {
    let mut verdict = ComparisonVerdict {
        left: left.rule_id.clone(),
        right: right.rule_id.clone(),
        outcome: Outcome::Undecided,
        left_selectivity: Vec::new(),
        right_selectivity: Vec::new(),
        pdet_cells: Vec::new(),
        note: String::new(),
    };
    match (left.is_oracle, right.is_oracle) {
        (true, true) => {
            verdict.outcome = Outcome::Equivalent;
            verdict.note = "both oracles".into();
            return Ok(verdict);
        }
        (false, true) => {
            verdict.outcome = Outcome::LeftBelow;
            verdict.note = "every test lies below the oracle".into();
            return Ok(verdict);
        }
        (true, false) => {
            verdict.outcome = Outcome::RightBelow;
            verdict.note = "every test lies below the oracle".into();
            return Ok(verdict);
        }
        (false, false) => {}
    }

    let (Some(ls), Some(rs)) = (&left.selectivity, &right.selectivity) else {
        return param("non-oracle evidence must carry a selectivity report");
    };
    if ls.q_grid() != rs.q_grid() {
        return param("selectivity reports were computed on different grids");
    }
    if ls.gamma != rs.gamma {
        return param(format!("level mismatch: {} vs {}", ls.gamma, rs.gamma));
    }
    verdict.left_selectivity = ls.verdicts();
    verdict.right_selectivity = rs.verdicts();

    let conflicts: Vec<f64> = ls
        .points
        .iter()
        .zip(&rs.points)
        .filter(|(a, b)| {
            matches!(
                (a.verdict, b.verdict),
                (Verdict::In, Verdict::Out) | (Verdict::Out, Verdict::In)
            )
        })
        .map(|(a, _)| a.q)
        .collect();
    if !conflicts.is_empty() {
        verdict.outcome = Outcome::Incomparable;
        verdict.note = format!("selectivity differs at q = {conflicts:?}");
        return Ok(verdict);
    }
    let unresolved: Vec<f64> = ls
        .points
        .iter()
        .zip(&rs.points)
        .filter(|(a, b)| a.verdict == Verdict::Undecided || b.verdict == Verdict::Undecided)
        .map(|(a, _)| a.q)
        .collect();
    if !unresolved.is_empty() {
        verdict.outcome = Outcome::Undecided;
        verdict.note = format!("selectivity undecided at q = {unresolved:?}");
        return Ok(verdict);
    }

    for l in &left.pdet {
        let Some(r) = right
            .pdet
            .iter()
            .find(|r| r.q == l.q && r.interference_id == l.interference_id)
        else {
            return param(format!(
                "missing detection estimate for {} at q = {} ({})",
                right.rule_id, l.q, l.interference_id
            ));
        };
        verdict.pdet_cells.push(PdetCell {
            q: l.q,
            interference_id: l.interference_id.clone(),
            left: l.clone(),
            right: r.clone(),
            order: cell_order(l, r),
        });
    }
    let below = verdict
        .pdet_cells
        .iter()
        .any(|c| c.order == CellOrder::Below);
    let above = verdict
        .pdet_cells
        .iter()
        .any(|c| c.order == CellOrder::Above);
    (verdict.outcome, verdict.note) = match (below, above) {
        (true, true) => (
            Outcome::Incomparable,
            "detection rates cross on the selectivity set".into(),
        ),
        (true, false) => (
            Outcome::LeftBelow,
            "equal selectivity, lower detection".into(),
        ),
        (false, true) => (
            Outcome::RightBelow,
            "equal selectivity, higher detection".into(),
        ),
        (false, false) => (
            Outcome::Equivalent,
            "equal selectivity, overlapping detection".into(),
        ),
    };
    Ok(verdict)
}

/// Compares two rules sharing the level `gamma`.
pub fn compare(
    rule_f: &DecisionRule,
    rule_g: &DecisionRule,
    gamma: f64,
    q_grid: &[f64],
    stress_suite: &[StressKind],
    mc: &McConfig,
) -> Result<ComparisonVerdict> {
    let left = collect_evidence(rule_f, gamma, q_grid, stress_suite, mc)?;
    let right = collect_evidence(rule_g, gamma, q_grid, stress_suite, mc)?;
    compare_evidence(&left, &right)
}

/// Detection (or false alarm) estimates along a family ordered by `n`.
pub fn pdet_curve(
    family: &[DecisionRule],
    epsilon: u8,
    interference: InterferenceModel,
    mc: &McConfig,
) -> Result<Vec<EvalReport>> {
    mc.validate()?;
    if family.is_empty() {
        return param("rule family must not be empty");
    }
    let sizes: Vec<usize> = family.iter().filter_map(|r| r.n()).collect();
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return param("rule family must be ordered by increasing n");
    }
    family
        .iter()
        .map(|rule| {
            let scenario = SignalScenario::new(rule.n().unwrap_or(1), epsilon, interference)?;
            estimate(rule, &scenario, mc.trials, mc.seed, mc.conf)
        })
        .collect()
}

/// True when each estimate's interval lies strictly above the previous one.
pub fn strictly_increasing(reports: &[EvalReport]) -> bool {
    reports.windows(2).all(|w| w[0].ci_hi < w[1].ci_lo)
}
