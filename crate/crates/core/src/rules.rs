//! Decision rules and their closed-form operating characteristics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::numerics::{
    gaussian_quantile, marcum_q_half_unchecked, phi_upper, rdt_threshold, ToleranceConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Np,
    Rdt,
    Oracle,
    AlwaysZero,
    AlwaysOne,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Np => "np",
            Family::Rdt => "rdt",
            Family::Oracle => "oracle",
            Family::AlwaysZero => "always_zero",
            Family::AlwaysOne => "always_one",
        };
        f.write_str(s)
    }
}

/// A test `f: R^n -> {0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionRule {
    /// Rejects when `sum(y) > threshold_eta`.
    Np {
        n: usize,
        gamma: f64,
        threshold_eta: f64,
    },
    /// Rejects when `|sqrt(n) * mean(y)| > threshold_lambda`.
    Rdt {
        n: usize,
        gamma: f64,
        tau: f64,
        threshold_lambda: f64,
    },
    /// Ideal device that returns the true signal bit.
    Oracle {
        gamma: f64,
    },
    AlwaysZero,
    AlwaysOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decision(u8);

impl Decision {
    pub const ZERO: Decision = Decision(0);
    pub const ONE: Decision = Decision(1);

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_one(self) -> bool {
        self.0 == 1
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return param(format!("gamma must lie in (0, 1), got {gamma}"));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return param("sample count n must be at least 1");
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..1.0).contains(&tau) {
        return param(format!("tolerance tau must lie in [0, 1), got {tau}"));
    }
    Ok(())
}

/// Neyman-Pearson test for a unit mean shift at size `gamma`.
pub fn np_build(n: usize, gamma: f64) -> Result<DecisionRule> {
    check_n(n)?;
    check_gamma(gamma)?;
    let threshold_eta = (n as f64).sqrt() * gaussian_quantile(1.0 - gamma)?;
    Ok(DecisionRule::Np {
        n,
        gamma,
        threshold_eta,
    })
}

/// RDT test with distortion tolerance `tau` at size `gamma`.
pub fn rdt_build(n: usize, gamma: f64, tau: f64) -> Result<DecisionRule> {
    rdt_build_with(n, gamma, tau, &ToleranceConfig::default())
}

pub fn rdt_build_with(
    n: usize,
    gamma: f64,
    tau: f64,
    cfg: &ToleranceConfig,
) -> Result<DecisionRule> {
    check_n(n)?;
    check_gamma(gamma)?;
    check_tau(tau)?;
    let threshold_lambda = rdt_threshold((n as f64).sqrt() * tau, gamma, cfg)?;
    Ok(DecisionRule::Rdt {
        n,
        gamma,
        tau,
        threshold_lambda,
    })
}

pub fn oracle_build(gamma: f64) -> Result<DecisionRule> {
    check_gamma(gamma)?;
    Ok(DecisionRule::Oracle { gamma })
}

impl DecisionRule {
    pub fn family(&self) -> Family {
        match self {
            DecisionRule::Np { .. } => Family::Np,
            DecisionRule::Rdt { .. } => Family::Rdt,
            DecisionRule::Oracle { .. } => Family::Oracle,
            DecisionRule::AlwaysZero => Family::AlwaysZero,
            DecisionRule::AlwaysOne => Family::AlwaysOne,
        }
    }

    /// Sample count the rule expects, if it reads the observations at all.
    pub fn n(&self) -> Option<usize> {
        match *self {
            DecisionRule::Np { n, .. } | DecisionRule::Rdt { n, .. } => Some(n),
            _ => None,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            DecisionRule::Np { gamma, .. }
            | DecisionRule::Rdt { gamma, .. }
            | DecisionRule::Oracle { gamma } => Some(gamma),
            _ => None,
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match *self {
            DecisionRule::Rdt { tau, .. } => Some(tau),
            _ => None,
        }
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self, DecisionRule::Oracle { .. })
    }

    /// Stable identifier, e.g. `np_n16` or `rdt_n64_tau0.2`.
    pub fn id(&self) -> String {
        match *self {
            DecisionRule::Np { n, .. } => format!("np_n{n}"),
            DecisionRule::Rdt { n, tau, .. } => format!("rdt_n{n}_tau{tau}"),
            DecisionRule::Oracle { .. } => "oracle".to_string(),
            DecisionRule::AlwaysZero => "always_zero".to_string(),
            DecisionRule::AlwaysOne => "always_one".to_string(),
        }
    }

    /// Applies the rule to one observation vector. `aux_uniform` is the
    /// per-trial auxiliary draw available to randomized rules; none of the
    /// current variants consume it. Ties at the threshold decide 0.
    pub fn decide(&self, row: &[f64], epsilon_true: u8, aux_uniform: f64) -> Result<Decision> {
        let _ = aux_uniform;
        if let Some(n) = self.n() {
            if row.len() != n {
                return param(format!(
                    "rule {} expects {n} samples, got {}",
                    self.id(),
                    row.len()
                ));
            }
        }
        Ok(self.decide_unchecked(row, epsilon_true))
    }

    pub(crate) fn decide_unchecked(&self, row: &[f64], epsilon_true: u8) -> Decision {
        let fire = match *self {
            DecisionRule::Np { threshold_eta, .. } => row.iter().sum::<f64>() > threshold_eta,
            DecisionRule::Rdt {
                n,
                threshold_lambda,
                ..
            } => (row.iter().sum::<f64>() / (n as f64).sqrt()).abs() > threshold_lambda,
            DecisionRule::Oracle { .. } => epsilon_true == 1,
            DecisionRule::AlwaysZero => false,
            DecisionRule::AlwaysOne => true,
        };
        if fire {
            Decision::ONE
        } else {
            Decision::ZERO
        }
    }
}

/// Exact NP false alarm rate when every sample carries the constant offset
/// `shift` and no signal: `1 - Phi(Phi^{-1}(1 - gamma) - sqrt(n) * shift)`.
pub fn np_pfa_closed(n: usize, gamma: f64, shift: f64) -> Result<f64> {
    check_n(n)?;
    check_gamma(gamma)?;
    if !shift.is_finite() {
        return param(format!("shift must be finite, got {shift}"));
    }
    let z = gaussian_quantile(1.0 - gamma)?;
    Ok(phi_upper(z - (n as f64).sqrt() * shift))
}

/// Exact NP detection rate under a constant offset: the false alarm formula
/// evaluated at mean `1 + shift`.
pub fn np_pdet_closed(n: usize, gamma: f64, shift: f64) -> Result<f64> {
    np_pfa_closed(n, gamma, 1.0 + shift)
}

/// Exact RDT false alarm rate under a constant offset,
/// `Q_{1/2}(sqrt(n) |shift|, lambda_gamma(sqrt(n) tau))`.
pub fn rdt_pfa_closed(n: usize, gamma: f64, tau: f64, shift: f64) -> Result<f64> {
    if !(shift.abs() < 0.5) {
        return param(format!("shift must satisfy |shift| < 1/2, got {shift}"));
    }
    let rule = rdt_build(n, gamma, tau)?;
    rdt_reject_prob(&rule, shift)
}

/// Exact RDT detection rate under a constant offset (mean `1 + shift`).
pub fn rdt_pdet_closed(n: usize, gamma: f64, tau: f64, shift: f64) -> Result<f64> {
    if !(shift.abs() < 0.5) {
        return param(format!("shift must satisfy |shift| < 1/2, got {shift}"));
    }
    let rule = rdt_build(n, gamma, tau)?;
    rdt_reject_prob(&rule, 1.0 + shift)
}

fn rdt_reject_prob(rule: &DecisionRule, mean: f64) -> Result<f64> {
    match *rule {
        DecisionRule::Rdt {
            n,
            threshold_lambda,
            ..
        } => Ok(marcum_q_half_unchecked(
            (n as f64).sqrt() * mean.abs(),
            threshold_lambda,
        )),
        _ => param("expected an RDT rule"),
    }
}

/// Closed-form rejection probability of `rule` when every sample has mean
/// `mean` (signal plus constant interference), where one exists.
pub fn reject_prob_closed(rule: &DecisionRule, mean: f64, epsilon: u8) -> Option<f64> {
    match *rule {
        DecisionRule::Np { n, gamma, .. } => {
            let z = gaussian_quantile(1.0 - gamma).ok()?;
            Some(phi_upper(z - (n as f64).sqrt() * mean))
        }
        DecisionRule::Rdt { .. } => rdt_reject_prob(rule, mean).ok(),
        DecisionRule::Oracle { .. } => Some(f64::from(epsilon)),
        DecisionRule::AlwaysZero => Some(0.0),
        DecisionRule::AlwaysOne => Some(1.0),
    }
}
