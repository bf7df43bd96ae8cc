//! Special functions and the RDT threshold solver.
//!
//! The Gaussian CDF is computed from the complementary error function so that
//! both tails keep full relative precision. The order-1/2 Marcum Q function
//! reduces to a folded-normal tail, `Q(rho, lambda) = P(|rho + Z| > lambda)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{param, Error, Result};

/// Stopping rule for the root finders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    /// Absolute tolerance on the target function value.
    pub root_tol: f64,
    pub max_iter: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            root_tol: 1e-12,
            max_iter: 200,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.root_tol > 0.0 && self.root_tol.is_finite()) {
            return param(format!("root_tol must be positive, got {}", self.root_tol));
        }
        if self.max_iter == 0 {
            return param("max_iter must be at least 1");
        }
        Ok(())
    }
}

/// Lower tail `P(Z <= x)` without argument checks.
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `P(Z > x)` without argument checks.
pub(crate) fn phi_upper(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function.
pub fn gaussian_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return param(format!("gaussian_cdf needs a finite argument, got {x}"));
    }
    Ok(phi(x))
}

// Acklam's rational approximation, relative error about 1e-9 over (0, 1).
#[allow(clippy::excessive_precision)]
fn quantile_seed(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549671010229528e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Inverse of [`gaussian_cdf`], polished with Halley steps until
/// `|Phi(x) - p| <= root_tol` under the default tolerance.
pub fn gaussian_quantile(p: f64) -> Result<f64> {
    gaussian_quantile_with(p, &ToleranceConfig::default())
}

pub fn gaussian_quantile_with(p: f64, cfg: &ToleranceConfig) -> Result<f64> {
    cfg.validate()?;
    if !(p > 0.0 && p < 1.0) {
        return param(format!("quantile level must lie in (0, 1), got {p}"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Work in the lower tail; 1 - p is exact for p >= 0.5.
    let (tail, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut x = quantile_seed(tail);
    for _ in 0..cfg.max_iter {
        let err = phi(x) - tail;
        if err.abs() <= cfg.root_tol * 1e-3 {
            break;
        }
        let u = err / density(x);
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if step.abs() <= f64::EPSILON * x.abs() {
            break;
        }
    }
    if (phi(x) - tail).abs() > cfg.root_tol {
        return Err(Error::Numerical(format!(
            "gaussian_quantile({p}) did not reach tolerance {}",
            cfg.root_tol
        )));
    }
    Ok(sign * x)
}

/// Generalized Marcum Q of order 1/2, `P(|rho + Z| > lambda)`.
pub fn marcum_q_half(rho: f64, lambda: f64) -> Result<f64> {
    if !(rho >= 0.0 && rho.is_finite()) || !(lambda >= 0.0 && lambda.is_finite()) {
        return param(format!(
            "marcum_q_half needs finite nonnegative arguments, got ({rho}, {lambda})"
        ));
    }
    Ok(marcum_q_half_unchecked(rho, lambda))
}

pub(crate) fn marcum_q_half_unchecked(rho: f64, lambda: f64) -> f64 {
    (phi_upper(lambda - rho) + phi(-lambda - rho)).min(1.0)
}

/// Threshold `lambda` solving `marcum_q_half(rho, lambda) = gamma`.
///
/// The bracket starts at `[0, rho + 1]` (Q is 1 at zero) and the upper end is
/// doubled until Q drops below `gamma`; bisection then runs until the
/// function value is within `root_tol` of `gamma`.
pub fn rdt_threshold(rho: f64, gamma: f64, cfg: &ToleranceConfig) -> Result<f64> {
    cfg.validate()?;
    if !(rho >= 0.0 && rho.is_finite()) {
        return param(format!("rho must be finite and nonnegative, got {rho}"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return param(format!("gamma must lie in (0, 1), got {gamma}"));
    }
    let excess = |lambda: f64| marcum_q_half_unchecked(rho, lambda) - gamma;

    let mut lo = 0.0;
    let mut hi = rho + 1.0;
    let mut doublings = 0;
    while excess(hi) >= 0.0 {
        if doublings == cfg.max_iter {
            return Err(Error::Numerical(format!(
                "could not bracket the RDT threshold for rho={rho}, gamma={gamma}"
            )));
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
    }

    for _ in 0..cfg.max_iter {
        let mid = 0.5 * (lo + hi);
        let f = excess(mid);
        if f.abs() <= cfg.root_tol {
            return Ok(mid);
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    if excess(mid).abs() <= cfg.root_tol {
        Ok(mid)
    } else {
        Err(Error::Numerical(format!(
            "RDT threshold bisection did not converge for rho={rho}, gamma={gamma}"
        )))
    }
}
