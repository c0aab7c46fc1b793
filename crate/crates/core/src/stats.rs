//! Wald statistics with known or per-regression estimated variance, the
//! Gaussian likelihood-ratio statistic for nested submodels, and a guarded
//! chi-squared quantile cache.

use crate::dist;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, span_project};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Mutex;

/// How the error scale enters a Wald statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SigmaMode {
    /// Fixed, known error standard deviation.
    Known(f64),
    /// Estimated anew in each regression: `||residual|| / sqrt(n - k)`.
    Estimate,
}

impl SigmaMode {
    pub fn is_known(&self) -> bool {
        matches!(self, SigmaMode::Known(_))
    }
}

/// Standardised per-variable coefficients of one regression.
#[derive(Debug, Clone)]
pub struct WaldVector {
    /// One standardised coefficient per fitted variable.
    pub values: DVector<f64>,
    /// Mode the statistic was computed under.
    pub sigma_mode: SigmaMode,
    /// The scale actually used (sigma, or its per-regression estimate).
    pub sigma_used: f64,
    /// Variable indices behind each entry; duplicate-free.
    pub index_map: Vec<usize>,
}

/// Threshold below which an estimated residual scale counts as degenerate.
pub const DEGENERATE_SIGMA: f64 = 1e-12;

/// Wald statistic of a regression of `y` on the centred columns `xk`.
///
/// `index_map` names the variables behind the columns (used by the sweeps;
/// pass `0..k` when ids are irrelevant).
pub fn wald(
    y: &DVector<f64>,
    xk: &DMatrix<f64>,
    mode: SigmaMode,
    index_map: &[usize],
) -> Result<WaldVector> {
    let (n, k) = (xk.nrows(), xk.ncols());
    if index_map.len() != k {
        return Err(Error::invalid("index map length must equal column count"));
    }
    let mut seen = index_map.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != k {
        return Err(Error::invalid("index map contains duplicates"));
    }
    if n <= k {
        return Err(Error::invalid(format!("need n > k, got n={n} k={k}")));
    }
    let fit = least_squares(y, xk)?;
    let sigma_used = match mode {
        SigmaMode::Known(s) => {
            if s <= 0.0 {
                return Err(Error::invalid("known sigma must be positive"));
            }
            s
        }
        SigmaMode::Estimate => {
            let s = fit.residuals.norm() / ((n - k) as f64).sqrt();
            if s < DEGENERATE_SIGMA {
                return Err(Error::DegenerateResidual { sigma: s });
            }
            s
        }
    };
    let values = DVector::from_fn(k, |i, _| {
        fit.coefficients[i] / (sigma_used * fit.xtx_inv_diag[i].sqrt())
    });
    Ok(WaldVector {
        values,
        sigma_mode: mode,
        sigma_used,
        index_map: index_map.to_vec(),
    })
}

/// Split `sigma * T_a` into the recovered-signal part and the residual part.
///
/// The first term is the amount of true signal attributed to variable `a`
/// (zero when `a` is a noise variable); the second is the correlation of the
/// omitted signal with the projected covariate. Simulation use only, since it
/// needs the generating coefficients `theta0` for the fitted columns.
pub fn signal_noise_split(
    y: &DVector<f64>,
    xa: &DMatrix<f64>,
    theta0: &DVector<f64>,
    a: usize,
) -> Result<(f64, f64)> {
    let k = xa.ncols();
    if a >= k {
        return Err(Error::invalid("index a out of range"));
    }
    if theta0.nrows() != k {
        return Err(Error::invalid("theta0 length must equal column count"));
    }
    // full-rank requirement on X_A
    let _ = least_squares(y, xa)?;
    let col_a = xa.column(a).into_owned();
    let rest: Vec<usize> = (0..k).filter(|j| *j != a).collect();
    let x_rest = xa.select_columns(&rest);
    let (pa, _) = span_project(&col_a, &x_rest);
    let complement = &col_a - pa;
    let r2 = 1.0 - (complement.norm() / col_a.norm()).powi(2);
    let delta1 = (1.0 - r2).max(0.0).sqrt() * theta0[a] * col_a.norm();

    let resid = y - xa * theta0;
    let delta2 = if resid.norm() < crate::linalg::ZERO_NORM {
        0.0
    } else {
        resid.norm() * crate::linalg::corr(&resid, &complement)?
    };
    Ok((delta1, delta2))
}

/// Likelihood-ratio statistic of a submodel against the comprehensive model
/// under the known-variance Gaussian likelihood, with rank-based degrees of
/// freedom. Requires the submodel columns to be among the comprehensive ones.
pub fn lrt_statistic(
    y: &DVector<f64>,
    x_comp: &DMatrix<f64>,
    x_sub: &DMatrix<f64>,
    sigma: f64,
) -> Result<(f64, usize)> {
    if sigma <= 0.0 {
        return Err(Error::invalid("sigma must be positive"));
    }
    if x_comp.nrows() != y.nrows() || x_sub.nrows() != y.nrows() {
        return Err(Error::invalid("row counts differ"));
    }
    for j in 0..x_sub.ncols() {
        let sub_col = x_sub.column(j);
        let nested = (0..x_comp.ncols()).any(|c| x_comp.column(c) == sub_col);
        if !nested {
            return Err(Error::NotNested);
        }
    }
    let (p_comp, r_comp) = span_project(y, x_comp);
    let (p_sub, r_sub) = span_project(y, x_sub);
    let w = ((p_comp.norm_squared() - p_sub.norm_squared()) / (sigma * sigma)).max(0.0);
    Ok((w, r_comp.saturating_sub(r_sub)))
}

/// Guarded cache of chi-squared quantiles keyed by (df, probability).
#[derive(Debug, Default)]
pub struct ChiSqQuantileTable {
    cache: Mutex<HashMap<(usize, u64), f64>>,
}

impl ChiSqQuantileTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// The `prob` quantile with `df` degrees of freedom, memoised.
    pub fn quantile(&self, df: usize, prob: f64) -> Result<f64> {
        let key = (df, prob.to_bits());
        if let Some(q) = self.cache.lock().unwrap().get(&key) {
            return Ok(*q);
        }
        let q = dist::chisq_quantile(df, prob)?;
        self.cache.lock().unwrap().insert(key, q);
        Ok(q)
    }
}
