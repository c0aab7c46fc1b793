//! Confidence sets of models: exhaustive enumeration of the submodels of the
//! comprehensive model up to a size cap, a likelihood-ratio test of each
//! against the comprehensive fit, and normal-theory prediction intervals per
//! accepted model.

use crate::dist::{std_normal_quantile, student_t_quantile};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, span_basis, span_project};
use crate::stats::{ChiSqQuantileTable, SigmaMode};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeSet;

/// Parameters of the model-assessment phase.
#[derive(Debug, Clone, Serialize)]
pub struct ConfSetConfig {
    /// Significance level of the likelihood-ratio test.
    pub theta_level: f64,
    /// Largest submodel size tested. Must be at least the (unknowable) true
    /// support size for the true model to be among the tested candidates.
    pub s_max: usize,
    pub sigma: SigmaMode,
    /// Upper bound on the number of models enumerated.
    pub budget: u64,
}

impl Default for ConfSetConfig {
    fn default() -> Self {
        ConfSetConfig {
            theta_level: 0.05,
            s_max: 4,
            sigma: SigmaMode::Estimate,
            budget: 1_000_000,
        }
    }
}

/// One tested submodel.
#[derive(Debug, Clone, Serialize)]
pub struct ModelRecord {
    pub members: Vec<usize>,
    pub w: f64,
    pub df: usize,
    pub accepted: bool,
}

/// The confidence set: every accepted submodel of the comprehensive model.
#[derive(Debug, Clone, Serialize)]
pub struct ModelConfidenceSet {
    pub comprehensive: Vec<usize>,
    pub theta_level: f64,
    pub s_max: usize,
    pub comprehensive_rank: usize,
    pub tested: u64,
    pub accepted_count: u64,
    /// Accepted models in lexicographic (size-major) order.
    pub records: Vec<ModelRecord>,
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Number of models enumerated for a comprehensive model of size `s_hat`
/// and cap `s_max`.
pub fn models_to_test(s_hat: usize, s_max: usize) -> u128 {
    (0..=s_max.min(s_hat)).map(|j| binomial(s_hat, j)).sum()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        if k == 0 {
            break;
        }
        // advance to the next lexicographic combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// Tests submodels of a fixed comprehensive model against the comprehensive
/// fit, in a compressed orthonormal coordinate system so each test costs a
/// decomposition of an `r_hat x |S_m|` block only.
pub struct ModelTester {
    members: Vec<usize>,
    /// comprehensive columns expressed in the orthonormal basis of their span
    compressed: DMatrix<f64>,
    /// response coordinates in that basis
    z: DVector<f64>,
    r_hat: usize,
    rss_comp: f64,
    n: usize,
    sigma: SigmaMode,
    theta_level: f64,
    table: ChiSqQuantileTable,
}

impl ModelTester {
    pub fn new(
        y: &DVector<f64>,
        x: &DMatrix<f64>,
        s_hat: &BTreeSet<usize>,
        sigma: SigmaMode,
        theta_level: f64,
    ) -> Result<Self> {
        if !(theta_level > 0.0 && theta_level < 1.0) {
            return Err(Error::invalid("theta level must lie in (0, 1)"));
        }
        let members: Vec<usize> = s_hat.iter().copied().collect();
        if members.iter().any(|&j| j >= x.ncols()) {
            return Err(Error::invalid("comprehensive index out of range"));
        }
        let x_comp = x.select_columns(&members);
        let (q, r_hat) = span_basis(&x_comp);
        let z = q.transpose() * y;
        let compressed = q.transpose() * &x_comp;
        let rss_comp = (y.norm_squared() - z.norm_squared()).max(0.0);
        Ok(ModelTester {
            members,
            compressed,
            z,
            r_hat,
            rss_comp,
            n: y.nrows(),
            sigma,
            theta_level,
            table: ChiSqQuantileTable::new(),
        })
    }

    /// Column rank of the comprehensive design.
    pub fn comprehensive_rank(&self) -> usize {
        self.r_hat
    }

    pub fn comprehensive(&self) -> &[usize] {
        &self.members
    }

    fn eval_positions(&self, positions: &[usize]) -> Result<(f64, usize)> {
        let (proj, r_m) = if positions.is_empty() {
            (DVector::zeros(self.z.nrows()), 0)
        } else {
            let sub = self.compressed.select_columns(positions);
            span_project(&self.z, &sub)
        };
        let df = self.r_hat - r_m;
        let w = match self.sigma {
            SigmaMode::Known(s) => {
                ((self.z.norm_squared() - proj.norm_squared()) / (s * s)).max(0.0)
            }
            SigmaMode::Estimate => {
                let rss_m = self.rss_comp + (self.z.norm_squared() - proj.norm_squared()).max(0.0);
                let floor = 1e-12 * (self.z.norm_squared() + self.rss_comp).max(1.0);
                if self.rss_comp <= floor {
                    if rss_m <= floor {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (self.n as f64 * (rss_m / self.rss_comp).ln()).max(0.0)
                }
            }
        };
        Ok((w, df))
    }

    fn record(&self, positions: &[usize]) -> Result<ModelRecord> {
        let (w, df) = self.eval_positions(positions)?;
        let (w, accepted) = if df == 0 {
            (0.0, true)
        } else {
            let q = self.table.quantile(df, 1.0 - self.theta_level)?;
            (w, w <= q)
        };
        Ok(ModelRecord {
            members: positions.iter().map(|&p| self.members[p]).collect(),
            w,
            df,
            accepted,
        })
    }

    /// Test one submodel (by original variable indices).
    pub fn test(&self, model: &BTreeSet<usize>) -> Result<ModelRecord> {
        let positions: Vec<usize> = model
            .iter()
            .map(|idx| {
                self.members
                    .binary_search(idx)
                    .map_err(|_| Error::NotNested)
            })
            .collect::<Result<_>>()?;
        self.record(&positions)
    }
}

/// Enumerate and test every submodel of `s_hat` up to size `s_max`.
pub fn build_confidence_set(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    s_hat: &BTreeSet<usize>,
    cfg: &ConfSetConfig,
) -> Result<ModelConfidenceSet> {
    let would_test = models_to_test(s_hat.len(), cfg.s_max);
    if would_test > cfg.budget as u128 {
        return Err(Error::BudgetExceeded {
            would_test,
            budget: cfg.budget,
        });
    }
    let tester = ModelTester::new(y, x, s_hat, cfg.sigma, cfg.theta_level)?;
    let mut records = Vec::new();
    let mut tested = 0u64;
    let mut accepted_count = 0u64;
    for size in 0..=cfg.s_max.min(s_hat.len()) {
        let layer = combinations(s_hat.len(), size);
        let evaluated: Vec<ModelRecord> = layer
            .par_iter()
            .map(|positions| tester.record(positions))
            .collect::<Result<_>>()?;
        for rec in evaluated {
            tested += 1;
            if rec.accepted {
                accepted_count += 1;
                records.push(rec);
            }
        }
    }
    Ok(ModelConfidenceSet {
        comprehensive: tester.members.clone(),
        theta_level: cfg.theta_level,
        s_max: cfg.s_max,
        comprehensive_rank: tester.r_hat,
        tested,
        accepted_count,
        records,
    })
}

/// A per-model normal-theory prediction interval at a query point.
#[derive(Debug, Clone, Serialize)]
pub struct IntervalRow {
    pub members: Vec<usize>,
    pub centre: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictionTable {
    pub level: f64,
    pub rows: Vec<IntervalRow>,
    pub omitted: Vec<(Vec<usize>, String)>,
}

/// Prediction intervals at `x_new` (all `p` coordinates; each model extracts
/// its own members) for every accepted model of the confidence set, fitted on
/// the assessment data `(y, x)`.
pub fn prediction_intervals(
    mcs: &ModelConfidenceSet,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    x_new: &DVector<f64>,
    level: f64,
    sigma: SigmaMode,
) -> Result<PredictionTable> {
    if x_new.nrows() != x.ncols() {
        return Err(Error::invalid("x_new must have one entry per variable"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level must lie in (0, 1)"));
    }
    let n = y.nrows();
    let mut rows = Vec::new();
    let mut omitted = Vec::new();
    for rec in &mcs.records {
        let m = rec.members.len();
        let (centre, leverage, resid_norm) = if m == 0 {
            (0.0, 0.0, y.norm())
        } else {
            let xm = x.select_columns(&rec.members);
            let fit = match least_squares(y, &xm) {
                Ok(f) => f,
                Err(Error::RankDeficient { rank, cols }) => {
                    omitted.push((
                        rec.members.clone(),
                        format!("rank deficient: rank {rank} < {cols} columns"),
                    ));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let x_new_m = DVector::from_iterator(m, rec.members.iter().map(|&j| x_new[j]));
            let centre = x_new_m.dot(&fit.coefficients);
            // x_m^T (X^T X)^{-1} x_m through the same orthogonal decomposition
            let svd = xm.clone().svd(false, true);
            let v_t = svd.v_t.expect("v_t requested");
            let scaled = v_t * &x_new_m;
            let leverage: f64 = (0..m)
                .map(|i| (scaled[i] / svd.singular_values[i]).powi(2))
                .sum();
            (centre, leverage, fit.residuals.norm())
        };
        let (scale, quantile) = match sigma {
            SigmaMode::Known(s) => (s, std_normal_quantile(0.5 * (1.0 + level))?),
            SigmaMode::Estimate => {
                if n <= m {
                    omitted.push((rec.members.clone(), "no residual degrees of freedom".into()));
                    continue;
                }
                let s = resid_norm / ((n - m) as f64).sqrt();
                (s, student_t_quantile((n - m) as f64, 0.5 * (1.0 + level))?)
            }
        };
        rows.push(IntervalRow {
            members: rec.members.clone(),
            centre,
            half_width: quantile * scale * (1.0 + leverage).sqrt(),
        });
    }
    Ok(PredictionTable {
        level,
        rows,
        omitted,
    })
}

/// Noncentrality of the likelihood-ratio statistic for a submodel: the scaled
/// squared norm of the part of the comprehensive signal orthogonal to the
/// submodel span. Simulation use (the generating coefficients are needed).
pub fn noncentrality(
    x_comp: &DMatrix<f64>,
    x_sub: &DMatrix<f64>,
    gamma0: &DVector<f64>,
    sigma: f64,
) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::invalid("sigma must be positive"));
    }
    if gamma0.nrows() != x_comp.ncols() {
        return Err(Error::invalid(
            "gamma0 length must match comprehensive columns",
        ));
    }
    if x_sub.nrows() != x_comp.nrows() {
        return Err(Error::invalid("row counts differ"));
    }
    let signal = x_comp * gamma0;
    let (proj, _) = span_project(&signal, x_sub);
    Ok((signal - proj).norm_squared() / (sigma * sigma))
}
