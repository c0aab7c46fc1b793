//! Baseline reduction strategies for head-to-head experiments: marginal
//! screening by absolute correlation with the outcome, and an undertuned
//! ell-1 penalised fit by pathwise coordinate descent.

use crate::error::{Error, Result};
use crate::linalg::corr;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::collections::BTreeSet;

/// Ranking of all variables by absolute marginal correlation with the
/// outcome, and the retained top set.
#[derive(Debug, Clone, Serialize)]
pub struct ScreeningResult {
    /// Permutation of `0..p`, strongest first; ties broken by lower index.
    pub ranking: Vec<usize>,
    /// `|corr(y, x_j)|` per variable index (zero-norm columns score 0).
    pub scores: Vec<f64>,
    pub kept: BTreeSet<usize>,
}

/// Retain the `s_hat` variables with the largest absolute marginal
/// correlation with the outcome.
pub fn marginal_screen(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    s_hat: usize,
) -> Result<ScreeningResult> {
    if s_hat == 0 {
        return Err(Error::invalid("s_hat must be at least 1"));
    }
    let p = x.ncols();
    let scores: Vec<f64> = (0..p)
        .map(|j| {
            corr(y, &x.column(j).into_owned())
                .map(f64::abs)
                .unwrap_or(0.0)
        })
        .collect();
    let mut ranking: Vec<usize> = (0..p).collect();
    ranking.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let kept = ranking.iter().take(s_hat.min(p)).copied().collect();
    Ok(ScreeningResult {
        ranking,
        scores,
        kept,
    })
}

/// One ell-1 penalised fit.
#[derive(Debug, Clone)]
pub struct LassoFit {
    /// Coefficients on the original column scale.
    pub coefficients: DVector<f64>,
    /// Final stationarity-certificate gap on the standardised design.
    pub kkt_gap: f64,
    pub sweeps: usize,
}

/// The pathwise solution over a descending lambda grid.
#[derive(Debug, Clone)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    pub coefficients: Vec<DVector<f64>>,
    pub supports: Vec<BTreeSet<usize>>,
}

/// Support chosen by undertuning: walk the grid from the largest penalty
/// down and stop at the first support of at least the target size.
#[derive(Debug, Clone, Serialize)]
pub struct UndertunedSupport {
    pub support: BTreeSet<usize>,
    pub lambda: f64,
    /// Set when the grid ran out before the target size was reached.
    pub grid_exhausted: bool,
}

const KKT_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 10_000;

struct Standardised {
    xs: DMatrix<f64>,
    /// per-column norm scale; zero for degenerate columns
    scales: Vec<f64>,
}

fn standardise(x: &DMatrix<f64>) -> Standardised {
    let n = x.nrows() as f64;
    let mut xs = x.clone();
    let mut scales = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let s = x.column(j).norm() / n.sqrt();
        if s < 1e-12 {
            scales.push(0.0);
            xs.column_mut(j).fill(0.0);
        } else {
            scales.push(s);
            xs.column_mut(j).scale_mut(1.0 / s);
        }
    }
    Standardised { xs, scales }
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

fn kkt_gap(std: &Standardised, residual: &DVector<f64>, theta: &DVector<f64>, lambda: f64) -> f64 {
    let n = std.xs.nrows() as f64;
    let mut gap: f64 = 0.0;
    for j in 0..std.xs.ncols() {
        if std.scales[j] == 0.0 {
            continue;
        }
        let grad = std.xs.column(j).dot(residual) / n;
        let violation = if theta[j] != 0.0 {
            (grad - lambda * theta[j].signum()).abs()
        } else {
            (grad.abs() - lambda).max(0.0)
        };
        gap = gap.max(violation);
    }
    gap
}

fn coordinate_descent(
    y: &DVector<f64>,
    std: &Standardised,
    lambda: f64,
    theta: &mut DVector<f64>,
) -> Result<(f64, usize)> {
    let n = std.xs.nrows() as f64;
    let p = std.xs.ncols();
    let mut residual = y - &std.xs * &*theta;
    for sweep in 1..=MAX_SWEEPS {
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            if std.scales[j] == 0.0 {
                continue;
            }
            let old = theta[j];
            // columns are standardised so x_j^T x_j / n = 1
            let rho = std.xs.column(j).dot(&residual) / n + old;
            let new = soft_threshold(rho, lambda);
            if new != old {
                let col = std.xs.column(j);
                residual.axpy(old - new, &col, 1.0);
                theta[j] = new;
                max_delta = max_delta.max((new - old).abs());
            }
        }
        if max_delta < 1e-11 {
            let gap = kkt_gap(std, &residual, theta, lambda);
            if gap <= KKT_TOL {
                return Ok((gap, sweep));
            }
        }
    }
    let gap = kkt_gap(std, &residual, theta, lambda);
    if gap <= KKT_TOL {
        Ok((gap, MAX_SWEEPS))
    } else {
        Err(Error::NoConvergence {
            sweeps: MAX_SWEEPS,
            gap,
        })
    }
}

fn destandardise(std: &Standardised, theta: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(theta.nrows(), |j, _| {
        if std.scales[j] == 0.0 {
            0.0
        } else {
            theta[j] / std.scales[j]
        }
    })
}

/// Coordinate-descent solution of the ell-1 problem
/// `(1/2n) ||y - X theta||^2 + lambda ||theta||_1` on column-standardised
/// data, reported on the original scale.
pub fn lasso_fit(y: &DVector<f64>, x: &DMatrix<f64>, lambda: f64) -> Result<LassoFit> {
    if lambda < 0.0 {
        return Err(Error::invalid("lambda must be non-negative"));
    }
    if y.nrows() != x.nrows() {
        return Err(Error::invalid("row counts differ"));
    }
    let std = standardise(x);
    let mut theta = DVector::zeros(x.ncols());
    let (kkt_gap, sweeps) = coordinate_descent(y, &std, lambda, &mut theta)?;
    Ok(LassoFit {
        coefficients: destandardise(&std, &theta),
        kkt_gap,
        sweeps,
    })
}

/// Smallest penalty with an all-zero solution, on the standardised design.
pub fn lambda_max(y: &DVector<f64>, x: &DMatrix<f64>) -> f64 {
    let std = standardise(x);
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|j| (std.xs.column(j).dot(y) / n).abs())
        .fold(0.0f64, f64::max)
}

/// Pathwise fit over `grid_size` log-spaced penalties from `lambda_max` down
/// to `lambda_max * floor_ratio`, with warm starts.
pub fn lasso_path(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    grid_size: usize,
    floor_ratio: f64,
) -> Result<LassoPath> {
    if grid_size < 2 || !(floor_ratio > 0.0 && floor_ratio < 1.0) {
        return Err(Error::invalid(
            "need grid_size >= 2 and floor_ratio in (0, 1)",
        ));
    }
    let lam_max = lambda_max(y, x);
    if lam_max <= 0.0 {
        return Err(Error::invalid("response is orthogonal to every column"));
    }
    let std = standardise(x);
    let mut lambdas = Vec::with_capacity(grid_size);
    let log_max = lam_max.ln();
    let log_min = (lam_max * floor_ratio).ln();
    for i in 0..grid_size {
        let t = i as f64 / (grid_size - 1) as f64;
        lambdas.push((log_max + t * (log_min - log_max)).exp());
    }
    let mut theta = DVector::zeros(x.ncols());
    let mut coefficients = Vec::with_capacity(grid_size);
    let mut supports = Vec::with_capacity(grid_size);
    for &lambda in &lambdas {
        coordinate_descent(y, &std, lambda, &mut theta)?;
        let support: BTreeSet<usize> = (0..x.ncols()).filter(|&j| theta[j] != 0.0).collect();
        coefficients.push(destandardise(&std, &theta));
        supports.push(support);
    }
    Ok(LassoPath {
        lambdas,
        coefficients,
        supports,
    })
}

/// Default path resolution used by the undertuned comparator.
pub const PATH_GRID: usize = 100;
pub const PATH_FLOOR: f64 = 1e-4;

/// Decrease the penalty along the default grid until the support reaches
/// `target_size`; if the grid runs out, return the support at the grid floor
/// with a warning flag.
pub fn lasso_undertuned_support(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    target_size: usize,
) -> Result<UndertunedSupport> {
    if target_size == 0 {
        return Err(Error::invalid("target size must be at least 1"));
    }
    let path = lasso_path(y, x, PATH_GRID, PATH_FLOOR)?;
    for (i, support) in path.supports.iter().enumerate() {
        if support.len() >= target_size {
            return Ok(UndertunedSupport {
                support: support.clone(),
                lambda: path.lambdas[i],
                grid_exhausted: false,
            });
        }
    }
    Ok(UndertunedSupport {
        support: path.supports.last().unwrap().clone(),
        lambda: *path.lambdas.last().unwrap(),
        grid_exhausted: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::*;
    use crate::rng::rng_from;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn screening_ranks_the_exact_match_first() {
        let mut rng = rng_from(601);
        let x = centred_gauss(&mut rng, 40, 6);
        let y = x.column(3).into_owned();
        let res = marginal_screen(&y, &x, 2).unwrap();
        assert_eq!(res.ranking[0], 3);
        assert!(res.kept.contains(&3));
    }

    #[test]
    fn screening_ties_break_towards_the_lower_index() {
        let mut rng = rng_from(602);
        let base = centred_gauss(&mut rng, 30, 2);
        let dup = base.column(1).into_owned();
        let x = DMatrix::from_columns(&[base.column(0), base.column(1), dup.column(0)]);
        let y = base.column(1).into_owned();
        let res = marginal_screen(&y, &x, 1).unwrap();
        assert_eq!(res.scores[1], res.scores[2]);
        assert_eq!(res.ranking[0], 1);
        assert_eq!(res.ranking[1], 2);
    }

    #[test]
    fn screening_keeps_everything_when_asked() {
        let mut rng = rng_from(603);
        let x = centred_gauss(&mut rng, 30, 5);
        let y = centred_gauss_vec(&mut rng, 30);
        let res = marginal_screen(&y, &x, 5).unwrap();
        assert_eq!(res.kept.len(), 5);
        // ranking equals a sort of the exhaustively computed correlations
        let mut oracle: Vec<usize> = (0..5).collect();
        let scores: Vec<f64> = (0..5)
            .map(|j| corr(&y, &x.column(j).into_owned()).unwrap().abs())
            .collect();
        oracle.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        assert_eq!(res.ranking, oracle);
    }

    #[test]
    fn screening_misses_a_cancelled_signal() {
        // build a signal whose marginal effect is cancelled by companions:
        // y = x_e + c x_f with x_f correlated with x_e and c chosen so the
        // marginal coefficient of x_e is near zero (via the decomposition
        // identity), leaving independent noise ranked above it
        let mut rng = rng_from(607);
        let n = 400;
        let z = centred_gauss(&mut rng, n, 3);
        let x_e = z.column(0).into_owned();
        let r = 0.7;
        let x_f = &x_e * r + z.column(1).into_owned() * (1.0f64 - r * r).sqrt();
        let noise_col = z.column(2).into_owned();
        // c solves x_e^T (x_e + c x_f) = 0
        let c = -x_e.norm_squared() / x_e.dot(&x_f);
        let y = &x_e + &x_f * c + &noise_col * 0.05;
        let x = DMatrix::from_columns(&[x_e.column(0), x_f.column(0), noise_col.column(0)]);
        // verify the cancellation through the decomposition identity
        let (lhs, rhs) = crate::linalg::cochran_decompose(&y, &[0], &[1], &x).unwrap();
        assert!(close(lhs[0], rhs[0], 1e-8));
        assert!(lhs[0].abs() < 0.05, "marginal effect nearly cancelled");
        let res = marginal_screen(&y, &x, 1).unwrap();
        assert_ne!(res.ranking[0], 0, "cancelled signal must not rank first");
        assert!(res.scores[2] > res.scores[0]);
    }

    #[test]
    fn lasso_zero_solution_at_lambda_max() {
        let mut rng = rng_from(611);
        let x = centred_gauss(&mut rng, 50, 8);
        let y = centred_gauss_vec(&mut rng, 50);
        let lam = lambda_max(&y, &x);
        let fit = lasso_fit(&y, &x, lam * 1.0001).unwrap();
        assert!(fit.coefficients.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn lasso_orthonormal_design_matches_soft_threshold_oracle() {
        let mut rng = rng_from(613);
        let n = 64usize;
        let raw = centred_gauss(&mut rng, n, 6);
        let q = raw.qr().q().columns(0, 6).into_owned();
        // scale columns to norm sqrt(n) so standardisation is a no-op
        let xs = &q * (n as f64).sqrt();
        let beta = DVector::from_column_slice(&[2.0, -1.0, 0.6, 0.0, 0.0, 0.25]);
        let y = &xs * &beta;
        for lambda in [0.05, 0.3, 0.8] {
            let fit = lasso_fit(&y, &xs, lambda).unwrap();
            for j in 0..6 {
                // oracle: soft-thresholded least-squares coefficient
                let ols = xs.column(j).dot(&y) / (n as f64);
                let expect = super::soft_threshold(ols, lambda);
                assert!(
                    close(fit.coefficients[j], expect, 1e-8),
                    "lambda={lambda} j={j}: {} vs {expect}",
                    fit.coefficients[j]
                );
            }
        }
    }

    #[test]
    fn lasso_at_zero_penalty_reproduces_least_squares() {
        let mut rng = rng_from(617);
        let x = centred_gauss(&mut rng, 60, 5);
        let y = centred_gauss_vec(&mut rng, 60);
        let fit = lasso_fit(&y, &x, 0.0).unwrap();
        let ls = crate::linalg::least_squares(&y, &x).unwrap();
        for j in 0..5 {
            assert!(
                (fit.coefficients[j] - ls.coefficients[j]).abs() < 1e-6,
                "j={j}"
            );
        }
    }

    #[test]
    fn kkt_certificate_holds_along_the_path() {
        let mut rng = rng_from(619);
        for _ in 0..10 {
            let x = centred_gauss(&mut rng, 40, 10);
            let noise: DVector<f64> = DVector::from_fn(40, |_, _| rng.sample(StandardNormal));
            let y = x.column(0).into_owned() * 2.0 + noise;
            let path = lasso_path(&y, &x, 25, 1e-3).unwrap();
            let std = standardise(&x);
            let n = 40.0;
            for (i, lambda) in path.lambdas.iter().enumerate() {
                // re-standardise the reported coefficients and verify the
                // stationarity conditions directly
                let theta_std =
                    DVector::from_fn(10, |j, _| path.coefficients[i][j] * std.scales[j]);
                let residual = &y - &std.xs * &theta_std;
                for j in 0..10 {
                    let g = std.xs.column(j).dot(&residual) / n;
                    if theta_std[j] != 0.0 {
                        assert!(
                            (g - lambda * theta_std[j].signum()).abs() <= 1e-6,
                            "support violation at grid {i} var {j}"
                        );
                    } else {
                        assert!(
                            g.abs() <= lambda + 1e-6,
                            "off-support violation at grid {i} var {j}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn undertuned_support_recovers_strong_orthogonal_signals() {
        let mut rng = rng_from(631);
        let n = 80usize;
        let raw = centred_gauss(&mut rng, n, 12);
        let q = raw.qr().q().columns(0, 12).into_owned();
        let x = &q * (n as f64).sqrt();
        let noise: DVector<f64> = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        let y = x.column(1).into_owned() * 3.0
            + x.column(4).into_owned() * 2.5
            + x.column(7).into_owned() * 2.0
            + noise * 0.2;
        let res = lasso_undertuned_support(&y, &x, 3).unwrap();
        assert!(!res.grid_exhausted);
        assert!(res.support.is_superset(&[1, 4, 7].into_iter().collect()));
    }

    #[test]
    fn undertuned_support_flags_an_exhausted_grid() {
        let mut rng = rng_from(641);
        let x = centred_gauss(&mut rng, 30, 4);
        let y = centred_gauss_vec(&mut rng, 30);
        let res = lasso_undertuned_support(&y, &x, 40).unwrap();
        assert!(res.grid_exhausted);
        assert!(res.support.len() <= 4);
    }
}
