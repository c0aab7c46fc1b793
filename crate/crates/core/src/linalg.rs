//! Dense linear-algebra kernel: centring, least squares through a
//! rank-revealing orthogonal decomposition, projections, and the three
//! sample-correlation functionals used throughout the reduction and
//! assessment stages.
//!
//! All fits go through the singular value decomposition; the normal-equations
//! route exists only as a test oracle. Numerical rank uses the tolerance
//! `sigma_max * max(n, k) * machine epsilon`.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Norm below which a vector is rejected as zero for correlation purposes.
pub const ZERO_NORM: f64 = 1e-300;

/// A matrix with centred columns, together with the means that recover the
/// original. Downstream code assumes every column has (near-)zero mean.
#[derive(Debug, Clone)]
pub struct Centred {
    pub values: DMatrix<f64>,
    pub means: DVector<f64>,
}

/// Per-regression least-squares output.
#[derive(Debug, Clone)]
pub struct LstsqFit {
    /// Minimiser of the residual sum of squares.
    pub coefficients: DVector<f64>,
    /// `y - X b`.
    pub residuals: DVector<f64>,
    /// Numerical rank of the design block.
    pub rank: usize,
    /// Diagonal of `(X^T X)^{-1}` (valid at full rank).
    pub xtx_inv_diag: DVector<f64>,
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("non-finite entry in matrix"))
    }
}

/// Centre every column of `m`; requires at least two rows.
pub fn centre_matrix(m: &DMatrix<f64>) -> Result<Centred> {
    if m.nrows() < 2 {
        return Err(Error::invalid(format!(
            "need n >= 2 rows to centre, got {}",
            m.nrows()
        )));
    }
    check_finite(m)?;
    let n = m.nrows() as f64;
    let mut values = m.clone();
    let mut means = DVector::zeros(m.ncols());
    for j in 0..m.ncols() {
        let mean = m.column(j).sum() / n;
        means[j] = mean;
        values.column_mut(j).add_scalar_mut(-mean);
    }
    Ok(Centred { values, means })
}

/// Centre a vector, returning the centred copy and the removed mean.
pub fn centre_vector(v: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    if v.nrows() < 2 {
        return Err(Error::invalid("need n >= 2 to centre"));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("non-finite entry in vector"));
    }
    let mean = v.sum() / v.nrows() as f64;
    Ok((v.map(|x| x - mean), mean))
}

/// True when every column mean of `x` is small relative to the column norm.
pub fn is_centred(x: &DMatrix<f64>, tol: f64) -> bool {
    let n = x.nrows() as f64;
    (0..x.ncols()).all(|j| {
        let col = x.column(j);
        col.sum().abs() / n <= tol * (1.0 + col.norm())
    })
}

/// Numerical-rank tolerance for a set of singular values.
fn rank_tol(sigma_max: f64, nrows: usize, ncols: usize) -> f64 {
    sigma_max * nrows.max(ncols) as f64 * f64::EPSILON
}

struct Decomp {
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
    singular_values: DVector<f64>,
    rank: usize,
}

fn decompose(x: &DMatrix<f64>) -> Decomp {
    if x.ncols() == 0 {
        return Decomp {
            u: DMatrix::zeros(x.nrows(), 0),
            v_t: DMatrix::zeros(0, 0),
            singular_values: DVector::zeros(0),
            rank: 0,
        };
    }
    let svd = x.clone().svd(true, true);
    let sv = DVector::from_iterator(
        svd.singular_values.len(),
        svd.singular_values.iter().copied(),
    );
    let tol = rank_tol(sv.max(), x.nrows(), x.ncols());
    let rank = sv.iter().filter(|s| **s > tol).count();
    Decomp {
        u: svd.u.expect("u requested"),
        v_t: svd.v_t.expect("v_t requested"),
        singular_values: sv,
        rank,
    }
}

/// Orthonormal basis of the column span (rank-truncated), plus the rank.
pub(crate) fn span_basis(x: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let d = decompose(x);
    (d.u.columns(0, d.rank).into_owned(), d.rank)
}

/// Projection of `y` onto the column span of `x`, tolerating rank deficiency.
pub(crate) fn span_project(y: &DVector<f64>, x: &DMatrix<f64>) -> (DVector<f64>, usize) {
    let (q, rank) = span_basis(x);
    if rank == 0 {
        return (DVector::zeros(y.nrows()), 0);
    }
    (&q * (q.transpose() * y), rank)
}

/// Least squares of `y` on the columns of `xk`.
///
/// Rejects rank-deficient designs; at full rank `xtx_inv_diag` holds
/// `diag((X^T X)^{-1})`.
pub fn least_squares(y: &DVector<f64>, xk: &DMatrix<f64>) -> Result<LstsqFit> {
    if y.nrows() != xk.nrows() {
        return Err(Error::invalid("y and X row counts differ"));
    }
    let k = xk.ncols();
    let d = decompose(xk);
    if d.rank < k {
        return Err(Error::RankDeficient {
            rank: d.rank,
            cols: k,
        });
    }
    // theta = V S^{-1} U^T y
    let uty = d.u.columns(0, k).transpose() * y;
    let scaled = DVector::from_iterator(k, (0..k).map(|i| uty[i] / d.singular_values[i]));
    let coefficients = d.v_t.transpose() * scaled;
    let residuals = y - xk * &coefficients;
    let mut xtx_inv_diag = DVector::zeros(k);
    for i in 0..k {
        let mut acc = 0.0;
        for j in 0..k {
            let vij = d.v_t[(j, i)];
            acc += vij * vij / (d.singular_values[j] * d.singular_values[j]);
        }
        xtx_inv_diag[i] = acc;
    }
    Ok(LstsqFit {
        coefficients,
        residuals,
        rank: d.rank,
        xtx_inv_diag,
    })
}

/// Least squares with a matrix of right-hand sides; returns the `k x m`
/// coefficient matrix. Same rank contract as [`least_squares`].
pub fn least_squares_multi(ys: &DMatrix<f64>, xk: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if ys.nrows() != xk.nrows() {
        return Err(Error::invalid("Y and X row counts differ"));
    }
    let k = xk.ncols();
    let d = decompose(xk);
    if d.rank < k {
        return Err(Error::RankDeficient {
            rank: d.rank,
            cols: k,
        });
    }
    let mut uty = d.u.columns(0, k).transpose() * ys;
    for i in 0..k {
        let s = d.singular_values[i];
        uty.row_mut(i).scale_mut(1.0 / s);
    }
    Ok(d.v_t.transpose() * uty)
}

/// `P_K y` for a full-column-rank design.
pub fn project(y: &DVector<f64>, xk: &DMatrix<f64>) -> Result<DVector<f64>> {
    if y.nrows() != xk.nrows() {
        return Err(Error::invalid("y and X row counts differ"));
    }
    let (p, rank) = span_project(y, xk);
    if rank < xk.ncols() {
        return Err(Error::RankDeficient {
            rank,
            cols: xk.ncols(),
        });
    }
    Ok(p)
}

/// Sample correlation of two centred vectors.
pub fn corr(u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let (nu, nv) = (u.norm(), v.norm());
    if nu < ZERO_NORM || nv < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok((u.dot(v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Sample multiple correlation of a centred vector with a centred matrix:
/// the cosine between `u` and its projection onto the span of `x`.
pub fn multiple_corr(u: &DVector<f64>, x: &DMatrix<f64>) -> Result<f64> {
    let nu = u.norm();
    if nu < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    let (pu, _) = span_project(u, x);
    Ok((pu.norm() / nu).clamp(0.0, 1.0))
}

/// Block correlation of two full-column-rank centred blocks: the spectral
/// norm of `P_A P_B`, computed from the small cross-Gram matrix of the two
/// orthonormal span bases rather than any n-by-n projector.
pub fn block_corr(xa: &DMatrix<f64>, xb: &DMatrix<f64>) -> Result<f64> {
    if xa.nrows() != xb.nrows() {
        return Err(Error::invalid("blocks have different row counts"));
    }
    let (qa, ra) = span_basis(xa);
    if ra < xa.ncols() {
        return Err(Error::RankDeficient {
            rank: ra,
            cols: xa.ncols(),
        });
    }
    let (qb, rb) = span_basis(xb);
    if rb < xb.ncols() {
        return Err(Error::RankDeficient {
            rank: rb,
            cols: xb.ncols(),
        });
    }
    if ra == 0 || rb == 0 {
        return Ok(0.0);
    }
    let cross = qa.transpose() * qb;
    let sv = cross.svd(false, false).singular_values;
    Ok(sv.max().clamp(0.0, 1.0))
}

/// Both sides of the single-set coefficient decomposition: the marginal fit
/// on `E` equals the joint coefficients on `E` plus the companion term routed
/// through `F`. Sets must be disjoint and `X_{E u F}` of full rank.
pub fn cochran_decompose(
    y: &DVector<f64>,
    e: &[usize],
    f: &[usize],
    x: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let overlap = e.iter().filter(|i| f.contains(i)).count();
    if overlap > 0 {
        return Err(Error::OverlappingSets(overlap));
    }
    if e.is_empty() {
        return Err(Error::invalid("set E must be non-empty"));
    }
    if e.len() + f.len() >= y.nrows() {
        return Err(Error::invalid("|E u F| must be below n"));
    }
    let xe = x.select_columns(e);
    let lhs = least_squares(y, &xe)?.coefficients;
    if f.is_empty() {
        return Ok((lhs.clone(), lhs));
    }
    let xf = x.select_columns(f);
    let union: Vec<usize> = e.iter().chain(f.iter()).copied().collect();
    let xk = x.select_columns(&union);
    let joint = least_squares(y, &xk)?.coefficients;
    let theta_e_given_f = joint.rows(0, e.len()).into_owned();
    let theta_f_given_e = joint.rows(e.len(), f.len()).into_owned();
    // coefficients of each F column regressed on X_E
    let companion = least_squares_multi(&xf, &xe)?;
    let rhs = theta_e_given_f + companion * theta_f_given_e;
    Ok((lhs, rhs))
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn centre_simple_column() {
        let m = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let c = centre_matrix(&m).unwrap();
        assert_eq!(c.values.as_slice(), &[-1.0, 0.0, 1.0]);
        assert_eq!(c.means[0], 2.0);
    }

    #[test]
    fn centre_is_idempotent() {
        let m = DMatrix::from_column_slice(4, 1, &[-1.5, -0.5, 0.5, 1.5]);
        let c = centre_matrix(&m).unwrap();
        assert_eq!(c.values, m);
        assert_eq!(c.means[0], 0.0);
    }

    #[test]
    fn centre_random_matrix_against_direct_summation() {
        let mut rng = rng_from(11);
        let m = gauss_matrix(&mut rng, 50, 10);
        let c = centre_matrix(&m).unwrap();
        for j in 0..10 {
            // direct summation oracle
            let mean: f64 = (0..50).map(|i| c.values[(i, j)]).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-12, "column {j} mean {mean}");
            let recovered: f64 = (0..50).map(|i| m[(i, j)]).sum::<f64>() / 50.0;
            assert!(close(recovered, c.means[j], 1e-12));
        }
    }

    #[test]
    fn centre_rejects_single_row_and_nonfinite() {
        assert!(centre_matrix(&DMatrix::from_column_slice(1, 1, &[1.0])).is_err());
        assert!(centre_matrix(&DMatrix::from_column_slice(2, 1, &[1.0, f64::NAN])).is_err());
    }

    #[test]
    fn least_squares_orthonormal_identity() {
        let xk = DMatrix::from_columns(&[
            DVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0]),
            DVector::from_column_slice(&[0.0, 1.0, 0.0, 0.0]),
        ]);
        let y = xk.column(0).into_owned();
        let fit = least_squares(&y, &xk).unwrap();
        assert!(close(fit.coefficients[0], 1.0, 1e-12));
        assert!(fit.coefficients[1].abs() < 1e-12);
        assert!(fit.residuals.norm() < 1e-12);
    }

    #[test]
    fn least_squares_exact_interpolation() {
        let mut rng = rng_from(3);
        let xk = centred_gauss(&mut rng, 30, 4);
        let b = DVector::from_column_slice(&[0.5, -1.0, 2.0, 0.25]);
        let y = &xk * &b;
        let fit = least_squares(&y, &xk).unwrap();
        assert!(fit.residuals.norm() <= 1e-10 * y.norm());
    }

    #[test]
    fn least_squares_matches_normal_equations_oracle() {
        let mut rng = rng_from(17);
        let xk = centred_gauss(&mut rng, 40, 5);
        let y = centred_gauss_vec(&mut rng, 40);
        let fit = least_squares(&y, &xk).unwrap();
        // explicit (X^T X)^{-1} X^T y via dense inverse
        let xtx = xk.transpose() * &xk;
        let inv = xtx.clone().try_inverse().unwrap();
        let oracle = &inv * (xk.transpose() * &y);
        for i in 0..5 {
            assert!(close(fit.coefficients[i], oracle[i], 1e-8));
            assert!(close(fit.xtx_inv_diag[i], inv[(i, i)], 1e-8));
        }
        // residual orthogonality invariant
        let gram = xk.transpose() * &fit.residuals;
        assert!(gram.amax() <= 1e-8 * y.norm());
    }

    #[test]
    fn least_squares_rejects_rank_deficiency() {
        let mut rng = rng_from(5);
        let a = centred_gauss(&mut rng, 20, 2);
        let dup = a.column(0).into_owned();
        let xk = DMatrix::from_columns(&[a.column(0), a.column(1), dup.column(0)]);
        match least_squares(&centred_gauss_vec(&mut rng, 20), &xk) {
            Err(Error::RankDeficient { rank, cols }) => {
                assert_eq!((rank, cols), (2, 3));
            }
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn project_orthogonal_and_in_span() {
        let mut rng = rng_from(23);
        let x = centred_gauss(&mut rng, 25, 3);
        let b = DVector::from_column_slice(&[1.0, 2.0, -1.0]);
        let inside = &x * &b;
        let p_inside = project(&inside, &x).unwrap();
        assert!((p_inside - &inside).norm() <= 1e-10 * inside.norm());

        let y = centred_gauss_vec(&mut rng, 25);
        let ortho = &y - project(&y, &x).unwrap();
        let p_ortho = project(&ortho, &x).unwrap();
        assert!(p_ortho.norm() <= 1e-10 * ortho.norm());
    }

    #[test]
    fn project_is_idempotent_on_random_input() {
        let mut rng = rng_from(29);
        for _ in 0..20 {
            let x = centred_gauss(&mut rng, 30, 4);
            let y = centred_gauss_vec(&mut rng, 30);
            let py = project(&y, &x).unwrap();
            let ppy = project(&py, &x).unwrap();
            assert!((ppy - &py).norm() <= 1e-10 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn corr_basics() {
        let mut rng = rng_from(31);
        let u = centred_gauss_vec(&mut rng, 15);
        assert!(close(corr(&u, &u).unwrap(), 1.0, 1e-12));
        assert!(close(corr(&u, &(-&u)).unwrap(), -1.0, 1e-12));
        let a = DVector::from_column_slice(&[1.0, -1.0, 0.0]);
        let b = DVector::from_column_slice(&[0.0, 1.0, -1.0]);
        // hand arithmetic: dot = -1, norms sqrt(2) each
        assert!(close(corr(&a, &b).unwrap(), -0.5, 1e-12));
        assert!(matches!(
            corr(&DVector::zeros(3), &a),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn multiple_corr_span_cases() {
        let mut rng = rng_from(37);
        let x = centred_gauss(&mut rng, 30, 3);
        let b = DVector::from_column_slice(&[0.3, -1.2, 0.7]);
        let inside = &x * &b;
        assert!(close(multiple_corr(&inside, &x).unwrap(), 1.0, 1e-10));
        let y = centred_gauss_vec(&mut rng, 30);
        let ortho = &y - project(&y, &x).unwrap();
        assert!(multiple_corr(&ortho, &x).unwrap() < 1e-10);
    }

    #[test]
    fn multiple_corr_is_supremum_over_random_directions() {
        let mut rng = rng_from(41);
        let x = centred_gauss(&mut rng, 40, 4);
        let u = centred_gauss_vec(&mut rng, 40);
        let r = multiple_corr(&u, &x).unwrap();
        let mut best: f64 = 0.0;
        for _ in 0..10_000 {
            let alpha: DVector<f64> =
                DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
            let xa = &x * &alpha;
            if xa.norm() < 1e-12 {
                continue;
            }
            best = best.max(u.dot(&xa) / (u.norm() * xa.norm()));
        }
        // the projection value is the supremum: the search may never beat it
        // beyond rounding, and should come close from below
        assert!(
            best <= r + 1e-6,
            "search exceeded the supremum: {best} > {r}"
        );
        assert!(best >= r - 0.05, "search should approach the supremum");
    }

    #[test]
    fn multiple_corr_dominates_single_columns() {
        let mut rng = rng_from(43);
        for _ in 0..20 {
            let x = centred_gauss(&mut rng, 35, 5);
            let u = centred_gauss_vec(&mut rng, 35);
            let r = multiple_corr(&u, &x).unwrap();
            for j in 0..5 {
                let cj = corr(&u, &x.column(j).into_owned()).unwrap().abs();
                assert!(r >= cj - 1e-10);
            }
        }
    }

    #[test]
    fn block_corr_orthogonal_and_shared_column() {
        // orthogonal spans via disjoint coordinate support
        let mut a = DMatrix::zeros(8, 2);
        a[(0, 0)] = 1.0;
        a[(1, 0)] = -1.0;
        a[(2, 1)] = 1.0;
        a[(3, 1)] = -1.0;
        let mut b = DMatrix::zeros(8, 2);
        b[(4, 0)] = 1.0;
        b[(5, 0)] = -1.0;
        b[(6, 1)] = 1.0;
        b[(7, 1)] = -1.0;
        assert!(block_corr(&a, &b).unwrap() < 1e-12);

        let mut rng = rng_from(47);
        let x = centred_gauss(&mut rng, 20, 3);
        let shared =
            DMatrix::from_columns(&[x.column(0), centred_gauss(&mut rng, 20, 1).column(0)]);
        let other = DMatrix::from_columns(&[x.column(0)]);
        assert!(close(block_corr(&shared, &other).unwrap(), 1.0, 1e-10));
    }

    #[test]
    fn block_corr_matches_eigen_oracle_and_is_symmetric() {
        let mut rng = rng_from(53);
        for _ in 0..20 {
            let xa = centred_gauss(&mut rng, 60, 3);
            let xb = centred_gauss(&mut rng, 60, 4);
            let got = block_corr(&xa, &xb).unwrap();

            // eigen oracle: sqrt(lambda_max(R_A P_B R_A^T)) with
            // R_A = (X_A^T X_A)^{-1/2} X_A^T and dense P_B.
            let gram_a = xa.transpose() * &xa;
            let eig = gram_a.symmetric_eigen();
            let mut inv_sqrt = DMatrix::zeros(3, 3);
            for i in 0..3 {
                let li = eig.eigenvalues[i];
                let col = eig.eigenvectors.column(i);
                inv_sqrt += col * col.transpose() / li.sqrt();
            }
            let ra = &inv_sqrt * xa.transpose();
            let pb = &xb * (xb.transpose() * &xb).try_inverse().unwrap() * xb.transpose();
            let m = &ra * pb * ra.transpose();
            let lam_max = m.symmetric_eigen().eigenvalues.max();
            assert!(close(got, lam_max.sqrt(), 1e-8));

            let flipped = block_corr(&xb, &xa).unwrap();
            assert!((got - flipped).abs() <= 1e-10);
            assert!(got < 1.0 - 1e-8);
        }
    }

    #[test]
    fn block_corr_rejects_rank_deficient_blocks() {
        let mut rng = rng_from(59);
        let base = centred_gauss(&mut rng, 20, 2);
        let xa = DMatrix::from_columns(&[base.column(0), base.column(0)]);
        let xb = centred_gauss(&mut rng, 20, 2);
        assert!(matches!(
            block_corr(&xa, &xb),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn cochran_empty_f_reduces_to_marginal_fit() {
        let mut rng = rng_from(61);
        let x = centred_gauss(&mut rng, 30, 4);
        let y = centred_gauss_vec(&mut rng, 30);
        let (lhs, rhs) = cochran_decompose(&y, &[1], &[], &x).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn cochran_orthogonal_blocks_drop_companion_term() {
        // X_E^T X_F = 0 exactly by disjoint coordinate support
        let mut x = DMatrix::zeros(10, 3);
        x[(0, 0)] = 1.0;
        x[(1, 0)] = -1.0;
        x[(2, 1)] = 2.0;
        x[(3, 1)] = -2.0;
        x[(4, 2)] = 1.5;
        x[(5, 2)] = -1.5;
        let mut rng = rng_from(67);
        let y = centred_gauss_vec(&mut rng, 10);
        let (lhs, rhs) = cochran_decompose(&y, &[0], &[1, 2], &x).unwrap();
        assert!((lhs[0] - rhs[0]).abs() <= 1e-10 * (1.0 + lhs[0].abs()));
    }

    #[test]
    fn cochran_identity_on_random_instances() {
        let mut rng = rng_from(71);
        for _ in 0..200 {
            let x = centred_gauss(&mut rng, 50, 4);
            let y = centred_gauss_vec(&mut rng, 50);
            let (lhs, rhs) = cochran_decompose(&y, &[0], &[1, 2, 3], &x).unwrap();
            assert!((lhs[0] - rhs[0]).abs() <= 1e-8 * (1.0 + lhs[0].abs()));
        }
    }

    #[test]
    fn cochran_rejects_overlap() {
        let mut rng = rng_from(73);
        let x = centred_gauss(&mut rng, 20, 3);
        let y = centred_gauss_vec(&mut rng, 20);
        assert!(matches!(
            cochran_decompose(&y, &[0, 1], &[1, 2], &x),
            Err(Error::OverlappingSets(1))
        ));
    }
}
