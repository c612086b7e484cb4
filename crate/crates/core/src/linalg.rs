//! Small dense and matrix-free linear algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector};

/// Relative threshold on `|R_ii| / ||M||_F` below which a QR factor is
/// treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Thin QR orthonormalization with a nonnegative diagonal on `R`.
///
/// Returns the `d x k` orthonormal factor, or the index of the first column
/// whose diagonal entry of `R` vanishes relative to the matrix scale.
pub fn thin_qr_orthonormalize(m: &DMatrix<f64>) -> Result<DMatrix<f64>, usize> {
    let (rows, cols) = m.shape();
    if cols > rows {
        return Err(rows);
    }
    let scale = m.norm();
    if scale == 0.0 {
        return Err(0);
    }
    let qr = m.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    for i in 0..cols {
        let rii = r[(i, i)];
        if rii.abs() <= RANK_TOL * scale {
            return Err(i);
        }
        if rii < 0.0 {
            q.column_mut(i).neg_mut();
        }
    }
    Ok(q)
}

/// Max-abs entry of `U^T U - I`.
pub fn orthonormality_error(u: &DMatrix<f64>) -> f64 {
    let g = u.transpose() * u;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Singular values in nonincreasing order.
pub fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Largest singular value; zero for an empty matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values_desc(m).first().copied().unwrap_or(0.0)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_extreme_eigenvalues(g: &DMatrix<f64>) -> (f64, f64) {
    let eig = g.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Outcome of an iterative Krylov solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
}

/// Conjugate gradient for a symmetric positive semidefinite operator.
///
/// `x` is used as the starting point and overwritten with the result. The
/// iteration stops once `||b - Op x|| <= tol * max(||b||, tiny)`.
pub fn conjugate_gradient<F>(op: F, b: &DVector<f64>, x: &mut DVector<f64>, tol: f64, max_iters: usize) -> CgOutcome
where
    F: Fn(&DVector<f64>, &mut DVector<f64>),
{
    let n = b.len();
    let b_norm = b.norm();
    let target = tol * b_norm.max(f64::MIN_POSITIVE);
    let mut ap = DVector::zeros(n);
    op(x, &mut ap);
    let mut r = b - &ap;
    let mut rr = r.norm_squared();
    if rr.sqrt() <= target {
        return CgOutcome { iterations: 0, residual_norm: rr.sqrt(), converged: true };
    }
    let mut p = r.clone();
    for it in 1..=max_iters {
        op(&p, &mut ap);
        let pap = p.dot(&ap);
        if pap <= 0.0 || !pap.is_finite() {
            // direction in the null space: the system is inconsistent along it
            return CgOutcome { iterations: it, residual_norm: rr.sqrt(), converged: false };
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rr_new = r.norm_squared();
        if rr_new.sqrt() <= target {
            return CgOutcome { iterations: it, residual_norm: rr_new.sqrt(), converged: true };
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p *= beta;
        p += &r;
    }
    CgOutcome { iterations: max_iters, residual_norm: rr.sqrt(), converged: false }
}

/// CGLS: least-squares solution of `min ||B x - y||` started from zero, so
/// the iterates converge to the minimum-norm solution.
///
/// Stops when the normal-equations residual `||B^T (y - B x)||` falls below
/// `tol * ||B^T y||` or stagnates. Returns the solution and the final
/// residual norm `||y - B x||`.
pub fn cgls<F, G>(
    apply: F,
    adjoint: G,
    ncols: usize,
    y: &DVector<f64>,
    tol: f64,
    max_iters: usize,
) -> (DVector<f64>, f64)
where
    F: Fn(&DVector<f64>, &mut DVector<f64>),
    G: Fn(&DVector<f64>, &mut DVector<f64>),
{
    let mut x = DVector::zeros(ncols);
    let mut r = y.clone();
    let mut s = DVector::zeros(ncols);
    adjoint(&r, &mut s);
    let s0 = s.norm();
    if s0 == 0.0 {
        return (x, r.norm());
    }
    let mut p = s.clone();
    let mut gamma = s.norm_squared();
    let mut q = DVector::zeros(y.len());
    for _ in 0..max_iters {
        apply(&p, &mut q);
        let qq = q.norm_squared();
        if qq <= 0.0 || !qq.is_finite() {
            break;
        }
        let alpha = gamma / qq;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &q, 1.0);
        adjoint(&r, &mut s);
        let gamma_new = s.norm_squared();
        if gamma_new.sqrt() <= tol * s0 {
            break;
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p *= beta;
        p += &s;
    }
    // recompute the residual to avoid drift from the recurrence
    apply(&x, &mut q);
    let res = (y - &q).norm();
    (x, res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_keeps_orthonormal_input() {
        let u = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.6, 0.0, 0.8]);
        let q = thin_qr_orthonormalize(&u).unwrap();
        assert!((q - u).abs().max() < 1e-12);
    }

    #[test]
    fn qr_flags_rank_deficiency() {
        let u = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 0.0, 0.0]);
        assert_eq!(thin_qr_orthonormalize(&u), Err(1));
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let mut x = DVector::zeros(3);
        let out = conjugate_gradient(|v, out| out.copy_from(&(&a * v)), &b, &mut x, 1e-14, 50);
        assert!(out.converged);
        assert!((&a * &x - &b).norm() < 1e-12);
    }

    #[test]
    fn cgls_finds_min_norm_solution() {
        // underdetermined: x1 + x2 = 2 has minimum-norm solution (1, 1)
        let b = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let y = DVector::from_vec(vec![2.0]);
        let (x, res) =
            cgls(|v, out| out.copy_from(&(&b * v)), |v, out| out.copy_from(&(b.transpose() * v)), 2, &y, 1e-14, 20);
        assert!(res < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
