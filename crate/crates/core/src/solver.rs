//! Mixed `l2,1` recovery in coefficient space.
//!
//! Solves group basis pursuit
//!
//! ```text
//! minimize  sum_j ||c_j||_2   subject to  B c = y            (equality)
//! minimize  sum_j ||c_j||_2   subject to  ||B c - y||_2 <= eta  (noisy)
//! ```
//!
//! with an alternating-direction splitting. Every step has a closed form
//! except the least-squares step, which uses warm-started conjugate
//! gradients on matrix-free products with `B` and `B^T`.
//!
//! Convergence is declared from a duality-gap certificate: the splitting
//! produces a dual point `nu`, which is scaled into the dual feasible set
//! `{ max_j ||B_j^T nu||_2 <= 1 }` and compared against the primal
//! objective. All three reported residuals are recomputed from scratch by
//! [`certify`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{coherence, FrameError, SubspaceCollection};
use crate::linalg::{cgls, conjugate_gradient};
use crate::measurement::CoefficientOperator;
use crate::signals::BlockSignal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("measurement vector has length {found}, operator produces {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error(
        "no coefficient vector reaches the constraint set (distance {distance:e} from the range, allowed {allowed:e})"
    )]
    Infeasible { distance: f64, allowed: f64 },
    #[error("invalid solver parameter: {0}")]
    InvalidParams(String),
    #[error("collection is not mutually orthogonal (coherence {0:e})")]
    NotOrthogonal(f64),
    #[error("measurement coefficient {0} is zero")]
    ZeroCoefficient(usize),
    #[error("exhaustive search too large ({0} operations)")]
    TooLarge(f64),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub tol_gap: f64,
    pub rho: f64,
    pub adaptive_rho: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            max_iters: 20_000,
            tol_primal: 1e-9,
            tol_dual: 1e-9,
            tol_gap: 1e-7,
            rho: 1.0,
            adaptive_rho: true,
        }
    }
}

impl SolverParams {
    fn validate(&self) -> Result<(), SolverError> {
        let tols = [self.tol_primal, self.tol_dual, self.tol_gap];
        if tols.iter().any(|t| !(*t >= 0.0)) {
            return Err(SolverError::InvalidParams("tolerances must be nonnegative".into()));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(SolverError::InvalidParams("rho must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidParams("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    MaxIters,
    Infeasible,
}

/// Result of a recovery solve.
///
/// `primal_residual` is `||B c - y|| / (1 + ||y||)` for the equality program
/// and `max(0, ||B c - y|| - eta) / (1 + ||y||)` for the noisy one;
/// `dual_residual` is `max(0, max_j ||B_j^T nu|| - 1)`; `duality_gap` is the
/// gap against the scaled dual point divided by `max(1, objective)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySolution {
    pub estimate: BlockSignal,
    pub status: SolverStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub objective: f64,
    /// Dual point `nu` in measurement space.
    pub dual: DVector<f64>,
    /// Noise level of the constraint; `None` for the equality program.
    pub eta: Option<f64>,
    pub params: SolverParams,
}

/// Proximal map of `tau * ||.||_2`.
pub fn block_soft_threshold(v: &DVector<f64>, tau: f64) -> DVector<f64> {
    let mut out = v.clone();
    shrink_in_place(out.as_mut_slice(), tau);
    out
}

fn shrink_in_place(v: &mut [f64], tau: f64) {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm <= tau {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else if tau > 0.0 {
        let f = 1.0 - tau / nrm;
        v.iter_mut().for_each(|x| *x *= f);
    }
}

fn shrink_blocks(v: &mut DVector<f64>, offsets: &[usize], tau: f64) {
    let s = v.as_mut_slice();
    for w in offsets.windows(2) {
        shrink_in_place(&mut s[w[0]..w[1]], tau);
    }
}

pub(crate) fn norm_21_flat(c: &DVector<f64>, offsets: &[usize]) -> f64 {
    offsets.windows(2).map(|w| c.rows(w[0], w[1] - w[0]).norm()).sum()
}

struct Measures {
    primal: f64,
    dual: f64,
    gap: f64,
    objective: f64,
}

fn measure(b: &CoefficientOperator, y: &DVector<f64>, c: &DVector<f64>, nu: &DVector<f64>, eta: f64) -> Measures {
    let y_norm = y.norm();
    let objective = norm_21_flat(c, b.offsets());
    let res = (b.apply(c) - y).norm();
    let primal = (res - eta).max(0.0) / (1.0 + y_norm);
    let max_block = b.block_adjoint_norms(nu).into_iter().fold(0.0, f64::max);
    let dual = (max_block - 1.0).max(0.0);
    let scale = 1.0 / max_block.max(1.0);
    let dual_obj = (scale * (y.dot(nu) - eta * nu.norm())).max(0.0);
    let gap = (objective - dual_obj) / objective.max(1.0);
    Measures { primal, dual, gap, objective }
}

fn check_y(b: &CoefficientOperator, y: &DVector<f64>) -> Result<(), SolverError> {
    if y.len() != b.nrows() {
        return Err(SolverError::DimMismatch { expected: b.nrows(), found: y.len() });
    }
    Ok(())
}

/// Least-squares solution of minimum norm and its residual, refined a few
/// times to reach working precision on ill-conditioned operators.
fn least_squares(b: &CoefficientOperator, y: &DVector<f64>) -> (DVector<f64>, f64) {
    let iters = 4 * b.ncols().min(b.nrows()) + 50;
    let mut x = DVector::zeros(b.ncols());
    let mut res = y.norm();
    let mut r = y.clone();
    for _ in 0..4 {
        let (dx, _) = cgls(|v, o| b.apply_into(v, o), |v, o| b.adjoint_into(v, o), b.ncols(), &r, 1e-15, iters);
        let candidate = &x + dx;
        let new_r = y - b.apply(&candidate);
        let new_res = new_r.norm();
        if new_res >= res * (1.0 - 1e-3) && new_res >= 0.0 {
            if new_res < res {
                x = candidate;
                res = new_res;
            }
            break;
        }
        x = candidate;
        res = new_res;
        r = new_r;
    }
    (x, res)
}

fn zero_solution(
    b: &CoefficientOperator,
    y: &DVector<f64>,
    eta: Option<f64>,
    params: &SolverParams,
) -> RecoverySolution {
    let c = DVector::zeros(b.ncols());
    let nu = DVector::zeros(b.nrows());
    let m = measure(b, y, &c, &nu, eta.unwrap_or(0.0));
    RecoverySolution {
        estimate: estimate_signal(b, c),
        status: SolverStatus::Converged,
        iterations: 0,
        primal_residual: m.primal,
        dual_residual: m.dual,
        duality_gap: m.gap,
        objective: m.objective,
        dual: nu,
        eta,
        params: *params,
    }
}

fn estimate_signal(b: &CoefficientOperator, c: DVector<f64>) -> BlockSignal {
    BlockSignal::from_parts(c, b.offsets().to_vec(), b.label().to_string()).expect("operator offsets")
}

/// `params.rho` measured in units of the largest block of the least-squares
/// point, so that rescaling `y` rescales every iterate.
fn initial_rho(params: &SolverParams, c_ls: &DVector<f64>, offsets: &[usize]) -> f64 {
    let scale = offsets.windows(2).map(|w| c_ls.rows(w[0], w[1] - w[0]).norm()).fold(0.0, f64::max);
    if scale > 0.0 && scale.is_finite() {
        params.rho / scale
    } else {
        params.rho
    }
}

/// Residual balancing: returns the factor by which rho was multiplied.
fn balance(rho: &mut f64, r: f64, s: f64) -> f64 {
    const MU: f64 = 10.0;
    const TAU: f64 = 2.0;
    if r > MU * s && *rho < 1e8 {
        *rho *= TAU;
        TAU
    } else if s > MU * r && *rho > 1e-8 {
        *rho /= TAU;
        1.0 / TAU
    } else {
        1.0
    }
}

const BALANCE_EVERY: usize = 10;
/// Penalty adaptation stops here; fixed-penalty ADMM then converges.
const BALANCE_UNTIL: usize = 1000;

const POLISH_EVERY: usize = 50;
const NEWTON_STEPS: usize = 50;
const PRUNE: [f64; 2] = [1e-2, 1e-4];

/// Blocks of `z` that are nonzero.
fn support_of(z: &DVector<f64>, offsets: &[usize]) -> Vec<usize> {
    offsets
        .windows(2)
        .enumerate()
        .filter(|(_, w)| z.rows(w[0], w[1] - w[0]).iter().any(|v| *v != 0.0))
        .map(|(j, _)| j)
        .collect()
}

fn support_offsets(offsets: &[usize], support: &[usize]) -> Vec<usize> {
    let mut out = vec![0];
    for &j in support {
        out.push(out.last().unwrap() + offsets[j + 1] - offsets[j]);
    }
    out
}

/// Stationarity rows `c_j - ||c_j|| v_j` with their Jacobian in `c` at fixed
/// `v` and the repeated block norms, which scale the Jacobian in `v`. The
/// rows stay bounded as a block shrinks, unlike `c_j / ||c_j|| - v_j`.
fn stationarity(c: &DVector<f64>, v: &DVector<f64>, local: &[usize]) -> (DVector<f64>, DMatrix<f64>, DVector<f64>) {
    let n = c.len();
    let mut f = DVector::zeros(n);
    let mut jac = DMatrix::identity(n, n);
    let mut norms = DVector::zeros(n);
    for w in local.windows(2) {
        let len = w[1] - w[0];
        let block = c.rows(w[0], len);
        let vj = v.rows(w[0], len);
        let nrm = block.norm();
        f.rows_mut(w[0], len).copy_from(&(block - vj * nrm));
        norms.rows_mut(w[0], len).fill(nrm);
        if nrm > 0.0 {
            let unit = block / nrm;
            let mut view = jac.view_mut((w[0], w[0]), (len, len));
            view -= vj * unit.transpose();
        }
    }
    (f, jac, norms)
}

fn scatter(b: &CoefficientOperator, support: &[usize], local: &[usize], cs: &DVector<f64>) -> DVector<f64> {
    let offsets = b.offsets();
    let mut c = DVector::zeros(b.ncols());
    for (i, &j) in support.iter().enumerate() {
        let len = local[i + 1] - local[i];
        c.rows_mut(offsets[j], len).copy_from(&cs.rows(local[i], len));
    }
    c
}

fn gather(c: &DVector<f64>, offsets: &[usize], support: &[usize]) -> DVector<f64> {
    let parts: Vec<f64> = support
        .iter()
        .flat_map(|&j| c.rows(offsets[j], offsets[j + 1] - offsets[j]).iter().copied().collect::<Vec<_>>())
        .collect();
    DVector::from_vec(parts)
}

fn newton_step(jac: DMatrix<f64>, f: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = jac.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max();
    svd.solve(&(-f), eps).ok()
}

/// Newton's method on the optimality system restricted to `support` for the
/// equality program, started from an iterate `c` and dual `nu`.
fn polish_equality(
    b: &CoefficientOperator,
    y: &DVector<f64>,
    support: &[usize],
    c: &DVector<f64>,
    nu: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let bs = b.columns(support);
    let local = support_offsets(b.offsets(), support);
    let (p, rows) = (bs.ncols(), bs.nrows());
    let residual = |x: &DVector<f64>| -> Option<(DVector<f64>, DMatrix<f64>)> {
        let (cs, nu) = (x.rows(0, p).into_owned(), x.rows(p, rows).into_owned());
        let (g, h, norms) = stationarity(&cs, &bs.tr_mul(&nu), &local);
        let mut f = DVector::zeros(p + rows);
        f.rows_mut(0, p).copy_from(&g);
        f.rows_mut(p, rows).copy_from(&(&bs * &cs - y));
        let mut jac = DMatrix::zeros(p + rows, p + rows);
        jac.view_mut((0, 0), (p, p)).copy_from(&h);
        jac.view_mut((0, p), (p, rows)).copy_from(&(-DMatrix::from_diagonal(&norms) * bs.transpose()));
        jac.view_mut((p, 0), (rows, p)).copy_from(&bs);
        Some((f, jac))
    };
    let mut x = DVector::zeros(p + rows);
    x.rows_mut(0, p).copy_from(&gather(c, b.offsets(), support));
    x.rows_mut(p, rows).copy_from(nu);
    let x = damped_newton(residual, x, 1e-15 * (1.0 + y.norm()))?;
    let nu = refine_dual(b, support, &bs, &x.rows(p, rows).into_owned());
    Some((scatter(b, support, &local, &x.rows(0, p).into_owned()), nu))
}

/// Over the affine set `{ nu : B_S^T nu = B_S^T nu0 }`, minimize the largest
/// off-support `||B_j^T nu||` with a log-barrier method in the null-space
/// coordinates of `B_S^T`. Returns `nu0` when that set is a single point.
fn refine_dual(b: &CoefficientOperator, support: &[usize], bs: &DMatrix<f64>, nu0: &DVector<f64>) -> DVector<f64> {
    let rows = bs.nrows();
    let svd = bs.clone().svd(true, false);
    let u = svd.u.as_ref().expect("requested");
    let top = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|v| **v > 1e-12 * top).count();
    let null = null_complement(u, rank, rows);
    let q = null.ncols();
    let off: Vec<usize> = (0..b.num_blocks()).filter(|j| !support.contains(j)).collect();
    if q == 0 || off.is_empty() {
        return nu0.clone();
    }
    let boff = b.columns(&off);
    let local = support_offsets(b.offsets(), &off);
    let mt = boff.tr_mul(&null);
    let qv = boff.tr_mul(nu0);
    let blocks: Vec<(DMatrix<f64>, DVector<f64>)> = local
        .windows(2)
        .map(|w| (mt.rows(w[0], w[1] - w[0]).into_owned(), qv.rows(w[0], w[1] - w[0]).into_owned()))
        .collect();
    let level = |t: &DVector<f64>| blocks.iter().map(|(m, c)| (m * t + c).norm()).fold(0.0, f64::max);
    let start = level(&DVector::zeros(q));
    let mut t = DVector::zeros(q);
    let mut gamma = 1.01 * start + 1e-12;
    let dim = q + 1;
    let mut tau = 1.0 / start.max(1e-300);
    let count = blocks.len() as f64;
    while 2.0 * count / tau > 1e-14 * start {
        for _ in 0..60 {
            let mut grad = DVector::zeros(dim);
            grad[q] = tau;
            let mut hess = DMatrix::zeros(dim, dim);
            for (m, c) in &blocks {
                let r = m * &t + c;
                let sl = gamma * gamma - r.norm_squared();
                let mut ds = DVector::zeros(dim);
                ds.rows_mut(0, q).copy_from(&(m.tr_mul(&r) * -2.0));
                ds[q] = 2.0 * gamma;
                grad -= &ds / sl;
                hess += &ds * ds.transpose() / (sl * sl);
                let mut d2 = DMatrix::zeros(dim, dim);
                d2.view_mut((0, 0), (q, q)).copy_from(&(m.tr_mul(m) * -2.0));
                d2[(q, q)] = 2.0;
                hess -= d2 / sl;
            }
            let Some(chol) = hess.clone().cholesky() else { break };
            let step = -chol.solve(&grad);
            let decrement = -grad.dot(&step);
            if decrement < 1e-12 {
                break;
            }
            let phi = |t: &DVector<f64>, g: f64| -> Option<f64> {
                let mut val = tau * g;
                for (m, c) in &blocks {
                    let sl = g * g - (m * t + c).norm_squared();
                    if !(sl > 0.0) {
                        return None;
                    }
                    val -= sl.ln();
                }
                Some(val)
            };
            let f0 = phi(&t, gamma).expect("strictly feasible");
            let mut a = 1.0;
            loop {
                let tt = &t + step.rows(0, q) * a;
                let gg = gamma + step[q] * a;
                if gg > 0.0 && phi(&tt, gg).is_some_and(|f| f <= f0 - 0.25 * a * decrement) {
                    t = tt;
                    gamma = gg;
                    break;
                }
                a *= 0.5;
                if a < 1e-12 {
                    break;
                }
            }
            if a < 1e-12 {
                break;
            }
        }
        tau *= 10.0;
    }
    if level(&t) < start {
        nu0 + null * t
    } else {
        nu0.clone()
    }
}

/// Orthonormal basis of the complement of the first `rank` columns of `u`.
fn null_complement(u: &DMatrix<f64>, rank: usize, rows: usize) -> DMatrix<f64> {
    let mut out: Vec<DVector<f64>> = (0..rank).map(|i| u.column(i).into_owned()).collect();
    for e in 0..rows {
        if out.len() == rows {
            break;
        }
        let mut v = DVector::zeros(rows);
        v[e] = 1.0;
        // two passes keep the basis orthogonal to working precision
        for _ in 0..2 {
            for w in &out {
                let p = w.dot(&v);
                v -= w * p;
            }
        }
        let n = v.norm();
        if n > 1e-6 {
            out.push(v / n);
        }
    }
    if out.len() == rank {
        return DMatrix::zeros(rows, 0);
    }
    DMatrix::from_columns(&out[rank..])
}

/// Newton iteration with backtracking on `||F||`.
fn damped_newton(
    residual: impl Fn(&DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)>,
    mut x: DVector<f64>,
    tol: f64,
) -> Option<DVector<f64>> {
    let (mut f, mut jac) = residual(&x)?;
    for _ in 0..NEWTON_STEPS {
        let fn0 = f.norm();
        if fn0 <= tol {
            break;
        }
        let step = newton_step(jac.clone(), &f)?;
        let mut t = 1.0;
        loop {
            let trial = &x + &step * t;
            if let Some((ft, jt)) = residual(&trial) {
                if ft.norm() < (1.0 - 1e-4 * t) * fn0 {
                    x = trial;
                    f = ft;
                    jac = jt;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-10 {
                return Some(x);
            }
        }
    }
    Some(x)
}

/// Newton's method on the optimality system of the noisy program with the
/// constraint active: `c_j / ||c_j|| = mu B_j^T (y - B c)`, `||B c - y|| = eta`.
fn polish_noisy(
    b: &CoefficientOperator,
    y: &DVector<f64>,
    eta: f64,
    support: &[usize],
    c: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let bs = b.columns(support);
    let local = support_offsets(b.offsets(), support);
    let p = bs.ncols();
    let gram = bs.tr_mul(&bs);
    let cs = gather(c, b.offsets(), support);
    let corr = bs.tr_mul(&(y - &bs * &cs));
    let denom = corr.norm_squared();
    if !(denom > 0.0) {
        return None;
    }
    let residual = |x: &DVector<f64>| -> Option<(DVector<f64>, DMatrix<f64>)> {
        let (cs, mu) = (x.rows(0, p).into_owned(), x[p]);
        let res = y - &bs * &cs;
        let corr = bs.tr_mul(&res);
        let (g, h, norms) = stationarity(&cs, &(&corr * mu), &local);
        let scaled = DMatrix::from_diagonal(&norms);
        let mut f = DVector::zeros(p + 1);
        f.rows_mut(0, p).copy_from(&g);
        // scaled so the row reads as ||B c - y|| - eta near the solution
        f[p] = 0.5 * (res.norm_squared() - eta * eta) / eta;
        let mut jac = DMatrix::zeros(p + 1, p + 1);
        jac.view_mut((0, 0), (p, p)).copy_from(&(h + &scaled * &gram * mu));
        jac.view_mut((0, p), (p, 1)).copy_from(&(-(&scaled * &corr)));
        jac.view_mut((p, 0), (1, p)).copy_from(&(-corr.transpose() / eta));
        Some((f, jac))
    };
    let mut x = DVector::zeros(p + 1);
    x.rows_mut(0, p).copy_from(&cs);
    // least-squares fit of the multiplier to c_j / ||c_j|| = mu B_j^T r
    let unit = DVector::from_iterator(
        p,
        local.windows(2).flat_map(|w| {
            let block = cs.rows(w[0], w[1] - w[0]);
            let nrm = block.norm();
            block.iter().map(move |v| if nrm > 0.0 { v / nrm } else { 0.0 }).collect::<Vec<_>>()
        }),
    );
    x[p] = unit.dot(&corr) / denom;
    let x = damped_newton(residual, x, 1e-15 * (1.0 + y.norm()))?;
    let (cs, mu) = (x.rows(0, p).into_owned(), x[p]);
    if !(mu > 0.0) {
        return None;
    }
    let nu = (y - &bs * &cs) * mu;
    Some((scatter(b, support, &local, &cs), nu))
}

/// Supports to polish on: that of `z`, that of `z` without its relatively
/// tiny blocks, and that of `z` together with every block whose dual
/// constraint is nearly active. Blocks zeroed by the
/// shrinkage start from the unshrunk iterate `c`.
fn polish_candidates(
    b: &CoefficientOperator,
    support: &[usize],
    z: &DVector<f64>,
    c: &DVector<f64>,
    nu: &DVector<f64>,
) -> Vec<(Vec<usize>, DVector<f64>)> {
    let mut out = vec![(support.to_vec(), z.clone())];
    let offsets = b.offsets();
    let sizes: Vec<f64> = support.iter().map(|&j| z.rows(offsets[j], offsets[j + 1] - offsets[j]).norm()).collect();
    let top = sizes.iter().copied().fold(0.0, f64::max);
    for level in PRUNE {
        let pruned: Vec<usize> =
            support.iter().zip(&sizes).filter(|(_, &v)| v >= level * top).map(|(&j, _)| j).collect();
        if pruned.len() < support.len() && out.iter().all(|(c, _)| *c != pruned) {
            out.push((pruned, z.clone()));
        }
    }
    let norms = b.block_adjoint_norms(nu);
    let peak = norms.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        let wide: Vec<usize> =
            (0..norms.len()).filter(|j| support.contains(j) || norms[*j] >= (1.0 - 1e-3) * peak).collect();
        if wide.len() > support.len() {
            let mut start = z.clone();
            for &j in &wide {
                if !support.contains(&j) {
                    let len = offsets[j + 1] - offsets[j];
                    start.rows_mut(offsets[j], len).copy_from(&c.rows(offsets[j], len));
                }
            }
            out.push((wide, start));
        }
    }
    out
}

/// Equality-constrained group basis pursuit `min ||c||_{2,1}` s.t. `B c = y`.
pub fn solve_equality(
    b: &CoefficientOperator,
    y: &DVector<f64>,
    params: &SolverParams,
) -> Result<RecoverySolution, SolverError> {
    params.validate()?;
    check_y(b, y)?;
    let y_norm = y.norm();
    if y_norm == 0.0 {
        return Ok(zero_solution(b, y, None, params));
    }
    let (c_ls, distance) = least_squares(b, y);
    let allowed = params.tol_primal.max(1e-12) * (1.0 + y_norm);
    if distance > allowed {
        return Err(SolverError::Infeasible { distance, allowed });
    }

    let n = b.ncols();
    let offsets = b.offsets().to_vec();
    let cg_iters = 10 * b.ncols().min(b.nrows()) + 100;
    let cg_target = 1e-3 * params.tol_primal.max(1e-13) * (1.0 + y_norm);
    let normal = |v: &DVector<f64>, out: &mut DVector<f64>| {
        let t = b.adjoint(v);
        b.apply_into(&t, out);
    };

    let mut rho = initial_rho(params, &c_ls, &offsets);
    let mut z = DVector::zeros(n);
    let mut u = DVector::zeros(n);
    let mut w = DVector::zeros(b.nrows());
    let mut c = DVector::zeros(n);
    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    let mut last_support = Vec::new();

    for it in 1..=params.max_iters {
        // c = argmin { ||c - (z - u)|| : B c = y } = v - B^T w with B B^T w = B v - y
        let v = &z - &u;
        let rhs = b.apply(&v) - y;
        let rhs_norm = rhs.norm();
        if rhs_norm > 0.0 {
            conjugate_gradient(normal, &rhs, &mut w, (cg_target / rhs_norm).min(1e-2), cg_iters);
        }
        c.copy_from(&v);
        c -= b.adjoint(&w);

        let z_old = z.clone();
        z.copy_from(&c);
        z += &u;
        shrink_blocks(&mut z, &offsets, 1.0 / rho);
        u += &c;
        u -= &z;

        let r = (&c - &z).norm();
        let s = rho * (&z - &z_old).norm();
        // u = -B^T w up to the change in z, so -rho w is the dual point
        let nu = &w * (-rho);
        let m = measure(b, y, &c, &nu, 0.0);
        let merit = m.primal.max(m.dual).max(m.gap.abs());
        if best.as_ref().is_none_or(|(bm, _, _)| merit < *bm) {
            best = Some((merit, c.clone(), nu.clone()));
        }
        if r <= params.tol_primal * (1.0 + c.norm())
            && m.primal <= params.tol_primal
            && m.dual <= params.tol_dual
            && m.gap <= params.tol_gap
        {
            return Ok(RecoverySolution {
                estimate: estimate_signal(b, c),
                status: SolverStatus::Converged,
                iterations: it,
                primal_residual: m.primal,
                dual_residual: m.dual,
                duality_gap: m.gap,
                objective: m.objective,
                dual: nu,
                eta: None,
                params: *params,
            });
        }
        if it % POLISH_EVERY == 0 {
            let support = support_of(&z, &offsets);
            if !support.is_empty() && support == last_support {
                for (cand, start) in polish_candidates(b, &support, &z, &c, &nu) {
                    let Some((pc, pnu)) = polish_equality(b, y, &cand, &start, &nu) else { continue };
                    let pm = measure(b, y, &pc, &pnu, 0.0);
                    if pm.primal <= params.tol_primal && pm.dual <= params.tol_dual && pm.gap <= params.tol_gap {
                        return Ok(RecoverySolution {
                            estimate: estimate_signal(b, pc),
                            status: SolverStatus::Converged,
                            iterations: it,
                            primal_residual: pm.primal,
                            dual_residual: pm.dual,
                            duality_gap: pm.gap,
                            objective: pm.objective,
                            dual: pnu,
                            eta: None,
                            params: *params,
                        });
                    }
                }
            }
            last_support = support;
        }
        if params.adaptive_rho && it % BALANCE_EVERY == 0 && it <= BALANCE_UNTIL {
            let f = balance(&mut rho, r, s);
            if f != 1.0 {
                u /= f;
                w /= f;
            }
        }
    }
    let (_, c, nu) = best.expect("at least one iteration");
    let m = measure(b, y, &c, &nu, 0.0);
    Ok(RecoverySolution {
        estimate: estimate_signal(b, c),
        status: SolverStatus::MaxIters,
        iterations: params.max_iters,
        primal_residual: m.primal,
        dual_residual: m.dual,
        duality_gap: m.gap,
        objective: m.objective,
        dual: nu,
        eta: None,
        params: *params,
    })
}

fn project_ball(p: &mut DVector<f64>, center: &DVector<f64>, radius: f64) {
    let mut d = &*p - center;
    let n = d.norm();
    if n > radius {
        d *= radius / n;
        p.copy_from(center);
        *p += d;
    }
}

/// Noise-constrained group basis pursuit `min ||c||_{2,1}` s.t. `||B c - y|| <= eta`.
pub fn solve_noisy(
    b: &CoefficientOperator,
    y: &DVector<f64>,
    eta: f64,
    params: &SolverParams,
) -> Result<RecoverySolution, SolverError> {
    params.validate()?;
    check_y(b, y)?;
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(SolverError::InvalidParams(format!("eta must be nonnegative, got {eta}")));
    }
    if eta == 0.0 {
        return solve_equality(b, y, params);
    }
    let y_norm = y.norm();
    if y_norm <= eta {
        return Ok(zero_solution(b, y, Some(eta), params));
    }
    let (c_ls, distance) = least_squares(b, y);
    let allowed = eta * (1.0 + 1e-9);
    if distance > allowed {
        return Err(SolverError::Infeasible { distance, allowed });
    }

    let n = b.ncols();
    let offsets = b.offsets().to_vec();
    let cg_iters = 10 * n + 100;
    // (I + B^T B) is well conditioned relative to B B^T
    let shifted = |v: &DVector<f64>, out: &mut DVector<f64>| {
        let t = b.apply(v);
        b.adjoint_into(&t, out);
        *out += v;
    };

    let mut rho = initial_rho(params, &c_ls, &offsets);
    let mut c = DVector::zeros(n);
    let mut z = DVector::zeros(n);
    let mut u = DVector::zeros(n);
    let mut w = y.clone();
    project_ball(&mut w, y, eta);
    let mut v = DVector::zeros(b.nrows());
    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    let mut last_support = Vec::new();

    for it in 1..=params.max_iters {
        let rhs = (&z - &u) + b.adjoint(&(&w - &v));
        conjugate_gradient(shifted, &rhs, &mut c, 1e-14, cg_iters);
        let bc = b.apply(&c);

        let z_old = z.clone();
        z.copy_from(&c);
        z += &u;
        shrink_blocks(&mut z, &offsets, 1.0 / rho);

        let w_old = w.clone();
        w.copy_from(&bc);
        w += &v;
        project_ball(&mut w, y, eta);

        u += &c;
        u -= &z;
        v += &bc;
        v -= &w;

        let r = ((&c - &z).norm_squared() + (&bc - &w).norm_squared()).sqrt();
        let s = rho * ((&z - &z_old) + b.adjoint(&(&w - &w_old))).norm();
        let nu = &v * (-rho);

        if it % BALANCE_EVERY == 0 || r <= params.tol_primal * (1.0 + c.norm()) || it == params.max_iters {
            let c_feas = pull_into_ball(b, y, eta, &c, &c_ls, distance);
            let (nu, m) = best_dual(b, y, eta, &c_feas, nu.clone());
            let merit = m.primal.max(m.dual).max(m.gap.abs());
            if best.as_ref().is_none_or(|(bm, _, _)| merit < *bm) {
                best = Some((merit, c_feas.clone(), nu.clone()));
            }
            if m.primal <= params.tol_primal && m.dual <= params.tol_dual && m.gap <= params.tol_gap {
                return Ok(RecoverySolution {
                    estimate: estimate_signal(b, c_feas),
                    status: SolverStatus::Converged,
                    iterations: it,
                    primal_residual: m.primal,
                    dual_residual: m.dual,
                    duality_gap: m.gap,
                    objective: m.objective,
                    dual: nu,
                    eta: Some(eta),
                    params: *params,
                });
            }
        }
        if it % POLISH_EVERY == 0 {
            let support = support_of(&z, &offsets);
            if !support.is_empty() && support == last_support {
                for (cand, start) in polish_candidates(b, &support, &z, &c, &nu) {
                    let Some((pc, pnu)) = polish_noisy(b, y, eta, &cand, &start) else { continue };
                    let pm = measure(b, y, &pc, &pnu, eta);
                    if pm.primal <= params.tol_primal && pm.dual <= params.tol_dual && pm.gap <= params.tol_gap {
                        return Ok(RecoverySolution {
                            estimate: estimate_signal(b, pc),
                            status: SolverStatus::Converged,
                            iterations: it,
                            primal_residual: pm.primal,
                            dual_residual: pm.dual,
                            duality_gap: pm.gap,
                            objective: pm.objective,
                            dual: pnu,
                            eta: Some(eta),
                            params: *params,
                        });
                    }
                }
            }
            last_support = support;
        }
        if params.adaptive_rho && it % BALANCE_EVERY == 0 && it <= BALANCE_UNTIL {
            let f = balance(&mut rho, r, s);
            if f != 1.0 {
                u /= f;
                v /= f;
            }
        }
    }
    let (_, c, nu) = best.expect("final iteration is always measured");
    let m = measure(b, y, &c, &nu, eta);
    Ok(RecoverySolution {
        estimate: estimate_signal(b, c),
        status: SolverStatus::MaxIters,
        iterations: params.max_iters,
        primal_residual: m.primal,
        dual_residual: m.dual,
        duality_gap: m.gap,
        objective: m.objective,
        dual: nu,
        eta: Some(eta),
        params: *params,
    })
}

/// Of the multiplier `nu` and the residual direction `y - B c` scaled to
/// dual feasibility (optimal when `c` is), keep the one with the smaller gap.
fn best_dual(
    b: &CoefficientOperator,
    y: &DVector<f64>,
    eta: f64,
    c: &DVector<f64>,
    nu: DVector<f64>,
) -> (DVector<f64>, Measures) {
    let m = measure(b, y, c, &nu, eta);
    let res = y - b.apply(c);
    let max_block = b.block_adjoint_norms(&res).into_iter().fold(0.0, f64::max);
    if max_block > 0.0 {
        let alt = res / max_block;
        let m_alt = measure(b, y, c, &alt, eta);
        if m_alt.gap.max(m_alt.dual) < m.gap.max(m.dual) {
            return (alt, m_alt);
        }
    }
    (nu, m)
}

/// Move `c` towards the least-squares point until the residual is at most
/// `eta`; the residual is convex along the segment.
fn pull_into_ball(
    b: &CoefficientOperator,
    y: &DVector<f64>,
    eta: f64,
    c: &DVector<f64>,
    c_ls: &DVector<f64>,
    r_ls: f64,
) -> DVector<f64> {
    let r = (b.apply(c) - y).norm();
    if r <= eta {
        return c.clone();
    }
    let t = if r > r_ls { ((r - eta) / (r - r_ls)).clamp(0.0, 1.0) } else { 1.0 };
    c + (c_ls - c) * t
}

/// Decoder for mutually orthogonal subspaces and a single measurement
/// `y = sum_j a_j x_j`: `c_j = U_j^T y / a_j`.
pub fn closed_form_orthogonal(
    y: &DVector<f64>,
    a: &[f64],
    collection: &SubspaceCollection,
) -> Result<BlockSignal, SolverError> {
    if a.len() != collection.len() {
        return Err(SolverError::DimMismatch { expected: collection.len(), found: a.len() });
    }
    if y.len() != collection.ambient_dim() {
        return Err(SolverError::DimMismatch { expected: collection.ambient_dim(), found: y.len() });
    }
    if collection.len() >= 2 {
        let lambda = coherence(collection)?.lambda;
        if lambda > 1e-10 {
            return Err(SolverError::NotOrthogonal(lambda));
        }
    }
    if let Some(j) = a.iter().position(|&v| v == 0.0) {
        return Err(SolverError::ZeroCoefficient(j));
    }
    let mut c = DVector::zeros(collection.coeff_dim());
    for (j, u) in collection.bases().iter().enumerate() {
        let block = u.tr_mul(y) / a[j];
        c.rows_mut(collection.offsets()[j], u.ncols()).copy_from(&block);
    }
    Ok(BlockSignal::from_coeffs(collection, c).expect("layout from collection"))
}

/// Outcome of the combinatorial search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub solution: Option<BlockSignal>,
    pub unique: bool,
    /// Size of the smallest fitting support.
    pub level: Option<usize>,
    /// Every support of that size that fits `y`.
    pub accepted: Vec<Vec<usize>>,
}

/// Budget for [`oracle_recover_exhaustive`]: `sum_t C(N,t) (t k)^3`.
pub const ORACLE_BUDGET: f64 = 1e9;

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Visit every `s`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_subset(n: usize, s: usize, mut f: impl FnMut(&[usize])) {
    if s > n {
        return;
    }
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        f(&idx);
        // rightmost position that can still advance
        let mut i = s;
        while i > 0 && idx[i - 1] == n - s + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..s {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Smallest-support exact fit of `y` by enumerating supports of size `<= s`.
pub fn oracle_recover_exhaustive(
    b: &CoefficientOperator,
    y: &DVector<f64>,
    s: usize,
) -> Result<OracleResult, SolverError> {
    check_y(b, y)?;
    let n = b.num_blocks();
    let s = s.min(n);
    let k = (0..n).map(|j| b.offsets()[j + 1] - b.offsets()[j]).max().unwrap_or(0) as f64;
    let cost: f64 = (1..=s).map(|t| binomial(n, t) * (t as f64 * k).powi(3)).sum();
    if cost > ORACLE_BUDGET {
        return Err(SolverError::TooLarge(cost));
    }
    let y_norm = y.norm();
    let tol = 1e-8 * (1.0 + y_norm);
    if y_norm <= tol {
        return Ok(OracleResult {
            solution: Some(estimate_signal(b, DVector::zeros(b.ncols()))),
            unique: true,
            level: Some(0),
            accepted: vec![vec![]],
        });
    }
    for level in 1..=s {
        let mut accepted: Vec<(Vec<usize>, DVector<f64>, bool)> = Vec::new();
        for_each_subset(n, level, |support| {
            let cols = b.columns(support);
            if let Some((coef, full_rank)) = fit_support(&cols, y, tol) {
                accepted.push((support.to_vec(), coef, full_rank));
            }
        });
        if accepted.is_empty() {
            continue;
        }
        let unique = accepted.len() == 1 && accepted[0].2;
        let mut best = 0;
        let mut best_norm = f64::INFINITY;
        for (i, (support, coef, _)) in accepted.iter().enumerate() {
            let nrm = support_norm_21(b, support, coef);
            if nrm < best_norm {
                best_norm = nrm;
                best = i;
            }
        }
        let (support, coef, _) = &accepted[best];
        let mut c = DVector::zeros(b.ncols());
        let mut pos = 0;
        for &j in support {
            let w = b.offsets()[j + 1] - b.offsets()[j];
            c.rows_mut(b.offsets()[j], w).copy_from(&coef.rows(pos, w));
            pos += w;
        }
        return Ok(OracleResult {
            solution: Some(estimate_signal(b, c)),
            unique,
            level: Some(level),
            accepted: accepted.into_iter().map(|(s, _, _)| s).collect(),
        });
    }
    Ok(OracleResult { solution: None, unique: false, level: None, accepted: Vec::new() })
}

fn support_norm_21(b: &CoefficientOperator, support: &[usize], coef: &DVector<f64>) -> f64 {
    let mut pos = 0;
    let mut acc = 0.0;
    for &j in support {
        let w = b.offsets()[j + 1] - b.offsets()[j];
        acc += coef.rows(pos, w).norm();
        pos += w;
    }
    acc
}

/// Least squares on a column block; `None` if the residual exceeds `tol`.
fn fit_support(cols: &DMatrix<f64>, y: &DVector<f64>, tol: f64) -> Option<(DVector<f64>, bool)> {
    let svd = cols.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = 1e-10 * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&v| v > eps).count();
    let coef = svd.solve(y, eps).ok()?;
    let res = (cols * &coef - y).norm();
    (res <= tol).then_some((coef, rank == cols.ncols()))
}

/// Independent recomputation of a solution's optimality certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub objective: f64,
    /// `(objective - dual objective)` without normalization.
    pub absolute_gap: f64,
    pub passed: bool,
    pub violations: Vec<String>,
}

/// Recompute feasibility, dual feasibility, and the gap; flag anything
/// beyond ten times the solver tolerances.
pub fn certify(solution: &RecoverySolution, b: &CoefficientOperator, y: &DVector<f64>) -> Certificate {
    let eta = solution.eta.unwrap_or(0.0);
    let c = solution.estimate.coeffs();
    let m = measure(b, y, c, &solution.dual, eta);
    let p = &solution.params;
    let mut violations = Vec::new();
    if m.primal > 10.0 * p.tol_primal {
        violations.push(format!("primal residual {:e} > {:e}", m.primal, 10.0 * p.tol_primal));
    }
    if m.dual > 10.0 * p.tol_dual {
        violations.push(format!("dual infeasibility {:e} > {:e}", m.dual, 10.0 * p.tol_dual));
    }
    if m.gap > 10.0 * p.tol_gap {
        violations.push(format!("duality gap {:e} > {:e}", m.gap, 10.0 * p.tol_gap));
    }
    Certificate {
        primal_residual: m.primal,
        dual_residual: m.dual,
        duality_gap: m.gap,
        objective: m.objective,
        absolute_gap: m.gap * m.objective.max(1.0),
        passed: violations.is_empty(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{orthogonal_collection, random_collection};
    use crate::measurement::{
        compose_with_bases, sample_ensemble, Distribution, EnsembleSpec, MeasurementOperator, Normalization,
    };
    use crate::signals::{norm_21, random_sparse_signal, AmplitudeLaw};

    fn instance(
        d: usize,
        k: usize,
        n: usize,
        m: usize,
        s: usize,
        seed: u64,
    ) -> (CoefficientOperator, BlockSignal, DVector<f64>) {
        let col = random_collection(d, k, n, seed).unwrap();
        let a =
            sample_ensemble(&EnsembleSpec { distribution: Distribution::Gaussian, rows: m, cols: n, seed: seed + 1 })
                .unwrap();
        let b = compose_with_bases(&MeasurementOperator::vector(a, d, Normalization::InvSqrtRows), &col).unwrap();
        let x = random_sparse_signal(&col, s, seed + 2, AmplitudeLaw::UnitNormBlocks).unwrap();
        let y = b.apply(x.coeffs());
        (b, x, y)
    }

    #[test]
    fn soft_threshold_cases() {
        let v = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(block_soft_threshold(&v, 0.0), v);
        assert_eq!(block_soft_threshold(&v, 5.0), DVector::zeros(2));
        assert_eq!(block_soft_threshold(&v, 7.0), DVector::zeros(2));
        let out = block_soft_threshold(&v, 2.5);
        assert!((out[0] - 1.5).abs() < 1e-15 && (out[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_measurements_give_zero() {
        let (b, _, _) = instance(4, 2, 6, 2, 1, 3);
        let sol = solve_equality(&b, &DVector::zeros(b.nrows()), &SolverParams::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Converged);
        assert!(sol.iterations <= 1);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn recovers_planted_sparse_signal() {
        let (b, x, y) = instance(4, 2, 8, 4, 1, 10);
        let sol = solve_equality(&b, &y, &SolverParams::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Converged, "{sol:?}");
        let err = (sol.estimate.coeffs() - x.coeffs()).norm() / x.coeffs().norm();
        assert!(err < 1e-6, "relative error {err}");
        assert!((sol.objective - norm_21(&sol.estimate)).abs() < 1e-12);
        assert!(certify(&sol, &b, &y).passed);
    }

    #[test]
    fn bad_inputs() {
        let (b, _, y) = instance(4, 2, 6, 2, 1, 3);
        assert!(matches!(
            solve_equality(&b, &DVector::zeros(3), &SolverParams::default()),
            Err(SolverError::DimMismatch { .. })
        ));
        let bad = SolverParams { rho: 0.0, ..SolverParams::default() };
        assert!(matches!(solve_equality(&b, &y, &bad), Err(SolverError::InvalidParams(_))));
        assert!(matches!(solve_noisy(&b, &y, -1.0, &SolverParams::default()), Err(SolverError::InvalidParams(_))));
    }

    #[test]
    fn inconsistent_system_is_infeasible() {
        // 4 x 2 operator: generic y is not in the range
        let b = CoefficientOperator::from_dense(
            DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 2.0]),
            vec![0, 1, 2],
        )
        .unwrap();
        let y = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(solve_equality(&b, &y, &SolverParams::default()), Err(SolverError::Infeasible { .. })));
        assert!(matches!(solve_noisy(&b, &y, 1e-3, &SolverParams::default()), Err(SolverError::Infeasible { .. })));
        let ok = solve_noisy(&b, &y, 1.1, &SolverParams::default()).unwrap();
        assert_eq!(ok.status, SolverStatus::Converged);
    }

    #[test]
    fn large_eta_returns_zero() {
        let (b, _, y) = instance(4, 2, 6, 3, 2, 5);
        let sol = solve_noisy(&b, &y, y.norm() * 1.01, &SolverParams::default()).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.status, SolverStatus::Converged);
    }

    #[test]
    fn noisy_solution_stays_in_ball() {
        let (b, x, y) = instance(4, 2, 10, 4, 2, 21);
        let eta = 1e-3;
        let y_noisy = crate::measurement::add_noise(&y, eta, 4);
        let sol = solve_noisy(&b, &y_noisy, eta, &SolverParams::default()).unwrap();
        assert_eq!(sol.status, SolverStatus::Converged, "{sol:?}");
        assert!((b.apply(sol.estimate.coeffs()) - &y_noisy).norm() <= eta * (1.0 + 1e-9));
        assert!((sol.estimate.coeffs() - x.coeffs()).norm() < 50.0 * eta);
        assert!(certify(&sol, &b, &y_noisy).passed);
    }

    #[test]
    fn closed_form_decoder() {
        let col = orthogonal_collection(6, 2, 3).unwrap();
        let a = [0.5, -2.0, 1.5];
        let x = random_sparse_signal(&col, 3, 1, AmplitudeLaw::GaussianBlocks).unwrap();
        let op = MeasurementOperator::vector(DMatrix::from_row_slice(1, 3, &a), 6, Normalization::None);
        let y = op.apply(&x.to_ambient(&col)).unwrap();
        let rec = closed_form_orthogonal(&y, &a, &col).unwrap();
        assert!((rec.coeffs() - x.coeffs()).amax() < 1e-12);
        let zero = closed_form_orthogonal(&DVector::zeros(6), &a, &col).unwrap();
        assert_eq!(zero.coeffs().norm(), 0.0);
        assert_eq!(closed_form_orthogonal(&y, &[1.0, 0.0, 1.0], &col), Err(SolverError::ZeroCoefficient(1)));
        let coherent = random_collection(6, 2, 3, 1).unwrap();
        assert!(matches!(closed_form_orthogonal(&y, &a, &coherent), Err(SolverError::NotOrthogonal(_))));
    }

    #[test]
    fn subsets_are_lexicographic() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut count = 0;
        for_each_subset(5, 5, |_| count += 1);
        assert_eq!(count, 1);
        for_each_subset(3, 0, |s| assert!(s.is_empty()));
        assert_eq!(binomial(8, 3), 56.0);
    }

    #[test]
    fn oracle_cases() {
        let (b, x, y) = instance(4, 2, 8, 3, 1, 2);
        let res = oracle_recover_exhaustive(&b, &y, 2).unwrap();
        assert_eq!(res.level, Some(1));
        assert!(res.unique);
        assert!((res.solution.unwrap().coeffs() - x.coeffs()).norm() < 1e-9);

        let zero = oracle_recover_exhaustive(&b, &DVector::zeros(b.nrows()), 2).unwrap();
        assert_eq!(zero.level, Some(0));

        // 12 measurements and supports of width 2: a generic y fits no support
        let y_rand = DVector::from_fn(b.nrows(), |i, _| ((i * 7 + 3) as f64).sin());
        let none = oracle_recover_exhaustive(&b, &y_rand, 2).unwrap();
        assert!(none.solution.is_none() && !none.unique);
    }

    #[test]
    fn oracle_guard() {
        let (b, _, y) = instance(4, 4, 40, 2, 1, 2);
        assert!(matches!(oracle_recover_exhaustive(&b, &y, 12), Err(SolverError::TooLarge(_))));
    }
}
