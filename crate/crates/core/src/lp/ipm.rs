//! Mehrotra predictor-corrector primal-dual interior-point method.
//!
//! The general program is first rewritten in the form
//!
//! ```text
//! min c·x   s.t.  E x = f,   0 <= x,   x_i <= u_i  (i in the boxed set)
//! ```
//!
//! by shifting, negating, splitting or eliminating variables. Redundant
//! equality rows are removed, and inconsistent ones reported as infeasible,
//! before iterating. Each iteration solves the normal equations
//! `E Θ Eᵀ dy = r` with a pivot-guarded dense Cholesky factorization.
//! There is no crossover: when the tolerances are met, the last iterate is
//! projected back onto `E x = f` to clean up the primal residual.

use nalgebra::{DMatrix, DVector};

use super::{LinearProgram, LpSolution, LpStatus, Result, SolverOptions};
use crate::linalg::Vector;

/// Pivots smaller than this fraction of the original diagonal are treated
/// as linearly dependent.
const DEPENDENT_PIVOT: f64 = 1e-12;
/// Same test inside the iterations, where Θ can span many decades.
const NORMAL_EQ_PIVOT: f64 = 1e-30;
const HUGE_PIVOT: f64 = 1e64;
const STEP_FRACTION: f64 = 0.995;
const DIVERGENCE: f64 = 1e10;
const CONSISTENCY_TOL: f64 = 1e-6;
const REFINEMENT_ROUNDS: usize = 3;
/// Gap and residual level at which an active-set guess is worth testing.
const PURIFY_GAP: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
enum VarMap {
    Fixed(f64),
    Shift { col: usize, lower: f64 },
    Negate { col: usize, upper: f64 },
    Split { pos: usize, neg: usize },
}

/// The rewritten problem in standard form.
struct StandardForm {
    e: DMatrix<f64>,
    f: DVector<f64>,
    c: DVector<f64>,
    /// Upper bound per column, `INFINITY` when unbounded above.
    upper: Vec<f64>,
    map: Vec<VarMap>,
}

fn standardize(lp: &LinearProgram) -> StandardForm {
    let e_orig = lp.eq_lhs();
    let m = e_orig.rows();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut costs = Vec::new();
    let mut upper = Vec::new();
    let mut map = Vec::with_capacity(lp.num_vars());
    let mut f: Vec<f64> = lp.eq_rhs().as_slice().to_vec();

    let column = |j: usize, sign: f64| -> Vec<f64> { (0..m).map(|i| sign * e_orig[(i, j)]).collect() };

    for j in 0..lp.num_vars() {
        let (l, u) = (lp.var_lower()[j], lp.var_upper()[j]);
        let cj = lp.objective()[j];
        if l == u {
            for (i, fi) in f.iter_mut().enumerate() {
                *fi -= e_orig[(i, j)] * l;
            }
            map.push(VarMap::Fixed(l));
        } else if l.is_finite() {
            for (i, fi) in f.iter_mut().enumerate() {
                *fi -= e_orig[(i, j)] * l;
            }
            map.push(VarMap::Shift { col: cols.len(), lower: l });
            cols.push(column(j, 1.0));
            costs.push(cj);
            upper.push(if u.is_finite() { u - l } else { f64::INFINITY });
        } else if u.is_finite() {
            for (i, fi) in f.iter_mut().enumerate() {
                *fi -= e_orig[(i, j)] * u;
            }
            map.push(VarMap::Negate { col: cols.len(), upper: u });
            cols.push(column(j, -1.0));
            costs.push(-cj);
            upper.push(f64::INFINITY);
        } else {
            let pos = cols.len();
            cols.push(column(j, 1.0));
            cols.push(column(j, -1.0));
            costs.push(cj);
            costs.push(-cj);
            upper.push(f64::INFINITY);
            upper.push(f64::INFINITY);
            map.push(VarMap::Split { pos, neg: pos + 1 });
        }
    }

    let ncols = cols.len();
    let e = DMatrix::from_fn(m, ncols, |i, j| cols[j][i]);
    StandardForm {
        e,
        f: DVector::from_vec(f),
        c: DVector::from_vec(costs),
        upper,
        map,
    }
}

/// Dense symmetric factorization `A = L Lᵀ` stored row-major in `a`
/// (lower triangle). Pivots below `rel_tiny` times the original diagonal
/// are replaced by a huge value, which pins the matching solution component
/// to zero; their indices are returned.
fn cholesky_guarded(a: &mut [f64], n: usize, rel_tiny: f64) -> Vec<usize> {
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut dependent = Vec::new();
    for j in 0..n {
        let head = &a[j * n..j * n + j];
        let d = a[j * n + j] - dot(head, head);
        if d <= rel_tiny * diag[j] || d <= 0.0 || !d.is_finite() {
            dependent.push(j);
            a[j * n + j] = HUGE_PIVOT;
            for i in (j + 1)..n {
                a[i * n + j] = 0.0;
            }
            continue;
        }
        let ljj = d.sqrt();
        a[j * n + j] = ljj;
        let head = a[j * n..j * n + j].to_vec();
        for i in (j + 1)..n {
            let s = dot(&a[i * n..i * n + j], &head);
            a[i * n + j] = (a[i * n + j] - s) / ljj;
        }
    }
    dependent
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        b[i] = (b[i] - dot(row, &b[..i])) / l[i * n + i];
    }
    for j in (0..n).rev() {
        b[j] /= l[j * n + j];
        let xj = b[j];
        let row = &l[j * n..j * n + j];
        for (bk, lk) in b[..j].iter_mut().zip(row) {
            *bk -= lk * xj;
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest `alpha` in `(0, 1]` keeping `v + alpha * dv >= 0` on `mask`.
fn max_step(v: &[f64], dv: &[f64], mask: impl Fn(usize) -> bool) -> f64 {
    let mut alpha: f64 = 1.0;
    for i in 0..v.len() {
        if mask(i) && dv[i] < 0.0 {
            alpha = alpha.min(-v[i] / dv[i]);
        }
    }
    alpha
}

/// Row selection after presolve.
struct Rows {
    e: DMatrix<f64>,
    f: DVector<f64>,
    kept: Vec<usize>,
    scale: Vec<f64>,
}

enum Presolve {
    Rows(Rows),
    Inconsistent,
}

/// Normalizes rows, drops zero or dependent ones and checks that the
/// dropped equations agree with the kept ones.
fn presolve_rows(sf: &StandardForm) -> Presolve {
    let m = sf.e.nrows();
    let mut e = sf.e.clone();
    let mut f = sf.f.clone();
    let mut scale = vec![0.0; m];
    let mut nonzero = Vec::new();
    for i in 0..m {
        let norm = e.row(i).norm();
        if norm > 0.0 {
            scale[i] = 1.0 / norm;
            e.row_mut(i).scale_mut(scale[i]);
            f[i] *= scale[i];
            nonzero.push(i);
        }
    }
    let fscale = 1.0 + inf_norm(f.as_slice());
    // a zero row must have a zero right-hand side
    if (0..m).any(|i| scale[i] == 0.0 && f[i].abs() > CONSISTENCY_TOL * fscale) {
        return Presolve::Inconsistent;
    }

    let sub = e.select_rows(&nonzero);
    let gram = &sub * sub.transpose();
    let k = nonzero.len();
    let mut buf = gram.as_slice().to_vec();
    let dependent = cholesky_guarded(&mut buf, k, DEPENDENT_PIVOT);
    let kept: Vec<usize> = (0..k)
        .filter(|p| !dependent.contains(p))
        .map(|p| nonzero[p])
        .collect();

    let e_kept = e.select_rows(&kept);
    let f_kept = DVector::from_iterator(kept.len(), kept.iter().map(|&i| f[i]));

    if !dependent.is_empty() {
        // min-norm solution of the kept rows, then test every dropped row
        let kk = kept.len();
        let mut g = (&e_kept * e_kept.transpose()).as_slice().to_vec();
        cholesky_guarded(&mut g, kk, DEPENDENT_PIVOT);
        let mut t = f_kept.as_slice().to_vec();
        cholesky_solve(&g, kk, &mut t);
        let x0 = e_kept.transpose() * DVector::from_vec(t);
        for &p in &dependent {
            let i = nonzero[p];
            let r = f[i] - e.row(i).transpose().dot(&x0);
            if r.abs() > CONSISTENCY_TOL * fscale {
                return Presolve::Inconsistent;
            }
        }
    }
    let scale_kept = kept.iter().map(|&i| scale[i]).collect();
    Presolve::Rows(Rows {
        e: e_kept,
        f: f_kept,
        kept,
        scale: scale_kept,
    })
}

struct Iterate {
    x: Vec<f64>,
    w: Vec<f64>,
    z: Vec<f64>,
    v: Vec<f64>,
    y: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    dw: Vec<f64>,
    dz: Vec<f64>,
    dv: Vec<f64>,
    dy: Vec<f64>,
}

fn starting_point(rows: &Rows, c: &DVector<f64>, upper: &[f64]) -> Iterate {
    let (mr, n) = rows.e.shape();
    let boxed = |i: usize| upper[i].is_finite();
    let (x_ls, z_ls, y_ls) = if mr > 0 {
        let mut g = (&rows.e * rows.e.transpose()).as_slice().to_vec();
        cholesky_guarded(&mut g, mr, NORMAL_EQ_PIVOT);
        let mut t = rows.f.as_slice().to_vec();
        cholesky_solve(&g, mr, &mut t);
        let x = rows.e.transpose() * DVector::from_vec(t);
        let mut y = (&rows.e * c).as_slice().to_vec();
        cholesky_solve(&g, mr, &mut y);
        let z = c - rows.e.transpose() * DVector::from_column_slice(&y);
        (x.as_slice().to_vec(), z.as_slice().to_vec(), y)
    } else {
        (vec![0.0; n], c.as_slice().to_vec(), Vec::new())
    };

    let x_floor = 1e-2 * inf_norm(&x_ls).max(1.0);
    let z_floor = 1e-2 * inf_norm(c.as_slice()).max(1.0);
    let free_idx: Vec<usize> = (0..n).filter(|&i| !boxed(i)).collect();

    let min_x = free_idx.iter().map(|&i| x_ls[i]).fold(f64::INFINITY, f64::min);
    let min_z = (0..n).map(|i| z_ls[i]).fold(f64::INFINITY, f64::min);
    let dx = if min_x.is_finite() { (-1.5 * min_x).max(0.0) } else { 0.0 };
    let dz = if min_z.is_finite() { (-1.5 * min_z).max(0.0) } else { 0.0 };

    let mut x = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut v = vec![0.0; n];
    for &i in &free_idx {
        x[i] = x_ls[i] + dx;
        z[i] = z_ls[i] + dz;
    }
    let xz: f64 = free_idx.iter().map(|&i| x[i] * z[i]).sum();
    let sx: f64 = free_idx.iter().map(|&i| x[i]).sum();
    let sz: f64 = free_idx.iter().map(|&i| z[i]).sum();
    let (sx_shift, sz_shift) = if xz > 0.0 && sx > 0.0 && sz > 0.0 {
        (0.5 * xz / sz, 0.5 * xz / sx)
    } else {
        (0.0, 0.0)
    };
    for &i in &free_idx {
        x[i] = (x[i] + sx_shift).max(x_floor);
        z[i] = (z[i] + sz_shift).max(z_floor);
    }
    let zeta = sz_shift.max(z_floor);
    for i in (0..n).filter(|&i| boxed(i)) {
        x[i] = 0.5 * upper[i];
        w[i] = 0.5 * upper[i];
        z[i] = z_ls[i].max(0.0) + zeta;
        v[i] = (-z_ls[i]).max(0.0) + zeta;
    }
    Iterate { x, w, z, v, y: y_ls }
}

struct Outcome {
    x: Vec<f64>,
    y: Vec<f64>,
    status: LpStatus,
    iterations: usize,
    gap: f64,
}

fn iterate(rows: &Rows, c: &DVector<f64>, upper: &[f64], opts: &SolverOptions) -> Outcome {
    let (mr, n) = rows.e.shape();
    let e = &rows.e;
    let f = rows.f.as_slice();
    let boxed: Vec<bool> = upper.iter().map(|u| u.is_finite()).collect();
    let nboxed = boxed.iter().filter(|&&b| b).count();
    let u_norm = upper.iter().filter(|u| u.is_finite()).fold(0.0f64, |m, u| m.max(u.abs()));
    let f_norm = inf_norm(f);
    let c_norm = inf_norm(c.as_slice());
    let ncomp = (n + nboxed).max(1) as f64;

    let mut it = starting_point(rows, c, upper);
    let mut status = LpStatus::IterationLimit;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut stalls = 0;

    for k in 0..=opts.max_iter {
        let ex = e * DVector::from_column_slice(&it.x);
        let rb: Vec<f64> = (0..mr).map(|i| f[i] - ex[i]).collect();
        let ru: Vec<f64> = (0..n)
            .map(|i| if boxed[i] { upper[i] - it.x[i] - it.w[i] } else { 0.0 })
            .collect();
        let ety = e.tr_mul(&DVector::from_column_slice(&it.y));
        let rc: Vec<f64> = (0..n)
            .map(|i| c[i] - ety[i] - it.z[i] + if boxed[i] { it.v[i] } else { 0.0 })
            .collect();

        let complementarity: f64 = (0..n)
            .map(|i| it.x[i] * it.z[i] + if boxed[i] { it.w[i] * it.v[i] } else { 0.0 })
            .sum();
        let mu = complementarity / ncomp;

        let pobj: f64 = (0..n).map(|i| c[i] * it.x[i]).sum();
        let dobj: f64 = (0..mr).map(|i| f[i] * it.y[i]).sum::<f64>()
            - (0..n).filter(|&i| boxed[i]).map(|i| upper[i] * it.v[i]).sum::<f64>();
        let pres = (inf_norm(&rb) / (1.0 + f_norm)).max(inf_norm(&ru) / (1.0 + u_norm));
        let dres = inf_norm(&rc) / (1.0 + c_norm);
        gap = (pobj - dobj) / (1.0 + pobj.abs());
        iterations = k;

        let converged = pres <= opts.feas_tol && dres <= opts.feas_tol && gap.abs() <= opts.gap_tol;
        // a certified vertex is exact to rounding, so prefer it even after
        // ordinary convergence
        if gap.abs() <= PURIFY_GAP && pres <= PURIFY_GAP && dres <= PURIFY_GAP {
            if let Some(p) = purify(rows, c, upper, &it, opts) {
                (it.x, it.y, gap) = (p.x, p.y, p.gap);
                status = LpStatus::Optimal;
                break;
            }
        }
        if converged {
            status = LpStatus::Optimal;
            break;
        }
        if k == opts.max_iter {
            break;
        }
        if k >= 5 {
            let dual_size = inf_norm(&it.y).max(inf_norm(&it.z)).max(inf_norm(&it.v));
            let primal_size = inf_norm(&it.x);
            if dual_size > DIVERGENCE * (1.0 + c_norm) && pres > opts.feas_tol {
                status = LpStatus::Infeasible;
                break;
            }
            if primal_size > DIVERGENCE * (1.0 + f_norm + u_norm) && dres > opts.feas_tol {
                status = LpStatus::Unbounded;
                break;
            }
        }

        // normal equations
        let theta: Vec<f64> = (0..n)
            .map(|i| {
                let mut d = it.z[i] / it.x[i];
                if boxed[i] {
                    d += it.v[i] / it.w[i];
                }
                1.0 / d
            })
            .collect();
        let mut scaled = e.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= theta[j].sqrt();
        }
        let normal = &scaled * scaled.transpose();
        let mut chol = normal.as_slice().to_vec();
        cholesky_guarded(&mut chol, mr, NORMAL_EQ_PIVOT);

        let solve = |rxz: &[f64], rwv: &[f64]| -> Direction {
            let g: Vec<f64> = (0..n)
                .map(|i| {
                    let mut gi = rc[i] - rxz[i] / it.x[i];
                    if boxed[i] {
                        gi += (rwv[i] - it.v[i] * ru[i]) / it.w[i];
                    }
                    gi
                })
                .collect();
            let tg: Vec<f64> = (0..n).map(|i| theta[i] * g[i]).collect();
            let etg = e * DVector::from_vec(tg);
            let rhs: Vec<f64> = (0..mr).map(|i| rb[i] + etg[i]).collect();
            let mut dy = rhs.clone();
            cholesky_solve(&chol, mr, &mut dy);
            // the factorization degrades near degenerate optima; a few
            // refinement rounds against E Θ Eᵀ itself restore E dx = rb
            for _ in 0..REFINEMENT_ROUNDS {
                let t = e.tr_mul(&DVector::from_column_slice(&dy));
                let t = DVector::from_iterator(n, (0..n).map(|i| theta[i] * t[i]));
                let et = e * t;
                let mut r: Vec<f64> = (0..mr).map(|i| rhs[i] - et[i]).collect();
                if inf_norm(&r) <= 1e-14 * (1.0 + inf_norm(&rhs)) {
                    break;
                }
                cholesky_solve(&chol, mr, &mut r);
                for (d, c) in dy.iter_mut().zip(&r) {
                    *d += c;
                }
            }
            let etdy = e.tr_mul(&DVector::from_column_slice(&dy));
            let dx: Vec<f64> = (0..n).map(|i| theta[i] * (etdy[i] - g[i])).collect();
            let dz: Vec<f64> = (0..n).map(|i| (rxz[i] - it.z[i] * dx[i]) / it.x[i]).collect();
            let dw: Vec<f64> = (0..n).map(|i| if boxed[i] { ru[i] - dx[i] } else { 0.0 }).collect();
            let dv: Vec<f64> = (0..n)
                .map(|i| if boxed[i] { (rwv[i] - it.v[i] * dw[i]) / it.w[i] } else { 0.0 })
                .collect();
            Direction { dx, dw, dz, dv, dy }
        };

        let steps = |d: &Direction| -> (f64, f64) {
            let ap = max_step(&it.x, &d.dx, |_| true).min(max_step(&it.w, &d.dw, |i| boxed[i]));
            let ad = max_step(&it.z, &d.dz, |_| true).min(max_step(&it.v, &d.dv, |i| boxed[i]));
            (ap, ad)
        };

        // predictor
        let rxz: Vec<f64> = (0..n).map(|i| -it.x[i] * it.z[i]).collect();
        let rwv: Vec<f64> = (0..n).map(|i| if boxed[i] { -it.w[i] * it.v[i] } else { 0.0 }).collect();
        let aff = solve(&rxz, &rwv);
        let (ap, ad) = steps(&aff);
        let mu_aff: f64 = (0..n)
            .map(|i| {
                let mut s = (it.x[i] + ap * aff.dx[i]) * (it.z[i] + ad * aff.dz[i]);
                if boxed[i] {
                    s += (it.w[i] + ap * aff.dw[i]) * (it.v[i] + ad * aff.dv[i]);
                }
                s
            })
            .sum::<f64>()
            / ncomp;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let target = sigma * mu;
        let rxz: Vec<f64> = (0..n)
            .map(|i| target - it.x[i] * it.z[i] - aff.dx[i] * aff.dz[i])
            .collect();
        let rwv: Vec<f64> = (0..n)
            .map(|i| {
                if boxed[i] {
                    target - it.w[i] * it.v[i] - aff.dw[i] * aff.dv[i]
                } else {
                    0.0
                }
            })
            .collect();
        let dir = solve(&rxz, &rwv);
        let (ap, ad) = steps(&dir);
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);

        for i in 0..n {
            it.x[i] += ap * dir.dx[i];
            it.z[i] += ad * dir.dz[i];
            if boxed[i] {
                it.w[i] += ap * dir.dw[i];
                it.v[i] += ad * dir.dv[i];
            }
        }
        for i in 0..mr {
            it.y[i] += ad * dir.dy[i];
        }

        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls >= 5 {
                break;
            }
        } else {
            stalls = 0;
        }
    }

    if status == LpStatus::IterationLimit {
        if let Some(p) = purify(rows, c, upper, &it, opts) {
            (it.x, it.y, gap) = (p.x, p.y, p.gap);
            status = LpStatus::Optimal;
        }
    }

    Outcome {
        x: it.x,
        y: it.y,
        status,
        iterations,
        gap,
    }
}

struct Purified {
    x: Vec<f64>,
    y: Vec<f64>,
    gap: f64,
}

/// Guesses the optimal active set from the iterate, moves the remaining
/// columns onto `E x = f` by a least-squares correction, recomputes `y` the
/// same way, and accepts the result only if it is primal and dual feasible
/// with a small gap. Near degenerate optima this reaches a vertex long
/// before the normal equations run out of precision.
fn purify(rows: &Rows, c: &DVector<f64>, upper: &[f64], it: &Iterate, opts: &SolverOptions) -> Option<Purified> {
    let (mr, n) = rows.e.shape();
    let e = &rows.e;
    let f = rows.f.as_slice();
    let mut x = vec![0.0; n];
    let mut at_upper = vec![false; n];
    let mut basic = Vec::new();
    for j in 0..n {
        if upper[j].is_finite() && it.w[j] < it.v[j] && it.w[j] < it.x[j] {
            x[j] = upper[j];
            at_upper[j] = true;
        } else if it.x[j] < it.z[j] {
            x[j] = 0.0;
        } else {
            basic.push(j);
        }
    }
    let f_norm = inf_norm(f);
    let c_norm = inf_norm(c.as_slice());
    let p_tol = opts.feas_tol * (1.0 + f_norm);
    let d_tol = opts.feas_tol * (1.0 + c_norm);

    if mr > 0 && !basic.is_empty() {
        let eb = e.select_columns(&basic);
        let svd = eb.clone().svd(true, true);
        let cutoff = 1e-12 * svd.singular_values.max();
        let fixed = e * DVector::from_column_slice(&x);
        let xb = DVector::from_iterator(basic.len(), basic.iter().map(|&j| it.x[j]));
        let r = DVector::from_iterator(mr, (0..mr).map(|i| f[i] - fixed[i])) - &eb * &xb;
        let corr = svd.solve(&r, cutoff).ok()?;
        for (k, &j) in basic.iter().enumerate() {
            let v = xb[k] + corr[k];
            let bound_tol = opts.feas_tol * (1.0 + v.abs());
            if v < -bound_tol || v > upper[j] + bound_tol {
                return None;
            }
            x[j] = v.clamp(0.0, upper[j]);
        }
        // the dual: E_Bᵀ y = c_B, corrected from the current y
        let y0 = DVector::from_column_slice(&it.y);
        let cb = DVector::from_iterator(basic.len(), basic.iter().map(|&j| c[j]));
        let rd = cb - eb.tr_mul(&y0);
        let svd_t = eb.transpose().svd(true, true);
        let dy = svd_t.solve(&rd, cutoff).ok()?;
        let y = y0 + dy;
        return certify(e, f, c, upper, x, y.as_slice().to_vec(), &at_upper, p_tol, d_tol, opts);
    }
    certify(e, f, c, upper, x, it.y.clone(), &at_upper, p_tol, d_tol, opts)
}

#[allow(clippy::too_many_arguments)]
fn certify(
    e: &DMatrix<f64>,
    f: &[f64],
    c: &DVector<f64>,
    upper: &[f64],
    x: Vec<f64>,
    y: Vec<f64>,
    at_upper: &[bool],
    p_tol: f64,
    d_tol: f64,
    opts: &SolverOptions,
) -> Option<Purified> {
    let mr = f.len();
    let ex = e * DVector::from_column_slice(&x);
    if (0..mr).any(|i| (ex[i] - f[i]).abs() > p_tol) {
        return None;
    }
    let d = c - e.tr_mul(&DVector::from_column_slice(&y));
    let mut dobj: f64 = (0..mr).map(|i| f[i] * y[i]).sum();
    for j in 0..x.len() {
        if at_upper[j] {
            if d[j] > d_tol {
                return None;
            }
            dobj += upper[j] * d[j];
        } else if x[j] == 0.0 {
            if d[j] < -d_tol {
                return None;
            }
        } else if d[j].abs() > d_tol {
            return None;
        }
    }
    let pobj: f64 = (0..x.len()).map(|j| c[j] * x[j]).sum();
    let gap = (pobj - dobj) / (1.0 + pobj.abs());
    (gap.abs() <= opts.gap_tol).then_some(Purified { x, y, gap })
}

/// Moves `x` onto `E x = f`. Variables within a hair of a bound are
/// snapped to it and the rest take a minimum-norm least-squares
/// correction; at a vertex that leaves residuals at rounding level.
/// The result is kept only if it improves the residual.
fn polish(lp: &LinearProgram, kept_rows: &[usize], x: &mut [f64]) {
    const SNAP: f64 = 1e-7;
    if kept_rows.is_empty() {
        return;
    }
    let e = lp.eq_lhs();
    let (lo, up) = (lp.var_lower(), lp.var_upper());
    let residual = |x: &[f64]| -> DVector<f64> {
        DVector::from_iterator(
            kept_rows.len(),
            kept_rows.iter().map(|&i| {
                let lhs: f64 = e.row(i).iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                lp.eq_rhs()[i] - lhs
            }),
        )
    };
    let before = residual(x).amax();

    let mut y = x.to_vec();
    let mut free = Vec::new();
    for j in 0..y.len() {
        if lo[j].is_finite() && (y[j] - lo[j]).abs() <= SNAP * (1.0 + lo[j].abs()) {
            y[j] = lo[j];
        } else if up[j].is_finite() && (y[j] - up[j]).abs() <= SNAP * (1.0 + up[j].abs()) {
            y[j] = up[j];
        } else {
            free.push(j);
        }
    }
    if free.is_empty() {
        return;
    }
    let sub = DMatrix::from_fn(kept_rows.len(), free.len(), |i, k| e[(kept_rows[i], free[k])]);
    let svd = sub.svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max();
    for _ in 0..2 {
        let Ok(corr) = svd.solve(&residual(&y), cutoff) else {
            return;
        };
        for (k, &j) in free.iter().enumerate() {
            y[j] = (y[j] + corr[k]).clamp(lo[j], up[j]);
        }
    }
    if residual(&y).amax() < before {
        x.copy_from_slice(&y);
    }
}

/// Solves `lp` to the given tolerances. Failure to reach optimality is
/// reported through [`LpSolution::status`]; only invalid options are errors.
pub fn solve_lp(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution> {
    opts.validate()?;
    let sf = standardize(lp);
    let m = lp.num_constraints();

    let finish = |x: Vec<f64>, status: LpStatus, iterations: usize, gap: f64, row_duals: Vec<f64>| {
        let x = Vector::from_vec_unchecked(x);
        LpSolution {
            objective_value: lp.objective_at(&x),
            primal_residual: lp.equality_residual(&x),
            x,
            status,
            iterations,
            duality_gap: gap,
            row_duals: Vector::from_vec_unchecked(row_duals),
        }
    };

    let rows = match presolve_rows(&sf) {
        Presolve::Rows(r) => r,
        Presolve::Inconsistent => {
            let x = recover(&sf.map, &vec![0.0; sf.c.len()]);
            return Ok(finish(x, LpStatus::Infeasible, 0, f64::NAN, vec![0.0; m]));
        }
    };

    let out = iterate(&rows, &sf.c, &sf.upper, opts);
    let mut x = recover(&sf.map, &out.x);
    if out.status == LpStatus::Optimal {
        polish(lp, &rows.kept, &mut x);
    }
    let mut duals = vec![0.0; m];
    for (k, &i) in rows.kept.iter().enumerate() {
        duals[i] = rows.scale[k] * out.y[k];
    }
    Ok(finish(x, out.status, out.iterations, out.gap, duals))
}

fn recover(map: &[VarMap], xs: &[f64]) -> Vec<f64> {
    map.iter()
        .map(|vm| match *vm {
            VarMap::Fixed(v) => v,
            VarMap::Shift { col, lower } => lower + xs[col],
            VarMap::Negate { col, upper } => upper - xs[col],
            VarMap::Split { pos, neg } => xs[pos] - xs[neg],
        })
        .collect()
}
