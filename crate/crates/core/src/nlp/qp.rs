//! Dense strictly convex QP solver (Goldfarb–Idnani dual active set method).
//!
//! ```text
//!     minimize    ½ xᵀ H x + gᵀ x
//!     subject to  A_eq x  = b_eq
//!                 A_in x >= b_in
//! ```
//!
//! The method starts at the unconstrained minimizer and adds violated constraints
//! one at a time while keeping dual feasibility, so infeasible problems are detected
//! rather than silently relaxed.

use thiserror::Error;

use crate::linop::Mat;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("constraints are infeasible")]
    Infeasible,
    #[error("equality constraints are linearly dependent")]
    DependentEqualities,
    #[error("iteration limit reached")]
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers of the equality rows; `H x + g = A_eqᵀ λ_eq + A_inᵀ λ_in`.
    pub lambda_eq: Vec<f64>,
    /// Non-negative multipliers of the inequality rows.
    pub lambda_in: Vec<f64>,
    pub iterations: usize,
}

/// Borrowed QP data. Constraint matrices store one constraint per row.
#[derive(Debug, Clone, Copy)]
pub struct QpProblem<'a> {
    pub h: &'a Mat<f64>,
    pub g: &'a [f64],
    pub a_eq: &'a Mat<f64>,
    pub b_eq: &'a [f64],
    pub a_in: &'a Mat<f64>,
    pub b_in: &'a [f64],
}

const INF: f64 = f64::INFINITY;

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn hypot(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

struct Workspace {
    n: usize,
    /// Columns of `J` span the null space of the active normals after `iq`.
    j: Mat<f64>,
    r: Mat<f64>,
    r_norm: f64,
    iq: usize,
    /// Active constraint ids; positions `< p` are equalities.
    active: Vec<usize>,
    u: Vec<f64>,
}

impl Workspace {
    fn compute_d(&self, np: &[f64], d: &mut [f64]) {
        let n = self.n;
        for (i, di) in d.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in 0..n {
                s += self.j[(k, i)] * np[k];
            }
            *di = s;
        }
    }

    fn update_z(&self, d: &[f64], z: &mut [f64]) {
        let n = self.n;
        for (i, zi) in z.iter_mut().enumerate() {
            let row = self.j.row(i);
            *zi = dot(&row[self.iq..n], &d[self.iq..n]);
        }
    }

    fn update_r(&self, d: &[f64], r: &mut [f64]) {
        for i in (0..self.iq).rev() {
            let mut s = d[i];
            for k in i + 1..self.iq {
                s -= self.r[(i, k)] * r[k];
            }
            r[i] = s / self.r[(i, i)];
        }
    }

    /// Rotates `d` so the new normal occupies column `iq` of `R`; returns `false`
    /// when it is (numerically) dependent on the active set.
    fn add_constraint(&mut self, d: &mut [f64]) -> bool {
        let n = self.n;
        for jj in (self.iq + 1..n).rev() {
            let mut cc = d[jj - 1];
            let mut ss = d[jj];
            let h = hypot(cc, ss);
            if h == 0.0 {
                continue;
            }
            d[jj] = 0.0;
            ss /= h;
            cc /= h;
            if cc < 0.0 {
                cc = -cc;
                ss = -ss;
                d[jj - 1] = -h;
            } else {
                d[jj - 1] = h;
            }
            let xny = ss / (1.0 + cc);
            for k in 0..n {
                let t1 = self.j[(k, jj - 1)];
                let t2 = self.j[(k, jj)];
                let new = t1 * cc + t2 * ss;
                self.j[(k, jj - 1)] = new;
                self.j[(k, jj)] = xny * (t1 + new) - t2;
            }
        }
        self.iq += 1;
        for i in 0..self.iq {
            self.r[(i, self.iq - 1)] = d[i];
        }
        let diag = d[self.iq - 1].abs();
        if diag <= f64::EPSILON * self.r_norm {
            return false;
        }
        self.r_norm = self.r_norm.max(diag);
        true
    }

    /// Drops inequality `l` from the active set.
    fn delete_constraint(&mut self, p: usize, l: usize) {
        let n = self.n;
        let Some(qq) = (p..self.iq).find(|&i| self.active[i] == l) else {
            return;
        };
        for i in qq..self.iq - 1 {
            self.active[i] = self.active[i + 1];
            self.u[i] = self.u[i + 1];
            for jr in 0..n {
                self.r[(jr, i)] = self.r[(jr, i + 1)];
            }
        }
        self.active[self.iq - 1] = self.active[self.iq];
        self.u[self.iq - 1] = self.u[self.iq];
        self.active[self.iq] = usize::MAX;
        self.u[self.iq] = 0.0;
        for jr in 0..self.iq {
            self.r[(jr, self.iq - 1)] = 0.0;
        }
        self.iq -= 1;
        if self.iq == 0 {
            return;
        }
        for jj in qq..self.iq {
            let mut cc = self.r[(jj, jj)];
            let mut ss = self.r[(jj + 1, jj)];
            let h = hypot(cc, ss);
            if h == 0.0 {
                continue;
            }
            cc /= h;
            ss /= h;
            self.r[(jj + 1, jj)] = 0.0;
            if cc < 0.0 {
                self.r[(jj, jj)] = -h;
                cc = -cc;
                ss = -ss;
            } else {
                self.r[(jj, jj)] = h;
            }
            let xny = ss / (1.0 + cc);
            for k in jj + 1..self.iq {
                let t1 = self.r[(jj, k)];
                let t2 = self.r[(jj + 1, k)];
                let new = t1 * cc + t2 * ss;
                self.r[(jj, k)] = new;
                self.r[(jj + 1, k)] = xny * (t1 + new) - t2;
            }
            for k in 0..n {
                let t1 = self.j[(k, jj)];
                let t2 = self.j[(k, jj + 1)];
                let new = t1 * cc + t2 * ss;
                self.j[(k, jj)] = new;
                self.j[(k, jj + 1)] = xny * (new + t1) - t2;
            }
        }
    }
}

/// `L⁻ᵀ` for a lower-triangular `L`.
fn inverse_transpose_lower(l: &Mat<f64>) -> Mat<f64> {
    let n = l.rows();
    // solve L X = I column by column, then transpose
    let mut inv = Mat::zeros(n, n);
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                s -= l[(i, k)] * inv[(k, c)];
            }
            inv[(i, c)] = s / l[(i, i)];
        }
    }
    inv.transpose()
}

/// Solves a strictly convex QP.
pub fn solve_qp(qp: &QpProblem<'_>) -> Result<QpSolution, QpError> {
    let n = qp.h.rows();
    let p = qp.a_eq.rows();
    let m = qp.a_in.rows();
    debug_assert_eq!(qp.g.len(), n);
    debug_assert_eq!(qp.b_eq.len(), p);
    debug_assert_eq!(qp.b_in.len(), m);
    debug_assert!(p == 0 || qp.a_eq.cols() == n);
    debug_assert!(m == 0 || qp.a_in.cols() == n);

    let l = qp.h.cholesky().ok_or(QpError::NotPositiveDefinite)?;
    let c1: f64 = (0..n).map(|i| qp.h[(i, i)]).sum();
    let j = inverse_transpose_lower(&l);
    let c2: f64 = (0..n).map(|i| j[(i, i)]).sum();

    let mut ws = Workspace {
        n,
        j,
        r: Mat::zeros(n, n),
        r_norm: 1.0,
        iq: 0,
        active: vec![usize::MAX; n + p + m + 1],
        u: vec![0.0; n + p + m + 1],
    };

    // unconstrained minimum x = -H⁻¹ g = -J Jᵀ g
    let mut x = {
        let jt_g = ws.j.tr_matvec(qp.g);
        ws.j.matvec(&jt_g).into_iter().map(|v| -v).collect::<Vec<_>>()
    };
    let mut f = 0.5 * dot(qp.g, &x);

    let mut d = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut r = vec![0.0; n + p + m + 1];

    for i in 0..p {
        let np = qp.a_eq.row(i);
        ws.compute_d(np, &mut d);
        ws.update_z(&d, &mut z);
        ws.update_r(&d, &mut r);
        let zn = dot(&z, np);
        let mut t2 = 0.0;
        if dot(&z, &z).abs() > f64::EPSILON {
            t2 = (qp.b_eq[i] - dot(np, &x)) / zn;
        }
        for k in 0..n {
            x[k] += t2 * z[k];
        }
        ws.u[ws.iq] = t2;
        for k in 0..ws.iq {
            ws.u[k] -= t2 * r[k];
        }
        f += 0.5 * t2 * t2 * zn;
        ws.active[i] = usize::MAX;
        if !ws.add_constraint(&mut d) {
            return Err(QpError::DependentEqualities);
        }
    }

    // iai[i] = true when inequality i is inactive
    let mut inactive = vec![true; m];
    let mut excluded = vec![false; m];
    let mut s = vec![0.0; m];
    let max_iter = 50 * (n + m + p) + 100;
    let mut iter = 0;

    'outer: loop {
        iter += 1;
        if iter > max_iter {
            return Err(QpError::MaxIterations);
        }
        for k in p..ws.iq {
            inactive[ws.active[k]] = false;
        }
        let mut psi = 0.0;
        for i in 0..m {
            s[i] = dot(qp.a_in.row(i), &x) - qp.b_in[i];
            psi += s[i].min(0.0);
        }
        if psi.abs() <= (m as f64) * f64::EPSILON * c1 * c2 * 100.0 {
            break 'outer;
        }
        // snapshot for recovery from a dependent constraint
        let snap_x = x.clone();
        let snap_u = ws.u.clone();
        let snap_active = ws.active.clone();
        let snap_iq = ws.iq;
        let snap_j = ws.j.clone();
        let snap_r = ws.r.clone();
        let snap_rn = ws.r_norm;
        let snap_f = f;
        let snap_inactive = inactive.clone();
        excluded.iter_mut().for_each(|e| *e = false);

        'step2: loop {
            // most violated inactive, non-excluded constraint
            let mut ss = 0.0;
            let mut ip = usize::MAX;
            for i in 0..m {
                if inactive[i] && !excluded[i] && s[i] < ss {
                    ss = s[i];
                    ip = i;
                }
            }
            if ip == usize::MAX {
                break 'outer;
            }
            let np = qp.a_in.row(ip);
            ws.u[ws.iq] = 0.0;
            ws.active[ws.iq] = ip;

            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(QpError::MaxIterations);
                }
                ws.compute_d(np, &mut d);
                ws.update_z(&d, &mut z);
                ws.update_r(&d, &mut r);

                // largest dual step keeping active multipliers non-negative
                let mut l_drop = usize::MAX;
                let mut t1 = INF;
                for k in p..ws.iq {
                    if r[k] > 0.0 && ws.u[k] / r[k] < t1 {
                        t1 = ws.u[k] / r[k];
                        l_drop = ws.active[k];
                    }
                }
                // full primal step
                let zn = dot(&z, np);
                let mut t2 = if dot(&z, &z).abs() > f64::EPSILON {
                    -s[ip] / zn
                } else {
                    INF
                };
                if t2 < 0.0 {
                    t2 = INF;
                }
                let t = t1.min(t2);
                if t >= INF {
                    return Err(QpError::Infeasible);
                }
                if t2 >= INF {
                    // dual step only
                    for k in 0..ws.iq {
                        ws.u[k] -= t * r[k];
                    }
                    ws.u[ws.iq] += t;
                    inactive[l_drop] = true;
                    ws.delete_constraint(p, l_drop);
                    continue;
                }
                for k in 0..n {
                    x[k] += t * z[k];
                }
                f += t * zn * (0.5 * t + ws.u[ws.iq]);
                for k in 0..ws.iq {
                    ws.u[k] -= t * r[k];
                }
                ws.u[ws.iq] += t;

                if (t - t2).abs() <= f64::EPSILON * t2.abs().max(1.0) {
                    // full step: ip becomes active
                    if !ws.add_constraint(&mut d) {
                        x.clone_from(&snap_x);
                        ws.u.clone_from(&snap_u);
                        ws.active.clone_from(&snap_active);
                        ws.iq = snap_iq;
                        ws.j = snap_j.clone();
                        ws.r = snap_r.clone();
                        ws.r_norm = snap_rn;
                        f = snap_f;
                        inactive.clone_from(&snap_inactive);
                        excluded[ip] = true;
                        for i in 0..m {
                            s[i] = dot(qp.a_in.row(i), &x) - qp.b_in[i];
                        }
                        continue 'step2;
                    }
                    inactive[ip] = false;
                    continue 'outer;
                }
                // partial step: drop the blocking constraint and retry ip
                inactive[l_drop] = true;
                ws.delete_constraint(p, l_drop);
                s[ip] = dot(np, &x) - qp.b_in[ip];
            }
        }
    }

    let mut lambda_eq = vec![0.0; p];
    let mut lambda_in = vec![0.0; m];
    lambda_eq.copy_from_slice(&ws.u[..p]);
    for k in p..ws.iq {
        lambda_in[ws.active[k]] = ws.u[k];
    }
    let objective = 0.5 * dot(&x, &qp.h.matvec(&x)) + dot(qp.g, &x);
    let _ = f;
    Ok(QpSolution {
        x,
        objective,
        lambda_eq,
        lambda_in,
        iterations: iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn empty(n: usize) -> Mat<f64> {
        Mat::zeros(0, n)
    }

    #[test]
    fn unconstrained() {
        let h = Mat::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let g = [-2.0, 4.0];
        let sol = solve_qp(&QpProblem {
            h: &h,
            g: &g,
            a_eq: &empty(2),
            b_eq: &[],
            a_in: &empty(2),
            b_in: &[],
        })
        .unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-14 && (sol.x[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn quadprog_reference_example() {
        // minimize ½x² + ½y² + x  s.t.  x + 2y >= 1  →  (-0.6, 0.8)
        let h = Mat::identity(2);
        let a_in = Mat::from_rows(&[vec![1.0, 2.0]]);
        let sol = solve_qp(&QpProblem {
            h: &h,
            g: &[1.0, 0.0],
            a_eq: &empty(2),
            b_eq: &[],
            a_in: &a_in,
            b_in: &[1.0],
        })
        .unwrap();
        assert!((sol.x[0] + 0.6).abs() < 1e-12 && (sol.x[1] - 0.8).abs() < 1e-12);
        assert!((sol.lambda_in[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        let h = Mat::identity(1);
        let a_in = Mat::from_rows(&[vec![1.0], vec![-1.0]]);
        let res = solve_qp(&QpProblem {
            h: &h,
            g: &[0.0],
            a_eq: &empty(1),
            b_eq: &[],
            a_in: &a_in,
            b_in: &[1.0, 0.0],
        });
        assert_eq!(res.unwrap_err(), QpError::Infeasible);
    }

    #[test]
    fn rejects_indefinite() {
        let h = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        let res = solve_qp(&QpProblem {
            h: &h,
            g: &[0.0, 0.0],
            a_eq: &empty(2),
            b_eq: &[],
            a_in: &empty(2),
            b_in: &[],
        });
        assert_eq!(res.unwrap_err(), QpError::NotPositiveDefinite);
    }

    #[test]
    fn duplicate_constraints_are_tolerated() {
        let h = Mat::identity(2);
        let a_in = Mat::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]]);
        let sol = solve_qp(&QpProblem {
            h: &h,
            g: &[0.0, 0.0],
            a_eq: &empty(2),
            b_eq: &[],
            a_in: &a_in,
            b_in: &[1.0, 1.0, 2.0],
        })
        .unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
    }

    /// Enumerates every active set, solving the KKT system of each.
    fn brute_force(qp: &QpProblem<'_>) -> Option<(Vec<f64>, f64)> {
        let n = qp.h.rows();
        let p = qp.a_eq.rows();
        let m = qp.a_in.rows();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for mask in 0u32..(1 << m) {
            let act: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let k = p + act.len();
            let dim = n + k;
            let mut kkt = Mat::zeros(dim, dim);
            let mut rhs = vec![0.0; dim];
            for r in 0..n {
                for c in 0..n {
                    kkt[(r, c)] = qp.h[(r, c)];
                }
                rhs[r] = -qp.g[r];
            }
            let rows: Vec<(&[f64], f64)> = (0..p)
                .map(|i| (qp.a_eq.row(i), qp.b_eq[i]))
                .chain(act.iter().map(|&i| (qp.a_in.row(i), qp.b_in[i])))
                .collect();
            for (c, (row, b)) in rows.iter().enumerate() {
                for r in 0..n {
                    kkt[(r, n + c)] = -row[r];
                    kkt[(n + c, r)] = row[r];
                }
                rhs[n + c] = *b;
            }
            let Some(sol) = kkt.solve(&rhs) else { continue };
            let x = &sol[..n];
            let feasible =
                (0..m).all(|i| dot(qp.a_in.row(i), x) >= qp.b_in[i] - 1e-9) && sol[n + p..].iter().all(|&l| l >= -1e-9);
            if feasible {
                let obj = 0.5 * dot(x, &qp.h.matvec(x)) + dot(qp.g, x);
                if best.as_ref().map_or(true, |b| obj < b.1) {
                    best = Some((x.to_vec(), obj));
                }
            }
        }
        best
    }

    #[test]
    fn matches_active_set_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut solved = 0;
        for _ in 0..300 {
            let n = rng.gen_range(2..5);
            let p = rng.gen_range(0..2);
            let m = rng.gen_range(1..6);
            let b = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let h = &b.matmul(&b.transpose()) + &Mat::identity(n).scale(0.1);
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a_eq = Mat::from_fn(p, n, |_, _| rng.gen_range(-1.0..1.0));
            let b_eq: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a_in = Mat::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            let b_in: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..0.5)).collect();
            let qp = QpProblem {
                h: &h,
                g: &g,
                a_eq: &a_eq,
                b_eq: &b_eq,
                a_in: &a_in,
                b_in: &b_in,
            };
            match (solve_qp(&qp), brute_force(&qp)) {
                (Ok(sol), Some((x, obj))) => {
                    solved += 1;
                    assert!(
                        (sol.objective - obj).abs() < 1e-8 * (1.0 + obj.abs()),
                        "{} vs {}",
                        sol.objective,
                        obj
                    );
                    for (a, b) in sol.x.iter().zip(&x) {
                        assert!((a - b).abs() < 1e-6);
                    }
                    // stationarity with the returned multipliers
                    let mut grad = qp.h.matvec(&sol.x);
                    for (gi, g0) in grad.iter_mut().zip(&g) {
                        *gi += g0;
                    }
                    let ae = a_eq.tr_matvec(&sol.lambda_eq);
                    let ai = a_in.tr_matvec(&sol.lambda_in);
                    for i in 0..n {
                        assert!((grad[i] - ae[i] - ai[i]).abs() < 1e-8);
                    }
                    assert!(sol.lambda_in.iter().all(|&l| l >= -1e-12));
                }
                (Err(QpError::Infeasible), None) => {}
                (a, b) => panic!("solver {:?} disagrees with enumeration {:?}", a.map(|s| s.x), b),
            }
        }
        assert!(solved > 150);
    }
}
