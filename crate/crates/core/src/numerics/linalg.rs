use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::error::{invalid, Error, Result};

/// Relative cutoff below which singular values count as zero.
pub const DEFAULT_PINV_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 10_000;

/// Thin singular value decomposition `A = U diag(S) Vᵀ`.
///
/// For an `m × n` input, `U` is `m × r`, `V` is `n × r` with `r = min(m, n)`.
/// `S` is non-increasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
}

impl Svd {
    pub fn reconstruct(&self) -> Array2<f64> {
        let us = &self.u * &self.s.view().insert_axis(Axis(0));
        us.dot(&self.v.t())
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: ArrayView2<f64>) -> Result<Svd> {
    if a.iter().any(|x| !x.is_finite()) {
        return invalid("svd: matrix has non-finite entries");
    }
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return invalid("svd: empty matrix");
    }
    if m < n {
        let t = svd(a.t())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }

    // Columns of `w` are rotated until mutually orthogonal; `v` accumulates
    // the rotations.
    let mut w = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let cp = w.column(p);
                    let cq = w.column(q);
                    (cp.dot(&cp), cq.dot(&cq), cp.dot(&cq))
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                rotate_columns(&mut w, p, q, c, sn);
                rotate_columns(&mut v, p, q, c, sn);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "svd: Jacobi sweeps did not converge within {MAX_SWEEPS}"
        )));
    }

    let norms: Vec<f64> = (0..n).map(|j| w.column(j).dot(&w.column(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let smax = norms[order[0]];
    let mut u = Array2::<f64>::zeros((m, n));
    let mut s = Array1::<f64>::zeros(n);
    let mut vs = Array2::<f64>::zeros((n, n));
    let mut filled = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        vs.column_mut(dst).assign(&v.column(src));
        let norm = norms[src];
        if norm > smax * f64::EPSILON * (m as f64) && norm > 0.0 {
            s[dst] = norm;
            u.column_mut(dst).assign(&(&w.column(src) / norm));
            filled.push(dst);
        }
    }
    complete_orthonormal(&mut u, &filled);
    Ok(Svd { u, s, v: vs })
}

fn rotate_columns(mat: &mut Array2<f64>, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..mat.nrows() {
        let xp = mat[[r, p]];
        let xq = mat[[r, q]];
        mat[[r, p]] = c * xp - s * xq;
        mat[[r, q]] = s * xp + c * xq;
    }
}

/// Fill columns of `u` not listed in `filled` with unit vectors orthogonal to
/// every other column (Gram–Schmidt against the standard basis).
fn complete_orthonormal(u: &mut Array2<f64>, filled: &[usize]) {
    let (m, n) = u.dim();
    let mut done: Vec<usize> = filled.to_vec();
    let mut basis = 0usize;
    for col in 0..n {
        if filled.contains(&col) {
            continue;
        }
        while basis < m {
            let mut cand = Array1::<f64>::zeros(m);
            cand[basis] = 1.0;
            basis += 1;
            for _ in 0..2 {
                for &d in &done {
                    let proj = u.column(d).dot(&cand);
                    cand.scaled_add(-proj, &u.column(d));
                }
            }
            let norm = cand.dot(&cand).sqrt();
            if norm > 1e-8 {
                u.column_mut(col).assign(&(cand / norm));
                done.push(col);
                break;
            }
        }
    }
}

/// Moore–Penrose pseudoinverse; singular values `<= tol * max(S)` are dropped.
pub fn pseudoinverse(a: ArrayView2<f64>, tol: f64) -> Result<Array2<f64>> {
    if !(tol >= 0.0) {
        return invalid("pseudoinverse: tol must be non-negative");
    }
    let d = svd(a)?;
    let smax = d.s.iter().cloned().fold(0.0, f64::max);
    let inv: Array1<f64> = d
        .s
        .mapv(|x| if x > tol * smax && x > 0.0 { 1.0 / x } else { 0.0 });
    let r = inv.iter().filter(|&&x| x != 0.0).count();
    let v = d.v.slice(s![.., ..r]);
    let u = d.u.slice(s![.., ..r]);
    let vs = &v * &inv.slice(s![..r]).insert_axis(Axis(0));
    Ok(vs.dot(&u.t()))
}
