//! Full (unrestarted) GMRES with right preconditioning.

use crate::C64;

#[derive(Debug, Clone)]
pub struct GmresConfig {
    /// Maximum Krylov dimension; there is no restart.
    pub max_iter: usize,
    /// Relative residual target `||b - A x|| / ||b||`.
    pub tol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresResult {
    pub x: Vec<C64>,
    pub iterations: usize,
    /// True relative residual of the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn givens(a: C64, b: C64) -> (f64, C64) {
    if b.norm() == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if a.norm() == 0.0 {
        return (0.0, b.conj() / b.norm());
    }
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let c = a.norm() / r;
    let s = (a / a.norm()) * b.conj() / r;
    (c, s)
}

/// Solve `A x = b` with `A` given by `apply` and right preconditioner `precond`.
pub fn gmres<A, P>(apply: A, precond: P, b: &[C64], config: &GmresConfig) -> GmresResult
where
    A: Fn(&[C64]) -> Vec<C64>,
    P: Fn(&[C64]) -> Vec<C64>,
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return GmresResult {
            x: vec![C64::new(0.0, 0.0); n],
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let m = config.max_iter.min(n).max(1);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    basis.push(b.iter().map(|v| v / b_norm).collect());
    // Column-major Hessenberg, already rotated to triangular form.
    let mut h: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut rot: Vec<(f64, C64)> = Vec::with_capacity(m);
    let mut g = vec![C64::new(0.0, 0.0); m + 1];
    g[0] = C64::new(b_norm, 0.0);
    let mut k = 0;
    while k < m {
        let z = precond(&basis[k]);
        let mut w = apply(&z);
        let mut col = vec![C64::new(0.0, 0.0); k + 2];
        // Modified Gram-Schmidt, two passes for stability.
        for _ in 0..2 {
            for (j, v) in basis.iter().enumerate() {
                let c = dot(v, &w);
                col[j] += c;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
        }
        let w_norm = norm(&w);
        col[k + 1] = C64::new(w_norm, 0.0);
        for (j, &(c, s)) in rot.iter().enumerate() {
            let (a, b) = (col[j], col[j + 1]);
            col[j] = c * a + s * b;
            col[j + 1] = -s.conj() * a + c * b;
        }
        let (c, s) = givens(col[k], col[k + 1]);
        let (a, b) = (col[k], col[k + 1]);
        col[k] = c * a + s * b;
        col[k + 1] = C64::new(0.0, 0.0);
        let gk = g[k];
        g[k] = c * gk;
        g[k + 1] = -s.conj() * gk;
        rot.push((c, s));
        h.push(col);
        k += 1;
        if g[k].norm() / b_norm <= config.tol * 0.5 || w_norm == 0.0 {
            break;
        }
        basis.push(w.iter().map(|v| v / w_norm).collect());
    }
    // Back substitution on the triangular factor.
    let mut y = vec![C64::new(0.0, 0.0); k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[j][i] * y[j];
        }
        y[i] = s / h[i][i];
    }
    let mut u = vec![C64::new(0.0, 0.0); n];
    for (j, yj) in y.iter().enumerate() {
        for (ui, vi) in u.iter_mut().zip(&basis[j]) {
            *ui += yj * vi;
        }
    }
    let x = precond(&u);
    let ax = apply(&x);
    let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let residual = norm(&r) / b_norm;
    GmresResult {
        x,
        iterations: k,
        residual,
        converged: residual <= config.tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_shifted_tridiagonal() {
        let n = 40;
        let apply = |x: &[C64]| -> Vec<C64> {
            (0..n)
                .map(|i| {
                    let mut v = C64::new(4.0, 1.0) * x[i];
                    if i > 0 {
                        v -= x[i - 1];
                    }
                    if i + 1 < n {
                        v -= 2.0 * x[i + 1];
                    }
                    v
                })
                .collect()
        };
        let b: Vec<C64> = (0..n).map(|i| C64::new(1.0, i as f64 * 0.1)).collect();
        let res = gmres(apply, |x: &[C64]| x.to_vec(), &b, &GmresConfig::default());
        assert!(res.converged, "{res:?}");
        assert!(res.residual <= 1e-10);
    }

    #[test]
    fn exact_preconditioner_converges_in_one_step() {
        let d: Vec<C64> = (1..=16).map(|i| C64::new(i as f64, 0.5)).collect();
        let apply = |x: &[C64]| x.iter().zip(&d).map(|(a, b)| a * b).collect::<Vec<_>>();
        let pre = |x: &[C64]| x.iter().zip(&d).map(|(a, b)| a / b).collect::<Vec<_>>();
        let b = vec![C64::new(1.0, 0.0); 16];
        let res = gmres(apply, pre, &b, &GmresConfig::default());
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
    }
}
