//! Dense complex linear algebra: spectral norms, LU solves and primary matrix
//! functions via a blocked Schur-Parlett scheme.

use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};

pub type CMatrix = DMatrix<C64>;

/// Largest singular value.
pub fn norm2(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Singular values in decreasing order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn is_hermitian(a: &CMatrix, rel_tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(f64::MIN_POSITIVE);
    let n = a.nrows();
    (0..n).all(|i| (i..n).all(|j| (a[(i, j)] - a[(j, i)].conj()).norm() <= rel_tol * scale))
}

/// Solve `a x = b` by partial-pivoting LU.
pub fn lu_solve(a: &CMatrix, b: &[C64]) -> Result<Vec<C64>> {
    let rhs = DVector::from_column_slice(b);
    a.clone()
        .lu()
        .solve(&rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::SingularShift("dense LU factorization is singular".into()))
}

/// Scalar functions supported by [`matfun`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MatFn {
    /// Principal branch `z^{i s}` with the cut on `(-inf, 0]`.
    ImagPower(f64),
    /// `exp(-t z)`.
    Decay(f64),
}

impl MatFn {
    pub fn eval(self, z: C64) -> Result<C64> {
        match self {
            MatFn::ImagPower(s) => {
                if z.im == 0.0 && z.re <= 0.0 {
                    return Err(Error::BranchCut(format!("eigenvalue {z} on the branch cut")));
                }
                Ok((C64::new(0.0, s) * z.ln()).exp())
            }
            MatFn::Decay(t) => Ok((-t * z).exp()),
        }
    }

    /// Taylor coefficients `f^(k)(sigma) / k!` for `k = 0..count`.
    fn taylor(self, sigma: C64, count: usize) -> Result<Vec<C64>> {
        let mut c = Vec::with_capacity(count);
        c.push(self.eval(sigma)?);
        for k in 1..count {
            let prev = c[k - 1];
            let next = match self {
                MatFn::ImagPower(s) => prev * (C64::new(0.0, s) - (k - 1) as f64) / (k as f64 * sigma),
                MatFn::Decay(t) => prev * (-t) / k as f64,
            };
            c.push(next);
        }
        Ok(c)
    }

    /// Eigenvalues closer than this are evaluated in one Taylor block.
    fn close(self, a: C64, b: C64) -> bool {
        const DELTA: f64 = 0.1;
        let d = (a - b).norm();
        match self {
            MatFn::ImagPower(s) => d <= DELTA * a.norm().min(b.norm()) / (1.0 + s.abs()),
            MatFn::Decay(t) => d * t.abs() <= DELTA,
        }
    }
}

/// `f(A)` for a square complex matrix.
///
/// Hermitian inputs go through an eigendecomposition. General inputs use the
/// complex Schur form, reorder it so that clusters of close eigenvalues are
/// contiguous, evaluate clustered diagonal blocks by Taylor series and couple
/// blocks through triangular Sylvester equations.
pub fn matfun(a: &CMatrix, f: MatFn) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("matrix function of a non-square matrix".into()));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    if is_hermitian(a, 1e-13) {
        let eig = a.clone().symmetric_eigen();
        let fl = eig
            .eigenvalues
            .iter()
            .map(|&l| f.eval(C64::new(l, 0.0)))
            .collect::<Result<Vec<_>>>()?;
        let u = &eig.eigenvectors;
        let mut scaled = u.clone();
        for (j, v) in fl.iter().enumerate() {
            for i in 0..n {
                scaled[(i, j)] *= v;
            }
        }
        return Ok(scaled * u.adjoint());
    }
    let (mut q, mut t) = nalgebra::linalg::Schur::new(a.clone()).unpack();
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    let diag: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    for &z in &diag {
        f.eval(z)?;
    }
    let mut ids = cluster(&diag, f);
    reorder(&mut t, &mut q, &mut ids);
    let blocks = block_ranges(&ids);
    let ft = parlett(&t, &blocks, f)?;
    Ok(&q * ft * q.adjoint())
}

/// Cluster ids by single linkage under `f.close`, numbered by first appearance.
fn cluster(eigs: &[C64], f: MatFn) -> Vec<usize> {
    let n = eigs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if f.close(eigs[i], eigs[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        ids.push(label[r]);
    }
    ids
}

/// Swap adjacent diagonal entries until cluster ids are non-decreasing.
fn reorder(t: &mut CMatrix, q: &mut CMatrix, ids: &mut [usize]) {
    let n = ids.len();
    let mut sorted = false;
    while !sorted {
        sorted = true;
        for k in 0..n.saturating_sub(1) {
            if ids[k] > ids[k + 1] {
                swap_adjacent(t, q, k);
                ids.swap(k, k + 1);
                sorted = false;
            }
        }
    }
}

/// Exchange `t[k,k]` and `t[k+1,k+1]` with a Givens rotation.
fn swap_adjacent(t: &mut CMatrix, q: &mut CMatrix, k: usize) {
    let n = t.nrows();
    let (a, b, c) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k + 1)]);
    // Eigenvector of the 2x2 block for eigenvalue c.
    let (v1, v2) = (b, c - a);
    let r = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if r == 0.0 {
        return;
    }
    let (g1, g2) = (v1 / r, v2 / r);
    // G = [[g1, -conj(g2)], [g2, conj(g1)]]; T <- G^* T G, Q <- Q G.
    for j in 0..n {
        let (x, y) = (t[(k, j)], t[(k + 1, j)]);
        t[(k, j)] = g1.conj() * x + g2.conj() * y;
        t[(k + 1, j)] = -g2 * x + g1 * y;
    }
    for i in 0..n {
        let (x, y) = (t[(i, k)], t[(i, k + 1)]);
        t[(i, k)] = x * g1 + y * g2;
        t[(i, k + 1)] = -x * g2.conj() + y * g1.conj();
        let (x, y) = (q[(i, k)], q[(i, k + 1)]);
        q[(i, k)] = x * g1 + y * g2;
        q[(i, k + 1)] = -x * g2.conj() + y * g1.conj();
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
}

fn block_ranges(ids: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=ids.len() {
        if k == ids.len() || ids[k] != ids[start] {
            out.push((start, k));
            start = k;
        }
    }
    out
}

fn taylor_block(t: &CMatrix, f: MatFn) -> Result<CMatrix> {
    const MAX_TERMS: usize = 250;
    let m = t.nrows();
    if m == 1 {
        return Ok(CMatrix::from_element(1, 1, f.eval(t[(0, 0)])?));
    }
    let sigma = (0..m).map(|i| t[(i, i)]).sum::<C64>() / m as f64;
    let shifted = t - CMatrix::identity(m, m) * sigma;
    let coeffs = f.taylor(sigma, MAX_TERMS)?;
    let mut power = CMatrix::identity(m, m);
    let mut acc = CMatrix::identity(m, m) * coeffs[0];
    let mut small_run = 0;
    for c in coeffs.iter().skip(1) {
        power = &power * &shifted;
        let term = &power * *c;
        let tn = term.norm();
        acc += term;
        if tn <= f64::EPSILON * acc.norm() {
            small_run += 1;
            if small_run >= 2 || power.norm() == 0.0 {
                return Ok(acc);
            }
        } else {
            small_run = 0;
        }
    }
    Ok(acc)
}

/// Block Parlett recurrence on a reordered triangular matrix.
fn parlett(t: &CMatrix, blocks: &[(usize, usize)], f: MatFn) -> Result<CMatrix> {
    let n = t.nrows();
    let mut ft = CMatrix::zeros(n, n);
    for &(s, e) in blocks {
        let fb = taylor_block(&t.view((s, s), (e - s, e - s)).into_owned(), f)?;
        ft.view_mut((s, s), (e - s, e - s)).copy_from(&fb);
    }
    let nb = blocks.len();
    for d in 1..nb {
        for bi in 0..nb - d {
            let bj = bi + d;
            let (is, ie) = blocks[bi];
            let (js, je) = blocks[bj];
            let (p, qn) = (ie - is, je - js);
            let tij = t.view((is, js), (p, qn));
            let mut rhs = ft.view((is, is), (p, p)) * tij - tij * ft.view((js, js), (qn, qn));
            for &(ks, ke) in &blocks[bi + 1..bj] {
                let r = ke - ks;
                rhs += ft.view((is, ks), (p, r)) * t.view((ks, js), (r, qn))
                    - t.view((is, ks), (p, r)) * ft.view((ks, js), (r, qn));
            }
            let x = sylvester_triangular(
                &t.view((is, is), (p, p)).into_owned(),
                &t.view((js, js), (qn, qn)).into_owned(),
                rhs,
            )?;
            ft.view_mut((is, js), (p, qn)).copy_from(&x);
        }
    }
    Ok(ft)
}

/// Solve `a x - x b = c` with `a`, `b` upper triangular and disjoint spectra.
fn sylvester_triangular(a: &CMatrix, b: &CMatrix, mut c: CMatrix) -> Result<CMatrix> {
    let (p, q) = c.shape();
    for col in 0..q {
        for l in 0..col {
            let blc = b[(l, col)];
            for i in 0..p {
                let v = c[(i, l)] * blc;
                c[(i, col)] += v;
            }
        }
        let shift = b[(col, col)];
        for i in (0..p).rev() {
            let mut s = c[(i, col)];
            for k in i + 1..p {
                s -= a[(i, k)] * c[(k, col)];
            }
            let den = a[(i, i)] - shift;
            if den.norm() == 0.0 {
                return Err(Error::SingularShift("Sylvester blocks share an eigenvalue".into()));
            }
            c[(i, col)] = s / den;
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random(n: usize, seed: u64) -> CMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    #[test]
    fn diagonal_power_is_entrywise() {
        let a = CMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(2.0, 0.0), C64::new(5.0, 1.0)]));
        let f = matfun(&a, MatFn::ImagPower(0.7)).unwrap();
        assert!((f[(0, 0)] - MatFn::ImagPower(0.7).eval(C64::new(2.0, 0.0)).unwrap()).norm() < 1e-14);
        assert!((f[(1, 1)] - MatFn::ImagPower(0.7).eval(C64::new(5.0, 1.0)).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn decay_matches_expm() {
        let a = random(12, 3) + CMatrix::identity(12, 12) * C64::new(2.0, 0.0);
        let f = matfun(&a, MatFn::Decay(0.8)).unwrap();
        let reference = (a * C64::new(-0.8, 0.0)).exp();
        assert!(max_diff(&f, &reference) < 1e-11, "{}", max_diff(&f, &reference));
    }

    #[test]
    fn power_group_law() {
        // Shifted so the spectrum avoids the branch cut.
        let a = random(10, 7) + CMatrix::identity(10, 10) * C64::new(3.0, 0.0);
        let f1 = matfun(&a, MatFn::ImagPower(0.4)).unwrap();
        let f2 = matfun(&a, MatFn::ImagPower(-0.4)).unwrap();
        assert!(max_diff(&(f1 * f2), &CMatrix::identity(10, 10)) < 1e-10);
    }

    #[test]
    fn jordan_block_uses_taylor() {
        // exp(-t J) for a 3x3 Jordan block with eigenvalue 1.
        let mut j = CMatrix::identity(3, 3);
        j[(0, 1)] = C64::new(1.0, 0.0);
        j[(1, 2)] = C64::new(1.0, 0.0);
        let t = 0.5;
        let f = matfun(&j, MatFn::Decay(t)).unwrap();
        let e = (-t as f64).exp();
        assert!((f[(0, 0)].re - e).abs() < 1e-13);
        assert!((f[(0, 1)].re + t * e).abs() < 1e-13);
        assert!((f[(0, 2)].re - t * t / 2.0 * e).abs() < 1e-13);
    }

    #[test]
    fn branch_cut_detected() {
        let a = CMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)]));
        assert!(matches!(matfun(&a, MatFn::ImagPower(1.0)), Err(Error::BranchCut(_))));
    }

    #[test]
    fn hermitian_power_is_unitary() {
        let b = random(8, 11);
        let a = &b * b.adjoint() + CMatrix::identity(8, 8);
        let f = matfun(&a, MatFn::ImagPower(2.5)).unwrap();
        assert!((norm2(&f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lu_solve_roundtrip() {
        let a = random(6, 5) + CMatrix::identity(6, 6) * C64::new(2.0, 0.0);
        let x: Vec<C64> = (0..6).map(|i| C64::new(i as f64, 1.0)).collect();
        let b = &a * DVector::from_column_slice(&x);
        let y = lu_solve(&a, b.as_slice()).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).norm() < 1e-12);
        }
    }
}
