//! Dense complex linear algebra helpers.

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    eigh(m).0.last().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &CMat) -> f64 {
    eigh(m).0.first().copied().unwrap_or(0.0)
}

/// Multiplies `v` by a phase so that its first entry above `tol` is real and positive.
pub fn fix_phase(v: &mut [C64], tol: f64) {
    if let Some(first) = v.iter().find(|z| z.norm() > tol) {
        let p = first.conj() / first.norm();
        for z in v.iter_mut() {
            *z *= p;
        }
    }
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().sum()
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMat) -> f64 {
    eigh(m).0.iter().map(|x| x.abs()).sum()
}

/// Optimal single-shot discrimination advantage `1/2 || a - b ||_1` for Hermitian `a`, `b`.
pub fn helstrom(a: &CMat, b: &CMat) -> f64 {
    0.5 * trace_norm_hermitian(&(a - b))
}

/// Singular values of `m` above the cutoff with their right singular vectors, from the Gram matrix.
fn gram_singular(m: &CMat, rel_tol: f64) -> Vec<(f64, CVec)> {
    let (vals, vecs) = eigh(&(m.adjoint() * m));
    let smax = vals.first().copied().unwrap_or(0.0).max(0.0).sqrt();
    let floor = (rel_tol * smax.max(1.0)).max(GRAM_FLOOR * smax);
    vals.iter().enumerate().filter(|(_, &l)| l > 0.0 && l.sqrt() > floor).map(|(k, &l)| (l.sqrt(), vecs.column(k).into_owned())).collect()
}

/// Singular values below this fraction of the largest are not resolved by [`gram_singular`].
const GRAM_FLOOR: f64 = 1e-7;

/// Moore-Penrose pseudo-inverse with relative cutoff.
pub fn pinv(m: &CMat, rel_tol: f64) -> CMat {
    let mut out = CMat::zeros(m.ncols(), m.nrows());
    if m.nrows() == 0 || m.ncols() == 0 {
        return out;
    }
    let ma = m.adjoint();
    for (s, v) in gram_singular(m, rel_tol) {
        out += &v * (v.adjoint() * &ma) * c(1.0 / (s * s), 0.0);
    }
    out
}

/// Closest matrix with orthonormal columns (or rows, when wide); numerically null directions map to zero.
pub fn polar_unitary(m: &CMat) -> CMat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return m.clone();
    }
    if m.nrows() < m.ncols() {
        return polar_unitary(&m.adjoint()).adjoint();
    }
    let mut inv_sqrt = CMat::zeros(m.ncols(), m.ncols());
    for (s, v) in gram_singular(m, 0.0) {
        inv_sqrt += &v * v.adjoint() * c(1.0 / s, 0.0);
    }
    m * inv_sqrt
}

/// Orthonormal basis of the orthogonal complement of the column span of `m`.
pub fn complement_basis(m: &CMat, tol: f64) -> CMat {
    let n = m.nrows();
    let proj = m * pinv(m, tol);
    let rest = CMat::identity(n, n) - proj;
    let (vals, vecs) = eigh(&rest);
    let cols: Vec<CVec> = vals.iter().enumerate().filter(|(_, &v)| v > 0.5).map(|(i, _)| vecs.column(i).into_owned()).collect();
    if cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

/// `|| V^dag V - I ||_max`.
pub fn isometry_defect(v: &CMat) -> f64 {
    let g = v.adjoint() * v;
    max_abs_diff(&g, &CMat::identity(g.nrows(), g.ncols()))
}

pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

/// Haar-distributed isometry `cols -> rows` (requires `rows >= cols`).
pub fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    assert!(rows >= cols, "random_isometry needs rows >= cols");
    if cols == 0 {
        return CMat::zeros(rows, 0);
    }
    let g = random_gaussian(rows, cols, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..cols {
        let d = r[(k, k)];
        if d.norm() > 0.0 {
            let p = d / d.norm();
            let mut col = q.column_mut(k);
            col *= p;
        }
    }
    q
}

pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    random_isometry(n, n, rng)
}

/// Random density matrix of full rank.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = random_gaussian(n, n, rng);
    let rho = &g * g.adjoint();
    let t = trace(&rho);
    rho / t
}

/// Permutes the axes of a row-major tensor stored flat.
pub fn permute_axes(data: &[C64], dims: &[usize], perm: &[usize]) -> Vec<C64> {
    if dims.is_empty() {
        return data.to_vec();
    }
    let a = ArrayD::from_shape_vec(IxDyn(dims), data.to_vec()).expect("tensor shape");
    let p = a.permuted_axes(IxDyn(perm));
    p.as_standard_layout().iter().cloned().collect()
}

/// Row-major flattening of a matrix.
pub fn row_major(m: &CMat) -> Vec<C64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for col in 0..m.ncols() {
            out.push(m[(r, col)]);
        }
    }
    out
}

pub fn from_row_major(rows: usize, cols: usize, data: &[C64]) -> CMat {
    CMat::from_row_slice(rows, cols, data)
}

/// The outer product `|v><v|`.
pub fn projector(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// Fidelity `|<a|b>|^2` of two pure states (unnormalized inputs are normalized).
pub fn pure_fidelity(a: &CVec, b: &CVec) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (a.dotc(b).norm() / (na * nb)).powi(2)
}
