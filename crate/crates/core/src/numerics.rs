//! Dense complex linear algebra shared by every other module.
//!
//! Matrices and vectors are plain `nalgebra` dynamic arrays over
//! [`Complex64`]. The rank-revealing operations (kernel, pseudoinverse
//! solve) all go through one singular value decomposition so that the
//! bases they return are deterministic for a given input.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Default relative rank tolerance for kernels and pseudoinverses.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const SVD_MAX_ITER: usize = 10_000;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `<x, y>`, linear in the first argument.
#[inline]
pub fn inner(x: &ComplexVector, y: &ComplexVector) -> Complex64 {
    y.dotc(x)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn is_finite_matrix(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_finite_vector(v: &ComplexVector) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_finite_matrix(a: &ComplexMatrix, what: &str) -> Result<()> {
    if is_finite_matrix(a) {
        Ok(())
    } else {
        Err(Error::Input(format!("{what} has non-finite entries")))
    }
}

pub fn ensure_finite_vector(v: &ComplexVector, what: &str) -> Result<()> {
    if is_finite_vector(v) {
        Ok(())
    } else {
        Err(Error::Input(format!("{what} has non-finite entries")))
    }
}

/// Largest entry modulus.
pub fn max_abs<'a>(entries: impl IntoIterator<Item = &'a Complex64>) -> f64 {
    entries.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Sup norm of a point of C^d.
pub fn sup_norm(z: &[Complex64]) -> f64 {
    z.iter().map(|w| w.norm()).fold(0.0, f64::max)
}

pub fn ensure_in_open_polydisc(z: &[Complex64], what: &str) -> Result<()> {
    if z.iter().any(|w| !(w.re.is_finite() && w.im.is_finite())) {
        return Err(Error::Input(format!("{what} has non-finite coordinates")));
    }
    let m = sup_norm(z);
    if m < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{what} is not in the open polydisc (sup norm {m})"
        )))
    }
}

pub fn columns_to_matrix(rows: usize, cols: &[ComplexVector]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

pub fn matrix_to_columns(m: &ComplexMatrix) -> Vec<ComplexVector> {
    m.column_iter().map(|c| c.into_owned()).collect()
}

/// Singular value decomposition with values sorted in descending order.
///
/// Returns `(u, s, v)` with `a = u * diag(s) * v^*`, `u` of size m x k and
/// `v` of size n x k where k = min(m, n).
fn sorted_svd(a: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix)> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok((ComplexMatrix::zeros(m, 0), Vec::new(), ComplexMatrix::zeros(n, 0)));
    }
    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::Internal("singular value decomposition did not converge".into()))?;
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").adjoint();
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    let mut us = ComplexMatrix::zeros(m, k);
    let mut vs = ComplexMatrix::zeros(n, k);
    let mut ss = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_column(dst, &v.column(src));
        ss.push(s[src]);
    }
    Ok((us, ss, vs))
}

/// Singular values in descending order.
pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    ensure_finite_matrix(a, "matrix")?;
    Ok(sorted_svd(a)?.1)
}

/// Operator (spectral) norm: the largest singular value.
pub fn op_norm(a: &ComplexMatrix) -> Result<f64> {
    ensure_finite_matrix(a, "matrix")?;
    Ok(sorted_svd(a)?.1.first().copied().unwrap_or(0.0))
}

/// Smallest singular value of a square matrix.
pub fn min_singular_value(a: &ComplexMatrix) -> Result<f64> {
    ensure_finite_matrix(a, "matrix")?;
    Ok(sorted_svd(a)?.1.last().copied().unwrap_or(f64::INFINITY))
}

/// Right singular vectors of `a`, split at the numerical rank.
#[derive(Debug, Clone)]
pub struct KernelSplit {
    /// Orthonormal basis of the numerical kernel.
    pub kernel: Vec<ComplexVector>,
    /// Orthonormal basis of the orthogonal complement of the kernel.
    pub complement: Vec<ComplexVector>,
    /// All singular values of the (padded) square matrix, descending.
    pub singular_values: Vec<f64>,
    /// The rank threshold actually applied.
    pub threshold: f64,
}

impl KernelSplit {
    pub fn kernel_matrix(&self, n: usize) -> ComplexMatrix {
        columns_to_matrix(n, &self.kernel)
    }

    pub fn complement_matrix(&self, n: usize) -> ComplexMatrix {
        columns_to_matrix(n, &self.complement)
    }
}

/// Splits C^n (n = number of columns of `a`) into the numerical kernel of
/// `a` and its orthogonal complement.
///
/// A singular value counts as zero when it is below `tol * op_norm(a)`; the
/// zero matrix has full kernel.
pub fn kernel_split(a: &ComplexMatrix, tol: f64) -> Result<KernelSplit> {
    if !(tol > 0.0) {
        return Err(Error::Input(format!(
            "rank tolerance must be positive, got {tol}"
        )));
    }
    ensure_finite_matrix(a, "matrix")?;
    let (m, n) = a.shape();
    // Pad with zero rows so that the thin decomposition yields all n right
    // singular vectors.
    let padded;
    let work = if m < n {
        let mut p = ComplexMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        padded = p;
        &padded
    } else {
        a
    };
    let (_, s, v) = sorted_svd(work)?;
    let norm = s.first().copied().unwrap_or(0.0);
    let threshold = tol * norm;
    let mut kernel = Vec::new();
    let mut complement = Vec::new();
    for (j, &sj) in s.iter().enumerate() {
        let col = v.column(j).into_owned();
        if norm == 0.0 || sj < threshold {
            kernel.push(col);
        } else {
            complement.push(col);
        }
    }
    Ok(KernelSplit {
        kernel,
        complement,
        singular_values: s,
        threshold,
    })
}

/// Orthonormal basis of the numerical kernel of `a`.
pub fn kernel_basis(a: &ComplexMatrix, tol: f64) -> Result<Vec<ComplexVector>> {
    Ok(kernel_split(a, tol)?.kernel)
}

/// Moore-Penrose pseudoinverse with singular values below `tol * op_norm`
/// treated as zero.
pub fn pseudo_inverse(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    if !(tol > 0.0) {
        return Err(Error::Input(format!(
            "rank tolerance must be positive, got {tol}"
        )));
    }
    ensure_finite_matrix(a, "matrix")?;
    let (m, n) = a.shape();
    let (u, s, v) = sorted_svd(a)?;
    let norm = s.first().copied().unwrap_or(0.0);
    let mut out = ComplexMatrix::zeros(n, m);
    for (j, &sj) in s.iter().enumerate() {
        if norm == 0.0 || sj < tol * norm {
            continue;
        }
        let vj = v.column(j);
        let uj = u.column(j);
        out += (vj * uj.adjoint()) * Complex64::from(1.0 / sj);
    }
    Ok(out)
}

/// Minimal-norm least-squares solution of `a x = b`.
///
/// Returns the solution together with the residual `|a x - b|`.
pub fn min_norm_solve(a: &ComplexMatrix, b: &ComplexVector, tol: f64) -> Result<(ComplexVector, f64)> {
    if a.nrows() != b.len() {
        return Err(Error::Input(format!(
            "dimension mismatch: matrix has {} rows, right-hand side has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    ensure_finite_vector(b, "right-hand side")?;
    let x = pseudo_inverse(a, tol)? * b;
    let residual = (a * &x - b).norm();
    Ok((x, residual))
}

/// Dense solve by LU with partial pivoting.
pub fn solve(a: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::Input(format!(
            "cannot solve a {}x{} system with a right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Internal("linear system is numerically singular".into()))?;
    if is_finite_vector(&x) {
        Ok(x)
    } else {
        Err(Error::Internal("linear solve produced non-finite values".into()))
    }
}

/// Dense inverse by LU with partial pivoting.
pub fn inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::Input(format!(
            "cannot invert a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let inv = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Internal("matrix is numerically singular".into()))?;
    if is_finite_matrix(&inv) {
        Ok(inv)
    } else {
        Err(Error::Internal("inversion produced non-finite values".into()))
    }
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let h = (a + a.adjoint()) * Complex64::from(0.5);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of a general square complex matrix via the Schur form.
pub fn eigenvalues(a: &ComplexMatrix) -> Result<Vec<Complex64>> {
    ensure_finite_matrix(a, "matrix")?;
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::Internal("Schur decomposition did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// `|a^* a - 1|_F`.
pub fn unitarity_defect(a: &ComplexMatrix) -> f64 {
    (a.adjoint() * a - identity(a.ncols())).norm()
}

/// Unitary polar factor `W` of a square matrix `m = W H`.
///
/// When `m` is rank deficient the factor is not unique; the one built from
/// the sorted singular vectors is returned.
pub fn polar_unitary(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (u, _, v) = sorted_svd(m)?;
    Ok(u * v.adjoint())
}

pub mod json {
    //! Raw JSON shapes: a complex scalar is `[re, im]`, a vector an array of
    //! scalars and a matrix an array of row arrays.

    use super::*;

    pub type RawComplex = [f64; 2];
    pub type RawVector = Vec<RawComplex>;
    pub type RawMatrix = Vec<Vec<RawComplex>>;

    pub fn complex_to_raw(z: Complex64) -> RawComplex {
        [z.re, z.im]
    }

    pub fn complex_from_raw(r: RawComplex, what: &str) -> Result<Complex64> {
        if r[0].is_finite() && r[1].is_finite() {
            Ok(Complex64::new(r[0], r[1]))
        } else {
            Err(Error::Input(format!("{what} has a non-finite entry")))
        }
    }

    pub fn vector_to_raw(v: &ComplexVector) -> RawVector {
        v.iter().map(|z| complex_to_raw(*z)).collect()
    }

    pub fn point_to_raw(v: &[Complex64]) -> RawVector {
        v.iter().map(|z| complex_to_raw(*z)).collect()
    }

    pub fn vector_from_raw(r: &RawVector, what: &str) -> Result<ComplexVector> {
        let entries = r
            .iter()
            .map(|z| complex_from_raw(*z, what))
            .collect::<Result<Vec<_>>>()?;
        Ok(ComplexVector::from_vec(entries))
    }

    pub fn point_from_raw(r: &RawVector, what: &str) -> Result<Vec<Complex64>> {
        r.iter().map(|z| complex_from_raw(*z, what)).collect()
    }

    pub fn matrix_to_raw(m: &ComplexMatrix) -> RawMatrix {
        m.row_iter()
            .map(|row| row.iter().map(|z| complex_to_raw(*z)).collect())
            .collect()
    }

    pub fn matrix_from_raw(r: &RawMatrix, what: &str) -> Result<ComplexMatrix> {
        let rows = r.len();
        let cols = r.first().map_or(0, Vec::len);
        if r.iter().any(|row| row.len() != cols) {
            return Err(Error::Input(format!("{what} has rows of unequal length")));
        }
        let mut m = ComplexMatrix::zeros(rows, cols);
        for (i, row) in r.iter().enumerate() {
            for (j, z) in row.iter().enumerate() {
                m[(i, j)] = complex_from_raw(*z, what)?;
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_matrix, rng_from_seed};

    fn diag(entries: &[f64]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(entries.len(), entries.len());
        for (i, e) in entries.iter().enumerate() {
            m[(i, i)] = c64(*e, 0.0);
        }
        m
    }

    #[test]
    fn op_norm_examples() {
        assert!((op_norm(&identity(3)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(op_norm(&ComplexMatrix::zeros(3, 3)).unwrap(), 0.0);
        assert!((op_norm(&diag(&[2.0, 0.5])).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn op_norm_rejects_nan() {
        let mut m = identity(2);
        m[(0, 1)] = c64(f64::NAN, 0.0);
        assert!(matches!(op_norm(&m), Err(Error::Input(_))));
    }

    #[test]
    fn kernel_examples() {
        assert!(kernel_basis(&identity(3), DEFAULT_RANK_TOL).unwrap().is_empty());
        let k = kernel_basis(&ComplexMatrix::zeros(4, 4), 1e-10).unwrap();
        assert_eq!(k.len(), 4);
        let basis = columns_to_matrix(4, &k);
        assert!(unitarity_defect(&basis) < 1e-12);

        let k = kernel_basis(&diag(&[1.0, 1e-14]), 1e-10).unwrap();
        assert_eq!(k.len(), 1);
        assert!((k[0][1].norm() - 1.0).abs() < 1e-12);
        assert!(k[0][0].norm() < 1e-12);
    }

    #[test]
    fn kernel_rejects_nonpositive_tol() {
        assert!(matches!(kernel_basis(&identity(2), 0.0), Err(Error::Input(_))));
        assert!(matches!(kernel_basis(&identity(2), -1.0), Err(Error::Input(_))));
    }

    #[test]
    fn kernel_of_wide_matrix() {
        // 1 x 3 row: kernel is 2-dimensional.
        let a = ComplexMatrix::from_row_slice(1, 3, &[c64(1.0, 0.0), c64(0.0, 1.0), c64(2.0, 0.0)]);
        let split = kernel_split(&a, 1e-10).unwrap();
        assert_eq!(split.kernel.len(), 2);
        assert_eq!(split.complement.len(), 1);
        for v in &split.kernel {
            assert!((&a * v).norm() < 1e-12);
        }
    }

    #[test]
    fn min_norm_solve_examples() {
        let b = ComplexVector::from_vec(vec![c64(1.0, 2.0), c64(-0.5, 0.0), c64(0.0, 3.0)]);
        let (x, r) = min_norm_solve(&identity(3), &b, 1e-10).unwrap();
        assert!((x - &b).norm() < 1e-14);
        assert!(r < 1e-14);

        let (x, _) = min_norm_solve(&ComplexMatrix::zeros(2, 2), &ComplexVector::zeros(2), 1e-10).unwrap();
        assert_eq!(x.norm(), 0.0);

        let a = diag(&[1.0, 0.0]);
        let b = ComplexVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]);
        let (x, r) = min_norm_solve(&a, &b, 1e-10).unwrap();
        assert!((x - &b).norm() < 1e-14);
        assert!(r < 1e-14);
    }

    #[test]
    fn min_norm_solve_dimension_mismatch() {
        let b = ComplexVector::zeros(3);
        assert!(matches!(
            min_norm_solve(&identity(2), &b, 1e-10),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn kernel_properties_on_random_rank_deficient() {
        let mut rng = rng_from_seed(11);
        for trial in 0..20 {
            let n = 3 + trial % 6;
            let r = 1 + trial % (n - 1);
            let a = random_matrix(&mut rng, n, r) * random_matrix(&mut rng, r, n);
            let tol = 1e-10;
            let norm = op_norm(&a).unwrap();
            let k = kernel_basis(&a, tol).unwrap();
            assert_eq!(k.len(), n - r);
            let basis = columns_to_matrix(n, &k);
            assert!(unitarity_defect(&basis) < 1e-12);
            for v in &k {
                assert!((&a * v).norm() <= 2.0 * tol * norm);
            }
            let b = crate::sampling::random_vector(&mut rng, n);
            let (x, _) = min_norm_solve(&a, &b, tol).unwrap();
            for v in &k {
                assert!(inner(&x, v).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn op_norm_submultiplicative() {
        let mut rng = rng_from_seed(5);
        for _ in 0..50 {
            let a = random_matrix(&mut rng, 8, 8);
            let b = random_matrix(&mut rng, 8, 8);
            let lhs = op_norm(&(&a * &b)).unwrap();
            let rhs = op_norm(&a).unwrap() * op_norm(&b).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn companion_eigenvalues_of_cubic() {
        // z^3 - 1
        let one = c64(1.0, 0.0);
        let zero = c64(0.0, 0.0);
        let m = ComplexMatrix::from_row_slice(3, 3, &[zero, zero, one, one, zero, zero, zero, one, zero]);
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        for z in &ev {
            assert!(((z * z * z) - one).norm() < 1e-12);
        }
    }

    #[test]
    fn polar_factor_is_unitary() {
        let mut rng = rng_from_seed(2);
        let m = random_matrix(&mut rng, 5, 5);
        let w = polar_unitary(&m).unwrap();
        assert!(unitarity_defect(&w) < 1e-12);
    }

    #[test]
    fn raw_json_round_trip() {
        let mut rng = rng_from_seed(3);
        let m = random_matrix(&mut rng, 3, 2);
        let raw = json::matrix_to_raw(&m);
        let text = serde_json::to_string(&raw).unwrap();
        let back: json::RawMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(json::matrix_from_raw(&back, "m").unwrap(), m);
        let ragged: json::RawMatrix = vec![vec![[1.0, 0.0]], vec![]];
        assert!(json::matrix_from_raw(&ragged, "m").is_err());
    }
}
