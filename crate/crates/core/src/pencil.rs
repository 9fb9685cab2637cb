//! Operator tuples and the pencils `λ_T = Σ λ_j T_j`.
//!
//! A [`PositivePartition`] is a tuple of positive contractions summing to
//! the identity. For such tuples the pencils `(𝟙-λ)_T` and `(𝟙/(𝟙-λ))_T`
//! are invertible whenever every `Re λ_j < 1`, with explicit norm bounds
//! exposed here so that callers can check them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, json::RawMatrix, ComplexMatrix};

/// Tolerance for the Hermitian, range and sum checks of a partition.
pub const PARTITION_TOL: f64 = 1e-10;

/// `Σ λ_j T_j` for a list of equally sized (possibly rectangular) matrices.
pub fn combine(lambda: &[Complex64], ops: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    if lambda.len() != ops.len() {
        return Err(Error::Input(format!(
            "point has {} coordinates but the tuple has {} members",
            lambda.len(),
            ops.len()
        )));
    }
    let (r, c) = ops.first().map_or((0, 0), |t| t.shape());
    let mut out = ComplexMatrix::zeros(r, c);
    for (l, t) in lambda.iter().zip(ops) {
        out += t * *l;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTuple {
    ops: Vec<ComplexMatrix>,
}

#[derive(Serialize, Deserialize)]
struct RawTuple {
    d: usize,
    ops: Vec<RawMatrix>,
}

impl OperatorTuple {
    pub fn new(ops: Vec<ComplexMatrix>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Input("an operator tuple needs at least one member".into()));
        }
        let n = ops[0].nrows();
        for (j, t) in ops.iter().enumerate() {
            if t.nrows() != n || t.ncols() != n {
                return Err(Error::Input(format!(
                    "tuple member {} is {}x{}, expected {n}x{n}",
                    j + 1,
                    t.nrows(),
                    t.ncols()
                )));
            }
            numerics::ensure_finite_matrix(t, "tuple member")?;
        }
        Ok(Self { ops })
    }

    pub fn d(&self) -> usize {
        self.ops.len()
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn get(&self, j: usize) -> &ComplexMatrix {
        &self.ops[j]
    }

    /// `λ_T = Σ λ_j T_j`.
    pub fn scalar_action(&self, lambda: &[Complex64]) -> Result<ComplexMatrix> {
        combine(lambda, &self.ops)
    }

    /// Conjugates every member by the unitary `u`: `T_j ↦ u^* T_j u`.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Result<Self> {
        Self::new(self.ops.iter().map(|t| u.adjoint() * t * u).collect())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let raw = RawTuple {
            d: self.d(),
            ops: self.ops.iter().map(numerics::json::matrix_to_raw).collect(),
        };
        serde_json::to_value(raw).expect("tuple encodes")
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let raw: RawTuple = serde_json::from_value(value)?;
        if raw.d != raw.ops.len() {
            return Err(Error::Input(format!(
                "tuple declares d = {} but lists {} operators",
                raw.d,
                raw.ops.len()
            )));
        }
        let ops = raw
            .ops
            .iter()
            .map(|m| numerics::json::matrix_from_raw(m, "tuple member"))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ops)
    }
}

/// Positive contractions `0 <= T_j <= 1` with `Σ T_j = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivePartition {
    base: OperatorTuple,
}

impl PositivePartition {
    pub fn new(base: OperatorTuple) -> Result<Self> {
        let n = base.dim();
        let mut sum = ComplexMatrix::zeros(n, n);
        for (j, t) in base.ops().iter().enumerate() {
            let skew = (t - t.adjoint()).norm();
            if skew > PARTITION_TOL {
                return Err(Error::Input(format!(
                    "partition member {} is not Hermitian (|T - T*| = {skew:e})",
                    j + 1
                )));
            }
            let ev = numerics::hermitian_eigenvalues(t);
            if let (Some(lo), Some(hi)) = (ev.first(), ev.last()) {
                if *lo < -PARTITION_TOL || *hi > 1.0 + PARTITION_TOL {
                    return Err(Error::Input(format!(
                        "partition member {} has spectrum [{lo}, {hi}] outside [0, 1]",
                        j + 1
                    )));
                }
            }
            sum += t;
        }
        let defect = (sum - numerics::identity(n)).norm();
        if defect > PARTITION_TOL {
            return Err(Error::Input(format!(
                "partition does not sum to the identity (defect {defect:e})"
            )));
        }
        Ok(Self { base })
    }

    pub fn from_ops(ops: Vec<ComplexMatrix>) -> Result<Self> {
        Self::new(OperatorTuple::new(ops)?)
    }

    pub fn tuple(&self) -> &OperatorTuple {
        &self.base
    }

    pub fn d(&self) -> usize {
        self.base.d()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        self.base.ops()
    }

    pub fn scalar_action(&self, lambda: &[Complex64]) -> Result<ComplexMatrix> {
        self.base.scalar_action(lambda)
    }

    fn check_len(&self, z: &[Complex64]) -> Result<()> {
        if z.len() != self.d() {
            return Err(Error::Input(format!(
                "point has {} coordinates, expected {}",
                z.len(),
                self.d()
            )));
        }
        if z.iter().any(|w| !(w.re.is_finite() && w.im.is_finite())) {
            return Err(Error::Input("point has non-finite coordinates".into()));
        }
        Ok(())
    }

    fn check_left_half(&self, lambda: &[Complex64]) -> Result<()> {
        self.check_len(lambda)?;
        if let Some(j) = lambda.iter().position(|l| l.re >= 1.0) {
            return Err(Error::Domain(format!(
                "Re λ_{} = {} is not below 1",
                j + 1,
                lambda[j].re
            )));
        }
        Ok(())
    }

    fn invert(&self, m: ComplexMatrix) -> Result<ComplexMatrix> {
        numerics::inverse(&m)
            .map_err(|_| Error::Internal("pencil is singular although the partition hypotheses hold".into()))
    }

    /// `((𝟙-λ)_T)^{-1}` for `Re λ_j < 1`.
    pub fn one_minus_inverse(&self, lambda: &[Complex64]) -> Result<ComplexMatrix> {
        self.check_left_half(lambda)?;
        let shifted: Vec<Complex64> = lambda.iter().map(|l| 1.0 - l).collect();
        self.invert(self.scalar_action(&shifted)?)
    }

    /// `((𝟙/(𝟙-λ))_T)^{-1}` for `Re λ_j < 1`.
    pub fn cauchy_inverse(&self, lambda: &[Complex64]) -> Result<ComplexMatrix> {
        self.check_left_half(lambda)?;
        let coeffs: Vec<Complex64> = lambda.iter().map(|l| 1.0 / (1.0 - l)).collect();
        self.invert(self.scalar_action(&coeffs)?)
    }

    /// `((𝟙/z)_T)^{-1}` for `Re z_j > 0`.
    pub fn positive_cauchy_inverse(&self, z: &[Complex64]) -> Result<ComplexMatrix> {
        self.check_len(z)?;
        if let Some(j) = z.iter().position(|w| w.re <= 0.0) {
            return Err(Error::Domain(format!(
                "Re z_{} = {} is not positive",
                j + 1,
                z[j].re
            )));
        }
        let coeffs: Vec<Complex64> = z.iter().map(|w| 1.0 / w).collect();
        self.invert(self.scalar_action(&coeffs)?)
    }
}

/// Norm bound for `((𝟙-λ)_T)^{-1}`: `1 / (1 - max_j Re λ_j)`.
pub fn one_minus_bound(lambda: &[Complex64]) -> f64 {
    let m = lambda.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    1.0 / (1.0 - m)
}

/// Norm bound for `((𝟙/(𝟙-λ))_T)^{-1}`: `max_j |1-λ_j|^2 / (1 - Re λ_j)`.
pub fn cauchy_bound(lambda: &[Complex64]) -> f64 {
    lambda
        .iter()
        .map(|l| (1.0 - l).norm_sqr() / (1.0 - l.re))
        .fold(0.0, f64::max)
}

/// Norm bound for `((𝟙/z)_T)^{-1}`: `max_j |z_j|^2 / Re z_j`.
pub fn positive_cauchy_bound(z: &[Complex64]) -> f64 {
    z.iter().map(|w| w.norm_sqr() / w.re).fold(0.0, f64::max)
}

/// Orthogonal projections `P_j` with `Σ P_j = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionTuple {
    base: PositivePartition,
}

impl ProjectionTuple {
    pub fn new(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let base = PositivePartition::from_ops(ops)?;
        let ops = base.ops();
        for (i, p) in ops.iter().enumerate() {
            let idem = (p * p - p).norm();
            if idem > PARTITION_TOL {
                return Err(Error::Input(format!(
                    "member {} is not idempotent (|P² - P| = {idem:e})",
                    i + 1
                )));
            }
            for (j, q) in ops.iter().enumerate().skip(i + 1) {
                let cross = (p * q).norm();
                if cross > PARTITION_TOL {
                    return Err(Error::Input(format!(
                        "members {} and {} are not orthogonal (|P_i P_j| = {cross:e})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { base })
    }

    /// Selectors of consecutive coordinate blocks of the given sizes.
    pub fn coordinate_blocks(sizes: &[usize]) -> Result<Self> {
        let n: usize = sizes.iter().sum();
        let mut ops = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &s in sizes {
            let mut p = ComplexMatrix::zeros(n, n);
            for k in start..start + s {
                p[(k, k)] = Complex64::new(1.0, 0.0);
            }
            ops.push(p);
            start += s;
        }
        Self::new(ops)
    }

    pub fn partition(&self) -> &PositivePartition {
        &self.base
    }

    pub fn d(&self) -> usize {
        self.base.d()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        self.base.ops()
    }

    pub fn get(&self, j: usize) -> &ComplexMatrix {
        &self.base.ops()[j]
    }

    /// `λ_P`.
    pub fn scalar_action(&self, lambda: &[Complex64]) -> Result<ComplexMatrix> {
        self.base.scalar_action(lambda)
    }
}
