//! Desingularized models at a carapoint `τ ∈ 𝕋^d`.
//!
//! With `N = Ker(1 - Dτ_P)` the operator `Dτ_P` splits as `1_N ⊕ Q` on
//! `N ⊕ N⊥`, and each projection `P_j` splits into blocks
//! `[[X_j, B_j], [B_j*, Y_j]]`. The compressed tuple `Y` gives the inner
//! function
//!
//! ```text
//! I(λ) = 1 - ((𝟙/(𝟙 - τ̄λ))_Y)^{-1}
//! ```
//!
//! on `N⊥`, and the N⊥-component `u` of the state vector satisfies
//! `1 - conj(φ(μ))φ(λ) = <(1 - I(μ)*I(λ)) u(λ), u(μ)>`. Along with it
//! `φ(λ) = a + <I(λ)(1 - QI(λ))^{-1} γ, β̂>` where `β̂ = τ̄_P β`.
//!
//! All vectors of a [`DesingularizedModel`] are stored in the coordinates
//! of an orthonormal basis of `N⊥`.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryPoint, UNIMODULAR_TOL};
use crate::error::{Error, Result};
use crate::function::PolydiscFunction;
use crate::numerics::json::{self, RawComplex, RawMatrix, RawVector};
use crate::numerics::{
    self, columns_to_matrix, identity, inner, ComplexMatrix, ComplexVector, DEFAULT_RANK_TOL,
};
use crate::pencil::{combine, PositivePartition};
use crate::realization::{ColligationClass, Realization};

/// Relative residual below which γ counts as lying in `Ran(1 - Dτ_P)`.
pub const RANGE_TOL: f64 = 1e-8;

/// Tolerance for the projection block identities.
pub const BLOCK_TOL: f64 = 1e-10;

/// Tolerance for the block-diagonal form of `Dτ_P` and vectors in `N⊥`.
pub const SPLIT_TOL: f64 = 1e-8;

/// Smallest admissible singular value of `1 - Q`.
pub const FIXED_POINT_TOL: f64 = 1e-10;

/// Minimum distance from `τ_j` for torus evaluation of `I`.
pub const TORUS_EXCLUSION: f64 = 1e-8;

/// Relative singular values in this window make the kernel dimension fragile.
pub const BORDERLINE_WINDOW: (f64, f64) = (1e-12, 1e-8);

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RangeTest {
    pub is_carapoint: bool,
    /// `|(1 - Dτ_P)x - γ|` for the least-squares solution x.
    pub residual: f64,
}

fn check_tau(r: &Realization, tau: &BoundaryPoint) -> Result<()> {
    if tau.d() != r.d() {
        return Err(Error::Input(format!(
            "τ has {} coordinates, the realization {} variables",
            tau.d(),
            r.d()
        )));
    }
    Ok(())
}

/// `1 - Dτ_P`.
pub fn boundary_pencil(r: &Realization, tau: &BoundaryPoint) -> Result<ComplexMatrix> {
    check_tau(r, tau)?;
    let tp = r.projections().scalar_action(tau.coords())?;
    Ok(identity(r.dim()) - r.d_matrix() * tp)
}

/// Tests `γ ∈ Ran(1 - Dτ_P)` by least squares.
pub fn carapoint_range_test(r: &Realization, tau: &BoundaryPoint) -> Result<RangeTest> {
    let a = boundary_pencil(r, tau)?;
    let (_, residual) = numerics::min_norm_solve(&a, r.gamma(), DEFAULT_RANK_TOL)?;
    Ok(RangeTest {
        is_carapoint: residual <= RANGE_TOL * r.gamma().norm(),
        residual,
    })
}

/// The split of `C^n = N ⊕ N⊥` with the blocks of every `P_j`.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    /// Orthonormal basis of N, as columns (n x k).
    pub n_basis: ComplexMatrix,
    /// Orthonormal basis of N⊥, as columns (n x (n-k)).
    pub nperp_basis: ComplexMatrix,
    /// `X_j` on N (k x k).
    pub x: Vec<ComplexMatrix>,
    /// `B_j : N⊥ → N` (k x (n-k)).
    pub b: Vec<ComplexMatrix>,
    pub y: PositivePartition,
    /// Compression of `Dτ_P` to N⊥.
    pub q: ComplexMatrix,
    /// Singular values of `1 - Dτ_P`, descending.
    pub singular_values: Vec<f64>,
    /// Worst residual among the block identities.
    pub identity_residual: f64,
    /// Largest off-diagonal block of `Dτ_P` and `|X-block - 1_N|`.
    pub diagonal_residual: f64,
    /// Smallest singular value of `1 - Q`.
    pub fixed_point_margin: f64,
    pub warnings: Vec<String>,
}

impl BlockDecomposition {
    pub fn kernel_dim(&self) -> usize {
        self.n_basis.ncols()
    }

    pub fn d(&self) -> usize {
        self.x.len()
    }

    /// `Σ λ_j X_j`.
    pub fn x_action(&self, lambda: &[Complex64]) -> Result<ComplexMatrix> {
        combine(lambda, &self.x)
    }

    /// `Σ λ_j B_j`.
    pub fn b_action(&self, lambda: &[Complex64]) -> Result<ComplexMatrix> {
        combine(lambda, &self.b)
    }

    /// `Σ λ_j B_j*`.
    pub fn b_adjoint_action(&self, lambda: &[Complex64]) -> Result<ComplexMatrix> {
        Ok(self.b_action(&conj_all(lambda))?.adjoint())
    }

    pub fn y_action(&self, lambda: &[Complex64]) -> Result<ComplexMatrix> {
        self.y.scalar_action(lambda)
    }

    /// Worst residual of `Σ X_j = 1`, `Σ B_j = 0`, `Σ Y_j = 1` and the four
    /// quadratic identities between the blocks.
    pub fn block_identity_residual(&self) -> f64 {
        let k = self.kernel_dim();
        let m = self.nperp_basis.ncols();
        let d = self.d();
        let mut worst: f64 = 0.0;
        let sum = |ops: &[ComplexMatrix], r: usize, c: usize| {
            ops.iter().fold(ComplexMatrix::zeros(r, c), |acc, t| acc + t)
        };
        worst = worst.max((sum(&self.x, k, k) - identity(k)).norm());
        worst = worst.max(sum(&self.b, k, m).norm());
        worst = worst.max((sum(self.y.ops(), m, m) - identity(m)).norm());
        let y = self.y.ops();
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                let c = Complex64::from(delta);
                let (xi, xj, bi, bj, yi, yj) = (&self.x[i], &self.x[j], &self.b[i], &self.b[j], &y[i], &y[j]);
                let r1 = bi * bj.adjoint() - (xj * c - xi * xj);
                let r2 = bi * yj - (bj * c - xi * bj);
                let r3 = bi.adjoint() * xj - (bj.adjoint() * c - yi * bj.adjoint());
                let r4 = bi.adjoint() * bj - (yj * c - yi * yj);
                for r in [r1, r2, r3, r4] {
                    worst = worst.max(r.norm());
                }
            }
        }
        worst
    }

    /// Worst residual of the four pencil identities at `(λ, μ)`.
    pub fn pencil_identity_residual(&self, lambda: &[Complex64], mu: &[Complex64]) -> Result<f64> {
        let prod: Vec<Complex64> = lambda.iter().zip(mu).map(|(l, m)| l * m).collect();
        let r1 = self.b_action(mu)? * self.b_adjoint_action(lambda)?
            - (self.x_action(&prod)? - self.x_action(mu)? * self.x_action(lambda)?);
        let r2 = self.b_adjoint_action(mu)? * self.x_action(lambda)?
            - (self.b_adjoint_action(&prod)? - self.y_action(mu)? * self.b_adjoint_action(lambda)?);
        let r3 = self.b_action(mu)? * self.y_action(lambda)?
            - (self.b_action(&prod)? - self.x_action(mu)? * self.b_action(lambda)?);
        let r4 = self.b_adjoint_action(mu)? * self.b_action(lambda)?
            - (self.y_action(&prod)? - self.y_action(mu)? * self.y_action(lambda)?);
        Ok([r1, r2, r3, r4].iter().map(|r| r.norm()).fold(0.0, f64::max))
    }

    /// Residual of `λ_Y + λ_{B*}(1_N - λ_X)^{-1}λ_B = 1 - ((𝟙/(𝟙-λ))_Y)^{-1}`.
    pub fn schur_complement_residual(&self, lambda: &[Complex64]) -> Result<f64> {
        let k = self.kernel_dim();
        let m = self.nperp_basis.ncols();
        let mut lhs = self.y_action(lambda)?;
        if k > 0 {
            let inv = numerics::inverse(&(identity(k) - self.x_action(lambda)?))?;
            lhs += self.b_adjoint_action(lambda)? * inv * self.b_action(lambda)?;
        }
        let rhs = identity(m) - self.y.cauchy_inverse(lambda)?;
        Ok((lhs - rhs).norm())
    }
}

fn conj_all(z: &[Complex64]) -> Vec<Complex64> {
    z.iter().map(|w| w.conj()).collect()
}

fn hermitian_part(m: ComplexMatrix) -> ComplexMatrix {
    (&m + m.adjoint()) * Complex64::from(0.5)
}

/// Splits `C^n` along `N = Ker(1 - Dτ_P)` and asserts the block identities.
pub fn split(r: &Realization, tau: &BoundaryPoint) -> Result<BlockDecomposition> {
    if r.class() == ColligationClass::General {
        return Err(Error::Precondition(
            "desingularization needs a contractive colligation".into(),
        ));
    }
    let test = carapoint_range_test(r, tau)?;
    if !test.is_carapoint {
        return Err(Error::Precondition(format!(
            "γ is not in the range of 1 - Dτ_P (residual {:e})",
            test.residual
        )));
    }
    let n = r.dim();
    let a = boundary_pencil(r, tau)?;
    let ks = numerics::kernel_split(&a, DEFAULT_RANK_TOL)?;
    let kn = columns_to_matrix(n, &ks.kernel);
    let kp = columns_to_matrix(n, &ks.complement);
    let k = kn.ncols();
    let m = kp.ncols();

    let mut warnings = Vec::new();
    let norm = ks.singular_values.first().copied().unwrap_or(0.0);
    for s in &ks.singular_values {
        let rel = if norm > 0.0 { s / norm } else { 0.0 };
        if rel >= BORDERLINE_WINDOW.0 && rel <= BORDERLINE_WINDOW.1 {
            warnings.push(format!(
                "singular value {s:e} of 1 - Dτ_P is close to the rank threshold"
            ));
        }
    }

    let p = r.projections().ops();
    let x: Vec<ComplexMatrix> = p
        .iter()
        .map(|pj| hermitian_part(kn.adjoint() * pj * &kn))
        .collect();
    let b: Vec<ComplexMatrix> = p.iter().map(|pj| kn.adjoint() * pj * &kp).collect();
    let y_ops: Vec<ComplexMatrix> = p
        .iter()
        .map(|pj| hermitian_part(kp.adjoint() * pj * &kp))
        .collect();
    let y = PositivePartition::from_ops(y_ops)
        .map_err(|e| Error::Internal(format!("compressed projections are not a partition: {e}")))?;

    let dt = r.d_matrix() * r.projections().scalar_action(tau.coords())?;
    let q = kp.adjoint() * &dt * &kp;
    let mut diagonal_residual: f64 = 0.0;
    if k > 0 {
        diagonal_residual = diagonal_residual
            .max((kn.adjoint() * &dt * &kn - identity(k)).norm())
            .max((kn.adjoint() * &dt * &kp).norm())
            .max((kp.adjoint() * &dt * &kn).norm());
    }
    if diagonal_residual > SPLIT_TOL {
        return Err(Error::Internal(format!(
            "Dτ_P is not block diagonal on N ⊕ N⊥ (residual {diagonal_residual:e})"
        )));
    }
    let fixed_point_margin = if m > 0 {
        numerics::min_singular_value(&(identity(m) - &q))?
    } else {
        f64::INFINITY
    };
    if fixed_point_margin <= FIXED_POINT_TOL {
        return Err(Error::Internal(format!(
            "Q has a numerical fixed vector (σ_min(1 - Q) = {fixed_point_margin:e})"
        )));
    }

    let mut blocks = BlockDecomposition {
        n_basis: kn,
        nperp_basis: kp,
        x,
        b,
        y,
        q,
        singular_values: ks.singular_values,
        identity_residual: 0.0,
        diagonal_residual,
        fixed_point_margin,
        warnings,
    };
    blocks.identity_residual = blocks.block_identity_residual();
    if blocks.identity_residual > BLOCK_TOL {
        return Err(Error::Internal(format!(
            "projection block identities fail (residual {:e})",
            blocks.identity_residual
        )));
    }
    Ok(blocks)
}

/// Where `I(λ)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IDomain {
    OpenPolydisc,
    /// Torus points with every `λ_j ≠ τ_j`.
    TorusOffTau,
}

#[derive(Debug, Clone)]
pub struct DesingularizedModel {
    pub tau: BoundaryPoint,
    /// Orthonormal basis of N in ambient coordinates.
    pub n_basis: Vec<ComplexVector>,
    /// Orthonormal basis of N⊥ in ambient coordinates; absent for models
    /// loaded from file.
    pub nperp_basis: Option<ComplexMatrix>,
    pub y: PositivePartition,
    pub q: ComplexMatrix,
    pub beta_hat: ComplexVector,
    pub gamma: ComplexVector,
    pub a: Complex64,
    pub u_tau: ComplexVector,
    pub omega: Complex64,
    pub blocks: Option<BlockDecomposition>,
}

/// Builds the desingularized model of `r` at `τ`.
pub fn desingularize(r: &Realization, tau: &BoundaryPoint) -> Result<DesingularizedModel> {
    let blocks = split(r, tau)?;
    let kn = &blocks.n_basis;
    let kp = &blocks.nperp_basis;
    let scale = r.gamma().norm().max(1.0);

    let gamma_n = (kn.adjoint() * r.gamma()).norm();
    if gamma_n > SPLIT_TOL * scale {
        return Err(Error::Internal(format!("γ has a component {gamma_n:e} in N")));
    }
    let tau_bar_p = r.projections().scalar_action(&tau.conj())?;
    let beta_hat_ambient = tau_bar_p * r.beta();
    let beta_n = (kn.adjoint() * &beta_hat_ambient).norm();
    if beta_n > SPLIT_TOL * r.beta().norm().max(1.0) {
        return Err(Error::Internal(format!("τ̄_P β has a component {beta_n:e} in N")));
    }

    let u_ambient = boundary_vector(r, tau)?;
    let gamma = kp.adjoint() * r.gamma();
    let beta_hat = kp.adjoint() * beta_hat_ambient;
    let u_tau = kp.adjoint() * &u_ambient;
    let m = kp.ncols();
    let eq = ((identity(m) - &blocks.q) * &u_tau - &gamma).norm();
    if eq > SPLIT_TOL * scale {
        return Err(Error::Internal(format!("(1 - Q)u(τ) = γ fails by {eq:e}")));
    }
    let omega = r.a() + inner(&u_tau, &beta_hat);
    if r.class() == ColligationClass::Unitary && (omega.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::Internal(format!(
            "boundary value ω = {omega} is not unimodular"
        )));
    }
    Ok(DesingularizedModel {
        tau: tau.clone(),
        n_basis: numerics::matrix_to_columns(kn),
        nperp_basis: Some(kp.clone()),
        y: blocks.y.clone(),
        q: blocks.q.clone(),
        beta_hat,
        gamma,
        a: r.a(),
        u_tau,
        omega,
        blocks: Some(blocks),
    })
}

/// `u(τ)`: the minimal-norm solution of `(1 - Dτ_P)x = γ`, in ambient
/// coordinates.
pub fn boundary_vector(r: &Realization, tau: &BoundaryPoint) -> Result<ComplexVector> {
    let a = boundary_pencil(r, tau)?;
    let (x, residual) = numerics::min_norm_solve(&a, r.gamma(), DEFAULT_RANK_TOL)?;
    if residual > RANGE_TOL * r.gamma().norm() {
        return Err(Error::NotCarapoint(format!(
            "(1 - Dτ_P)x = γ has residual {residual:e}"
        )));
    }
    Ok(x)
}

impl DesingularizedModel {
    pub fn d(&self) -> usize {
        self.tau.d()
    }

    pub fn kernel_dim(&self) -> usize {
        self.n_basis.len()
    }

    /// Dimension of N⊥.
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    fn check_len(&self, lambda: &[Complex64]) -> Result<()> {
        if lambda.len() != self.d() {
            return Err(Error::Input(format!(
                "point has {} coordinates, expected {}",
                lambda.len(),
                self.d()
            )));
        }
        Ok(())
    }

    fn tau_bar_times(&self, lambda: &[Complex64]) -> Vec<Complex64> {
        lambda
            .iter()
            .zip(self.tau.coords())
            .map(|(l, t)| t.conj() * l)
            .collect()
    }

    /// `I(λ) = 1 - ((𝟙/(𝟙 - τ̄λ))_Y)^{-1}`.
    pub fn eval_i(&self, lambda: &[Complex64], domain: IDomain) -> Result<ComplexMatrix> {
        self.check_len(lambda)?;
        match domain {
            IDomain::OpenPolydisc => numerics::ensure_in_open_polydisc(lambda, "λ")?,
            IDomain::TorusOffTau => {
                for (j, (l, t)) in lambda.iter().zip(self.tau.coords()).enumerate() {
                    if (l.norm() - 1.0).abs() > UNIMODULAR_TOL {
                        return Err(Error::Domain(format!("λ_{} is not on the circle", j + 1)));
                    }
                    if (l - t).norm() <= TORUS_EXCLUSION {
                        return Err(Error::Domain(format!(
                            "λ_{} coincides with τ_{}; the pencil is singular",
                            j + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        Ok(identity(self.dim()) - self.y.cauchy_inverse(&self.tau_bar_times(lambda))?)
    }

    /// `a + <I(λ)(1 - QI(λ))^{-1} γ, β̂>`.
    pub fn generalized_realization_eval(&self, lambda: &[Complex64]) -> Result<Complex64> {
        let i = self.eval_i(lambda, IDomain::OpenPolydisc)?;
        let m = self.dim();
        let x = numerics::solve(&(identity(m) - &self.q * &i), &self.gamma)
            .map_err(|_| Error::Internal("1 - QI(λ) is singular although ‖I(λ)‖ < 1".into()))?;
        Ok(self.a + inner(&(i * x), &self.beta_hat))
    }

    fn ambient_nperp(&self) -> Result<&ComplexMatrix> {
        self.nperp_basis
            .as_ref()
            .ok_or_else(|| Error::Precondition("model carries no ambient basis of N⊥".into()))
    }

    /// `(u(λ), w(λ))`: the N⊥- and N-components of `v(λ)`, asserting
    /// `w = (1 - (τ̄λ)_X)^{-1}(τ̄λ)_B u`.
    pub fn eval_u_w(&self, r: &Realization, lambda: &[Complex64]) -> Result<(ComplexVector, ComplexVector)> {
        self.check_len(lambda)?;
        let kp = self.ambient_nperp()?;
        if kp.nrows() != r.dim() {
            return Err(Error::Input(
                "model and realization have different state spaces".into(),
            ));
        }
        let v = r.state_vector(lambda)?;
        let u = kp.adjoint() * &v;
        let kn = columns_to_matrix(r.dim(), &self.n_basis);
        let w = kn.adjoint() * &v;
        if let Some(blocks) = &self.blocks {
            let k = self.kernel_dim();
            if k > 0 {
                let tl = self.tau_bar_times(lambda);
                let rhs = numerics::solve(
                    &(identity(k) - blocks.x_action(&tl)?),
                    &(blocks.b_action(&tl)? * &u),
                )?;
                let err = (&rhs - &w).norm();
                if err > 1e-9 * w.norm().max(1.0) {
                    return Err(Error::Internal(format!(
                        "w(λ) misses (1 - (τ̄λ)_X)^(-1)(τ̄λ)_B u(λ) by {err:e}"
                    )));
                }
            }
        }
        Ok((u, w))
    }

    /// `|1 - conj(φ(μ))φ(λ) - <(1 - I(μ)*I(λ)) u(λ), u(μ)>|`.
    pub fn generalized_model_residual(
        &self,
        r: &Realization,
        lambda: &[Complex64],
        mu: &[Complex64],
    ) -> Result<f64> {
        let (ul, _) = self.eval_u_w(r, lambda)?;
        let (um, _) = self.eval_u_w(r, mu)?;
        let il = self.eval_i(lambda, IDomain::OpenPolydisc)?;
        let im = self.eval_i(mu, IDomain::OpenPolydisc)?;
        let kernel = inner(&ul, &um) - inner(&(il * &ul), &(im * &um));
        Ok((1.0 - r.eval(mu)?.conj() * r.eval(lambda)? - kernel).norm())
    }

    /// Smallest eigenvalue of `1 - I(λ)*I(λ)`.
    pub fn contraction_margin(&self, lambda: &[Complex64]) -> Result<f64> {
        let i = self.eval_i(lambda, IDomain::OpenPolydisc)?;
        let defect = identity(self.dim()) - i.adjoint() * &i;
        Ok(numerics::hermitian_eigenvalues(&defect)
            .first()
            .copied()
            .unwrap_or(f64::INFINITY))
    }

    /// Positive-definite pencil `(𝟙/(τ̄z))_Y^{-1}` used by the slope function.
    pub fn slope_pencil_inverse(&self, z: &[Complex64]) -> Result<ComplexMatrix> {
        self.check_len(z)?;
        self.y.positive_cauchy_inverse(&self.tau_bar_times(z))
    }

    /// The same model with N⊥ re-coordinatized by the unitary `u`.
    pub fn rebased(&self, u: &ComplexMatrix) -> Result<Self> {
        let m = self.dim();
        if u.shape() != (m, m) || numerics::unitarity_defect(u) > 1e-10 {
            return Err(Error::Input(format!("rebasing needs a {m}x{m} unitary")));
        }
        let y = PositivePartition::from_ops(
            self.y
                .ops()
                .iter()
                .map(|t| hermitian_part(u.adjoint() * t * u))
                .collect(),
        )?;
        let blocks = self.blocks.as_ref().map(|b| {
            let mut nb = b.clone();
            nb.nperp_basis = &b.nperp_basis * u;
            nb.b = b.b.iter().map(|bj| bj * u).collect();
            nb.y = y.clone();
            nb.q = u.adjoint() * &b.q * u;
            nb
        });
        Ok(Self {
            tau: self.tau.clone(),
            n_basis: self.n_basis.clone(),
            nperp_basis: self.nperp_basis.as_ref().map(|k| k * u),
            y,
            q: u.adjoint() * &self.q * u,
            beta_hat: u.adjoint() * &self.beta_hat,
            gamma: u.adjoint() * &self.gamma,
            a: self.a,
            u_tau: u.adjoint() * &self.u_tau,
            omega: self.omega,
            blocks,
        })
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let raw = RawModel {
            tau: json::point_to_raw(self.tau.coords()),
            n_basis: self.n_basis.iter().map(json::vector_to_raw).collect(),
            y: self.y.ops().iter().map(json::matrix_to_raw).collect(),
            q: json::matrix_to_raw(&self.q),
            beta_hat: json::vector_to_raw(&self.beta_hat),
            gamma: json::vector_to_raw(&self.gamma),
            a: json::complex_to_raw(self.a),
            u_tau: json::vector_to_raw(&self.u_tau),
            omega: json::complex_to_raw(self.omega),
        };
        serde_json::to_value(raw).expect("model encodes")
    }

    /// Loads a model; the ambient bases and blocks are not stored.
    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let raw: RawModel = serde_json::from_value(value)?;
        let tau = BoundaryPoint::new(json::point_from_raw(&raw.tau, "tau")?)?;
        let y = PositivePartition::from_ops(
            raw.y
                .iter()
                .map(|m| json::matrix_from_raw(m, "Y"))
                .collect::<Result<Vec<_>>>()?,
        )?;
        if y.d() != tau.d() {
            return Err(Error::Input(format!(
                "model has {} Y members for {} variables",
                y.d(),
                tau.d()
            )));
        }
        let q = json::matrix_from_raw(&raw.q, "Q")?;
        let beta_hat = json::vector_from_raw(&raw.beta_hat, "beta_hat")?;
        let gamma = json::vector_from_raw(&raw.gamma, "gamma")?;
        let u_tau = json::vector_from_raw(&raw.u_tau, "u_tau")?;
        let m = y.dim();
        if q.shape() != (m, m) || beta_hat.len() != m || gamma.len() != m || u_tau.len() != m {
            return Err(Error::Input(format!(
                "model blocks do not match the {m}-dimensional N⊥"
            )));
        }
        Ok(Self {
            tau,
            n_basis: raw
                .n_basis
                .iter()
                .map(|v| json::vector_from_raw(v, "N_basis"))
                .collect::<Result<Vec<_>>>()?,
            nperp_basis: None,
            y,
            q,
            beta_hat,
            gamma,
            a: json::complex_from_raw(raw.a, "a")?,
            u_tau,
            omega: json::complex_from_raw(raw.omega, "omega")?,
            blocks: None,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_value(serde_json::from_str(&text)?)
    }
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    tau: RawVector,
    #[serde(rename = "N_basis")]
    n_basis: Vec<RawVector>,
    #[serde(rename = "Y")]
    y: Vec<RawMatrix>,
    #[serde(rename = "Q")]
    q: RawMatrix,
    beta_hat: RawVector,
    gamma: RawVector,
    a: RawComplex,
    u_tau: RawVector,
    omega: RawComplex,
}

/// φ through the generalized realization.
impl PolydiscFunction for DesingularizedModel {
    fn arity(&self) -> usize {
        self.d()
    }

    fn eval(&self, lambda: &[Complex64]) -> Result<Complex64> {
        self.generalized_realization_eval(lambda)
    }
}

/// Cross-checks of `u(τ)` against radial data.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryVectorChecks {
    /// `‖u(τ)‖²`.
    pub norm_sq: f64,
    /// `‖u(rτ) - u(τ)‖` at `r = 1 - 2^{-20}`.
    pub radial_gap: f64,
    /// Radial limit of `(1 - |φ(rτ)|²)/(1 - r²)`, if the scan converged.
    pub radial_limit: Option<f64>,
}

pub fn boundary_vector_checks(m: &DesingularizedModel, r: &Realization) -> Result<BoundaryVectorChecks> {
    let radius = 1.0 - 0.5f64.powi(20);
    let (u, _) = m.eval_u_w(r, &m.tau.scaled(radius))?;
    let radial_limit =
        crate::boundary::radial_squared_julia_limit(r, &m.tau, &crate::boundary::RadialSchedule::default())?;
    Ok(BoundaryVectorChecks {
        norm_sq: m.u_tau.norm_squared(),
        radial_gap: (u - &m.u_tau).norm(),
        radial_limit,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NtLimitReport {
    /// Worst `|‖I(rτ) - 1‖ - (1 - r)|` over the radial schedule.
    pub radial_error: f64,
    /// Worst `c‖λ-τ‖_∞ - ‖I(λ) - 1‖` over the nontangential samples, where c
    /// is the aperture of the sample set; nonnegative when the bound holds.
    pub nontangential_slack: f64,
    pub aperture: f64,
}

/// Checks `I(λ) → 1` as `λ → τ`: exactly on the radius and with the linear
/// bound `‖I(λ) - 1‖ <= c‖λ - τ‖_∞` on a nontangential sample set.
pub fn nt_limit_of_i(
    m: &DesingularizedModel,
    radii: &[f64],
    nontangential: &[Vec<Complex64>],
) -> Result<NtLimitReport> {
    let one = identity(m.dim());
    let mut radial_error: f64 = 0.0;
    for &r in radii {
        let i = m.eval_i(&m.tau.scaled(r), IDomain::OpenPolydisc)?;
        let err = (numerics::op_norm(&(i - &one))? - (1.0 - r)).abs();
        radial_error = radial_error.max(err);
    }
    let (mut slack, mut aperture) = (f64::INFINITY, 0.0);
    if !nontangential.is_empty() {
        let (_, c) = crate::boundary::nontangential_check(nontangential, &m.tau)?;
        aperture = c;
        for lambda in nontangential {
            let i = m.eval_i(lambda, IDomain::OpenPolydisc)?;
            let dist = lambda
                .iter()
                .zip(m.tau.coords())
                .map(|(l, t)| (l - t).norm())
                .fold(0.0, f64::max);
            slack = slack.min(c * dist - numerics::op_norm(&(i - &one))?);
        }
    }
    Ok(NtLimitReport {
        radial_error,
        nontangential_slack: slack,
        aperture,
    })
}

/// The two-variable inner function
/// `(aY₁ + bY₂ - ab)(1 - aY₂ - bY₁)^{-1}` with `a = τ̄₁λ₁`, `b = τ̄₂λ₂`
/// and `Y₂ = 1 - Y₁`.
pub fn i_aty(y1: &ComplexMatrix, tau: &BoundaryPoint, lambda: &[Complex64]) -> Result<ComplexMatrix> {
    if tau.d() != 2 || lambda.len() != 2 {
        return Err(Error::Input("the two-variable formula needs d = 2".into()));
    }
    let n = y1.nrows();
    let one = identity(n);
    let y2 = &one - y1;
    let a = tau.coords()[0].conj() * lambda[0];
    let b = tau.coords()[1].conj() * lambda[1];
    let num = y1 * a + &y2 * b - &one * (a * b);
    let den = &one - &y2 * a - y1 * b;
    Ok(num * numerics::inverse(&den)?)
}

/// Largest `‖I(λ) - I_ATY(λ)‖` over the samples for `Y = (Y₁, 1 - Y₁)`.
pub fn d2_aty_equivalence(
    y1: &ComplexMatrix,
    samples: &[Vec<Complex64>],
    tau: &BoundaryPoint,
) -> Result<f64> {
    if !y1.is_square() {
        return Err(Error::Input("Y₁ must be square".into()));
    }
    numerics::ensure_finite_matrix(y1, "Y₁")?;
    if tau.d() != 2 {
        return Err(Error::Input("the two-variable formula needs d = 2".into()));
    }
    let n = y1.nrows();
    let y = PositivePartition::from_ops(vec![y1.clone(), identity(n) - y1])
        .map_err(|e| Error::Input(format!("Y₁ is not a positive contraction: {e}")))?;
    let model = DesingularizedModel {
        tau: tau.clone(),
        n_basis: Vec::new(),
        nperp_basis: None,
        y,
        q: ComplexMatrix::zeros(n, n),
        beta_hat: ComplexVector::zeros(n),
        gamma: ComplexVector::zeros(n),
        a: Complex64::new(0.0, 0.0),
        u_tau: ComplexVector::zeros(n),
        omega: Complex64::new(1.0, 0.0),
        blocks: None,
    };
    let mut worst: f64 = 0.0;
    for lambda in samples {
        let i = model.eval_i(lambda, IDomain::OpenPolydisc)?;
        let j = i_aty(y1, tau, lambda)?;
        worst = worst.max(numerics::op_norm(&(i - j))?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::c64;
    use crate::pencil::ProjectionTuple;
    use crate::realization::random_realization;
    use crate::sampling::{polydisc_point, random_partition_ops, random_unitary, rng_from_seed, torus_point};

    fn phi3_model() -> (Realization, DesingularizedModel) {
        let r = crate::phi3::phi3_realization().unwrap().realization;
        let m = desingularize(&r, &BoundaryPoint::ones(3)).unwrap();
        (r, m)
    }

    #[test]
    fn range_test_examples() {
        let (r, _) = phi3_model();
        assert!(
            carapoint_range_test(&r, &BoundaryPoint::ones(3))
                .unwrap()
                .is_carapoint
        );

        let mut rng = rng_from_seed(1);
        let r = random_realization(&mut rng, 5, 2).unwrap();
        let t = BoundaryPoint::new(torus_point(&mut rng, 2)).unwrap();
        let test = carapoint_range_test(&r, &t).unwrap();
        assert!(test.is_carapoint && test.residual < 1e-12);

        // D = diag(1, 0) with τ = 𝟙 and γ = e₁: γ is orthogonal to the range.
        let p = ProjectionTuple::coordinate_blocks(&[1, 1]).unwrap();
        let mut d = ComplexMatrix::zeros(2, 2);
        d[(0, 0)] = c64(1.0, 0.0);
        let gamma = ComplexVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]);
        let g = Realization::new_general(c64(0.0, 0.0), ComplexVector::zeros(2), gamma, d, p).unwrap();
        let test = carapoint_range_test(&g, &BoundaryPoint::ones(2)).unwrap();
        assert!(!test.is_carapoint);
        assert!(matches!(
            split(&g, &BoundaryPoint::ones(2)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn trivial_kernel_split() {
        let mut rng = rng_from_seed(2);
        let r = random_realization(&mut rng, 4, 3).unwrap();
        let t = BoundaryPoint::new(torus_point(&mut rng, 3)).unwrap();
        let b = split(&r, &t).unwrap();
        assert_eq!(b.kernel_dim(), 0);
        let kp = &b.nperp_basis;
        for (y, p) in b.y.ops().iter().zip(r.projections().ops()) {
            assert!((kp * y * kp.adjoint() - p).norm() < 1e-12);
        }
        let dt = r.d_matrix() * r.projections().scalar_action(t.coords()).unwrap();
        assert!((kp * &b.q * kp.adjoint() - dt).norm() < 1e-12);
        let m = desingularize(&r, &t).unwrap();
        let u = boundary_vector(&r, &t).unwrap();
        let direct = numerics::solve(&boundary_pencil(&r, &t).unwrap(), r.gamma()).unwrap();
        assert!((u - direct).norm() < 1e-10);
        let (uu, w) = m.eval_u_w(&r, &[c64(0.2, 0.1); 3]).unwrap();
        assert_eq!(w.len(), 0);
        assert!((kp * uu - r.state_vector(&[c64(0.2, 0.1); 3]).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn synthetic_kernel_split() {
        // L = 1 ⊕ V on C ⊕ (K ⊕ C^m) with D = 1_K ⊕ V, conjugated by a random
        // unitary: N is K, and the blocks of the projections are recovered.
        let mut rng = rng_from_seed(3);
        let (k, m, d) = (2, 4, 3);
        let n = k + m;
        let v = random_unitary(&mut rng, m + 1);
        let mut l = ComplexMatrix::zeros(n + 1, n + 1);
        l[(0, 0)] = v[(0, 0)];
        for i in 0..m {
            l[(0, 1 + k + i)] = v[(0, 1 + i)];
            l[(1 + k + i, 0)] = v[(1 + i, 0)];
            for j in 0..m {
                l[(1 + k + i, 1 + k + j)] = v[(1 + i, 1 + j)];
            }
        }
        for i in 0..k {
            l[(1 + i, 1 + i)] = c64(1.0, 0.0);
        }
        let w = random_unitary(&mut rng, n);
        let mut big = ComplexMatrix::identity(n + 1, n + 1);
        big.view_mut((1, 1), (n, n)).copy_from(&w);
        let l = &big * l * big.adjoint();
        // τ = 𝟙 and P chosen so that τ_P = 1; then Dτ_P = D.
        let p = ProjectionTuple::new(crate::sampling::random_projections(&mut rng, n, d)).unwrap();
        let r = Realization::from_colligation(&l, p).unwrap();
        let b = split(&r, &BoundaryPoint::ones(d)).unwrap();
        assert_eq!(b.kernel_dim(), k);
        let sum =
            b.y.ops()
                .iter()
                .fold(ComplexMatrix::zeros(m, m), |acc, y| acc + y);
        assert!((sum - identity(m)).norm() < 1e-10);
        assert!(b.identity_residual < 1e-10);
    }

    #[test]
    fn phi3_split_and_model() {
        let (r, m) = phi3_model();
        let b = m.blocks.as_ref().unwrap();
        assert!(b.kernel_dim() >= 1);
        assert!(b.identity_residual < 1e-10);
        assert!((m.omega + 1.0).norm() < 1e-6);
        assert!((m.u_tau.norm_squared() - 2.0).abs() < 1e-6);
        let origin = [c64(0.0, 0.0); 3];
        assert!(m.generalized_realization_eval(&origin).unwrap().norm() < 1e-14);
        assert!(m.generalized_model_residual(&r, &origin, &origin).unwrap() < 1e-12);
        let (u, w) = m.eval_u_w(&r, &origin).unwrap();
        let kn = columns_to_matrix(9, &m.n_basis);
        let kp = m.nperp_basis.as_ref().unwrap();
        assert!((kp * u + kn * w - r.gamma()).norm() < 1e-12);
    }

    #[test]
    fn pencil_identities_on_phi3_blocks() {
        let (_, m) = phi3_model();
        let b = m.blocks.as_ref().unwrap();
        let mut rng = rng_from_seed(4);
        for _ in 0..50 {
            let l = polydisc_point(&mut rng, 3, 1.0);
            let mu = polydisc_point(&mut rng, 3, 1.0);
            assert!(b.pencil_identity_residual(&l, &mu).unwrap() < 1e-10);
            assert!(b.schur_complement_residual(&l).unwrap() < 1e-10);
        }
    }

    #[test]
    fn i_examples() {
        let (_, m) = phi3_model();
        for r in [0.1, 0.5, 0.9, 0.99] {
            let i = m.eval_i(&m.tau.scaled(r), IDomain::OpenPolydisc).unwrap();
            assert!((i - identity(m.dim()) * c64(r, 0.0)).norm() < 1e-12);
        }
        let i = m.eval_i(&[c64(0.0, 0.0); 3], IDomain::OpenPolydisc).unwrap();
        assert!(i.norm() < 1e-14);
        let mut rng = rng_from_seed(5);
        for _ in 0..20 {
            let t = torus_point(&mut rng, 3);
            let i = m.eval_i(&t, IDomain::TorusOffTau).unwrap();
            assert!(numerics::unitarity_defect(&i) < 1e-8);
            assert!(numerics::unitarity_defect(&i.adjoint()) < 1e-8);
            let l = polydisc_point(&mut rng, 3, 0.99);
            assert!(m.contraction_margin(&l).unwrap() > 0.0);
        }
        let bad = [c64(1.0, 0.0), c64(0.0, 1.0), c64(0.0, -1.0)];
        assert!(matches!(
            m.eval_i(&bad, IDomain::TorusOffTau),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            m.eval_i(&[c64(0.0, 1.0); 3], IDomain::OpenPolydisc),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn generalized_realization_on_radius() {
        let (_, m) = phi3_model();
        for r in [0.2, 0.6, 0.95] {
            let v = m.generalized_realization_eval(&m.tau.scaled(r)).unwrap();
            assert!((v + r * r).norm() < 1e-10);
        }
    }

    #[test]
    fn julia_ratio_of_i_is_one() {
        let (_, m) = phi3_model();
        for r in [0.5, 0.9, 0.999] {
            let i = m.eval_i(&m.tau.scaled(r), IDomain::OpenPolydisc).unwrap();
            let q = (1.0 - numerics::op_norm(&i).unwrap()) / (1.0 - r);
            assert!((q - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn nt_limit() {
        let (_, m) = phi3_model();
        let mut rng = rng_from_seed(6);
        let s = crate::boundary::nontangential_samples(&mut rng, &m.tau, 1.0, 50);
        let rep = nt_limit_of_i(&m, &[0.9, 0.99, 0.999], &s).unwrap();
        assert!(rep.radial_error < 1e-12);
        assert!(rep.nontangential_slack >= -1e-12);
    }

    #[test]
    fn boundary_vector_cross_checks() {
        let (r, m) = phi3_model();
        let c = boundary_vector_checks(&m, &r).unwrap();
        assert!((c.norm_sq - 2.0).abs() < 1e-6);
        assert!(c.radial_gap < 1e-4);
        assert!((c.radial_limit.unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn constant_function_has_zero_boundary_vector() {
        let mut rng = rng_from_seed(7);
        let p = ProjectionTuple::new(crate::sampling::random_projections(&mut rng, 3, 2)).unwrap();
        let omega = c64(0.6, 0.8);
        let d = random_unitary(&mut rng, 3);
        let z = ComplexVector::zeros(3);
        let r = Realization::new(omega, z.clone(), z, d, p).unwrap();
        let t = BoundaryPoint::new(torus_point(&mut rng, 2)).unwrap();
        let m = desingularize(&r, &t).unwrap();
        assert!(m.u_tau.norm() < 1e-14);
        assert!((m.omega - omega).norm() < 1e-14);
    }

    #[test]
    fn aty_examples() {
        let mut rng = rng_from_seed(8);
        let tau = BoundaryPoint::new(torus_point(&mut rng, 2)).unwrap();
        let samples: Vec<_> = (0..50).map(|_| polydisc_point(&mut rng, 2, 1.0)).collect();
        let half = identity(4) * c64(0.5, 0.0);
        assert!(d2_aty_equivalence(&half, &samples, &tau).unwrap() < 1e-12);
        let y1 = random_partition_ops(&mut rng, 6, 2).remove(0);
        assert!(d2_aty_equivalence(&y1, &samples, &tau).unwrap() < 1e-10);
        let proj = crate::sampling::random_projections(&mut rng, 6, 2).remove(0);
        assert!(d2_aty_equivalence(&proj, &samples, &tau).unwrap() < 1e-10);
        let bad = identity(3) * c64(1.5, 0.0);
        assert!(matches!(
            d2_aty_equivalence(&bad, &samples, &tau),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn rebasing_preserves_scalars() {
        let (r, m) = phi3_model();
        let mut rng = rng_from_seed(9);
        let u = random_unitary(&mut rng, m.dim());
        let m2 = m.rebased(&u).unwrap();
        assert!((m2.u_tau.norm() - m.u_tau.norm()).abs() < 1e-12);
        for _ in 0..10 {
            let l = polydisc_point(&mut rng, 3, 0.95);
            let a = m.generalized_realization_eval(&l).unwrap();
            let b = m2.generalized_realization_eval(&l).unwrap();
            assert!((a - b).norm() < 1e-10);
            assert!(m2.generalized_model_residual(&r, &l, &l).unwrap() < 1e-8);
        }
        assert!(m2.blocks.as_ref().unwrap().block_identity_residual() < 1e-10);
    }

    #[test]
    fn model_json_round_trip() {
        let (_, m) = phi3_model();
        let value = m.to_json_value();
        for key in [
            "tau", "N_basis", "Y", "Q", "beta_hat", "gamma", "a", "u_tau", "omega",
        ] {
            assert!(value.get(key).is_some(), "{key}");
        }
        let back = DesingularizedModel::from_json_value(value).unwrap();
        let l = [c64(0.3, 0.1), c64(-0.2, 0.4), c64(0.5, 0.0)];
        let a = m.generalized_realization_eval(&l).unwrap();
        let b = back.generalized_realization_eval(&l).unwrap();
        assert!((a - b).norm() < 1e-14);
    }
}
