//! Colligations `L = [[a, β*], [γ, D]]` on `C ⊕ C^n` and the functions
//! they realize:
//!
//! ```text
//! v(λ) = (1 - D λ_P)^{-1} γ,    φ(λ) = a + <λ_P v(λ), β>.
//! ```

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::PolydiscFunction;
use crate::numerics::json::{self, RawComplex, RawMatrix, RawVector};
use crate::numerics::{self, inner, ComplexMatrix, ComplexVector, DEFAULT_RANK_TOL};
use crate::pencil::ProjectionTuple;

/// Default tolerance on `|L*L - 1|_F` for a colligation to count as unitary.
pub const UNITARY_TOL: f64 = 1e-8;

/// Slack allowed above 1 for `|φ(λ)|` and `|L|`.
pub const CONTRACTION_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColligationClass {
    Unitary,
    /// A contraction that is not unitary within tolerance.
    Contractive,
    /// Not a contraction; only built through [`Realization::new_general`].
    General,
}

#[derive(Debug, Clone)]
pub struct Realization {
    a: Complex64,
    beta: ComplexVector,
    gamma: ComplexVector,
    d: ComplexMatrix,
    projections: ProjectionTuple,
    class: ColligationClass,
    unitary_defect: f64,
}

/// Assembles `[[a, β*], [γ, D]]`.
pub fn colligation_matrix(
    a: Complex64,
    beta: &ComplexVector,
    gamma: &ComplexVector,
    d: &ComplexMatrix,
) -> ComplexMatrix {
    let n = d.nrows();
    let mut l = ComplexMatrix::zeros(n + 1, n + 1);
    l[(0, 0)] = a;
    for k in 0..n {
        l[(0, k + 1)] = beta[k].conj();
        l[(k + 1, 0)] = gamma[k];
    }
    l.view_mut((1, 1), (n, n)).copy_from(d);
    l
}

impl Realization {
    /// Validated constructor: the colligation must be unitary within
    /// [`UNITARY_TOL`] or at least contractive.
    pub fn new(
        a: Complex64,
        beta: ComplexVector,
        gamma: ComplexVector,
        d: ComplexMatrix,
        projections: ProjectionTuple,
    ) -> Result<Self> {
        Self::with_tolerance(a, beta, gamma, d, projections, UNITARY_TOL)
    }

    pub fn with_tolerance(
        a: Complex64,
        beta: ComplexVector,
        gamma: ComplexVector,
        d: ComplexMatrix,
        projections: ProjectionTuple,
        unitary_tol: f64,
    ) -> Result<Self> {
        let mut r = Self::new_general(a, beta, gamma, d, projections)?;
        if r.unitary_defect <= unitary_tol {
            r.class = ColligationClass::Unitary;
        } else {
            let norm = numerics::op_norm(&r.colligation())?;
            if norm > 1.0 + CONTRACTION_SLACK {
                return Err(Error::Input(format!(
                    "colligation is not a contraction (norm {norm}, unitary defect {:e})",
                    r.unitary_defect
                )));
            }
            r.class = ColligationClass::Contractive;
        }
        Ok(r)
    }

    /// Unvalidated constructor for diagnostics such as range tests on
    /// colligations that are not contractions. Only shapes are checked.
    pub fn new_general(
        a: Complex64,
        beta: ComplexVector,
        gamma: ComplexVector,
        d: ComplexMatrix,
        projections: ProjectionTuple,
    ) -> Result<Self> {
        let n = projections.dim();
        if d.nrows() != n || d.ncols() != n || beta.len() != n || gamma.len() != n {
            return Err(Error::Input(format!(
                "colligation shapes do not match the {n}-dimensional state space"
            )));
        }
        if !(a.re.is_finite() && a.im.is_finite()) {
            return Err(Error::Input("a is not finite".into()));
        }
        numerics::ensure_finite_vector(&beta, "beta")?;
        numerics::ensure_finite_vector(&gamma, "gamma")?;
        numerics::ensure_finite_matrix(&d, "D")?;
        let unitary_defect = numerics::unitarity_defect(&colligation_matrix(a, &beta, &gamma, &d));
        Ok(Self {
            a,
            beta,
            gamma,
            d,
            projections,
            class: ColligationClass::General,
            unitary_defect,
        })
    }

    /// Splits a full colligation matrix of size (n+1) x (n+1).
    pub fn from_colligation(l: &ComplexMatrix, projections: ProjectionTuple) -> Result<Self> {
        let n = projections.dim();
        if l.nrows() != n + 1 || l.ncols() != n + 1 {
            return Err(Error::Input(format!(
                "colligation is {}x{}, expected {}x{}",
                l.nrows(),
                l.ncols(),
                n + 1,
                n + 1
            )));
        }
        let beta = l.view((0, 1), (1, n)).adjoint().column(0).into_owned();
        let gamma = l.view((1, 0), (n, 1)).column(0).into_owned();
        let d = l.view((1, 1), (n, n)).into_owned();
        Self::new(l[(0, 0)], beta, gamma, d, projections)
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn beta(&self) -> &ComplexVector {
        &self.beta
    }

    pub fn gamma(&self) -> &ComplexVector {
        &self.gamma
    }

    pub fn d_matrix(&self) -> &ComplexMatrix {
        &self.d
    }

    pub fn projections(&self) -> &ProjectionTuple {
        &self.projections
    }

    pub fn class(&self) -> ColligationClass {
        self.class
    }

    pub fn unitary_defect(&self) -> f64 {
        self.unitary_defect
    }

    /// Number of variables.
    pub fn d(&self) -> usize {
        self.projections.d()
    }

    /// Dimension of the state space.
    pub fn dim(&self) -> usize {
        self.projections.dim()
    }

    pub fn colligation(&self) -> ComplexMatrix {
        colligation_matrix(self.a, &self.beta, &self.gamma, &self.d)
    }

    fn check_point(&self, lambda: &[Complex64]) -> Result<()> {
        if lambda.len() != self.d() {
            return Err(Error::Input(format!(
                "point has {} coordinates, expected {}",
                lambda.len(),
                self.d()
            )));
        }
        numerics::ensure_in_open_polydisc(lambda, "λ")
    }

    /// `1 - D λ_P`.
    pub fn transfer_pencil(&self, lambda: &[Complex64]) -> Result<ComplexMatrix> {
        let lp = self.projections.scalar_action(lambda)?;
        Ok(numerics::identity(self.dim()) - &self.d * lp)
    }

    /// `v(λ) = (1 - D λ_P)^{-1} γ`.
    pub fn state_vector(&self, lambda: &[Complex64]) -> Result<ComplexVector> {
        self.check_point(lambda)?;
        numerics::solve(&self.transfer_pencil(lambda)?, &self.gamma)
    }

    /// `φ(λ)` from an already computed state vector.
    pub fn eval_with_state(&self, lambda: &[Complex64], v: &ComplexVector) -> Result<Complex64> {
        let lp = self.projections.scalar_action(lambda)?;
        let phi = self.a + inner(&(lp * v), &self.beta);
        if self.class == ColligationClass::Unitary && phi.norm() > 1.0 + CONTRACTION_SLACK {
            return Err(Error::Internal(format!(
                "|φ(λ)| = {} exceeds 1 for a unitary colligation",
                phi.norm()
            )));
        }
        Ok(phi)
    }

    pub fn eval(&self, lambda: &[Complex64]) -> Result<Complex64> {
        let v = self.state_vector(lambda)?;
        self.eval_with_state(lambda, &v)
    }

    /// `|1 - conj(φ(μ)) φ(λ) - <(1 - μ_P* λ_P) v(λ), v(μ)>|`.
    pub fn model_residual(&self, lambda: &[Complex64], mu: &[Complex64]) -> Result<f64> {
        let vl = self.state_vector(lambda)?;
        let vm = self.state_vector(mu)?;
        let pl = self.eval_with_state(lambda, &vl)?;
        let pm = self.eval_with_state(mu, &vm)?;
        let lp = self.projections.scalar_action(lambda)?;
        let mp = self.projections.scalar_action(mu)?;
        let kernel = inner(&vl, &vm) - inner(&(lp * &vl), &(mp * &vm));
        Ok((1.0 - pm.conj() * pl - kernel).norm())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let raw = RawRealization {
            a: json::complex_to_raw(self.a),
            beta: json::vector_to_raw(&self.beta),
            gamma: json::vector_to_raw(&self.gamma),
            d: json::matrix_to_raw(&self.d),
            projections: self.projections.ops().iter().map(json::matrix_to_raw).collect(),
            unitary_defect: self.unitary_defect,
        };
        serde_json::to_value(raw).expect("realization encodes")
    }

    /// Loads and re-validates a realization.
    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let raw: RawRealization = serde_json::from_value(value)?;
        let projections = ProjectionTuple::new(
            raw.projections
                .iter()
                .map(|m| json::matrix_from_raw(m, "projection"))
                .collect::<Result<Vec<_>>>()?,
        )?;
        Self::new(
            json::complex_from_raw(raw.a, "a")?,
            json::vector_from_raw(&raw.beta, "beta")?,
            json::vector_from_raw(&raw.gamma, "gamma")?,
            json::matrix_from_raw(&raw.d, "D")?,
            projections,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_value(serde_json::from_str(&text)?)
    }
}

impl PolydiscFunction for Realization {
    fn arity(&self) -> usize {
        self.d()
    }

    fn eval(&self, lambda: &[Complex64]) -> Result<Complex64> {
        Realization::eval(self, lambda)
    }
}

#[derive(Serialize, Deserialize)]
struct RawRealization {
    a: RawComplex,
    beta: RawVector,
    gamma: RawVector,
    #[serde(rename = "D")]
    d: RawMatrix,
    projections: Vec<RawMatrix>,
    unitary_defect: f64,
}

/// One sample `(λ, v(λ), φ(λ))` of a model.
#[derive(Debug, Clone)]
pub struct FitSample {
    pub lambda: Vec<Complex64>,
    pub v: ComplexVector,
    pub phi: Complex64,
}

/// Worst absolute residuals of the defining equations over the samples.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitResiduals {
    /// Mismatch of the two gramians in the lurking isometry argument.
    pub gramian: f64,
    /// `<λ_P v(λ), β> = φ(λ) - a`.
    pub beta: f64,
    /// `<v(λ), γ> = 1 - conj(a) φ(λ)`.
    pub gamma: f64,
    /// `D λ_P v(λ) = v(λ) - γ`.
    pub d_matrix: f64,
}

#[derive(Debug, Clone)]
pub struct FittedColligation {
    pub realization: Realization,
    pub residuals: FitResiduals,
    /// Rank of the sample span in `C ⊕ C^n`.
    pub sample_rank: usize,
    /// Dimension of the complement on which the isometry was extended.
    pub completion_dim: usize,
}

fn fit_error(subsystem: &str, detail: impl Into<String>) -> Error {
    Error::Fit {
        subsystem: subsystem.into(),
        detail: detail.into(),
    }
}

/// Lurking-isometry fit of a unitary colligation to model samples.
///
/// The map `[1; λ_P v(λ)] ↦ [φ(λ); v(λ)]` is an isometry on the span of
/// the samples. When the samples span all of `C ⊕ C^n` this determines `L`.
/// Otherwise the isometry is extended to the orthogonal complements by the
/// unitary polar factor of the compression of `reference` (identity when
/// absent), which is the unitary closest to it on those complements.
pub fn fit_colligation(
    samples: &[FitSample],
    projections: &ProjectionTuple,
    a: Complex64,
    reference: Option<&ComplexMatrix>,
) -> Result<FittedColligation> {
    let n = projections.dim();
    let d = projections.d();
    let m = samples.len();
    if m < 2 * n + 2 {
        return Err(Error::Input(format!(
            "{m} samples given, at least {} needed",
            2 * n + 2
        )));
    }
    let mut domain = ComplexMatrix::zeros(n + 1, m);
    let mut range = ComplexMatrix::zeros(n + 1, m);
    let mut lpv = Vec::with_capacity(m);
    for (i, s) in samples.iter().enumerate() {
        if s.lambda.len() != d || s.v.len() != n {
            return Err(Error::Input(format!("sample {} has the wrong shape", i + 1)));
        }
        numerics::ensure_finite_vector(&s.v, "sample state")?;
        let x = projections.scalar_action(&s.lambda)? * &s.v;
        domain[(0, i)] = Complex64::new(1.0, 0.0);
        range[(0, i)] = s.phi;
        domain.view_mut((1, i), (n, 1)).copy_from(&x);
        range.view_mut((1, i), (n, 1)).copy_from(&s.v);
        lpv.push(x);
    }

    let gd = domain.adjoint() * &domain;
    let gr = range.adjoint() * &range;
    let scale = gd.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let gramian = (&gd - &gr).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if gramian > 1e-8 * scale {
        return Err(fit_error(
            "gramian",
            format!("samples do not satisfy the model equation (mismatch {gramian:e})"),
        ));
    }

    let dom_split = numerics::kernel_split(&domain.adjoint(), DEFAULT_RANK_TOL)?;
    let ran_split = numerics::kernel_split(&range.adjoint(), DEFAULT_RANK_TOL)?;
    let rank = dom_split.complement.len();
    if ran_split.complement.len() != rank {
        return Err(fit_error(
            "isometry",
            format!(
                "sample spans have ranks {rank} and {} in domain and range",
                ran_split.complement.len()
            ),
        ));
    }
    if rank < 2 {
        return Err(fit_error(
            "isometry",
            format!("sample span has rank {rank}; the state samples are degenerate"),
        ));
    }

    let l0 = &range * numerics::pseudo_inverse(&domain, DEFAULT_RANK_TOL)?;
    let completion_dim = n + 1 - rank;
    let l = if completion_dim == 0 {
        l0
    } else {
        let k = dom_split.kernel_matrix(n + 1);
        let kp = ran_split.kernel_matrix(n + 1);
        let reference = match reference {
            Some(r) if r.shape() == (n + 1, n + 1) => r.clone(),
            Some(r) => {
                return Err(Error::Input(format!(
                    "reference colligation is {}x{}, expected {}x{}",
                    r.nrows(),
                    r.ncols(),
                    n + 1,
                    n + 1
                )))
            }
            None => numerics::identity(n + 1),
        };
        let w = numerics::polar_unitary(&(kp.adjoint() * reference * &k))?;
        let on_span = numerics::identity(n + 1) - &k * k.adjoint();
        l0 * on_span + kp * w * k.adjoint()
    };

    if (l[(0, 0)] - a).norm() > 1e-8 {
        return Err(fit_error(
            "a",
            format!("samples force a = {} but {} was supplied", l[(0, 0)], a),
        ));
    }
    let mut l = l;
    l[(0, 0)] = a;
    let realization = Realization::from_colligation(&l, projections.clone())
        .map_err(|e| fit_error("unitarity", format!("fitted colligation rejected: {e}")))?;
    if realization.class() != ColligationClass::Unitary {
        return Err(fit_error(
            "unitarity",
            format!("unitary defect {:e}", realization.unitary_defect()),
        ));
    }

    let mut residuals = FitResiduals {
        gramian,
        beta: 0.0,
        gamma: 0.0,
        d_matrix: 0.0,
    };
    for (s, x) in samples.iter().zip(&lpv) {
        let rb = (inner(x, realization.beta()) - (s.phi - a)).norm();
        let rg = (inner(&s.v, realization.gamma()) - (1.0 - a.conj() * s.phi)).norm();
        let rd = (realization.d_matrix() * x - (&s.v - realization.gamma())).norm();
        residuals.beta = residuals.beta.max(rb);
        residuals.gamma = residuals.gamma.max(rg);
        residuals.d_matrix = residuals.d_matrix.max(rd);
    }

    Ok(FittedColligation {
        realization,
        residuals,
        sample_rank: rank,
        completion_dim,
    })
}

/// Samples of an existing realization, for refitting.
pub fn samples_of(r: &Realization, points: &[Vec<Complex64>]) -> Result<Vec<FitSample>> {
    points
        .iter()
        .map(|p| {
            let v = r.state_vector(p)?;
            let phi = r.eval_with_state(p, &v)?;
            Ok(FitSample {
                lambda: p.clone(),
                v,
                phi,
            })
        })
        .collect()
}

/// A random unitary colligation with a random projection tuple.
pub fn random_realization(rng: &mut impl rand::Rng, n: usize, d: usize) -> Result<Realization> {
    let p = ProjectionTuple::new(crate::sampling::random_projections(rng, n, d))?;
    let l = crate::sampling::random_unitary(rng, n + 1);
    Realization::from_colligation(&l, p)
}
