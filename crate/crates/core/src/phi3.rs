//! The rational inner function
//!
//! ```text
//! φ₃(λ) = (3λ₁λ₂λ₃ - λ₁λ₂ - λ₁λ₃ - λ₂λ₃) / (3 - λ₁ - λ₂ - λ₃)
//! ```
//!
//! on the tridisc: its sum-of-squares decomposition, the 9-dimensional
//! model built from it, a unitary colligation realizing it, and a path in
//! the symmetrized tridisc along which φ₃ tends to 3/5 although its radial
//! limit at 𝟙 is -1.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::PolydiscFunction;
use crate::numerics::{self, c64, ComplexMatrix, ComplexVector};
use crate::pencil::ProjectionTuple;
use crate::realization::{
    colligation_matrix, fit_colligation, ColligationClass, FitResiduals, FitSample, Realization,
};
use crate::sampling::{polydisc_point, rng_from_seed, SAMPLE_RADIUS};

/// Tolerance on root sums, products and the deflation relations.
pub const ROOT_TOL: f64 = 1e-9;

/// Tolerance between the lifted path value and its closed form.
pub const PATH_VALUE_TOL: f64 = 1e-8;

/// Unitarity defect above which the printed colligation is replaced.
pub const PRINTED_UNITARY_TOL: f64 = 1e-6;

pub const DEFAULT_FIT_SAMPLES: usize = 40;

pub fn numerator(l: &[Complex64; 3]) -> Complex64 {
    3.0 * l[0] * l[1] * l[2] - l[0] * l[1] - l[0] * l[2] - l[1] * l[2]
}

pub fn denominator(l: &[Complex64; 3]) -> Complex64 {
    3.0 - l[0] - l[1] - l[2]
}

fn as_triple(lambda: &[Complex64]) -> Result<[Complex64; 3]> {
    lambda
        .try_into()
        .map_err(|_| Error::Input(format!("φ₃ takes 3 coordinates, got {}", lambda.len())))
}

/// `p(λ)/q(λ)` on the open tridisc.
///
/// Evaluated in `x = 𝟙 - λ`, where `p/q = (-e₁ + 2e₂ - 3e₃)/e₁` of `x`;
/// the direct form loses digits to cancellation near `𝟙`.
pub fn phi3_eval(lambda: &[Complex64]) -> Result<Complex64> {
    let l = as_triple(lambda)?;
    numerics::ensure_in_open_polydisc(&l, "λ")?;
    let x = l.map(|z| 1.0 - z);
    let e1 = x[0] + x[1] + x[2];
    let e2 = x[0] * x[1] + x[0] * x[2] + x[1] * x[2];
    let e3 = x[0] * x[1] * x[2];
    Ok((-e1 + 2.0 * e2 - 3.0 * e3) / e1)
}

/// φ₃ as a function of the elementary symmetric values.
pub fn phi3_symmetric(s: &G3Point) -> Complex64 {
    (3.0 * s.s3 - s.s2) / (3.0 - s.s1)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Phi3;

impl PolydiscFunction for Phi3 {
    fn arity(&self) -> usize {
        3
    }

    fn eval(&self, lambda: &[Complex64]) -> Result<Complex64> {
        phi3_eval(lambda)
    }
}

/// The vector `w(η, ζ)` whose squared norm is `S(η, ζ)`.
pub fn knese_w(eta: Complex64, zeta: Complex64) -> [Complex64; 3] {
    let r3 = 3f64.sqrt();
    [
        r3 * (eta * zeta - 0.5 * eta - 0.5 * zeta),
        r3 * (1.0 - 0.5 * eta - 0.5 * zeta),
        (eta - zeta) / 2f64.sqrt(),
    ]
}

pub fn knese_s(eta: Complex64, zeta: Complex64) -> f64 {
    knese_w(eta, zeta).iter().map(|z| z.norm_sqr()).sum()
}

/// `| |q|² - |p|² - Σ_j (1-|λ_j|²) S(other two) |` at any point of C³.
pub fn sos_residual(lambda: &[Complex64]) -> Result<f64> {
    let l = as_triple(lambda)?;
    let lhs = denominator(&l).norm_sqr() - numerator(&l).norm_sqr();
    let rhs = (1.0 - l[0].norm_sqr()) * knese_s(l[1], l[2])
        + (1.0 - l[1].norm_sqr()) * knese_s(l[0], l[2])
        + (1.0 - l[2].norm_sqr()) * knese_s(l[0], l[1]);
    Ok((lhs - rhs).abs())
}

/// The model vector `(1/q)[w(λ₂,λ₃); w(λ₁,λ₃); w(λ₁,λ₂)]` in C⁹.
pub fn knese_state(lambda: &[Complex64]) -> Result<ComplexVector> {
    let l = as_triple(lambda)?;
    numerics::ensure_in_open_polydisc(&l, "λ")?;
    let q = denominator(&l);
    let blocks = [knese_w(l[1], l[2]), knese_w(l[0], l[2]), knese_w(l[0], l[1])];
    Ok(ComplexVector::from_iterator(
        9,
        blocks.iter().flat_map(|b| b.iter().map(|z| z / q)),
    ))
}

/// The three coordinate selectors of C³ ⊕ C³ ⊕ C³.
pub fn phi3_projections() -> ProjectionTuple {
    ProjectionTuple::coordinate_blocks(&[3, 3, 3]).expect("coordinate blocks are projections")
}

/// `|1 - conj(φ₃(μ))φ₃(λ) - <(1 - μ_P* λ_P) v(λ), v(μ)>|` for the Knese model.
pub fn knese_model_residual(lambda: &[Complex64], mu: &[Complex64]) -> Result<f64> {
    let p = phi3_projections();
    let vl = knese_state(lambda)?;
    let vm = knese_state(mu)?;
    let lp = p.scalar_action(lambda)?;
    let mp = p.scalar_action(mu)?;
    let kernel = numerics::inner(&vl, &vm) - numerics::inner(&(lp * &vl), &(mp * &vm));
    Ok((1.0 - phi3_eval(mu)?.conj() * phi3_eval(lambda)? - kernel).norm())
}

/// The printed constants `(β, γ)`: `(1/√3)(e₁,e₁,e₁)` and `(1/√3)(e₂,e₂,e₂)`.
pub fn printed_beta_gamma() -> (ComplexVector, ComplexVector) {
    let s = 1.0 / 3f64.sqrt();
    let mut beta = ComplexVector::zeros(9);
    let mut gamma = ComplexVector::zeros(9);
    for block in 0..3 {
        beta[3 * block] = c64(s, 0.0);
        gamma[3 * block + 1] = c64(s, 0.0);
    }
    (beta, gamma)
}

/// The printed 9 x 9 matrix D.
pub fn printed_d() -> ComplexMatrix {
    let r = 6f64.sqrt();
    #[rustfmt::skip]
    let rows: [[f64; 9]; 9] = [
        [1.0 / 3.0, 0.0, 0.0, -1.0 / 6.0, -0.5, -1.0 / r, -1.0 / 6.0, -0.5, -1.0 / r],
        [0.0, 1.0 / 3.0, 1.0 / (3.0 * r), 1.0 / 6.0, -1.0 / 6.0, 2.0 / (3.0 * r), -1.0 / 6.0, -1.0 / 6.0, 1.0 / (3.0 * r)],
        [0.0, 0.0, 2.0 / 9.0, -1.0 / (3.0 * r), 1.0 / r, 1.0 / 9.0, 1.0 / (3.0 * r), -1.0 / r, -1.0 / 9.0],
        [-1.0 / 6.0, -0.5, -1.0 / r, 1.0 / 3.0, 0.0, 0.0, -1.0 / 6.0, -0.5, 1.0 / r],
        [1.0 / 18.0, -1.0 / 6.0, 1.0 / (3.0 * r), -1.0 / 9.0, 1.0 / 3.0, 0.0, 1.0 / 18.0, -1.0 / 6.0, -1.0 / (3.0 * r)],
        [-3.0 / (5.0 * r), 1.0 / r, 0.2, 0.0, 0.0, 0.0, 3.0 / (5.0 * r), -1.0 / r, 0.2],
        [-1.0 / 6.0, -0.5, 1.0 / r, -1.0 / 6.0, -0.5, 1.0 / r, 1.0 / 3.0, 0.0, 0.0],
        [1.0 / 18.0, -1.0 / 6.0, -1.0 / (3.0 * r), 1.0 / 18.0, -1.0 / 6.0, -1.0 / (3.0 * r), -1.0 / 9.0, 1.0 / 3.0, 0.0],
        [-1.0 / (3.0 * r), 1.0 / r, -1.0 / 9.0, 1.0 / (3.0 * r), -1.0 / r, 1.0 / 9.0, 0.0, 0.0, 2.0 / 9.0],
    ];
    ComplexMatrix::from_fn(9, 9, |i, j| c64(rows[i][j], 0.0))
}

/// The printed colligation as a 10 x 10 matrix.
pub fn printed_colligation() -> ComplexMatrix {
    let (beta, gamma) = printed_beta_gamma();
    colligation_matrix(c64(0.0, 0.0), &beta, &gamma, &printed_d())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ColligationSource {
    Printed,
    Fitted,
}

/// Signed comparison of the printed D against the D in use.
#[derive(Debug, Clone, Serialize)]
pub struct DDiscrepancy {
    /// Largest `|D_used - D_printed|` entry.
    pub max_abs: f64,
    /// 0-based (row, column) of that entry.
    pub worst_entry: (usize, usize),
    /// `D_used - D_printed` at the worst entry, as [re, im].
    pub signed: [f64; 2],
    /// Rows whose entries differ by more than 1e-6.
    pub rows_differing: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Phi3Realization {
    pub realization: Realization,
    pub source: ColligationSource,
    /// `|L*L - 1|_F` of the printed colligation.
    pub printed_unitary_defect: f64,
    /// Worst `|D λ_P v - (v - γ)|` of the printed D over the fit samples.
    pub printed_equation_residual: f64,
    pub discrepancy: DDiscrepancy,
    pub fit_residuals: Option<FitResiduals>,
    pub completion_dim: usize,
}

fn discrepancy(used: &ComplexMatrix, printed: &ComplexMatrix) -> DDiscrepancy {
    let mut max_abs = 0.0;
    let mut worst_entry = (0, 0);
    let mut rows_differing = Vec::new();
    for i in 0..printed.nrows() {
        let mut row_differs = false;
        for j in 0..printed.ncols() {
            let e = (used[(i, j)] - printed[(i, j)]).norm();
            if e > max_abs {
                max_abs = e;
                worst_entry = (i, j);
            }
            row_differs |= e > 1e-6;
        }
        if row_differs {
            rows_differing.push(i);
        }
    }
    let s = used[worst_entry] - printed[worst_entry];
    DDiscrepancy {
        max_abs,
        worst_entry,
        signed: [s.re, s.im],
        rows_differing,
    }
}

/// Knese model samples at seeded points of radius at most 0.9.
pub fn knese_samples(seed: u64, count: usize) -> Result<Vec<FitSample>> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let lambda = polydisc_point(&mut rng, 3, SAMPLE_RADIUS);
            Ok(FitSample {
                v: knese_state(&lambda)?,
                phi: phi3_eval(&lambda)?,
                lambda,
            })
        })
        .collect()
}

/// Realization of φ₃ with `a = 0` and block-selector projections.
///
/// The printed colligation is used when it is unitary within
/// [`PRINTED_UNITARY_TOL`]. Otherwise a unitary colligation is fitted to
/// Knese model samples, completed towards the printed one.
pub fn phi3_realization_seeded(seed: u64, samples: usize, use_reference: bool) -> Result<Phi3Realization> {
    let p = phi3_projections();
    let printed_l = printed_colligation();
    let printed_unitary_defect = numerics::unitarity_defect(&printed_l);
    let (_, gamma) = printed_beta_gamma();
    let d = printed_d();
    let fit_samples = knese_samples(seed, samples)?;
    let printed_equation_residual = fit_samples
        .iter()
        .map(|s| {
            let x = p.scalar_action(&s.lambda).expect("three coordinates") * &s.v;
            (&d * x - (&s.v - &gamma)).norm()
        })
        .fold(0.0, f64::max);

    if printed_unitary_defect <= PRINTED_UNITARY_TOL {
        let realization = Realization::from_colligation(&printed_l, p)?;
        return Ok(Phi3Realization {
            discrepancy: discrepancy(realization.d_matrix(), &d),
            realization,
            source: ColligationSource::Printed,
            printed_unitary_defect,
            printed_equation_residual,
            fit_residuals: None,
            completion_dim: 0,
        });
    }

    let reference = use_reference.then_some(&printed_l);
    let fit = fit_colligation(&fit_samples, &p, c64(0.0, 0.0), reference)?;
    if fit.realization.class() != ColligationClass::Unitary {
        return Err(Error::Internal(format!(
            "fitted φ₃ colligation is not unitary (defect {:e})",
            fit.realization.unitary_defect()
        )));
    }
    Ok(Phi3Realization {
        discrepancy: discrepancy(fit.realization.d_matrix(), &d),
        realization: fit.realization,
        source: ColligationSource::Fitted,
        printed_unitary_defect,
        printed_equation_residual,
        fit_residuals: Some(fit.residuals),
        completion_dim: fit.completion_dim,
    })
}

pub fn phi3_realization() -> Result<Phi3Realization> {
    phi3_realization_seeded(0, DEFAULT_FIT_SAMPLES, true)
}

/// A point `(s₁, s₂, s₃)` of the closed symmetrized tridisc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G3Point {
    pub s1: Complex64,
    pub s2: Complex64,
    pub s3: Complex64,
}

impl G3Point {
    /// Checks that the roots of `z³ - s₁z² + s₂z - s₃` lie in the closed disc.
    pub fn new(s1: Complex64, s2: Complex64, s3: Complex64) -> Result<Self> {
        let s = Self { s1, s2, s3 };
        let roots = s.roots()?;
        let worst = roots.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if worst > 1.0 + ROOT_TOL {
            return Err(Error::Membership(format!(
                "cubic has a root of modulus {worst}, outside the closed disc"
            )));
        }
        Ok(s)
    }

    /// `(e₁, e₂, e₃)(λ)`.
    pub fn from_point(lambda: &[Complex64; 3]) -> Self {
        let [a, b, c] = *lambda;
        Self {
            s1: a + b + c,
            s2: a * b + a * c + b * c,
            s3: a * b * c,
        }
    }

    pub fn cubic(&self, z: Complex64) -> Complex64 {
        ((z - self.s1) * z + self.s2) * z - self.s3
    }

    /// Roots of the cubic, in eigenvalue order.
    ///
    /// The cubic is shifted to `y = z - s₁/3`, which gives `y³ + py + q`
    /// with small coefficients when the roots cluster. Eigenvalues of its
    /// companion matrix are polished by one Newton step on that form, so
    /// clustered roots stay accurate. If the Schur iteration fails (the
    /// companion matrix of `y³` is nilpotent) the roots are taken from the
    /// trigonometric/Cardano formula instead.
    pub fn roots(&self) -> Result<[Complex64; 3]> {
        for z in [self.s1, self.s2, self.s3] {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::Input("symmetric coordinates must be finite".into()));
            }
        }
        let m = self.s1 / 3.0;
        let p = self.s2 - self.s1 * m;
        let q = -self.s3 + m * self.s2 - 2.0 * m * m * m;
        let g = |y: Complex64| (y * y + p) * y + q;
        let dg = |y: Complex64| 3.0 * y * y + p;
        let zero = c64(0.0, 0.0);
        let one = c64(1.0, 0.0);
        let companion =
            ComplexMatrix::from_row_slice(3, 3, &[zero, -p, -q, one, zero, zero, zero, one, zero]);
        let ys = match numerics::eigenvalues(&companion) {
            Ok(ev) => [ev[0], ev[1], ev[2]],
            Err(_) => depressed_cubic_roots(p, q),
        };
        let mut out = [zero; 3];
        for (slot, y) in out.iter_mut().zip(ys) {
            let f = g(y);
            let df = dg(y);
            let polished = y - f / df;
            let y = if df.norm() > 0.0 && g(polished).norm() <= f.norm() {
                polished
            } else {
                y
            };
            *slot = m + y;
        }
        Ok(out)
    }
}

/// Roots of `y³ + py + q` by Cardano's formula.
fn depressed_cubic_roots(p: Complex64, q: Complex64) -> [Complex64; 3] {
    let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let a = -q / 2.0 + disc;
    let b = -q / 2.0 - disc;
    let c = if a.norm() >= b.norm() { a } else { b };
    let u = c.powf(1.0 / 3.0);
    if u.norm() == 0.0 {
        return [c64(0.0, 0.0); 3];
    }
    let mut out = [c64(0.0, 0.0); 3];
    let mut w = c64(1.0, 0.0);
    for slot in out.iter_mut() {
        let uk = u * w;
        *slot = uk - p / (3.0 * uk);
        w *= omega;
    }
    out
}

/// Parametrization of 𝔾₃: `z₁ = β + β̄z₂`, `s₁ = z₁ + z̄₂s₃`, `s₂ = z₂ + z̄₁s₃`.
pub fn g3_from_params(beta: Complex64, z2: Complex64, s3: Complex64) -> Result<G3Point> {
    for (name, z) in [("beta", beta), ("z2", z2), ("s3", s3)] {
        if !(z.re.is_finite() && z.im.is_finite()) || z.norm() >= 1.0 {
            return Err(Error::Input(format!("{name} = {z} is not in the open disc")));
        }
    }
    let z1 = beta + beta.conj() * z2;
    G3Point::new(z1 + z2.conj() * s3, z2 + z1.conj() * s3, s3)
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("t = {t} is not in (0, 1)")))
    }
}

/// `s(t) = ((1-t)(3-2t), (1-t)(1+(1-t)(2-t)), 1-t)`.
pub fn s_path(t: f64) -> Result<G3Point> {
    check_t(t)?;
    let u = 1.0 - t;
    Ok(G3Point {
        s1: c64(u * (3.0 - 2.0 * t), 0.0),
        s2: c64(u * (1.0 + u * (2.0 - t)), 0.0),
        s3: c64(u, 0.0),
    })
}

/// `(1-t)(3-t)/(5-2t)`, the value of φ₃ along the path.
pub fn path_closed_form(t: f64) -> f64 {
    (1.0 - t) * (3.0 - t) / (5.0 - 2.0 * t)
}

#[derive(Debug, Clone, Copy)]
pub struct PathSample {
    pub t: f64,
    pub s: G3Point,
    /// Roots ordered by `|1 - λ_j|`.
    pub lambda: [Complex64; 3],
    /// `q_t(z) = (z - λ₁)(z² - b₁z + b₀)`.
    pub b1: Complex64,
    pub b0: Complex64,
    pub phi_value: Complex64,
    pub closed_form: f64,
}

impl PathSample {
    pub fn dist_to_one(&self) -> f64 {
        self.lambda.iter().map(|z| (1.0 - z).norm()).fold(0.0, f64::max)
    }
}

/// Roots of the cubic of `s`, checked against the closed disc and stably
/// sorted by distance to 1.
pub fn ordered_roots(s: &G3Point) -> Result<[Complex64; 3]> {
    let mut roots = s.roots()?;
    let worst = roots.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if worst > 1.0 + ROOT_TOL {
        return Err(Error::Membership(format!(
            "root of modulus {worst} lies outside the closed disc"
        )));
    }
    roots.sort_by(|a, b| (1.0 - a).norm().total_cmp(&(1.0 - b).norm()));
    Ok(roots)
}

/// Lifts `s(t)` to ordered roots with the quadratic cofactor.
pub fn lift_path(t: f64) -> Result<PathSample> {
    let s = s_path(t)?;
    let lambda = ordered_roots(&s)?;
    let [l1, l2, l3] = lambda;
    let b1 = s.s1 - l1;
    let b0 = s.s2 - l1 * b1;
    let checks = [
        ("λ₁+λ₂+λ₃ = s₁", (l1 + l2 + l3 - s.s1).norm()),
        ("λ₁λ₂λ₃ = s₃", (l1 * l2 * l3 - s.s3).norm()),
        ("λ₁b₀ = s₃", (l1 * b0 - s.s3).norm()),
    ];
    for (name, err) in checks {
        if err > ROOT_TOL {
            return Err(Error::Internal(format!("{name} fails by {err:e} at t = {t}")));
        }
    }
    let phi_value = numerator(&lambda) / denominator(&lambda);
    let closed_form = path_closed_form(t);
    let err = (phi_value - closed_form).norm();
    if err > PATH_VALUE_TOL {
        return Err(Error::Internal(format!(
            "φ₃ at the lifted point misses the closed form by {err:e} at t = {t}"
        )));
    }
    Ok(PathSample {
        t,
        s,
        lambda,
        b1,
        b0,
        phi_value,
        closed_form,
    })
}

/// `t_k = 2^{-k}` for `k = 2..=k_max`.
pub fn path_grid(k_max: u32) -> Vec<f64> {
    (2..=k_max).map(|k| 0.5f64.powi(k as i32)).collect()
}

pub fn write_path_csv<W: Write>(samples: &[PathSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "re_l1",
        "im_l1",
        "re_l2",
        "im_l2",
        "re_l3",
        "im_l3",
        "re_phi",
        "im_phi",
        "closed_form_re",
        "closed_form_im",
        "dist_to_one",
    ])?;
    for s in samples {
        let mut row = vec![s.t];
        for l in &s.lambda {
            row.push(l.re);
            row.push(l.im);
        }
        row.extend([
            s.phi_value.re,
            s.phi_value.im,
            s.closed_form,
            0.0,
            s.dist_to_one(),
        ]);
        w.write_record(row.iter().map(|x| format!("{x:e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoRow {
    pub t: f64,
    /// φ₃((1-t)𝟙).
    pub radial_phi: [f64; 2],
    pub radial_dist: f64,
    pub path_phi: [f64; 2],
    pub path_dist: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscontinuityReport {
    pub rows: Vec<DemoRow>,
    pub radial_limit: f64,
    pub path_limit: f64,
    /// Gap between the endpoint values of the two traces.
    pub endpoint_gap: f64,
}

/// Radial and path traces of φ₃ towards 𝟙 over a decreasing t grid.
pub fn discontinuity_demo(t_grid: &[f64]) -> Result<DiscontinuityReport> {
    if t_grid.is_empty() {
        return Err(Error::Input("t grid is empty".into()));
    }
    if t_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Input("t grid must be strictly decreasing".into()));
    }
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let sample = lift_path(t)?;
        let r = 1.0 - t;
        let radial = phi3_eval(&[c64(r, 0.0); 3])?;
        rows.push(DemoRow {
            t,
            radial_phi: [radial.re, radial.im],
            radial_dist: t,
            path_phi: [sample.phi_value.re, sample.phi_value.im],
            path_dist: sample.dist_to_one(),
        });
    }
    let last = rows.last().expect("nonempty");
    let endpoint_gap =
        (c64(last.radial_phi[0], last.radial_phi[1]) - c64(last.path_phi[0], last.path_phi[1])).norm();
    Ok(DiscontinuityReport {
        rows,
        radial_limit: -1.0,
        path_limit: 0.6,
        endpoint_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{disc_point, polydisc_point, rng_from_seed};

    fn diag(r: f64) -> [Complex64; 3] {
        [c64(r, 0.0); 3]
    }

    #[test]
    fn phi3_values() {
        assert_eq!(phi3_eval(&diag(0.0)).unwrap(), c64(0.0, 0.0));
        assert!((phi3_eval(&diag(0.5)).unwrap() - c64(-0.25, 0.0)).norm() < 1e-15);
        assert_eq!(
            phi3_eval(&[c64(0.5, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]).unwrap(),
            c64(0.0, 0.0)
        );
        assert!(matches!(phi3_eval(&diag(1.0)), Err(Error::Domain(_))));
        assert!(matches!(phi3_eval(&[c64(0.0, 0.0); 2]), Err(Error::Input(_))));
    }

    #[test]
    fn sos_at_origin_and_torus() {
        assert!((knese_s(c64(0.0, 0.0), c64(0.0, 0.0)) - 3.0).abs() < 1e-15);
        assert!(sos_residual(&diag(0.0)).unwrap() < 1e-14);
        let mut rng = rng_from_seed(1);
        for _ in 0..100 {
            let t = crate::sampling::torus_point(&mut rng, 3);
            assert!(sos_residual(&t).unwrap() < 1e-12);
            let l = polydisc_point(&mut rng, 3, 1.0);
            assert!(sos_residual(&l).unwrap() < 1e-12);
        }
    }

    #[test]
    fn knese_state_at_origin_is_printed_gamma() {
        let (_, gamma) = printed_beta_gamma();
        assert!((knese_state(&diag(0.0)).unwrap() - gamma).norm() < 1e-15);
    }

    #[test]
    fn knese_model_identity() {
        let mut rng = rng_from_seed(2);
        for _ in 0..100 {
            let l = polydisc_point(&mut rng, 3, 0.99);
            let m = polydisc_point(&mut rng, 3, 0.99);
            assert!(knese_model_residual(&l, &m).unwrap() < 1e-10);
        }
    }

    #[test]
    fn printed_d_solves_the_state_equation() {
        let r = phi3_realization().unwrap();
        assert!(r.printed_equation_residual < 1e-12);
    }

    #[test]
    fn realization_reproduces_phi3() {
        let r = phi3_realization().unwrap();
        let real = &r.realization;
        assert_eq!(real.a(), c64(0.0, 0.0));
        assert!(real.unitary_defect() <= 1e-8);
        let (beta, gamma) = printed_beta_gamma();
        assert!(numerics::max_abs((real.beta() - beta).iter()) < 1e-8);
        assert!(numerics::max_abs((real.gamma() - gamma).iter()) < 1e-8);
        assert!((real.eval(&diag(0.5)).unwrap() - c64(-0.25, 0.0)).norm() < 1e-12);
        let mut rng = rng_from_seed(3);
        for _ in 0..100 {
            let l = polydisc_point(&mut rng, 3, 0.99);
            assert!((real.eval(&l).unwrap() - phi3_eval(&l).unwrap()).norm() < 1e-10);
            assert!((real.state_vector(&l).unwrap() - knese_state(&l).unwrap()).norm() < 1e-9);
        }
    }

    #[test]
    fn realization_state_matches_knese_on_radius() {
        let r = phi3_realization().unwrap().realization;
        for k in 1..10 {
            let rr = k as f64 / 10.0;
            let diff = (r.state_vector(&diag(rr)).unwrap() - knese_state(&diag(rr)).unwrap()).norm();
            assert!(diff < 1e-10);
        }
    }

    #[test]
    fn g3_parametrization() {
        let o = g3_from_params(c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)).unwrap();
        assert_eq!(
            o,
            G3Point {
                s1: c64(0.0, 0.0),
                s2: c64(0.0, 0.0),
                s3: c64(0.0, 0.0)
            }
        );
        for t in [0.9, 0.5, 0.1, 1e-3] {
            let u = c64(1.0 - t, 0.0);
            let g = g3_from_params(u, u, u).unwrap();
            let s = s_path(t).unwrap();
            assert!((g.s1 - s.s1).norm() < 1e-14);
            assert!((g.s2 - s.s2).norm() < 1e-14);
            assert!((g.s3 - s.s3).norm() < 1e-14);
        }
        let mut rng = rng_from_seed(4);
        for _ in 0..200 {
            let g = g3_from_params(
                disc_point(&mut rng, 1.0),
                disc_point(&mut rng, 1.0),
                disc_point(&mut rng, 1.0),
            );
            assert!(g.is_ok());
        }
        assert!(g3_from_params(c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)).is_err());
    }

    #[test]
    fn s_path_values() {
        let s = s_path(0.5).unwrap();
        assert_eq!((s.s1.re, s.s2.re, s.s3.re), (1.0, 0.875, 0.5));
        let s = s_path(1e-12).unwrap();
        assert!((s.s1.re - 3.0).abs() < 1e-10 && (s.s2.re - 3.0).abs() < 1e-10);
        assert!(s_path(0.0).is_err() && s_path(1.0).is_err());
    }

    #[test]
    fn lifted_path_invariants() {
        for t in path_grid(16) {
            let p = lift_path(t).unwrap();
            let d: Vec<f64> = p.lambda.iter().map(|z| (1.0 - z).norm()).collect();
            assert!(d[0] <= d[1] && d[1] <= d[2]);
            assert!((p.lambda[0] * p.b1 + p.b0 - p.s.s2).norm() < 1e-9);
            assert!((p.phi_value - phi3_symmetric(&p.s)).norm() < 1e-8);
        }
        let p = lift_path(1e-5).unwrap();
        assert!((p.b1 - 2.0).norm() < 1e-2);
        assert!((p.b0 - 1.0).norm() < 1e-2);
    }

    #[test]
    fn path_near_one_has_value_near_three_fifths() {
        let p = lift_path(1e-3).unwrap();
        assert!((p.phi_value - 0.6).norm() <= 1e-2);
        assert!(p.dist_to_one() <= 0.1);
    }

    #[test]
    fn symmetric_round_trip() {
        let mut rng = rng_from_seed(5);
        for _ in 0..200 {
            let l: [Complex64; 3] = polydisc_point(&mut rng, 3, 1.0).try_into().unwrap();
            let roots = G3Point::from_point(&l).roots().unwrap();
            let mut used = [false; 3];
            for z in &l {
                let (k, dist) = roots
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| !used[*k])
                    .map(|(k, r)| (k, (r - z).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                used[k] = true;
                assert!(dist < 1e-9, "dist {dist:e}");
            }
        }
    }

    #[test]
    fn demo_traces() {
        let rep = discontinuity_demo(&[1e-2, 1e-3, 1e-4]).unwrap();
        let last = rep.rows.last().unwrap();
        assert!((last.radial_phi[0] + (1.0f64 - 1e-4).powi(2)).abs() < 1e-10);
        assert!((last.path_phi[0] - 0.6).abs() < 5e-3);
        assert!((rep.endpoint_gap - 1.6).abs() < 1e-2);
        assert!(discontinuity_demo(&[1e-3, 1e-2]).is_err());
    }

    #[test]
    fn path_csv_header() {
        let samples: Vec<_> = path_grid(4).into_iter().map(|t| lift_path(t).unwrap()).collect();
        let mut buf = Vec::new();
        write_path_csv(&samples, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "t,re_l1,im_l1,re_l2,im_l2,re_l3,im_l3,re_phi,im_phi,closed_form_re,closed_form_im,dist_to_one\n"
        ));
        assert_eq!(text.lines().count(), 4);
    }
}
