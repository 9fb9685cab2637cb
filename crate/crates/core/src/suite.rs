//! Seeded verification suite for φ₃ producing a machine-readable report.

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::boundary::{
    horocycle_containment, julia_inequality, julia_quotient, nontangential_check, nontangential_samples,
    nontangential_state_bound, radial_carapoint, BoundaryPoint, RadialSchedule,
};
use crate::derivative::{directional_derivative, finite_difference, slope, Direction, StepSchedule};
use crate::desingularize::{boundary_vector_checks, desingularize, IDomain};
use crate::error::Result;
use crate::numerics::{c64, identity, max_abs, op_norm};
use crate::phi3::{
    knese_model_residual, lift_path, path_closed_form, path_grid, phi3_eval, phi3_realization_seeded,
    printed_beta_gamma, sos_residual, ColligationSource, Phi3, DEFAULT_FIT_SAMPLES, PRINTED_UNITARY_TOL,
};
use crate::sampling::{half_polyplane_point, polydisc_point, random_unitary, rng_from_seed, torus_point};

pub const SCHEMA_VERSION: u32 = 1;

/// Radii for the closed-form radial checks.
pub const RADIAL_GRID: [f64; 11] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99, 0.999];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Warn,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub worst_value: f64,
    pub tolerance: f64,
    /// Formula the check exercises.
    pub anchor: String,
}

impl Check {
    /// Passes when `worst <= tolerance`; NaN fails.
    pub fn at_most(name: &str, worst: f64, tolerance: f64, anchor: &str) -> Self {
        Self::new(name, worst <= tolerance, worst, tolerance, anchor)
    }

    /// Passes when `worst >= tolerance`.
    pub fn at_least(name: &str, worst: f64, tolerance: f64, anchor: &str) -> Self {
        Self::new(name, worst >= tolerance, worst, tolerance, anchor)
    }

    /// Passes when `worst > bound`.
    pub fn above(name: &str, worst: f64, bound: f64, anchor: &str) -> Self {
        Self::new(name, worst > bound, worst, bound, anchor)
    }

    fn new(name: &str, ok: bool, worst: f64, tolerance: f64, anchor: &str) -> Self {
        Self {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            worst_value: worst,
            tolerance,
            anchor: anchor.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub schema: u32,
    pub suite: String,
    pub seed: u64,
    pub samples: usize,
    pub tol: f64,
    pub checks: Vec<Check>,
    /// Kept out of the serialized report so that reports are reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Phi3SuiteConfig {
    /// Base sample count; the SOS check uses ten times as many points.
    pub samples: usize,
    pub seed: u64,
    /// Tolerance of the exact algebraic identities.
    pub tol: f64,
}

impl Default for Phi3SuiteConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0,
            tol: 1e-10,
        }
    }
}

fn diag(r: f64) -> Vec<Complex64> {
    vec![c64(r, 0.0); 3]
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0, |m: f64, v| if v.is_nan() { f64::NAN } else { m.max(v) })
}

fn min_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(
        f64::INFINITY,
        |m: f64, v| if v.is_nan() { f64::NAN } else { m.min(v) },
    )
}

/// Runs the φ₃ suite. Errors are reserved for invalid configurations and
/// failures of the machinery itself; numerical misses become failed checks.
pub fn verify_phi3(cfg: &Phi3SuiteConfig) -> Result<SuiteReport> {
    if cfg.samples == 0 || !(cfg.tol > 0.0) {
        return Err(crate::Error::Input("samples and tol must be positive".into()));
    }
    let start = Instant::now();
    let n = cfg.samples;
    let tol = cfg.tol;
    let mut rng = rng_from_seed(cfg.seed);
    let one = BoundaryPoint::ones(3);
    let mut checks = Vec::new();

    // Radial behaviour.
    let radial = max_of(
        RADIAL_GRID
            .iter()
            .map(|&r| (phi3_eval(&diag(r)).unwrap() + r * r).norm()),
    );
    checks.push(Check::at_most(
        "radial_closed_form",
        radial,
        1e-12,
        "φ₃(r𝟙) = -r²",
    ));
    let julia = max_of(
        RADIAL_GRID
            .iter()
            .map(|&r| (julia_quotient(&Phi3, &diag(r)).unwrap() - (1.0 + r)).abs()),
    );
    checks.push(Check::at_most(
        "julia_quotient_radial",
        julia,
        tol,
        "J(r𝟙) = 1 + r ≤ 2",
    ));
    let cara = radial_carapoint(&Phi3, &one, &RadialSchedule::default())?;
    checks.push(Check::at_most(
        "carapoint_alpha",
        (cara.alpha - 2.0).abs(),
        1e-6,
        "liminf J = 2",
    ));
    checks.push(Check::at_most(
        "carapoint_omega",
        (cara.omega + 1.0).norm(),
        1e-6,
        "lim φ₃(r𝟙) = -1",
    ));

    // Sum of squares and the model.
    let sos = max_of((0..10 * n).map(|_| sos_residual(&polydisc_point(&mut rng, 3, 1.0)).unwrap()));
    checks.push(Check::at_most(
        "sos_identity",
        sos,
        tol,
        "|q|² - |p|² = (1-|λ₁|²)S(λ₂,λ₃) + (1-|λ₂|²)S(λ₁,λ₃) + (1-|λ₃|²)S(λ₁,λ₂)",
    ));
    let model = max_of((0..n).map(|_| {
        let l = polydisc_point(&mut rng, 3, 1.0);
        let m = polydisc_point(&mut rng, 3, 1.0);
        knese_model_residual(&l, &m).unwrap()
    }));
    checks.push(Check::at_most("model_equation", model, tol, "H(λ,μ) = 0"));

    // Colligation.
    let fit = phi3_realization_seeded(cfg.seed, DEFAULT_FIT_SAMPLES, true)?;
    let r = &fit.realization;
    let (beta, gamma) = printed_beta_gamma();
    let bg = max_abs((r.beta() - &beta).iter().chain((r.gamma() - &gamma).iter()));
    checks.push(Check::at_most(
        "colligation_beta_gamma",
        bg,
        1e-8,
        "β, γ as printed",
    ));
    checks.push(Check::at_most(
        "colligation_unitary",
        r.unitary_defect(),
        1e-8,
        "L*L = LL* = 1",
    ));
    let formula = max_of((0..n).map(|_| {
        let l = polydisc_point(&mut rng, 3, 1.0);
        (r.eval(&l).unwrap() - phi3_eval(&l).unwrap()).norm()
    }));
    checks.push(Check::at_most(
        "realization_formula",
        formula,
        tol,
        "φ(λ) = a + <λ_P(1 - Dλ_P)⁻¹γ, β> = p/q",
    ));
    checks.push(match fit.source {
        ColligationSource::Printed => Check::at_most(
            "printed_d",
            fit.printed_unitary_defect,
            PRINTED_UNITARY_TOL,
            "printed D unitary",
        ),
        ColligationSource::Fitted => Check {
            name: "printed_d".into(),
            status: Status::Warn,
            worst_value: fit.discrepancy.max_abs,
            tolerance: PRINTED_UNITARY_TOL,
            anchor: "printed D unitary".into(),
        },
    });

    // Desingularization at 𝟙.
    let m = desingularize(r, &one)?;
    let blocks = m.blocks.as_ref().expect("fresh model carries its blocks");
    checks.push(Check::at_least(
        "kernel_dim",
        m.kernel_dim() as f64,
        1.0,
        "N = Ker(1 - Dτ_P) ≠ 0",
    ));
    let mut block = blocks.block_identity_residual();
    for _ in 0..n / 10 {
        let l = polydisc_point(&mut rng, 3, 1.0);
        let mu = polydisc_point(&mut rng, 3, 1.0);
        block = block
            .max(blocks.pencil_identity_residual(&l, &mu)?)
            .max(blocks.schur_complement_residual(&l)?);
    }
    checks.push(Check::at_most(
        "block_identities",
        block,
        tol,
        "X_j = P_N P_j|N, B_j = P_N⊥ P_j|N, Y_j = P_N⊥ P_j|N⊥, ΣY_j = 1",
    ));
    let gm = max_of((0..n).map(|_| {
        let l = polydisc_point(&mut rng, 3, 1.0);
        let mu = polydisc_point(&mut rng, 3, 1.0);
        m.generalized_model_residual(r, &l, &mu).unwrap()
    }));
    checks.push(Check::at_most(
        "generalized_model",
        gm,
        1e-8,
        "1 - conj(φ(μ))φ(λ) = <(1 - I(μ)*I(λ))u(λ), u(μ)>",
    ));
    let id = identity(m.dim());
    let i_radial = max_of(RADIAL_GRID.iter().map(|&s| {
        let i = m.eval_i(&diag(s), IDomain::OpenPolydisc).unwrap();
        op_norm(&(i - &id * c64(s, 0.0))).unwrap()
    }));
    checks.push(Check::at_most("i_radial", i_radial, 1e-12, "I(r𝟙) = r"));
    let i_torus = max_of((0..(n / 10).max(1)).map(|_| {
        let z = torus_point(&mut rng, 3);
        let i = m.eval_i(&z, IDomain::TorusOffTau).unwrap();
        let a = op_norm(&(i.adjoint() * &i - &id)).unwrap();
        let b = op_norm(&(&i * i.adjoint() - &id)).unwrap();
        a.max(b)
    }));
    checks.push(Check::at_most(
        "i_torus_unitary",
        i_torus,
        1e-8,
        "I(z)*I(z) = I(z)I(z)* = 1 on 𝕋³",
    ));
    let gr = max_of((0..n).map(|_| {
        let l = polydisc_point(&mut rng, 3, 1.0);
        (m.generalized_realization_eval(&l).unwrap() - phi3_eval(&l).unwrap()).norm()
    }));
    checks.push(Check::at_most(
        "generalized_realization",
        gr,
        1e-9,
        "φ(λ) = a + <I(λ)(1 - QI(λ))⁻¹γ, β̂>",
    ));

    // Boundary vector and slope.
    let bv = boundary_vector_checks(&m, r)?;
    checks.push(Check::at_most(
        "boundary_vector_norm",
        (bv.norm_sq - 2.0).abs(),
        1e-6,
        "‖u(τ)‖² = 2",
    ));
    let gap = bv.radial_limit.map_or(f64::INFINITY, |a| (a - bv.norm_sq).abs());
    checks.push(Check::at_most(
        "boundary_vector_radial",
        gap,
        1e-6,
        "‖u(τ)‖² = lim (1-|φ(rτ)|²)/(1-r²)",
    ));
    let tau_dir = Direction::new(one.coords().to_vec(), &one)?;
    let h_tau = slope(&m, &tau_dir)?;
    checks.push(Check::at_most(
        "slope_at_tau",
        (h_tau + 2.0).norm(),
        1e-6,
        "h(τ) = -‖u(τ)‖²",
    ));

    // Directional derivatives.
    let d1 = directional_derivative(&m, &tau_dir)?;
    checks.push(Check::at_most(
        "derivative_at_one",
        (d1 - 2.0).norm(),
        1e-6,
        "D_{-𝟙}φ₃(𝟙) = 2",
    ));
    let mut fd_ratio: f64 = 0.0;
    let mut closed: f64 = 0.0;
    for _ in 0..20 {
        let d = Direction::new(half_polyplane_point(&mut rng, one.coords()), &one)?;
        let h = slope(&m, &d)?;
        let fd = finite_difference(&Phi3, &one, m.omega, &d, &StepSchedule::default())?;
        let allowed = (1e-5 * h.norm()).max(1e-7);
        fd_ratio = fd_ratio.max((m.omega * h - fd.value).norm() / allowed);
        let z = d.coords();
        let e1 = z[0] + z[1] + z[2];
        let e2 = z[0] * z[1] + z[0] * z[2] + z[1] * z[2];
        closed = closed.max((m.omega * h - 2.0 * e2 / e1).norm() / (2.0 * e2 / e1).norm().max(1.0));
    }
    checks.push(Check::at_most(
        "finite_difference",
        fd_ratio,
        1.0,
        "ωh(δ) = lim (φ(τ - tδ) - ω)/t, scaled by max(1e-5|h|, 1e-7)",
    ));
    checks.push(Check::at_most(
        "derivative_closed_form",
        closed,
        1e-6,
        "D_{-δ}φ₃(𝟙) = 2e₂(δ)/e₁(δ)",
    ));
    let re = min_of((0..(n / 5).max(1)).map(|_| {
        let d = Direction::new(half_polyplane_point(&mut rng, one.coords()), &one).unwrap();
        (-slope(&m, &d).unwrap()).re
    }));
    checks.push(Check::above("slope_real_part", re, 0.0, "Re(-h(δ)) > 0"));

    // Boundary inequalities.
    let julia_slack = min_of((0..n).map(|_| {
        let l = polydisc_point(&mut rng, 3, 1.0);
        julia_inequality(&Phi3, &one, m.omega, 2.0, &l).unwrap().slack
    }));
    checks.push(Check::at_least(
        "julia_inequality",
        julia_slack,
        -1e-10,
        "|φ(λ) - ω|²/(1 - |φ(λ)|²) ≤ α max_j |λ_j - τ_j|²/(1 - |λ_j|²)",
    ));
    for radius in [0.5, 1.0, 2.0] {
        let rep = horocycle_containment(&Phi3, &one, c64(-1.0, 0.0), 2.0, radius, n, rng.random())?;
        checks.push(Check::at_most(
            &format!("horocycle_R{radius}"),
            rep.violations as f64,
            0.0,
            "φ(E(τ,R)³) ⊂ E(ω, αR)",
        ));
    }
    let mut state_excess = f64::NEG_INFINITY;
    for spread in [0.5, 2.0, 4.0] {
        let set = nontangential_samples(&mut rng, &one, spread, n / 10 + 1);
        let (_, c) = nontangential_check(&set, &one)?;
        let bound = nontangential_state_bound(c, 2.0);
        for l in &set {
            state_excess = state_excess.max(r.state_vector(l)?.norm() - bound);
        }
    }
    checks.push(Check::at_most(
        "nontangential_state",
        state_excess,
        1e-6,
        "‖v(λ)‖ ≤ 2c√α",
    ));

    // Basis invariance of the slope.
    let mut basis: f64 = 0.0;
    for _ in 0..2 {
        let u = random_unitary(&mut rng, m.dim());
        let rebased = m.rebased(&u)?;
        for _ in 0..10 {
            let d = Direction::new(half_polyplane_point(&mut rng, one.coords()), &one)?;
            basis = basis.max((slope(&m, &d)? - slope(&rebased, &d)?).norm());
        }
    }
    checks.push(Check::at_most(
        "basis_invariance",
        basis,
        1e-9,
        "h(δ) independent of the basis of N⊥",
    ));

    // Path to 𝟙 inside the symmetrized tridisc.
    let near = lift_path(1e-3)?;
    checks.push(Check::at_most(
        "path_value_near_one",
        (near.phi_value - 0.6).norm(),
        1e-2,
        "φ₃(λ(t)) → 3/5",
    ));
    checks.push(Check::at_most(
        "path_distance_to_one",
        near.dist_to_one(),
        0.1,
        "λ(t) → 𝟙",
    ));
    checks.push(Check::at_most(
        "radial_value_near_one",
        (phi3_eval(&diag(1.0 - 1e-3))? + 1.0).norm(),
        3e-3,
        "φ₃(r𝟙) → -1",
    ));
    let mut grid = path_grid(16);
    grid.push(1e-3);
    let mut path = 0.0f64;
    for t in grid {
        let s = lift_path(t)?;
        path = path.max((s.phi_value - path_closed_form(t)).norm());
    }
    checks.push(Check::at_most(
        "path_closed_form",
        path,
        1e-8,
        "φ₃(λ(t)) = (1-t)(3-t)/(5-2t)",
    ));

    Ok(SuiteReport {
        schema: SCHEMA_VERSION,
        suite: "phi3".into(),
        seed: cfg.seed,
        samples: n,
        tol,
        checks,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes_and_is_deterministic() {
        let cfg = Phi3SuiteConfig {
            samples: 50,
            seed: 3,
            ..Default::default()
        };
        let a = verify_phi3(&cfg).unwrap();
        if let Some(c) = a.failures().next() {
            panic!("{} failed: {} > {}", c.name, c.worst_value, c.tolerance);
        }
        let b = verify_phi3(&cfg).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
        assert!(!a.to_json_string().contains("wall_time"));
    }

    #[test]
    fn status_rules() {
        assert_eq!(Check::at_most("x", f64::NAN, 1.0, "").status, Status::Fail);
        assert_eq!(Check::at_most("x", 1.0, 1.0, "").status, Status::Pass);
        assert_eq!(Check::above("x", 0.0, 0.0, "").status, Status::Fail);
        let report = SuiteReport {
            schema: 1,
            suite: "s".into(),
            seed: 0,
            samples: 1,
            tol: 1.0,
            checks: vec![Check {
                name: "w".into(),
                status: Status::Warn,
                worst_value: 1.0,
                tolerance: 0.0,
                anchor: String::new(),
            }],
            wall_time: 0.0,
        };
        assert!(report.passed());
    }
}
