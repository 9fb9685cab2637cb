//! Boundary behaviour at a torus point `τ`: Julia quotients, radial
//! carapoint detection, nontangential apertures, horocycles and the Julia
//! inequality.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::PolydiscFunction;
use crate::numerics::{self, c64, sup_norm};
use crate::sampling::{rng_for_item, unimodular};

/// Tolerance on `|τ_j| = 1`.
pub const UNIMODULAR_TOL: f64 = 1e-12;

/// Shrink factor applied to horocycle radii when sampling.
pub const HOROCYCLE_SHRINK: f64 = 1.0 - 1e-6;

/// Slack allowed in the sampled inequalities.
pub const INEQUALITY_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    tau: Vec<Complex64>,
}

impl BoundaryPoint {
    pub fn new(tau: Vec<Complex64>) -> Result<Self> {
        if tau.is_empty() {
            return Err(Error::Input("boundary point has no coordinates".into()));
        }
        for (j, t) in tau.iter().enumerate() {
            if !(t.re.is_finite() && t.im.is_finite()) || (t.norm() - 1.0).abs() > UNIMODULAR_TOL {
                return Err(Error::Input(format!(
                    "coordinate {} of τ has modulus {}, not 1",
                    j + 1,
                    t.norm()
                )));
            }
        }
        Ok(Self { tau })
    }

    /// `𝟙 = (1, …, 1)`.
    pub fn ones(d: usize) -> Self {
        Self {
            tau: vec![c64(1.0, 0.0); d],
        }
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.tau
    }

    pub fn d(&self) -> usize {
        self.tau.len()
    }

    /// `rτ`.
    pub fn scaled(&self, r: f64) -> Vec<Complex64> {
        self.tau.iter().map(|t| t * r).collect()
    }

    /// `τ̄`.
    pub fn conj(&self) -> Vec<Complex64> {
        self.tau.iter().map(|t| t.conj()).collect()
    }
}

fn check_arity(phi: &impl PolydiscFunction, d: usize) -> Result<()> {
    if phi.arity() != d {
        return Err(Error::Input(format!(
            "function has {} variables but the point has {d}",
            phi.arity()
        )));
    }
    Ok(())
}

/// `(1 - |φ(λ)|) / (1 - ‖λ‖_∞)`.
pub fn julia_quotient(phi: &impl PolydiscFunction, lambda: &[Complex64]) -> Result<f64> {
    check_arity(phi, lambda.len())?;
    numerics::ensure_in_open_polydisc(lambda, "λ")?;
    let value = phi.eval(lambda)?;
    Ok((1.0 - value.norm()) / (1.0 - sup_norm(lambda)))
}

/// Richardson extrapolation of values at step sizes `h, h/2, h/4, …`
/// assuming an expansion in integer powers of `h`; uses every value given.
pub fn richardson(values: &[Complex64]) -> Option<Complex64> {
    let mut row: Vec<Complex64> = values.to_vec();
    if row.is_empty() {
        return None;
    }
    let mut factor = 1.0;
    while row.len() > 1 {
        factor *= 2.0;
        row = row
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
    }
    Some(row[0])
}

/// Geometric radius schedule `r_k = 1 - 2^{-k}` and extrapolation settings.
#[derive(Debug, Clone, Copy)]
pub struct RadialSchedule {
    pub k_min: u32,
    pub k_max: u32,
    /// Number of Richardson levels.
    pub depth: usize,
    /// Convergence threshold on successive extrapolants.
    pub tol: f64,
}

impl Default for RadialSchedule {
    fn default() -> Self {
        Self {
            k_min: 4,
            k_max: 24,
            depth: 2,
            tol: 1e-6,
        }
    }
}

/// Extrapolated limits of several sequences sampled on one schedule.
///
/// `sample(k)` returns the values of all tracked sequences at step k. The
/// scan stops at the first k at which every extrapolant moved by less than
/// `tol`.
fn scan_limits<F>(schedule: &RadialSchedule, width: usize, mut sample: F) -> Result<(Vec<Complex64>, bool)>
where
    F: FnMut(u32) -> Result<Vec<Complex64>>,
{
    let mut history: Vec<Vec<Complex64>> = vec![Vec::new(); width];
    let mut previous: Option<Vec<Complex64>> = None;
    let mut latest = vec![c64(f64::NAN, 0.0); width];
    for k in schedule.k_min..=schedule.k_max {
        let values = sample(k)?;
        for (h, v) in history.iter_mut().zip(values) {
            h.push(v);
        }
        if history[0].len() < schedule.depth + 1 {
            continue;
        }
        let current: Vec<Complex64> = history
            .iter()
            .map(|h| richardson(&h[h.len() - schedule.depth - 1..]).expect("nonempty"))
            .collect();
        if let Some(prev) = &previous {
            let moved = prev
                .iter()
                .zip(&current)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            if moved < schedule.tol && current.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Ok((current, true));
            }
        }
        latest.clone_from(&current);
        previous = Some(current);
    }
    Ok((latest, false))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RadialRow {
    pub r: f64,
    pub julia: f64,
    pub phi: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct CarapointReport {
    /// Limit of the Julia quotient along the radius; `+∞` when the scan did
    /// not converge.
    pub alpha: f64,
    /// Radial limit of φ.
    pub omega: Complex64,
    pub converged: bool,
    pub trace: Vec<RadialRow>,
}

/// Radial limits of the Julia quotient and of φ at `τ`.
pub fn radial_carapoint(
    phi: &impl PolydiscFunction,
    tau: &BoundaryPoint,
    schedule: &RadialSchedule,
) -> Result<CarapointReport> {
    check_arity(phi, tau.d())?;
    let mut trace = Vec::new();
    let (limits, converged) = scan_limits(schedule, 2, |k| {
        let r = 1.0 - 0.5f64.powi(k as i32);
        let value = phi.eval(&tau.scaled(r))?;
        let julia = (1.0 - value.norm()) / (1.0 - r);
        trace.push(RadialRow {
            r,
            julia,
            phi: [value.re, value.im],
        });
        Ok(vec![c64(julia, 0.0), value])
    })?;
    Ok(CarapointReport {
        alpha: if converged { limits[0].re } else { f64::INFINITY },
        omega: limits[1],
        converged,
        trace,
    })
}

/// Radial limit of `(1 - |φ(rτ)|²) / (1 - r²)`, the second form of the
/// Julia limit. Returns `None` when the scan does not converge.
pub fn radial_squared_julia_limit(
    phi: &impl PolydiscFunction,
    tau: &BoundaryPoint,
    schedule: &RadialSchedule,
) -> Result<Option<f64>> {
    check_arity(phi, tau.d())?;
    let (limits, converged) = scan_limits(schedule, 1, |k| {
        let r = 1.0 - 0.5f64.powi(k as i32);
        let value = phi.eval(&tau.scaled(r))?;
        Ok(vec![c64((1.0 - value.norm_sqr()) / (1.0 - r * r), 0.0)])
    })?;
    Ok(converged.then_some(limits[0].re))
}

/// Radial limit of an arbitrary quantity `f(r)` on the schedule.
pub fn radial_limit<F>(schedule: &RadialSchedule, mut f: F) -> Result<Option<Complex64>>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let (limits, converged) = scan_limits(schedule, 1, |k| Ok(vec![f(1.0 - 0.5f64.powi(k as i32))?]))?;
    Ok(converged.then_some(limits[0]))
}

pub fn write_radial_csv<W: Write>(trace: &[RadialRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "J", "re_phi", "im_phi"])?;
    for row in trace {
        w.write_record(
            [row.r, row.julia, row.phi[0], row.phi[1]]
                .iter()
                .map(|x| format!("{x:e}")),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Smallest aperture `c` with `‖λ - τ‖_∞ <= c (1 - ‖λ‖_∞)` on all of `s`.
pub fn nontangential_check(s: &[Vec<Complex64>], tau: &BoundaryPoint) -> Result<(bool, f64)> {
    if s.is_empty() {
        return Err(Error::Input("sample set is empty".into()));
    }
    let mut c: f64 = 0.0;
    for (i, lambda) in s.iter().enumerate() {
        if lambda.len() != tau.d() {
            return Err(Error::Input(format!("sample {} has the wrong length", i + 1)));
        }
        let m = sup_norm(lambda);
        if !(m < 1.0) {
            return Err(Error::Input(format!(
                "sample {} is not in the open polydisc (sup norm {m})",
                i + 1
            )));
        }
        let dist = lambda
            .iter()
            .zip(tau.coords())
            .map(|(l, t)| (l - t).norm())
            .fold(0.0, f64::max);
        c = c.max(dist / (1.0 - m));
    }
    Ok((c.is_finite(), c))
}

/// Points `λ_j = τ_j (1 - h (1 + i s_j))` with `|s_j| <= spread` and
/// `h = 10^{-e}`, `e` uniform in `[1, 6]`. These approach τ inside a cone.
pub fn nontangential_samples(
    rng: &mut impl Rng,
    tau: &BoundaryPoint,
    spread: f64,
    count: usize,
) -> Vec<Vec<Complex64>> {
    (0..count)
        .map(|_| {
            let h = 10f64.powf(-rng.random_range(1.0..6.0));
            tau.coords()
                .iter()
                .map(|t| {
                    let s = spread * (2.0 * rng.random::<f64>() - 1.0);
                    t * (1.0 - h * c64(1.0, s))
                })
                .collect()
        })
        .collect()
}

/// `‖u(λ)‖ <= 2c√α` on nontangential sets with aperture c.
pub fn nontangential_state_bound(c: f64, alpha: f64) -> f64 {
    2.0 * c * alpha.sqrt()
}

/// The horocycle `E(τ_j, R) = D(τ_j/(R+1), R/(R+1))`.
#[derive(Debug, Clone, Copy)]
pub struct Horocycle {
    pub tau: Complex64,
    pub radius_parameter: f64,
}

impl Horocycle {
    pub fn new(tau: Complex64, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Input(format!(
                "horocycle parameter R = {r} must be positive"
            )));
        }
        if (tau.norm() - 1.0).abs() > UNIMODULAR_TOL {
            return Err(Error::Input("horocycle base point is not unimodular".into()));
        }
        Ok(Self {
            tau,
            radius_parameter: r,
        })
    }

    pub fn center(&self) -> Complex64 {
        self.tau / (self.radius_parameter + 1.0)
    }

    pub fn radius(&self) -> f64 {
        self.radius_parameter / (self.radius_parameter + 1.0)
    }

    /// `|z - τ|² / (1 - |z|²) < R`, equivalent to membership in the disc.
    pub fn contains(&self, z: Complex64) -> bool {
        z.norm() < 1.0 && (z - self.tau).norm_sqr() / (1.0 - z.norm_sqr()) < self.radius_parameter
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Complex64 {
        let rho = self.radius() * HOROCYCLE_SHRINK * rng.random::<f64>().sqrt();
        self.center() + rho * unimodular(rng)
    }
}

/// `|φ - ω|² / (1 - |φ|²)`, with 0 when `φ = ω` on the unit circle.
fn horocycle_ratio(value: Complex64, omega: Complex64) -> (f64, bool) {
    let den = 1.0 - value.norm_sqr();
    if den <= 0.0 {
        (0.0, true)
    } else {
        ((value - omega).norm_sqr() / den, false)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HorocycleReport {
    pub r: f64,
    pub samples: usize,
    pub violations: usize,
    /// Minimum of `αR - |φ-ω|²/(1-|φ|²)` over the samples.
    pub worst_slack: f64,
    /// Samples with `|φ| = 1`, treated as contained.
    pub degenerate: usize,
}

/// Samples the horosphere `E(τ₁,R) × … × E(τ_d,R)` and checks that φ maps
/// it into `E(ω, αR)`.
#[allow(clippy::too_many_arguments)]
pub fn horocycle_containment(
    phi: &impl PolydiscFunction,
    tau: &BoundaryPoint,
    omega: Complex64,
    alpha: f64,
    r: f64,
    n: usize,
    seed: u64,
) -> Result<HorocycleReport> {
    check_arity(phi, tau.d())?;
    let cycles = tau
        .coords()
        .iter()
        .map(|t| Horocycle::new(*t, r))
        .collect::<Result<Vec<_>>>()?;
    let mut report = HorocycleReport {
        r,
        samples: n,
        violations: 0,
        worst_slack: f64::INFINITY,
        degenerate: 0,
    };
    for i in 0..n {
        let mut rng = rng_for_item(seed, i as u64);
        let lambda: Vec<Complex64> = cycles.iter().map(|h| h.sample(&mut rng)).collect();
        let value = phi.eval(&lambda)?;
        let (ratio, degenerate) = horocycle_ratio(value, omega);
        if degenerate {
            report.degenerate += 1;
            continue;
        }
        let slack = alpha * r - ratio;
        report.worst_slack = report.worst_slack.min(slack);
        if slack < -INEQUALITY_SLACK {
            report.violations += 1;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct JuliaSlack {
    pub slack: f64,
    /// `|φ(λ)| = 1`; the slack is then reported as `+∞`.
    pub degenerate: bool,
}

/// `α max_j |λ_j-τ_j|²/(1-|λ_j|²) - |φ(λ)-ω|²/(1-|φ(λ)|²)`.
pub fn julia_inequality(
    phi: &impl PolydiscFunction,
    tau: &BoundaryPoint,
    omega: Complex64,
    alpha: f64,
    lambda: &[Complex64],
) -> Result<JuliaSlack> {
    check_arity(phi, tau.d())?;
    if lambda.len() != tau.d() {
        return Err(Error::Input("point and τ differ in length".into()));
    }
    numerics::ensure_in_open_polydisc(lambda, "λ")?;
    let value = phi.eval(lambda)?;
    let bound = lambda
        .iter()
        .zip(tau.coords())
        .map(|(l, t)| (l - t).norm_sqr() / (1.0 - l.norm_sqr()))
        .fold(0.0, f64::max);
    let den = 1.0 - value.norm_sqr();
    if den <= 0.0 {
        return Ok(JuliaSlack {
            slack: f64::INFINITY,
            degenerate: true,
        });
    }
    Ok(JuliaSlack {
        slack: alpha * bound - (value - omega).norm_sqr() / den,
        degenerate: false,
    })
}
