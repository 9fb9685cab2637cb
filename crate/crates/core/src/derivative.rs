//! Slope function and directional derivatives at a carapoint.
//!
//! For `z` with `Re(τ̄_j z_j) > 0`,
//! `h(z) = -<((𝟙/(τ̄z))_Y)^{-1} u(τ), u(τ)>`, and the derivative of φ at τ
//! in direction `-δ` is `ω h(δ)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::boundary::BoundaryPoint;
use crate::desingularize::DesingularizedModel;
use crate::error::{Error, Result};
use crate::function::PolydiscFunction;
use crate::numerics::{inner, sup_norm};

/// Smallest admissible `Re(τ̄_j δ_j)`.
pub const DIRECTION_TOL: f64 = 1e-12;

/// A point of the half-polyplane `{δ : Re(τ̄_j δ_j) > 0 for all j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    delta: Vec<Complex64>,
    tau: BoundaryPoint,
}

impl Direction {
    pub fn new(delta: Vec<Complex64>, tau: &BoundaryPoint) -> Result<Self> {
        if delta.len() != tau.d() {
            return Err(Error::Input(format!(
                "direction has {} coordinates, τ has {}",
                delta.len(),
                tau.d()
            )));
        }
        for (j, (z, t)) in delta.iter().zip(tau.coords()).enumerate() {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::Input("direction has non-finite coordinates".into()));
            }
            let re = (t.conj() * z).re;
            if re <= DIRECTION_TOL {
                return Err(Error::Domain(format!(
                    "Re(τ̄_{} δ_{}) = {re} is not positive",
                    j + 1,
                    j + 1
                )));
            }
        }
        Ok(Self {
            delta,
            tau: tau.clone(),
        })
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.delta
    }

    pub fn tau(&self) -> &BoundaryPoint {
        &self.tau
    }
}

fn check_model(m: &DesingularizedModel, z: &Direction) -> Result<()> {
    if z.tau() != &m.tau {
        return Err(Error::Input(
            "direction is based at a different boundary point".into(),
        ));
    }
    Ok(())
}

/// `h(z)`.
pub fn slope(m: &DesingularizedModel, z: &Direction) -> Result<Complex64> {
    check_model(m, z)?;
    let pencil = m.slope_pencil_inverse(z.coords())?;
    Ok(-inner(&(pencil * &m.u_tau), &m.u_tau))
}

/// `D_{-δ}φ(τ) = ω h(δ)`.
pub fn directional_derivative(m: &DesingularizedModel, delta: &Direction) -> Result<Complex64> {
    Ok(m.omega * slope(m, delta)?)
}

/// Step schedule `t_k = 2^{-k}` and the Richardson depth.
#[derive(Debug, Clone, Copy)]
pub struct StepSchedule {
    pub k_min: i32,
    pub k_max: i32,
    pub depth: usize,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            k_min: 8,
            k_max: 24,
            depth: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FiniteDifference {
    pub value: Complex64,
    pub err_est: f64,
    /// Largest step actually used, after shrinking into the polydisc.
    pub t_max: f64,
}

/// Extrapolated limit of `(φ(τ - tδ) - ω)/t` as `t → 0⁺`.
///
/// The quotients on the halving schedule feed a Richardson tableau of the
/// given depth; the entry with the smallest error estimate is returned and
/// the scan stops once the estimates start to grow, as rounding takes over.
pub fn finite_difference(
    phi: &impl PolydiscFunction,
    tau: &BoundaryPoint,
    omega: Complex64,
    delta: &Direction,
    schedule: &StepSchedule,
) -> Result<FiniteDifference> {
    if phi.arity() != tau.d() || delta.tau() != tau {
        return Err(Error::Input(
            "function, τ and δ disagree in dimension or base point".into(),
        ));
    }
    let point = |t: f64| -> Vec<Complex64> {
        tau.coords()
            .iter()
            .zip(delta.coords())
            .map(|(a, b)| a - t * b)
            .collect()
    };
    let mut shift = 0;
    while sup_norm(&point(0.5f64.powi(schedule.k_min + shift))) >= 1.0 {
        shift += 1;
        if shift > 40 {
            return Err(Error::Input("step schedule does not enter the polydisc".into()));
        }
    }
    let (k_min, k_max) = (schedule.k_min + shift, schedule.k_max + shift);
    let mut previous_row: Vec<Complex64> = Vec::new();
    let mut best = (Complex64::new(f64::NAN, 0.0), f64::INFINITY);
    for k in k_min..=k_max {
        let t = 0.5f64.powi(k);
        let q = (phi.eval(&point(t))? - omega) / t;
        let mut row = vec![q];
        let mut factor = 1.0;
        for j in 1..=schedule.depth.min(previous_row.len()) {
            factor *= 2.0;
            let next = (factor * row[j - 1] - previous_row[j - 1]) / (factor - 1.0);
            let err = (next - row[j - 1])
                .norm()
                .max((next - previous_row[j - 1]).norm());
            if err <= best.1 {
                best = (next, err);
            }
            row.push(next);
        }
        if previous_row.is_empty() {
            best = (q, f64::INFINITY);
        }
        if let (Some(last), Some(prev_last)) = (row.last(), previous_row.last()) {
            if row.len() > schedule.depth
                && (last - prev_last).norm() >= 2.0 * best.1
                && best.1 < f64::INFINITY
            {
                break;
            }
        }
        previous_row = row;
    }
    Ok(FiniteDifference {
        value: best.0,
        err_est: best.1,
        t_max: 0.5f64.powi(k_min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::desingularize::desingularize;
    use crate::function::Constant;
    use crate::numerics::c64;
    use crate::phi3::{phi3_realization, Phi3};

    fn model() -> DesingularizedModel {
        let r = phi3_realization().unwrap().realization;
        desingularize(&r, &BoundaryPoint::ones(3)).unwrap()
    }

    /// `2 e₂(δ) / e₁(δ)`: the exact derivative of φ₃ at 𝟙 in direction -δ,
    /// read off from `φ₃(𝟙 - tδ) = (-e₁ + 2t e₂ - 3t² e₃)/e₁`.
    fn phi3_derivative_oracle(d: &[Complex64]) -> Complex64 {
        let e1 = d[0] + d[1] + d[2];
        let e2 = d[0] * d[1] + d[0] * d[2] + d[1] * d[2];
        2.0 * e2 / e1
    }

    #[test]
    fn direction_validation() {
        let one = BoundaryPoint::ones(3);
        assert!(Direction::new(vec![c64(1.0, 0.0), c64(2.0, 0.0), c64(1.0, 1.0)], &one).is_ok());
        assert!(matches!(
            Direction::new(vec![c64(1.0, 0.0), c64(0.0, 1.0), c64(1.0, 0.0)], &one),
            Err(Error::Domain(_))
        ));
        assert!(Direction::new(vec![c64(1.0, 0.0)], &one).is_err());
    }

    #[test]
    fn slope_examples() {
        let m = model();
        let one = BoundaryPoint::ones(3);
        let tau = Direction::new(one.coords().to_vec(), &one).unwrap();
        let h = slope(&m, &tau).unwrap();
        assert!((h + m.u_tau.norm_squared()).norm() < 1e-12);
        assert!((h + 2.0).norm() < 1e-6);
        let c = Direction::new(vec![c64(2.5, 0.0); 3], &one).unwrap();
        assert!((slope(&m, &c).unwrap() - h * 2.5).norm() < 1e-10);
    }

    #[test]
    fn derivative_examples() {
        let m = model();
        let one = BoundaryPoint::ones(3);
        let d = Direction::new(vec![c64(1.0, 0.0); 3], &one).unwrap();
        assert!((directional_derivative(&m, &d).unwrap() - 2.0).norm() < 1e-6);
        let d = Direction::new(vec![c64(1.0, 0.0), c64(2.0, 0.0), c64(1.0, 1.0)], &one).unwrap();
        let exact = phi3_derivative_oracle(d.coords());
        assert!((directional_derivative(&m, &d).unwrap() - exact).norm() < 1e-6);
    }

    #[test]
    fn finite_difference_examples() {
        let one = BoundaryPoint::ones(3);
        let d = Direction::new(vec![c64(1.0, 0.0); 3], &one).unwrap();
        let fd = finite_difference(&Phi3, &one, c64(-1.0, 0.0), &d, &StepSchedule::default()).unwrap();
        assert!((fd.value - 2.0).norm() < 1e-8);
        let c = Constant {
            d: 3,
            value: c64(0.0, 1.0),
        };
        let fd = finite_difference(&c, &one, c64(0.0, 1.0), &d, &StepSchedule::default()).unwrap();
        assert!(fd.value.norm() < 1e-14);
        let m = model();
        let d = Direction::new(vec![c64(1.0, 0.0), c64(2.0, 0.0), c64(1.0, 1.0)], &one).unwrap();
        let fd = finite_difference(&Phi3, &one, m.omega, &d, &StepSchedule::default()).unwrap();
        let h = slope(&m, &d).unwrap();
        assert!((m.omega * h - fd.value).norm() <= (1e-5 * h.norm()).max(1e-7));
    }

    #[test]
    fn finite_difference_shrinks_steep_directions() {
        let one = BoundaryPoint::ones(3);
        let d = Direction::new(vec![c64(0.01, 5.0), c64(1.0, 0.0), c64(1.0, 0.0)], &one).unwrap();
        let fd = finite_difference(&Phi3, &one, c64(-1.0, 0.0), &d, &StepSchedule::default()).unwrap();
        assert!(fd.t_max < 0.5f64.powi(8));
        let exact = phi3_derivative_oracle(d.coords());
        assert!((fd.value - exact).norm() <= 1e-5 * exact.norm());
    }
}
