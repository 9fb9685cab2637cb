//! Seeded random generation of points, matrices and operator tuples.

use std::f64::consts::TAU;

use nalgebra::QR;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::numerics::{ComplexMatrix, ComplexVector};

pub type SeededRng = ChaCha20Rng;

/// Modulus cap for fitting and test points.
pub const SAMPLE_RADIUS: f64 = 0.9;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent generator for item `index` of a stream seeded by `seed`.
pub fn rng_for_item(seed: u64, index: u64) -> SeededRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

pub fn gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn unimodular(rng: &mut impl Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random::<f64>() * TAU)
}

/// Uniform sample of the disc of radius `radius` centred at 0.
pub fn disc_point(rng: &mut impl Rng, radius: f64) -> Complex64 {
    let r = radius * rng.random::<f64>().sqrt();
    Complex64::from_polar(r, rng.random::<f64>() * TAU)
}

/// Point of the polydisc with every coordinate of modulus below `radius`.
pub fn polydisc_point(rng: &mut impl Rng, d: usize, radius: f64) -> Vec<Complex64> {
    (0..d).map(|_| disc_point(rng, radius)).collect()
}

/// Point of the torus.
pub fn torus_point(rng: &mut impl Rng, d: usize) -> Vec<Complex64> {
    (0..d).map(|_| unimodular(rng)).collect()
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_vector(rng: &mut impl Rng, n: usize) -> ComplexVector {
    ComplexVector::from_fn(n, |_, _| gaussian(rng))
}

/// Haar-distributed unitary matrix.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let qr = QR::new(random_matrix(rng, n, n));
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Point of `{δ : Re(τ̄_j δ_j) > 0}`: `δ_j = τ_j(x_j + iy_j)` with
/// `log x_j` uniform on (-2, 1) and `y_j` uniform on (-2, 2).
pub fn half_polyplane_point(rng: &mut impl Rng, tau: &[Complex64]) -> Vec<Complex64> {
    tau.iter()
        .map(|t| {
            let x = rng.random_range(-2.0f64..1.0).exp();
            let y = rng.random_range(-2.0..2.0);
            t * Complex64::new(x, y)
        })
        .collect()
}

/// Random sizes summing to `n`, each at least one when `n >= d`.
pub fn random_block_sizes(rng: &mut impl Rng, n: usize, d: usize) -> Vec<usize> {
    let mut sizes = vec![0usize; d];
    let floor = usize::from(n >= d);
    for s in sizes.iter_mut() {
        *s = floor;
    }
    for _ in 0..(n - floor * d) {
        sizes[rng.random_range(0..d)] += 1;
    }
    sizes
}

/// Orthogonal projections onto consecutive column groups of a random unitary.
pub fn random_projections(rng: &mut impl Rng, n: usize, d: usize) -> Vec<ComplexMatrix> {
    let u = random_unitary(rng, n);
    let sizes = random_block_sizes(rng, n, d);
    let mut out = Vec::with_capacity(d);
    let mut start = 0;
    for s in sizes {
        let cols = u.columns(start, s);
        out.push(cols * cols.adjoint());
        start += s;
    }
    out
}

/// Compressions `V^* P_j V` of a random projection tuple on a larger space to
/// a random n-dimensional subspace; they are positive and sum to the identity.
pub fn random_partition_ops(rng: &mut impl Rng, n: usize, d: usize) -> Vec<ComplexMatrix> {
    let m = n + rng.random_range(0..=n);
    let p = random_projections(rng, m, d);
    let v = random_unitary(rng, m).columns(0, n).into_owned();
    p.iter().map(|pj| v.adjoint() * pj * &v).collect()
}
