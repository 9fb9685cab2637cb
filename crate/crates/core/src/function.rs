//! Functions on the polydisc that the boundary and derivative routines
//! can evaluate.

use num_complex::Complex64;

use crate::error::Result;

pub trait PolydiscFunction {
    /// Number of variables.
    fn arity(&self) -> usize;

    fn eval(&self, lambda: &[Complex64]) -> Result<Complex64>;
}

impl<T: PolydiscFunction + ?Sized> PolydiscFunction for &T {
    fn arity(&self) -> usize {
        (**self).arity()
    }

    fn eval(&self, lambda: &[Complex64]) -> Result<Complex64> {
        (**self).eval(lambda)
    }
}

/// The constant function `c` in `d` variables.
#[derive(Debug, Clone, Copy)]
pub struct Constant {
    pub d: usize,
    pub value: Complex64,
}

impl PolydiscFunction for Constant {
    fn arity(&self) -> usize {
        self.d
    }

    fn eval(&self, _lambda: &[Complex64]) -> Result<Complex64> {
        Ok(self.value)
    }
}

/// Adapter for a closure.
pub struct FnOnPolydisc<F> {
    pub d: usize,
    pub f: F,
}

impl<F> FnOnPolydisc<F>
where
    F: Fn(&[Complex64]) -> Complex64,
{
    pub fn new(d: usize, f: F) -> Self {
        Self { d, f }
    }
}

impl<F> PolydiscFunction for FnOnPolydisc<F>
where
    F: Fn(&[Complex64]) -> Complex64,
{
    fn arity(&self) -> usize {
        self.d
    }

    fn eval(&self, lambda: &[Complex64]) -> Result<Complex64> {
        Ok((self.f)(lambda))
    }
}
