//! Chebyshev coefficient-space operations and the tau-method Helmholtz solver.
//!
//! Coefficients are indexed `0..=n` for `f(y) = sum a_k T_k(y)`.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

/// Scalar types the coefficient routines operate on (`f64` and `Complex64`).
pub trait Scalar:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
}
impl Scalar for f64 {}
impl Scalar for Complex64 {}

/// Coefficients of `f'` from coefficients of `f`.
pub fn derivative<T: Scalar>(a: &[T]) -> Vec<T> {
    let n = a.len();
    let mut b = vec![T::default(); n];
    if n < 2 {
        return b;
    }
    let deg = n - 1;
    b[deg - 1] = a[deg] * (2.0 * deg as f64);
    for k in (1..deg).rev() {
        let next = if k + 1 <= deg { b[k + 1] } else { T::default() };
        b[k - 1] = next + a[k] * (2.0 * k as f64);
    }
    b[0] = b[0] * 0.5;
    b
}

/// `f(+1)`.
pub fn value_top<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::default(), |acc, &c| acc + c)
}

/// `f(-1)`.
pub fn value_bottom<T: Scalar>(a: &[T]) -> T {
    a.iter()
        .enumerate()
        .fold(T::default(), |acc, (k, &c)| acc + c * sign(k))
}

/// `f'(+1)`.
pub fn slope_top<T: Scalar>(a: &[T]) -> T {
    a.iter()
        .enumerate()
        .fold(T::default(), |acc, (k, &c)| acc + c * (k * k) as f64)
}

/// `f'(-1)`.
pub fn slope_bottom<T: Scalar>(a: &[T]) -> T {
    a.iter()
        .enumerate()
        .fold(T::default(), |acc, (k, &c)| acc + c * (-sign(k) * (k * k) as f64))
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Wall row `a f + b f' = c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Robin {
    pub a: f64,
    pub b: f64,
}

impl Robin {
    pub const DIRICHLET: Robin = Robin { a: 1.0, b: 0.0 };
    pub const NEUMANN: Robin = Robin { a: 0.0, b: 1.0 };

    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }
}

/// Quasi-inverse of d²/dy²: maps coefficients of `f''` to those of `f`
/// for rows `k >= 2`, treating the two highest input modes as tau modes.
fn quasi_inverse_row(k: usize, deg: usize) -> [(usize, f64); 3] {
    let kf = k as f64;
    let c = if k == 2 { 2.0 } else { 1.0 };
    let lo = (k - 2, c / (4.0 * kf * (kf - 1.0)));
    let mid = if k + 2 <= deg {
        (k, -1.0 / (2.0 * (kf * kf - 1.0)))
    } else {
        (k, 0.0)
    };
    let hi = if k + 4 <= deg {
        (k + 2, 1.0 / (4.0 * kf * (kf + 1.0)))
    } else {
        (k + 2, 0.0)
    };
    [lo, mid, hi]
}

/// Prefactored operator `(lambda + k^2 - d²/dy²)` with Robin rows at both walls.
#[derive(Debug, Clone)]
pub struct HelmholtzOp {
    n: usize,
    shift: f64,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl HelmholtzOp {
    /// `n` is the number of Chebyshev coefficients; `shift = lambda + k^2`.
    pub fn new(n: usize, shift: f64, top: Robin, bottom: Robin) -> Result<Self> {
        if n < 3 {
            return Err(Error::Input("need at least 3 Chebyshev modes".into()));
        }
        for (name, r) in [("top", top), ("bottom", bottom)] {
            if r.a == 0.0 && r.b == 0.0 || !r.a.is_finite() || !r.b.is_finite() {
                return Err(Error::SingularBoundary(format!("degenerate {name} Robin row")));
            }
        }
        let deg = n - 1;
        let mut m = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let kk = (k * k) as f64;
            m[(0, k)] = top.a + top.b * kk;
            m[(1, k)] = bottom.a * sign(k) - bottom.b * sign(k) * kk;
        }
        for k in 2..n {
            m[(k, k)] += 1.0;
            for (col, q) in quasi_inverse_row(k, deg) {
                if q != 0.0 {
                    m[(k, col)] -= shift * q;
                }
            }
        }
        let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let lu = m.lu();
        let diag = lu.u().diagonal();
        let min_pivot = diag.iter().fold(f64::INFINITY, |s, v| s.min(v.abs()));
        if !(min_pivot > 1e-13 * scale) {
            return Err(Error::SingularBoundary(format!(
                "operator singular (pivot {min_pivot:e}) for shift {shift} with rows {top:?}, {bottom:?}"
            )));
        }
        Ok(Self { n, shift, lu })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Solves for coefficients given right-hand-side coefficients and wall data.
    pub fn solve(&self, rhs: &[Complex64], c_top: Complex64, c_bottom: Complex64) -> Vec<Complex64> {
        let re = self.solve_real(
            &rhs.iter().map(|c| c.re).collect::<Vec<_>>(),
            c_top.re,
            c_bottom.re,
        );
        let im = self.solve_real(
            &rhs.iter().map(|c| c.im).collect::<Vec<_>>(),
            c_top.im,
            c_bottom.im,
        );
        re.into_iter()
            .zip(im)
            .map(|(r, i)| Complex64::new(r, i))
            .collect()
    }

    pub fn solve_real(&self, rhs: &[f64], c_top: f64, c_bottom: f64) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let deg = self.n - 1;
        let mut b = DVector::<f64>::zeros(self.n);
        b[0] = c_top;
        b[1] = c_bottom;
        for k in 2..self.n {
            let mut acc = 0.0;
            for (col, q) in quasi_inverse_row(k, deg) {
                if q != 0.0 && col <= deg {
                    acc += q * rhs[col];
                }
            }
            b[k] = -acc;
        }
        let x = self
            .lu
            .solve(&b)
            .expect("factorization checked nonsingular at construction");
        x.iter().copied().collect()
    }
}
