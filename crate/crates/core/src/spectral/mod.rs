//! Fourier x Chebyshev discretization of the periodic channel
//! `[0, lx) x [-1, 1]`.
//!
//! Physical arrays have shape `(nx, ny)` indexed `[i, j]` with `x_i = i lx / nx`
//! and Gauss-Lobatto nodes `y_j = cos(pi j / (ny - 1))`, so `j = 0` is the top
//! wall. Spectral arrays have shape `(nx/2 + 1, ny)`: non-negative Fourier
//! modes by Chebyshev coefficients.

pub mod cheb;

use crate::error::{Error, Result};
pub use cheb::{HelmholtzOp, Robin};
use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Collocation grid with cached transform plans and Dirichlet Poisson operators.
pub struct ChannelGrid {
    nx: usize,
    ny: usize,
    lx: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    kx_cut: usize,
    cheb_cut: usize,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    /// Row-major `(ny, ny)`: coefficient `n` from node values.
    cheb_fwd: Vec<f64>,
    /// Row-major `(ny, ny)`: node value `j` from coefficients.
    cheb_inv: Vec<f64>,
    cc_weights: Vec<f64>,
    poisson: Vec<HelmholtzOp>,
}

impl fmt::Debug for ChannelGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChannelGrid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("lx", &self.lx)
            .finish()
    }
}

impl ChannelGrid {
    pub fn new(nx: usize, ny: usize, lx: f64) -> Result<Arc<Self>> {
        if nx < 8 || nx % 2 != 0 {
            return Err(Error::ParameterDomain(format!("nx must be even and >= 8, got {nx}")));
        }
        if ny < 9 {
            return Err(Error::ParameterDomain(format!("ny must be >= 9, got {ny}")));
        }
        if !(lx > 0.0 && lx.is_finite()) {
            return Err(Error::ParameterDomain(format!("lx must be positive, got {lx}")));
        }
        let deg = ny - 1;
        let x = (0..nx).map(|i| lx * i as f64 / nx as f64).collect();
        let mut y: Vec<f64> = (0..ny).map(|j| (PI * j as f64 / deg as f64).cos()).collect();
        y[0] = 1.0;
        y[deg] = -1.0;
        if deg % 2 == 0 {
            y[deg / 2] = 0.0;
        }
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(nx);
        let fft_inv = planner.plan_fft_inverse(nx);

        let cbar = |k: usize| if k == 0 || k == deg { 2.0 } else { 1.0 };
        let mut cheb_fwd = vec![0.0; ny * ny];
        let mut cheb_inv = vec![0.0; ny * ny];
        for n in 0..ny {
            for j in 0..ny {
                // cos(pi n j / deg) evaluated with the product reduced mod 2 deg
                let c = (PI * ((n * j) % (2 * deg)) as f64 / deg as f64).cos();
                cheb_inv[j * ny + n] = c;
                cheb_fwd[n * ny + j] = 2.0 * c / (deg as f64 * cbar(n) * cbar(j));
            }
        }
        let cc_weights = (0..ny)
            .map(|j| {
                (0..ny)
                    .step_by(2)
                    .map(|n| 2.0 / (1.0 - (n * n) as f64) * cheb_fwd[n * ny + j])
                    .sum()
            })
            .collect();
        let poisson = (0..=nx / 2)
            .map(|k| {
                let kw = 2.0 * PI * k as f64 / lx;
                HelmholtzOp::new(ny, kw * kw, Robin::DIRICHLET, Robin::DIRICHLET)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(Self {
            nx,
            ny,
            lx,
            x,
            y,
            kx_cut: nx / 3,
            cheb_cut: (2 * deg) / 3,
            fft_fwd,
            fft_inv,
            cheb_fwd,
            cheb_inv,
            cc_weights,
            poisson,
        }))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn x_nodes(&self) -> &[f64] {
        &self.x
    }
    pub fn y_nodes(&self) -> &[f64] {
        &self.y
    }
    /// Number of stored Fourier modes `nx/2 + 1`.
    pub fn nkx(&self) -> usize {
        self.nx / 2 + 1
    }
    /// Highest Fourier index kept by the 2/3 rule.
    pub fn kx_cut(&self) -> usize {
        self.kx_cut
    }
    /// Highest Chebyshev index kept by the 2/3 rule.
    pub fn cheb_cut(&self) -> usize {
        self.cheb_cut
    }
    /// Physical wavenumber of Fourier index `k`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.lx
    }
    /// Clenshaw-Curtis weights on `[-1, 1]`.
    pub fn cc_weights(&self) -> &[f64] {
        &self.cc_weights
    }
    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    /// Local wall-normal spacing at node `j` (smaller adjacent gap).
    pub fn dy_local(&self, j: usize) -> f64 {
        let up = if j > 0 { self.y[j - 1] - self.y[j] } else { f64::INFINITY };
        let dn = if j + 1 < self.ny { self.y[j] - self.y[j + 1] } else { f64::INFINITY };
        up.min(dn)
    }

    /// Chebyshev coefficients of a real profile at the nodes.
    pub fn cheb_forward(&self, f: &[f64]) -> Vec<f64> {
        let ny = self.ny;
        (0..ny)
            .map(|n| {
                let row = &self.cheb_fwd[n * ny..(n + 1) * ny];
                row.iter().zip(f).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Node values of a real Chebyshev series.
    pub fn cheb_inverse(&self, a: &[f64]) -> Vec<f64> {
        let ny = self.ny;
        (0..ny)
            .map(|j| {
                let row = &self.cheb_inv[j * ny..(j + 1) * ny];
                row.iter().zip(a).map(|(c, v)| c * v).sum()
            })
            .collect()
    }

    fn cheb_forward_complex(&self, f: ArrayView1<Complex64>, out: &mut [Complex64]) {
        let ny = self.ny;
        for (n, o) in out.iter_mut().enumerate() {
            let row = &self.cheb_fwd[n * ny..(n + 1) * ny];
            let (mut re, mut im) = (0.0, 0.0);
            for (c, v) in row.iter().zip(f.iter()) {
                re += c * v.re;
                im += c * v.im;
            }
            *o = Complex64::new(re, im);
        }
    }

    fn cheb_inverse_complex(&self, a: ArrayView1<Complex64>, out: &mut [Complex64]) {
        let ny = self.ny;
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.cheb_inv[j * ny..(j + 1) * ny];
            let (mut re, mut im) = (0.0, 0.0);
            for (c, v) in row.iter().zip(a.iter()) {
                re += c * v.re;
                im += c * v.im;
            }
            *o = Complex64::new(re, im);
        }
    }

    /// Physical `(nx, ny)` values to spectral `(nx/2+1, ny)` coefficients.
    pub fn forward(&self, values: &Array2<f64>) -> Array2<Complex64> {
        let (nx, ny, nk) = (self.nx, self.ny, self.nkx());
        let mut mid = Array2::<Complex64>::zeros((nk, ny));
        let mut buf = vec![Complex64::new(0.0, 0.0); nx];
        let inv_n = 1.0 / nx as f64;
        for j in 0..ny {
            for i in 0..nx {
                buf[i] = Complex64::new(values[[i, j]], 0.0);
            }
            self.fft_fwd.process(&mut buf);
            for k in 0..nk {
                mid[[k, j]] = buf[k] * inv_n;
            }
        }
        let mut out = Array2::<Complex64>::zeros((nk, ny));
        let mut row = vec![Complex64::new(0.0, 0.0); ny];
        for k in 0..nk {
            self.cheb_forward_complex(mid.row(k), &mut row);
            for n in 0..ny {
                out[[k, n]] = row[n];
            }
        }
        out
    }

    /// Spectral coefficients back to physical values.
    pub fn inverse(&self, spec: &Array2<Complex64>) -> Array2<f64> {
        let (nx, ny, nk) = (self.nx, self.ny, self.nkx());
        let mut mid = Array2::<Complex64>::zeros((nk, ny));
        let mut row = vec![Complex64::new(0.0, 0.0); ny];
        for k in 0..nk {
            self.cheb_inverse_complex(spec.row(k), &mut row);
            for j in 0..ny {
                mid[[k, j]] = row[j];
            }
        }
        let mut out = Array2::<f64>::zeros((nx, ny));
        let mut buf = vec![Complex64::new(0.0, 0.0); nx];
        for j in 0..ny {
            buf[0] = Complex64::new(mid[[0, j]].re, 0.0);
            for k in 1..nx / 2 {
                buf[k] = mid[[k, j]];
                buf[nx - k] = mid[[k, j]].conj();
            }
            buf[nx / 2] = Complex64::new(mid[[nx / 2, j]].re, 0.0);
            self.fft_inv.process(&mut buf);
            for i in 0..nx {
                out[[i, j]] = buf[i].re;
            }
        }
        out
    }

    /// Fourier coefficients of a wall trace (length `nx/2 + 1`).
    pub fn trace_forward(&self, trace: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = trace.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_fwd.process(&mut buf);
        let inv_n = 1.0 / self.nx as f64;
        buf.truncate(self.nkx());
        buf.iter_mut().for_each(|c| *c *= inv_n);
        buf
    }

    /// Wall trace from its Fourier coefficients.
    pub fn trace_inverse(&self, coef: &[Complex64]) -> Vec<f64> {
        let nx = self.nx;
        let mut buf = vec![Complex64::new(0.0, 0.0); nx];
        buf[0] = Complex64::new(coef[0].re, 0.0);
        for k in 1..nx / 2 {
            buf[k] = coef[k];
            buf[nx - k] = coef[k].conj();
        }
        buf[nx / 2] = Complex64::new(coef[nx / 2].re, 0.0);
        self.fft_inv.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Zeroes modes outside the 2/3-rule window in both directions.
    pub fn dealias(&self, spec: &mut Array2<Complex64>) {
        let zero = Complex64::new(0.0, 0.0);
        for ((k, n), v) in spec.indexed_iter_mut() {
            if k > self.kx_cut || n > self.cheb_cut {
                *v = zero;
            }
        }
    }

    /// Zeroes Fourier modes above the 2/3-rule cutoff only.
    pub fn truncate_x(&self, spec: &mut Array2<Complex64>) {
        let zero = Complex64::new(0.0, 0.0);
        for k in self.kx_cut + 1..self.nkx() {
            spec.row_mut(k).fill(zero);
        }
    }

    /// `x` derivative of spectral coefficients (Nyquist mode dropped).
    pub fn ddx_spec(&self, spec: &Array2<Complex64>) -> Array2<Complex64> {
        let mut out = spec.clone();
        let nk = self.nkx();
        for k in 0..nk {
            let factor = if k == nk - 1 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, self.wavenumber(k))
            };
            out.row_mut(k).mapv_inplace(|v| v * factor);
        }
        out
    }

    /// `y` derivative of spectral coefficients.
    pub fn ddy_spec(&self, spec: &Array2<Complex64>) -> Array2<Complex64> {
        let mut out = Array2::<Complex64>::zeros(spec.dim());
        for k in 0..self.nkx() {
            let row: Vec<Complex64> = spec.row(k).to_vec();
            let d = cheb::derivative(&row);
            for (n, v) in d.into_iter().enumerate() {
                out[[k, n]] = v;
            }
        }
        out
    }

    /// Solves `Laplacian psi = rhs` with `psi = 0` on both walls, in coefficient space.
    pub fn poisson_spec(&self, rhs: &Array2<Complex64>) -> Array2<Complex64> {
        let mut out = Array2::<Complex64>::zeros(rhs.dim());
        let zero = Complex64::new(0.0, 0.0);
        for k in 0..self.nkx() {
            let neg: Vec<Complex64> = rhs.row(k).iter().map(|v| -v).collect();
            let sol = self.poisson[k].solve(&neg, zero, zero);
            for (n, v) in sol.into_iter().enumerate() {
                out[[k, n]] = v;
            }
        }
        out
    }

    /// Domain integral with trapezoid in x and Clenshaw-Curtis in y.
    pub fn integrate(&self, values: &Array2<f64>) -> f64 {
        let dx = self.dx();
        let mut total = 0.0;
        for j in 0..self.ny {
            let mut line = 0.0;
            for i in 0..self.nx {
                line += values[[i, j]];
            }
            total += self.cc_weights[j] * line;
        }
        total * dx
    }

    /// Clenshaw-Curtis integral of a profile over `[-1, 1]`.
    pub fn integrate_y(&self, profile: &[f64]) -> f64 {
        self.cc_weights.iter().zip(profile).map(|(w, f)| w * f).sum()
    }

    /// Trapezoid integral of a wall trace over one period.
    pub fn integrate_x(&self, trace: &[f64]) -> f64 {
        trace.iter().sum::<f64>() * self.dx()
    }
}

/// Which representation of a [`Field2D`] is current.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rep {
    Physical,
    Spectral,
}

impl Rep {
    fn name(self) -> &'static str {
        match self {
            Rep::Physical => "physical",
            Rep::Spectral => "spectral",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToSpectral,
    ToPhysical,
}

#[derive(Debug, Clone)]
enum Data {
    Physical(Array2<f64>),
    Spectral(Array2<Complex64>),
}

/// Scalar field on a [`ChannelGrid`] in one representation at a time.
#[derive(Debug, Clone)]
pub struct Field2D {
    grid: Arc<ChannelGrid>,
    data: Data,
}

impl Field2D {
    pub fn from_values(grid: &Arc<ChannelGrid>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.nx, grid.ny) {
            return Err(Error::Input(format!(
                "physical array shape {:?} does not match grid ({}, {})",
                values.dim(),
                grid.nx,
                grid.ny
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            data: Data::Physical(values),
        })
    }

    pub fn from_spectral(grid: &Arc<ChannelGrid>, spec: Array2<Complex64>) -> Result<Self> {
        if spec.dim() != (grid.nkx(), grid.ny) {
            return Err(Error::Input(format!(
                "spectral array shape {:?} does not match grid ({}, {})",
                spec.dim(),
                grid.nkx(),
                grid.ny
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            data: Data::Spectral(spec),
        })
    }

    pub fn zeros(grid: &Arc<ChannelGrid>) -> Self {
        Self {
            grid: grid.clone(),
            data: Data::Physical(Array2::zeros((grid.nx, grid.ny))),
        }
    }

    /// Samples `f(x, y)` at the collocation nodes.
    pub fn from_fn(grid: &Arc<ChannelGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.nx, grid.ny), |(i, j)| f(grid.x[i], grid.y[j]));
        Self {
            grid: grid.clone(),
            data: Data::Physical(values),
        }
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        &self.grid
    }

    pub fn rep(&self) -> Rep {
        match self.data {
            Data::Physical(_) => Rep::Physical,
            Data::Spectral(_) => Rep::Spectral,
        }
    }

    pub fn values(&self) -> Result<&Array2<f64>> {
        match &self.data {
            Data::Physical(v) => Ok(v),
            Data::Spectral(_) => Err(mismatch(Rep::Physical, Rep::Spectral)),
        }
    }

    pub fn spectral(&self) -> Result<&Array2<Complex64>> {
        match &self.data {
            Data::Spectral(s) => Ok(s),
            Data::Physical(_) => Err(mismatch(Rep::Spectral, Rep::Physical)),
        }
    }

    pub fn into_values(self) -> Result<Array2<f64>> {
        match self.data {
            Data::Physical(v) => Ok(v),
            Data::Spectral(_) => Err(mismatch(Rep::Physical, Rep::Spectral)),
        }
    }

    pub fn into_spectral(self) -> Result<Array2<Complex64>> {
        match self.data {
            Data::Spectral(s) => Ok(s),
            Data::Physical(_) => Err(mismatch(Rep::Spectral, Rep::Physical)),
        }
    }

    /// Physical copy regardless of the current representation.
    pub fn physical(&self) -> Array2<f64> {
        match &self.data {
            Data::Physical(v) => v.clone(),
            Data::Spectral(s) => self.grid.inverse(s),
        }
    }

    /// Spectral copy regardless of the current representation.
    pub fn coefficients(&self) -> Array2<Complex64> {
        match &self.data {
            Data::Spectral(s) => s.clone(),
            Data::Physical(v) => self.grid.forward(v),
        }
    }

    /// Values along the top (`y = 1`) and bottom (`y = -1`) walls.
    pub fn wall_trace(&self) -> WallTrace {
        let v = self.physical();
        let ny = self.grid.ny;
        WallTrace {
            top: v.column(0).to_vec(),
            bottom: v.column(ny - 1).to_vec(),
        }
    }

    pub fn inf_norm(&self) -> f64 {
        self.physical().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn mismatch(expected: Rep, found: Rep) -> Error {
    Error::Representation {
        expected: expected.name(),
        found: found.name(),
    }
}

/// Converts between representations; the source must be in the representation
/// `direction` starts from.
pub fn transform(f: &Field2D, direction: Direction) -> Result<Field2D> {
    match (direction, &f.data) {
        (Direction::ToSpectral, Data::Physical(v)) => Ok(Field2D {
            grid: f.grid.clone(),
            data: Data::Spectral(f.grid.forward(v)),
        }),
        (Direction::ToPhysical, Data::Spectral(s)) => Ok(Field2D {
            grid: f.grid.clone(),
            data: Data::Physical(f.grid.inverse(s)),
        }),
        (Direction::ToSpectral, _) => Err(mismatch(Rep::Physical, Rep::Spectral)),
        (Direction::ToPhysical, _) => Err(mismatch(Rep::Spectral, Rep::Physical)),
    }
}

pub fn ddx(f: &Field2D) -> Result<Field2D> {
    let s = f.spectral()?;
    Field2D::from_spectral(&f.grid, f.grid.ddx_spec(s))
}

pub fn ddy(f: &Field2D) -> Result<Field2D> {
    let s = f.spectral()?;
    Field2D::from_spectral(&f.grid, f.grid.ddy_spec(s))
}

/// Streamfunction with `Laplacian psi = rhs` and `psi = 0` at `y = +-1`.
/// Accepts either representation and returns a spectral field.
pub fn solve_poisson_dirichlet(rhs: &Field2D) -> Result<Field2D> {
    let coef = rhs.coefficients();
    Field2D::from_spectral(&rhs.grid, rhs.grid.poisson_spec(&coef))
}

/// Velocity `(u, v) = (-psi_y, psi_x)` from vorticity; the mean flow is the
/// zero-flux one fixed by `psi = 0` on both walls. Returns spectral fields.
pub fn biot_savart(omega: &Field2D) -> Result<(Field2D, Field2D)> {
    let psi = solve_poisson_dirichlet(omega)?;
    let g = &omega.grid;
    let ps = psi.spectral()?;
    let u = g.ddy_spec(ps).mapv(|c| -c);
    let v = g.ddx_spec(ps);
    Ok((Field2D::from_spectral(g, u)?, Field2D::from_spectral(g, v)?))
}

/// Solves `(lambda + k^2 - d²/dy²) f = rhs` for a profile given at the
/// Gauss-Lobatto nodes, with `a f + b f' = c` rows at each wall.
pub fn solve_helmholtz_robin(
    grid: &ChannelGrid,
    rhs_mode: &[Complex64],
    k: f64,
    lambda: f64,
    robin_top: (Robin, Complex64),
    robin_bottom: (Robin, Complex64),
) -> Result<Vec<Complex64>> {
    if rhs_mode.len() != grid.ny {
        return Err(Error::Input(format!(
            "profile length {} does not match ny = {}",
            rhs_mode.len(),
            grid.ny
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::ParameterDomain(format!("lambda must be >= 0, got {lambda}")));
    }
    let op = HelmholtzOp::new(grid.ny, lambda + k * k, robin_top.0, robin_bottom.0)?;
    let mut coef = vec![Complex64::new(0.0, 0.0); grid.ny];
    grid.cheb_forward_complex(ArrayView1::from(rhs_mode), &mut coef);
    let sol = op.solve(&coef, robin_top.1, robin_bottom.1);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.ny];
    grid.cheb_inverse_complex(ArrayView1::from(&sol[..]), &mut out);
    Ok(out)
}

/// A scalar sampled along both walls, one value per streamwise node.
#[derive(Debug, Clone, PartialEq)]
pub struct WallTrace {
    pub top: Vec<f64>,
    pub bottom: Vec<f64>,
}

impl WallTrace {
    pub fn zeros(nx: usize) -> Self {
        Self {
            top: vec![0.0; nx],
            bottom: vec![0.0; nx],
        }
    }

    pub fn constant(nx: usize, value: f64) -> Self {
        Self {
            top: vec![value; nx],
            bottom: vec![value; nx],
        }
    }

    pub fn len(&self) -> usize {
        self.top.len()
    }

    pub fn is_empty(&self) -> bool {
        self.top.is_empty()
    }

    pub fn check_len(&self, nx: usize) -> Result<()> {
        if self.top.len() != nx || self.bottom.len() != nx {
            return Err(Error::Input(format!(
                "wall trace lengths ({}, {}) differ from nx = {nx}",
                self.top.len(),
                self.bottom.len()
            )));
        }
        Ok(())
    }

    /// Applies `f` node by node to both walls.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            top: self.top.iter().map(|&v| f(v)).collect(),
            bottom: self.bottom.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Combines two traces node by node.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            top: self.top.iter().zip(&other.top).map(|(&a, &b)| f(a, b)).collect(),
            bottom: self
                .bottom
                .iter()
                .zip(&other.bottom)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn inf_norm(&self) -> f64 {
        self.top
            .iter()
            .chain(&self.bottom)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
