//! Uniform periodic grids, sampled fields, and an FFT normalized so that
//! discrete transforms approximate the continuum integrals
//! `F(xi) = int e^{-ix xi} f(x) dx` and `f(x) = (2 pi)^{-1} int e^{ix xi} F(xi) dxi`.
//!
//! Points are `x_j = -L + j dx` with `dx = 2L/n`; frequencies are exposed in
//! centered order `xi_k = (k - n/2) pi / L`. Two-dimensional fields are
//! stored row-major with time as the first (slow) axis.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{invalid, Result};
use crate::C64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction))
}

// (-1)^k for possibly negative k
#[inline]
fn parity(k: isize) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    half_width: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(invalid!("half_width must be positive and finite, got {half_width}"));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(invalid!("n must be a power of two >= 8, got {n}"));
        }
        Ok(Grid1D { half_width, n })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    /// Largest |xi| on the lattice, `pi / dx`.
    pub fn xi_max(&self) -> f64 {
        PI / self.dx()
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn xi(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.dxi()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.xi(k)).collect()
    }

    /// Index of the grid point nearest to `x`, clamped into the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let j = ((x + self.half_width) / self.dx()).round();
        j.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    t: Grid1D,
    x: Grid1D,
}

impl Grid2D {
    pub fn new(t: Grid1D, x: Grid1D) -> Self {
        Grid2D { t, x }
    }

    pub fn t_axis(&self) -> &Grid1D {
        &self.t
    }

    pub fn x_axis(&self) -> &Grid1D {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.t.n * self.x.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_measure(&self) -> f64 {
        self.t.dx() * self.x.dx()
    }
}

pub trait GridShape {
    fn point_count(&self) -> usize;
}

impl GridShape for Grid1D {
    fn point_count(&self) -> usize {
        self.n
    }
}

impl GridShape for Grid2D {
    fn point_count(&self) -> usize {
        self.len()
    }
}

/// Anything carrying samples together with the measure of one cell, so that
/// sums approximate integrals.
pub trait Sampled {
    fn values(&self) -> &[C64];
    fn cell_measure(&self) -> f64;
}

fn check_finite(samples: &[C64]) -> Result<()> {
    match samples.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        Some(j) => Err(invalid!("non-finite sample at index {j}")),
        None => Ok(()),
    }
}

macro_rules! sampled_type {
    ($name:ident, $grid:ty, $measure:expr, $what:literal) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            grid: $grid,
            samples: Vec<C64>,
        }

        impl $name {
            pub fn new(grid: $grid, samples: Vec<C64>) -> Result<Self> {
                let expected = grid.point_count();
                if samples.len() != expected {
                    return Err(invalid!(
                        concat!($what, " needs {} samples, got {}"),
                        expected,
                        samples.len()
                    ));
                }
                check_finite(&samples)?;
                Ok($name { grid, samples })
            }

            pub fn zeros(grid: $grid) -> Self {
                let len = grid.point_count();
                $name { grid, samples: vec![C64::new(0.0, 0.0); len] }
            }

            pub(crate) fn from_raw(grid: $grid, samples: Vec<C64>) -> Self {
                debug_assert_eq!(samples.len(), grid.point_count());
                $name { grid, samples }
            }

            pub fn grid(&self) -> &$grid {
                &self.grid
            }

            pub fn samples(&self) -> &[C64] {
                &self.samples
            }

            pub fn into_samples(self) -> Vec<C64> {
                self.samples
            }

            pub fn max_abs(&self) -> f64 {
                self.samples.iter().fold(0.0, |m, v| m.max(v.norm()))
            }

            pub fn scaled(&self, c: C64) -> Self {
                $name::from_raw(self.grid, self.samples.iter().map(|v| v * c).collect())
            }
        }

        impl Sampled for $name {
            fn values(&self) -> &[C64] {
                &self.samples
            }
            fn cell_measure(&self) -> f64 {
                let g = &self.grid;
                $measure(g)
            }
        }
    };
}

sampled_type!(Field1D, Grid1D, |g: &Grid1D| g.dx(), "Field1D");
sampled_type!(Spectrum1D, Grid1D, |g: &Grid1D| g.dxi(), "Spectrum1D");
sampled_type!(Field2D, Grid2D, |g: &Grid2D| g.cell_measure(), "Field2D");
sampled_type!(
    Spectrum2D,
    Grid2D,
    |g: &Grid2D| g.t_axis().dxi() * g.x_axis().dxi(),
    "Spectrum2D"
);

impl Field1D {
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> C64) -> Result<Self> {
        Field1D::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn from_real_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Field1D::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    /// Applies the Fourier multiplier `symbol(xi)`, i.e. `symbol(D)` with
    /// `D = -i d/dx`.
    pub fn apply_symbol(&self, symbol: impl Fn(f64) -> C64) -> Field1D {
        let g = self.grid;
        let sym: Vec<C64> = (0..g.n).map(|k| symbol(g.xi(k))).collect();
        self.apply_multiplier(&sym)
    }

    /// Like [`Field1D::apply_symbol`] with the symbol already sampled in
    /// centered frequency order.
    pub fn apply_multiplier(&self, symbol: &[C64]) -> Field1D {
        assert_eq!(symbol.len(), self.grid.n, "symbol length mismatch");
        let n = self.grid.n;
        let mut buf: Vec<C64> =
            self.samples.iter().enumerate().map(|(j, v)| v * parity(j as isize)).collect();
        plan(n, FftDirection::Forward).process(&mut buf);
        for (b, s) in buf.iter_mut().zip(symbol) {
            *b *= s;
        }
        plan(n, FftDirection::Inverse).process(&mut buf);
        let scale = 1.0 / n as f64;
        for (j, b) in buf.iter_mut().enumerate() {
            *b *= parity(j as isize) * scale;
        }
        Field1D::from_raw(self.grid, buf)
    }

    /// `D^k u` with `D = -i d/dx`.
    pub fn derivative(&self, k: u32) -> Field1D {
        self.apply_symbol(|xi| C64::new(xi.powi(k as i32), 0.0))
    }

    pub fn map(&self, f: impl Fn(f64, C64) -> C64) -> Result<Field1D> {
        let g = self.grid;
        Field1D::new(g, self.samples.iter().enumerate().map(|(j, v)| f(g.x(j), *v)).collect())
    }
}

impl Field2D {
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> C64) -> Result<Self> {
        let (gt, gx) = (grid.t, grid.x);
        let mut samples = Vec::with_capacity(grid.len());
        for i in 0..gt.n {
            let t = gt.x(i);
            samples.extend((0..gx.n).map(|j| f(t, gx.x(j))));
        }
        Field2D::new(grid, samples)
    }

    pub fn at(&self, it: usize, jx: usize) -> C64 {
        self.samples[it * self.grid.x.n + jx]
    }

    pub fn row(&self, it: usize) -> &[C64] {
        let nx = self.grid.x.n;
        &self.samples[it * nx..(it + 1) * nx]
    }

    /// Applies the multiplier `symbol(tau, xi)` on the (t, x) frequency lattice.
    pub fn apply_symbol(&self, symbol: impl Fn(f64, f64) -> C64) -> Field2D {
        let (gt, gx) = (self.grid.t, self.grid.x);
        let mut buf = self.samples.clone();
        fft2_shifted(&mut buf, gt.n, gx.n, FftDirection::Forward);
        for i in 0..gt.n {
            let tau = gt.xi(i);
            for j in 0..gx.n {
                buf[i * gx.n + j] *= symbol(tau, gx.xi(j));
            }
        }
        fft2_shifted(&mut buf, gt.n, gx.n, FftDirection::Inverse);
        let scale = 1.0 / (gt.n * gx.n) as f64;
        buf.iter_mut().for_each(|b| *b *= scale);
        Field2D::from_raw(self.grid, buf)
    }

    pub fn map(&self, f: impl Fn(f64, f64, C64) -> C64) -> Result<Field2D> {
        let (gt, gx) = (self.grid.t, self.grid.x);
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(idx, v)| f(gt.x(idx / gx.n), gx.x(idx % gx.n), *v))
            .collect();
        Field2D::new(self.grid, samples)
    }
}

// Unnormalized 2-D FFT with the (-1)^(i+j) centering applied on both sides, so
// input and output are both in centered order. Rows are contiguous; columns are
// handled through a transpose.
fn fft2_shifted(buf: &mut [C64], nt: usize, nx: usize, direction: FftDirection) {
    for i in 0..nt {
        for j in 0..nx {
            buf[i * nx + j] *= parity((i + j) as isize);
        }
    }
    plan(nx, direction).process(buf);
    let mut tr = vec![C64::new(0.0, 0.0); nt * nx];
    for i in 0..nt {
        for j in 0..nx {
            tr[j * nt + i] = buf[i * nx + j];
        }
    }
    plan(nt, direction).process(&mut tr);
    for i in 0..nt {
        for j in 0..nx {
            buf[i * nx + j] = tr[j * nt + i] * parity((i + j) as isize);
        }
    }
}

/// Continuum-normalized forward transform.
pub trait Fourier {
    type Spectrum;
    fn dft_forward(&self) -> Self::Spectrum;
}

/// Continuum-normalized inverse transform, `(2 pi)^{-1}` per dimension.
pub trait InverseFourier {
    type Field;
    fn dft_inverse(&self) -> Self::Field;
}

impl Fourier for Field1D {
    type Spectrum = Spectrum1D;
    fn dft_forward(&self) -> Spectrum1D {
        let g = self.grid;
        let half = (g.n / 2) as isize;
        let mut buf: Vec<C64> =
            self.samples.iter().enumerate().map(|(j, v)| v * parity(j as isize)).collect();
        plan(g.n, FftDirection::Forward).process(&mut buf);
        let dx = g.dx();
        for (k, b) in buf.iter_mut().enumerate() {
            *b *= dx * parity(k as isize - half);
        }
        Spectrum1D::from_raw(g, buf)
    }
}

impl InverseFourier for Spectrum1D {
    type Field = Field1D;
    fn dft_inverse(&self) -> Field1D {
        let g = self.grid;
        let half = (g.n / 2) as isize;
        let mut buf: Vec<C64> = self
            .samples
            .iter()
            .enumerate()
            .map(|(k, v)| v * parity(k as isize - half))
            .collect();
        plan(g.n, FftDirection::Inverse).process(&mut buf);
        let scale = 1.0 / (g.n as f64 * g.dx());
        for (j, b) in buf.iter_mut().enumerate() {
            *b *= scale * parity(j as isize);
        }
        Field1D::from_raw(g, buf)
    }
}

impl Fourier for Field2D {
    type Spectrum = Spectrum2D;
    fn dft_forward(&self) -> Spectrum2D {
        let (gt, gx) = (self.grid.t, self.grid.x);
        let mut buf = self.samples.clone();
        fft2_shifted(&mut buf, gt.n, gx.n, FftDirection::Forward);
        // output parity correction relative to (-1)^(i+j): (-1)^(nt/2 + nx/2)
        let fix = parity((gt.n / 2 + gx.n / 2) as isize) * gt.dx() * gx.dx();
        buf.iter_mut().for_each(|b| *b *= fix);
        Spectrum2D::from_raw(self.grid, buf)
    }
}

impl InverseFourier for Spectrum2D {
    type Field = Field2D;
    fn dft_inverse(&self) -> Field2D {
        let (gt, gx) = (self.grid.t, self.grid.x);
        let mut buf = self.samples.clone();
        fft2_shifted(&mut buf, gt.n, gx.n, FftDirection::Inverse);
        let fix = parity((gt.n / 2 + gx.n / 2) as isize)
            / ((gt.n as f64 * gt.dx()) * (gx.n as f64 * gx.dx()));
        buf.iter_mut().for_each(|b| *b *= fix);
        Field2D::from_raw(self.grid, buf)
    }
}

pub fn dft_forward<F: Fourier>(f: &F) -> F::Spectrum {
    f.dft_forward()
}

pub fn dft_inverse<S: InverseFourier>(s: &S) -> S::Field {
    s.dft_inverse()
}

/// The standard smooth bump `e^{-1/(1-s^2)}` on `|s| < 1`, zero outside.
pub fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// `(sum |f_j|^p cell)^{1/p}`, or the max modulus for `p = inf`.
pub fn lp_norm<S: Sampled + ?Sized>(f: &S, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(invalid!("lp_norm needs p >= 1, got {p}"));
    }
    let vals = f.values();
    if p.is_infinite() {
        return Ok(vals.iter().fold(0.0, |m, v| m.max(v.norm())));
    }
    // scale by the max to keep large p from overflowing
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if top == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = vals.iter().map(|v| (v.norm() / top).powf(p)).sum();
    Ok(top * (s * f.cell_measure()).powf(1.0 / p))
}
