//! The analytic-semigroup kernel `K(z, x) = F^{-1}(e^{-z xi^{2m}})(x)` and
//! fits of its stretched-exponential far field.
//!
//! For `m >= 2` the kernel oscillates, so fitting `-log|K|` directly mixes
//! the envelope with the zeros. The fit instead targets the saddle-point
//! envelope `E(x) = 2|W(x)|`, where
//!
//! ```text
//! W(x) = (2 pi)^{-1} [ int_0^inf e^{ixs - z s^{2m}} ds
//!                      - e^{i pi/m} int_0^inf e^{ix e^{i pi/m} r - z r^{2m}} dr ]
//! ```
//!
//! is the part of `(1/pi) int_0^inf e^{ixs - z s^{2m}} ds` carried by the
//! saddle between the real axis and the ray at angle `pi/m`. `K = 2 Re W` up
//! to the ray term, which is exactly zero for `m = 2`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::fit::{golden_min, least_squares};
use crate::grid::{Field1D, Grid1D, InverseFourier, Spectrum1D};
use crate::quad::GaussRule;
use crate::C64;

/// Symbol magnitude that counts as resolved at the lattice edge.
pub const RESOLUTION_FLOOR: f64 = 1e-14;
/// Kernel samples below this are round-off dominated and left out of fits.
pub const FIT_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupParams {
    m: u32,
    z: C64,
}

impl SemigroupParams {
    pub fn new(m: u32, z: C64) -> Result<Self> {
        if m == 0 {
            return Err(invalid!("m must be a positive integer"));
        }
        if !(z.re > 0.0 && z.re.is_finite() && z.im.is_finite()) {
            return Err(invalid!("semigroup needs Re z > 0, got z = {z}"));
        }
        Ok(SemigroupParams { m, z })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn z(&self) -> C64 {
        self.z
    }
}

/// The decay index `2m/(2m-1)`.
pub fn decay_exponent(m: u32) -> f64 {
    let k = 2.0 * m as f64;
    k / (k - 1.0)
}

/// Smallest admissible `n` for which `e^{-Re z xi_max^{2m}}` drops below the
/// resolution floor on a grid of the given half width.
pub fn required_n(params: &SemigroupParams, half_width: f64) -> usize {
    let need = (-RESOLUTION_FLOOR.ln() / params.z.re).powf(1.0 / (2.0 * params.m as f64));
    let mut n = 8usize;
    while PI * n as f64 / (2.0 * half_width) < need {
        n *= 2;
    }
    n
}

pub fn kernel(params: &SemigroupParams, grid: &Grid1D) -> Result<Field1D> {
    let two_m = 2 * params.m as i32;
    let edge = (-params.z.re * grid.xi_max().powi(two_m)).exp();
    if edge >= RESOLUTION_FLOOR {
        return Err(Error::UnderResolved(format!(
            "symbol is {edge:.3e} at the lattice edge; need n >= {}",
            required_n(params, grid.half_width())
        )));
    }
    let z = params.z;
    let spec: Vec<C64> = grid.freqs().iter().map(|xi| (-z * xi.powi(two_m)).exp()).collect();
    Ok(Spectrum1D::new(*grid, spec)?.dft_inverse())
}

/// `u(t) = K(1 + it, .)`, the free evolution of `K(1, .)`.
pub fn sharpness_solution(t: f64, m: u32, grid: &Grid1D) -> Result<Field1D> {
    if !t.is_finite() {
        return Err(invalid!("t must be finite"));
    }
    kernel(&SemigroupParams::new(m, C64::new(1.0, t))?, grid)
}

/// Closed form for `m = 1`: `(4 pi z)^{-1/2} e^{-x^2/(4z)}`.
pub fn gaussian_kernel(z: C64, x: f64) -> C64 {
    (-(x * x) / (4.0 * z)).exp() / (4.0 * PI * z).sqrt()
}

/// Saddle-point envelope of `|K(z, x)|` for `x > 0`. For `m = 1` this is the
/// exact modulus.
pub fn kernel_envelope(params: &SemigroupParams, x: f64) -> f64 {
    let m = params.m;
    if m == 1 {
        return gaussian_kernel(params.z, x).norm();
    }
    2.0 * saddle_part(params, x.abs(), 1).norm()
}

// W(x) on a composite Gauss-Legendre rule; `refine` multiplies the panel count
fn saddle_part(params: &SemigroupParams, x: f64, refine: usize) -> C64 {
    let (m, z) = (params.m as i32, params.z);
    let two_m = 2 * m;
    let reach = 1.2 * (40.0 / z.re).powf(1.0 / two_m as f64);
    let rate = x + two_m as f64 * z.norm() * reach.powi(two_m - 1);
    let panels = refine * (16 + (rate * reach / PI).ceil() as usize);
    let rot = C64::from_polar(1.0, PI / m as f64);
    let rule = GaussRule::new(16);
    let i = C64::i();
    let integral = rule.integrate_complex(0.0, reach, panels, |s| {
        let p = s.powi(two_m);
        (i * x * s - z * p).exp() - rot * (i * x * rot * s - z * p).exp()
    });
    integral / (2.0 * PI)
}

/// Basis used by [`fit_decay`] for `-log E` at a trial exponent `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// `c x^p + const + beta log x + d x^{-p}`; absorbs the algebraic
    /// prefactor and the first correction of the saddle expansion.
    Corrected,
    /// `c x^p + const` only.
    Plain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Fitted `p` in `|K| ~ C e^{-c x^p}`.
    pub exponent: f64,
    /// Fitted `c`.
    pub coefficient: f64,
    /// Effective `C`: geometric mean of `E(x) e^{c x^p}` over the window.
    pub prefactor: f64,
    /// Coefficient of `log x` in `-log E` (zero for the plain model).
    pub algebraic_power: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
    /// `r_squared < 0.99`; returned rather than raised.
    pub low_confidence: bool,
    /// `max |K| / E` over the window; close to 1 when the envelope is tight.
    pub envelope_consistency: f64,
    /// Sign changes of `Re K` inside the window (oscillation zeros).
    pub zeros: Vec<f64>,
}

const MAX_FIT_SAMPLES: usize = 200;

/// Fits the far-field decay of the kernel over `window` on the positive axis.
///
/// `k` is the sampled kernel for `params` (from [`kernel`]); for `m = 1` it is
/// fitted directly, for `m >= 2` it only supplies the consistency ratio and the
/// zero locations while the envelope carries the fit.
pub fn fit_decay(
    params: &SemigroupParams,
    k: &Field1D,
    window: (f64, f64),
    model: FitModel,
) -> Result<DecayFit> {
    let g = k.grid();
    let (lo, hi) = window;
    if !(lo > 0.0 && lo < hi && hi < g.half_width()) {
        return Err(invalid!(
            "window ({lo}, {hi}) must satisfy 0 < lo < hi < half_width = {}",
            g.half_width()
        ));
    }
    let inside: Vec<usize> = (0..g.n()).filter(|&j| g.x(j) >= lo && g.x(j) <= hi).collect();
    let zeros = sign_changes(k, &inside);

    let stride = inside.len().div_ceil(MAX_FIT_SAMPLES).max(1);
    let mut xs = Vec::new();
    let mut env = Vec::new();
    let mut ratio = 0.0f64;
    for &j in inside.iter().step_by(stride) {
        let x = g.x(j);
        let kv = k.samples()[j].norm();
        let e = if params.m == 1 { kv } else { kernel_envelope(params, x) };
        if params.m == 1 && kv <= 1e-300 {
            return Err(Error::FitFailure(format!("kernel vanishes at x = {x}")));
        }
        if e < FIT_FLOOR {
            continue;
        }
        ratio = ratio.max(kv / e);
        xs.push(x);
        env.push(e);
    }
    if xs.len() < 8 {
        return Err(Error::FitFailure(format!(
            "only {} usable samples in window ({lo}, {hi}); widen it or refine the grid",
            xs.len()
        )));
    }
    let y = DVector::from_iterator(xs.len(), env.iter().map(|e| -e.ln()));

    let design = |p: f64| {
        let cols = match model {
            FitModel::Corrected => 4,
            FitModel::Plain => 2,
        };
        DMatrix::from_fn(xs.len(), cols, |i, c| match c {
            0 => xs[i].powf(p),
            1 => 1.0,
            2 => xs[i].ln(),
            _ => xs[i].powf(-p),
        })
    };
    let ssr = |p: f64| least_squares(&design(p), &y).map(|r| r.1).unwrap_or(f64::INFINITY);

    // variable projection: profile out the linear coefficients, scan p, polish
    let (p_lo, p_hi, steps) = (0.8, 2.5, 1700usize);
    let h = (p_hi - p_lo) / steps as f64;
    let mut best = (f64::INFINITY, p_lo);
    for s in 0..=steps {
        let p = p_lo + s as f64 * h;
        let r = ssr(p);
        if r < best.0 {
            best = (r, p);
        }
    }
    let p = golden_min((best.1 - h).max(p_lo), (best.1 + h).min(p_hi), 1e-12, ssr);
    let a = design(p);
    let (coef, res) = least_squares(&a, &y)?;
    let c = coef[0];
    if !(c > 0.0) {
        return Err(Error::FitFailure(format!("fitted coefficient {c} is not a decay rate")));
    }
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { (1.0 - res / sst).clamp(0.0, 1.0) } else { 1.0 };
    let log_c: f64 =
        xs.iter().zip(&env).map(|(x, e)| e.ln() + c * x.powf(p)).sum::<f64>() / xs.len() as f64;
    Ok(DecayFit {
        exponent: p,
        coefficient: c,
        prefactor: log_c.exp(),
        algebraic_power: if model == FitModel::Corrected { coef[2] } else { 0.0 },
        r_squared,
        window,
        samples: xs.len(),
        low_confidence: r_squared < 0.99,
        envelope_consistency: if params.m == 1 { 1.0 } else { ratio },
        zeros,
    })
}

fn sign_changes(k: &Field1D, idx: &[usize]) -> Vec<f64> {
    let g = k.grid();
    let s = k.samples();
    idx.windows(2)
        .filter_map(|w| {
            let (a, b) = (s[w[0]].re, s[w[1]].re);
            if a * b < 0.0 {
                let (xa, xb) = (g.x(w[0]), g.x(w[1]));
                Some(xa + (xb - xa) * a / (a - b))
            } else {
                None
            }
        })
        .collect()
}
