//! Decay of `int e^{-isP(xi) + ix xi} dxi` in `s`, and of the free propagator
//! `e^{-isP(D_x)}` from `L^p` to `L^p'`.

use std::f64::consts::PI;

use super::pq_split;
use crate::error::{invalid, Error, Result};
use crate::fit::{linear_regression, LineFit};
use crate::grid::{lp_norm, Field1D, Grid1D};
use crate::quad::GaussRule;
use crate::C64;

const START_PANELS: usize = 64;
const MAX_PANELS: usize = 1 << 15;
const SETTLED: f64 = 1e-10;
const ACCEPTABLE: f64 = 1e-2;

/// `I(s) = int_R e^{-isP(xi) + ix xi} dxi` for the `P` of [`pq_split`].
///
/// The real line is deformed into `[-L, L]` plus two rays leaving `+-L` at
/// angles `-pi/4m` and `pi - pi/4m`, along which `e^{-isP}` decays like
/// `e^{-s r^{2m}}`. `L = 3 + |x/s|^{1/(2m-1)}` clears the stationary points.
/// Panels double until the value settles; a last doubling that still moves it
/// by more than 1% is a non-convergence error.
pub fn vdc_integral(m: u32, x: f64, s: f64) -> Result<C64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid!("s must be positive, got {s}"));
    }
    if !x.is_finite() {
        return Err(invalid!("x must be finite"));
    }
    let params = pq_split(m, 0.0)?;
    let g = |z: C64| (C64::new(0.0, -s) * params.p_at(z) + C64::new(0.0, x) * z).exp();
    let lam = 3.0 + (x / s).abs().powf(1.0 / (2 * m - 1) as f64);
    let reach = (60.0 / s).powf(0.5 / m as f64) + lam;
    let theta = PI / (4 * m) as f64;
    let right = C64::from_polar(1.0, -theta);
    let left = C64::from_polar(1.0, PI - theta);
    let rule = GaussRule::new(16);
    let eval = |panels: usize| {
        let seg = rule.integrate_complex(-lam, lam, panels, |u| g(C64::new(u, 0.0)));
        let r = rule.integrate_complex(0.0, reach, panels, |u| g(lam + right * u)) * right;
        let l = rule.integrate_complex(0.0, reach, panels, |u| g(-lam + left * u)) * left;
        seg + r - l
    };
    let mut panels = START_PANELS;
    let mut prev = eval(panels);
    loop {
        panels *= 2;
        let next = eval(panels);
        let change = (next - prev).norm() / next.norm();
        if change <= SETTLED || (panels >= MAX_PANELS && change <= ACCEPTABLE) {
            return Ok(next);
        }
        if panels >= MAX_PANELS || !change.is_finite() {
            return Err(Error::NonConvergence(format!(
                "oscillatory integral at m={m}, x={x}, s={s} still moves by {change:.2e} at {panels} panels"
            )));
        }
        prev = next;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VdcReport {
    pub s: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Fit of `log |I|` against `log s`.
    pub fit: LineFit,
}

/// `|I(s)|` over `s_list` (positive, spanning at least two decades) with its
/// log-log slope; the bound predicts `-1/2m` where the top-order term of `P`
/// dominates, that is for small `s`.
pub fn vdc_decay(m: u32, x: f64, s_list: &[f64]) -> Result<VdcReport> {
    check_sweep(s_list)?;
    let magnitudes = s_list.iter().map(|&s| vdc_integral(m, x, s).map(|v| v.norm())).collect::<Result<Vec<_>>>()?;
    let fit = loglog(s_list, &magnitudes)?;
    Ok(VdcReport { s: s_list.to_vec(), magnitudes, fit })
}

fn check_sweep(s_list: &[f64]) -> Result<()> {
    if s_list.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(invalid!("s values must be positive and finite"));
    }
    let (lo, hi) = s_list.iter().fold((f64::INFINITY, 0.0f64), |(l, h), s| (l.min(*s), h.max(*s)));
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(invalid!("s values must span at least two decades, got [{lo}, {hi}]"));
    }
    Ok(())
}

fn loglog(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linear_regression(&lx, &ly)
}

/// `-(1/2m)(1/p - 1/p')` for the Lebesgue pair `p = (4m+2)/(4m+1)`, `p' = 4m+2`.
pub fn predicted_dispersive_slope(m: u32) -> f64 {
    let (p, pp) = ((4 * m + 2) as f64 / (4 * m + 1) as f64, (4 * m + 2) as f64);
    -(1.0 / p - 1.0 / pp) / (2 * m) as f64
}

/// `max_f |e^{-isP(D)} f|_{p'} / |f|_p` over the ensemble.
pub fn dispersive_norm(s: f64, m: u32, ensemble: &[Field1D]) -> Result<f64> {
    if s == 0.0 || !s.is_finite() {
        return Err(invalid!("s must be nonzero and finite, got {s}"));
    }
    if ensemble.is_empty() {
        return Err(invalid!("ensemble is empty"));
    }
    let params = pq_split(m, 0.0)?;
    let mut best = 0.0f64;
    for f in ensemble {
        let den = lp_norm(f, params.p_leb)?;
        if den == 0.0 {
            return Err(invalid!("ensemble contains the zero field"));
        }
        let u = f.apply_symbol(|xi| C64::from_polar(1.0, -s * params.p(xi)));
        best = best.max(lp_norm(&u, params.pprime_leb)? / den);
    }
    Ok(best)
}

/// Gaussians of widths 0.5, 1, 2 and chirps `e^{-X^2/8} e^{i r X^2}`,
/// `r = 0.5, 1`, in `X = x / |s|^{1/2m}`, on `|x| < 40 |s|^{1/2m}`. At the
/// scale where `xi^{2m}` dominates `P` the ratios are then independent of
/// `s` up to the predicted power.
pub fn dispersive_ensemble(m: u32, s: f64, n: usize) -> Result<Vec<Field1D>> {
    let scale = s.abs().powf(0.5 / m as f64);
    let g = Grid1D::new(40.0 * scale, n)?;
    let mut out = Vec::new();
    for w in [0.5, 1.0, 2.0] {
        out.push(Field1D::from_real_fn(g, |x| (-(x / scale).powi(2) / (2.0 * w * w)).exp())?);
    }
    for r in [0.5, 1.0] {
        out.push(Field1D::from_fn(g, |x| {
            let xx = x / scale;
            C64::from_polar((-xx * xx / 8.0).exp(), r * xx * xx)
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersiveReport {
    pub s: Vec<f64>,
    pub ratios: Vec<f64>,
    pub fit: LineFit,
    pub predicted: f64,
}

impl DispersiveReport {
    /// `|slope - predicted| / |predicted|`.
    pub fn relative_error(&self) -> f64 {
        (self.fit.slope - self.predicted).abs() / self.predicted.abs()
    }
}

/// [`dispersive_norm`] over `s_list`, each `s` with its own scaled ensemble.
pub fn dispersive_decay(m: u32, s_list: &[f64], n: usize) -> Result<DispersiveReport> {
    check_sweep(s_list)?;
    let ratios = s_list
        .iter()
        .map(|&s| dispersive_norm(s, m, &dispersive_ensemble(m, s, n)?))
        .collect::<Result<Vec<_>>>()?;
    let fit = loglog(s_list, &ratios)?;
    Ok(DispersiveReport { s: s_list.to_vec(), ratios, fit, predicted: predicted_dispersive_slope(m) })
}
