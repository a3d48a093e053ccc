//! Empirical `L^p -> L^p'` ratios of `M_b` and of the frozen resolvent
//! `1/(tau + P(xi) + z)` on two-dimensional grids.
//!
//! Ratios are maxima over a test ensemble, so they are lower bounds for the
//! operator norms. Uniformity in `b` is probed on boxes scaled with the
//! multiplier: at `|b| = s >> 1` the symbol lives at `tau ~ s`,
//! `xi ~ s^{1/2m}`, and the ensemble is laid out in the matching normalized
//! coordinates `T = s t`, `X = s^{1/2m} x`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{pq_split, Cutoff, MultiplierParams};
use crate::error::{invalid, Error, Result};
use crate::grid::{bump, lp_norm, Field2D, Grid1D, Grid2D};
use crate::C64;

/// Smallest `|denominator|` tolerated on the grid; keeps multiplier values
/// below `1e8`.
pub const SINGULAR_GUARD: f64 = 1e-8;

fn apply_inverse(f: &Field2D, cutoff: Option<&Cutoff>, den: impl Fn(f64, f64) -> C64) -> Result<Field2D> {
    let g = f.grid();
    let (gt, gx) = (g.t_axis(), g.x_axis());
    for i in 0..gt.n() {
        let tau = gt.xi(i);
        for j in 0..gx.n() {
            let xi = gx.xi(j);
            if cutoff.is_some_and(|c| !c.contains(xi)) {
                continue;
            }
            let d = den(tau, xi);
            if !(d.norm() >= SINGULAR_GUARD) {
                return Err(Error::Singular(format!(
                    "|denominator| = {:.3e} at (tau, xi) = ({tau}, {xi})",
                    d.norm()
                )));
            }
        }
    }
    Ok(f.apply_symbol(|tau, xi| match cutoff {
        Some(c) if !c.contains(xi) => C64::new(0.0, 0.0),
        _ => den(tau, xi).inv(),
    }))
}

/// `F^{-1}[chi(xi) M_b f^]`, with `chi` the optional cutoff in `xi`.
pub fn apply_mb(f: &Field2D, params: &MultiplierParams, cutoff: Option<&Cutoff>) -> Result<Field2D> {
    apply_inverse(f, cutoff, |tau, xi| params.denominator(tau, xi))
}

fn ensemble_ratio(
    ensemble: &[Field2D],
    cutoff: Option<&Cutoff>,
    p: f64,
    pp: f64,
    apply: impl Fn(&Field2D) -> Result<Field2D>,
) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(invalid!("ensemble is empty"));
    }
    let mut best: Option<f64> = None;
    for f in ensemble {
        let input = match cutoff {
            Some(c) => f.apply_symbol(|_, xi| C64::new(c.indicator(xi), 0.0)),
            None => f.clone(),
        };
        let den = lp_norm(&input, p)?;
        if den == 0.0 {
            continue;
        }
        let r = lp_norm(&apply(&input)?, pp)? / den;
        best = Some(best.map_or(r, |b| b.max(r)));
    }
    best.ok_or_else(|| invalid!("every ensemble member vanishes (under the cutoff)"))
}

/// `max_f |M_b f|_{p'} / |f|_p`, with `f` replaced by `chi(D_x) f` when a
/// cutoff is given. Members the cutoff annihilates are skipped.
pub fn empirical_pq_norm(params: &MultiplierParams, ensemble: &[Field2D], cutoff: Option<&Cutoff>) -> Result<f64> {
    ensemble_ratio(ensemble, cutoff, params.p_leb, params.pprime_leb, |f| apply_mb(f, params, None))
}

/// The same ratio for `1/(tau + P(xi) + z)`, `Im z != 0`.
pub fn frozen_resolvent_norm(m: u32, z: C64, ensemble: &[Field2D]) -> Result<f64> {
    if !(z.im != 0.0 && z.is_finite()) {
        return Err(invalid!("the frozen resolvent needs Im z != 0, got {z}"));
    }
    let params = pq_split(m, 0.0)?;
    ensemble_ratio(ensemble, None, params.p_leb, params.pprime_leb, |f| {
        apply_inverse(f, None, |tau, xi| C64::new(tau + params.p(xi), 0.0) + z)
    })
}

/// Box of half-widths `20/s` in `t` and `20/s^{1/2m}` in `x`, `s >= 1` meaning
/// the multiplier scale.
pub fn uniformity_grid(m: u32, s: f64, n: usize) -> Result<Grid2D> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid!("box scale must be positive, got {s}"));
    }
    Ok(Grid2D::new(Grid1D::new(20.0 / s, n)?, Grid1D::new(20.0 / s.powf(0.5 / m as f64), n)?))
}

/// The fixed eight-member ensemble in normalized coordinates
/// `T = st t`, `X = sx x`: Gaussians of widths 1, 2, 4, chirps
/// `e^{-(T^2+X^2)/8} e^{i r X^2}` at `r = 0.5, 1`, and radial bumps of radius 6
/// modulated by `cos(k X)`, `k = 1, 2, 4`. All members except the chirps are
/// real and even in time.
pub fn standard_ensemble(grid: Grid2D, st: f64, sx: f64) -> Result<Vec<Field2D>> {
    let mut out = Vec::with_capacity(8);
    for w in [1.0, 2.0, 4.0] {
        out.push(Field2D::from_fn(grid, |t, x| {
            let (tt, xx) = (st * t, sx * x);
            C64::new((-(tt * tt + xx * xx) / (2.0 * w * w)).exp(), 0.0)
        })?);
    }
    for r in [0.5, 1.0] {
        out.push(Field2D::from_fn(grid, |t, x| {
            let (tt, xx) = (st * t, sx * x);
            C64::from_polar((-(tt * tt + xx * xx) / 8.0).exp(), r * xx * xx)
        })?);
    }
    for k in [1.0, 2.0, 4.0] {
        out.push(Field2D::from_fn(grid, |t, x| {
            let (tt, xx) = (st * t, sx * x);
            C64::new(bump((tt * tt + xx * xx).sqrt() / 6.0) * (k * xx).cos(), 0.0)
        })?);
    }
    Ok(out)
}

/// `count` modulated Gaussian packets with seeded random centres in
/// `[-4, 4]^2`, widths in `[1, 3]` and `x`-frequencies in `[-2, 2]`, in the
/// same normalized coordinates as [`standard_ensemble`].
pub fn random_packets(grid: Grid2D, st: f64, sx: f64, count: usize, seed: u64) -> Result<Vec<Field2D>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (t0, x0): (f64, f64) = (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let w: f64 = rng.gen_range(1.0..3.0);
            let k: f64 = rng.gen_range(-2.0..2.0);
            Field2D::from_fn(grid, |t, x| {
                let (tt, xx) = (st * t - t0, sx * x - x0);
                C64::from_polar((-(tt * tt + xx * xx) / (2.0 * w * w)).exp(), k * xx)
            })
        })
        .collect()
}

/// `b_j = (-1)^j 10^{-3 + j/2}`, `j = 0..12`: thirteen log-spaced values of
/// alternating sign covering `[1e-3, 1e3]`.
pub fn b_sweep() -> Vec<f64> {
    (0..13).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } * 10f64.powf(-3.0 + 0.5 * j as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityReport {
    /// The swept parameter (`b`, or `Im z` for the resolvent).
    pub values: Vec<f64>,
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max / min`.
    pub spread: f64,
}

impl UniformityReport {
    fn new(values: Vec<f64>, ratios: Vec<f64>) -> Self {
        let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        UniformityReport { values, ratios, min_ratio, max_ratio, spread: max_ratio / min_ratio }
    }
}

/// Extra seeded members appended to the standard ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExtraMembers {
    pub count: usize,
    pub seed: u64,
}

fn scaled_ensemble(m: u32, s: f64, n: usize, extra: ExtraMembers) -> Result<Vec<Field2D>> {
    let g = uniformity_grid(m, s, n)?;
    let sx = s.powf(0.5 / m as f64);
    let mut e = standard_ensemble(g, s, sx)?;
    e.extend(random_packets(g, s, sx, extra.count, extra.seed)?);
    Ok(e)
}

/// `empirical_pq_norm` of the full multiplier for each `b`, each on the box
/// scaled by `max(1, |b|)`.
pub fn multiplier_uniformity(m: u32, bs: &[f64], n: usize, extra: ExtraMembers) -> Result<UniformityReport> {
    if bs.is_empty() {
        return Err(invalid!("b list is empty"));
    }
    let ratios = bs
        .iter()
        .map(|&b| {
            let params = pq_split(m, b)?;
            empirical_pq_norm(&params, &scaled_ensemble(m, b.abs().max(1.0), n, extra)?, None)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UniformityReport::new(bs.to_vec(), ratios))
}

/// The frozen resolvent at `z = -P(0) + i beta` for each `beta`, on boxes
/// scaled by `|beta|`. Shifting `Re z` by `-P(0)` centres the zero set of
/// `tau + P(xi) + Re z` at the origin, where the scaled ensemble sits.
pub fn frozen_uniformity(m: u32, betas: &[f64], n: usize, extra: ExtraMembers) -> Result<UniformityReport> {
    if betas.is_empty() {
        return Err(invalid!("Im z list is empty"));
    }
    let p0 = pq_split(m, 0.0)?.p_coeffs[0];
    let ratios = betas
        .iter()
        .map(|&beta| frozen_resolvent_norm(m, C64::new(-p0, beta), &scaled_ensemble(m, beta.abs(), n, extra)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(UniformityReport::new(betas.to_vec(), ratios))
}
