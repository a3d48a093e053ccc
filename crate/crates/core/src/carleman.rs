//! The Trèves identity for quadratic weights and the quantitative L2
//! Carleman inequality for `D_t + D_x^{2m}` with the weight
//! `Q(t, x) = 2 gamma R^p (x/R + phi(t))^2`.

use crate::error::{invalid, Error, Result};
use crate::grid::{Field1D, Field2D, Grid2D};
use crate::semigroup::decay_exponent;
use crate::weighted::{log_sum_exp, LOG_OVERFLOW};
use crate::C64;

/// `Q(x) = a x + (b/2) x^2 + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticWeight {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticWeight {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(invalid!("quadratic weight coefficients must be finite"));
        }
        Ok(QuadraticWeight { a, b, c })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.a * x + 0.5 * self.b * x * x + self.c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrevesReport {
    /// `int e^Q |P(D) u|^2`.
    pub lhs: f64,
    /// `sum_k b^k/k! ||P^{(k)}(D + DQ/2) e^{Q/2} u||^2`.
    pub rhs: f64,
    /// Individual terms of the right-hand sum.
    pub terms: Vec<f64>,
    /// `|lhs - rhs| / max(lhs, rhs)`.
    pub defect: f64,
}

// fraction of the grid at each end where u must already have vanished
const EDGE_FRACTION: usize = 20;

fn poly_symbol(coeffs: &[f64], xi: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * xi + c)
}

fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect()
}

/// Both sides of the Trèves identity for `P(xi) = sum_k p_coeffs[k] xi^k`.
///
/// The left side applies `P(D)` spectrally. The right side conjugates:
/// with `v = e^{Q/2} u`, `P^{(k)}(D + DQ/2) v` is evaluated by Horner's rule,
/// each step being spectral `D` plus multiplication by `(a + b x)/(2i)`.
pub fn treves_check(u: &Field1D, q: &QuadraticWeight, p_coeffs: &[f64]) -> Result<TrevesReport> {
    if p_coeffs.is_empty() || p_coeffs.iter().any(|c| !c.is_finite()) {
        return Err(invalid!("P needs at least one finite coefficient"));
    }
    let g = *u.grid();
    let n = g.n();
    let peak = u.max_abs();
    if peak == 0.0 {
        return Ok(TrevesReport { lhs: 0.0, rhs: 0.0, terms: vec![0.0; p_coeffs.len()], defect: 0.0 });
    }
    let edge = n / EDGE_FRACTION;
    let s = u.samples();
    if let Some(j) = (0..edge).chain(n - edge..n).find(|&j| s[j].norm() >= 1e-14 * peak) {
        return Err(invalid!(
            "u must vanish near the boundary; |u| = {:.3e} at x = {}",
            s[j].norm(),
            g.x(j)
        ));
    }
    let log_v: Vec<f64> = (0..n).map(|j| 0.5 * q.eval(g.x(j)) + s[j].norm().ln()).collect();
    if let Some(j) = log_v.iter().position(|l| *l > 0.5 * LOG_OVERFLOW) {
        return Err(invalid!("e^(Q/2) u overflows at x = {}", g.x(j)));
    }

    let pu = u.apply_symbol(|xi| C64::new(poly_symbol(p_coeffs, xi), 0.0));
    let log_lhs = log_sum_exp(pu.samples().iter().enumerate().map(|(j, w)| {
        let a = w.norm();
        if a == 0.0 {
            f64::NEG_INFINITY
        } else {
            q.eval(g.x(j)) + 2.0 * a.ln()
        }
    })) + g.dx().ln();
    if log_lhs > LOG_OVERFLOW {
        return Err(invalid!("weighted left side overflows"));
    }

    let v: Vec<C64> = (0..n).map(|j| s[j] * (0.5 * q.eval(g.x(j))).exp()).collect();
    let shift: Vec<C64> = (0..n).map(|j| C64::new(0.0, -0.5 * (q.a + q.b * g.x(j)))).collect();
    let mut coeffs = p_coeffs.to_vec();
    let mut terms = Vec::new();
    let mut k_fact = 1.0;
    let mut k = 0;
    while !coeffs.is_empty() {
        let mut w = Field1D::zeros(g);
        for c in coeffs.iter().rev() {
            let dw = w.derivative(1);
            let next = (0..n).map(|j| dw.samples()[j] + shift[j] * w.samples()[j] + v[j] * c).collect();
            w = Field1D::new(g, next)?;
        }
        let norm2: f64 = w.samples().iter().map(|z| z.norm_sqr()).sum::<f64>() * g.dx();
        terms.push(q.b.powi(k) / k_fact * norm2);
        coeffs = poly_derivative(&coeffs);
        k += 1;
        k_fact *= k as f64;
    }
    let lhs = log_lhs.exp();
    let rhs: f64 = terms.iter().sum();
    let scale = lhs.max(rhs);
    Ok(TrevesReport { lhs, rhs, terms, defect: if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 } })
}

/// Time profile `phi` with its first derivative.
#[derive(Debug, Clone, Copy)]
pub struct Profile {
    pub value: fn(f64) -> f64,
    pub derivative: fn(f64) -> f64,
}

impl Default for Profile {
    /// `phi(t) = -4 (t - 1/2)^2 + 9/4`.
    fn default() -> Self {
        Profile { value: |t| -4.0 * (t - 0.5) * (t - 0.5) + 2.25, derivative: |t| -8.0 * (t - 0.5) }
    }
}

/// `Q(t, x) = 2 gamma R^p (x/R + phi(t))^2` without `gamma`, which varies per
/// evaluation.
#[derive(Debug, Clone, Copy)]
pub struct CarlemanWeight {
    r: f64,
    m: u32,
    p_dec: f64,
    d1: f64,
    d2: f64,
    phi: Profile,
}

impl CarlemanWeight {
    pub fn new(r: f64, m: u32, d1: f64, d2: f64) -> Result<Self> {
        if m == 0 {
            return Err(invalid!("m must be a positive integer"));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid!("R must be positive, got {r}"));
        }
        if !(d1 > 0.0 && d1 < d2 && d2.is_finite()) {
            return Err(invalid!("annulus needs 0 < d1 < d2, got ({d1}, {d2})"));
        }
        Ok(CarlemanWeight { r, m, p_dec: decay_exponent(m), d1, d2, phi: Profile::default() })
    }

    /// The annulus `1/4 <= |x/R + phi| <= 13/4` used with the default profile.
    pub fn standard(r: f64, m: u32) -> Result<Self> {
        CarlemanWeight::new(r, m, 0.25, 3.25)
    }

    pub fn with_profile(mut self, phi: Profile) -> Self {
        self.phi = phi;
        self
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn p_dec(&self) -> f64 {
        self.p_dec
    }

    pub fn annulus(&self) -> (f64, f64) {
        (self.d1, self.d2)
    }

    /// Smallest admissible `R` for a given `gamma_0`: `(d1^2 gamma_0)^{-1/p}`.
    pub fn min_radius(&self, gamma0: f64) -> f64 {
        (self.d1 * self.d1 * gamma0).powf(-1.0 / self.p_dec)
    }

    fn y(&self, t: f64, x: f64) -> f64 {
        x / self.r + (self.phi.value)(t)
    }

    pub fn q(&self, gamma: f64, t: f64, x: f64) -> f64 {
        2.0 * gamma * self.r.powf(self.p_dec) * self.y(t, x).powi(2)
    }

    fn q_t(&self, gamma: f64, t: f64, x: f64) -> f64 {
        4.0 * gamma * self.r.powf(self.p_dec) * self.y(t, x) * (self.phi.derivative)(t)
    }

    fn q_x(&self, gamma: f64, t: f64, x: f64) -> f64 {
        4.0 * gamma * self.r.powf(self.p_dec - 1.0) * self.y(t, x)
    }
}

/// How the test function enters the Carleman check.
#[derive(Debug, Clone, Copy)]
pub enum CarlemanInput<'a> {
    /// A fixed `u`; both sides are weighted sums of `e^Q`.
    Fixed(&'a Field2D),
    /// A fixed `v`, with `u_gamma = e^{-Q_gamma/2} v` for each `gamma`.
    /// Then `e^{Q/2}(D_t + D_x^{2m}) u = (D_t + i Q_t/2) v + (D_x + i Q_x/2)^{2m} v`
    /// and no exponential weight is ever formed.
    Conjugated(&'a Field2D),
}

impl CarlemanInput<'_> {
    fn field(&self) -> &Field2D {
        match self {
            CarlemanInput::Fixed(f) | CarlemanInput::Conjugated(f) => f,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanRow {
    pub gamma: f64,
    /// `int e^Q |D_t u + D_x^{2m} u|^2 / (gamma^{4m-1} R^p int e^Q |u|^2)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanReport {
    pub rows: Vec<CarlemanRow>,
    pub min_ratio: f64,
    /// `max ratio / min ratio` over the list.
    pub spread: f64,
    /// Ratio never drops as gamma grows.
    pub non_decreasing: bool,
    /// Set for the zero field, where both sides vanish.
    pub skipped: bool,
}

/// Largest weight range (`max Q - min Q` over the support) the fixed route
/// accepts before cancellation in `D_t u + D_x^{2m} u` is amplified beyond
/// double precision.
pub const MAX_WEIGHT_RANGE: f64 = 46.0;
const SUPPORT_FLOOR: f64 = 1e-14;
const SPECTRAL_TAIL: f64 = 1e-8;

pub fn carleman_l2_check(
    input: CarlemanInput<'_>,
    w: &CarlemanWeight,
    gammas: &[f64],
) -> Result<CarlemanReport> {
    if gammas.is_empty() {
        return Err(invalid!("gamma list is empty"));
    }
    if gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) || gammas.windows(2).any(|p| p[1] <= p[0]) {
        return Err(invalid!("gamma list must be positive and strictly increasing"));
    }
    let r_min = w.min_radius(gammas[0]);
    if w.r < r_min {
        return Err(invalid!("R = {} is below (d1^2 gamma0)^(-1/p) = {r_min}", w.r));
    }
    let field = input.field();
    let grid = *field.grid();
    let peak = field.max_abs();
    if peak == 0.0 {
        let rows = gammas.iter().map(|&gamma| CarlemanRow { gamma, ratio: 0.0 }).collect();
        return Ok(CarlemanReport { rows, min_ratio: 0.0, spread: 1.0, non_decreasing: true, skipped: true });
    }
    let mask = support_mask(field, w, peak)?;
    check_resolved(field)?;
    let (gt, gx) = (grid.t_axis(), grid.x_axis());
    let norm = |gamma: f64| gamma.powi(4 * w.m as i32 - 1) * w.r.powf(w.p_dec);

    let rows = match input {
        CarlemanInput::Fixed(u) => {
            let two_m = 2 * w.m as i32;
            let lu = u.apply_symbol(|tau, xi| C64::new(tau + xi.powi(two_m), 0.0));
            gammas
                .iter()
                .map(|&gamma| {
                    let qs: Vec<f64> = (0..grid.len())
                        .map(|i| w.q(gamma, gt.x(i / gx.n()), gx.x(i % gx.n())))
                        .collect();
                    let on: Vec<usize> = (0..grid.len()).filter(|&i| mask[i]).collect();
                    let (lo, hi) = on.iter().fold((f64::MAX, f64::MIN), |(l, h), &i| (l.min(qs[i]), h.max(qs[i])));
                    if hi - lo > MAX_WEIGHT_RANGE {
                        return Err(Error::UnderResolved(format!(
                            "weight varies by e^{:.0} over the support at gamma = {gamma}; \
                             lower gamma or use the conjugated input",
                            hi - lo
                        )));
                    }
                    let weighted = |f: &Field2D| {
                        log_sum_exp(on.iter().map(|&i| {
                            let a = f.samples()[i].norm();
                            if a == 0.0 {
                                f64::NEG_INFINITY
                            } else {
                                qs[i] + 2.0 * a.ln()
                            }
                        }))
                    };
                    let ratio = (weighted(&lu) - weighted(u)).exp() / norm(gamma);
                    Ok(CarlemanRow { gamma, ratio })
                })
                .collect::<Result<Vec<_>>>()?
        }
        CarlemanInput::Conjugated(v) => {
            let den: f64 = v.samples().iter().map(|z| z.norm_sqr()).sum();
            gammas
                .iter()
                .map(|&gamma| {
                    let at = |i: usize| (gt.x(i / gx.n()), gx.x(i % gx.n()));
                    let half_qt: Vec<C64> =
                        (0..grid.len()).map(|i| C64::new(0.0, 0.5 * w.q_t(gamma, at(i).0, at(i).1))).collect();
                    let half_qx: Vec<C64> =
                        (0..grid.len()).map(|i| C64::new(0.0, 0.5 * w.q_x(gamma, at(i).0, at(i).1))).collect();
                    let dt_v = v.apply_symbol(|tau, _| C64::new(tau, 0.0));
                    let mut z = v.clone();
                    for _ in 0..2 * w.m {
                        let dz = z.apply_symbol(|_, xi| C64::new(xi, 0.0));
                        let next = (0..grid.len()).map(|i| dz.samples()[i] + half_qx[i] * z.samples()[i]).collect();
                        z = Field2D::new(grid, next)?;
                    }
                    let num: f64 = (0..grid.len())
                        .map(|i| (dt_v.samples()[i] + half_qt[i] * v.samples()[i] + z.samples()[i]).norm_sqr())
                        .sum();
                    Ok(CarlemanRow { gamma, ratio: num / den / norm(gamma) })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let non_decreasing = rows.windows(2).all(|p| p[1].ratio >= p[0].ratio);
    Ok(CarlemanReport { rows, min_ratio, spread: max_ratio / min_ratio, non_decreasing, skipped: false })
}

fn support_mask(field: &Field2D, w: &CarlemanWeight, peak: f64) -> Result<Vec<bool>> {
    let grid = field.grid();
    let (gt, gx) = (grid.t_axis(), grid.x_axis());
    let mut bad = Vec::new();
    let mask: Vec<bool> = field
        .samples()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let on = z.norm() > SUPPORT_FLOOR * peak;
            if on {
                let (t, x) = (gt.x(i / gx.n()), gx.x(i % gx.n()));
                let y = w.y(t, x).abs();
                if !(t > 0.0 && t < 1.0) || y < w.d1 || y > w.d2 {
                    bad.push((t, x));
                }
            }
            on
        })
        .collect();
    if !bad.is_empty() {
        let shown: Vec<String> = bad.iter().take(5).map(|(t, x)| format!("(t={t:.4}, x={x:.4})")).collect();
        return Err(invalid!(
            "{} support points leave (0,1) x {{d1 <= |x/R + phi(t)| <= d2}}, e.g. {}",
            bad.len(),
            shown.join(", ")
        ));
    }
    Ok(mask)
}

// spectral energy in the outer quarter of either frequency axis
fn check_resolved(field: &Field2D) -> Result<()> {
    use crate::grid::Fourier;
    let spec = field.dft_forward();
    let grid = field.grid();
    let (gt, gx) = (grid.t_axis(), grid.x_axis());
    let (mut total, mut tail) = (0.0, 0.0);
    for (i, z) in spec.samples().iter().enumerate() {
        let (tau, xi) = (gt.xi(i / gx.n()), gx.xi(i % gx.n()));
        let e = z.norm_sqr();
        total += e;
        if tau.abs() > 0.75 * gt.xi_max() || xi.abs() > 0.75 * gx.xi_max() {
            tail += e;
        }
    }
    if tail > SPECTRAL_TAIL * total {
        return Err(Error::UnderResolved(format!(
            "test function has {:.1e} of its spectral energy in the outer quarter; refine the grid",
            tail / total
        )));
    }
    Ok(())
}

/// The default conjugated family: `bump((t - 1/2)/0.4) bump(x/4)`, which sits
/// inside the standard annulus for every `R >= 8`.
pub fn bump_family(grid: Grid2D) -> Result<Field2D> {
    use crate::grid::bump;
    Field2D::from_fn(grid, |t, x| C64::new(bump((t - 0.5) / 0.4) * bump(x / 4.0), 0.0))
}
