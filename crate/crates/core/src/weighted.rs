//! Weighted energies `||e^{gamma |x|^p} u||` with `p = 2m/(2m-1)`, the
//! `Theta_{A,B}` weight transfer through the analytic flow, the subordination
//! integral, and the log-convexity check for weighted energies along a
//! trajectory.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::evolve::{analytic_propagate, Trajectory};
use crate::grid::Field1D;
use crate::quad::GaussRule;
use crate::semigroup::decay_exponent;

/// `ln(f64::MAX / 2)`: log-energies above this are reported as `+inf`.
pub const LOG_OVERFLOW: f64 = 709.089_565_712_824;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightParams {
    m: u32,
    gamma: f64,
    p_dec: f64,
}

impl WeightParams {
    pub fn new(m: u32, gamma: f64) -> Result<Self> {
        if m == 0 {
            return Err(invalid!("m must be a positive integer"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid!("gamma must be positive, got {gamma}"));
        }
        Ok(WeightParams { m, gamma, p_dec: decay_exponent(m) })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn p_dec(&self) -> f64 {
        self.p_dec
    }
}

// log sum_j e^{a_j} with -inf entries allowed
pub(crate) fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let top = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + terms.map(|a| (a - top).exp()).sum::<f64>().ln()
}

// 2 * log of the weighted modulus at every sample, -inf for exact zeros
fn log_density(u: &Field1D, gamma: f64, p: f64) -> impl Iterator<Item = f64> + Clone + '_ {
    let g = *u.grid();
    u.samples().iter().enumerate().map(move |(j, v)| {
        let a = v.norm();
        if a == 0.0 {
            f64::NEG_INFINITY
        } else {
            2.0 * gamma * g.x(j).abs().powf(p) + 2.0 * a.ln()
        }
    })
}

/// `log int e^{2 gamma |x|^p} |u|^2 dx` (that is, `log H`), accumulated with a
/// max-shifted log-sum-exp. `-inf` for the zero field; may exceed
/// [`LOG_OVERFLOW`].
pub fn log_weighted_energy(u: &Field1D, w: &WeightParams) -> f64 {
    log_sum_exp(log_density(u, w.gamma, w.p_dec)) + u.grid().dx().ln()
}

/// `||e^{gamma |x|^p} u||_{L^2}`, or `+inf` once the squared norm passes
/// `f64::MAX / 2`.
pub fn weighted_norm(u: &Field1D, w: &WeightParams) -> f64 {
    let l = log_weighted_energy(u, w);
    if l > LOG_OVERFLOW {
        f64::INFINITY
    } else {
        (0.5 * l).exp()
    }
}

/// `gamma / (1 + N2 A (1 + B^2/A^2)^m gamma^{2m-1})^{1/(2m-1)}`.
pub fn theta(a: f64, b: f64, gamma: f64, m: u32, n2: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid!("A must be positive, got {a}"));
    }
    if !(gamma > 0.0 && n2 > 0.0 && b.is_finite() && gamma.is_finite() && n2.is_finite()) {
        return Err(invalid!("theta needs gamma > 0, N2 > 0 and finite B"));
    }
    if m == 0 {
        return Err(invalid!("m must be a positive integer"));
    }
    let k = (2 * m - 1) as f64;
    let denom = 1.0 + n2 * a * (1.0 + b * b / (a * a)).powi(m as i32) * gamma.powf(k);
    Ok(gamma / denom.powf(1.0 / k))
}

/// Samples with `|u| < NOISE_FLOOR max|u|` are FFT round-off and are not
/// weighted at all.
pub const NOISE_FLOOR: f64 = 1e-13;
/// A weighted energy counts as finite when the shell just above the noise
/// floor (`eta <= |u| < 1e3 eta`) holds less than this fraction of it. A
/// genuinely divergent weight piles its energy onto the smallest samples.
pub const SHELL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferSample {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    /// `log ||e^{theta |x|^p} e^{-(A+iB) D^{2m}} f||`.
    pub log_lhs: f64,
    /// `log ((1 + B^2/A^2)^{1/2} ||e^{gamma |x|^p} f||)`.
    pub log_rhs: f64,
    pub ratio: f64,
    pub shell_fraction: f64,
    pub finite: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    /// Smallest `N2` on [`n2_grid`] for which every sample is finite.
    pub n2: f64,
    pub samples: Vec<TransferSample>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// `max_ratio / min_ratio`.
    pub spread: f64,
}

/// `10^{-2}` to `10^{6}` in quarter decades.
pub fn n2_grid() -> Vec<f64> {
    (0..=32).map(|k| 10f64.powf(-2.0 + 0.25 * k as f64)).collect()
}

struct Evolved {
    a: f64,
    b: f64,
    u: Field1D,
    peak: f64,
}

fn weighted_stats(e: &Evolved, theta: f64, p: f64) -> (f64, f64) {
    let eta = NOISE_FLOOR * e.peak;
    let g = *e.u.grid();
    let terms = e.u.samples().iter().enumerate().map(|(j, v)| {
        let a = v.norm();
        if a < eta || a == 0.0 {
            (f64::NEG_INFINITY, false)
        } else {
            (2.0 * theta * g.x(j).abs().powf(p) + 2.0 * a.ln(), a < 1e3 * eta)
        }
    });
    let total = log_sum_exp(terms.clone().map(|t| t.0));
    if total == f64::NEG_INFINITY {
        return (total, 0.0);
    }
    let shell: f64 = terms.filter(|t| t.1).map(|t| (t.0 - total).exp()).sum();
    (0.5 * (total + g.dx().ln()), shell)
}

fn evolve_all(f: &Field1D, m: u32, pairs: &[(f64, f64)]) -> Result<Vec<Evolved>> {
    pairs
        .iter()
        .map(|&(a, b)| {
            if !(a > 0.0) {
                return Err(invalid!("A must be positive, got {a}"));
            }
            let u = analytic_propagate(f, a, b, m, None)?;
            let peak = u.max_abs();
            Ok(Evolved { a, b, u, peak })
        })
        .collect()
}

fn samples_at(evolved: &[Evolved], gamma: f64, m: u32, n2: f64, log_f: f64) -> Result<Vec<TransferSample>> {
    let p = decay_exponent(m);
    evolved
        .iter()
        .map(|e| {
            let th = theta(e.a, e.b, gamma, m, n2)?;
            let (log_lhs, shell) = weighted_stats(e, th, p);
            let log_rhs = log_f + 0.5 * (1.0 + e.b * e.b / (e.a * e.a)).ln();
            let finite = shell < SHELL_TOLERANCE && 2.0 * log_lhs <= LOG_OVERFLOW;
            Ok(TransferSample {
                a: e.a,
                b: e.b,
                theta: th,
                log_lhs,
                log_rhs,
                ratio: (log_lhs - log_rhs).exp(),
                shell_fraction: shell,
                finite,
            })
        })
        .collect()
}

/// Fits one `N2` for all `(A, B)` pairs and reports
/// `||e^{Theta |x|^p} e^{-(A+iB) D^{2m}} f|| / ((1 + B^2/A^2)^{1/2} ||e^{gamma |x|^p} f||)`.
pub fn smoothing_weight_transfer_check(
    f: &Field1D,
    gamma: f64,
    m: u32,
    pairs: &[(f64, f64)],
) -> Result<TransferReport> {
    let w = WeightParams::new(m, gamma)?;
    if pairs.is_empty() {
        return Err(invalid!("need at least one (A, B) pair"));
    }
    let log_f = 0.5 * log_weighted_energy(f, &w);
    if 2.0 * log_f > LOG_OVERFLOW {
        return Err(invalid!("||e^(gamma|x|^p) f|| is infinite; lower gamma"));
    }
    if log_f == f64::NEG_INFINITY {
        let samples = pairs
            .iter()
            .map(|&(a, b)| {
                Ok(TransferSample {
                    a,
                    b,
                    theta: theta(a, b, gamma, m, 1.0)?,
                    log_lhs: f64::NEG_INFINITY,
                    log_rhs: f64::NEG_INFINITY,
                    ratio: 0.0,
                    shell_fraction: 0.0,
                    finite: true,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(TransferReport { n2: n2_grid()[0], samples, max_ratio: 0.0, min_ratio: 0.0, spread: 1.0 });
    }
    let evolved = evolve_all(f, m, pairs)?;
    for n2 in n2_grid() {
        let samples = samples_at(&evolved, gamma, m, n2, log_f)?;
        if samples.iter().all(|s| s.finite) {
            let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
            let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
            return Ok(TransferReport { n2, samples, max_ratio, min_ratio, spread: max_ratio / min_ratio });
        }
    }
    Err(Error::NonConvergence(format!(
        "no N2 up to {:.0e} makes every weighted norm finite",
        n2_grid().last().unwrap()
    )))
}

/// Ratio evaluation at a caller-chosen `N2` (no fitting).
pub fn transfer_at(
    f: &Field1D,
    gamma: f64,
    m: u32,
    pairs: &[(f64, f64)],
    n2: f64,
) -> Result<Vec<TransferSample>> {
    let w = WeightParams::new(m, gamma)?;
    let log_f = 0.5 * log_weighted_energy(f, &w);
    if 2.0 * log_f > LOG_OVERFLOW {
        return Err(invalid!("||e^(gamma|x|^p) f|| is infinite; lower gamma"));
    }
    samples_at(&evolve_all(f, m, pairs)?, gamma, m, n2, log_f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubordinationReport {
    pub xs: Vec<f64>,
    /// `int e^{lambda x - |lambda|^q/q} |lambda|^{(q-2)/2} d lambda / e^{|x|^p/p}`.
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max_ratio / min_ratio`.
    pub band_width: f64,
}

/// Truncate the lambda range where the integrand falls below this fraction of
/// its maximum.
const SUBORDINATION_CUT: f64 = 1e-18;

/// Evaluates the subordination integral against `e^{|x|^p/p}` at every sample.
pub fn subordination_check(p_dec: f64, xs: &[f64]) -> Result<SubordinationReport> {
    if !(p_dec > 1.0 && p_dec <= 2.0) {
        return Err(invalid!("p_dec must lie in (1, 2], got {p_dec}"));
    }
    if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) {
        return Err(invalid!("x samples must be finite and nonempty"));
    }
    let ratios = xs.iter().map(|&x| subordination_ratio(p_dec, x)).collect::<Result<Vec<_>>>()?;
    let max_ratio = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min_ratio = ratios.iter().cloned().fold(f64::MAX, f64::min);
    Ok(SubordinationReport { xs: xs.to_vec(), ratios, min_ratio, max_ratio, band_width: max_ratio / min_ratio })
}

fn subordination_ratio(p: f64, x: f64) -> Result<f64> {
    let q = p / (p - 1.0);
    let alg = (q - 2.0) / 2.0;
    let shift = x.abs().powf(p) / p;
    // log-integrand, already divided by e^{|x|^p/p}
    let g = |l: f64| {
        let base = l * x - l.abs().powf(q) / q - shift;
        if alg == 0.0 {
            base
        } else {
            base + alg * l.abs().ln()
        }
    };
    let peak = x.signum() * x.abs().powf(p - 1.0);
    // the log-integrand is concave on each half-line; bracket its max there
    let cut = -SUBORDINATION_CUT.ln();
    let mut pieces = Vec::new();
    for side in [-1.0, 1.0] {
        let start = if peak * side > 0.0 { peak.abs() } else { 0.0 };
        let top = max_on_half_line(&g, side, start);
        let gmax = g(side * top).max(if alg == 0.0 { g(0.0) } else { f64::NEG_INFINITY });
        let mut reach = top.max(1.0);
        while g(side * reach) > gmax - cut {
            reach *= 1.5;
        }
        pieces.push((side, reach));
    }
    let rule = GaussRule::new(20);
    let integrate = |panels: usize| -> f64 {
        pieces
            .iter()
            .map(|&(side, reach)| {
                rule.integrate(0.0, reach, panels, |r| if r == 0.0 && alg != 0.0 { 0.0 } else { g(side * r).exp() })
            })
            .sum()
    };
    let mut panels = 8;
    let mut prev = integrate(panels);
    loop {
        panels *= 2;
        let next = integrate(panels);
        let est = (next - prev).abs() / next.abs();
        if est < 1e-12 {
            return Ok(next);
        }
        if panels >= 1 << 14 {
            if est > 1e-6 {
                return Err(Error::NonConvergence(format!(
                    "subordination quadrature at x = {x}: change {est:.2e} on panel doubling"
                )));
            }
            return Ok(next);
        }
        prev = next;
    }
}

// argmax of r -> g(side r) for r >= start, by expanding then golden search
fn max_on_half_line(g: &impl Fn(f64) -> f64, side: f64, start: f64) -> f64 {
    let f = |r: f64| -g(side * r);
    let mut hi = start.max(1e-3) * 2.0 + 1.0;
    while f(hi) < f(0.5 * (start + hi)) {
        hi *= 2.0;
    }
    crate::fit::golden_min(start.max(1e-12), hi, 1e-10, f)
}

/// `sqrt(2 pi)`, the exact Gaussian subordination ratio.
pub fn gaussian_subordination_constant() -> f64 {
    (2.0 * PI).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub times: Vec<f64>,
    /// `log H(t)`, `H = ||e^{gamma |x|^p} u(t)||^2`.
    pub log_weighted_energy: Vec<f64>,
    pub v_inf: f64,
    /// `G(t) = log H(t) - t(1-t)/2 v_inf^2`.
    pub g: Vec<f64>,
    /// `max(0, max_t G(t) - ((1-t) G(0) + t G(1)))`.
    pub fitted_log_c: f64,
    /// `max(0, -min_k (G_{k+1} - 2 G_k + G_{k-1}))`.
    pub max_violation: f64,
}

impl ConvexityReport {
    pub fn passes(&self, log_c_tol: f64) -> bool {
        self.fitted_log_c <= log_c_tol
    }
}

/// Checks the log-convexity bound for weighted energies along a trajectory
/// sampled on `[0, 1]`.
pub fn convexity_check(traj: &Trajectory, w: &WeightParams, v_inf: f64) -> Result<ConvexityReport> {
    if !(v_inf >= 0.0 && v_inf.is_finite()) {
        return Err(invalid!("v_inf must be a nonnegative number, got {v_inf}"));
    }
    let times = traj.times();
    let t_end = *times.last().unwrap();
    if traj.len() < 2 || (t_end - 1.0).abs() > 1e-9 {
        return Err(invalid!("trajectory must run over [0, 1]; it ends at t = {t_end}"));
    }
    let log_h: Vec<f64> = traj.frames().iter().map(|u| log_weighted_energy(u, w)).collect();
    if let Some(k) = log_h.iter().position(|l| *l > LOG_OVERFLOW) {
        return Err(invalid!("weighted norm is infinite at frame {k} (t = {})", times[k]));
    }
    let zeros = log_h.iter().filter(|l| **l == f64::NEG_INFINITY).count();
    if zeros == log_h.len() {
        let n = times.len();
        return Ok(ConvexityReport {
            times,
            log_weighted_energy: log_h,
            v_inf,
            g: vec![f64::NEG_INFINITY; n],
            fitted_log_c: 0.0,
            max_violation: 0.0,
        });
    }
    if zeros > 0 {
        return Err(invalid!("trajectory vanishes at some frames but not all"));
    }
    let g: Vec<f64> =
        times.iter().zip(&log_h).map(|(t, l)| l - t * (1.0 - t) / 2.0 * v_inf * v_inf).collect();
    let (g0, g1) = (g[0], *g.last().unwrap());
    let excess = times.iter().zip(&g).map(|(t, gt)| gt - ((1.0 - t) * g0 + t * g1)).fold(0.0, f64::max);
    let worst_second = g.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).fold(f64::INFINITY, f64::min);
    Ok(ConvexityReport {
        times,
        log_weighted_energy: log_h,
        v_inf,
        g,
        fitted_log_c: excess,
        max_violation: if worst_second.is_finite() { (-worst_second).max(0.0) } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lp_norm, Grid1D};
    use crate::C64;
    use proptest::prelude::*;

    #[test]
    fn zero_field_has_zero_norm() {
        let g = Grid1D::new(10.0, 64).unwrap();
        let w = WeightParams::new(1, 0.5).unwrap();
        assert_eq!(weighted_norm(&Field1D::zeros(g), &w), 0.0);
    }

    #[test]
    fn gaussian_weighted_norm() {
        let g = Grid1D::new(20.0, 1024).unwrap();
        let u = Field1D::from_real_fn(g, |x| (-x * x).exp()).unwrap();
        let w = WeightParams::new(1, 0.5).unwrap();
        assert!((weighted_norm(&u, &w) - PI.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn divergent_weight_hits_sentinel() {
        let g = Grid1D::new(20.0, 1024).unwrap();
        let u = Field1D::from_real_fn(g, |x| (-x * x).exp()).unwrap();
        let w = WeightParams::new(1, 2.0).unwrap();
        assert_eq!(weighted_norm(&u, &w), f64::INFINITY);
    }

    #[test]
    fn weight_params_validate() {
        assert!(WeightParams::new(0, 1.0).is_err());
        assert!(WeightParams::new(1, 0.0).is_err());
        let w = WeightParams::new(3, 1.0).unwrap();
        assert!((w.p_dec() - 1.2).abs() < 1e-15);
    }

    #[test]
    fn theta_values() {
        assert!((theta(1.0, 0.0, 1.0, 1, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((theta(1.0, 1.0, 1.0, 1, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((theta(1e-12, 0.0, 0.7, 2, 1.0).unwrap() - 0.7).abs() < 1e-10);
        assert!(theta(0.0, 0.0, 1.0, 1, 1.0).is_err());
        assert!(theta(-1.0, 0.0, 1.0, 1, 1.0).is_err());
    }

    #[test]
    fn theta_monotone_on_lattice() {
        for m in 1..=3 {
            for &g in &[0.1, 1.0, 3.0] {
                for &n2 in &[0.1, 1.0, 10.0] {
                    let mut last = g;
                    for i in 1..20 {
                        let th = theta(0.1 * i as f64, 0.0, g, m, n2).unwrap();
                        assert!(th < last);
                        last = th;
                    }
                    let mut last = g;
                    for i in 0..20 {
                        let b = 0.3 * i as f64;
                        let th = theta(0.5, b, g, m, n2).unwrap();
                        assert!(th < last && th == theta(0.5, -b, g, m, n2).unwrap());
                        last = th;
                    }
                }
            }
        }
    }

    #[test]
    fn transfer_of_zero_reports_zero() {
        let g = Grid1D::new(10.0, 128).unwrap();
        let r = smoothing_weight_transfer_check(&Field1D::zeros(g), 0.25, 1, &[(1.0, 0.0)]).unwrap();
        assert_eq!(r.samples[0].ratio, 0.0);
    }

    #[test]
    fn transfer_rejects_infinite_rhs() {
        let g = Grid1D::new(20.0, 512).unwrap();
        let f = Field1D::from_real_fn(g, |x| (-x * x).exp()).unwrap();
        assert!(smoothing_weight_transfer_check(&f, 2.0, 1, &[(1.0, 0.0)]).unwrap_err().is_input_error());
    }

    // Heat flow of a Gaussian stays Gaussian: e^{-A D^2} e^{-x^2} =
    // (1+4A)^{-1/2} e^{-x^2/(1+4A)}, so the weighted LHS has a closed form
    // whenever theta < 1/(1+4A).
    #[test]
    fn gaussian_transfer_matches_closed_form() {
        let g = Grid1D::new(80.0, 4096).unwrap();
        let f = Field1D::from_real_fn(g, |x| (-x * x).exp()).unwrap();
        let r = smoothing_weight_transfer_check(&f, 0.25, 1, &[(1.0, 0.0)]).unwrap();
        let s = &r.samples[0];
        assert!(s.finite && s.ratio.is_finite());
        let c = 1.0 / 5.0;
        let lhs = (PI / (2.0 * c - 2.0 * s.theta)).sqrt() / 5.0;
        let rhs = (PI / (2.0 - 0.5)).sqrt();
        // samples under the noise floor are not weighted; here they carry ~1e-8
        // of the weighted energy
        assert!((s.log_lhs - 0.5 * lhs.ln()).abs() < 1e-7, "{} vs {}", s.log_lhs, 0.5 * lhs.ln());
        assert!((s.log_rhs - 0.5 * rhs.ln()).abs() < 1e-10);
        assert!(s.theta < c);
    }

    #[test]
    fn subordination_gaussian_is_exact() {
        let xs: Vec<f64> = (0..=8).map(|k| k as f64).collect();
        let r = subordination_check(2.0, &xs).unwrap();
        for v in &r.ratios {
            assert!((v - gaussian_subordination_constant()).abs() < 1e-6 * v);
        }
        assert!((r.band_width - 1.0).abs() < 1e-6);
    }

    #[test]
    fn subordination_at_origin_matches_direct_quadrature() {
        // q = 4: int e^{-l^4/4} |l| dl = 2 int_0^inf e^{-s^2} ds = sqrt(pi), s = l^2/2
        let r = subordination_check(4.0 / 3.0, &[0.0]).unwrap();
        assert!((r.ratios[0] - PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn subordination_band_is_bounded() {
        let xs: Vec<f64> = (0..=8).map(|k| k as f64).collect();
        for p in [4.0 / 3.0, 6.0 / 5.0] {
            let r = subordination_check(p, &xs).unwrap();
            assert!(r.band_width <= 3.0, "p={p}: {}", r.band_width);
        }
    }

    #[test]
    fn subordination_rejects_bad_p() {
        assert!(subordination_check(1.0, &[0.0]).is_err());
        assert!(subordination_check(2.5, &[0.0]).is_err());
        assert!(subordination_check(1.5, &[f64::NAN]).is_err());
    }

    fn gaussian_log_h(gamma: f64, t: f64) -> f64 {
        0.5 * PI.ln() - 0.5 * (2.0 - 2.0 * gamma * (1.0 + 16.0 * t * t)).ln()
    }

    // Frames come from the closed form: FFT round-off (~1e-17) times
    // e^{0.05 x^2} would swamp the energy on a box wide enough to hold the
    // t = 1 weighted tail.
    #[test]
    fn free_gaussian_convexity_matches_closed_form() {
        let g = Grid1D::new(60.0, 4096).unwrap();
        let dt = 1.0 / 64.0;
        let frames = (0..=64)
            .map(|k| {
                let a = C64::new(1.0, 4.0 * k as f64 * dt);
                Field1D::from_fn(g, |x| (-(x * x) / a).exp() / a.sqrt()).unwrap()
            })
            .collect();
        let traj = Trajectory::new(dt, frames).unwrap();
        let w = WeightParams::new(1, 0.05).unwrap();
        let r = convexity_check(&traj, &w, 0.0).unwrap();
        for (t, l) in r.times.iter().zip(&r.log_weighted_energy) {
            assert!((l - gaussian_log_h(0.05, *t)).abs() < 1e-10, "t={t}");
        }
        assert!(r.passes(0.05), "log C {}", r.fitted_log_c);
        assert!(r.max_violation <= 1e-3);
    }

    // Damping eps = 1/2 keeps the far tail of every frame analytic, so the
    // weighted energy stays above FFT noise across the box.
    #[test]
    fn damped_quartic_flow_with_potential_is_log_convex() {
        use crate::evolve::{analytic_trajectory, Potential, Splitting};
        let g = Grid1D::new(80.0, 4096).unwrap();
        let u0 = Field1D::from_real_fn(g, |x| (-x * x).exp()).unwrap();
        let v = Potential::from_fn(g, |x| 0.5 * (-x * x).exp()).unwrap();
        let split = Splitting { potential: &v, dt: 1.0 / 256.0 };
        let traj = analytic_trajectory(&u0, 0.5, 2, Some(split), 32).unwrap();
        let r = convexity_check(&traj, &WeightParams::new(2, 0.02).unwrap(), 0.5).unwrap();
        assert!(r.passes(0.1), "log C {}", r.fitted_log_c);
    }

    #[test]
    fn zero_trajectory_passes_trivially() {
        let g = Grid1D::new(10.0, 64).unwrap();
        let traj = Trajectory::new(0.5, vec![Field1D::zeros(g); 3]).unwrap();
        let r = convexity_check(&traj, &WeightParams::new(2, 0.1).unwrap(), 0.0).unwrap();
        assert!(r.log_weighted_energy.iter().all(|l| *l == f64::NEG_INFINITY));
        assert!(r.passes(0.0));
    }

    #[test]
    fn infinite_frame_is_named() {
        let g = Grid1D::new(20.0, 512).unwrap();
        let u = Field1D::from_real_fn(g, |x| (-x * x).exp()).unwrap();
        let traj = Trajectory::new(1.0, vec![u.clone(), u]).unwrap();
        let e = convexity_check(&traj, &WeightParams::new(1, 2.0).unwrap(), 0.0).unwrap_err();
        assert!(e.to_string().contains("frame 0"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn small_gamma_recovers_l2(shift in -3.0..3.0f64, width in 0.5..2.0f64, m in 1u32..=3) {
            let g = Grid1D::new(20.0, 512).unwrap();
            let u = Field1D::from_fn(g, |x| C64::from_polar((-(x - shift).powi(2) / width).exp(), x)).unwrap();
            let plain = lp_norm(&u, 2.0).unwrap();
            let w = WeightParams::new(m, 1e-9).unwrap();
            prop_assert!((weighted_norm(&u, &w) - plain).abs() <= 1e-6 * plain);
        }

        #[test]
        fn theta_below_gamma(a in 1e-3..10.0f64, b in -10.0..10.0f64, gamma in 1e-3..10.0f64, m in 1u32..=4, n2 in 1e-3..1e3f64) {
            prop_assert!(theta(a, b, gamma, m, n2).unwrap() < gamma);
        }

        #[test]
        fn subordination_band_uniform(p in 1.15..1.95f64) {
            let xs: Vec<f64> = (0..=6).map(|k| k as f64).collect();
            let r = subordination_check(p, &xs).unwrap();
            prop_assert!(r.band_width <= 3.0, "p={} band {}", p, r.band_width);
        }
    }
}
