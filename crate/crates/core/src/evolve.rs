//! Propagators for `i u_t - D^{2m} u = V u` with a time-independent real `V`:
//! the exact free group, the regularized analytic flow
//! `e^{-(eps + it)(D^{2m} + V)}`, and Strang splitting for the potential flow.

use crate::error::{invalid, Result};
use crate::grid::{lp_norm, Field1D, Grid1D};
use crate::C64;

/// A real potential sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Potential {
    /// Rejects any nonzero imaginary part.
    pub fn from_field(v: &Field1D) -> Result<Self> {
        if let Some(j) = v.samples().iter().position(|s| s.im != 0.0) {
            return Err(invalid!(
                "potential must be real; Im V = {} at x = {}",
                v.samples()[j].im,
                v.grid().x(j)
            ));
        }
        Ok(Potential { grid: *v.grid(), values: v.samples().iter().map(|s| s.re).collect() })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Potential::from_field(&Field1D::from_real_fn(grid, f)?)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn factor(&self, h: C64) -> Vec<C64> {
        self.values.iter().map(|v| (-h * v).exp()).collect()
    }
}

/// Frames at `0, dt, 2dt, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    frames: Vec<Field1D>,
}

impl Trajectory {
    pub fn new(dt: f64, frames: Vec<Field1D>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid!("dt must be positive, got {dt}"));
        }
        let Some(first) = frames.first() else {
            return Err(invalid!("trajectory needs at least one frame"));
        };
        if frames.iter().any(|f| f.grid() != first.grid()) {
            return Err(invalid!("all frames must share one grid"));
        }
        Ok(Trajectory { dt, frames })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn frames(&self) -> &[Field1D] {
        &self.frames
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.frames.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn last(&self) -> &Field1D {
        self.frames.last().expect("trajectory is never empty")
    }
}

fn check_m(m: u32) -> Result<()> {
    if m == 0 {
        return Err(invalid!("m must be a positive integer"));
    }
    Ok(())
}

fn same_grid(u: &Field1D, v: &Potential) -> Result<()> {
    if u.grid() != v.grid() {
        return Err(invalid!("potential and data live on different grids"));
    }
    Ok(())
}

// e^{-h xi^{2m}} in centered order
fn kinetic(grid: &Grid1D, m: u32, h: C64) -> Vec<C64> {
    let two_m = 2 * m as i32;
    grid.freqs().iter().map(|xi| (-h * xi.powi(two_m)).exp()).collect()
}

fn pointwise(u: &Field1D, f: &[C64]) -> Field1D {
    Field1D::from_raw(*u.grid(), u.samples().iter().zip(f).map(|(a, b)| a * b).collect())
}

/// `e^{-it D^{2m}} u0`, exact in the discrete model.
pub fn free_propagate(u0: &Field1D, t: f64, m: u32) -> Field1D {
    if t == 0.0 {
        return u0.clone();
    }
    u0.apply_multiplier(&kinetic(u0.grid(), m, C64::new(0.0, t)))
}

/// Potential and step size for the split analytic flow.
#[derive(Debug, Clone, Copy)]
pub struct Splitting<'a> {
    pub potential: &'a Potential,
    pub dt: f64,
}

/// `e^{-(eps + it)(D^{2m} + V)} u0`.
///
/// Without a potential this is one spectral multiplication. With one, the
/// complex time `eps + it` is cut into `N = ceil(|eps + it| / dt)` equal
/// pieces `h` and each piece is a Strang step
/// `e^{-hV/2} e^{-h D^{2m}} e^{-hV/2}`.
pub fn analytic_propagate(
    u0: &Field1D,
    eps: f64,
    t: f64,
    m: u32,
    split: Option<Splitting<'_>>,
) -> Result<Field1D> {
    check_m(m)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid!("eps must be positive, got {eps}"));
    }
    if !t.is_finite() {
        return Err(invalid!("t must be finite"));
    }
    let tau = C64::new(eps, t);
    let Some(Splitting { potential, dt }) = split else {
        return Ok(u0.apply_multiplier(&kinetic(u0.grid(), m, tau)));
    };
    same_grid(u0, potential)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid!("dt must be positive, got {dt}"));
    }
    let steps = (tau.norm() / dt).ceil().max(1.0) as usize;
    let h = tau / steps as f64;
    let half = potential.factor(h / 2.0);
    let full = potential.factor(h);
    let kin = kinetic(u0.grid(), m, h);
    let mut u = pointwise(u0, &half);
    for s in 0..steps {
        u = u.apply_multiplier(&kin);
        u = pointwise(&u, if s + 1 == steps { &half } else { &full });
    }
    Ok(u)
}

/// Strang-split trajectory of `e^{-it(D^{2m} + V)} u0` at `0, dt, ..., t_final`.
pub fn potential_propagate(
    u0: &Field1D,
    t_final: f64,
    dt: f64,
    m: u32,
    v: &Potential,
) -> Result<Trajectory> {
    check_m(m)?;
    same_grid(u0, v)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid!("dt must be positive, got {dt}"));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(invalid!("t_final must be nonnegative, got {t_final}"));
    }
    let steps = (t_final / dt).round();
    if (steps * dt - t_final).abs() > 1e-12 * t_final.max(1.0) {
        return Err(invalid!("dt = {dt} does not divide t_final = {t_final}"));
    }
    let half = v.factor(C64::new(0.0, dt / 2.0));
    let kin = kinetic(u0.grid(), m, C64::new(0.0, dt));
    let mut frames = Vec::with_capacity(steps as usize + 1);
    frames.push(u0.clone());
    for _ in 0..steps as usize {
        let u = frames.last().unwrap();
        let u = pointwise(&pointwise(u, &half).apply_multiplier(&kin), &half);
        frames.push(u);
    }
    Trajectory::new(dt, frames)
}

/// Frames `e^{-(eps + i t_k)(D^{2m} + V)} u0` at `t_k = k / intervals`,
/// `k = 0..=intervals`: a sampling of `[0, 1]` in real time at fixed damping.
pub fn analytic_trajectory(
    u0: &Field1D,
    eps: f64,
    m: u32,
    split: Option<Splitting<'_>>,
    intervals: usize,
) -> Result<Trajectory> {
    if intervals == 0 {
        return Err(invalid!("need at least one interval"));
    }
    let dt = 1.0 / intervals as f64;
    let frames = (0..=intervals)
        .map(|k| analytic_propagate(u0, eps, k as f64 * dt, m, split))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(dt, frames)
}

/// Largest L2 norm over interior frames of
/// `i (u_{k+1} - u_{k-1}) / (2 dt) - D^{2m} u_k - V u_k`.
pub fn residual(traj: &Trajectory, m: u32, v: Option<&Potential>) -> Result<f64> {
    check_m(m)?;
    if traj.len() < 3 {
        return Err(invalid!("residual needs at least 3 frames, got {}", traj.len()));
    }
    let g = *traj.frames[0].grid();
    if let Some(v) = v {
        if v.grid() != &g {
            return Err(invalid!("potential and trajectory live on different grids"));
        }
    }
    let sym: Vec<C64> = kinetic_power(&g, m);
    let i_over = C64::new(0.0, 1.0 / (2.0 * traj.dt));
    let mut worst = 0.0f64;
    for k in 1..traj.len() - 1 {
        let (prev, cur, next) = (&traj.frames[k - 1], &traj.frames[k], &traj.frames[k + 1]);
        let d = cur.apply_multiplier(&sym);
        let r: Vec<C64> = (0..g.n())
            .map(|j| {
                let pot = v.map_or(0.0, |v| v.values[j]);
                i_over * (next.samples()[j] - prev.samples()[j]) - d.samples()[j] - cur.samples()[j] * pot
            })
            .collect();
        worst = worst.max(lp_norm(&Field1D::from_raw(g, r), 2.0)?);
    }
    Ok(worst)
}

fn kinetic_power(grid: &Grid1D, m: u32) -> Vec<C64> {
    let two_m = 2 * m as i32;
    grid.freqs().iter().map(|xi| C64::new(xi.powi(two_m), 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Fourier, InverseFourier, Spectrum1D};
    use crate::semigroup::{kernel, sharpness_solution, SemigroupParams};
    use proptest::prelude::*;

    fn l2_diff(a: &Field1D, b: &Field1D) -> f64 {
        let d: Vec<C64> = a.samples().iter().zip(b.samples()).map(|(x, y)| x - y).collect();
        lp_norm(&Field1D::from_raw(*a.grid(), d), 2.0).unwrap()
    }

    fn l2(a: &Field1D) -> f64 {
        lp_norm(a, 2.0).unwrap()
    }

    fn gaussian(g: Grid1D) -> Field1D {
        Field1D::from_real_fn(g, |x| (-x * x).exp()).unwrap()
    }

    #[test]
    fn free_at_zero_time_is_identity() {
        let g = Grid1D::new(10.0, 256).unwrap();
        let u = gaussian(g);
        assert_eq!(free_propagate(&u, 0.0, 2).samples(), u.samples());
    }

    #[test]
    fn free_schrodinger_gaussian() {
        let g = Grid1D::new(20.0, 2048).unwrap();
        let t = 0.5;
        let u = free_propagate(&gaussian(g), t, 1);
        let a = C64::new(1.0, 4.0 * t);
        for (j, v) in u.samples().iter().enumerate() {
            let x = g.x(j);
            let want = (-(x * x) / a).exp() / a.sqrt();
            assert!((v - want).norm() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn eps_to_zero_recovers_free_flow() {
        let g = Grid1D::new(20.0, 1024).unwrap();
        let u = gaussian(g);
        let free = free_propagate(&u, 0.3, 2);
        let d3 = l2_diff(&analytic_propagate(&u, 1e-3, 0.3, 2, None).unwrap(), &free);
        let d6 = l2_diff(&analytic_propagate(&u, 1e-6, 0.3, 2, None).unwrap(), &free);
        assert!(d6 < d3 / 100.0, "{d3} {d6}");
    }

    #[test]
    fn eps_must_be_positive() {
        let g = Grid1D::new(10.0, 128).unwrap();
        assert!(analytic_propagate(&gaussian(g), 0.0, 1.0, 1, None).is_err());
        assert!(analytic_propagate(&gaussian(g), -1.0, 1.0, 1, None).is_err());
    }

    #[test]
    fn smoothing_at_zero_time_damps_high_frequencies() {
        let g = Grid1D::new(10.0, 256).unwrap();
        let u = Field1D::from_fn(g, |x| C64::from_polar((-x * x).exp(), 6.0 * x)).unwrap();
        let eps = 0.01;
        let out = analytic_propagate(&u, eps, 0.0, 1, None).unwrap().dft_forward();
        let inp = u.dft_forward();
        for k in 0..g.n() {
            let want = inp.samples()[k] * (-eps * g.xi(k).powi(2)).exp();
            assert!((out.samples()[k] - want).norm() < 1e-13);
        }
    }

    #[test]
    fn analytic_flow_is_convolution_with_complex_time_kernel() {
        let g = Grid1D::new(40.0, 1024).unwrap();
        let u = Field1D::from_real_fn(g, |x| (-(x - 1.0).powi(2)).exp() * (1.0 + 0.3 * x)).unwrap();
        for t in [-0.7, 0.0, 1.3] {
            let k = kernel(&SemigroupParams::new(1, C64::new(1.0, t)).unwrap(), &g).unwrap();
            let prod: Vec<C64> =
                k.dft_forward().samples().iter().zip(u.dft_forward().samples()).map(|(a, b)| a * b).collect();
            let conv = Spectrum1D::new(g, prod).unwrap().dft_inverse();
            let flow = analytic_propagate(&u, 1.0, t, 1, None).unwrap();
            assert!(l2_diff(&flow, &conv) <= 1e-8 * l2(&conv));
        }
    }

    #[test]
    fn potential_must_be_real() {
        let g = Grid1D::new(5.0, 64).unwrap();
        let f = Field1D::from_fn(g, |x| C64::new(x, 1e-20)).unwrap();
        assert!(Potential::from_field(&f).is_err());
    }

    #[test]
    fn zero_potential_matches_free_flow() {
        let g = Grid1D::new(20.0, 512).unwrap();
        let u = gaussian(g);
        let v = Potential::from_fn(g, |_| 0.0).unwrap();
        let tr = potential_propagate(&u, 0.5, 0.05, 2, &v).unwrap();
        assert_eq!(tr.len(), 11);
        for (k, f) in tr.frames().iter().enumerate() {
            assert!(l2_diff(f, &free_propagate(&u, k as f64 * 0.05, 2)) < 1e-9);
        }
    }

    #[test]
    fn constant_potential_is_a_phase() {
        let g = Grid1D::new(20.0, 512).unwrap();
        let u = gaussian(g);
        let c = 0.8;
        let v = Potential::from_fn(g, |_| c).unwrap();
        let tr = potential_propagate(&u, 0.4, 0.1, 1, &v).unwrap();
        for (k, f) in tr.frames().iter().enumerate() {
            let t = k as f64 * 0.1;
            let want = free_propagate(&u, t, 1).scaled(C64::from_polar(1.0, -c * t));
            assert!(l2_diff(f, &want) < 1e-9);
        }
    }

    #[test]
    fn dt_must_divide_t_final() {
        let g = Grid1D::new(5.0, 64).unwrap();
        let v = Potential::from_fn(g, |_| 0.0).unwrap();
        assert!(potential_propagate(&gaussian(g), 0.5, 0.3, 1, &v).is_err());
        assert!(potential_propagate(&gaussian(g), 0.5, 0.0, 1, &v).is_err());
    }

    #[test]
    fn strang_is_second_order() {
        let g = Grid1D::new(20.0, 512).unwrap();
        let u = gaussian(g);
        let v = Potential::from_fn(g, |x| (-x * x).exp()).unwrap();
        let dt = 0.01;
        let at = |h: f64| potential_propagate(&u, 0.5, h, 1, &v).unwrap().last().clone();
        let reference = at(dt / 8.0);
        let ratio = l2_diff(&at(dt), &reference) / l2_diff(&at(dt / 2.0), &reference);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn split_analytic_flow_converges() {
        let g = Grid1D::new(20.0, 512).unwrap();
        let u = gaussian(g);
        let v = Potential::from_fn(g, |x| 0.5 * (-x * x).exp()).unwrap();
        let at = |h: f64| {
            analytic_propagate(&u, 0.5, 0.5, 2, Some(Splitting { potential: &v, dt: h })).unwrap()
        };
        let reference = at(1.0 / 1024.0);
        let ratio = l2_diff(&at(1.0 / 64.0), &reference) / l2_diff(&at(1.0 / 128.0), &reference);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn residual_of_free_gaussian_is_second_order() {
        let g = Grid1D::new(20.0, 512).unwrap();
        let u = gaussian(g);
        let traj = |dt: f64| {
            Trajectory::new(dt, (0..5).map(|k| free_propagate(&u, k as f64 * dt, 1)).collect()).unwrap()
        };
        let r1 = residual(&traj(1e-3), 1, None).unwrap();
        let r2 = residual(&traj(5e-4), 1, None).unwrap();
        assert!(r1 <= 1e-4, "{r1}");
        assert!((3.5..=4.5).contains(&(r1 / r2)), "ratio {}", r1 / r2);
    }

    #[test]
    fn residual_edge_cases() {
        let g = Grid1D::new(5.0, 64).unwrap();
        let z = Field1D::zeros(g);
        let tr = Trajectory::new(0.1, vec![z.clone(), z.clone(), z.clone()]).unwrap();
        assert_eq!(residual(&tr, 2, None).unwrap(), 0.0);
        let short = Trajectory::new(0.1, vec![z.clone(), z]).unwrap();
        assert!(residual(&short, 2, None).is_err());
    }

    #[test]
    fn sharpness_solution_solves_free_equation() {
        let g = Grid1D::new(30.0, 512).unwrap();
        let dt = 1e-3;
        let frames = (0..3).map(|k| sharpness_solution(k as f64 * dt, 2, &g).unwrap()).collect();
        let r = residual(&Trajectory::new(dt, frames).unwrap(), 2, None).unwrap();
        assert!(r <= 1e-4, "{r}");
    }

    #[test]
    fn residual_with_potential_tracks_splitting() {
        let g = Grid1D::new(20.0, 512).unwrap();
        let u = gaussian(g);
        let v = Potential::from_fn(g, |x| (-x * x).exp()).unwrap();
        let tr = potential_propagate(&u, 0.01, 1e-3, 1, &v).unwrap();
        assert!(residual(&tr, 1, Some(&v)).unwrap() < 1e-3);
        // wrong equation: drop V
        assert!(residual(&tr, 1, None).unwrap() > 0.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn free_flow_is_isometric_and_a_group(s in -1.0..1.0f64, t in -1.0..1.0f64, m in 1u32..=3) {
            let g = Grid1D::new(20.0, 512).unwrap();
            let u = Field1D::from_fn(g, |x| C64::from_polar((-x * x).exp(), 2.0 * x)).unwrap();
            let a = free_propagate(&free_propagate(&u, s, m), t, m);
            let b = free_propagate(&u, s + t, m);
            prop_assert!(l2_diff(&a, &b) <= 1e-12 * l2(&u));
            prop_assert!((l2(&b) - l2(&u)).abs() <= 1e-12 * l2(&u));
        }

        #[test]
        fn potential_flow_is_isometric(t_steps in 1usize..=20, amp in -2.0..2.0f64, m in 1u32..=2) {
            let g = Grid1D::new(20.0, 512).unwrap();
            let u = gaussian(g);
            let v = Potential::from_fn(g, |x| amp * (-x * x / 3.0).exp()).unwrap();
            let tr = potential_propagate(&u, t_steps as f64 * 0.05, 0.05, m, &v).unwrap();
            for f in tr.frames() {
                prop_assert!((l2(f) - l2(&u)).abs() <= 1e-8 * l2(&u));
            }
        }

        #[test]
        fn analytic_flow_damps(eps in 1e-3..2.0f64, t in -2.0..2.0f64, m in 1u32..=3) {
            let g = Grid1D::new(20.0, 512).unwrap();
            let u = gaussian(g);
            let damped = l2(&analytic_propagate(&u, eps, t, m, None).unwrap());
            prop_assert!(damped <= l2(&free_propagate(&u, t, m)) * (1.0 + 1e-14));
        }
    }
}
