//! One function per experiment: read parameters, call the core check, and
//! turn its report into named scalars, tolerances and a CSV series.

use std::collections::BTreeMap;

use disperse_core::carleman::{bump_family, carleman_l2_check, treves_check, CarlemanInput, CarlemanWeight, QuadraticWeight};
use disperse_core::evolve::{analytic_trajectory, Potential, Splitting, Trajectory};
use disperse_core::grid::{bump, Field1D, Grid1D, Grid2D};
use disperse_core::multiplier::norms::ExtraMembers;
use disperse_core::multiplier::{
    b_sweep, dispersive_decay, frozen_uniformity, multiplier_uniformity, predicted_dispersive_slope, vdc_decay,
};
use disperse_core::semigroup::{decay_exponent, fit_decay, kernel, kernel_envelope, sharpness_solution, FitModel, SemigroupParams};
use disperse_core::weighted::{convexity_check, smoothing_weight_transfer_check, subordination_check, WeightParams};
use disperse_core::{evolve, C64};

use crate::config::{Experiment, ExperimentConfig, GridSpec};
use crate::CliError;

/// Columns and rows of the per-experiment CSV series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub results: BTreeMap<String, f64>,
    /// Upper bounds (or, for keys ending in `_min`, lower bounds) checked
    /// against results of the same stem.
    pub tolerance: BTreeMap<String, f64>,
    pub pass: bool,
    /// Result a sweep summarizes.
    pub primary: &'static str,
    pub series: Series,
}

struct Builder {
    results: BTreeMap<String, f64>,
    tolerance: BTreeMap<String, f64>,
    pass: bool,
}

impl Builder {
    fn new() -> Self {
        Builder { results: BTreeMap::new(), tolerance: BTreeMap::new(), pass: true }
    }

    fn result(&mut self, key: &str, v: f64) -> &mut Self {
        self.results.insert(key.to_string(), v);
        self
    }

    fn flag(&mut self, key: &str, v: bool) -> &mut Self {
        self.result(key, if v { 1.0 } else { 0.0 })
    }

    /// `results[key] <= tol`.
    fn at_most(&mut self, key: &str, tol: f64) -> &mut Self {
        self.tolerance.insert(format!("{key}_max"), tol);
        self.pass &= self.results[key] <= tol;
        self
    }

    /// `results[key] >= tol`.
    fn at_least(&mut self, key: &str, tol: f64) -> &mut Self {
        self.tolerance.insert(format!("{key}_min"), tol);
        self.pass &= self.results[key] >= tol;
        self
    }

    fn finish(&mut self, primary: &'static str, series: Series) -> Outcome {
        Outcome {
            results: std::mem::take(&mut self.results),
            tolerance: std::mem::take(&mut self.tolerance),
            pass: self.pass,
            primary,
            series,
        }
    }
}

fn grid1(spec: GridSpec) -> Result<Grid1D, CliError> {
    Ok(Grid1D::new(spec.0, spec.1)?)
}

pub fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    if cfg.m == 0 {
        return Err(CliError::Config("`m` must be a positive integer".into()));
    }
    match cfg.experiment {
        Experiment::KernelDecay => kernel_decay(cfg),
        Experiment::Sharpness => sharpness(cfg),
        Experiment::Convexity => convexity(cfg),
        Experiment::Subordination => subordination(cfg),
        Experiment::ThetaTransfer => theta_transfer(cfg),
        Experiment::Treves => treves(cfg),
        Experiment::CarlemanL2 => carleman(cfg),
        Experiment::MultiplierUniformity => multiplier(cfg),
        Experiment::FrozenResolvent => frozen(cfg),
        Experiment::Vdc => vdc(cfg),
        Experiment::Dispersive => dispersive(cfg),
    }
}

fn kernel_decay(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params();
    let g = grid1(cfg.axis(0)?)?;
    let window = p.req_pair("window")?;
    let model = match p.str_or("model", "corrected")? {
        "corrected" => FitModel::Corrected,
        "plain" => FitModel::Plain,
        other => return Err(CliError::Config(format!("`model` must be corrected or plain, got `{other}`"))),
    };
    let tol = p.f64_or("tolerance", if cfg.m == 1 { 0.02 } else { 0.05 })?;
    let params = SemigroupParams::new(cfg.m, C64::new(1.0, 0.0))?;
    let k = kernel(&params, &g)?;
    let fit = fit_decay(&params, &k, window, model)?;
    let expected = decay_exponent(cfg.m);
    let series = Series {
        header: vec!["x", "abs_kernel", "envelope"],
        rows: (0..g.n())
            .filter(|&j| g.x(j) >= window.0 && g.x(j) <= window.1)
            .map(|j| vec![g.x(j), k.samples()[j].norm(), kernel_envelope(&params, g.x(j))])
            .collect(),
    };
    Ok(Builder::new()
        .result("exponent", fit.exponent)
        .result("expected_exponent", expected)
        .result("relative_error", (fit.exponent - expected).abs() / expected)
        .result("coefficient", fit.coefficient)
        .result("prefactor", fit.prefactor)
        .result("algebraic_power", fit.algebraic_power)
        .result("r_squared", fit.r_squared)
        .result("envelope_consistency", fit.envelope_consistency)
        .result("zeros", fit.zeros.len() as f64)
        .at_most("relative_error", tol)
        .finish("exponent", series))
}

fn sharpness(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params();
    let g = grid1(cfg.axis(0)?)?;
    let dt = p.f64_or("dt", 1e-3)?;
    let residual_at = |h: f64| -> Result<f64, CliError> {
        let frames = (0..3).map(|k| sharpness_solution(k as f64 * h, cfg.m, &g)).collect::<Result<Vec<_>, _>>()?;
        Ok(evolve::residual(&Trajectory::new(h, frames)?, cfg.m, None)?)
    };
    let (r, r_half) = (residual_at(dt)?, residual_at(dt / 2.0)?);
    let series = Series { header: vec!["dt", "residual"], rows: vec![vec![dt, r], vec![dt / 2.0, r_half]] };
    Ok(Builder::new()
        .result("residual", r)
        .result("residual_half", r_half)
        .result("ratio", r / r_half)
        .at_most("residual", p.f64_or("tolerance", 1e-4)?)
        .at_most("residual_half", p.f64_or("tolerance_half", 2.6e-5)?)
        .finish("residual", series))
}

/// `(1 + 4it)^{-1/2} e^{-x^2/(1+4it)}`, the free `m = 1` evolution of `e^{-x^2}`.
fn gaussian_frames(g: Grid1D, intervals: usize) -> Result<Trajectory, CliError> {
    let dt = 1.0 / intervals as f64;
    let frames = (0..=intervals)
        .map(|k| {
            let a = C64::new(1.0, 4.0 * k as f64 * dt);
            Field1D::from_fn(g, |x| (-(x * x) / a).exp() / a.sqrt())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trajectory::new(dt, frames)?)
}

fn convexity(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params();
    let g = grid1(cfg.axis(0)?)?;
    let gamma = p.req_f64("gamma")?;
    let amp = p.f64_or("potential_amplitude", 0.0)?;
    let default_kind = if cfg.m == 1 && amp == 0.0 { "closed-form" } else { "damped" };
    let (traj, v_inf) = match p.str_or("trajectory", default_kind)? {
        "closed-form" => {
            if cfg.m != 1 || amp != 0.0 {
                return Err(CliError::Config("the closed-form trajectory needs m = 1 and no potential".into()));
            }
            (gaussian_frames(g, p.usize_or("intervals", 64)?)?, p.f64_or("v_inf", 0.0)?)
        }
        "damped" => {
            let u0 = Field1D::from_real_fn(g, |x| (-x * x).exp())?;
            let v = Potential::from_fn(g, |x| amp * (-x * x).exp())?;
            let split = Splitting { potential: &v, dt: p.f64_or("dt", 1.0 / 256.0)? };
            let traj = analytic_trajectory(&u0, p.f64_or("eps", 0.5)?, cfg.m, Some(split), p.usize_or("intervals", 32)?)?;
            (traj, p.f64_or("v_inf", v.sup_norm())?)
        }
        other => return Err(CliError::Config(format!("`trajectory` must be closed-form or damped, got `{other}`"))),
    };
    let r = convexity_check(&traj, &WeightParams::new(cfg.m, gamma)?, v_inf)?;
    let series = Series {
        header: vec!["t", "log_weighted_energy", "g"],
        rows: (0..r.times.len()).map(|k| vec![r.times[k], r.log_weighted_energy[k], r.g[k]]).collect(),
    };
    Ok(Builder::new()
        .result("fitted_log_c", r.fitted_log_c)
        .result("max_violation", r.max_violation)
        .result("v_inf", v_inf)
        .at_most("fitted_log_c", p.f64_or("tolerance", if cfg.m == 1 { 0.05 } else { 0.1 })?)
        .finish("fitted_log_c", series))
}

fn subordination(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params();
    let p_dec = p.f64_or("p_dec", decay_exponent(cfg.m))?;
    let xs = p.list("xs")?.unwrap_or_else(|| (0..=8).map(f64::from).collect());
    let r = subordination_check(p_dec, &xs)?;
    let series = Series { header: vec!["x", "ratio"], rows: xs.iter().zip(&r.ratios).map(|(x, v)| vec![*x, *v]).collect() };
    Ok(Builder::new()
        .result("band_width", r.band_width)
        .result("min_ratio", r.min_ratio)
        .result("max_ratio", r.max_ratio)
        .at_most("band_width", p.f64_or("tolerance", 3.0)?)
        .finish("band_width", series))
}

fn theta_transfer(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params();
    let g = grid1(cfg.axis(0)?)?;
    let gamma = p.req_f64("gamma")?;
    let data = p.str_or("data", if cfg.m == 1 { "gaussian" } else { "quartic" })?;
    let f = match data {
        "gaussian" => Field1D::from_real_fn(g, |x| (-x * x).exp())?,
        "quartic" => Field1D::from_real_fn(g, |x| (-x.powi(4) / 8.0).exp())?,
        other => return Err(CliError::Config(format!("`data` must be gaussian or quartic, got `{other}`"))),
    };
    let a_values = p.list("a_values")?.unwrap_or(vec![0.25, 0.5, 1.0]);
    let b_values = p.list("b_values")?.unwrap_or(vec![0.0, 1.0, 4.0]);
    let pairs: Vec<(f64, f64)> = a_values.iter().flat_map(|&a| b_values.iter().map(move |&b| (a, b))).collect();
    let r = smoothing_weight_transfer_check(&f, gamma, cfg.m, &pairs)?;
    let series = Series {
        header: vec!["a", "b", "theta", "ratio", "shell_fraction"],
        rows: r.samples.iter().map(|s| vec![s.a, s.b, s.theta, s.ratio, s.shell_fraction]).collect(),
    };
    Ok(Builder::new()
        .result("n2", r.n2)
        .result("spread", r.spread)
        .result("min_ratio", r.min_ratio)
        .result("max_ratio", r.max_ratio)
        .at_most("spread", p.f64_or("tolerance", 100.0)?)
        .finish("spread", series))
}

fn treves(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params();
    let spec = cfg.axis(0)?;
    let coeffs = p.req_list("p_coeffs")?;
    let q = QuadraticWeight::new(p.f64_or("a", 0.1)?, p.f64_or("b", 0.1)?, p.f64_or("c", 0.0)?)?;
    let data = p.str_or("data", "bump")?.to_string();
    let width = p.f64_or("width", 0.3)?;
    let sample = |n: usize| -> Result<Field1D, CliError> {
        let g = Grid1D::new(spec.0, n)?;
        Ok(match data.as_str() {
            "bump" => Field1D::from_real_fn(g, |x| bump(x / width) * (2.0 * x).cos())?,
            "gaussian" => Field1D::from_real_fn(g, |x| (-x * x).exp())?,
            other => return Err(CliError::Config(format!("`data` must be bump or gaussian, got `{other}`"))),
        })
    };
    let r = treves_check(&sample(spec.1)?, &q, &coeffs)?;
    let series = Series {
        header: vec!["k", "term"],
        rows: r.terms.iter().enumerate().map(|(k, t)| vec![k as f64, *t]).collect(),
    };
    let mut b = Builder::new();
    b.result("defect", r.defect).result("lhs", r.lhs).result("rhs", r.rhs);
    b.at_most("defect", p.f64_or("tolerance", 1e-6)?);
    if p.bool_or("refine", true)? {
        let fine = treves_check(&sample(2 * spec.1)?, &q, &coeffs)?;
        b.result("defect_refined", fine.defect).result("shrink", r.defect / fine.defect);
        b.at_least("shrink", p.f64_or("shrink", 4.0)?);
    }
    Ok(b.finish("defect", series))
}

fn carleman(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params();
    let grid = Grid2D::new(grid1(cfg.axis(0)?)?, grid1(cfg.axis(1)?)?);
    let gammas = p.list("gammas")?.unwrap_or(vec![4.0, 8.0, 16.0, 32.0]);
    let w = CarlemanWeight::standard(p.f64_or("r", 8.0)?, cfg.m)?;
    let v = bump_family(grid)?;
    let r = carleman_l2_check(CarlemanInput::Conjugated(&v), &w, &gammas)?;
    let series =
        Series { header: vec!["gamma", "ratio"], rows: r.rows.iter().map(|row| vec![row.gamma, row.ratio]).collect() };
    let mut b = Builder::new();
    b.result("min_ratio", r.min_ratio).result("spread", r.spread).flag("non_decreasing", r.non_decreasing).flag("skipped", r.skipped);
    if !r.skipped {
        b.pass &= r.min_ratio > 0.0;
        // regression floor, e.g. a previously recorded min_ratio
        if let Some(floor) = p.f64("floor")? {
            b.at_least("min_ratio", floor);
        }
        b.at_most("spread", p.f64_or("tolerance", 10.0)?);
    }
    Ok(b.finish("min_ratio", series))
}

fn extra(cfg: &ExperimentConfig) -> Result<ExtraMembers, CliError> {
    Ok(ExtraMembers { count: cfg.params().usize_or("extra_members", 0)?, seed: cfg.seed })
}

fn uniformity_outcome(
    key: &'static str,
    values: &[f64],
    ratios: &[f64],
    spread: f64,
    tol: f64,
) -> Outcome {
    let series = Series { header: vec![key, "ratio"], rows: values.iter().zip(ratios).map(|(v, r)| vec![*v, *r]).collect() };
    let mut b = Builder::new();
    b.result("min_ratio", ratios.iter().copied().fold(f64::INFINITY, f64::min))
        .result("max_ratio", ratios.iter().copied().fold(0.0, f64::max))
        .result("spread", spread);
    if let [single] = ratios {
        b.result("ratio", *single);
        return b.finish("ratio", series);
    }
    b.at_most("spread", tol).finish("spread", series)
}

fn multiplier(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params();
    let bs = match p.f64("b")? {
        Some(b) => vec![b],
        None => p.list("b_values")?.unwrap_or_else(b_sweep),
    };
    let r = multiplier_uniformity(cfg.m, &bs, p.usize_or("n", 512)?, extra(cfg)?)?;
    Ok(uniformity_outcome("b", &r.values, &r.ratios, r.spread, p.f64_or("tolerance", 100.0)?))
}

/// `+-10^k`, `k = -2..=2`.
fn default_im_z() -> Vec<f64> {
    (-2..=2).flat_map(|k| [10f64.powi(k), -(10f64.powi(k))]).collect()
}

fn frozen(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params();
    let betas = match p.f64("im_z")? {
        Some(b) => vec![b],
        None => p.list("im_z_values")?.unwrap_or_else(default_im_z),
    };
    let r = frozen_uniformity(cfg.m, &betas, p.usize_or("n", 512)?, extra(cfg)?)?;
    Ok(uniformity_outcome("im_z", &r.values, &r.ratios, r.spread, p.f64_or("tolerance", 100.0)?))
}

fn log_range(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if !(lo > 0.0 && hi > lo) || points < 2 {
        return Err(CliError::Config(format!("need 0 < s_min < s_max and points >= 2, got ({lo}, {hi}, {points})")));
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..points).map(|k| 10f64.powf(a + (b - a) * k as f64 / (points - 1) as f64)).collect())
}

fn s_range(cfg: &ExperimentConfig, defaults: &[(u32, f64, f64)]) -> Result<Vec<f64>, CliError> {
    let p = cfg.params();
    let fallback = defaults.iter().find(|d| d.0 == cfg.m);
    let lo = match (p.f64("s_min")?, fallback) {
        (Some(v), _) => v,
        (None, Some(d)) => d.1,
        (None, None) => p.req_f64("s_min")?,
    };
    let hi = match (p.f64("s_max")?, fallback) {
        (Some(v), _) => v,
        (None, Some(d)) => d.2,
        (None, None) => p.req_f64("s_max")?,
    };
    log_range(lo, hi, p.usize_or("points", 9)?)
}

fn vdc(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params();
    let s = s_range(cfg, &[(1, 1e-2, 1.0), (2, 1e-7, 1e-5), (3, 1e-10, 1e-8)])?;
    let r = vdc_decay(cfg.m, p.f64_or("x", 0.0)?, &s)?;
    let expected = -0.5 / cfg.m as f64;
    let series = Series { header: vec!["s", "magnitude"], rows: s.iter().zip(&r.magnitudes).map(|(a, b)| vec![*a, *b]).collect() };
    Ok(Builder::new()
        .result("slope", r.fit.slope)
        .result("expected_slope", expected)
        .result("relative_error", (r.fit.slope - expected).abs() / expected.abs())
        .result("r_squared", r.fit.r_squared)
        .at_most("relative_error", p.f64_or("tolerance", if cfg.m == 1 { 0.01 } else { 0.03 })?)
        .finish("slope", series))
}

fn dispersive(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.params();
    let s = s_range(cfg, &[(1, 1e-2, 1.0), (2, 1e-6, 1e-4)])?;
    let r = dispersive_decay(cfg.m, &s, p.usize_or("n", 4096)?)?;
    let series = Series { header: vec!["s", "ratio"], rows: s.iter().zip(&r.ratios).map(|(a, b)| vec![*a, *b]).collect() };
    Ok(Builder::new()
        .result("slope", r.fit.slope)
        .result("predicted_slope", predicted_dispersive_slope(cfg.m))
        .result("relative_error", r.relative_error())
        .at_most("relative_error", p.f64_or("tolerance", 0.1)?)
        .finish("slope", series))
}
