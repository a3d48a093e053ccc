//! The Carleman multiplier `M_b(tau, xi) = 1/(tau + (xi + i)^{2m} + i b)`.
//!
//! Splitting `(xi + i)^{2m} + i b = P(xi) + i Q_b(xi)` separates the real
//! dispersion relation from the damping. The real parts of the roots of `Q_b`
//! organise a dyadic partition of the `xi` line; [`norms`] measures empirical
//! `L^p -> L^p'` ratios of the multiplier and its pieces, and [`oscillatory`]
//! covers the van der Corput decay and the dispersive interpolation bound.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::C64;

pub mod norms;
pub mod oscillatory;

pub use norms::{
    apply_mb, b_sweep, empirical_pq_norm, frozen_resolvent_norm, frozen_uniformity, multiplier_uniformity,
    random_packets, standard_ensemble, uniformity_grid, ExtraMembers, UniformityReport,
};
pub use oscillatory::{
    dispersive_decay, dispersive_ensemble, dispersive_norm, predicted_dispersive_slope, vdc_decay, vdc_integral,
    DispersiveReport, VdcReport,
};

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn horner(coeffs: &[f64], z: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierParams {
    pub m: u32,
    pub b: f64,
    /// `(4m+2)/(4m+1)`.
    pub p_leb: f64,
    /// `4m+2`, the dual index.
    pub pprime_leb: f64,
    /// Ascending coefficients of `P`, degree `2m`.
    pub p_coeffs: Vec<f64>,
    /// Ascending coefficients of `Q_b`, degree `2m - 1`.
    pub qb_coeffs: Vec<f64>,
}

/// Expands `(xi + i)^{2m}` and adds `i b` to the constant slot of `Q_b`.
pub fn pq_split(m: u32, b: f64) -> Result<MultiplierParams> {
    if m == 0 {
        return Err(invalid!("m must be a positive integer"));
    }
    if !b.is_finite() {
        return Err(invalid!("b must be finite, got {b}"));
    }
    let two_m = 2 * m;
    let mut p = vec![0.0; two_m as usize + 1];
    let mut q = vec![0.0; two_m as usize];
    for k in 0..=two_m {
        // C(2m, k) xi^k i^{2m-k}
        let c = binomial(two_m, k);
        match (two_m - k) % 4 {
            0 => p[k as usize] = c,
            1 => q[k as usize] = c,
            2 => p[k as usize] = -c,
            _ => q[k as usize] = -c,
        }
    }
    q[0] += b;
    Ok(MultiplierParams {
        m,
        b,
        p_leb: (4 * m + 2) as f64 / (4 * m + 1) as f64,
        pprime_leb: (4 * m + 2) as f64,
        p_coeffs: p,
        qb_coeffs: q,
    })
}

impl MultiplierParams {
    pub fn p(&self, xi: f64) -> f64 {
        self.p_coeffs.iter().rev().fold(0.0, |acc, c| acc * xi + c)
    }

    pub fn qb(&self, xi: f64) -> f64 {
        self.qb_coeffs.iter().rev().fold(0.0, |acc, c| acc * xi + c)
    }

    /// `tau + P(xi) + i Q_b(xi)`.
    pub fn denominator(&self, tau: f64, xi: f64) -> C64 {
        C64::new(tau + self.p(xi), self.qb(xi))
    }

    pub fn qb_at(&self, z: C64) -> C64 {
        horner(&self.qb_coeffs, z)
    }

    pub fn p_at(&self, z: C64) -> C64 {
        horner(&self.p_coeffs, z)
    }
}

/// Which dyadic piece a [`Cutoff`] is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffKind {
    /// `chi_0`, the block spanning every root.
    Center,
    /// `chi_k^+`, right of the largest root; `k >= 1`.
    Plus(u32),
    /// `chi_k^-`, left of the smallest root.
    Minus(u32),
    /// Everything right of the last `Plus` piece.
    PlusTail,
    MinusTail,
    /// `chi_{0,nu}`, the part of `chi_0` closest to root `nu` (1-based).
    CenterNu(usize),
    /// `chi_{0,nu,k}^+`, `k <= -1`.
    CenterPlus { nu: usize, k: i32 },
    CenterMinus { nu: usize, k: i32 },
    /// The dyadic remainder `chi_{0,nu}` keeps around `a_nu` below the
    /// deepest listed level.
    Core(usize),
}

/// Indicator of the half-open interval `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub kind: CutoffKind,
    pub lo: f64,
    pub hi: f64,
}

impl Cutoff {
    pub fn contains(&self, xi: f64) -> bool {
        self.lo < xi && xi <= self.hi
    }

    pub fn indicator(&self, xi: f64) -> f64 {
        if self.contains(xi) {
            1.0
        } else {
            0.0
        }
    }
}

/// Dyadic levels listed on each side before the tail or core piece takes over.
pub const DYADIC_DEPTH: i32 = 48;

#[derive(Debug, Clone, PartialEq)]
pub struct RootDecomposition {
    pub roots: Vec<C64>,
    /// Real parts in increasing order; near-equal values are snapped together.
    pub a_sorted: Vec<f64>,
    /// `chi_0` and the outer pieces `chi_k^±`.
    pub outer: Vec<Cutoff>,
    /// `chi_{0,nu}` for each root; empty intervals are left out.
    pub centers: Vec<Cutoff>,
    /// The fine partition: outer pieces without `chi_0`, plus the dyadic
    /// pieces of every `chi_{0,nu}`. Every real `xi` lies in exactly one.
    pub cutoffs: Vec<Cutoff>,
}

impl RootDecomposition {
    pub fn center(&self) -> &Cutoff {
        &self.outer[0]
    }

    /// The piece `chi_k^+` of the outer partition, `k >= 1`.
    pub fn plus(&self, k: u32) -> Option<&Cutoff> {
        self.outer.iter().find(|c| c.kind == CutoffKind::Plus(k))
    }

    pub fn minus(&self, k: u32) -> Option<&Cutoff> {
        self.outer.iter().find(|c| c.kind == CutoffKind::Minus(k))
    }

    /// All fine pieces containing `xi`; a partition returns exactly one.
    pub fn classify(&self, xi: f64) -> Vec<&Cutoff> {
        self.cutoffs.iter().filter(|c| c.contains(xi)).collect()
    }
}

const ROOT_RESIDUAL: f64 = 1e-8;
const SNAP: f64 = 1e-10;

/// Roots of `Q_b` from the companion matrix, polished by Newton, and the
/// dyadic cutoffs built from their real parts.
pub fn qb_roots(params: &MultiplierParams) -> Result<RootDecomposition> {
    let q = &params.qb_coeffs;
    if q.iter().any(|c| !c.is_finite()) {
        return Err(invalid!("Q_b coefficients must be finite"));
    }
    let deg = q.len() - 1;
    let lead = q[deg];
    let raw: Vec<C64> = if deg == 1 {
        vec![C64::new(-q[0] / q[1], 0.0)]
    } else {
        let mut comp = DMatrix::<f64>::zeros(deg, deg);
        for i in 1..deg {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..deg {
            comp[(i, deg - 1)] = -q[i] / lead;
        }
        comp.complex_eigenvalues().iter().copied().collect()
    };
    let dq: Vec<f64> = q.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
    let mut roots = Vec::with_capacity(deg);
    for r0 in raw {
        let mut r = r0;
        for _ in 0..8 {
            let d = horner(&dq, r);
            if d.norm() == 0.0 {
                break;
            }
            let step = horner(q, r) / d;
            r -= step;
            if step.norm() <= 1e-16 * (1.0 + r.norm()) {
                break;
            }
        }
        let residual = horner(q, r).norm();
        let bound = ROOT_RESIDUAL * (1.0 + r.norm()).powi(deg as i32);
        if !(residual <= bound) {
            let cond = horner(&dq, r).norm();
            return Err(Error::NonConvergence(format!(
                "root {r} of Q_b has residual {residual:.3e} > {bound:.3e} (|Q_b'| there is {cond:.3e})"
            )));
        }
        roots.push(r);
    }
    roots.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let scale = roots.iter().fold(1.0f64, |s, r| s.max(r.norm()));
    let mut a: Vec<f64> = roots.iter().map(|r| r.re).collect();
    for j in 1..a.len() {
        if a[j] - a[j - 1] < SNAP * scale {
            a[j] = a[j - 1];
        }
    }
    let (outer, centers, cutoffs) = build_cutoffs(&a);
    Ok(RootDecomposition { roots, a_sorted: a, outer, centers, cutoffs })
}

// A zero root leaves the dilation scale |a| degenerate; unit scale keeps the
// pieces non-empty.
fn dilation_scale(a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else {
        a.abs()
    }
}

fn build_cutoffs(a: &[f64]) -> (Vec<Cutoff>, Vec<Cutoff>, Vec<Cutoff>) {
    let (a1, an) = (a[0], a[a.len() - 1]);
    let (s_minus, s_plus) = (dilation_scale(a1), dilation_scale(an));
    let left = a1 - 0.5 * s_minus;
    let right = an + 0.5 * s_plus;
    let mut outer = vec![Cutoff { kind: CutoffKind::Center, lo: left, hi: right }];
    // chi_k^+ = (an + 2^{k-2} s, an + 2^{k-1} s]
    let mut lo = right;
    for k in 1..=DYADIC_DEPTH as u32 {
        let hi = an + 2f64.powi(k as i32 - 1) * s_plus;
        outer.push(Cutoff { kind: CutoffKind::Plus(k), lo, hi });
        lo = hi;
    }
    outer.push(Cutoff { kind: CutoffKind::PlusTail, lo, hi: f64::INFINITY });
    let mut hi = left;
    for k in 1..=DYADIC_DEPTH as u32 {
        let lo = a1 - 2f64.powi(k as i32 - 1) * s_minus;
        outer.push(Cutoff { kind: CutoffKind::Minus(k), lo, hi });
        hi = lo;
    }
    outer.push(Cutoff { kind: CutoffKind::MinusTail, lo: f64::NEG_INFINITY, hi });

    // midpoints between consecutive roots, with the outer ends of chi_0
    let mut mids = vec![left];
    mids.extend(a.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    mids.push(right);
    let mut centers = Vec::new();
    let mut cutoffs: Vec<Cutoff> = outer[1..].to_vec();
    for (j, &av) in a.iter().enumerate() {
        let nu = j + 1;
        let (lo, hi) = (mids[j], mids[j + 1]);
        if lo >= hi {
            continue;
        }
        centers.push(Cutoff { kind: CutoffKind::CenterNu(nu), lo, hi });
        // dp, dm are half the gaps to the neighbouring roots, so the piece
        // (a + 2^{k-1} D, a + 2^k D] over the full gap D is (a + 2^k dp, a + 2^{k+1} dp]
        let (dp, dm) = (hi - av, av - lo);
        let mut core_hi = av;
        if dp > 0.0 {
            let mut top = hi;
            for k in (-DYADIC_DEPTH..=-1).rev() {
                let bottom = av + 2f64.powi(k) * dp;
                cutoffs.push(Cutoff { kind: CutoffKind::CenterPlus { nu, k }, lo: bottom, hi: top });
                top = bottom;
            }
            core_hi = top;
        }
        let mut core_lo = av;
        if dm > 0.0 {
            let mut bottom = lo;
            for k in (-DYADIC_DEPTH..=-1).rev() {
                let top = av - 2f64.powi(k) * dm;
                cutoffs.push(Cutoff { kind: CutoffKind::CenterMinus { nu, k }, lo: bottom, hi: top });
                bottom = top;
            }
            core_lo = bottom;
        }
        cutoffs.push(Cutoff { kind: CutoffKind::Core(nu), lo: core_lo, hi: core_hi });
    }
    (outer, centers, cutoffs)
}

/// A `C^2` profile supported in `(1/2, 5/2)` and equal to 1 on `[1, 2]`; the
/// smooth counterpart of the `(1, 2]` indicator.
pub fn phi_plus(s: f64) -> f64 {
    // quintic smoothstep, C^2 at both ends
    let step = |u: f64| {
        let u = u.clamp(0.0, 1.0);
        u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    };
    if s <= 0.5 || s >= 2.5 {
        0.0
    } else if s < 1.0 {
        step(2.0 * (s - 0.5))
    } else if s <= 2.0 {
        1.0
    } else {
        step(2.0 * (2.5 - s))
    }
}
