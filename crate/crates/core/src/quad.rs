//! Composite Gauss-Legendre quadrature for real and complex integrands.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::C64;

#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(order.max(1)).unwrap());
        let (nodes, weights) = rule.as_node_weight_pairs().iter().copied().unzip();
        GaussRule { nodes, weights }
    }

    /// Integrates `f` over `[a, b]` split into `panels` equal pieces.
    pub fn integrate(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += w * f(mid + 0.5 * h * x);
            }
        }
        0.5 * h * acc
    }

    pub fn integrate_complex(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: impl FnMut(f64) -> C64,
    ) -> C64 {
        let h = (b - a) / panels as f64;
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += f(mid + 0.5 * h * x) * *w;
            }
        }
        acc * (0.5 * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let r = GaussRule::new(5);
        let v = r.integrate(-1.0, 2.0, 1, |x| x.powi(9) - 3.0 * x.powi(4));
        let exact = (2f64.powi(10) - 1.0) / 10.0 - 3.0 * (2f64.powi(5) + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn oscillatory_complex() {
        let r = GaussRule::new(20);
        let v = r.integrate_complex(0.0, 10.0, 40, |x| C64::from_polar(1.0, 3.0 * x));
        let exact = (C64::from_polar(1.0, 30.0) - 1.0) / C64::new(0.0, 3.0);
        assert!((v - exact).norm() < 1e-13);
    }
}
