//! Gauss–Hermite quadrature adapted to the probability weight
//! `rho_d(y) = e^{-|y|^2/4} / (4 pi)^{d/2}` and the spectral decomposition of
//! functions against the `h_m` basis.
//!
//! Standard Gauss–Hermite nodes/weights `(x_i, w_i)` for `e^{-x^2}` come from
//! the Golub–Welsch eigenproblem; the substitution `y = 2x` turns them into a
//! rule for `rho_1` with total mass exactly 1.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{CoreError, Result};
use crate::poly::hermite_eval_upto;

/// Quadrature rule for `rho_d`, with the `h_m(node)` table cached up to a
/// mode cap. `dim` only rescales the total mass; all projections are 1-D.
#[derive(Clone, Debug)]
pub struct GaussianWeight {
    pub dim: usize,
    pub order: usize,
    m_max: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `herm[m][i] = h_m(nodes[i])`
    herm: Vec<Vec<f64>>,
    /// `2^m m!` as f64
    norms: Vec<f64>,
}

/// Spectral content of a function of one variable in `L^2_{rho_1}`:
/// the first seven coefficients `q_m = <f, h_m> / (2^m m!)`, the norm of the
/// orthogonal remainder `P_- f` (all modes >= 7, by Parseval subtraction),
/// and optionally the tracked tail coefficients for modes `7..=m_max`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpectralDecomp {
    pub q_low: [f64; 7],
    pub q_minus_norm: f64,
    pub tail: Option<Vec<f64>>,
}

impl SpectralDecomp {
    /// Coefficient of mode `m`, when tracked.
    pub fn coeff(&self, m: usize) -> Option<f64> {
        if m < 7 {
            Some(self.q_low[m])
        } else {
            self.tail.as_ref().and_then(|t| t.get(m - 7).copied())
        }
    }

    /// `Σ_{m<=6} q_m^2 2^m m! + ‖q_-‖^2`.
    pub fn norm_sq(&self) -> f64 {
        let mut acc = self.q_minus_norm * self.q_minus_norm;
        for (m, q) in self.q_low.iter().enumerate() {
            acc += q * q * norm_sq_f64(m);
        }
        acc
    }

    /// Diagonal semigroup action of `e^{ds L}`: mode `m` picks up
    /// `e^{(1 - m/2) ds}`. The untracked remainder beyond the tail is scaled
    /// at the slowest rate it can contain (first untracked mode).
    pub fn semigroup_step(&self, ds: f64) -> SpectralDecomp {
        let rate = |m: usize| ((1.0 - m as f64 / 2.0) * ds).exp();
        let mut q_low = self.q_low;
        for (m, q) in q_low.iter_mut().enumerate() {
            *q *= rate(m);
        }
        let tail = self.tail.as_ref().map(|t| {
            t.iter()
                .enumerate()
                .map(|(j, q)| q * rate(7 + j))
                .collect::<Vec<_>>()
        });
        let tracked_sq: f64 = self.tail.as_ref().map_or(0.0, |t| {
            t.iter()
                .enumerate()
                .map(|(j, q)| q * q * norm_sq_f64(7 + j))
                .sum()
        });
        let beyond_sq = (self.q_minus_norm * self.q_minus_norm - tracked_sq).max(0.0);
        let first_untracked = 7 + self.tail.as_ref().map_or(0, Vec::len);
        let evolved_tracked_sq: f64 = tail.as_ref().map_or(0.0, |t| {
            t.iter()
                .enumerate()
                .map(|(j, q)| q * q * norm_sq_f64(7 + j))
                .sum()
        });
        let evolved_beyond = beyond_sq.sqrt() * rate(first_untracked);
        let q_minus_norm = (evolved_tracked_sq + evolved_beyond * evolved_beyond).sqrt();
        SpectralDecomp {
            q_low,
            q_minus_norm,
            tail,
        }
    }
}

pub fn norm_sq_f64(m: usize) -> f64 {
    let mut acc = 1.0;
    for k in 1..=m {
        acc *= 2.0 * k as f64;
    }
    acc
}

impl GaussianWeight {
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        Self::with_mode_cap(dim, order, 16)
    }

    pub fn with_mode_cap(dim: usize, order: usize, m_max: usize) -> Result<Self> {
        if dim == 0 {
            return Err(CoreError::Parameter("weight dimension must be >= 1".into()));
        }
        if order < 2 {
            return Err(CoreError::Parameter("quadrature order must be >= 2".into()));
        }
        let (x, w) = golub_welsch(order);
        let nodes: Vec<f64> = x.iter().map(|&xi| 2.0 * xi).collect();
        // w_i already sum to sqrt(pi); the substitution divides by sqrt(pi).
        let total: f64 = w.iter().sum();
        let weights: Vec<f64> = w.iter().map(|&wi| wi / total).collect();
        let mut herm = vec![vec![0.0; nodes.len()]; m_max + 1];
        let mut buf = vec![0.0; m_max + 1];
        for (i, &y) in nodes.iter().enumerate() {
            hermite_eval_upto(m_max, y, &mut buf);
            for (m, row) in herm.iter_mut().enumerate() {
                row[i] = buf[m];
            }
        }
        let norms = (0..=m_max).map(norm_sq_f64).collect();
        Ok(Self {
            dim,
            order,
            m_max,
            nodes,
            weights,
            herm,
            norms,
        })
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total mass `∫ rho_d` computed by the tensorised rule: equals
    /// `(Σ w_i)^dim`, which is 1 to machine precision.
    pub fn weight_mass(&self) -> f64 {
        let one_dim: f64 = self.weights.iter().sum();
        one_dim.powi(self.dim as i32)
    }

    /// `∫ f(y) rho_1(y) dy`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * f(y))
            .sum()
    }

    /// `<f, g>_{L^2_{rho_1}}`, rejecting non-finite samples.
    pub fn inner_product<F, G>(&self, f: F, g: G) -> Result<f64>
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let mut acc = 0.0;
        for (&y, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(y) * g(y);
            if !v.is_finite() {
                return Err(CoreError::NonFinite {
                    context: format!("inner_product integrand at y = {y}"),
                });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Samples of `f` at the quadrature nodes.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|&y| f(y)).collect()
    }

    /// Project a function given by its node samples. `with_tail` also records
    /// coefficients for modes `7..=m_max`. `q_minus_norm` comes from Parseval
    /// subtraction of the first seven modes only, so it covers all of
    /// `P_- f` whether or not the tail is tracked.
    pub fn project_samples(&self, values: &[f64], with_tail: bool) -> Result<SpectralDecomp> {
        assert_eq!(values.len(), self.nodes.len());
        for (&v, &y) in values.iter().zip(&self.nodes) {
            if !v.is_finite() {
                return Err(CoreError::NonFinite {
                    context: format!("projection sample at y = {y}"),
                });
            }
        }
        let coeff = |m: usize| -> f64 {
            let mut acc = 0.0;
            for i in 0..values.len() {
                acc += self.weights[i] * values[i] * self.herm[m][i];
            }
            acc / self.norms[m]
        };
        let mut q_low = [0.0; 7];
        for (m, q) in q_low.iter_mut().enumerate() {
            *q = coeff(m);
        }
        let norm_sq: f64 = values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * v * v)
            .sum();
        let low_sq: f64 = q_low
            .iter()
            .enumerate()
            .map(|(m, q)| q * q * self.norms[m])
            .sum();
        let radicand = norm_sq - low_sq;
        if radicand < -1e-8 * norm_sq.max(1e-300) {
            return Err(CoreError::QuadratureInconsistency { radicand, norm_sq });
        }
        let q_minus_norm = radicand.max(0.0).sqrt();
        let tail = with_tail.then(|| (7..=self.m_max).map(coeff).collect());
        Ok(SpectralDecomp {
            q_low,
            q_minus_norm,
            tail,
        })
    }

    pub fn project_fn<F: Fn(f64) -> f64>(&self, f: F, with_tail: bool) -> Result<SpectralDecomp> {
        let values = self.sample(f);
        self.project_samples(&values, with_tail)
    }

    /// Projection plus a pointwise-remainder norm: `‖f - Σ_{m<=6} q_m h_m‖`.
    /// The subtraction happens inside the integrand, which keeps the small
    /// remainder accurate when `f` is dominated by the low modes.
    pub fn project_with_remainder<F: Fn(f64) -> f64>(&self, f: F) -> Result<(SpectralDecomp, f64)> {
        let values = self.sample(&f);
        let decomp = self.project_samples(&values, false)?;
        let mut acc = 0.0;
        for i in 0..values.len() {
            let mut r = values[i];
            for m in 0..7 {
                r -= decomp.q_low[m] * self.herm[m][i];
            }
            acc += self.weights[i] * r * r;
        }
        Ok((decomp, acc.sqrt()))
    }
}

/// Nodes and weights for `∫ f(x) e^{-x^2} dx`: Golub–Welsch eigenvalues of
/// the symmetric Jacobi matrix (off-diagonal `sqrt(k/2)`) polished by Newton
/// iteration on the orthonormal Hermite recurrence, with the closed-form
/// weights `w_i = sqrt(pi) / (n * htilde_{n-1}(x_i)^2)` (so that
/// `Σ w_i = sqrt(pi)` exactly up to rounding).
fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));

    // orthonormal Hermite values (htilde_{n-1}, htilde_n) at x
    let eval = |x: f64| -> (f64, f64) {
        let mut prev = std::f64::consts::PI.powf(-0.25);
        let mut cur = std::f64::consts::SQRT_2 * x * prev;
        for k in 1..n {
            let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * cur
                - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
        }
        (prev, cur)
    };
    let sqrt2n = (2.0 * n as f64).sqrt();
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (hm1, h) = eval(*x);
            let deriv = sqrt2n * hm1;
            if deriv != 0.0 {
                *x -= h / deriv;
            }
        }
        let (hm1, _) = eval(*x);
        weights.push(1.0 / (n as f64 * hm1 * hm1));
    }
    let _ = sqrt_pi;
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::hermite_eval_f64;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn quad() -> GaussianWeight {
        GaussianWeight::new(1, 64).unwrap()
    }

    #[test]
    fn weight_integrates_to_one() {
        let q = quad();
        assert_relative_eq!(q.weight_mass(), 1.0, max_relative = 1e-12);
        let q3 = GaussianWeight::new(3, 40).unwrap();
        assert_relative_eq!(q3.weight_mass(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn orthogonality_table() {
        // |<h_m, h_n> - 2^n n! delta| <= 1e-9 relative to the natural scale
        // of the pairing, sqrt(2^m m! 2^n n!)
        let q = GaussianWeight::with_mode_cap(1, 64, 16).unwrap();
        for m in 0..=12usize {
            for n in 0..=12usize {
                let v = q
                    .inner_product(|y| hermite_eval_f64(m, y), |y| hermite_eval_f64(n, y))
                    .unwrap();
                let expect = if m == n { norm_sq_f64(n) } else { 0.0 };
                let scale = (norm_sq_f64(m) * norm_sq_f64(n)).sqrt();
                assert!(
                    (v - expect).abs() <= 1e-9 * scale,
                    "({m},{n}): {v} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn inner_product_examples() {
        let q = quad();
        let h3 = |y: f64| hermite_eval_f64(3, y);
        assert_relative_eq!(q.inner_product(h3, h3).unwrap(), 48.0, max_relative = 1e-12);
        let h1 = |y: f64| y;
        let h4 = |y: f64| hermite_eval_f64(4, y);
        assert!(q.inner_product(h1, h4).unwrap().abs() < 1e-12);
        // second moment of rho_1 is 2
        assert_relative_eq!(
            q.inner_product(|y| y * y, |_| 1.0).unwrap(),
            2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn non_finite_samples_are_rejected() {
        let q = quad();
        let err = q.inner_product(|y| 1.0 / (y - y), |_| 1.0).unwrap_err();
        assert!(matches!(err, CoreError::NonFinite { .. }));
    }

    #[test]
    fn projection_of_basis_and_monomial() {
        let q = quad();
        let d = q.project_fn(|y| hermite_eval_f64(4, y), false).unwrap();
        for (m, &c) in d.q_low.iter().enumerate() {
            let expect = if m == 4 { 1.0 } else { 0.0 };
            assert!((c - expect).abs() < 1e-12, "mode {m}: {c}");
        }
        assert!(d.q_minus_norm < 1e-9);

        let d = q.project_fn(|y| y.powi(4), false).unwrap();
        assert_relative_eq!(d.q_low[0], 12.0, max_relative = 1e-12);
        assert_relative_eq!(d.q_low[2], 12.0, max_relative = 1e-12);
        assert_relative_eq!(d.q_low[4], 1.0, max_relative = 1e-12);
        assert!(d.q_low[1].abs() < 1e-12 && d.q_low[3].abs() < 1e-12);
    }

    #[test]
    fn semigroup_examples_and_composition() {
        let q = quad();
        let d = q.project_fn(|y| 1.0 + hermite_eval_f64(6, y), true).unwrap();
        let same = d.semigroup_step(0.0);
        assert_relative_eq!(same.q_low[0], d.q_low[0], max_relative = 1e-14);
        assert_relative_eq!(same.q_low[6], d.q_low[6], max_relative = 1e-14);

        let step = d.semigroup_step(1.0);
        assert_relative_eq!(step.q_low[0], 1.0f64.exp(), max_relative = 1e-12);
        let step2 = d.semigroup_step(2.0);
        assert_relative_eq!(step2.q_low[6], (-4.0f64).exp(), max_relative = 1e-12);

        let ab = d.semigroup_step(0.7).semigroup_step(0.9);
        let once = d.semigroup_step(1.6);
        for m in 0..7 {
            assert_relative_eq!(ab.q_low[m], once.q_low[m], max_relative = 1e-13);
        }
        assert_relative_eq!(ab.q_minus_norm, once.q_minus_norm, max_relative = 1e-12);
    }

    #[test]
    fn pointwise_remainder_matches_parseval_on_smooth_input() {
        let q = quad();
        let f = |y: f64| hermite_eval_f64(2, y) + 0.01 * hermite_eval_f64(8, y);
        let (d, rem) = q.project_with_remainder(f).unwrap();
        let expect = 0.01 * norm_sq_f64(8).sqrt();
        assert_relative_eq!(rem, expect, max_relative = 1e-10);
        assert_relative_eq!(d.q_minus_norm, expect, max_relative = 1e-6);
    }

    proptest! {
        // Parseval split on random low-degree polynomials.
        #[test]
        fn parseval_split(coeffs in proptest::collection::vec(-5.0f64..5.0, 1..=11)) {
            let q = quad();
            let f = |y: f64| {
                let mut acc = 0.0;
                for c in coeffs.iter().rev() { acc = acc * y + c; }
                acc
            };
            let norm_sq = q.inner_product(&f, &f).unwrap();
            let d = q.project_fn(&f, false).unwrap();
            prop_assert!((d.norm_sq() - norm_sq).abs() <= 1e-9 * norm_sq.max(1e-12));
        }
    }
}
