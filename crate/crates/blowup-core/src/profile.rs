//! Closed-form profiles and structural functions: the corrected profile
//! `phi = (E/D)^{1/(p-1)}` with
//! `E = 1 + e^{-s} P(y)`, `D = (p-1) + ((p-1)^2/kappa) y^4 e^{-s}`,
//! `P(y) = ((p-1)/kappa)(y^4 - h_4(y)) = (12(p-1)/kappa)(y^2 - 1)`,
//! the reduced profile `f`, the final profile `u*`, the heteroclinic orbit
//! `psi`, the smooth cutoffs, the potential `V` and the remainder `R`.
//!
//! All derivatives of `phi` come from logarithmic differentiation of `E/D`;
//! no finite differences on the default path. Note `phi^{p-1} = E/D`
//! exactly, which keeps `V` and `phi^p` free of cancellation.

use crate::error::{CoreError, Result};
use crate::poly::ExactPoly;

/// Physical and numerical parameters of a run. `kappa` is derived.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// nonlinearity exponent, p > 1 with (d-2)p <= d+2
    pub p: f64,
    /// spatial dimension, >= 2
    pub d: usize,
    /// radius of the blow-up sphere
    pub r0: f64,
    /// cutoff scale in (0, 1)
    pub eps0: f64,
    /// shrinking-set / initial-data amplitude, >= 1
    pub a_amp: f64,
    /// regular-region bound in (0, 1]
    pub eta0: f64,
    /// initial log-time
    pub s0: f64,
    /// (p-1)^{-1/(p-1)}
    pub kappa: f64,
}

impl ModelParams {
    pub fn new(
        p: f64,
        d: usize,
        r0: f64,
        eps0: f64,
        a_amp: f64,
        eta0: f64,
        s0: f64,
    ) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(CoreError::Parameter(format!("p must exceed 1, got {p}")));
        }
        if d < 2 {
            return Err(CoreError::Parameter(format!("d must be >= 2, got {d}")));
        }
        if (d as f64 - 2.0) * p > d as f64 + 2.0 {
            return Err(CoreError::Parameter(format!(
                "(d-2)p <= d+2 violated: ({} - 2) * {p} > {} + 2",
                d, d
            )));
        }
        if !(r0 > 0.0) {
            return Err(CoreError::Parameter(format!("r0 must be positive, got {r0}")));
        }
        if !(eps0 > 0.0 && eps0 < 1.0) {
            return Err(CoreError::Parameter(format!(
                "eps0 must lie in (0,1), got {eps0}"
            )));
        }
        if !(a_amp >= 1.0) {
            return Err(CoreError::Parameter(format!("A must be >= 1, got {a_amp}")));
        }
        if !(eta0 > 0.0 && eta0 <= 1.0) {
            return Err(CoreError::Parameter(format!(
                "eta0 must lie in (0,1], got {eta0}"
            )));
        }
        let kappa = kappa_of(p)?;
        Ok(Self {
            p,
            d,
            r0,
            eps0,
            a_amp,
            eta0,
            s0,
            kappa,
        })
    }

    /// p = 2, d = 2 defaults used throughout the examples.
    pub fn standard(p: f64, d: usize) -> Result<Self> {
        Self::new(p, d, 1.0, 0.25, 1.0, 1.0, 10.0)
    }

    pub fn with_amplitude(mut self, a_amp: f64) -> Result<Self> {
        if !(a_amp >= 1.0) {
            return Err(CoreError::Parameter(format!("A must be >= 1, got {a_amp}")));
        }
        self.a_amp = a_amp;
        Ok(self)
    }

    pub fn with_s0(mut self, s0: f64) -> Self {
        self.s0 = s0;
        self
    }
}

/// `kappa = (p-1)^{-1/(p-1)}`.
pub fn kappa_of(p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(CoreError::Parameter(format!("p must exceed 1, got {p}")));
    }
    Ok((p - 1.0).powf(-1.0 / (p - 1.0)))
}

/// Profile evaluator with the p-dependent constants cached.
#[derive(Clone, Debug)]
pub struct Profile {
    pub p: f64,
    pub d: usize,
    pub kappa: f64,
    pm1: f64,
    inv_pm1: f64,
    /// (p-1)^2 / kappa, the y^4 coefficient of D
    c_d: f64,
    /// 12 (p-1) / kappa, so P(y) = c_p (y^2 - 1)
    c_p: f64,
}

#[derive(Clone, Copy, Debug)]
struct Parts {
    e: f64,
    d: f64,
    e_y: f64,
    e_yy: f64,
    e_s: f64,
    d_y: f64,
    d_yy: f64,
    d_s: f64,
}

impl Profile {
    pub fn new(params: &ModelParams) -> Self {
        let pm1 = params.p - 1.0;
        Self {
            p: params.p,
            d: params.d,
            kappa: params.kappa,
            pm1,
            inv_pm1: 1.0 / pm1,
            c_d: pm1 * pm1 / params.kappa,
            c_p: 12.0 * pm1 / params.kappa,
        }
    }

    /// Threshold `s_2 = log(24 (p-1) / kappa)` past which `1 + e^{-s} P >= 1/2`.
    pub fn s2(&self) -> f64 {
        (2.0 * self.c_p).ln().max(0.0)
    }

    /// `P(y) = (12(p-1)/kappa)(y^2 - 1)`.
    pub fn p_poly(&self, y: f64) -> f64 {
        self.c_p * (y * y - 1.0)
    }

    /// The exact core of P: `kappa/(p-1) * P(y) = y^4 - h_4(y) = 12 y^2 - 12`.
    pub fn p_core_exact() -> ExactPoly {
        ExactPoly::from_integers(&[-12, 0, 12])
    }

    fn parts(&self, y: f64, s: f64) -> Parts {
        let ems = (-s).exp();
        let y2 = y * y;
        let e = 1.0 + ems * self.c_p * (y2 - 1.0);
        let d = self.pm1 + self.c_d * y2 * y2 * ems;
        Parts {
            e,
            d,
            e_y: 2.0 * self.c_p * y * ems,
            e_yy: 2.0 * self.c_p * ems,
            e_s: -ems * self.c_p * (y2 - 1.0),
            d_y: 4.0 * self.c_d * y * y2 * ems,
            d_yy: 12.0 * self.c_d * y2 * ems,
            d_s: -self.c_d * y2 * y2 * ems,
        }
    }

    fn check_domain(&self, y: f64, s: f64, parts: &Parts) -> Result<()> {
        if parts.e <= 0.0 {
            return Err(CoreError::ProfileDomain {
                y,
                s,
                value: parts.e,
            });
        }
        Ok(())
    }

    fn power(&self, ratio: f64) -> f64 {
        // (E/D)^{1/(p-1)} with fast paths for the common exponents.
        if self.p == 2.0 {
            ratio
        } else if self.p == 3.0 {
            ratio.sqrt()
        } else {
            ratio.powf(self.inv_pm1)
        }
    }

    /// `phi(y, s) = (E/D)^{1/(p-1)}`.
    pub fn phi(&self, y: f64, s: f64) -> Result<f64> {
        let parts = self.parts(y, s);
        self.check_domain(y, s, &parts)?;
        Ok(self.power(parts.e / parts.d))
    }

    /// `phi - kappa` without cancellation:
    /// `kappa * expm1((ln1p(e^{-s}P) - ln1p((p-1) y^4 e^{-s}/kappa)) / (p-1))`.
    pub fn phi_minus_kappa(&self, y: f64, s: f64) -> Result<f64> {
        let ems = (-s).exp();
        let y2 = y * y;
        let ep = ems * self.c_p * (y2 - 1.0);
        if ep <= -1.0 {
            return Err(CoreError::ProfileDomain {
                y,
                s,
                value: 1.0 + ep,
            });
        }
        let dpart = self.c_d * y2 * y2 * ems / self.pm1;
        let log_ratio = ep.ln_1p() - dpart.ln_1p();
        Ok(self.kappa * (log_ratio * self.inv_pm1).exp_m1())
    }

    /// `(phi, phi_y, phi_yy, phi_s)` from logarithmic derivatives of `E/D`.
    pub fn phi_with_derivatives(&self, y: f64, s: f64) -> Result<(f64, f64, f64, f64)> {
        let parts = self.parts(y, s);
        self.check_domain(y, s, &parts)?;
        let phi = self.power(parts.e / parts.d);
        let le = parts.e_y / parts.e;
        let ld = parts.d_y / parts.d;
        let l_y = self.inv_pm1 * (le - ld);
        let l_yy = self.inv_pm1
            * (parts.e_yy / parts.e - le * le - parts.d_yy / parts.d + ld * ld);
        let l_s = self.inv_pm1 * (parts.e_s / parts.e - parts.d_s / parts.d);
        Ok((phi, phi * l_y, phi * (l_y * l_y + l_yy), phi * l_s))
    }

    pub fn phi_y(&self, y: f64, s: f64) -> Result<f64> {
        Ok(self.phi_with_derivatives(y, s)?.1)
    }

    pub fn phi_s(&self, y: f64, s: f64) -> Result<f64> {
        Ok(self.phi_with_derivatives(y, s)?.3)
    }

    /// Reduced profile `f(z) = (p-1 + ((p-1)^2/kappa) z^4)^{-1/(p-1)}`.
    pub fn f_profile(&self, z: f64) -> f64 {
        let base = self.pm1 + self.c_d * z.powi(4);
        1.0 / self.power(base)
    }

    /// Final profile `u*(xi) = (((p-1)^2/kappa) xi^4)^{-1/(p-1)}`, `xi != 0`.
    pub fn u_star(&self, xi: f64) -> Result<f64> {
        if xi == 0.0 {
            return Err(CoreError::Singularity);
        }
        Ok(1.0 / self.power(self.c_d * xi.powi(4)))
    }

    /// Heteroclinic orbit `psi(s) = kappa (1 + e^s)^{-1/(p-1)}`, evaluated in
    /// an overflow-safe form for large `s`.
    pub fn psi(&self, s: f64) -> f64 {
        if s > 0.0 {
            // kappa e^{-s/(p-1)} (1 + e^{-s})^{-1/(p-1)}
            self.kappa * (-s * self.inv_pm1).exp() / self.power(1.0 + (-s).exp())
        } else {
            self.kappa / self.power(1.0 + s.exp())
        }
    }

    /// `V = p phi^{p-1} - p/(p-1) = -(p(p-1)/kappa) e^{-s} h_4(y) / D`,
    /// exact cancellation-free form.
    pub fn potential_v(&self, y: f64, s: f64) -> Result<f64> {
        let parts = self.parts(y, s);
        self.check_domain(y, s, &parts)?;
        let y2 = y * y;
        let h4 = y2 * y2 - 12.0 * y2 + 12.0;
        Ok(-(self.p * self.pm1 / self.kappa) * (-s).exp() * h4 / parts.d)
    }

    /// Remainder `R = phi_yy - y/2 phi_y - phi/(p-1) + phi^p - phi_s`, with
    /// `phi^p = phi * (E/D)`.
    pub fn remainder_r(&self, y: f64, s: f64) -> Result<f64> {
        let parts = self.parts(y, s);
        self.check_domain(y, s, &parts)?;
        let ratio = parts.e / parts.d;
        let phi = self.power(ratio);
        let le = parts.e_y / parts.e;
        let ld = parts.d_y / parts.d;
        let l_y = self.inv_pm1 * (le - ld);
        let l_yy = self.inv_pm1
            * (parts.e_yy / parts.e - le * le - parts.d_yy / parts.d + ld * ld);
        let l_s = self.inv_pm1 * (parts.e_s / parts.e - parts.d_s / parts.d);
        let phi_y = phi * l_y;
        let phi_yy = phi * (l_y * l_y + l_yy);
        let phi_s = phi * l_s;
        // (phi^p - phi/(p-1)) = phi (E/D - 1/(p-1)) = phi * V / p
        let v_over_p = -(self.pm1 / self.kappa) * (-s).exp()
            * (y * y * y * y - 12.0 * y * y + 12.0)
            / parts.d;
        Ok(phi_yy - 0.5 * y * phi_y + phi * v_over_p - phi_s)
    }
}

/// `C^inf` bump transition: 0 for `t <= 0`, 1 for `t >= 1`, built from
/// `g(t) = e^{-1/t}` as `g(t) / (g(t) + g(1-t))`.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let g = |u: f64| (-1.0 / u).exp();
        let a = g(t);
        let b = g(1.0 - t);
        a / (a + b)
    }
}

/// First and second derivatives of [`smooth_step`] in the open transition.
fn smooth_step_derivs(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 || t >= 1.0 {
        return (smooth_step(t), 0.0, 0.0);
    }
    let g = |u: f64| (-1.0 / u).exp();
    let g1 = |u: f64| g(u) / (u * u);
    let g2 = |u: f64| g(u) * (1.0 / (u * u * u * u) - 2.0 / (u * u * u));
    let u = g(t);
    let v = g(1.0 - t);
    let up = g1(t);
    let vp = -g1(1.0 - t);
    let upp = g2(t);
    let vpp = g2(1.0 - t);
    let sum = u + v;
    let t1 = (up * v - u * vp) / (sum * sum);
    // quotient rule for T' = (up*sum - u*(up+vp)) / sum^2 simplified above;
    // differentiate T' = (up*v - u*vp)/sum^2 once more:
    let num = up * v - u * vp;
    let num_p = upp * v - u * vpp;
    let t2 = (num_p * sum - 2.0 * num * (up + vp)) / (sum * sum * sum);
    (u / sum, t1, t2)
}

/// Cutoff `chi`: 0 on `[0, 1/8]`, 1 on `[1/4, inf)`, smooth monotone between.
pub fn cutoff_chi(xi: f64) -> f64 {
    smooth_step((xi - 0.125) / 0.125)
}

/// `(chi, chi', chi'')` at `xi`.
pub fn cutoff_chi_derivs(xi: f64) -> (f64, f64, f64) {
    let (v, d1, d2) = smooth_step_derivs((xi - 0.125) / 0.125);
    (v, d1 / 0.125, d2 / (0.125 * 0.125))
}

/// Cutoff `chibar`: 1 on `[0, 3/8]`, 0 on `[3/4, inf)`.
pub fn cutoff_chibar(xi: f64) -> f64 {
    1.0 - smooth_step((xi - 0.375) / 0.375)
}

pub fn cutoff_chibar_derivs(xi: f64) -> (f64, f64, f64) {
    let (v, d1, d2) = smooth_step_derivs((xi - 0.375) / 0.375);
    (1.0 - v, -d1 / 0.375, -d2 / (0.375 * 0.375))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn profile(p: f64) -> Profile {
        Profile::new(&ModelParams::standard(p, 2).unwrap())
    }

    #[test]
    fn kappa_values() {
        assert_relative_eq!(kappa_of(2.0).unwrap(), 1.0);
        assert_relative_eq!(kappa_of(3.0).unwrap(), 0.7071067811865476, max_relative = 1e-12);
        assert_relative_eq!(kappa_of(1.5).unwrap(), 4.0, max_relative = 1e-12);
        assert!(kappa_of(1.0).is_err());
        assert!(kappa_of(0.5).is_err());
    }

    #[test]
    fn kappa_identity() {
        for p in [1.5, 2.0, 2.7, 3.0] {
            let k = kappa_of(p).unwrap();
            assert_relative_eq!(k.powf(p - 1.0) * (p - 1.0), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::standard(2.0, 2).is_ok());
        assert!(ModelParams::standard(0.5, 2).is_err());
        // (d-2)p <= d+2: p=6, d=3 gives 6 > 5
        assert!(ModelParams::standard(6.0, 3).is_err());
        assert!(ModelParams::standard(4.0, 3).is_ok());
        assert!(ModelParams::new(2.0, 1, 1.0, 0.25, 1.0, 1.0, 10.0).is_err());
    }

    #[test]
    fn phi_point_values() {
        let pr = profile(2.0);
        // p=2, s=5, y=0: 1 - 12 e^{-5}
        let expect = 1.0 - 12.0 * (-5.0f64).exp();
        assert_relative_eq!(pr.phi(0.0, 5.0).unwrap(), expect, max_relative = 1e-14);
        assert_relative_eq!(pr.phi(0.0, 5.0).unwrap(), 0.9191446, max_relative = 1e-6);
        // p=2, s=10, y=2
        let e10 = (-10.0f64).exp();
        let expect = (1.0 + 36.0 * e10) / (1.0 + 16.0 * e10);
        assert_relative_eq!(pr.phi(2.0, 10.0).unwrap(), expect, max_relative = 1e-14);
        assert_relative_eq!(pr.phi(2.0, 10.0).unwrap(), 1.0009073, max_relative = 1e-7);
        // fixed y, s -> infinity: phi -> kappa
        assert_relative_eq!(pr.phi(1.7, 40.0).unwrap(), 1.0, max_relative = 1e-12);
        let pr3 = profile(3.0);
        assert_relative_eq!(pr3.phi(1.7, 40.0).unwrap(), pr3.kappa, max_relative = 1e-12);
    }

    #[test]
    fn phi_domain_guard_fires_below_s2() {
        let pr = profile(2.0);
        // s = 0: 1 - 12 < 0 at y = 0
        let err = pr.phi(0.0, 0.0).unwrap_err();
        assert!(matches!(err, CoreError::ProfileDomain { .. }));
        // and s2 really protects: E >= 1/2 at the minimum y = 0
        let s2 = pr.s2();
        assert!(pr.phi(0.0, s2).unwrap() > 0.0);
        let e = 1.0 + (-s2).exp() * pr.p_poly(0.0);
        assert_relative_eq!(e, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn phi_minus_kappa_matches_direct_subtraction() {
        for p in [2.0, 3.0, 1.5] {
            let pr = profile(p);
            for &(y, s) in &[(0.0, 8.0), (2.5, 12.0), (7.0, 16.0), (0.7, 30.0)] {
                let direct = pr.phi(y, s).unwrap() - pr.kappa;
                let safe = pr.phi_minus_kappa(y, s).unwrap();
                assert!(
                    (direct - safe).abs() <= 1e-12 * pr.kappa.max(safe.abs()),
                    "p={p} y={y} s={s}: {direct} vs {safe}"
                );
            }
        }
    }

    #[test]
    fn f_profile_values() {
        let pr = profile(2.0);
        assert_relative_eq!(pr.f_profile(0.0), 1.0);
        assert_relative_eq!(pr.f_profile(1.0), 0.5, max_relative = 1e-14);
        // z -> infinity: f/u* -> 1
        let z = 800.0;
        assert_relative_eq!(
            pr.f_profile(z) / pr.u_star(z).unwrap(),
            1.0,
            max_relative = 1e-5
        );
        // even, decreasing in |z|
        assert_eq!(pr.f_profile(1.3), pr.f_profile(-1.3));
        assert!(pr.f_profile(2.0) < pr.f_profile(1.0));
    }

    #[test]
    fn u_star_values() {
        let pr = profile(2.0);
        assert_relative_eq!(pr.u_star(1.0).unwrap(), 1.0, max_relative = 1e-14);
        // homogeneity u*(2 xi)/u*(xi) = 2^{-4/(p-1)}
        let ratio = pr.u_star(2.0).unwrap() / pr.u_star(1.0).unwrap();
        assert_relative_eq!(ratio, 2.0f64.powf(-4.0), max_relative = 1e-12);
        let pr3 = profile(3.0);
        assert_relative_eq!(pr3.u_star(1.0).unwrap(), 0.4204482, max_relative = 1e-6);
        assert!(matches!(pr.u_star(0.0), Err(CoreError::Singularity)));
    }

    #[test]
    fn psi_values_and_ode_residual() {
        let pr = profile(2.0);
        assert_relative_eq!(pr.psi(-60.0), pr.kappa, max_relative = 1e-12);
        assert_relative_eq!(pr.psi(0.0), 0.5, max_relative = 1e-14);
        assert!(pr.psi(5.0) < pr.psi(4.0));
        // psi' + psi/(p-1) - psi^p = 0, via centered finite differences
        for p in [2.0, 3.0] {
            let pr = profile(p);
            for k in 0..=20 {
                let s = -5.0 + 0.5 * k as f64;
                let h = 1e-6;
                let dpsi = (pr.psi(s + h) - pr.psi(s - h)) / (2.0 * h);
                let res = dpsi + pr.psi(s) / (p - 1.0) - pr.psi(s).powf(p);
                assert!(res.abs() < 1e-10, "p={p} s={s}: {res}");
            }
        }
    }

    #[test]
    fn cutoff_plateaus_and_bounds() {
        assert_eq!(cutoff_chi(0.1), 0.0);
        assert_eq!(cutoff_chi(0.0), 0.0);
        assert_eq!(cutoff_chi(0.3), 1.0);
        assert_eq!(cutoff_chibar(0.3), 1.0);
        assert_eq!(cutoff_chibar(0.8), 0.0);
        // monotone nondecreasing on the transition, |chi'| <= 32
        let mut prev = 0.0;
        for k in 0..=400 {
            let xi = 0.125 + 0.125 * k as f64 / 400.0;
            let (v, d1, _) = cutoff_chi_derivs(xi);
            assert!(v + 1e-15 >= prev);
            assert!(d1 >= -1e-12 && d1 <= 32.0, "chi' = {d1} at {xi}");
            prev = v;
        }
    }

    #[test]
    fn cutoff_derivatives_match_finite_differences() {
        let h = 1e-6;
        for k in 1..40 {
            let xi = 0.125 + 0.125 * k as f64 / 40.0;
            let (_, d1, d2) = cutoff_chi_derivs(xi);
            let fd1 = (cutoff_chi(xi + h) - cutoff_chi(xi - h)) / (2.0 * h);
            let fd2 = (cutoff_chi(xi + h) - 2.0 * cutoff_chi(xi) + cutoff_chi(xi - h)) / (h * h);
            assert!((d1 - fd1).abs() <= 1e-5 * (1.0 + d1.abs()), "{xi}: {d1} vs {fd1}");
            assert!((d2 - fd2).abs() <= 1e-3 * (1.0 + d2.abs()), "{xi}: {d2} vs {fd2}");
        }
        for k in 1..40 {
            let xi = 0.375 + 0.375 * k as f64 / 40.0;
            let (_, d1, _) = cutoff_chibar_derivs(xi);
            let fd1 = (cutoff_chibar(xi + h) - cutoff_chibar(xi - h)) / (2.0 * h);
            assert!((d1 - fd1).abs() <= 1e-5 * (1.0 + d1.abs()));
        }
    }

    #[test]
    fn potential_bounds_and_limit() {
        for p in [2.0, 3.0] {
            let pr = profile(p);
            // s -> infinity at fixed y: V -> 0
            assert!(pr.potential_v(1.3, 45.0).unwrap().abs() < 1e-15);
            // |V| <= p/(p-1) on a wide grid for s >= s2 + 1
            let bound = p / (p - 1.0);
            for k in 0..=400 {
                let y = -20.0 + 0.1 * k as f64;
                for s in [pr.s2() + 1.0, 8.0, 12.0] {
                    let v = pr.potential_v(y, s).unwrap();
                    assert!(v.abs() <= bound + 1e-12, "p={p} y={y} s={s}: {v}");
                }
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for p in [2.0, 3.0, 1.7] {
            let pr = profile(p);
            for _ in 0..100 {
                let y: f64 = rng.gen_range(-8.0..8.0);
                let s: f64 = rng.gen_range(7.0..16.0);
                let (_, phi_y, phi_yy, phi_s) = pr.phi_with_derivatives(y, s).unwrap();
                let h = 1e-5;
                let fy = (pr.phi(y + h, s).unwrap() - pr.phi(y - h, s).unwrap()) / (2.0 * h);
                let fyy = (pr.phi(y + h, s).unwrap() - 2.0 * pr.phi(y, s).unwrap()
                    + pr.phi(y - h, s).unwrap())
                    / (h * h);
                let hs = 1e-6;
                let fs = (pr.phi(y, s + hs).unwrap() - pr.phi(y, s - hs).unwrap()) / (2.0 * hs);
                assert!((phi_y - fy).abs() <= 1e-6 * (1.0 + phi_y.abs()), "phi_y p={p}");
                assert!((phi_yy - fyy).abs() <= 1e-4 * (1.0 + phi_yy.abs()), "phi_yy p={p}");
                assert!((phi_s - fs).abs() <= 1e-6 * (1.0 + phi_s.abs()), "phi_s p={p}");
            }
        }
    }

    #[test]
    fn remainder_at_origin_p2_exact_expansion() {
        // R(0, s) = 144 e^{-2s} exactly at p = 2
        let pr = profile(2.0);
        for s in [8.0, 10.0, 14.0] {
            let r = pr.remainder_r(0.0, s).unwrap();
            assert_relative_eq!(r, 144.0 * (-2.0 * s).exp(), max_relative = 1e-9);
        }
        // and R(1, s) = -148 e^{-2s} + O(e^{-3s})
        let s = 12.0;
        let r = pr.remainder_r(1.0, s).unwrap();
        assert_relative_eq!(r, -148.0 * (-2.0 * s).exp(), max_relative = 1e-3);
    }

    #[test]
    fn profile_sup_bounds_fitted_constants() {
        // Lemma-style bounds: max phi <= kappa + C0 e^{-s/3} and
        // max |phi_y| <= C0 e^{-s/4}, single constant fitted at s = 8,
        // C0 <= 10, bounding all later samples.
        for p in [2.0, 3.0] {
            let pr = profile(p);
            let sup_phi = |s: f64| -> f64 {
                let mut m = f64::MIN;
                for k in 0..=2000 {
                    let y = -50.0 + 0.05 * k as f64;
                    m = m.max(pr.phi(y, s).unwrap());
                }
                m
            };
            let sup_dphi = |s: f64| -> f64 {
                let mut m: f64 = 0.0;
                for k in 0..=2000 {
                    let y = -50.0 + 0.05 * k as f64;
                    m = m.max(pr.phi_y(y, s).unwrap().abs());
                }
                m
            };
            let c0_phi = (sup_phi(8.0) - pr.kappa).max(0.0) / (-8.0f64 / 3.0).exp();
            let c0_dphi = sup_dphi(8.0) / (-8.0f64 / 4.0).exp();
            assert!(c0_phi <= 10.0, "p={p}: C0 = {c0_phi}");
            assert!(c0_dphi <= 10.0, "p={p}: C0' = {c0_dphi}");
            for k in 1..=8 {
                let s = 8.0 + k as f64;
                assert!(
                    sup_phi(s) <= pr.kappa + 1.0001 * c0_phi * (-s / 3.0).exp(),
                    "p={p} s={s} (ii)"
                );
                assert!(
                    sup_dphi(s) <= 1.10 * c0_dphi * (-s / 4.0).exp(),
                    "p={p} s={s} (iii)"
                );
            }
            // phi -> 0 as |y| -> infinity at fixed s, monotonically far out
            let s = 9.0;
            let mut prev = pr.phi(30.0, s).unwrap();
            for k in 1..=20 {
                let y = 30.0 + 5.0 * k as f64;
                let v = pr.phi(y, s).unwrap();
                assert!(v < prev);
                prev = v;
            }
            assert!(prev < 1e-3);
        }
    }

    #[test]
    fn reduced_profile_approximates_phi_on_inner_scale() {
        // sup_{|y| <= e^{s/4}} |f(e^{-s/4} y) - phi(y,s)| decays like
        // e^{-s/2} (the quadratic P-tail); on fixed compacts it is O(e^{-s}).
        let pr = profile(2.0);
        let sup_diff = |s: f64, y_max: f64| -> f64 {
            let mut m: f64 = 0.0;
            let n = 4000;
            for k in 0..=n {
                let y = -y_max + 2.0 * y_max * k as f64 / n as f64;
                let z = (-s / 4.0).exp() * y;
                m = m.max((pr.f_profile(z) - pr.phi(y, s).unwrap()).abs());
            }
            m
        };
        // fixed compact |y| <= 4: fitted C at s = 8 bounds later samples of e^{-s}
        let c_fixed = sup_diff(8.0, 4.0) / (-8.0f64).exp();
        for k in 1..=8 {
            let s = 8.0 + k as f64;
            assert!(sup_diff(s, 4.0) <= 1.15 * c_fixed * (-s).exp(), "s = {s}");
        }
        // growing window |y| <= e^{s/4}: rate e^{-s/2}
        let c_grow = sup_diff(8.0, 2.0f64.exp()) / (-4.0f64).exp();
        for k in 1..=4 {
            let s = 8.0 + 2.0 * k as f64;
            let wid = (s / 4.0).exp();
            assert!(
                sup_diff(s, wid) <= 1.1 * c_grow * (-s / 2.0).exp(),
                "s = {s}: {} vs {}",
                sup_diff(s, wid),
                c_grow * (-s / 2.0).exp()
            );
        }
    }
}
