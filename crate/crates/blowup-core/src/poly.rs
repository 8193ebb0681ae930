//! Exact polynomial arithmetic over the rationals and the rescaled Hermite
//! basis `h_m` attached to the weight `rho_1(y) = e^{-y^2/4} / sqrt(4 pi)`.
//!
//! The polynomials satisfy the three-term recurrence
//! `h_{m+1} = y h_m - 2 m h_{m-1}` with `h_0 = 1`, `h_1 = y`, the
//! orthogonality `∫ h_m h_n rho_1 dy = 2^n n! δ_{nm}`, and are eigenfunctions
//! of `L = d²/dy² - (y/2) d/dy + 1` with eigenvalue `1 - m/2`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::ops::{Add, Mul, Sub};

use crate::error::{CoreError, Result};

/// Dense univariate polynomial with exact rational coefficients.
/// `coeffs[k]` is the coefficient of `y^k`; trailing zeros are stripped, so
/// the zero polynomial has an empty coefficient vector.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct ExactPoly {
    coeffs: Vec<BigRational>,
}

impl ExactPoly {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Self { coeffs: vec![c] };
        p.normalize();
        p
    }

    pub fn from_coeffs(coeffs: Vec<BigRational>) -> Self {
        let mut p = Self { coeffs };
        p.normalize();
        p
    }

    pub fn from_integers(coeffs: &[i64]) -> Self {
        Self::from_coeffs(
            coeffs
                .iter()
                .map(|&c| BigRational::from_integer(BigInt::from(c)))
                .collect(),
        )
    }

    /// `c * y^k`.
    pub fn monomial(k: usize, c: BigRational) -> Self {
        let mut coeffs = vec![BigRational::zero(); k + 1];
        coeffs[k] = c;
        Self::from_coeffs(coeffs)
    }

    fn normalize(&mut self) {
        while self.coeffs.last().map_or(false, |c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn coeff(&self, k: usize) -> BigRational {
        self.coeffs.get(k).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::from_coeffs(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * BigRational::from_integer(BigInt::from(k)))
                .collect(),
        )
    }

    pub fn eval_rational(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c.to_f64().unwrap_or(f64::NAN);
        }
        acc
    }

    /// Exact string form of every coefficient, constant term first. Dyadic /
    /// decimal denominators print as terminating decimals; anything else
    /// prints as `num/den`. Either form parses back exactly.
    pub fn coeff_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(rational_to_exact_string).collect()
    }

    pub fn from_coeff_strings<S: AsRef<str>>(strings: &[S]) -> Result<Self> {
        let coeffs = strings
            .iter()
            .map(|s| parse_exact_rational(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_coeffs(coeffs))
    }
}

impl fmt::Debug for ExactPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| match k {
                0 => format!("{c}"),
                1 => format!("{c}*y"),
                _ => format!("{c}*y^{k}"),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

impl Add for &ExactPoly {
    type Output = ExactPoly;
    fn add(self, rhs: &ExactPoly) -> ExactPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut coeffs = Vec::with_capacity(n);
        for k in 0..n {
            coeffs.push(self.coeff(k) + rhs.coeff(k));
        }
        ExactPoly::from_coeffs(coeffs)
    }
}

impl Sub for &ExactPoly {
    type Output = ExactPoly;
    fn sub(self, rhs: &ExactPoly) -> ExactPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut coeffs = Vec::with_capacity(n);
        for k in 0..n {
            coeffs.push(self.coeff(k) - rhs.coeff(k));
        }
        ExactPoly::from_coeffs(coeffs)
    }
}

impl Mul for &ExactPoly {
    type Output = ExactPoly;
    fn mul(self, rhs: &ExactPoly) -> ExactPoly {
        if self.is_zero() || rhs.is_zero() {
            return ExactPoly::zero();
        }
        let mut coeffs =
            vec![BigRational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (a, ca) in self.coeffs.iter().enumerate() {
            if ca.is_zero() {
                continue;
            }
            for (b, cb) in rhs.coeffs.iter().enumerate() {
                coeffs[a + b] += ca * cb;
            }
        }
        ExactPoly::from_coeffs(coeffs)
    }
}

fn rational_to_exact_string(r: &BigRational) -> String {
    let r = r.clone();
    if r.denom().is_one() {
        return r.numer().to_string();
    }
    // Terminating decimal iff denominator = 2^a 5^b.
    let mut den = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut a = 0u32;
    let mut b = 0u32;
    while (&den % &two).is_zero() {
        den /= &two;
        a += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        b += 1;
    }
    if den.is_one() {
        let digits = a.max(b);
        let scale = BigInt::from(10).pow(digits);
        let scaled = r.numer() * &scale / r.denom();
        let neg = scaled.is_negative();
        let mut s = scaled.abs().to_string();
        let d = digits as usize;
        if s.len() <= d {
            s = format!("{}{}", "0".repeat(d + 1 - s.len()), s);
        }
        s.insert(s.len() - d, '.');
        if neg {
            s.insert(0, '-');
        }
        s
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn parse_exact_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = |_| CoreError::Parse(format!("invalid exact coefficient: {s}"));
    if let Some((n, d)) = s.split_once('/') {
        let numer: BigInt = n.trim().parse().map_err(bad)?;
        let denom: BigInt = d.trim().parse().map_err(bad)?;
        if denom.is_zero() {
            return Err(CoreError::Parse(format!("zero denominator: {s}")));
        }
        return Ok(BigRational::new(numer, denom));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let digits = frac_part.len() as u32;
        let joined = format!("{int_part}{frac_part}");
        let numer: BigInt = joined.parse().map_err(bad)?;
        return Ok(BigRational::new(numer, BigInt::from(10).pow(digits)));
    }
    let numer: BigInt = s.parse().map_err(bad)?;
    Ok(BigRational::from_integer(numer))
}

/// `h_m` by the three-term recurrence; exact integer coefficients, leading
/// coefficient 1.
pub fn hermite_poly_unchecked(m: usize) -> ExactPoly {
    let mut prev = ExactPoly::from_integers(&[1]);
    if m == 0 {
        return prev;
    }
    let mut cur = ExactPoly::from_integers(&[0, 1]);
    let y = ExactPoly::from_integers(&[0, 1]);
    for k in 1..m {
        let next = &(&y * &cur)
            - &prev.scale(&BigRational::from_integer(BigInt::from(2 * k)));
        prev = cur;
        cur = next;
    }
    cur
}

/// `‖h_m‖²_{L²_{rho_1}} = 2^m m!`.
pub fn hermite_norm_sq(m: usize) -> BigRational {
    let mut acc = BigInt::one();
    for k in 1..=m {
        acc *= BigInt::from(2 * k);
    }
    BigRational::from_integer(acc)
}

/// `L p = p'' - (y/2) p' + p`, exactly.
pub fn apply_l(p: &ExactPoly) -> ExactPoly {
    let d1 = p.derivative();
    let d2 = d1.derivative();
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let y_d1 = &ExactPoly::from_integers(&[0, 1]) * &d1;
    &(&d2 - &y_d1.scale(&half)) + p
}

/// Exact coefficients `c_m` with `p = Σ c_m h_m`, obtained by peeling the
/// leading term (h_m is monic). Index = mode.
pub fn to_hermite_basis(p: &ExactPoly) -> Vec<BigRational> {
    let mut rem = p.clone();
    let deg = match rem.degree() {
        None => return Vec::new(),
        Some(d) => d,
    };
    let mut out = vec![BigRational::zero(); deg + 1];
    while let Some(d) = rem.degree() {
        let c = rem.coeff(d);
        rem = &rem - &hermite_poly_unchecked(d).scale(&c);
        out[d] = c;
    }
    out
}

/// Inverse of [`to_hermite_basis`].
pub fn from_hermite_basis(coeffs: &[BigRational]) -> ExactPoly {
    let mut acc = ExactPoly::zero();
    for (m, c) in coeffs.iter().enumerate() {
        if !c.is_zero() {
            acc = &acc + &hermite_poly_unchecked(m).scale(c);
        }
    }
    acc
}

/// Float evaluation of `h_0..=h_max` at `y` via the recurrence.
pub fn hermite_eval_upto(m_max: usize, y: f64, out: &mut [f64]) {
    debug_assert!(out.len() >= m_max + 1);
    out[0] = 1.0;
    if m_max == 0 {
        return;
    }
    out[1] = y;
    for m in 1..m_max {
        out[m + 1] = y * out[m] - 2.0 * m as f64 * out[m - 1];
    }
}

pub fn hermite_eval_f64(m: usize, y: f64) -> f64 {
    let mut buf = vec![0.0; m + 1];
    hermite_eval_upto(m, y, &mut buf);
    buf[m]
}

/// Hermite basis with a configured mode cap; the bounds-checked entry point
/// used by everything downstream.
pub struct HermiteBasis {
    m_max: usize,
    polys: Vec<ExactPoly>,
}

impl HermiteBasis {
    pub fn new(m_max: usize) -> Self {
        let polys = (0..=m_max).map(hermite_poly_unchecked).collect();
        Self { m_max, polys }
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn poly(&self, m: usize) -> Result<&ExactPoly> {
        self.polys.get(m).ok_or(CoreError::ModeOutOfBounds {
            m,
            m_max: self.m_max,
        })
    }
}

impl Default for HermiteBasis {
    fn default() -> Self {
        Self::new(16)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn hermite_low_orders_match_closed_forms() {
        assert_eq!(hermite_poly_unchecked(0), ExactPoly::from_integers(&[1]));
        assert_eq!(
            hermite_poly_unchecked(4),
            ExactPoly::from_integers(&[12, 0, -12, 0, 1])
        );
        assert_eq!(
            hermite_poly_unchecked(6),
            ExactPoly::from_integers(&[-120, 0, 180, 0, -30, 0, 1])
        );
    }

    #[test]
    fn hermite_defining_sum_agrees_with_recurrence() {
        // h_m(y) = sum_n m!/(n!(m-2n)!) (-1)^n y^(m-2n)
        for m in 0..=16usize {
            let mut coeffs = vec![BigRational::zero(); m + 1];
            let fact = |k: usize| -> BigInt {
                (1..=k).map(BigInt::from).product::<BigInt>().max(BigInt::one())
            };
            for n in 0..=(m / 2) {
                let c = fact(m) / (fact(n) * fact(m - 2 * n));
                let signed = if n % 2 == 0 { c } else { -c };
                coeffs[m - 2 * n] = BigRational::from_integer(signed);
            }
            assert_eq!(
                ExactPoly::from_coeffs(coeffs),
                hermite_poly_unchecked(m),
                "mode {m}"
            );
        }
    }

    #[test]
    fn norm_sq_values() {
        assert_eq!(hermite_norm_sq(0), big(1));
        assert_eq!(hermite_norm_sq(2), big(8));
        assert_eq!(hermite_norm_sq(4), big(384));
        assert_eq!(hermite_norm_sq(3), big(48));
    }

    #[test]
    fn eigen_identity_exact() {
        for m in 0..=16usize {
            let h = hermite_poly_unchecked(m);
            let lh = apply_l(&h);
            let lambda = BigRational::new(BigInt::from(2 - m as i64), BigInt::from(2));
            assert_eq!(lh, h.scale(&lambda), "mode {m}");
        }
    }

    #[test]
    fn apply_l_on_y4() {
        // L y^4 = 12 y^2 - 2 y^4 + y^4 = -y^4 + 12 y^2
        let p = ExactPoly::monomial(4, big(1));
        assert_eq!(apply_l(&p), ExactPoly::from_integers(&[0, 0, 12, 0, -1]));
    }

    #[test]
    fn h4_squared_basis_conversion() {
        let h4 = hermite_poly_unchecked(4);
        let sq = &h4 * &h4;
        let c = to_hermite_basis(&sq);
        let expect = [384, 0, 768, 0, 288, 0, 32, 0, 1];
        for (m, e) in expect.iter().enumerate() {
            assert_eq!(c[m], big(*e), "mode {m}");
        }
        // pointwise witnesses
        assert_eq!(sq.eval_rational(&big(0)), big(144));
        assert_eq!(sq.eval_rational(&big(1)), big(1));
    }

    #[test]
    fn h2_squared_basis_conversion() {
        let h2 = hermite_poly_unchecked(2);
        let c = to_hermite_basis(&(&h2 * &h2));
        assert_eq!(c[0], big(8));
        assert_eq!(c[2], big(8));
        assert_eq!(c[4], big(1));
        // spot check at y = 0: 4 = 12 - 16 + 8
        assert_eq!((&h2 * &h2).eval_rational(&big(0)), big(4));
    }

    #[test]
    fn basis_cap_is_enforced() {
        let basis = HermiteBasis::new(16);
        assert!(basis.poly(16).is_ok());
        assert!(matches!(
            basis.poly(17),
            Err(CoreError::ModeOutOfBounds { m: 17, m_max: 16 })
        ));
    }

    #[test]
    fn exact_strings_round_trip() {
        let p = ExactPoly::from_coeffs(vec![
            BigRational::new(BigInt::from(-3), BigInt::from(8)),
            big(7),
            BigRational::new(BigInt::from(1), BigInt::from(3)),
        ]);
        let strings = p.coeff_strings();
        assert_eq!(strings[0], "-0.375");
        assert_eq!(strings[1], "7");
        assert_eq!(strings[2], "1/3");
        assert_eq!(ExactPoly::from_coeff_strings(&strings).unwrap(), p);
    }

    proptest! {
        #[test]
        fn basis_round_trip_is_identity(coeffs in proptest::collection::vec(-50i64..=50, 0..=17)) {
            let p = ExactPoly::from_integers(&coeffs);
            let c = to_hermite_basis(&p);
            prop_assert_eq!(from_hermite_basis(&c), p);
        }

        #[test]
        fn float_eval_matches_rational(coeffs in proptest::collection::vec(-9i64..=9, 0..=6), x in -4.0f64..4.0) {
            let p = ExactPoly::from_integers(&coeffs);
            let exact = p
                .eval_rational(&BigRational::new(BigInt::from((x * 1024.0).round() as i64), BigInt::from(1024)))
                .to_f64()
                .unwrap();
            let xq = (x * 1024.0).round() / 1024.0;
            let float = p.eval_f64(xq);
            prop_assert!((exact - float).abs() <= 1e-9 * (1.0 + exact.abs()));
        }
    }
}
