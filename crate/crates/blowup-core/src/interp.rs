//! Monotone cubic Hermite interpolation on a strictly increasing abscissa,
//! used for frame resampling and point queries on gridded fields.
//!
//! Slopes come from fourth-order finite differences on uniform grids (the
//! parabolic estimate otherwise) and are then limited in the Fritsch–Carlson
//! box wherever the data is locally monotone, so monotone data produces a
//! monotone interpolant while smooth fields keep high-order accuracy at
//! interior extrema.

use crate::error::{CoreError, Result};

/// What to do with queries outside the tabulated range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutOfRange {
    Error,
    Zero,
    Clamp,
}

#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
    policy: OutOfRange,
}

impl MonotoneCubic {
    pub fn new(x: &[f64], y: &[f64], policy: OutOfRange) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(CoreError::InsufficientData(
                "interpolation needs two or more matching samples".into(),
            ));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::Parse("abscissa must be strictly increasing".into()));
        }
        let n = x.len();
        let h0 = x[1] - x[0];
        let uniform = x
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h0).abs() <= 1e-9 * h0);
        let mut delta = vec![0.0; n - 1];
        for i in 0..n - 1 {
            delta[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        }
        let mut slope = vec![0.0; n];
        for i in 0..n {
            slope[i] = if uniform && n >= 5 && (2..n - 2).contains(&i) {
                (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h0)
            } else if i == 0 {
                if n >= 3 {
                    // one-sided parabolic
                    let h1 = x[1] - x[0];
                    let h2 = x[2] - x[1];
                    delta[0] + (delta[0] - delta[1]) * h1 / (h1 + h2)
                } else {
                    delta[0]
                }
            } else if i == n - 1 {
                if n >= 3 {
                    let h1 = x[n - 1] - x[n - 2];
                    let h2 = x[n - 2] - x[n - 3];
                    delta[n - 2] + (delta[n - 2] - delta[n - 3]) * h1 / (h1 + h2)
                } else {
                    delta[n - 2]
                }
            } else {
                let hl = x[i] - x[i - 1];
                let hr = x[i + 1] - x[i];
                (hr * delta[i - 1] + hl * delta[i]) / (hl + hr)
            };
        }
        // Fritsch–Carlson limiting where the data is locally monotone;
        // at data extrema only a magnitude cap applies.
        for i in 0..n {
            let dl = if i > 0 { delta[i - 1] } else { delta[0] };
            let dr = if i < n - 1 { delta[i] } else { delta[n - 2] };
            if dl * dr > 0.0 {
                let cap = 3.0 * dl.abs().min(dr.abs());
                if slope[i] * dl <= 0.0 {
                    slope[i] = 0.0;
                } else if slope[i].abs() > cap {
                    slope[i] = cap * slope[i].signum();
                }
            } else {
                let cap = 3.0 * dl.abs().max(dr.abs());
                if slope[i].abs() > cap {
                    slope[i] = cap * slope[i].signum();
                }
            }
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            slope,
            policy,
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    pub fn eval(&self, xq: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if xq < lo || xq > hi {
            return match self.policy {
                OutOfRange::Error => Err(CoreError::OutOfRange {
                    value: xq,
                    lo,
                    hi,
                }),
                OutOfRange::Zero => Ok(0.0),
                OutOfRange::Clamp => {
                    if xq < lo {
                        Ok(self.y[0])
                    } else {
                        Ok(*self.y.last().unwrap())
                    }
                }
            };
        }
        let i = match self
            .x
            .binary_search_by(|v| v.partial_cmp(&xq).expect("finite abscissa"))
        {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.y[i]
            + h10 * h * self.slope[i]
            + h01 * self.y[i + 1]
            + h11 * h * self.slope[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_linear_data_exactly() {
        let x: Vec<f64> = (0..20).map(|k| k as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let itp = MonotoneCubic::new(&x, &y, OutOfRange::Error).unwrap();
        for q in [0.0, 0.123, 3.7, 5.6] {
            assert!((itp.eval(q).unwrap() - (2.0 * q - 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn smooth_function_accuracy() {
        let x: Vec<f64> = (0..=200).map(|k| -5.0 + 0.05 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 0.8).sin()).collect();
        let itp = MonotoneCubic::new(&x, &y, OutOfRange::Error).unwrap();
        for k in 0..100 {
            let q = -4.9 + 0.099 * k as f64;
            assert!((itp.eval(q).unwrap() - (q * 0.8).sin()).abs() < 2e-5);
        }
    }

    #[test]
    fn monotone_data_stays_monotone() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.0, 0.1, 0.11, 5.0, 5.01];
        let itp = MonotoneCubic::new(&x, &y, OutOfRange::Error).unwrap();
        let mut prev = f64::MIN;
        for k in 0..=400 {
            let v = itp.eval(4.0 * k as f64 / 400.0).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn out_of_range_policies() {
        let x = [0.0, 1.0];
        let y = [1.0, 2.0];
        let e = MonotoneCubic::new(&x, &y, OutOfRange::Error).unwrap();
        assert!(matches!(e.eval(-0.1), Err(CoreError::OutOfRange { .. })));
        let z = MonotoneCubic::new(&x, &y, OutOfRange::Zero).unwrap();
        assert_eq!(z.eval(9.0).unwrap(), 0.0);
        let c = MonotoneCubic::new(&x, &y, OutOfRange::Clamp).unwrap();
        assert_eq!(c.eval(9.0).unwrap(), 2.0);
    }
}
