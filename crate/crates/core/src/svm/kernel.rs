use crate::error::{config_err, Error, Result};
use std::fmt;

/// Kernel function k(x, z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
    /// (gamma * x.z + coef0)^degree
    Polynomial { gamma: f64, degree: u32, coef0: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } if gamma > 0.0 && gamma.is_finite() => Ok(()),
            KernelSpec::Rbf { .. } => config_err("rbf gamma must be positive"),
            KernelSpec::Polynomial { gamma, degree, coef0 } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    config_err("polynomial gamma must be positive")
                } else if degree < 1 {
                    config_err("polynomial degree must be >= 1")
                } else if !coef0.is_finite() {
                    config_err("polynomial coef0 must be finite")
                } else {
                    Ok(())
                }
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, z),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            KernelSpec::Polynomial { gamma, degree, coef0 } => {
                (gamma * dot(x, z) + coef0).powi(degree as i32)
            }
        }
    }
}

#[inline]
fn dot(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| a * b).sum()
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Rbf { gamma } => write!(f, "rbf {}", gamma),
            KernelSpec::Polynomial {
                gamma,
                degree,
                coef0,
            } => write!(f, "poly {} {} {}", gamma, degree, coef0),
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;

    /// Inverse of `Display`: `linear`, `rbf <gamma>`, `poly <gamma> <degree> <coef0>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Document(format!("bad kernel spec '{}'", s)))
        };
        let k = match parts.first().copied() {
            Some("linear") => KernelSpec::Linear,
            Some("rbf") => KernelSpec::Rbf { gamma: num(1)? },
            Some("poly") => KernelSpec::Polynomial {
                gamma: num(1)?,
                degree: num(2)? as u32,
                coef0: num(3)?,
            },
            _ => return Err(Error::Document(format!("bad kernel spec '{}'", s))),
        };
        k.validate()?;
        Ok(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        let x = [1.0, 2.0];
        let z = [3.0, -1.0];
        assert_eq!(KernelSpec::Linear.eval(&x, &z), 1.0);
        let rbf = KernelSpec::Rbf { gamma: 0.5 };
        assert!((rbf.eval(&x, &z) - (-0.5f64 * 13.0).exp()).abs() < 1e-15);
        assert_eq!(rbf.eval(&x, &x), 1.0);
        let poly = KernelSpec::Polynomial {
            gamma: 1.0,
            degree: 2,
            coef0: 1.0,
        };
        assert_eq!(poly.eval(&x, &z), 4.0);
    }

    #[test]
    fn text_round_trip() {
        for k in [
            KernelSpec::Linear,
            KernelSpec::Rbf { gamma: 0.2 },
            KernelSpec::Polynomial {
                gamma: 0.5,
                degree: 3,
                coef0: -1.25,
            },
        ] {
            assert_eq!(k.to_string().parse::<KernelSpec>().unwrap(), k);
        }
        assert!("rbf -1".parse::<KernelSpec>().is_err());
    }
}
