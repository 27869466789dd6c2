//! Weight functions and the unnormalized joint density of the reduced
//! spectrum.
//!
//! Every weight has the form `w(x) = x^q exp(-x^2 / (psi sigma2))`; only the
//! exponent `q` differs between the finite-`n` weight `w_n` and its limit `w`:
//!
//! | family       | `psi` | `q` for `w_n` | `q` for `w`          |
//! |--------------|-------|---------------|----------------------|
//! | Wigner–Dyson | 4     | 0             | 0                    |
//! | chiral       | 2     | `alpha / n`   | `beta (1 - 2 kappa)` |
//! | BdG          | `psi` | `alpha / n`   | 0                    |
//!
//! With the `1/n` scaling the joint log density of the reduced spectrum is
//! `beta sum_{i<j} log|x_i^g - x_j^g| + n sum_j log w_n(x_j)`, which is what
//! [`joint_log_density`] evaluates (without the normalizing constant).

use serde::{Deserialize, Serialize};

use crate::ensembles::{EnsembleSpec, Family};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub family: Family,
    pub sigma2: f64,
    pub psi: f64,
    /// Exponent of `x` in `w_n`.
    pub power_n: f64,
    /// Exponent of `x` in the limit weight `w`.
    pub power_limit: f64,
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveSigma(sigma2))
    }
}

impl WeightSpec {
    pub fn wigner_dyson(sigma2: f64) -> Result<Self> {
        check_sigma2(sigma2)?;
        Ok(WeightSpec {
            family: Family::WignerDyson,
            sigma2,
            psi: 4.0,
            power_n: 0.0,
            power_limit: 0.0,
        })
    }

    pub fn chiral(sigma2: f64, alpha: f64, n: f64, beta: f64, kappa: f64) -> Result<Self> {
        check_sigma2(sigma2)?;
        if !(kappa > 0.0 && kappa <= 0.5) || n <= 0.0 || alpha < 0.0 {
            return Err(Error::InvalidParams(format!(
                "chiral weight needs alpha >= 0, n > 0, 0 < kappa <= 1/2; got alpha={alpha}, n={n}, kappa={kappa}"
            )));
        }
        Ok(WeightSpec {
            family: Family::Chiral,
            sigma2,
            psi: 2.0,
            power_n: alpha / n,
            power_limit: beta * (1.0 - 2.0 * kappa),
        })
    }

    pub fn bdg(sigma2: f64, psi: f64, alpha: f64, n: f64) -> Result<Self> {
        check_sigma2(sigma2)?;
        if psi <= 0.0 || n <= 0.0 || alpha < 0.0 {
            return Err(Error::InvalidParams(format!(
                "BdG weight needs psi > 0, n > 0, alpha >= 0; got psi={psi}, n={n}, alpha={alpha}"
            )));
        }
        Ok(WeightSpec {
            family: Family::BdG,
            sigma2,
            psi,
            power_n: alpha / n,
            power_limit: 0.0,
        })
    }

    /// Weight of an ensemble, with `sigma2` taken at the limit scale `n * sigma2_eff`.
    pub fn for_ensemble(ensemble: &EnsembleSpec) -> Self {
        let cs = ensemble.class_spec;
        let sigma2 = ensemble.sigma2_limit();
        let n = ensemble.n as f64;
        let alpha = ensemble.alpha().unwrap_or(0) as f64;
        let built = match cs.family {
            Family::WignerDyson => WeightSpec::wigner_dyson(sigma2),
            Family::Chiral => WeightSpec::chiral(sigma2, alpha, n, cs.beta as f64, ensemble.kappa),
            Family::BdG => WeightSpec::bdg(sigma2, cs.psi as f64, alpha, n),
        };
        built.expect("validated ensemble gives a valid weight")
    }

    /// `w == 1` on the support of `family`.
    pub fn flat(family: Family) -> Self {
        WeightSpec {
            family,
            sigma2: f64::INFINITY,
            psi: 1.0,
            power_n: 0.0,
            power_limit: 0.0,
        }
    }

    /// Lower end of the support: `-inf` for Wigner–Dyson, `0` otherwise.
    pub fn support_lo(&self) -> f64 {
        match self.family {
            Family::WignerDyson => f64::NEG_INFINITY,
            _ => 0.0,
        }
    }

    /// Coefficient `c` of `-c x^2` in `log w`.
    pub fn quad_coeff(&self) -> f64 {
        1.0 / (self.psi * self.sigma2)
    }

    pub fn power(&self, at_limit: bool) -> f64 {
        if at_limit {
            self.power_limit
        } else {
            self.power_n
        }
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if !x.is_finite() || x < self.support_lo() {
            return Err(Error::OutOfSupport(x));
        }
        Ok(())
    }
}

/// `log w_n(x)` or `log w(x)`; `-inf` on a zero of the weight.
pub fn log_weight(weight: &WeightSpec, x: f64, at_limit: bool) -> Result<f64> {
    weight.check_x(x)?;
    let q = weight.power(at_limit);
    let power_part = if q == 0.0 {
        0.0
    } else if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        q * x.ln()
    };
    Ok(power_part - weight.quad_coeff() * x * x)
}

pub fn weight_eval(weight: &WeightSpec, x: f64, at_limit: bool) -> Result<f64> {
    log_weight(weight, x, at_limit).map(f64::exp)
}

/// Unnormalized log density of the reduced spectrum `xs` (any order).
pub fn joint_log_density(ensemble: &EnsembleSpec, xs: &[f64]) -> Result<f64> {
    let p = ensemble.p();
    if xs.len() != p {
        return Err(Error::WrongLength {
            expected: p,
            got: xs.len(),
        });
    }
    let cs = ensemble.class_spec;
    let gamma2 = cs.gamma == 2;
    for &x in xs {
        if !x.is_finite() || (gamma2 && x < 0.0) {
            return Err(Error::OutOfSupport(x));
        }
    }
    let beta = cs.beta as f64;
    let g = |x: f64| if gamma2 { x * x } else { x };
    let mut vdm = 0.0;
    for i in 0..p {
        for j in i + 1..p {
            let d = (g(xs[i]) - g(xs[j])).abs();
            if d == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            vdm += d.ln();
        }
    }
    let alpha = ensemble.alpha().unwrap_or(0) as f64;
    let mut power = 0.0;
    if gamma2 && alpha > 0.0 {
        for &x in xs {
            if x == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            power += x.ln();
        }
    }
    let sq: f64 = xs.iter().map(|x| x * x).sum();
    Ok(beta * vdm + alpha * power - sq / (cs.psi as f64 * ensemble.sigma2_eff()))
}
