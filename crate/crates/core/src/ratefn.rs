//! The rate functional
//! `I(mu) = (beta/2) kappa^2 E_gamma(mu) - kappa int log w dmu - c`
//! with `E_gamma(mu) = -int int log|x^gamma - y^gamma| dmu dmu`, evaluated on
//! piecewise-constant grid measures.
//!
//! For two cells of width `h` whose left ends differ by `w h`,
//! `int int log|x - y| = h^2 (log h - 3/2 + D(w))` where `D` is the second
//! central difference of `v^2 log|v| / 2` at `w`. The `gamma = 2` kernel
//! splits as `log|x - y| + log(x + y)`, and the second part has the same form
//! with `w = 2 lo / h + i + j + 1`. All cell-pair integrals are therefore exact
//! and finite, including the diagonal ones.

use serde::{Deserialize, Serialize};

use crate::densities::WeightSpec;
use crate::ensembles::{EnsembleSpec, Family};
use crate::equilibrium::DensityCurve;
use crate::error::{Error, Result};
use crate::par;
use crate::spectra::EmpiricalMeasure;

pub const MIN_CELLS: usize = 16;

/// Piecewise-constant probability density on `m` equal cells of `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub lo: f64,
    pub hi: f64,
    pub masses: Vec<f64>,
}

fn normalized(lo: f64, hi: f64, mut masses: Vec<f64>) -> Result<GridMeasure> {
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidParams(format!("need finite lo < hi, got [{lo}, {hi}]")));
    }
    if masses.is_empty() {
        return Err(Error::EmptyInput);
    }
    if masses.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
        return Err(Error::InvalidParams("cell masses must be finite and nonnegative".into()));
    }
    let total = pairwise_sum(&masses);
    if total <= 0.0 {
        return Err(Error::InvalidParams("measure has zero mass".into()));
    }
    masses.iter_mut().for_each(|m| *m /= total);
    Ok(GridMeasure { lo, hi, masses })
}

/// Summation in a fixed binary tree order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n if n <= 8 => v.iter().sum(),
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

impl GridMeasure {
    pub fn new(lo: f64, hi: f64, masses: Vec<f64>) -> Result<Self> {
        normalized(lo, hi, masses)
    }

    pub fn uniform(lo: f64, hi: f64, m: usize) -> Result<Self> {
        normalized(lo, hi, vec![1.0; m])
    }

    pub fn cells(&self) -> usize {
        self.masses.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.cells() as f64
    }

    pub fn edge(&self, k: usize) -> f64 {
        if k == self.cells() {
            self.hi
        } else {
            self.lo + k as f64 * self.width()
        }
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.masses)
    }

    /// Cdf of the piecewise-constant density.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return self.total_mass();
        }
        let u = (x - self.lo) / self.width();
        let k = (u as usize).min(self.cells() - 1);
        self.masses[..k].iter().sum::<f64>() + self.masses[k] * (u - k as f64)
    }

    /// `int x^k dmu`, exact cell by cell.
    pub fn moment(&self, k: i32) -> f64 {
        let h = self.width();
        let terms: Vec<f64> = (0..self.cells())
            .map(|i| {
                let (a, b) = (self.edge(i), self.edge(i + 1));
                self.masses[i] * (b.powi(k + 1) - a.powi(k + 1)) / ((k + 1) as f64 * h)
            })
            .collect();
        pairwise_sum(&terms)
    }

    pub fn shifted(&self, d: f64) -> Self {
        GridMeasure {
            lo: self.lo + d,
            hi: self.hi + d,
            masses: self.masses.clone(),
        }
    }

    /// Image under `x -> f x`, `f > 0`.
    pub fn dilated(&self, f: f64) -> Result<Self> {
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::InvalidParams(format!("dilation factor must be positive, got {f}")));
        }
        Ok(GridMeasure {
            lo: self.lo * f,
            hi: self.hi * f,
            masses: self.masses.clone(),
        })
    }

    /// Same measure moved onto `m` cells of `[lo, hi]`, which must cover the support.
    pub fn rebin(&self, lo: f64, hi: f64, m: usize) -> Result<Self> {
        if lo > self.lo || hi < self.hi {
            return Err(Error::OutOfRange {
                value: if lo > self.lo { self.lo } else { self.hi },
                lo,
                hi,
            });
        }
        let h = (hi - lo) / m as f64;
        let mut out = vec![0.0; m];
        let src_h = self.width();
        for (i, &mass) in self.masses.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let (a, b) = (self.edge(i), self.edge(i + 1));
            let first = (((a - lo) / h).floor().max(0.0) as usize).min(m - 1);
            let last = (((b - lo) / h).ceil() as usize).clamp(first + 1, m);
            for (j, slot) in out.iter_mut().enumerate().take(last).skip(first) {
                let c = lo + j as f64 * h;
                let overlap = (b.min(c + h) - a.max(c)).max(0.0);
                *slot += mass * overlap / src_h;
            }
        }
        normalized(lo, hi, out)
    }

    /// `(1 - t) self + t other` on a common grid covering both supports.
    pub fn mixture(&self, other: &GridMeasure, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfRange { value: t, lo: 0.0, hi: 1.0 });
        }
        let lo = self.lo.min(other.lo);
        let hi = self.hi.max(other.hi);
        let m = self.cells().max(other.cells());
        let a = self.rebin(lo, hi, m)?;
        let b = other.rebin(lo, hi, m)?;
        let masses = a
            .masses
            .iter()
            .zip(&b.masses)
            .map(|(x, y)| (1.0 - t) * x + t * y)
            .collect();
        normalized(lo, hi, masses)
    }

    /// Image under `x -> x^2` on `m` cells of `[lo^2, hi^2]`; needs `lo >= 0`.
    pub fn squared(&self, m: usize) -> Result<Self> {
        if self.lo < 0.0 {
            return Err(Error::UnsupportedTransform(format!(
                "x^2 on a grid starting at {}",
                self.lo
            )));
        }
        let (lo, hi) = (self.lo * self.lo, self.hi * self.hi);
        let h = (hi - lo) / m as f64;
        let src_h = self.width();
        let mut out = vec![0.0; m];
        for (i, &mass) in self.masses.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let (a, b) = (self.edge(i), self.edge(i + 1));
            let first = (((a * a - lo) / h).floor().max(0.0) as usize).min(m - 1);
            let last = (((b * b - lo) / h).ceil() as usize).clamp(first + 1, m);
            for (j, slot) in out.iter_mut().enumerate().take(last).skip(first) {
                let c = lo + j as f64 * h;
                let overlap = (b.min((c + h).sqrt()) - a.max(c.sqrt())).max(0.0);
                *slot += mass * overlap / src_h;
            }
        }
        normalized(lo, hi, out)
    }
}

/// Cell masses from exact cdf increments of `curve`.
pub fn grid_from_curve(curve: &DensityCurve, m: usize) -> Result<GridMeasure> {
    if m < MIN_CELLS {
        return Err(Error::InvalidParams(format!("need at least {MIN_CELLS} cells, got {m}")));
    }
    let (lo, hi) = curve.support();
    let h = (hi - lo) / m as f64;
    let cdfs: Vec<f64> = (0..=m)
        .map(|k| if k == m { curve.mass() } else { curve.cdf(lo + k as f64 * h) })
        .collect();
    normalized(lo, hi, cdfs.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect())
}

/// Histogram of `values` on `m` cells of `[lo, hi]`.
pub fn grid_from_samples(values: &[f64], lo: f64, hi: f64, m: usize) -> Result<GridMeasure> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if m == 0 || !(lo < hi) {
        return Err(Error::InvalidParams(format!("need m >= 1 and lo < hi, got m={m}, [{lo}, {hi}]")));
    }
    let h = (hi - lo) / m as f64;
    let mut counts = vec![0.0; m];
    for &v in values {
        if !(lo..=hi).contains(&v) {
            return Err(Error::OutOfRange { value: v, lo, hi });
        }
        counts[(((v - lo) / h) as usize).min(m - 1)] += 1.0;
    }
    normalized(lo, hi, counts)
}

/// `(v^2 log|v|)/2` with the convention `0 log 0 = 0`.
fn half_v2_log(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        0.5 * v * v * v.abs().ln()
    }
}

/// Second central difference of `v^2 log|v| / 2` at `w >= 0`.
fn second_difference(w: f64) -> f64 {
    if w < 2.0 {
        half_v2_log(w + 1.0) - 2.0 * half_v2_log(w) + half_v2_log(w - 1.0)
    } else {
        let r = 1.0 / w;
        w.ln() + 0.5 * ((w + 1.0).powi(2) * r.ln_1p() + (w - 1.0).powi(2) * (-r).ln_1p())
    }
}

/// `-int int log|x^gamma - y^gamma| dmu dmu`.
pub fn log_energy(mu: &GridMeasure, gamma: u32) -> Result<f64> {
    if gamma != 1 && gamma != 2 {
        return Err(Error::UnsupportedGamma(gamma));
    }
    if gamma == 2 && mu.lo < 0.0 {
        return Err(Error::OutOfSupport(mu.lo));
    }
    let m = mu.cells();
    let h = mu.width();
    let base = h.ln() - 1.5;
    let d1: Vec<f64> = (0..m).map(|k| second_difference(k as f64)).collect();
    let offset = 2.0 * mu.lo / h + 1.0;
    let d2: Vec<f64> = if gamma == 2 {
        (0..2 * m - 1).map(|k| second_difference(offset + k as f64)).collect()
    } else {
        Vec::new()
    };
    let masses = &mu.masses;
    let rows = par::map_indices(m, |i| {
        let mi = masses[i];
        if mi == 0.0 {
            return 0.0;
        }
        let terms: Vec<f64> = (0..m)
            .map(|j| {
                let mut k = d1[i.abs_diff(j)];
                if gamma == 2 {
                    k += d2[i + j];
                }
                masses[j] * k
            })
            .collect();
        mi * pairwise_sum(&terms)
    });
    let total = pairwise_sum(masses);
    let gamma_f = gamma as f64;
    Ok(-(gamma_f * total * total * base + pairwise_sum(&rows)))
}

/// `int_a^b log x dx` for `0 <= a <= b`.
fn int_log(a: f64, b: f64) -> f64 {
    let g = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() - x };
    g(b) - g(a)
}

/// `int log w dmu` for the limit weight, each cell integrated exactly.
pub fn field_term(mu: &GridMeasure, weight: &WeightSpec) -> Result<f64> {
    if mu.lo < weight.support_lo() {
        return Err(Error::OutOfSupport(mu.lo));
    }
    let q = weight.power_limit;
    let c = weight.quad_coeff();
    let h = mu.width();
    let terms: Vec<f64> = (0..mu.cells())
        .map(|i| {
            let mass = mu.masses[i];
            if mass == 0.0 {
                return 0.0;
            }
            let (a, b) = (mu.edge(i), mu.edge(i + 1));
            let quad = c * (b * b * b - a * a * a) / 3.0;
            let power = if q == 0.0 { 0.0 } else { q * int_log(a, b) };
            mass * (power - quad) / h
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// `int log w dmu` for point masses; an atom on a zero of `w` diverges.
pub fn field_term_atoms(mu: &EmpiricalMeasure, weight: &WeightSpec) -> Result<f64> {
    let mut terms = Vec::with_capacity(mu.atoms.len());
    for &x in &mu.atoms {
        let lw = crate::densities::log_weight(weight, x, true)?;
        if lw == f64::NEG_INFINITY {
            return Err(Error::DivergentField(x));
        }
        terms.push(lw * mu.weight());
    }
    Ok(pairwise_sum(&terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFunctional {
    pub beta: f64,
    pub gamma: u32,
    pub kappa: f64,
    pub weight: WeightSpec,
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub energy: f64,
    pub field: f64,
    pub c: f64,
    pub rate: f64,
    pub kappa: f64,
    pub beta: f64,
    pub gamma: u32,
}

impl RateFunctional {
    pub fn new(beta: f64, gamma: u32, kappa: f64, weight: WeightSpec) -> Result<Self> {
        if gamma != 1 && gamma != 2 {
            return Err(Error::UnsupportedGamma(gamma));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::OutOfRange { value: kappa, lo: 0.0, hi: 1.0 });
        }
        if (gamma == 1) != (weight.family == Family::WignerDyson) {
            return Err(Error::InvalidParams(format!(
                "gamma {gamma} does not match the support of a {:?} weight",
                weight.family
            )));
        }
        Ok(RateFunctional { beta, gamma, kappa, weight, c: None })
    }

    pub fn for_ensemble(ensemble: &EnsembleSpec) -> Self {
        let cs = ensemble.class_spec;
        RateFunctional {
            beta: cs.beta as f64,
            gamma: cs.gamma,
            kappa: ensemble.kappa,
            weight: WeightSpec::for_ensemble(ensemble),
            c: None,
        }
    }

    pub fn evaluate(&self, mu: &GridMeasure) -> Result<RateReport> {
        let energy = log_energy(mu, self.gamma)?;
        let field = field_term(mu, &self.weight)?;
        let c = self.c.unwrap_or(0.0);
        let rate = 0.5 * self.beta * self.kappa * self.kappa * energy - self.kappa * field - c;
        Ok(RateReport {
            energy,
            field,
            c,
            rate,
            kappa: self.kappa,
            beta: self.beta,
            gamma: self.gamma,
        })
    }

    pub fn rate(&self, mu: &GridMeasure) -> Result<f64> {
        Ok(self.evaluate(mu)?.rate)
    }

    /// Point masses have infinite logarithmic energy.
    pub fn rate_atoms(&self, _mu: &EmpiricalMeasure) -> f64 {
        f64::INFINITY
    }
}

/// `functional` with `c` chosen so that the rate of `reference` (on `m` cells) is zero.
pub fn calibrate(functional: &RateFunctional, reference: &DensityCurve, m: usize) -> Result<RateFunctional> {
    let uncalibrated = RateFunctional { c: None, ..*functional };
    let value = uncalibrated.rate(&grid_from_curve(reference, m)?)?;
    Ok(RateFunctional { c: Some(value), ..*functional })
}
