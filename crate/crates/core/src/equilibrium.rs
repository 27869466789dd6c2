//! Closed-form limiting spectral measures as [`DensityCurve`]s.
//!
//! Every base family lives on an interval `[lo, hi]` with at worst
//! square-root or inverse-square-root behaviour at the ends. Integrals are
//! taken in the variable `theta` with `x = lo + (hi - lo) sin^2(theta)`, which
//! turns all of these endpoint behaviours into smooth integrands; a composite
//! Gauss–Legendre rule on a uniform `theta` grid then gives the cdf to near
//! machine precision. Pushforwards `x -> x^r` reuse the base parametrization,
//! so they inherit the same accuracy.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::ensembles::{EnsembleSpec, Family};
use crate::error::{Error, Result};
use crate::quadrature::Rule;

pub const DEFAULT_GRID: usize = 2048;
const PANEL_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CurveKind {
    Semicircle { sigma2: f64, beta: f64 },
    Laguerre { s: f64, lambda: f64 },
    Chiral { sigma2: f64, beta: f64, kappa: f64 },
    QuarterCircle { sigma2: f64, beta: f64, kappa: f64, psi: f64 },
    Pushforward { base: Box<CurveKind>, r: f64 },
}

impl CurveKind {
    fn support(&self) -> (f64, f64) {
        match *self {
            CurveKind::Semicircle { sigma2, beta } => {
                let r = 2.0 * (sigma2 * beta).sqrt();
                (-r, r)
            }
            CurveKind::Laguerre { s, lambda } => {
                let (a, b) = laguerre_ends(s, lambda);
                (a, b)
            }
            CurveKind::Chiral { sigma2, beta, kappa } => {
                let (a, b) = chiral_ends(sigma2, beta, kappa);
                (a.sqrt(), b.sqrt())
            }
            CurveKind::QuarterCircle { sigma2, beta, kappa, psi } => {
                (0.0, (2.0 * psi * sigma2 * beta * kappa).sqrt())
            }
            CurveKind::Pushforward { ref base, r } => {
                let (lo, hi) = base.support();
                (lo.powf(r), hi.powf(r))
            }
        }
    }

    /// Density of a base family, zero off the support.
    fn base_pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(lo..=hi).contains(&x) {
            return 0.0;
        }
        match *self {
            CurveKind::Semicircle { sigma2, beta } => {
                (4.0 * sigma2 * beta - x * x).max(0.0).sqrt() / (2.0 * PI * sigma2 * beta)
            }
            CurveKind::Laguerre { s, lambda } => {
                let (a, b) = laguerre_ends(s, lambda);
                if x == 0.0 {
                    return f64::INFINITY;
                }
                lambda / (PI * x) * ((x - a).max(0.0) * (b - x).max(0.0)).sqrt()
            }
            CurveKind::Chiral { sigma2, beta, kappa } => {
                let (a, b) = chiral_ends(sigma2, beta, kappa);
                let c = sigma2 * beta * kappa * PI;
                if x == 0.0 {
                    // only reachable when a = 0, where sqrt(x^2 - a) / x -> 1
                    return b.sqrt() / c;
                }
                (x * x - a).max(0.0).sqrt() * (b - x * x).max(0.0).sqrt() / (c * x)
            }
            CurveKind::QuarterCircle { sigma2, beta, kappa, psi } => {
                let q = psi * sigma2 * beta * kappa;
                2.0 / (q * PI) * (2.0 * q - x * x).max(0.0).sqrt()
            }
            CurveKind::Pushforward { .. } => unreachable!("pushforwards are flattened"),
        }
    }
}

/// `(a, b)` of the Laguerre-weight minimizer.
pub fn laguerre_ends(s: f64, lambda: f64) -> (f64, f64) {
    let root = (2.0 * s + 1.0).sqrt();
    (((s + 1.0 - root) / lambda).max(0.0), (s + 1.0 + root) / lambda)
}

/// `(a, b)` such that the chiral equilibrium lives on `[sqrt a, sqrt b]`.
pub fn chiral_ends(sigma2: f64, beta: f64, kappa: f64) -> (f64, f64) {
    let c = 2.0 * sigma2 * beta;
    let root = (kappa * (1.0 - kappa)).sqrt();
    ((c * (0.5 - root)).max(0.0), c * (0.5 + root))
}

/// A probability density on a compact interval with cached cumulative
/// integrals over `panels` uniform `theta` panels.
#[derive(Debug, Clone)]
pub struct DensityCurve {
    kind: CurveKind,
    base: CurveKind,
    r: f64,
    base_lo: f64,
    base_hi: f64,
    lo: f64,
    hi: f64,
    grid: usize,
    cum: Vec<f64>,
    rule: Rule,
}

impl PartialEq for DensityCurve {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.grid == other.grid
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be positive and finite, got {v}")))
    }
}

impl DensityCurve {
    fn build(base: CurveKind, r: f64, grid: usize) -> Result<Self> {
        if grid < 2 {
            return Err(Error::InvalidParams(format!("grid must be at least 2, got {grid}")));
        }
        let (base_lo, base_hi) = base.support();
        let kind = if r == 1.0 {
            base.clone()
        } else {
            CurveKind::Pushforward {
                base: Box::new(base.clone()),
                r,
            }
        };
        let (lo, hi) = kind.support();
        let mut curve = DensityCurve {
            kind,
            base,
            r,
            base_lo,
            base_hi,
            lo,
            hi,
            grid,
            cum: Vec::new(),
            rule: Rule::new(PANEL_NODES),
        };
        let dt = FRAC_PI_2 / grid as f64;
        let mut cum = Vec::with_capacity(grid + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for k in 0..grid {
            acc += curve.rule.integrate(k as f64 * dt, (k + 1) as f64 * dt, |t| curve.g(t));
            cum.push(acc);
        }
        curve.cum = cum;
        Ok(curve)
    }

    /// `pdf(x(theta)) dx/dtheta`, expressed through the base family.
    fn g(&self, theta: f64) -> f64 {
        let w = self.base_hi - self.base_lo;
        let x = self.base_lo + w * theta.sin().powi(2);
        let v = self.base.base_pdf(x) * w * (2.0 * theta).sin();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    }

    fn theta_of(&self, y: f64) -> f64 {
        let x = if self.r == 1.0 { y } else { y.powf(1.0 / self.r) };
        let t = ((x - self.base_lo) / (self.base_hi - self.base_lo)).clamp(0.0, 1.0);
        t.sqrt().asin()
    }

    fn y_of(&self, theta: f64) -> f64 {
        let x = self.base_lo + (self.base_hi - self.base_lo) * theta.sin().powi(2);
        let y = if self.r == 1.0 { x } else { x.powf(self.r) };
        y.clamp(self.lo, self.hi)
    }

    fn dtheta(&self) -> f64 {
        FRAC_PI_2 / self.grid as f64
    }

    fn cum_at(&self, theta: f64) -> f64 {
        let dt = self.dtheta();
        let k = ((theta / dt) as usize).min(self.grid - 1);
        self.cum[k] + self.rule.integrate(k as f64 * dt, theta, |t| self.g(t))
    }

    pub fn kind(&self) -> &CurveKind {
        &self.kind
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn grid_size(&self) -> usize {
        self.grid
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if !(self.lo..=self.hi).contains(&y) {
            return 0.0;
        }
        if self.r == 1.0 {
            return self.base.base_pdf(y);
        }
        let inv = 1.0 / self.r;
        let f = self.base.base_pdf(y.powf(inv));
        if f == 0.0 {
            return 0.0;
        }
        f * inv * y.powf(inv - 1.0)
    }

    /// Clamped to `[0, 1]`; quadrature error shows in [`Self::mass`] only.
    pub fn cdf(&self, y: f64) -> f64 {
        if y <= self.lo {
            0.0
        } else if y >= self.hi {
            1.0
        } else {
            self.cum_at(self.theta_of(y)).clamp(0.0, 1.0)
        }
    }

    /// Total mass from the cached quadrature.
    pub fn mass(&self) -> f64 {
        self.cum[self.grid]
    }

    /// Generalized inverse of the cdf, with `quantile(0) = lo`, `quantile(1) = hi`.
    pub fn quantile(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return self.lo;
        }
        if q >= 1.0 || q >= self.mass() {
            return self.hi;
        }
        let k = (self.cum.partition_point(|&c| c <= q) - 1).min(self.grid - 1);
        let dt = self.dtheta();
        let (mut a, mut b) = (k as f64 * dt, (k + 1) as f64 * dt);
        let span = self.cum[k + 1] - self.cum[k];
        let mut t = if span > 0.0 {
            a + (q - self.cum[k]) / span * dt
        } else {
            a
        };
        for _ in 0..100 {
            let f = self.cum[k] + self.rule.integrate(k as f64 * dt, t, |s| self.g(s)) - q;
            if f > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let d = self.g(t);
            let newton = t - f / d;
            let next = if d > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if (next - t).abs() <= 1e-16 || b - a <= 1e-16 {
                t = next;
                break;
            }
            t = next;
        }
        self.y_of(t)
    }

    /// The `p` points `quantile((j - 1/2) / p)`, ascending.
    pub fn quantile_points(&self, p: usize) -> Vec<f64> {
        (0..p)
            .map(|j| self.quantile((j as f64 + 0.5) / p as f64))
            .collect()
    }

    /// `integral f dmu`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let dt = self.dtheta();
        (0..self.grid)
            .map(|k| {
                self.rule
                    .integrate(k as f64 * dt, (k + 1) as f64 * dt, |t| f(self.y_of(t)) * self.g(t))
            })
            .sum()
    }

    /// `m` uniformly spaced nodes on the support as `(x, pdf, cdf)`.
    pub fn grid(&self, m: usize) -> Vec<(f64, f64, f64)> {
        let m = m.max(2);
        (0..m)
            .map(|i| {
                let x = if i == m - 1 {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / (m - 1) as f64
                };
                (x, self.pdf(x), self.cdf(x))
            })
            .collect()
    }
}

pub fn semicircle(sigma2: f64, beta: f64) -> Result<DensityCurve> {
    semicircle_with_grid(sigma2, beta, DEFAULT_GRID)
}

pub fn semicircle_with_grid(sigma2: f64, beta: f64, grid: usize) -> Result<DensityCurve> {
    positive("sigma2", sigma2)?;
    if ![1.0, 2.0, 4.0].contains(&beta) {
        return Err(Error::InvalidParams(format!("beta must be 1, 2 or 4, got {beta}")));
    }
    DensityCurve::build(CurveKind::Semicircle { sigma2, beta }, 1.0, grid)
}

pub fn laguerre_minimizer(s: f64, lambda: f64) -> Result<DensityCurve> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidParams(format!("s must be nonnegative, got {s}")));
    }
    positive("lambda", lambda)?;
    DensityCurve::build(CurveKind::Laguerre { s, lambda }, 1.0, DEFAULT_GRID)
}

pub fn chiral(sigma2: f64, beta: f64, kappa: f64) -> Result<DensityCurve> {
    positive("sigma2", sigma2)?;
    positive("beta", beta)?;
    if !(kappa > 0.0 && kappa <= 0.5) {
        return Err(Error::InvalidParams(format!("kappa must lie in (0, 1/2], got {kappa}")));
    }
    DensityCurve::build(CurveKind::Chiral { sigma2, beta, kappa }, 1.0, DEFAULT_GRID)
}

pub fn quarter_circle(sigma2: f64, beta: f64, kappa: f64, psi: f64) -> Result<DensityCurve> {
    positive("sigma2", sigma2)?;
    positive("beta", beta)?;
    positive("kappa", kappa)?;
    positive("psi", psi)?;
    DensityCurve::build(CurveKind::QuarterCircle { sigma2, beta, kappa, psi }, 1.0, DEFAULT_GRID)
}

/// Law of `X^r` for `X ~ curve`; the support must lie in `[0, inf)` unless `r = 1`.
pub fn pushforward_power(curve: &DensityCurve, r: f64) -> Result<DensityCurve> {
    positive("r", r)?;
    if r == 1.0 {
        return Ok(curve.clone());
    }
    if curve.lo < 0.0 {
        return Err(Error::UnsupportedTransform(format!(
            "x^{r} on a support reaching {} below 0",
            curve.lo
        )));
    }
    DensityCurve::build(curve.base.clone(), curve.r * r, curve.grid)
}

/// The limiting measure of the reduced spectrum at the ensemble's own `kappa = p / n`.
pub fn equilibrium_for(ensemble: &EnsembleSpec) -> Result<DensityCurve> {
    let cs = ensemble.class_spec;
    let sigma2 = ensemble.sigma2_limit();
    let beta = cs.beta as f64;
    match cs.family {
        Family::WignerDyson => semicircle(sigma2, beta),
        Family::Chiral => chiral(sigma2, beta, ensemble.kappa),
        Family::BdG => quarter_circle(sigma2, beta, ensemble.kappa, cs.psi as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{make_ensemble, ClassLabel};
    use crate::quadrature::Rule;
    use proptest::prelude::*;

    #[test]
    fn semicircle_examples() {
        let c = semicircle(0.5, 1.0).unwrap();
        let (lo, hi) = c.support();
        assert!((hi - 2f64.sqrt()).abs() < 1e-15 && (lo + hi).abs() < 1e-15);
        assert!((c.pdf(0.0) - 0.450158158078553).abs() < 1e-12);
        assert!((c.mass() - 1.0).abs() < 1e-10);
        // oracle: plain Gauss-Legendre on sin-substituted second moment
        let rule = Rule::new(64);
        let m2 = rule.integrate(-FRAC_PI_2, FRAC_PI_2, |t| {
            let x = hi * t.sin();
            x * x * c.pdf(x) * hi * t.cos()
        });
        assert!((m2 - 0.5).abs() < 1e-10);
        assert!((c.expect(|x| x * x) - 0.5).abs() < 1e-10);
        assert!(c.quantile(0.5).abs() < 1e-12);
        assert!(semicircle(1.0, 3.0).is_err());
        assert!(semicircle(-1.0, 1.0).is_err());
    }

    #[test]
    fn laguerre_examples() {
        let c = laguerre_minimizer(0.0, 1.0).unwrap();
        assert_eq!(c.support(), (0.0, 2.0));
        for x in [0.1, 0.7, 1.9] {
            assert!((c.pdf(x) - ((2.0 - x) / x).sqrt() / PI).abs() < 1e-14);
        }
        let c = laguerre_minimizer(4.0, 2.0).unwrap();
        let (a, b) = c.support();
        assert!((a - 1.0).abs() < 1e-15 && (b - 4.0).abs() < 1e-15);
        for s in [0.0, 1.0, 4.0] {
            for l in [0.5, 1.0, 2.0] {
                let c = laguerre_minimizer(s, l).unwrap();
                assert!((c.mass() - 1.0).abs() < 1e-8, "s={s} l={l}: {}", c.mass());
            }
        }
        assert!(laguerre_minimizer(-1.0, 1.0).is_err());
        assert!(laguerre_minimizer(1.0, 0.0).is_err());
    }

    #[test]
    fn pushforward_examples() {
        let base = laguerre_minimizer(0.0, 1.0).unwrap();
        assert_eq!(pushforward_power(&base, 1.0).unwrap(), base);
        let half = pushforward_power(&base, 0.5).unwrap();
        let (lo, hi) = half.support();
        assert!(lo == 0.0 && (hi - 2f64.sqrt()).abs() < 1e-15);
        for k in 1..100 {
            let x = hi * k as f64 / 100.0;
            assert!((half.pdf(x) - 2.0 / PI * (2.0 - x * x).sqrt()).abs() < 1e-12, "x={x}");
        }
        let general = laguerre_minimizer(4.0, 2.0).unwrap();
        for r in [0.5, 2.0] {
            for c in [&base, &general] {
                let p = pushforward_power(c, r).unwrap();
                assert!((p.mass() - 1.0).abs() < 1e-8);
                // cdf is preserved along the map
                for x in [0.3f64, 1.2, 1.7] {
                    assert!((p.cdf(x.powf(r)) - c.cdf(x)).abs() < 1e-12);
                }
            }
        }
        let sc = semicircle(1.0, 1.0).unwrap();
        assert!(matches!(pushforward_power(&sc, 0.5), Err(Error::UnsupportedTransform(_))));
        assert!(matches!(pushforward_power(&sc, 2.0), Err(Error::UnsupportedTransform(_))));
    }

    #[test]
    fn chiral_endpoints() {
        let (a, b) = chiral_ends(1.0, 2.0, 0.25);
        assert!((a - (2.0 - 3f64.sqrt())).abs() < 1e-12);
        assert!((b - (2.0 + 3f64.sqrt())).abs() < 1e-12);
        let c = chiral(1.0, 2.0, 0.25).unwrap();
        let (lo, hi) = c.support();
        assert!((lo - 0.517638090205041).abs() < 1e-12);
        assert!((hi - 1.931851652578137).abs() < 1e-12);
        assert!((c.mass() - 1.0).abs() < 1e-8);
        for (sigma2, beta, kappa) in [(1.0, 2.0, 0.25), (0.5, 1.0, 0.1), (2.0, 4.0, 0.4)] {
            let (a, b) = chiral_ends(sigma2, beta, kappa);
            let c = 2.0 * sigma2 * beta;
            let root = (kappa * (1.0 - kappa)).sqrt();
            assert!((a + b - c).abs() < 1e-12 * c);
            assert!((a * b - c * c * (0.5 - root) * (0.5 + root)).abs() < 1e-12 * c * c);
        }
    }

    #[test]
    fn chiral_half_is_quarter_circle() {
        for (sigma2, beta) in [(1.0, 2.0), (0.7, 1.0), (1.3, 4.0)] {
            let c = chiral(sigma2, beta, 0.5).unwrap();
            // psi kappa' = 1 matches the two closed forms
            let q = quarter_circle(sigma2, beta, 0.5, 2.0).unwrap();
            assert_eq!(c.support().1, q.support().1);
            let hi = c.support().1;
            for i in 0..1000 {
                let x = hi * i as f64 / 999.0;
                assert!((c.pdf(x) - q.pdf(x)).abs() <= 1e-12, "x={x}");
            }
        }
    }

    #[test]
    fn quarter_circle_class_d() {
        let e = make_ensemble(ClassLabel::D, 10, None, 1.0).unwrap();
        let c = equilibrium_for(&e).unwrap();
        let (lo, hi) = c.support();
        assert!(lo == 0.0 && (hi - 8f64.sqrt()).abs() < 1e-14);
        for x in [0.0, 1.0, 2.5] {
            assert!((c.pdf(x) - (8.0 - x * x).sqrt() / (2.0 * PI)).abs() < 1e-14);
        }
        assert!((c.mass() - 1.0).abs() < 1e-10);
        assert_eq!(c.quantile(1.0), hi);
    }

    #[test]
    fn chiral_square_is_laguerre() {
        for (sigma2, beta, kappa) in [(1.0, 2.0, 0.25), (0.5, 1.0, 0.1), (2.0, 4.0, 0.45), (1.0, 2.0, 0.5)] {
            let sq = pushforward_power(&chiral(sigma2, beta, kappa).unwrap(), 2.0).unwrap();
            let lag = laguerre_minimizer(1.0 / (2.0 * kappa) - 1.0, 1.0 / (2.0 * sigma2 * beta * kappa)).unwrap();
            let (lo, hi) = lag.support();
            assert!((sq.support().0 - lo).abs() < 1e-12 && (sq.support().1 - hi).abs() < 1e-12);
            for i in 1..200 {
                let x = lo + (hi - lo) * i as f64 / 200.0;
                let (u, v) = (sq.pdf(x), lag.pdf(x));
                assert!((u - v).abs() <= 1e-10 * v.max(1.0), "kappa={kappa} x={x}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn every_ensemble_curve_is_a_probability() {
        for label in ClassLabel::ALL {
            for n in [4usize, 5, 9, 16] {
                let s = label.is_chiral().then_some((n / 4).max(1));
                let Ok(e) = make_ensemble(label, n, s, 0.8) else { continue };
                let c = equilibrium_for(&e).unwrap();
                assert!((c.mass() - 1.0).abs() < 1e-8, "{label} n={n}: {}", c.mass());
                let g = c.grid(300);
                assert_eq!(g.first().unwrap().2, 0.0);
                assert!((g.last().unwrap().2 - 1.0).abs() < 1e-8);
                assert!(g.windows(2).all(|w| w[1].2 >= w[0].2));
                assert!(g.iter().all(|p| p.1 >= 0.0));
            }
        }
    }

    #[test]
    fn quantile_round_trips_on_laguerre() {
        let c = laguerre_minimizer(0.0, 1.0).unwrap();
        for k in 1..100 {
            let q = k as f64 / 100.0;
            assert!((c.cdf(c.quantile(q)) - q).abs() < 1e-6);
        }
        assert_eq!(c.quantile(0.0), 0.0);
        assert_eq!(c.quantile(1.0), 2.0);
    }

    proptest! {
        #[test]
        fn quantile_is_monotone_inverse(q1 in 0.0f64..1.0, q2 in 0.0f64..1.0, kappa in 0.05f64..0.5) {
            let c = chiral(1.0, 2.0, kappa).unwrap();
            let (lo, hi) = (q1.min(q2), q1.max(q2));
            prop_assert!(c.quantile(lo) <= c.quantile(hi));
            prop_assert!((c.cdf(c.quantile(q1)) - q1).abs() < 1e-9);
        }
    }
}
