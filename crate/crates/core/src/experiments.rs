//! Monte Carlo harness: convergence of the empirical eigenvalue measure to
//! its equilibrium, decay of deviation probabilities, and the small-`n`
//! joint density check.
//!
//! Every report is a pure function of its arguments. Replicate `r` at size
//! `n` draws from `stream_seed(seed, n)` with replicate index `r`, and all
//! aggregation happens after the parallel map in replicate order.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::densities::joint_log_density;
use crate::ensembles::{make_ensemble, ClassLabel, EnsembleSpec};
use crate::equilibrium::{equilibrium_for, DensityCurve};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::stream_seed;
use crate::sampler::{log_density_unnormalized, param_variances, sample_one};
use crate::spectra::{empirical_measure, multiplicity_residual, pairing_residual, spectrum, EmpiricalMeasure};
use crate::structure::extract;

/// Sup distance between the empirical cdf and `curve`'s cdf.
pub fn ks_distance(empirical: &EmpiricalMeasure, curve: &DensityCurve) -> f64 {
    let atoms = &empirical.atoms;
    let n = atoms.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < atoms.len() {
        let x = atoms[i];
        let mut j = i;
        while j < atoms.len() && atoms[j] == x {
            j += 1;
        }
        let f = curve.cdf(x);
        d = d.max((i as f64 / n - f).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    d.min(1.0)
}

/// How `s` is chosen at each `n` for chiral classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SRule {
    /// Non-chiral classes.
    NotChiral,
    Fixed { s: usize },
    /// `s = max(1, floor(kappa n))`.
    Fraction { kappa: f64 },
}

impl SRule {
    pub fn s_at(&self, n: usize) -> Option<usize> {
        match *self {
            SRule::NotChiral => None,
            SRule::Fixed { s } => Some(s),
            SRule::Fraction { kappa } => Some(((kappa * n as f64).floor() as usize).max(1)),
        }
    }
}

/// `DIII_even` and `DIII_odd` are swapped to match the parity of `n`.
pub fn label_for_n(label: ClassLabel, n: usize) -> ClassLabel {
    match label {
        ClassLabel::DIIIEven | ClassLabel::DIIIOdd if n % 2 == 1 => ClassLabel::DIIIOdd,
        ClassLabel::DIIIEven | ClassLabel::DIIIOdd => ClassLabel::DIIIEven,
        l => l,
    }
}

fn ensemble_at(label: ClassLabel, sigma2: f64, n: usize, s_rule: SRule) -> Result<EnsembleSpec> {
    make_ensemble(label_for_n(label, n), n, s_rule.s_at(n), sigma2)
}

fn check_n_list(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams(format!("n list must be strictly increasing, got {n_list:?}")));
    }
    Ok(())
}

/// Reduced spectrum of replicate `rep`, after the pairing check for `gamma = 2`.
pub fn checked_reduced(ensemble: &EnsembleSpec, seed: u64, rep: u64) -> Result<Vec<f64>> {
    let m = sample_one(ensemble, seed, rep)?;
    let sp = spectrum(&m, ensemble)?;
    if ensemble.class_spec.gamma == 2 {
        let r = pairing_residual(&sp.full);
        if r > 1e-9 * m.scale() {
            return Err(Error::DegenerateSpectrum {
                expected: ensemble.p(),
                got: sp.reduced.len(),
                gaps: vec![r],
            });
        }
    }
    Ok(sp.reduced)
}

fn reduced_batch(ensemble: &EnsembleSpec, seed: u64, reps: usize) -> Result<Vec<Vec<f64>>> {
    par::map_indices(reps, |r| checked_reduced(ensemble, seed, r as u64))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub s: Option<usize>,
    pub reps: usize,
    pub kappa: f64,
    pub ks_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub label: ClassLabel,
    pub sigma2: f64,
    pub s_rule: SRule,
    pub seed: u64,
    pub rows: Vec<ConvergenceRow>,
}

/// KS distance of the pooled reduced spectra to the equilibrium at each `n`.
/// Wall times are recorded only when `timed` is set.
pub fn convergence_experiment(
    label: ClassLabel,
    sigma2: f64,
    n_list: &[usize],
    s_rule: SRule,
    reps: usize,
    seed: u64,
    timed: bool,
) -> Result<ConvergenceReport> {
    if reps == 0 {
        return Err(Error::InvalidReps);
    }
    check_n_list(n_list)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let start = Instant::now();
        let e = ensemble_at(label, sigma2, n, s_rule)?;
        let curve = equilibrium_for(&e)?;
        let pooled = empirical_measure(&reduced_batch(&e, stream_seed(seed, n as u64), reps)?.concat())?;
        let ks = ks_distance(&pooled, &curve);
        rows.push(ConvergenceRow {
            n,
            s: e.s,
            reps,
            kappa: e.kappa,
            ks_distance: ks,
            wall_time_ms: timed.then(|| start.elapsed().as_secs_f64() * 1e3),
        });
    }
    Ok(ConvergenceReport {
        label,
        sigma2,
        s_rule,
        seed,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    pub s: Option<usize>,
    pub reps: usize,
    pub hits: usize,
    pub p_hat: f64,
    /// `-log(p_hat) / n^2`, absent when no replicate deviated.
    pub estimate: Option<f64>,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub label: ClassLabel,
    pub sigma2: f64,
    pub delta: f64,
    pub s_rule: SRule,
    pub seed: u64,
    pub rows: Vec<DecayRow>,
}

/// Frequency of `KS(L_n, mu*) > delta` over single replicates.
pub fn decay_experiment(
    label: ClassLabel,
    sigma2: f64,
    delta: f64,
    n_list: &[usize],
    s_rule: SRule,
    reps: usize,
    seed: u64,
) -> Result<DecayReport> {
    if reps == 0 {
        return Err(Error::InvalidReps);
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParams(format!("delta must be positive, got {delta}")));
    }
    check_n_list(n_list)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let e = ensemble_at(label, sigma2, n, s_rule)?;
        let curve = equilibrium_for(&e)?;
        let stream = stream_seed(seed, n as u64);
        let hit: Vec<Result<bool>> = par::map_indices(reps, |r| {
            let reduced = checked_reduced(&e, stream, r as u64)?;
            Ok(ks_distance(&empirical_measure(&reduced)?, &curve) > delta)
        });
        let mut hits = 0;
        for h in hit {
            hits += h? as usize;
        }
        let p_hat = hits as f64 / reps as f64;
        rows.push(DecayRow {
            n,
            s: e.s,
            reps,
            hits,
            p_hat,
            estimate: (hits > 0).then(|| -p_hat.ln() / (n * n) as f64),
            censored: hits == 0,
        });
    }
    Ok(DecayReport {
        label,
        sigma2,
        delta,
        s_rule,
        seed,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub label: ClassLabel,
    pub n: usize,
    pub s: Option<usize>,
    pub sigma2: f64,
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
    pub reps: usize,
    pub seed: u64,
    /// Replicates with both values inside the box.
    pub in_box: usize,
    pub discrepancy: f64,
}

const ORACLE_SUBCELLS: usize = 16;
const ORACLE_CHUNK: usize = 4096;

/// Sup bin discrepancy between the binned law of the two reduced eigenvalues
/// (raw `sigma2`, no `1/n` scaling) and the normalized joint density.
pub fn density_oracle(
    label: ClassLabel,
    n: usize,
    s: Option<usize>,
    sigma2: f64,
    bins: usize,
    reps: usize,
    seed: u64,
) -> Result<OracleReport> {
    if reps == 0 {
        return Err(Error::InvalidReps);
    }
    if bins == 0 {
        return Err(Error::InvalidParams("bins must be at least 1".into()));
    }
    let e = make_ensemble(label, n, s, sigma2)?.with_raw_sigma2(true);
    if e.p() != 2 {
        return Err(Error::InvalidParams(format!(
            "the oracle needs exactly two reduced eigenvalues, {label} at n={n} has {}",
            e.p()
        )));
    }
    let (lo, hi) = if e.class_spec.gamma == 1 { (-4.0, 4.0) } else { (0.0, 4.0) };
    let w = (hi - lo) / bins as f64;
    let index = |x: f64| -> Option<usize> {
        if (lo..hi).contains(&x) {
            Some((((x - lo) / w) as usize).min(bins - 1))
        } else {
            None
        }
    };

    let chunks = par::chunks(reps, ORACLE_CHUNK);
    let partial: Vec<Result<Vec<u64>>> = par::map_indices(chunks.len(), |c| {
        let mut counts = vec![0u64; bins * bins];
        for r in chunks[c].clone() {
            let x = checked_reduced(&e, seed, r as u64)?;
            if let (Some(i), Some(j)) = (index(x[0]), index(x[1])) {
                counts[i * bins + j] += 1;
            }
        }
        Ok(counts)
    });
    let mut counts = vec![0u64; bins * bins];
    for p in partial {
        for (a, b) in counts.iter_mut().zip(p?) {
            *a += b;
        }
    }
    let in_box: u64 = counts.iter().sum();

    let sub = w / ORACLE_SUBCELLS as f64;
    let model: Vec<f64> = par::map_indices(bins * bins, |k| {
        let (i, j) = (k / bins, k % bins);
        let mut acc = 0.0;
        for a in 0..ORACLE_SUBCELLS {
            let x1 = lo + i as f64 * w + (a as f64 + 0.5) * sub;
            for b in 0..ORACLE_SUBCELLS {
                let x2 = lo + j as f64 * w + (b as f64 + 0.5) * sub;
                if x1 > x2 {
                    acc += joint_log_density(&e, &[x1, x2]).map(f64::exp).unwrap_or(0.0);
                }
            }
        }
        acc
    });
    let z: f64 = model.iter().sum();
    let discrepancy = if in_box == 0 || z == 0.0 {
        1.0
    } else {
        counts
            .iter()
            .zip(&model)
            .map(|(&c, &m)| (c as f64 / in_box as f64 - m / z).abs())
            .fold(0.0, f64::max)
    };
    Ok(OracleReport {
        label,
        n,
        s,
        sigma2,
        bins,
        lo,
        hi,
        reps,
        seed,
        in_box: in_box as usize,
        discrepancy,
    })
}

pub const TRACE_TOL: f64 = 1e-9;
pub const FACTORIZATION_TOL: f64 = 1e-10;
pub const STRUCTURE_TOL: f64 = 1e-9;

/// Worst residuals of the structural checks over one batch. Spectral
/// residuals are relative to the matrix scale; `None` marks checks that do
/// not apply to the class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub label: ClassLabel,
    pub n: usize,
    pub s: Option<usize>,
    pub reps: usize,
    /// `|Tr X^2 / phi - sum x^2 / psi| / Tr X^2`.
    pub trace_residual: f64,
    /// Relative gap between the sampled log density and the factorized
    /// Gaussian exponent over the free parameters.
    pub factorization_residual: f64,
    pub pairing_residual: Option<f64>,
    pub multiplicity_residual: Option<f64>,
    /// Smallest `|lambda|` (class B only).
    pub zero_residual: Option<f64>,
    pub passed: bool,
}

/// Trace identity, density factorization and spectral structure on `reps`
/// fresh samples at unit `sigma2`.
pub fn structural_suite(label: ClassLabel, n: usize, s: Option<usize>, reps: usize, seed: u64) -> Result<SuiteRow> {
    if reps == 0 {
        return Err(Error::InvalidReps);
    }
    let e = make_ensemble(label, n, s, 1.0)?;
    let cs = e.class_spec;
    let variances = param_variances(&e)?;
    let doubled = matches!(label, ClassLabel::AII | ClassLabel::CII | ClassLabel::DIIIEven | ClassLabel::DIIIOdd);
    let per_rep: Vec<Result<[f64; 5]>> = par::map_indices(reps, |r| {
        let m = sample_one(&e, seed, r as u64)?;
        let scale = m.scale();
        let tr = m.entries.frobenius_sq();
        let sp = spectrum(&m, &e)?;
        let sum_sq: f64 = sp.reduced.iter().map(|x| x * x).sum();
        let trace = (tr / cs.phi as f64 - sum_sq / cs.psi as f64).abs() / tr;
        let params = extract(&m)?;
        let exponent: f64 = params.iter().zip(&variances).map(|(p, v)| -p * p / (2.0 * v)).sum();
        let fact = (log_density_unnormalized(&m, &e)? - exponent).abs() / exponent.abs().max(f64::MIN_POSITIVE);
        let zero = sp.full.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        Ok([
            trace,
            fact,
            pairing_residual(&sp.full) / scale,
            multiplicity_residual(&sp.full) / scale,
            zero / scale,
        ])
    });
    let mut worst = [0.0f64; 5];
    for row in per_rep {
        let row = row?;
        for (w, x) in worst.iter_mut().zip(row) {
            *w = w.max(x);
        }
    }
    let pairing = (cs.gamma == 2).then_some(worst[2]);
    let multiplicity = doubled.then_some(worst[3]);
    let zero = (label == ClassLabel::B).then_some(worst[4]);
    let passed = worst[0] <= TRACE_TOL
        && worst[1] <= FACTORIZATION_TOL
        && [pairing, multiplicity, zero].iter().flatten().all(|r| *r <= STRUCTURE_TOL);
    Ok(SuiteRow {
        label,
        n,
        s,
        reps,
        trace_residual: worst[0],
        factorization_residual: worst[1],
        pairing_residual: pairing,
        multiplicity_residual: multiplicity,
        zero_residual: zero,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{quarter_circle, semicircle};

    #[test]
    fn ks_examples() {
        let c = semicircle(1.0, 2.0).unwrap();
        for p in [1usize, 7, 50] {
            let e = empirical_measure(&c.quantile_points(p)).unwrap();
            assert!(ks_distance(&e, &c) <= 0.5 / p as f64 + 1e-6);
        }
        let (lo, _) = c.support();
        let d = ks_distance(&empirical_measure(&[lo]).unwrap(), &c);
        assert!((d - 1.0).abs() < 1e-12);
        let q = quarter_circle(1.0, 2.0, 1.0, 2.0).unwrap();
        let e = empirical_measure(&[0.5, 0.5, 1.0]).unwrap();
        // oracle: brute force over a fine grid of x including both sides of atoms
        let mut brute: f64 = 0.0;
        for k in 0..=30_000 {
            let x = 3.0 * k as f64 / 30_000.0;
            brute = brute.max((e.cdf(x) - q.cdf(x)).abs());
            brute = brute.max((e.cdf(x - 1e-12) - q.cdf(x)).abs());
        }
        assert!((ks_distance(&e, &q) - brute).abs() < 1e-3);
    }

    #[test]
    fn class_a_pooled_ks_is_small() {
        let r = convergence_experiment(ClassLabel::A, 1.0, &[200], SRule::NotChiral, 20, 3, false).unwrap();
        assert!(r.rows[0].ks_distance < 0.05, "{:?}", r.rows);
        assert!(r.rows[0].wall_time_ms.is_none());
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(
            convergence_experiment(ClassLabel::AI, 0.5, &[4], SRule::NotChiral, 0, 1, false),
            Err(Error::InvalidReps)
        ));
        assert!(convergence_experiment(ClassLabel::AI, 0.5, &[8, 4], SRule::NotChiral, 2, 1, false).is_err());
        assert!(matches!(
            convergence_experiment(ClassLabel::AIII, 1.0, &[8], SRule::NotChiral, 2, 1, false),
            Err(Error::MissingS(_))
        ));
        assert!(density_oracle(ClassLabel::AI, 3, None, 0.5, 10, 10, 1).is_err());
    }

    #[test]
    fn delta_one_is_fully_censored() {
        let r = decay_experiment(ClassLabel::A, 1.0, 1.0, &[4, 8], SRule::NotChiral, 200, 9).unwrap();
        assert!(r.rows.iter().all(|row| row.censored && row.hits == 0 && row.estimate.is_none()));
        let again = decay_experiment(ClassLabel::A, 1.0, 1.0, &[4, 8], SRule::NotChiral, 200, 9).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn decay_reports_are_reproducible() {
        let a = decay_experiment(ClassLabel::CII, 1.0, 0.1, &[8, 12], SRule::Fraction { kappa: 0.25 }, 300, 4).unwrap();
        let b = decay_experiment(ClassLabel::CII, 1.0, 0.1, &[8, 12], SRule::Fraction { kappa: 0.25 }, 300, 4).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.rows.iter().all(|r| r.hits <= r.reps));
        assert_eq!(a.rows[0].s, Some(2));
    }

    #[test]
    fn oracle_smoke() {
        let r = density_oracle(ClassLabel::AI, 2, None, 0.5, 40, 10, 1).unwrap();
        assert!(r.discrepancy > 0.05, "{}", r.discrepancy);
        let r = density_oracle(ClassLabel::AI, 2, None, 0.5, 40, 40_000, 1).unwrap();
        assert!(r.discrepancy < 0.01, "{}", r.discrepancy);
    }

    #[test]
    fn diii_parity_follows_n() {
        assert_eq!(label_for_n(ClassLabel::DIIIEven, 5), ClassLabel::DIIIOdd);
        assert_eq!(label_for_n(ClassLabel::DIIIOdd, 6), ClassLabel::DIIIEven);
        let r = convergence_experiment(ClassLabel::DIIIEven, 1.0, &[5, 6], SRule::NotChiral, 2, 1, false).unwrap();
        assert_eq!(r.rows.len(), 2);
    }

    #[test]
    fn structural_suite_passes_every_class() {
        for label in ClassLabel::ALL {
            let (n, s) = match label {
                ClassLabel::DIIIOdd => (5, None),
                l if l.is_chiral() => (6, Some(2)),
                _ => (6, None),
            };
            let row = structural_suite(label, n, s, 10, 3).unwrap();
            assert!(row.passed, "{row:?}");
            assert_eq!(row.pairing_residual.is_some(), label.family() != crate::ensembles::Family::WignerDyson);
            assert_eq!(row.zero_residual.is_some(), label == ClassLabel::B);
        }
        assert!(matches!(structural_suite(ClassLabel::A, 3, None, 0, 1), Err(Error::InvalidReps)));
    }
}
