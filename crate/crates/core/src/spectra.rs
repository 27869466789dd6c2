//! Eigenvalues, the reduced spectrum of `p(n)` values, and empirical measures.
//!
//! The reduced spectrum keeps one value per eigenvalue pair: classes AII, CII
//! and DIII have exactly doubled eigenvalues, which are collapsed to their
//! mean, and for `gamma = 2` classes only the positive half of the `+-`
//! symmetric spectrum is kept. Structural zeros (the `|s - t|` kernel of the
//! chiral classes, the odd DIII kernel, and the single zero of class B, which
//! follows from skew-symmetry in odd dimension) are dropped.

use serde::{Deserialize, Serialize};

use crate::ensembles::{ClassLabel, EnsembleSpec};
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigenvalues;
use crate::par;
use crate::sampler::{check_matches, SampleBatch};
use crate::structure::{validate, StructuredMatrix};

/// Relative tolerance for coincident eigenvalues and for positivity.
pub const COLLAPSE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// All `d(n)` eigenvalues, nonincreasing.
    pub full: Vec<f64>,
    /// The `p(n)` reduced values, nonincreasing.
    pub reduced: Vec<f64>,
}

/// Nonincreasing eigenvalues with multiplicity.
pub fn eigenvalues(matrix: &StructuredMatrix) -> Result<Vec<f64>> {
    validate(matrix).map_err(Error::StructureViolation)?;
    hermitian_eigenvalues(&matrix.entries)
}

fn coincide(a: f64, b: f64) -> bool {
    (a - b).abs() <= COLLAPSE_TOL * 1f64.max(a.abs()).max(b.abs())
}

fn is_doubled(label: ClassLabel) -> bool {
    matches!(
        label,
        ClassLabel::AII | ClassLabel::CII | ClassLabel::DIIIEven | ClassLabel::DIIIOdd
    )
}

/// Collapses consecutive pairs of a nonincreasing sequence of even length.
fn collapse_pairs(full: &[f64]) -> Result<Vec<f64>> {
    let bad: Vec<f64> = full
        .chunks(2)
        .filter(|c| c.len() != 2 || !coincide(c[0], c[1]))
        .map(|c| if c.len() == 2 { (c[0] - c[1]).abs() } else { f64::NAN })
        .collect();
    if !bad.is_empty() {
        return Err(Error::DegenerateSpectrum {
            expected: full.len() / 2,
            got: full.len() / 2 - bad.len(),
            gaps: bad,
        });
    }
    Ok(full.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect())
}

/// Reduction of a full nonincreasing spectrum; `scale` sets the positivity threshold.
pub fn reduce(full: &[f64], ensemble: &EnsembleSpec, scale: f64) -> Result<Vec<f64>> {
    let label = ensemble.label();
    let p = ensemble.p();
    let distinct = if is_doubled(label) {
        collapse_pairs(full)?
    } else {
        full.to_vec()
    };
    let reduced: Vec<f64> = if ensemble.class_spec.gamma == 1 {
        distinct
    } else {
        let tau = COLLAPSE_TOL * scale;
        distinct.into_iter().filter(|&x| x > tau).collect()
    };
    if reduced.len() != p {
        let mut near: Vec<f64> = full.iter().map(|x| x.abs()).collect();
        near.sort_by(f64::total_cmp);
        near.truncate(reduced.len().abs_diff(p) + 1);
        return Err(Error::DegenerateSpectrum {
            expected: p,
            got: reduced.len(),
            gaps: near,
        });
    }
    Ok(reduced)
}

pub fn spectrum(matrix: &StructuredMatrix, ensemble: &EnsembleSpec) -> Result<Spectrum> {
    check_matches(matrix, ensemble)?;
    let full = eigenvalues(matrix)?;
    let reduced = reduce(&full, ensemble, matrix.scale())?;
    Ok(Spectrum { full, reduced })
}

pub fn reduced_spectrum(matrix: &StructuredMatrix, ensemble: &EnsembleSpec) -> Result<Vec<f64>> {
    Ok(spectrum(matrix, ensemble)?.reduced)
}

/// Reduced spectra of every matrix in a batch, in replicate order.
pub fn batch_reduced(batch: &SampleBatch) -> Result<Vec<Vec<f64>>> {
    par::map_indices(batch.matrices.len(), |r| {
        reduced_spectrum(&batch.matrices[r], &batch.ensemble)
    })
    .into_iter()
    .collect()
}

/// `max_i |lambda_i + lambda_{d+1-i}|` for a nonincreasing spectrum.
pub fn pairing_residual(full: &[f64]) -> f64 {
    full.iter()
        .zip(full.iter().rev())
        .map(|(a, b)| (a + b).abs())
        .fold(0.0, f64::max)
}

/// Largest gap within consecutive pairs; zero when every eigenvalue is doubled.
pub fn multiplicity_residual(full: &[f64]) -> f64 {
    if full.len() % 2 == 1 {
        return f64::INFINITY;
    }
    full.chunks(2).map(|c| (c[0] - c[1]).abs()).fold(0.0, f64::max)
}

/// Uniform point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub atoms: Vec<f64>,
}

pub fn empirical_measure(values: &[f64]) -> Result<EmpiricalMeasure> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(&x) = values.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidParams(format!("non-finite atom {x}")));
    }
    let mut atoms = values.to_vec();
    atoms.sort_by(f64::total_cmp);
    Ok(EmpiricalMeasure { atoms })
}

impl EmpiricalMeasure {
    pub fn weight(&self) -> f64 {
        1.0 / self.atoms.len() as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.weight() * self.atoms.len() as f64
    }

    /// Mass of `(-inf, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.partition_point(|&a| a <= x) as f64 * self.weight()
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.atoms.iter().map(|a| a.powi(k)).sum::<f64>() * self.weight()
    }

    /// Pools several measures with equal weight per atom.
    pub fn pooled(parts: &[Vec<f64>]) -> Result<Self> {
        empirical_measure(&parts.concat())
    }
}
