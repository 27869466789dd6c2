//! Gaussian Hamiltonian ensembles `GE(sigma2 / n)`.
//!
//! Every free coordinate is an independent centered Gaussian. Off-diagonal
//! coordinates (real and imaginary parts of strictly upper entries of
//! symmetric, skew or hermitian blocks, and all entries of the chiral
//! off-diagonal block) have variance `v = sigma2_eff`; coordinates on the
//! diagonal of symmetric or hermitian blocks have variance `2v`. With these
//! rules the density of `X` is proportional to `exp(-Tr X^2 / (phi v))`.
//!
//! Gaussian variates come from `rand_distr::StandardNormal` (ziggurat) on a
//! ChaCha8 stream per replicate, see [`crate::rng`].

use rand_distr::{Distribution, StandardNormal};

use crate::ensembles::EnsembleSpec;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::stream_rng;
use crate::structure::{build, param_kinds, validate, ParamKind, StructuredMatrix};

#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub ensemble: EnsembleSpec,
    pub master_seed: u64,
    pub reps: usize,
    pub matrices: Vec<StructuredMatrix>,
}

/// Variance of each free coordinate, in coordinate order.
pub fn param_variances(ensemble: &EnsembleSpec) -> Result<Vec<f64>> {
    let v = ensemble.sigma2_eff();
    Ok(param_kinds(ensemble.label(), ensemble.n, ensemble.s)?
        .into_iter()
        .map(|k| match k {
            ParamKind::Diagonal => 2.0 * v,
            ParamKind::OffDiagonal => v,
        })
        .collect())
}

/// Replicate `rep` of the batch seeded by `seed`.
pub fn sample_one(ensemble: &EnsembleSpec, seed: u64, rep: u64) -> Result<StructuredMatrix> {
    let sd: Vec<f64> = param_variances(ensemble)?.into_iter().map(f64::sqrt).collect();
    Ok(draw(ensemble, &sd, seed, rep))
}

fn draw(ensemble: &EnsembleSpec, sd: &[f64], seed: u64, rep: u64) -> StructuredMatrix {
    let mut rng = stream_rng(seed, rep);
    let params: Vec<f64> = sd
        .iter()
        .map(|s| {
            let z: f64 = StandardNormal.sample(&mut rng);
            s * z
        })
        .collect();
    build(ensemble.label(), ensemble.n, ensemble.s, &params).expect("parameter count matches layout")
}

/// `reps` independent draws; replicate `r` depends only on `(ensemble, seed, r)`.
pub fn sample(ensemble: &EnsembleSpec, seed: u64, reps: usize) -> Result<SampleBatch> {
    if reps == 0 {
        return Err(Error::InvalidReps);
    }
    let sd: Vec<f64> = param_variances(ensemble)?.into_iter().map(f64::sqrt).collect();
    let matrices = par::map_indices(reps, |r| draw(ensemble, &sd, seed, r as u64));
    Ok(SampleBatch {
        ensemble: *ensemble,
        master_seed: seed,
        reps,
        matrices,
    })
}

pub(crate) fn check_matches(matrix: &StructuredMatrix, ensemble: &EnsembleSpec) -> Result<()> {
    if (matrix.label, matrix.n, matrix.s) != (ensemble.label(), ensemble.n, ensemble.s) {
        return Err(Error::EnsembleMismatch(format!(
            "matrix is {} (n={}, s={:?}), ensemble is {} (n={}, s={:?})",
            matrix.label,
            matrix.n,
            matrix.s,
            ensemble.label(),
            ensemble.n,
            ensemble.s
        )));
    }
    Ok(())
}

/// `-Tr(X^2) / (phi * sigma2_eff)`.
pub fn log_density_unnormalized(matrix: &StructuredMatrix, ensemble: &EnsembleSpec) -> Result<f64> {
    check_matches(matrix, ensemble)?;
    validate(matrix).map_err(Error::StructureViolation)?;
    let phi = ensemble.class_spec.phi as f64;
    Ok(-matrix.entries.frobenius_sq() / (phi * ensemble.sigma2_eff()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{make_ensemble, ClassLabel};
    use crate::linalg::CMatrix;
    use crate::structure::{extract, stabilizer_conjugate};

    fn sweep() -> Vec<EnsembleSpec> {
        let mut v = Vec::new();
        for label in ClassLabel::ALL {
            for n in [2usize, 3, 4, 5, 8] {
                let ss: Vec<Option<usize>> = if label.is_chiral() {
                    (1..=n / 2).map(Some).collect()
                } else {
                    vec![None]
                };
                for s in ss {
                    if let Ok(e) = make_ensemble(label, n, s, 1.3) {
                        v.push(e);
                    }
                }
            }
        }
        v
    }

    /// Oracle: the factorized Gaussian exponent over the free coordinates.
    fn factorized_exponent(m: &StructuredMatrix, e: &EnsembleSpec) -> f64 {
        let p = extract(m).unwrap();
        let v = param_variances(e).unwrap();
        p.iter().zip(&v).map(|(x, v)| -x * x / (2.0 * v)).sum()
    }

    #[test]
    fn zero_reps_rejected() {
        let e = make_ensemble(ClassLabel::A, 3, None, 1.0).unwrap();
        assert!(matches!(sample(&e, 1, 0), Err(Error::InvalidReps)));
    }

    #[test]
    fn ci_single_block_variances() {
        let e = make_ensemble(ClassLabel::CI, 1, None, 1.0).unwrap();
        assert_eq!(e.sigma2_eff(), 1.0);
        assert_eq!(param_variances(&e).unwrap(), vec![2.0, 2.0]);
        let batch = sample(&e, 3, 20_000).unwrap();
        let mut m2 = [0.0; 2];
        for m in &batch.matrices {
            let p = extract(m).unwrap();
            m2[0] += p[0] * p[0];
            m2[1] += p[1] * p[1];
        }
        for s in m2 {
            let var = s / 20_000.0;
            // sd of the sample variance of N(0, 2) is 2 sqrt(2 / reps) = 0.02
            assert!((var - 2.0).abs() < 0.08, "{var}");
        }
    }

    #[test]
    fn class_a_mean_trace_square() {
        // E Tr X^2 = sum over coordinates of c_i v_i: n diagonal entries of
        // variance 2v and n(n-1) off-diagonal parts of variance v, each
        // off-diagonal part counted twice in the trace, total 2 v n^2.
        let n = 16;
        let e = make_ensemble(ClassLabel::A, n, None, 1.0).unwrap();
        let reps = 4000;
        let batch = sample(&e, 11, reps).unwrap();
        let tr: Vec<f64> = batch.matrices.iter().map(|m| m.entries.frobenius_sq()).collect();
        let mean = tr.iter().sum::<f64>() / reps as f64;
        let var = tr.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        let expected = 32.0;
        assert_eq!(2.0 * e.sigma2_eff() * (n * n) as f64, expected);
        assert!((mean - expected).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn log_density_examples() {
        let e = make_ensemble(ClassLabel::C, 3, None, 0.8).unwrap();
        let dim = crate::structure::free_dim(ClassLabel::C, 3, None).unwrap();
        let zero = build(ClassLabel::C, 3, None, &vec![0.0; dim]).unwrap();
        assert_eq!(log_density_unnormalized(&zero, &e).unwrap(), 0.0);
        let m = sample_one(&e, 5, 0).unwrap();
        let doubled = StructuredMatrix::from_entries(
            m.label,
            m.n,
            m.s,
            m.entries.scale(num_complex::Complex64::new(2.0, 0.0)),
        );
        let a = log_density_unnormalized(&m, &e).unwrap();
        let b = log_density_unnormalized(&doubled, &e).unwrap();
        assert!((b - 4.0 * a).abs() < 1e-12 * b.abs());
    }

    #[test]
    fn log_density_factorizes_for_every_class() {
        for e in sweep() {
            for rep in 0..10 {
                let m = sample_one(&e, 99, rep).unwrap();
                let direct = log_density_unnormalized(&m, &e).unwrap();
                let oracle = factorized_exponent(&m, &e);
                assert!(
                    (direct - oracle).abs() <= 1e-10 * oracle.abs(),
                    "{} n={} s={:?}: {direct} vs {oracle}",
                    e.label(),
                    e.n,
                    e.s
                );
            }
        }
    }

    #[test]
    fn log_density_is_conjugation_invariant() {
        for (i, e) in sweep().into_iter().enumerate() {
            let m = sample_one(&e, 4, 0).unwrap();
            let c = stabilizer_conjugate(&m, i as u64).unwrap();
            let a = log_density_unnormalized(&m, &e).unwrap();
            let b = log_density_unnormalized(&c, &e).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs(), "{}", e.label());
        }
    }

    #[test]
    fn mismatched_or_invalid_matrix_rejected() {
        let e = make_ensemble(ClassLabel::AI, 3, None, 1.0).unwrap();
        let other = make_ensemble(ClassLabel::A, 3, None, 1.0).unwrap();
        let m = sample_one(&other, 1, 0).unwrap();
        assert!(matches!(log_density_unnormalized(&m, &e), Err(Error::EnsembleMismatch(_))));
        let mut bad = sample_one(&e, 1, 0).unwrap();
        bad.entries = CMatrix::identity(3).scale(num_complex::Complex64::new(0.0, 1.0));
        assert!(matches!(log_density_unnormalized(&bad, &e), Err(Error::StructureViolation(_))));
    }

    #[test]
    fn batches_are_reproducible() {
        let e = make_ensemble(ClassLabel::CII, 6, Some(2), 1.0).unwrap();
        let a = sample(&e, 42, 17).unwrap();
        let b = sample(&e, 42, 17).unwrap();
        assert_eq!(a.matrices, b.matrices);
        assert_eq!(a.matrices[5], sample_one(&e, 42, 5).unwrap());
        let c = sample(&e, 43, 17).unwrap();
        assert_ne!(a.matrices[0], c.matrices[0]);
    }
}
