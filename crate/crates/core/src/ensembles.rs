//! Catalog of the symmetry classes and the per-class constants used
//! throughout the crate.
//!
//! Every class is described by the size of its ambient matrices `d(n)`, the
//! number `p(n)` of eigenvalues entering the joint density, the exponent
//! `alpha` of the `x^alpha` factor, the Dyson index `beta`, and the two
//! Gaussian trace constants `phi`/`psi` relating `Tr X^2` to the Gaussian
//! exponent and to the reduced spectrum.
//!
//! B/D and DIII are split into parity-specific labels so that every lookup
//! is a total function of the label.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    A,
    AI,
    AII,
    AIII,
    B,
    D,
    BDI,
    #[serde(rename = "DIII_even")]
    DIIIEven,
    #[serde(rename = "DIII_odd")]
    DIIIOdd,
    C,
    CI,
    CII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    WignerDyson,
    Chiral,
    BdG,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 12] = [
        ClassLabel::A,
        ClassLabel::AI,
        ClassLabel::AII,
        ClassLabel::AIII,
        ClassLabel::B,
        ClassLabel::D,
        ClassLabel::BDI,
        ClassLabel::DIIIEven,
        ClassLabel::DIIIOdd,
        ClassLabel::C,
        ClassLabel::CI,
        ClassLabel::CII,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::A => "A",
            ClassLabel::AI => "AI",
            ClassLabel::AII => "AII",
            ClassLabel::AIII => "AIII",
            ClassLabel::B => "B",
            ClassLabel::D => "D",
            ClassLabel::BDI => "BDI",
            ClassLabel::DIIIEven => "DIII_even",
            ClassLabel::DIIIOdd => "DIII_odd",
            ClassLabel::C => "C",
            ClassLabel::CI => "CI",
            ClassLabel::CII => "CII",
        }
    }

    pub fn family(self) -> Family {
        use ClassLabel::*;
        match self {
            A | AI | AII => Family::WignerDyson,
            AIII | BDI | CII => Family::Chiral,
            B | D | DIIIEven | DIIIOdd | C | CI => Family::BdG,
        }
    }

    pub fn is_chiral(self) -> bool {
        self.family() == Family::Chiral
    }

    /// Resolve a user-facing class name, including the merged names `B/D`
    /// and `DIII`.
    ///
    /// `DIII` picks the parity label from `n`. `B/D` reads `n` as the size of
    /// the skew-symmetric matrix and returns the label together with the
    /// class parameter (`B`: size `2n + 1`, `D`: size `2n`).
    pub fn resolve(name: &str, n: usize) -> Result<(ClassLabel, usize)> {
        let key = name.trim().to_ascii_uppercase();
        match key.as_str() {
            "B/D" | "BD" => {
                if n < 2 {
                    return Err(Error::InvalidN {
                        n,
                        reason: "B/D needs a matrix size of at least 2".into(),
                    });
                }
                if n % 2 == 1 {
                    Ok((ClassLabel::B, (n - 1) / 2))
                } else {
                    Ok((ClassLabel::D, n / 2))
                }
            }
            "DIII" => {
                if n % 2 == 0 {
                    Ok((ClassLabel::DIIIEven, n))
                } else {
                    Ok((ClassLabel::DIIIOdd, n))
                }
            }
            _ => Ok((key.parse()?, n)),
        }
    }

    pub fn spec(self) -> ClassSpec {
        ClassSpec::of(self)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim();
        ClassLabel::ALL
            .iter()
            .copied()
            .find(|l| l.as_str().eq_ignore_ascii_case(key))
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

/// Immutable per-class record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub label: ClassLabel,
    pub beta: u32,
    pub gamma: u32,
    pub phi: u32,
    pub psi: u32,
    pub family: Family,
}

impl ClassSpec {
    pub fn of(label: ClassLabel) -> ClassSpec {
        use ClassLabel::*;
        let beta = match label {
            AI | BDI | CI => 1,
            A | AIII | B | D | C => 2,
            AII | CII | DIIIEven | DIIIOdd => 4,
        };
        let (phi, psi) = gauss_constants(label);
        let family = label.family();
        ClassSpec {
            label,
            beta,
            gamma: if family == Family::WignerDyson { 1 } else { 2 },
            phi,
            psi,
            family,
        }
    }

    /// Side length `d(n)` of the ambient complex matrices.
    pub fn ambient_dim(&self, n: usize) -> usize {
        use ClassLabel::*;
        match self.label {
            A | AI | AIII | BDI => n,
            B => 2 * n + 1,
            AII | CII | D | DIIIEven | DIIIOdd | C | CI => 2 * n,
        }
    }

    /// Number `p(n)` of reduced eigenvalues. `s` is ignored for non-chiral
    /// classes.
    pub fn reduced_count(&self, n: usize, s: usize) -> usize {
        use ClassLabel::*;
        match self.label {
            AIII | BDI | CII => s.min(n.saturating_sub(s)),
            DIIIEven | DIIIOdd => n / 2,
            _ => n,
        }
    }

    /// Exponent of the `prod x_i^alpha` factor; `None` for Wigner–Dyson
    /// classes, which have no such factor.
    pub fn alpha(&self, n: usize, s: usize) -> Option<u32> {
        use ClassLabel::*;
        let gap = s.abs_diff(n.saturating_sub(s)) as u32;
        match self.label {
            A | AI | AII => None,
            BDI => Some(gap),
            AIII => Some(2 * gap + 1),
            CII => Some(4 * gap + 3),
            B => Some(2),
            D => Some(0),
            C => Some(2),
            CI => Some(1),
            DIIIEven => Some(1),
            DIIIOdd => Some(5),
        }
    }

    /// Support of the reduced eigenvalues: the whole line for `gamma = 1`,
    /// the half line `[0, inf)` otherwise.
    pub fn support(&self) -> (f64, f64) {
        if self.gamma == 1 {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (0.0, f64::INFINITY)
        }
    }

    pub fn ambient_formula(&self) -> &'static str {
        use ClassLabel::*;
        match self.label {
            A | AI | AIII | BDI => "n",
            B => "2n+1",
            _ => "2n",
        }
    }

    pub fn reduced_formula(&self) -> &'static str {
        use ClassLabel::*;
        match self.label {
            AIII | BDI | CII => "min(s,t)",
            DIIIEven | DIIIOdd => "floor(n/2)",
            _ => "n",
        }
    }

    pub fn alpha_formula(&self) -> &'static str {
        use ClassLabel::*;
        match self.label {
            A | AI | AII => "-",
            BDI => "|s-t|",
            AIII => "2|s-t|+1",
            CII => "4|s-t|+3",
            B | C => "2",
            D => "0",
            CI | DIIIEven => "1",
            DIIIOdd => "5",
        }
    }
}

/// The twelve catalog records in label order.
pub fn class_catalog() -> Vec<ClassSpec> {
    ClassLabel::ALL.iter().map(|&l| ClassSpec::of(l)).collect()
}

/// Gaussian trace constants `(phi, psi)`: the sampled density is
/// `exp(-Tr X^2 / (phi sigma^2))` and `Tr X^2 / phi = sum lambda_j^2 / psi`
/// over the reduced spectrum.
pub fn gauss_constants(label: ClassLabel) -> (u32, u32) {
    use ClassLabel::*;
    match label {
        A | AI => (4, 4),
        AII => (8, 4),
        AIII | BDI => (4, 2),
        B | D => (4, 2),
        DIIIEven | DIIIOdd => (8, 2),
        C | CI => (8, 4),
        CII => (8, 2),
    }
}

/// A concrete ensemble `GE(sigma2 / n)` of one class at fixed size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub class_spec: ClassSpec,
    pub n: usize,
    pub s: Option<usize>,
    pub sigma2: f64,
    /// When set, `sigma2` is used as the Gaussian scale directly instead of
    /// `sigma2 / n`.
    pub raw_sigma2: bool,
    pub kappa: f64,
}

/// Build a validated [`EnsembleSpec`] with the `1/n` variance scaling.
pub fn make_ensemble(
    label: ClassLabel,
    n: usize,
    s: Option<usize>,
    sigma2: f64,
) -> Result<EnsembleSpec> {
    check_shape(label, n, s)?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::NonPositiveSigma(sigma2));
    }
    let class_spec = ClassSpec::of(label);
    let p = class_spec.reduced_count(n, s.unwrap_or(0));
    if p == 0 {
        return Err(Error::InvalidN {
            n,
            reason: format!("class {label} has no reduced eigenvalues at this size"),
        });
    }
    Ok(EnsembleSpec {
        class_spec,
        n,
        s,
        sigma2,
        raw_sigma2: false,
        kappa: p as f64 / n as f64,
    })
}

/// Admissibility of `(label, n, s)` without reference to `sigma2`.
pub(crate) fn check_shape(label: ClassLabel, n: usize, s: Option<usize>) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidN {
            n,
            reason: "n must be at least 1".into(),
        });
    }
    match label {
        ClassLabel::DIIIEven if n % 2 != 0 => {
            return Err(Error::InvalidN {
                n,
                reason: "DIII_even needs even n".into(),
            })
        }
        ClassLabel::DIIIOdd if n % 2 != 1 => {
            return Err(Error::InvalidN {
                n,
                reason: "DIII_odd needs odd n".into(),
            })
        }
        _ => {}
    }
    match (label.is_chiral(), s) {
        (true, None) => Err(Error::MissingS(label.to_string())),
        (false, Some(_)) => Err(Error::UnexpectedS(label.to_string())),
        (true, Some(s)) => {
            if s < 1 || 2 * s > n {
                Err(Error::InvalidS { s, n })
            } else {
                Ok(())
            }
        }
        (false, None) => Ok(()),
    }
}

impl EnsembleSpec {
    pub fn label(&self) -> ClassLabel {
        self.class_spec.label
    }

    /// Same ensemble with the `1/n` scaling switched off.
    pub fn with_raw_sigma2(mut self, raw: bool) -> Self {
        self.raw_sigma2 = raw;
        self
    }

    pub fn s_value(&self) -> usize {
        self.s.unwrap_or(0)
    }

    pub fn t(&self) -> Option<usize> {
        self.s.map(|s| self.n - s)
    }

    pub fn d(&self) -> usize {
        self.class_spec.ambient_dim(self.n)
    }

    pub fn p(&self) -> usize {
        self.class_spec.reduced_count(self.n, self.s_value())
    }

    pub fn alpha(&self) -> Option<u32> {
        self.class_spec.alpha(self.n, self.s_value())
    }

    /// Variance scale of the free Gaussian parameters.
    pub fn sigma2_eff(&self) -> f64 {
        if self.raw_sigma2 {
            self.sigma2
        } else {
            self.sigma2 / self.n as f64
        }
    }

    /// The `sigma^2` of the large-`n` description, i.e. `n * sigma2_eff`.
    pub fn sigma2_limit(&self) -> f64 {
        self.sigma2_eff() * self.n as f64
    }
}
