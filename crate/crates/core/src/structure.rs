//! Matrices in the space of good Hamiltonians of each class: free
//! coordinates, validation of the block relations, and conjugation by the
//! stabilizer group.
//!
//! Coordinates are always read in row-major upper-triangle order inside each
//! block, real part before imaginary part. Layouts (ambient indices):
//!
//! | class | blocks | coordinates |
//! |-------|--------|-------------|
//! | A     | `X` hermitian | diag, then `Re/Im` of `i<j` |
//! | AI    | `X` real symmetric | diag and `i<j` |
//! | AII   | `[[X1, X2], [-conj X2, conj X1]]` | `X1` hermitian, `X2` complex skew |
//! | AIII  | `[[0, X], [X*, 0]]` | `X` complex `s x t` |
//! | BDI   | `[[0, iY], [-iY', 0]]` | `Y` real `s x t` |
//! | CII   | `[[0, Q], [Q*, 0]]`, `Q = [[U, V], [-conj V, conj U]]` | `U`, `V` complex `s x t` |
//! | B, D  | `iY` | `Y` real skew, strict upper triangle |
//! | C     | `[[X1, X2], [conj X2, -conj X1]]` | `X1` hermitian, `X2` complex symmetric |
//! | CI    | `[[A, B], [B, -A]]` | `A`, `B` real symmetric |
//! | DIII  | `i [[Y1, Y2], [Y2, -Y1]]` | `Y1`, `Y2` real skew |

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ensembles::{check_shape, ClassLabel, ClassSpec};
use crate::error::{Error, Result};
use crate::linalg::{expm, CMatrix};

const I: Complex64 = Complex64::new(0.0, 1.0);
const STRUCTURE_TOL: f64 = 1e-12;

/// Whether a free coordinate sits on the diagonal of a (skew-)symmetric or
/// hermitian block. Diagonal coordinates carry twice the variance of the
/// off-diagonal ones under the Gaussian ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Diagonal,
    OffDiagonal,
}

/// A failed structural constraint and how far the matrix is from meeting it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: String,
    pub residual: f64,
}

/// A matrix tagged with its class and size parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMatrix {
    pub label: ClassLabel,
    pub n: usize,
    pub s: Option<usize>,
    pub entries: CMatrix,
}

impl StructuredMatrix {
    /// Wrap arbitrary entries without checking them; see [`validate`].
    pub fn from_entries(label: ClassLabel, n: usize, s: Option<usize>, entries: CMatrix) -> Self {
        StructuredMatrix { label, n, s, entries }
    }

    /// `max(1, largest |entry|)`, the scale used by all tolerances.
    pub fn scale(&self) -> f64 {
        self.entries.max_abs().max(1.0)
    }

    pub fn ambient_dim(&self) -> usize {
        self.entries.dim()
    }
}

/// Number of independent real coordinates of the class space.
pub fn free_dim(label: ClassLabel, n: usize, s: Option<usize>) -> Result<usize> {
    Ok(param_kinds(label, n, s)?.len())
}

/// Kind of every free coordinate, in coordinate order.
pub fn param_kinds(label: ClassLabel, n: usize, s: Option<usize>) -> Result<Vec<ParamKind>> {
    check_shape(label, n, s)?;
    use ClassLabel::*;
    let mut k = Vec::new();
    match label {
        A => hermitian_kinds(n, &mut k),
        AI => real_symmetric_kinds(n, &mut k),
        AII => {
            hermitian_kinds(n, &mut k);
            off_kinds(n * (n - 1), &mut k);
        }
        AIII => off_kinds(2 * rect(n, s), &mut k),
        BDI => off_kinds(rect(n, s), &mut k),
        CII => off_kinds(4 * rect(n, s), &mut k),
        B | D => {
            let d = ClassSpec::of(label).ambient_dim(n);
            off_kinds(d * (d - 1) / 2, &mut k);
        }
        C => {
            hermitian_kinds(n, &mut k);
            complex_symmetric_kinds(n, &mut k);
        }
        CI => {
            real_symmetric_kinds(n, &mut k);
            real_symmetric_kinds(n, &mut k);
        }
        DIIIEven | DIIIOdd => off_kinds(n * (n - 1), &mut k),
    }
    Ok(k)
}

fn rect(n: usize, s: Option<usize>) -> usize {
    let s = s.unwrap_or(0);
    s * (n - s)
}

fn hermitian_kinds(n: usize, k: &mut Vec<ParamKind>) {
    for i in 0..n {
        for j in i..n {
            if i == j {
                k.push(ParamKind::Diagonal);
            } else {
                k.extend([ParamKind::OffDiagonal; 2]);
            }
        }
    }
}

fn real_symmetric_kinds(n: usize, k: &mut Vec<ParamKind>) {
    for i in 0..n {
        for j in i..n {
            k.push(if i == j { ParamKind::Diagonal } else { ParamKind::OffDiagonal });
        }
    }
}

fn complex_symmetric_kinds(n: usize, k: &mut Vec<ParamKind>) {
    for i in 0..n {
        for j in i..n {
            let kind = if i == j { ParamKind::Diagonal } else { ParamKind::OffDiagonal };
            k.extend([kind; 2]);
        }
    }
}

fn off_kinds(count: usize, k: &mut Vec<ParamKind>) {
    k.extend(std::iter::repeat_n(ParamKind::OffDiagonal, count));
}

/// Sequential reader over a coordinate vector.
struct Coords<'a> {
    data: &'a [f64],
    pos: usize,
}

impl Coords<'_> {
    fn next(&mut self) -> f64 {
        let v = self.data[self.pos];
        self.pos += 1;
        v
    }

    fn complex(&mut self) -> Complex64 {
        let re = self.next();
        let im = self.next();
        Complex64::new(re, im)
    }
}

/// Square block as a row-major vector.
struct Block {
    dim: usize,
    data: Vec<Complex64>,
}

impl Block {
    fn zeros(dim: usize) -> Self {
        Block {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.data[i * self.dim + j] = z;
    }
}

fn read_hermitian(n: usize, c: &mut Coords) -> Block {
    let mut b = Block::zeros(n);
    for i in 0..n {
        for j in i..n {
            if i == j {
                b.set(i, i, Complex64::new(c.next(), 0.0));
            } else {
                let z = c.complex();
                b.set(i, j, z);
                b.set(j, i, z.conj());
            }
        }
    }
    b
}

fn read_real_symmetric(n: usize, c: &mut Coords) -> Block {
    let mut b = Block::zeros(n);
    for i in 0..n {
        for j in i..n {
            let z = Complex64::new(c.next(), 0.0);
            b.set(i, j, z);
            b.set(j, i, z);
        }
    }
    b
}

fn read_complex_symmetric(n: usize, c: &mut Coords) -> Block {
    let mut b = Block::zeros(n);
    for i in 0..n {
        for j in i..n {
            let z = c.complex();
            b.set(i, j, z);
            b.set(j, i, z);
        }
    }
    b
}

fn read_complex_skew(n: usize, c: &mut Coords) -> Block {
    let mut b = Block::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let z = c.complex();
            b.set(i, j, z);
            b.set(j, i, -z);
        }
    }
    b
}

fn read_real_skew(n: usize, c: &mut Coords) -> Block {
    let mut b = Block::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let z = Complex64::new(c.next(), 0.0);
            b.set(i, j, z);
            b.set(j, i, -z);
        }
    }
    b
}

fn read_rect(rows: usize, cols: usize, complex: bool, c: &mut Coords) -> Vec<Complex64> {
    (0..rows * cols)
        .map(|_| if complex { c.complex() } else { Complex64::new(c.next(), 0.0) })
        .collect()
}

/// The matrix of the class space with the given free coordinates.
pub fn build(
    label: ClassLabel,
    n: usize,
    s: Option<usize>,
    params: &[f64],
) -> Result<StructuredMatrix> {
    let expected = free_dim(label, n, s)?;
    if params.len() != expected {
        return Err(Error::WrongParamCount {
            expected,
            got: params.len(),
        });
    }
    let d = ClassSpec::of(label).ambient_dim(n);
    let mut m = CMatrix::zeros(d);
    let mut c = Coords { data: params, pos: 0 };
    use ClassLabel::*;
    match label {
        A | AI => {
            let x = if label == A { read_hermitian(n, &mut c) } else { read_real_symmetric(n, &mut c) };
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = x.at(i, j);
                }
            }
        }
        AII => {
            let x1 = read_hermitian(n, &mut c);
            let x2 = read_complex_skew(n, &mut c);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = x1.at(i, j);
                    m[(i, n + j)] = x2.at(i, j);
                    m[(n + i, j)] = -x2.at(i, j).conj();
                    m[(n + i, n + j)] = x1.at(i, j).conj();
                }
            }
        }
        AIII | BDI => {
            let s = s.unwrap_or(0);
            let t = n - s;
            let x = read_rect(s, t, label == AIII, &mut c);
            let factor = if label == BDI { I } else { Complex64::new(1.0, 0.0) };
            for i in 0..s {
                for j in 0..t {
                    let z = x[i * t + j] * factor;
                    m[(i, s + j)] = z;
                    m[(s + j, i)] = z.conj();
                }
            }
        }
        CII => {
            let s = s.unwrap_or(0);
            let t = n - s;
            let u = read_rect(s, t, true, &mut c);
            let v = read_rect(s, t, true, &mut c);
            let off = 2 * s;
            let mut put = |i: usize, j: usize, z: Complex64| {
                m[(i, off + j)] = z;
                m[(off + j, i)] = z.conj();
            };
            for i in 0..s {
                for j in 0..t {
                    let (uz, vz) = (u[i * t + j], v[i * t + j]);
                    put(i, j, uz);
                    put(i, t + j, vz);
                    put(s + i, j, -vz.conj());
                    put(s + i, t + j, uz.conj());
                }
            }
        }
        B | D => {
            let y = read_real_skew(d, &mut c);
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] = I * y.at(i, j);
                }
            }
        }
        C => {
            let x1 = read_hermitian(n, &mut c);
            let x2 = read_complex_symmetric(n, &mut c);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = x1.at(i, j);
                    m[(i, n + j)] = x2.at(i, j);
                    m[(n + i, j)] = x2.at(i, j).conj();
                    m[(n + i, n + j)] = -x1.at(i, j).conj();
                }
            }
        }
        CI => {
            let a = read_real_symmetric(n, &mut c);
            let b = read_real_symmetric(n, &mut c);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = a.at(i, j);
                    m[(i, n + j)] = b.at(i, j);
                    m[(n + i, j)] = b.at(i, j);
                    m[(n + i, n + j)] = -a.at(i, j);
                }
            }
        }
        DIIIEven | DIIIOdd => {
            let y1 = read_real_skew(n, &mut c);
            let y2 = read_real_skew(n, &mut c);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = I * y1.at(i, j);
                    m[(i, n + j)] = I * y2.at(i, j);
                    m[(n + i, j)] = I * y2.at(i, j);
                    m[(n + i, n + j)] = -I * y1.at(i, j);
                }
            }
        }
    }
    debug_assert_eq!(c.pos, params.len());
    Ok(StructuredMatrix::from_entries(label, n, s, m))
}

/// Free coordinates of a validated matrix; the left inverse of [`build`].
pub fn extract(matrix: &StructuredMatrix) -> Result<Vec<f64>> {
    validate(matrix).map_err(Error::StructureViolation)?;
    let (label, n, s) = (matrix.label, matrix.n, matrix.s);
    let m = &matrix.entries;
    let d = m.dim();
    let mut out = Vec::with_capacity(free_dim(label, n, s)?);
    let upper = |r0: usize, c0: usize, size: usize, diag: bool, out: &mut Vec<f64>, f: &dyn Fn(Complex64, bool, &mut Vec<f64>)| {
        for i in 0..size {
            let start = if diag { i } else { i + 1 };
            for j in start..size {
                f(m[(r0 + i, c0 + j)], i == j, out);
            }
        }
    };
    let herm = |z: Complex64, on_diag: bool, out: &mut Vec<f64>| {
        out.push(z.re);
        if !on_diag {
            out.push(z.im);
        }
    };
    let real = |z: Complex64, _: bool, out: &mut Vec<f64>| out.push(z.re);
    let imag = |z: Complex64, _: bool, out: &mut Vec<f64>| out.push(z.im);
    let cplx = |z: Complex64, _: bool, out: &mut Vec<f64>| {
        out.push(z.re);
        out.push(z.im);
    };
    use ClassLabel::*;
    match label {
        A => upper(0, 0, n, true, &mut out, &herm),
        AI => upper(0, 0, n, true, &mut out, &real),
        AII => {
            upper(0, 0, n, true, &mut out, &herm);
            upper(0, n, n, false, &mut out, &cplx);
        }
        AIII | BDI => {
            let s = s.unwrap_or(0);
            for z in m.block(0, s, s, n - s) {
                if label == AIII {
                    cplx(z, false, &mut out);
                } else {
                    imag(z, false, &mut out);
                }
            }
        }
        CII => {
            let s = s.unwrap_or(0);
            let t = n - s;
            let off = 2 * s;
            for z in m.block(0, off, s, t) {
                cplx(z, false, &mut out);
            }
            for z in m.block(0, off + t, s, t) {
                cplx(z, false, &mut out);
            }
        }
        B | D => upper(0, 0, d, false, &mut out, &imag),
        C => {
            upper(0, 0, n, true, &mut out, &herm);
            upper(0, n, n, true, &mut out, &cplx);
        }
        CI => {
            upper(0, 0, n, true, &mut out, &real);
            upper(0, n, n, true, &mut out, &real);
        }
        DIIIEven | DIIIOdd => {
            upper(0, 0, n, false, &mut out, &imag);
            upper(0, n, n, false, &mut out, &imag);
        }
    }
    Ok(out)
}

/// Collects residuals of named constraints and keeps those above tolerance.
struct Checker<'a> {
    m: &'a CMatrix,
    tol: f64,
    violations: Vec<Violation>,
}

impl Checker<'_> {
    fn record(&mut self, constraint: &str, residual: f64) {
        if residual > self.tol || residual.is_nan() {
            self.violations.push(Violation {
                constraint: constraint.to_string(),
                residual,
            });
        }
    }

    /// `max |f(i, j)|` over a block of index pairs.
    fn sweep(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>, f: impl Fn(usize, usize) -> f64) -> f64 {
        let mut r: f64 = 0.0;
        for i in rows {
            for j in cols.clone() {
                r = r.max(f(i, j));
            }
        }
        r
    }

    fn real_valued(&mut self) {
        let m = self.m;
        let d = m.dim();
        let r = self.sweep(0..d, 0..d, |i, j| m[(i, j)].im.abs());
        self.record("real-valued", r);
    }

    fn imaginary_valued(&mut self) {
        let m = self.m;
        let d = m.dim();
        let r = self.sweep(0..d, 0..d, |i, j| m[(i, j)].re.abs());
        self.record("purely imaginary", r);
    }

    fn zero_block(&mut self, name: &str, start: usize, size: usize) {
        let m = self.m;
        let r = self.sweep(start..start + size, start..start + size, |i, j| m[(i, j)].norm());
        self.record(name, r);
    }
}

/// Check every structural constraint of the matrix's class. An empty error
/// list never occurs: `Ok(())` means every constraint holds within
/// `1e-12 * scale`.
pub fn validate(matrix: &StructuredMatrix) -> std::result::Result<(), Vec<Violation>> {
    let violations = violations(matrix);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// All violated constraints, each with its residual.
pub fn violations(matrix: &StructuredMatrix) -> Vec<Violation> {
    let (label, n, s) = (matrix.label, matrix.n, matrix.s);
    if let Err(e) = check_shape(label, n, s) {
        return vec![Violation {
            constraint: format!("admissible parameters ({e})"),
            residual: f64::INFINITY,
        }];
    }
    let m = &matrix.entries;
    let d = ClassSpec::of(label).ambient_dim(n);
    if m.dim() != d {
        return vec![Violation {
            constraint: format!("ambient dimension {d}"),
            residual: m.dim().abs_diff(d) as f64,
        }];
    }
    let mut ck = Checker {
        m,
        tol: STRUCTURE_TOL * matrix.scale(),
        violations: Vec::new(),
    };
    ck.record("hermitian", m.hermitian_residual());
    use ClassLabel::*;
    match label {
        A => {}
        AI => ck.real_valued(),
        AII => {
            let r = ck.sweep(0..n, 0..n, |i, j| (m[(n + i, n + j)] - m[(i, j)].conj()).norm());
            ck.record("lower-right block = conj(X1)", r);
            let r = ck.sweep(0..n, 0..n, |i, j| (m[(n + i, j)] + m[(i, n + j)].conj()).norm());
            ck.record("lower-left block = -conj(X2)", r);
            let r = ck.sweep(0..n, 0..n, |i, j| (m[(i, n + j)] + m[(j, n + i)]).norm());
            ck.record("X2 skew-symmetric", r);
        }
        AIII | BDI => {
            let s = s.unwrap_or(0);
            ck.zero_block("zero upper-left block", 0, s);
            ck.zero_block("zero lower-right block", s, n - s);
            if label == BDI {
                let r = ck.sweep(0..s, s..n, |i, j| m[(i, j)].re.abs());
                ck.record("off-diagonal block purely imaginary", r);
            }
        }
        CII => {
            let s = s.unwrap_or(0);
            let t = n - s;
            let off = 2 * s;
            ck.zero_block("zero upper-left block", 0, 2 * s);
            ck.zero_block("zero lower-right block", 2 * s, 2 * t);
            let r = ck.sweep(0..s, 0..t, |i, j| {
                let u = m[(i, off + j)];
                let v = m[(i, off + t + j)];
                (m[(s + i, off + t + j)] - u.conj())
                    .norm()
                    .max((m[(s + i, off + j)] + v.conj()).norm())
            });
            ck.record("quaternionic off-diagonal block", r);
        }
        B | D => {
            ck.imaginary_valued();
            let r = ck.sweep(0..d, 0..d, |i, j| (m[(i, j)] + m[(j, i)]).norm());
            ck.record("skew-symmetric", r);
        }
        C => {
            let r = ck.sweep(0..n, 0..n, |i, j| (m[(n + i, n + j)] + m[(i, j)].conj()).norm());
            ck.record("lower-right block = -conj(X1)", r);
            let r = ck.sweep(0..n, 0..n, |i, j| (m[(n + i, j)] - m[(i, n + j)].conj()).norm());
            ck.record("lower-left block = conj(X2)", r);
            let r = ck.sweep(0..n, 0..n, |i, j| (m[(i, n + j)] - m[(j, n + i)]).norm());
            ck.record("X2 symmetric", r);
        }
        CI | DIIIEven | DIIIOdd => {
            if label == CI {
                ck.real_valued();
            } else {
                ck.imaginary_valued();
            }
            let r = ck.sweep(0..n, 0..n, |i, j| (m[(n + i, n + j)] + m[(i, j)]).norm());
            ck.record("lower-right block = -X1", r);
            let r = ck.sweep(0..n, 0..n, |i, j| (m[(n + i, j)] - m[(i, n + j)]).norm());
            ck.record("lower-left block = X2", r);
            let (name, sign) = if label == CI { ("X2 symmetric", -1.0) } else { ("X2 skew-symmetric", 1.0) };
            let r = ck.sweep(0..n, 0..n, |i, j| (m[(i, n + j)] + m[(j, n + i)] * sign).norm());
            ck.record(name, r);
        }
    }
    ck.violations
}

/// An element `k` of the stabilizer group of a class space; conjugation
/// `X -> k X k*` maps the space to itself and preserves the spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizerElement {
    pub label: ClassLabel,
    pub n: usize,
    pub s: Option<usize>,
    pub k: CMatrix,
}

impl StabilizerElement {
    pub fn identity(label: ClassLabel, n: usize, s: Option<usize>) -> Result<Self> {
        check_shape(label, n, s)?;
        Ok(StabilizerElement {
            label,
            n,
            s,
            k: CMatrix::identity(ClassSpec::of(label).ambient_dim(n)),
        })
    }

    /// Pseudo-random group element `exp(K)` for a Gaussian generator `K` of
    /// the stabilizer's Lie algebra.
    ///
    /// Generators: `i * (class A)` for A; real skew for AI, B, D;
    /// `i * (class C)` for AII and C (the compact symplectic algebra in the
    /// quaternionic embedding); block-diagonal pairs for the chiral classes;
    /// `u(n)` embedded as `K_R + i K_I -> [[K_R, K_I], [-K_I, K_R]]` for CI
    /// and DIII.
    pub fn random(label: ClassLabel, n: usize, s: Option<usize>, seed: u64) -> Result<Self> {
        check_shape(label, n, s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = ClassSpec::of(label).ambient_dim(n);
        let mut gaussians = |count: usize| -> Vec<f64> {
            (0..count).map(|_| StandardNormal.sample(&mut rng)).collect()
        };
        let mut gen = |l: ClassLabel, m: usize| -> Result<CMatrix> {
            let p = gaussians(free_dim(l, m, None)?);
            Ok(build(l, m, None, &p)?.entries.scale(I))
        };
        use ClassLabel::*;
        let k = match label {
            A => gen(A, n)?,
            AI => real_skew_generator(d, &mut gaussians),
            B | D => real_skew_generator(d, &mut gaussians),
            AII | C => gen(C, n)?,
            AIII | BDI | CII => {
                let s = s.unwrap_or(0);
                let t = n - s;
                let (gs, gt, scale) = match label {
                    AIII => (gen(A, s)?, gen(A, t)?, 1),
                    BDI => (
                        real_skew_generator(s, &mut gaussians),
                        real_skew_generator(t, &mut gaussians),
                        1,
                    ),
                    _ => (gen(C, s)?, gen(C, t)?, 2),
                };
                let mut k = CMatrix::zeros(d);
                let (bs, bt) = (scale * s, scale * t);
                for i in 0..bs {
                    for j in 0..bs {
                        k[(i, j)] = gs[(i, j)];
                    }
                }
                for i in 0..bt {
                    for j in 0..bt {
                        k[(bs + i, bs + j)] = gt[(i, j)];
                    }
                }
                k
            }
            CI | DIIIEven | DIIIOdd => {
                let u = gen(A, n)?;
                let mut k = CMatrix::zeros(d);
                for i in 0..n {
                    for j in 0..n {
                        let z = u[(i, j)];
                        k[(i, j)] = Complex64::new(z.re, 0.0);
                        k[(i, n + j)] = Complex64::new(z.im, 0.0);
                        k[(n + i, j)] = Complex64::new(-z.im, 0.0);
                        k[(n + i, n + j)] = Complex64::new(z.re, 0.0);
                    }
                }
                k
            }
        };
        // keep the generator norm O(1) so the exponential is well conditioned
        let norm = k.frobenius_sq().sqrt().max(1e-300);
        let k = k.scale(Complex64::new(2.0 / norm, 0.0));
        Ok(StabilizerElement {
            label,
            n,
            s,
            k: expm(&k),
        })
    }

    /// `max |k k* - 1|`.
    pub fn unitarity_residual(&self) -> f64 {
        let d = self.k.dim();
        self.k
            .matmul(&self.k.adjoint())
            .add(&CMatrix::identity(d).scale(Complex64::new(-1.0, 0.0)))
            .max_abs()
    }
}

fn real_skew_generator(d: usize, gaussians: &mut impl FnMut(usize) -> Vec<f64>) -> CMatrix {
    let g = gaussians(d * d.saturating_sub(1) / 2);
    let mut k = CMatrix::zeros(d);
    let mut it = g.into_iter();
    for i in 0..d {
        for j in i + 1..d {
            let v = it.next().unwrap_or(0.0);
            k[(i, j)] = Complex64::new(v, 0.0);
            k[(j, i)] = Complex64::new(-v, 0.0);
        }
    }
    k
}

/// `k X k*` for a given stabilizer element.
pub fn conjugate_with(matrix: &StructuredMatrix, k: &StabilizerElement) -> Result<StructuredMatrix> {
    if (k.label, k.n, k.s) != (matrix.label, matrix.n, matrix.s) {
        return Err(Error::EnsembleMismatch(format!(
            "stabilizer for {} (n={}, s={:?}) applied to {} (n={}, s={:?})",
            k.label, k.n, k.s, matrix.label, matrix.n, matrix.s
        )));
    }
    validate(matrix).map_err(Error::StructureViolation)?;
    let mut entries = matrix.entries.conjugate_by(&k.k);
    // the product is hermitian up to rounding; symmetrize so the result
    // validates at the same tolerance as the input
    let d = entries.dim();
    for i in 0..d {
        let re = entries[(i, i)].re;
        entries[(i, i)] = Complex64::new(re, 0.0);
        for j in i + 1..d {
            let z = 0.5 * (entries[(i, j)] + entries[(j, i)].conj());
            entries[(i, j)] = z;
            entries[(j, i)] = z.conj();
        }
    }
    Ok(StructuredMatrix::from_entries(matrix.label, matrix.n, matrix.s, entries))
}

/// Conjugate by a pseudo-random stabilizer element drawn from `seed`.
pub fn stabilizer_conjugate(matrix: &StructuredMatrix, seed: u64) -> Result<StructuredMatrix> {
    let k = StabilizerElement::random(matrix.label, matrix.n, matrix.s, seed)?;
    conjugate_with(matrix, &k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;
    use proptest::prelude::*;
    use rand::Rng;

    /// A few admissible `(label, n, s)` triples per class.
    fn shapes() -> Vec<(ClassLabel, usize, Option<usize>)> {
        let mut v = Vec::new();
        for label in ClassLabel::ALL {
            for n in [1usize, 2, 3, 4, 5, 6] {
                if label.is_chiral() {
                    for s in 1..=n / 2 {
                        v.push((label, n, Some(s)));
                    }
                } else if check_shape(label, n, None).is_ok() {
                    v.push((label, n, None));
                }
            }
        }
        v
    }

    fn random_params(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-3.0..3.0)).collect()
    }

    #[test]
    fn free_dim_examples() {
        assert_eq!(free_dim(ClassLabel::AI, 3, None).unwrap(), 6);
        assert_eq!(free_dim(ClassLabel::A, 2, None).unwrap(), 4);
        assert_eq!(free_dim(ClassLabel::D, 2, None).unwrap(), 6);
        assert_eq!(free_dim(ClassLabel::B, 2, None).unwrap(), 10);
        assert_eq!(free_dim(ClassLabel::CII, 5, Some(2)).unwrap(), 24);
        assert_eq!(free_dim(ClassLabel::C, 2, None).unwrap(), 4 + 6);
        assert!(free_dim(ClassLabel::AI, 3, Some(1)).is_err());
    }

    #[test]
    fn zero_params_give_valid_zero_matrix() {
        for (label, n, s) in shapes() {
            let m = build(label, n, s, &vec![0.0; free_dim(label, n, s).unwrap()]).unwrap();
            assert_eq!(m.entries.max_abs(), 0.0);
            assert!(validate(&m).is_ok(), "{label} n={n}");
            assert!(extract(&m).unwrap().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn ci_single_block_example() {
        let m = build(ClassLabel::CI, 1, None, &[0.7, -1.3]).unwrap();
        let e = &m.entries;
        assert_eq!(e[(0, 0)], Complex64::new(0.7, 0.0));
        assert_eq!(e[(0, 1)], Complex64::new(-1.3, 0.0));
        assert_eq!(e[(1, 0)], Complex64::new(-1.3, 0.0));
        assert_eq!(e[(1, 1)], Complex64::new(-0.7, 0.0));
    }

    #[test]
    fn bdi_off_block_example() {
        let m = build(ClassLabel::BDI, 3, Some(1), &[2.0, -5.0]).unwrap();
        let e = &m.entries;
        assert_eq!(e[(0, 1)], Complex64::new(0.0, 2.0));
        assert_eq!(e[(0, 2)], Complex64::new(0.0, -5.0));
        assert_eq!(e[(1, 0)], Complex64::new(0.0, -2.0));
        assert_eq!(e[(0, 0)], Complex64::new(0.0, 0.0));
        for i in 1..3 {
            for j in 1..3 {
                assert_eq!(e[(i, j)].norm(), 0.0);
            }
        }
        assert_eq!(e.hermitian_residual(), 0.0);
    }

    #[test]
    fn wrong_param_count() {
        assert_eq!(
            build(ClassLabel::A, 2, None, &[1.0]),
            Err(Error::WrongParamCount { expected: 4, got: 1 })
        );
    }

    #[test]
    fn round_trip_is_exact() {
        for (seed, (label, n, s)) in shapes().into_iter().enumerate() {
            for rep in 0..20 {
                let p = random_params(free_dim(label, n, s).unwrap(), (seed * 100 + rep) as u64);
                let m = build(label, n, s, &p).unwrap();
                assert!(validate(&m).is_ok(), "{label} n={n} s={s:?}");
                assert_eq!(extract(&m).unwrap(), p, "{label} n={n} s={s:?}");
            }
        }
    }

    #[test]
    fn broken_symmetry_is_rejected() {
        let mut m = build(ClassLabel::AI, 3, None, &random_params(6, 1)).unwrap();
        m.entries[(0, 1)] += Complex64::new(0.0, 0.25);
        m.entries[(1, 0)] -= Complex64::new(0.0, 0.25);
        let v = violations(&m);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, "real-valued");
        assert_eq!(v[0].residual, 0.25);
        assert!(matches!(extract(&m), Err(Error::StructureViolation(_))));

        let mut m = build(ClassLabel::D, 2, None, &random_params(6, 2)).unwrap();
        m.entries[(0, 2)] += Complex64::new(0.0, 1.0);
        assert!(extract(&m).is_err());
    }

    #[test]
    fn aii_block_relation_is_named() {
        let n = 3;
        let mut m = build(ClassLabel::AII, n, None, &random_params(2 * n * n - n, 3)).unwrap();
        // make X2 symmetric in one entry while keeping the matrix hermitian
        // and the lower-left relation intact
        let z = m.entries[(0, n + 1)];
        m.entries[(1, n)] = z;
        m.entries[(n, 1)] = z.conj();
        m.entries[(n + 1, 0)] = -z.conj();
        m.entries[(0, n + 1)] = z;
        m.entries[(1, n)] = z;
        let names: Vec<_> = violations(&m).into_iter().map(|v| v.constraint).collect();
        assert!(names.contains(&"X2 skew-symmetric".to_string()), "{names:?}");
    }

    #[test]
    fn every_class_has_a_checked_structure() {
        // the zero matrix plus a generic hermitian perturbation must fail for
        // every class except A
        for (label, n, s) in shapes().into_iter().filter(|t| t.1 >= 2) {
            let d = ClassSpec::of(label).ambient_dim(n);
            let mut e = CMatrix::zeros(d);
            for i in 0..d {
                for j in i..d {
                    let z = Complex64::new(0.1 * (i + 2 * j) as f64 + 0.3, 0.05 * (j as f64 - i as f64));
                    e[(i, j)] = if i == j { Complex64::new(z.re, 0.0) } else { z };
                    e[(j, i)] = e[(i, j)].conj();
                }
            }
            let m = StructuredMatrix::from_entries(label, n, s, e);
            assert_eq!(validate(&m).is_ok(), label == ClassLabel::A, "{label} n={n}");
        }
    }

    #[test]
    fn trace_square_is_a_diagonal_quadratic_form() {
        for (label, n, s) in shapes() {
            let m = free_dim(label, n, s).unwrap();
            let coeff: Vec<f64> = (0..m)
                .map(|i| {
                    let mut e = vec![0.0; m];
                    e[i] = 1.0;
                    build(label, n, s, &e).unwrap().entries.frobenius_sq()
                })
                .collect();
            assert!(coeff.iter().all(|&c| c > 0.0));
            for rep in 0..5 {
                let p = random_params(m, rep);
                let tr = build(label, n, s, &p).unwrap().entries.frobenius_sq();
                let q: f64 = p.iter().zip(&coeff).map(|(x, c)| c * x * x).sum();
                assert!((tr - q).abs() <= 1e-12 * tr.max(1.0), "{label} n={n}");
            }
        }
    }

    #[test]
    fn identity_stabilizer_leaves_matrix_unchanged() {
        let m = build(ClassLabel::C, 2, None, &random_params(10, 9)).unwrap();
        let k = StabilizerElement::identity(ClassLabel::C, 2, None).unwrap();
        assert_eq!(conjugate_with(&m, &k).unwrap(), m);
    }

    #[test]
    fn stabilizer_preserves_structure_and_spectrum() {
        for (i, (label, n, s)) in shapes().into_iter().enumerate() {
            let p = random_params(free_dim(label, n, s).unwrap(), i as u64 + 500);
            let m = build(label, n, s, &p).unwrap();
            let k = StabilizerElement::random(label, n, s, i as u64).unwrap();
            assert!(k.unitarity_residual() < 1e-12, "{label}: {}", k.unitarity_residual());
            let c = conjugate_with(&m, &k).unwrap();
            assert!(validate(&c).is_ok(), "{label} n={n} s={s:?}: {:?}", violations(&c));
            let before = hermitian_eigenvalues(&m.entries).unwrap();
            let after = hermitian_eigenvalues(&c.entries).unwrap();
            let scale = m.scale();
            for (a, b) in before.iter().zip(&after) {
                assert!((a - b).abs() <= 1e-9 * scale, "{label}: {a} vs {b}");
            }
            // a nontrivial group element actually moves generic matrices
            if free_dim(label, n, s).unwrap() > 2 && d_of(label, n) > 2 {
                assert!(c.entries.add(&m.entries.scale(Complex64::new(-1.0, 0.0))).max_abs() > 1e-6);
            }
        }
    }

    fn d_of(label: ClassLabel, n: usize) -> usize {
        ClassSpec::of(label).ambient_dim(n)
    }

    #[test]
    fn aiii_conjugation_keeps_zero_blocks() {
        let (n, s) = (7, 3);
        let m = build(ClassLabel::AIII, n, Some(s), &random_params(2 * s * (n - s), 4)).unwrap();
        let c = stabilizer_conjugate(&m, 11).unwrap();
        for i in 0..s {
            for j in 0..s {
                assert!(c.entries[(i, j)].norm() < 1e-13);
            }
        }
    }

    proptest! {
        #[test]
        fn build_is_linear(seed in 0u64..1000, a in -2.0f64..2.0) {
            let shapes = shapes();
            let (label, n, s) = shapes[(seed as usize) % shapes.len()];
            let m = free_dim(label, n, s).unwrap();
            let p = random_params(m, seed);
            let q = random_params(m, seed + 7);
            let lin: Vec<f64> = p.iter().zip(&q).map(|(x, y)| a * x + y).collect();
            let lhs = build(label, n, s, &lin).unwrap().entries;
            let rhs = build(label, n, s, &p).unwrap().entries.scale(Complex64::new(a, 0.0))
                .add(&build(label, n, s, &q).unwrap().entries);
            prop_assert!(lhs.add(&rhs.scale(Complex64::new(-1.0, 0.0))).max_abs() < 1e-13);
        }
    }
}
