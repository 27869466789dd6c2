use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;
use tenfold::densities::{joint_log_density, log_weight, WeightSpec};
use tenfold::ensembles::{class_catalog, make_ensemble, ClassLabel, EnsembleSpec};
use tenfold::equilibrium::equilibrium_for;
use tenfold::error::Error;
use tenfold::experiments::{
    convergence_experiment, decay_experiment, density_oracle, label_for_n, structural_suite, SRule, SuiteRow,
};
use tenfold::io::{matrices_to_json, read_grid_csv, spectrum_rows, to_json, write_curve_csv, write_grid_csv, write_spectra_csv};
use tenfold::ratefn::{calibrate, grid_from_curve, RateFunctional, MIN_CELLS};
use tenfold::spectra::batch_reduced;

use crate::{usage, write_atomic, EnsembleArgs, ExperimentArgs, Failure, Format, Outcome, Sink};

/// Argument-level errors become usage failures naming the flag.
fn arg_error(e: Error) -> Failure {
    let flag = match e {
        Error::UnknownLabel(_) => "--class",
        Error::InvalidN { .. } => "--n",
        Error::MissingS(_) | Error::UnexpectedS(_) | Error::InvalidS { .. } => "--s",
        Error::NonPositiveSigma(_) => "--sigma2",
        Error::InvalidReps => "--reps",
        other => return other.into(),
    };
    usage(flag, e.to_string())
}

fn ensemble(args: &EnsembleArgs, raw_sigma2: bool) -> Outcome<EnsembleSpec> {
    let (label, n) = ClassLabel::resolve(&args.class, args.n).map_err(arg_error)?;
    Ok(make_ensemble(label, n, args.s, args.sigma2).map_err(arg_error)?.with_raw_sigma2(raw_sigma2))
}

fn check_reps(reps: usize) -> Outcome {
    if reps == 0 {
        return Err(arg_error(Error::InvalidReps));
    }
    Ok(())
}

fn json_body<T: serde::Serialize>(value: &T) -> Outcome<String> {
    let mut s = to_json(value)?;
    s.push('\n');
    Ok(s)
}

fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> tenfold::error::Result<()>) -> Outcome<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Failure::Runtime(e.to_string()))
}

pub fn classes(sink: &Sink) -> Outcome {
    let catalog = class_catalog();
    let body = match sink.format {
        Format::Json => {
            let rows: Vec<_> = catalog
                .iter()
                .map(|c| {
                    json!({
                        "label": c.label, "family": c.family, "d": c.ambient_formula(),
                        "p": c.reduced_formula(), "alpha": c.alpha_formula(), "beta": c.beta,
                        "gamma": c.gamma, "phi": c.phi, "psi": c.psi,
                    })
                })
                .collect();
            json_body(&rows)?
        }
        Format::Csv => {
            let mut s = String::from("label,family,d,p,alpha,beta,gamma,phi,psi\n");
            for c in &catalog {
                let _ = writeln!(
                    s,
                    "{},{:?},{},{},{},{},{},{},{}",
                    c.label, c.family, c.ambient_formula(), c.reduced_formula(), c.alpha_formula(),
                    c.beta, c.gamma, c.phi, c.psi
                );
            }
            s
        }
        Format::Text => {
            let mut s = format!(
                "{:<10} {:<12} {:<6} {:<10} {:<10} {:>4} {:>5} {:>3} {:>3}\n",
                "label", "family", "d(n)", "p(n)", "alpha", "beta", "gamma", "phi", "psi"
            );
            for c in &catalog {
                let _ = writeln!(
                    s,
                    "{:<10} {:<12} {:<6} {:<10} {:<10} {:>4} {:>5} {:>3} {:>3}",
                    c.label.as_str(), format!("{:?}", c.family), c.ambient_formula(), c.reduced_formula(),
                    c.alpha_formula(), c.beta, c.gamma, c.phi, c.psi
                );
            }
            s
        }
    };
    sink.emit(&body)
}

pub fn sample(
    args: &EnsembleArgs,
    seed: u64,
    reps: usize,
    raw_sigma2: bool,
    emit_matrix: Option<&Path>,
    sink: &Sink,
) -> Outcome {
    let e = ensemble(args, raw_sigma2)?;
    check_reps(reps)?;
    let batch = tenfold::sampler::sample(&e, seed, reps)?;
    let rows = spectrum_rows(&batch, &batch_reduced(&batch)?);
    if let Some(path) = emit_matrix {
        write_atomic(path, matrices_to_json(&batch.matrices)?.as_bytes())?;
    }
    let body = match sink.format {
        Format::Json => json_body(&rows)?,
        _ => csv_string(|w| write_spectra_csv(w, &rows))?,
    };
    sink.emit(&body)
}

fn finite_or_text(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

pub fn density(args: &EnsembleArgs, values: &[f64], raw_sigma2: bool, sink: &Sink) -> Outcome {
    let e = ensemble(args, raw_sigma2)?;
    let value_error = |e: Error| match e {
        Error::WrongLength { .. } | Error::OutOfSupport(_) => usage("--values", e.to_string()),
        other => other.into(),
    };
    let log_density = joint_log_density(&e, values).map_err(value_error)?;
    let weight = WeightSpec::for_ensemble(&e);
    let mut finite_n = Vec::with_capacity(values.len());
    let mut limit = Vec::with_capacity(values.len());
    for &x in values {
        finite_n.push(log_weight(&weight, x, false).map_err(value_error)?);
        limit.push(log_weight(&weight, x, true).map_err(value_error)?);
    }
    let body = match sink.format {
        Format::Json => json_body(&json!({
            "label": e.label(), "n": e.n, "s": e.s, "sigma2": e.sigma2, "raw_sigma2": e.raw_sigma2,
            "values": values, "log_density": finite_or_text(log_density),
            "log_weight_n": finite_n.iter().map(|&x| finite_or_text(x)).collect::<Vec<_>>(),
            "log_weight_limit": limit.iter().map(|&x| finite_or_text(x)).collect::<Vec<_>>(),
        }))?,
        _ => {
            let mut s = format!("log_density {log_density:?}\nx,log_weight_n,log_weight_limit\n");
            for ((x, a), b) in values.iter().zip(&finite_n).zip(&limit) {
                let _ = writeln!(s, "{x:?},{a:?},{b:?}");
            }
            s
        }
    };
    sink.emit(&body)
}

pub fn equilibrium(args: &EnsembleArgs, grid: usize, sink: &Sink) -> Outcome {
    if grid < 2 {
        return Err(usage("--grid", "need at least 2 points"));
    }
    let e = ensemble(args, false)?;
    let curve = equilibrium_for(&e)?;
    let body = match sink.format {
        Format::Json => {
            let (lo, hi) = curve.support();
            let points: Vec<_> = curve
                .grid(grid)
                .into_iter()
                .map(|(x, pdf, cdf)| json!({"x": x, "pdf": finite_or_text(pdf), "cdf": cdf}))
                .collect();
            json_body(&json!({"kind": curve.kind(), "support": [lo, hi], "points": points}))?
        }
        _ => csv_string(|w| write_curve_csv(w, &curve, grid))?,
    };
    sink.emit(&body)
}

pub struct RateOptions {
    pub grid: usize,
    pub calibrate: bool,
    pub measure: Option<PathBuf>,
    pub shift: Option<f64>,
    pub dilate: Option<f64>,
    pub emit_grid: Option<PathBuf>,
}

pub fn rate(args: &EnsembleArgs, opts: RateOptions, sink: &Sink) -> Outcome {
    if opts.grid < MIN_CELLS {
        return Err(usage("--grid", format!("need at least {MIN_CELLS} cells")));
    }
    if opts.dilate.is_some_and(|f| !(f > 0.0 && f.is_finite())) {
        return Err(usage("--dilate", "factor must be positive and finite"));
    }
    if opts.shift.is_some_and(|d| !d.is_finite()) {
        return Err(usage("--shift", "shift must be finite"));
    }
    let e = ensemble(args, false)?;
    let curve = equilibrium_for(&e)?;
    let mut functional = RateFunctional::for_ensemble(&e);
    if opts.calibrate {
        functional = calibrate(&functional, &curve, opts.grid)?;
    }
    let mut mu = match &opts.measure {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|err| Failure::Runtime(format!("{}: {err}", path.display())))?;
            read_grid_csv(std::io::BufReader::new(file))?
        }
        None => grid_from_curve(&curve, opts.grid)?,
    };
    if let Some(f) = opts.dilate {
        mu = mu.dilated(f)?;
    }
    if let Some(d) = opts.shift {
        mu = mu.shifted(d);
    }
    let report = functional.evaluate(&mu)?;
    if let Some(path) = &opts.emit_grid {
        write_atomic(path, csv_string(|w| write_grid_csv(w, &mu))?.as_bytes())?;
    }
    let body = match sink.format {
        Format::Json => json_body(&report)?,
        _ => format!(
            "energy {:?}\nfield {:?}\nc {:?}\nrate {:?}\nkappa {:?}\nbeta {:?}\ngamma {}\n",
            report.energy, report.field, report.c, report.rate, report.kappa, report.beta, report.gamma
        ),
    };
    sink.emit(&body)
}

/// Resolved label, sizes and s rule of a multi-`n` experiment. Every size is
/// validated up front so that bad flags fail before any sampling.
fn experiment(args: &ExperimentArgs) -> Outcome<(ClassLabel, Vec<usize>, SRule)> {
    if args.n.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("--n", "sizes must be strictly increasing"));
    }
    let mut label = None;
    let mut sizes = Vec::with_capacity(args.n.len());
    for &n in &args.n {
        let (l, m) = ClassLabel::resolve(&args.class, n).map_err(arg_error)?;
        let l = label_for_n(l, m);
        let base = |l: ClassLabel| if l == ClassLabel::DIIIOdd { ClassLabel::DIIIEven } else { l };
        if label.is_some_and(|prev| base(prev) != base(l)) {
            return Err(usage("--n", "sizes resolve to different classes; B/D sizes must share parity"));
        }
        label = Some(l);
        sizes.push(m);
    }
    let label = label.ok_or_else(|| usage("--n", "at least one size is required"))?;
    let rule = match (label.is_chiral(), args.s, args.kappa) {
        (false, None, None) => SRule::NotChiral,
        (false, Some(_), _) => return Err(arg_error(Error::UnexpectedS(label.to_string()))),
        (false, _, Some(_)) => return Err(usage("--kappa", format!("class {label} is not chiral and takes no kappa"))),
        (true, Some(s), _) => SRule::Fixed { s },
        (true, None, Some(k)) if k > 0.0 && k <= 0.5 => SRule::Fraction { kappa: k },
        (true, None, Some(k)) => return Err(usage("--kappa", format!("need 0 < kappa <= 1/2, got {k}"))),
        (true, None, None) => return Err(arg_error(Error::MissingS(label.to_string()))),
    };
    for &n in &sizes {
        make_ensemble(label_for_n(label, n), n, rule.s_at(n), args.sigma2).map_err(arg_error)?;
    }
    check_reps(args.reps)?;
    Ok((label, sizes, rule))
}

pub fn ks(args: &ExperimentArgs, timed: bool, sink: &Sink) -> Outcome {
    let (label, sizes, rule) = experiment(args)?;
    let report = convergence_experiment(label, args.sigma2, &sizes, rule, args.reps, args.seed, timed)?;
    let body = match sink.format {
        Format::Json => json_body(&report)?,
        _ => {
            let mut s = format!("{:>6} {:>5} {:>6} {:>8} {:>12}\n", "n", "s", "reps", "kappa", "ks");
            for r in &report.rows {
                let s_col = r.s.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
                let _ = writeln!(s, "{:>6} {:>5} {:>6} {:>8.4} {:>12.6}", r.n, s_col, r.reps, r.kappa, r.ks_distance);
            }
            s
        }
    };
    sink.emit(&body)
}

pub fn ldp(args: &ExperimentArgs, delta: f64, sink: &Sink) -> Outcome {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(usage("--delta", format!("need 0 < delta < 1, got {delta}")));
    }
    let (label, sizes, rule) = experiment(args)?;
    let report = decay_experiment(label, args.sigma2, delta, &sizes, rule, args.reps, args.seed)?;
    let body = match sink.format {
        Format::Json => json_body(&report)?,
        _ => {
            let mut s = format!("{:>6} {:>5} {:>6} {:>6} {:>10} {:>12}\n", "n", "s", "reps", "hits", "p_hat", "estimate");
            for r in &report.rows {
                let s_col = r.s.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
                let est = r.estimate.map(|v| format!("{v:.6}")).unwrap_or_else(|| "censored".into());
                let _ = writeln!(s, "{:>6} {:>5} {:>6} {:>6} {:>10.6} {:>12}", r.n, s_col, r.reps, r.hits, r.p_hat, est);
            }
            s
        }
    };
    sink.emit(&body)
}

pub fn oracle(args: &EnsembleArgs, bins: usize, reps: usize, seed: u64, sink: &Sink) -> Outcome {
    if bins == 0 {
        return Err(usage("--bins", "need at least one bin"));
    }
    let e = ensemble(args, true)?;
    if e.p() != 2 {
        return Err(usage("--n", format!("the oracle needs exactly two reduced eigenvalues, got {}", e.p())));
    }
    check_reps(reps)?;
    let report = density_oracle(e.label(), e.n, e.s, e.sigma2, bins, reps, seed)?;
    let body = match sink.format {
        Format::Json => json_body(&report)?,
        _ => format!(
            "{} n={} sigma2={} bins={} reps={} in_box={} discrepancy={:.6}\n",
            report.label, report.n, report.sigma2, report.bins, report.reps, report.in_box, report.discrepancy
        ),
    };
    sink.emit(&body)
}

/// `(label, n, s)` cases of the structural suite for one label at size `n`;
/// DIII sizes of the wrong parity move up by one.
fn suite_cases(label: ClassLabel, n: usize) -> Vec<(ClassLabel, usize, Option<usize>)> {
    let n = match label {
        ClassLabel::DIIIOdd if n % 2 == 0 => n + 1,
        ClassLabel::DIIIEven if n % 2 == 1 => n + 1,
        _ => n,
    };
    if label.is_chiral() {
        let mut s: Vec<usize> = [1, n / 4, n / 2].into_iter().filter(|&s| s >= 1 && 2 * s <= n).collect();
        s.dedup();
        s.into_iter().map(|s| (label, n, Some(s))).collect()
    } else {
        vec![(label, n, None)]
    }
}

pub fn check(class: Option<&str>, sizes: &[usize], reps: usize, seed: u64, sink: &Sink) -> Outcome {
    check_reps(reps)?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(usage("--n", "sizes must be positive"));
    }
    let mut cases = Vec::new();
    match class {
        Some(name) => {
            for &n in sizes {
                let (label, m) = ClassLabel::resolve(name, n).map_err(arg_error)?;
                cases.extend(suite_cases(label, m));
            }
        }
        None => {
            for label in ClassLabel::ALL {
                for &n in sizes {
                    cases.extend(suite_cases(label, n));
                }
            }
        }
    }
    cases.dedup();
    let mut rows: Vec<SuiteRow> = Vec::new();
    for (label, n, s) in cases {
        make_ensemble(label, n, s, 1.0).map_err(arg_error)?;
        rows.push(structural_suite(label, n, s, reps, seed)?);
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    let body = match sink.format {
        Format::Json => json_body(&rows)?,
        _ => {
            let opt = |x: Option<f64>| x.map(|v| format!("{v:.1e}")).unwrap_or_else(|| "-".into());
            let mut s = format!(
                "{:<4} {:<10} {:>4} {:>4} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
                "", "label", "n", "s", "trace", "factor", "pairing", "multipl", "zero"
            );
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{:<4} {:<10} {:>4} {:>4} {:>9.1e} {:>9.1e} {:>9} {:>9} {:>9}",
                    if r.passed { "ok" } else { "FAIL" },
                    r.label.as_str(),
                    r.n,
                    r.s.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                    r.trace_residual,
                    r.factorization_residual,
                    opt(r.pairing_residual),
                    opt(r.multiplicity_residual),
                    opt(r.zero_residual)
                );
            }
            let _ = writeln!(s, "{} cases, {failed} failed", rows.len());
            s
        }
    };
    sink.emit(&body)?;
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} structural checks failed")));
    }
    Ok(())
}
