//! `liecf`: coefficient checks, trajectories and convergence studies.
//!
//! Exit codes: 0 success, 1 verification failure (or I/O error), 2 usage
//! error, 3 numerical divergence.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use liecf::harness::{
    emit_csv_all, power_of_two_grid, run_convergence, standard_exponents, verify_conjecture,
};
use liecf::integrators::{Family, IntegrationError, StepperConfig};
use liecf::problems::{all_cases, case_by_name, CASE_NAMES};
use liecf::tableau::{
    classical_order_residuals, from_butcher, lie_cf3_condition_residual, load_file,
    williamson_constraint_residual, Registry, Scheme, ORDER_TOLERANCE,
};

#[derive(Parser)]
#[command(name = "liecf", version, about = "Low-storage commutator-free Lie group integrators")]
struct Cli {
    /// Directory of extra coefficient files (*.toml); overrides built-ins by name.
    #[arg(long, global = true, env = "LIECF_COEFF_DIR")]
    coeff_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List known schemes.
    List,
    /// Print order-condition residuals for a scheme.
    Check {
        #[arg(long, required_unless_present = "file")]
        scheme: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Integrate one problem and write the trajectory as CSV.
    Integrate {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        scheme: String,
        #[arg(long, default_value = "liecf")]
        family: String,
        #[arg(long)]
        h: f64,
        /// End time; defaults to the problem's own interval.
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure d(h) over h = 2^-n and fit the convergence slope.
    Converge {
        #[arg(long)]
        problem: String,
        /// One or more scheme names, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        scheme: Vec<String>,
        #[arg(long, default_value = "liecf")]
        family: String,
        #[arg(long)]
        nmin: Option<u32>,
        #[arg(long)]
        nmax: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that 2N schemes keep their classical order as Lie group methods.
    Conjecture {
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Verification(String),
    Divergence(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Divergence(msg)) => {
            eprintln!("diverged: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let registry = match &cli.coeff_dir {
        Some(dir) => Registry::with_dir(dir).map_err(|e| Failure::Usage(e.to_string()))?,
        None => Registry::builtin().clone(),
    };
    match cli.command {
        Command::List => list(&registry),
        Command::Check { scheme, file } => check(&resolve(&registry, scheme, file)?),
        Command::Integrate {
            problem,
            scheme,
            family,
            h,
            t1,
            out,
        } => integrate(&registry, &problem, &scheme, &family, h, t1, out),
        Command::Converge {
            problem,
            scheme,
            family,
            nmin,
            nmax,
            out,
        } => converge(&registry, &problem, &scheme, &family, nmin, nmax, out),
        Command::Conjecture { scheme, file } => {
            let schemes = if scheme.is_none() && file.is_none() {
                registry.two_n_schemes().cloned().collect()
            } else {
                vec![resolve(&registry, scheme, file)?]
            };
            conjecture(&schemes)
        }
    }
}

fn resolve(registry: &Registry, name: Option<String>, file: Option<PathBuf>) -> Result<Scheme, Failure> {
    if let Some(path) = file {
        return load_file(&path).map_err(|e| Failure::Usage(e.to_string()));
    }
    let name = name.ok_or_else(|| Failure::Usage("either --scheme or --file is required".into()))?;
    lookup(registry, &name)
}

fn lookup(registry: &Registry, name: &str) -> Result<Scheme, Failure> {
    registry
        .lookup(name)
        .cloned()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn output(path: Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(&p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn stepper(scheme: &Scheme, family: &str) -> Result<StepperConfig, Failure> {
    let family: Family = family.parse().map_err(|e: IntegrationError| Failure::Usage(e.to_string()))?;
    StepperConfig::new(scheme, family).map_err(|e| Failure::Usage(format!("{}: {e}", scheme.name())))
}

fn list(registry: &Registry) -> Outcome {
    let mut out = io::stdout().lock();
    writeln!(out, "{:<12} {:>6} {:>5}  format", "name", "stages", "order")?;
    for s in registry.iter() {
        writeln!(
            out,
            "{:<12} {:>6} {:>5}  {}",
            s.name(),
            s.stages(),
            s.declared_order(),
            s.format_name()
        )?;
    }
    Ok(())
}

fn check(scheme: &Scheme) -> Outcome {
    let mut out = io::stdout().lock();
    let tableau = scheme.tableau();
    let report = classical_order_residuals(&tableau, 5);
    writeln!(
        out,
        "{} ({} stages, declared order {}, {} form)",
        scheme.name(),
        scheme.stages(),
        scheme.declared_order(),
        scheme.format_name()
    )?;
    writeln!(out, "{:<8} {:>5} {:>12}", "tree", "order", "residual")?;
    for r in &report.residuals {
        writeln!(out, "{:<8} {:>5} {:>12.3e}", r.label, r.order, r.residual)?;
    }
    writeln!(
        out,
        "satisfied order: {} (tolerance {ORDER_TOLERANCE:e})",
        report.satisfied_order
    )?;
    match from_butcher(&tableau) {
        Ok(_) => writeln!(out, "2N representable: yes")?,
        Err(e) => writeln!(out, "2N representable: no ({e})")?,
    }
    if tableau.stages() == 3 {
        let c = tableau.c();
        writeln!(
            out,
            "williamson constraint residual: {:.3e}",
            williamson_constraint_residual(c[1], c[2])
        )?;
        if let Ok(r) = lie_cf3_condition_residual(&tableau) {
            writeln!(out, "lie-cf3 condition residual: {r:.3e}")?;
        }
    }
    if (report.satisfied_order as u32) < scheme.declared_order() {
        return Err(Failure::Verification(format!(
            "{} satisfies order {} but declares {}",
            scheme.name(),
            report.satisfied_order,
            scheme.declared_order()
        )));
    }
    Ok(())
}

fn integrate(
    registry: &Registry,
    problem: &str,
    scheme: &str,
    family: &str,
    h: f64,
    t1: Option<f64>,
    out: Option<PathBuf>,
) -> Outcome {
    let case = case_by_name(problem).ok_or_else(|| {
        Failure::Usage(format!("unknown problem {problem:?}, expected one of {CASE_NAMES:?}"))
    })?;
    let case = case.as_case();
    let cfg = stepper(&lookup(registry, scheme)?, family)?;
    let t_end = t1.unwrap_or(case.interval().1);
    if !(h > 0.0 && h.is_finite()) || !(t_end > case.interval().0) {
        return Err(Failure::Usage(format!("need h > 0 and t1 > {}", case.interval().0)));
    }
    let mut w = output(out)?;
    writeln!(w, "t,{}", case.state_labels().join(","))?;
    let mut io_err = None;
    let result = case.trajectory(&cfg, h, t_end, &mut |t, y| {
        if io_err.is_some() {
            return;
        }
        let mut line = format!("{t:?}");
        for v in y {
            line.push(',');
            line.push_str(&format!("{v:?}"));
        }
        if let Err(e) = writeln!(w, "{line}") {
            io_err = Some(e);
        }
    });
    w.flush()?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    match result {
        Ok(()) => Ok(()),
        Err(IntegrationError::Divergence { t }) => {
            Err(Failure::Divergence(format!("{problem} with {scheme} at t = {t}")))
        }
        Err(e) => Err(Failure::Other(e.into())),
    }
}

fn converge(
    registry: &Registry,
    problem: &str,
    schemes: &[String],
    family: &str,
    nmin: Option<u32>,
    nmax: Option<u32>,
    out: Option<PathBuf>,
) -> Outcome {
    let case = case_by_name(problem).ok_or_else(|| {
        Failure::Usage(format!("unknown problem {problem:?}, expected one of {CASE_NAMES:?}"))
    })?;
    let case = case.as_case();
    let mut reports = Vec::new();
    for name in schemes {
        let scheme = lookup(registry, name)?;
        let cfg = stepper(&scheme, family)?;
        let (dmin, dmax) = standard_exponents(case.name(), scheme.declared_order());
        let (lo, hi) = (nmin.unwrap_or(dmin), nmax.unwrap_or(dmax));
        if lo > hi || hi > 40 {
            return Err(Failure::Usage(format!("bad exponent range {lo}..={hi}")));
        }
        let report = run_convergence(case, &cfg, &power_of_two_grid(lo, hi))
            .map_err(|e| Failure::Other(e.into()))?;
        reports.push(report);
    }
    let mut w = output(out)?;
    emit_csv_all(&reports, &mut w)?;
    w.flush()?;
    let diverged: Vec<&str> = reports
        .iter()
        .filter(|r| r.diverged())
        .map(|r| r.scheme_name.as_str())
        .collect();
    if !diverged.is_empty() {
        return Err(Failure::Divergence(format!("{problem}: {}", diverged.join(", "))));
    }
    Ok(())
}

fn conjecture(schemes: &[Scheme]) -> Outcome {
    let cases = all_cases();
    let mut failed = Vec::new();
    let mut out = io::stdout().lock();
    for scheme in schemes {
        let outcomes = verify_conjecture(scheme, &cases).map_err(|e| Failure::Other(e.into()))?;
        for o in outcomes {
            writeln!(
                out,
                "{} {:<10} {:<6} slope={:.3} required>={:.1}",
                if o.passed { "PASS" } else { "FAIL" },
                scheme.name(),
                o.case_name,
                o.slope,
                o.required
            )?;
            if !o.passed {
                failed.push(format!("{}/{}", scheme.name(), o.case_name));
            }
        }
    }
    out.flush()?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(failed.join(", ")))
    }
}
