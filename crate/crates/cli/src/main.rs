//! `sphereval`: grids, fields, bodies, valuations and the divergence sweep
//! from the command line.
//!
//! Inputs are JSON files, tabular outputs CSV. Every CSV ends with a
//! `# version,grid,seed` comment line. Exit codes: 0 on success, 1 when a
//! check fails, 2 on usage or input errors.

mod battery;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::de::DeserializeOwned;

use sphereval::bodies::{ConvexBody, SHEET_RESOLUTION};
use sphereval::counterexample::{
    find_delta, fit_exponent, random_cap_points, sweep, verify_estimate, SweepColumn, SweepConfig, SWEEP_HEADER,
};
use sphereval::descriptor::{parse_json, FieldSpec, ScalarSpec, ValuationSpec};
use sphereval::fields::field_stats;
use sphereval::valuations::{even_density, odd_density, ScalarDensity, Valuation};
use sphereval::fields::Polynomial;
use sphereval::{build_grid, GridSpec};

use battery::Suite;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "sphereval", version, about = "Valuations on Lipschitz functions on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quadrature grids.
    #[command(subcommand)]
    Grid(GridCmd),
    /// Fields given as JSON expression trees.
    #[command(subcommand)]
    Field(FieldCmd),
    /// Convex bodies and their area measures.
    #[command(subcommand)]
    Body(BodyCmd),
    /// Valuation functionals.
    #[command(subcommand)]
    Valuation(ValuationCmd),
    /// The divergence witness.
    #[command(subcommand)]
    Counterexample(CounterexampleCmd),
    /// Aggregate batteries.
    #[command(subcommand)]
    Suite(SuiteCmd),
}

#[derive(Args)]
struct GridArgs {
    /// `icosphere:<level>`, `gauss:<m>` or `mc:<count>:seed<seed>`.
    #[arg(long, default_value = "icosphere:5")]
    grid: GridSpec,
    /// Ambient dimension.
    #[arg(long, default_value_t = 3)]
    n: usize,
}

#[derive(Args)]
struct OutArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GridCmd {
    /// Nodes and weights, one row per node.
    Dump {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Subcommand)]
enum FieldCmd {
    /// Value and `∇̄f` at every grid node.
    Eval {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value = "icosphere:5")]
        grid: GridSpec,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Sup norm, Lipschitz estimate and `∫|∇f|`.
    Norms {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value = "icosphere:5")]
        grid: GridSpec,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Subcommand)]
enum BodyCmd {
    /// The area measure as atoms, sheets and smooth parts.
    Measure {
        #[arg(long)]
        body: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// `∫ p dS_{n-1}(K, ·)` for a polynomial density `p`.
    Pair {
        #[arg(long)]
        body: PathBuf,
        #[arg(long)]
        density: PathBuf,
        /// Needed for bodies with smooth parts.
        #[arg(long)]
        grid: Option<GridSpec>,
    },
}

#[derive(Subcommand)]
enum ValuationCmd {
    /// Value of a functional on a field.
    Eval {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value = "icosphere:5")]
        grid: GridSpec,
    },
    /// Randomized check battery.
    Check {
        #[arg(long)]
        suite: Suite,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "icosphere:4")]
        grid: GridSpec,
        /// Ambient dimension when the spec does not fix one.
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        cases: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Overrides the suite's default tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Subcommand)]
enum CounterexampleCmd {
    /// `ν(f_k)`, norms and `d_τ(f_k, 0)` over powers of two `k`.
    Sweep {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 7.0 / 6.0)]
        p: f64,
        /// A number or `auto`.
        #[arg(long, default_value = "auto")]
        delta: String,
        #[arg(long, default_value_t = 32)]
        kmin: u64,
        #[arg(long, default_value_t = 1024)]
        kmax: u64,
        #[arg(long, default_value = "mc:1000000:seed42")]
        grid: GridSpec,
        #[command(flatten)]
        out: OutArgs,
    },
    /// The estimate on cones over random cap points.
    VerifyEstimate {
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// A number or `auto`.
        #[arg(long, default_value = "auto")]
        delta: String,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// The cap height used by the sweep.
    FindDelta {
        #[arg(long, default_value_t = 4)]
        n: usize,
    },
}

#[derive(Subcommand)]
enum SuiteCmd {
    /// Every battery on the standard functionals.
    All {
        #[arg(long, default_value = "icosphere:5")]
        grid: GridSpec,
        #[arg(long, default_value_t = 10)]
        cases: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

enum Failure {
    Usage(String),
    Check,
}

impl From<sphereval::Error> for Failure {
    fn from(e: sphereval::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn load<T: DeserializeOwned>(flag: &str, path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("--{flag} {}: {e}", path.display())))?;
    parse_json(&text).map_err(|e| Failure::Usage(format!("--{flag} {}: {e}", path.display())))
}

/// Writes the CSV with its metadata line, to `out` or standard output.
/// The summary goes to standard output, or to standard error when the CSV
/// already occupies standard output.
fn emit(csv: &str, out: &OutArgs, grid: &str, seed: &str, summary: &str) -> Outcome {
    let mut text = csv.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    text.push_str(&format!("# {VERSION},{grid},{seed}\n"));
    match &out.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::Usage(format!("--out {}: {e}", path.display())))?;
            if !summary.is_empty() {
                println!("{summary}");
            }
        }
        None => {
            print!("{text}");
            if !summary.is_empty() {
                eprintln!("{summary}");
            }
        }
    }
    Ok(())
}

fn seed_of(spec: GridSpec) -> String {
    match spec {
        GridSpec::MonteCarlo { seed, .. } => seed.to_string(),
        _ => "-".into(),
    }
}

fn format_complex(v: Complex64) -> String {
    format!("{:.15} {:+.15}i", v.re, v.im)
}

fn parse_delta(text: &str, n: usize) -> Result<f64, Failure> {
    if text == "auto" {
        return Ok(find_delta(n)?);
    }
    text.parse()
        .map_err(|_| Failure::Usage(format!("--delta: expected a number or `auto`, got `{text}`")))
}

fn grid_cmd(cmd: GridCmd) -> Outcome {
    let GridCmd::Dump { grid, out } = cmd;
    let g = build_grid(grid.n, grid.grid)?;
    let summary = format!("{} nodes, total weight {:.15}", g.len(), g.total_weight());
    emit(&g.to_csv(), &out, &grid.grid.to_string(), &seed_of(grid.grid), &summary)
}

fn field_cmd(cmd: FieldCmd) -> Outcome {
    match cmd {
        FieldCmd::Eval { field, grid, out } => {
            let f = load::<FieldSpec>("field", &field)?.build()?;
            let g = build_grid(f.dim(), grid)?;
            let n = f.dim();
            let mut csv = String::new();
            let coords = |p: &str| (1..=n).map(|i| format!("{p}{i}")).collect::<Vec<_>>().join(",");
            csv.push_str(&format!("{},value,{},ties\n", coords("x"), coords("g")));
            let rows = g.map_nodes(|x| {
                let mut ties = 0;
                let (v, grad) = f.value_and_bar_grad(x, &mut ties);
                let mut line = String::new();
                for c in x {
                    line.push_str(&format!("{c:.16e},"));
                }
                line.push_str(&format!("{v:.16e},"));
                for c in grad.iter() {
                    line.push_str(&format!("{c:.16e},"));
                }
                line.push_str(&format!("{ties}\n"));
                line
            });
            csv.extend(rows);
            emit(&csv, &out, &grid.to_string(), &seed_of(grid), &format!("{} nodes", g.len()))
        }
        FieldCmd::Norms { field, grid, out } => {
            let f = load::<FieldSpec>("field", &field)?.build()?;
            let g = build_grid(f.dim(), grid)?;
            let s = field_stats(&f, &g)?;
            let csv = format!(
                "sup_norm,lip_est,grad_l1,ties\n{:.16e},{:.16e},{:.16e},{}\n",
                s.sup_norm, s.lip_est, s.grad_l1, s.ties
            );
            let summary = format!("sup {:.6e}, lip {:.6e}, ∫|∇f| {:.6e}", s.sup_norm, s.lip_est, s.grad_l1);
            emit(&csv, &out, &grid.to_string(), &seed_of(grid), &summary)
        }
    }
}

fn body_cmd(cmd: BodyCmd) -> Outcome {
    match cmd {
        BodyCmd::Measure { body, out } => {
            let k: ConvexBody = load("body", &body)?;
            let m = k.area_measure()?;
            let summary = format!("{} atoms, {} sheets, {} smooth parts", m.atoms.len(), m.sheets.len(), m.smooth_parts.len());
            emit(&m.to_csv(), &out, "-", "-", &summary)
        }
        BodyCmd::Pair { body, density, grid } => {
            let k: ConvexBody = load("body", &body)?;
            let p = load::<ScalarSpec>("density", &density)?.build()?;
            let g = grid.map(|s| build_grid(k.dim(), s)).transpose()?;
            let m = k.area_measure()?;
            let v: Complex64 = m.pair(|x| p.value(x), SHEET_RESOLUTION, g.as_ref())?;
            println!("{}", format_complex(v));
            Ok(())
        }
    }
}

fn valuation_cmd(cmd: ValuationCmd) -> Outcome {
    match cmd {
        ValuationCmd::Eval { spec, field, grid } => {
            let mu = load::<ValuationSpec>("spec", &spec)?.build()?;
            let f = load::<FieldSpec>("field", &field)?.build()?;
            let g = build_grid(f.dim(), grid)?;
            let e = mu.eval(&f, &g)?;
            println!("{}", format_complex(e.value));
            if e.ties > 0 {
                eprintln!("{} tie nodes resolved by the first active child", e.ties);
            }
            Ok(())
        }
        ValuationCmd::Check {
            suite,
            spec,
            grid,
            n,
            cases,
            seed,
            tol,
            out,
        } => {
            let tol = positive_tol(tol.unwrap_or(suite.default_tol(grid.scheme())))?;
            let desc: ValuationSpec = load("spec", &spec)?;
            let n = desc.dim().unwrap_or(n);
            let mu = desc.build()?;
            let g = build_grid(n, grid)?;
            let rows = battery::run(suite, mu.name(), &mu, &g, cases, seed, tol)?;
            finish_rows(&rows, &out, &grid.to_string(), &seed.to_string())
        }
    }
}

fn positive_tol(tol: f64) -> Result<f64, Failure> {
    if tol > 0.0 && tol.is_finite() {
        Ok(tol)
    } else {
        Err(Failure::Usage(format!("--tol must be positive, got {tol}")))
    }
}

fn finish_rows(rows: &[battery::Row], out: &OutArgs, grid: &str, seed: &str) -> Outcome {
    let mut csv = format!("{}\n", battery::HEADER);
    for r in rows {
        csv.push_str(&format!("{r}\n"));
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.case.as_str()).collect();
    let summary = if failed.is_empty() {
        format!("{} cases passed", rows.len())
    } else {
        format!("{} of {} cases failed: {}", failed.len(), rows.len(), failed.join(" "))
    };
    emit(&csv, out, grid, seed, &summary)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn counterexample_cmd(cmd: CounterexampleCmd) -> Outcome {
    match cmd {
        CounterexampleCmd::Sweep {
            n,
            p,
            delta,
            kmin,
            kmax,
            grid,
            out,
        } => {
            if kmin < 2 || kmax < kmin {
                return Err(Failure::Usage(format!("--kmin/--kmax: need 2 ≤ kmin ≤ kmax, got {kmin}, {kmax}")));
            }
            let cfg = SweepConfig {
                n,
                delta: parse_delta(&delta, n)?,
                p,
                k_values: std::iter::successors(Some(kmin), |&k| k.checked_mul(2))
                    .take_while(|&k| k <= kmax)
                    .collect(),
                grid,
            };
            let start = Instant::now();
            let records = sweep(&cfg)?;
            let mut csv = format!("{SWEEP_HEADER}\n");
            for r in &records {
                csv.push_str(&format!("{r}\n"));
            }
            let mut summary = format!("{} values of k, δ = {}, {:.1}s", records.len(), cfg.delta, start.elapsed().as_secs_f64());
            if let (Ok(nu), Ok(sup), Ok(lip)) = (
                fit_exponent(&records, SweepColumn::Nu),
                fit_exponent(&records, SweepColumn::SupNorm),
                fit_exponent(&records, SweepColumn::LipEst),
            ) {
                summary.push_str(&format!("\nfitted exponents: ν {nu:.4}, sup {sup:.4}, lip {lip:.4}"));
            }
            emit(&csv, &out, &grid.to_string(), &seed_of(grid), &summary)
        }
        CounterexampleCmd::VerifyEstimate {
            n,
            delta,
            lambdas,
            samples,
            seed,
        } => {
            let delta = parse_delta(&delta, n)?;
            if !(0.0..=1.0).contains(&delta) {
                return Err(Failure::Usage(format!("--delta must lie in [0, 1], got {delta}")));
            }
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let xis = random_cap_points(&mut rng, n, delta, samples);
            let r = verify_estimate(&lambdas, &xis, n)?;
            println!(
                "δ = {delta}: {} samples, {} violations, worst margin (min μ(C)/bound) {:.6}",
                r.samples, r.violations, r.worst_ratio
            );
            if r.pass {
                Ok(())
            } else {
                Err(Failure::Check)
            }
        }
        CounterexampleCmd::FindDelta { n } => {
            println!("{}", find_delta(n)?);
            Ok(())
        }
    }
}

fn poly3(terms: &[(f64, &[u32])]) -> ScalarDensity {
    ScalarDensity::polynomial(Polynomial::from_terms(3, terms))
}

fn suite_cmd(cmd: SuiteCmd) -> Outcome {
    let SuiteCmd::All { grid, cases, seed, out } = cmd;
    let g = build_grid(3, grid)?;
    let xyz = poly3(&[(1.0, &[1, 1, 1])]);
    let one = Complex64::new(1.0, 0.0);
    let functionals = [
        ("theta1", Valuation::Theta1(poly3(&[(3.0, &[2, 0, 0]), (-1.0, &[0, 0, 0])]))),
        ("theta2-even", Valuation::Theta2(even_density(3))),
        ("theta2-odd", Valuation::Theta2(odd_density(&xyz)?)),
        ("rotinv", Valuation::RotInv([one; 3])),
        ("hess_s2", Valuation::HessS2(xyz)),
    ];
    let mut rows = Vec::new();
    for (label, mu) in &functionals {
        let mut suites = vec![Suite::ValuationProperty, Suite::Invariance, Suite::Degree];
        if matches!(mu, Valuation::Theta2(_)) {
            suites.push(Suite::Pde);
        }
        for suite in suites {
            rows.extend(battery::run(suite, label, mu, &g, cases, seed, suite.default_tol(grid.scheme()))?);
        }
    }
    rows.extend(battery::geometry_rows(seed)?);
    finish_rows(&rows, &out, &grid.to_string(), &seed.to_string())
}

fn configure_threads() -> Outcome {
    let Ok(text) = std::env::var("SPHEREVAL_THREADS") else {
        return Ok(());
    };
    let threads: usize = text
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Usage(format!("SPHEREVAL_THREADS must be a positive integer, got `{text}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Grid(c) => grid_cmd(c),
        Command::Field(c) => field_cmd(c),
        Command::Body(c) => body_cmd(c),
        Command::Valuation(c) => valuation_cmd(c),
        Command::Counterexample(c) => counterexample_cmd(c),
        Command::Suite(c) => suite_cmd(c),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
