//! Command-line front end: `solve`, `qp-bench` and `denoise`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::direction::QpOperator;
use crate::error::{Error, Result};
use crate::linalg::norm_inf;
use crate::options::{SolverOptions, Strategy};
use crate::problems::denoise::{add_salt_pepper, make_denoising, mse, synthetic_image, GrayImage, Regularizer};
use crate::problems::library::make_problem;
use crate::problems::pgm::{read_pgm, write_pgm};
use crate::problems::qp_gen::{generate_qp, DCase};
use crate::qp_das::{solve_das, DasOptions};
use crate::qp_ipm::{solve_ipm, IpmOptions};
use crate::quasi_newton::{IdentityMetric, Storage};
use crate::solver::{minimize, thread_cpu_seconds};

/// Environment variable naming a default options file.
pub const OPTIONS_ENV: &str = "NONOPT_OPTIONS";

#[derive(Debug, Parser)]
#[command(name = "lipmin", version, about = "Nonsmooth minimization and QP benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write results to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Render a fixed-width table instead of CSV.
    #[arg(long, global = true)]
    pub table: bool,
    /// Report CPU time as 0 so that output is byte-stable.
    #[arg(long, global = true)]
    pub no_timing: bool,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve library test problems.
    Solve(SolveArgs),
    /// Compare the QP solvers on generated subproblems.
    QpBench(QpBenchArgs),
    /// Denoise a graymap image.
    Denoise(DenoiseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Speed,
    Accuracy,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem names (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    pub names: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Direction strategies: G, GC, CP.
    #[arg(long, value_delimiter = ',', default_value = "CP")]
    pub strategy: Vec<Strategy>,
    #[arg(long, value_enum, default_value_t = Mode::Speed)]
    pub mode: Mode,
    /// Options file of `key = value` lines.
    #[arg(long)]
    pub options: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QpSolverArg {
    Das,
    Ipm,
}

#[derive(Debug, Args)]
pub struct QpBenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,200")]
    pub n: Vec<usize>,
    /// Column counts as multiples of n; `n+1` denotes n + 1.
    #[arg(long, value_delimiter = ',', default_value = "n+1,1.5,2")]
    pub m: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "zero,half,full")]
    pub dcases: Vec<DCase>,
    /// Number of seeds, starting at `--seed`.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "das,ipm")]
    pub solvers: Vec<QpSolverArg>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Input image; without it a synthetic image is used.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Size of the synthetic image, `ROWSxCOLS`.
    #[arg(long, default_value = "64x64")]
    pub synthetic: String,
    /// Treat the input as already noisy.
    #[arg(long)]
    pub noisy_in: bool,
    /// Clean reference image for the error report.
    #[arg(long)]
    pub clean: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "abs")]
    pub regularizer: Vec<Regularizer>,
    /// Defaults to the regularizer's tuned weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Defaults to the regularizer's tuned parameter.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Exponent range `LO:HI`; runs every `(λ, β) = (2^i, 2^j)`.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the denoised image (last run).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "CP")]
    pub strategy: Vec<Strategy>,
    #[arg(long)]
    pub options: Option<PathBuf>,
}

/// Rows of text with a header, written as CSV or a fixed-width table.
pub struct Report {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_table(&self, out: &mut dyn Write) -> Result<()> {
        let mut width: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for r in &self.rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: Vec<&str>| {
            cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
        };
        writeln!(out, "{}", line(self.header.clone()))?;
        for r in &self.rows {
            writeln!(out, "{}", line(r.iter().map(String::as_str).collect()))?;
        }
        Ok(())
    }
}

fn sci(x: f64) -> String {
    format!("{x:+.6e}")
}

fn seconds(x: f64, enabled: bool) -> String {
    if enabled {
        format!("{x:.6}")
    } else {
        "0".to_string()
    }
}

fn load_options(base: SolverOptions, file: Option<&Path>) -> Result<SolverOptions> {
    let mut opts = base;
    let env = std::env::var_os(OPTIONS_ENV).map(PathBuf::from);
    if let Some(p) = file.map(Path::to_path_buf).or(env) {
        opts.apply_file(&p)?;
    }
    opts.validate()?;
    Ok(opts)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn cmd_solve(args: &SolveArgs, timing: bool, jobs: usize) -> Result<Report> {
    // validate names before any work
    for name in &args.names {
        make_problem(name, args.n.max(2))?;
    }
    let base = match args.mode {
        Mode::Speed => SolverOptions::speed(),
        Mode::Accuracy => SolverOptions::accuracy(),
    };
    let base = SolverOptions { seed: args.seed, ..load_options(base, args.options.as_deref())? };
    let tasks: Vec<(&String, Strategy)> =
        args.names.iter().flat_map(|nm| args.strategy.iter().map(move |&s| (nm, s))).collect();
    let rows = pool(jobs)?.install(|| {
        tasks
            .par_iter()
            .map(|(name, strategy)| {
                let p = make_problem(name, args.n).expect("validated");
                let opts = base.clone().with_strategy(*strategy);
                let head = vec![p.name.clone(), strategy.label().to_string()];
                match minimize(p.oracle.as_ref(), &p.x0, &opts) {
                    Ok(r) => [
                        head,
                        vec![
                            r.iterations.to_string(),
                            r.function_evaluations.to_string(),
                            r.gradient_evaluations.to_string(),
                            sci(r.final_f),
                            seconds(r.cpu_seconds, timing),
                            r.termination_reason.label().to_string(),
                        ],
                    ]
                    .concat(),
                    Err(e) => [head, vec![String::new(); 5], vec![format!("error: {e}")]].concat(),
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(Report { header: vec!["name", "dir", "iters", "funcs", "grads", "f", "cpu", "status"], rows })
}

fn parse_m(spec: &str, n: usize) -> Result<usize> {
    let s = spec.trim();
    if s == "n+1" {
        return Ok(n + 1);
    }
    let factor: f64 = s.trim_end_matches('n').parse().map_err(|_| Error::InvalidArgument(format!("bad m `{spec}`")))?;
    Ok(((factor * n as f64).round() as usize).max(n + 1))
}

/// One solve of a generated instance.
#[derive(Debug, Clone)]
pub struct QpBenchRow {
    pub n: usize,
    pub m: usize,
    pub case: DCase,
    pub seed: u64,
    pub solver: QpSolverArg,
    pub cpu_seconds: f64,
    pub kkt_residual: f64,
    pub d_error: f64,
    pub iterations: usize,
    pub shortcut: bool,
    pub error: Option<String>,
}

pub fn run_qp_instance(n: usize, m: usize, case: DCase, seed: u64, solver: QpSolverArg) -> Result<QpBenchRow> {
    let qp = generate_qp(n, m, case, seed)?;
    let id = IdentityMetric(n);
    let data = qp.subproblem(&id)?;
    let op = QpOperator::new(&data);
    let t0 = thread_cpu_seconds();
    let out = match solver {
        QpSolverArg::Das => {
            solve_das(&op, &DasOptions::default(), None).map(|o| (o.w, o.kkt_residual, o.iterations, false))
        }
        QpSolverArg::Ipm => solve_ipm(&op, &IpmOptions::default())
            .map(|o| (op.w_combine(&o.theta_full()), o.kkt_residual, o.iterations, o.shortcut)),
    };
    let cpu = thread_cpu_seconds() - t0;
    let mut row = QpBenchRow {
        n,
        m,
        case,
        seed,
        solver,
        cpu_seconds: cpu,
        kkt_residual: f64::NAN,
        d_error: f64::NAN,
        iterations: 0,
        shortcut: false,
        error: None,
    };
    match out {
        Ok((w, kkt, it, sc)) => {
            let err: Vec<f64> = w.iter().zip(&qp.d_star).map(|(wi, d)| -wi - d).collect();
            row.kkt_residual = kkt;
            row.d_error = norm_inf(&err);
            row.iterations = it;
            row.shortcut = sc;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    Ok(row)
}

pub fn cmd_qp_bench(args: &QpBenchArgs, timing: bool, jobs: usize) -> Result<Report> {
    let mut tasks = Vec::new();
    for &n in &args.n {
        for ms in &args.m {
            let m = parse_m(ms, n)?;
            for &case in &args.dcases {
                for seed in args.seed..args.seed + args.seeds {
                    for &solver in &args.solvers {
                        tasks.push((n, m, case, seed, solver));
                    }
                }
            }
        }
    }
    let rows = pool(jobs)?.install(|| {
        tasks.par_iter().map(|&(n, m, c, s, v)| run_qp_instance(n, m, c, s, v)).collect::<Result<Vec<_>>>()
    })?;
    let rows = rows
        .into_iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.m.to_string(),
                r.case.label().to_string(),
                r.seed.to_string(),
                match r.solver {
                    QpSolverArg::Das => "DAS",
                    QpSolverArg::Ipm => "IPM",
                }
                .to_string(),
                seconds(r.cpu_seconds, timing),
                format!("{:.3e}", r.kkt_residual),
                format!("{:.3e}", r.d_error),
                r.iterations.to_string(),
                r.shortcut.to_string(),
                r.error.unwrap_or_default(),
            ]
        })
        .collect();
    Ok(Report {
        header: vec!["n", "m", "dcase", "seed", "solver", "cpu", "kkt_residual", "d_error", "iters", "shortcut", "error"],
        rows,
    })
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidArgument(format!("bad image size `{s}`"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
}

fn parse_range(s: &str) -> Result<(i32, i32)> {
    let bad = || Error::InvalidArgument(format!("bad sweep range `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (i32, i32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

/// Solver options used for denoising: limited-memory storage.
pub fn denoise_options() -> SolverOptions {
    SolverOptions { qn_storage: Storage::Limited, history_limit: 20, ..SolverOptions::speed() }
}

pub fn cmd_denoise(args: &DenoiseArgs, timing: bool, jobs: usize) -> Result<Report> {
    let input = match &args.input {
        Some(p) => read_pgm(p)?,
        None => {
            let (r, c) = parse_size(&args.synthetic)?;
            synthetic_image(r, c)
        }
    };
    let (noisy, clean) = if args.noisy_in {
        let clean = args.clean.as_deref().map(read_pgm).transpose()?;
        (input, clean)
    } else {
        let clean = match &args.clean {
            Some(p) => read_pgm(p)?,
            None => input.clone(),
        };
        (add_salt_pepper(&input, args.density, args.seed)?, Some(clean))
    };
    let base = load_options(denoise_options(), args.options.as_deref())?;
    let sweep = args.sweep.as_deref().map(parse_range).transpose()?;
    let mut tasks = Vec::new();
    for &reg in &args.regularizer {
        let pairs: Vec<(f64, f64)> = match sweep {
            Some((lo, hi)) => (lo..=hi).flat_map(|i| (lo..=hi).map(move |j| (2f64.powi(i), 2f64.powi(j)))).collect(),
            None => {
                let (l, b) = reg.tuned();
                vec![(args.lambda.unwrap_or(l), args.beta.unwrap_or(b))]
            }
        };
        for &s in &args.strategy {
            for &(l, b) in &pairs {
                tasks.push((reg, s, l, b));
            }
        }
    }
    let results = pool(jobs)?.install(|| {
        tasks
            .par_iter()
            .map(|&(reg, s, lambda, beta)| -> Result<(Vec<String>, GrayImage)> {
                let p = make_denoising(&noisy, reg, lambda, beta)?;
                let r = minimize(p.oracle.as_ref(), &p.x0, &base.clone().with_strategy(s))?;
                let out = GrayImage::from_values(noisy.rows, noisy.cols, &r.final_x);
                let (e_noisy, e_out) = match &clean {
                    Some(c) => (format!("{:.0}", mse(&noisy, c)), format!("{:.0}", mse(&out, c))),
                    None => (String::new(), String::new()),
                };
                let row = vec![
                    reg.label().to_string(),
                    s.label().to_string(),
                    format!("{lambda}"),
                    format!("{beta}"),
                    e_noisy,
                    e_out,
                    r.iterations.to_string(),
                    sci(r.final_f),
                    seconds(r.cpu_seconds, timing),
                    r.termination_reason.label().to_string(),
                ];
                Ok((row, out))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    if let (Some(path), Some((_, img))) = (&args.output, results.last()) {
        write_pgm(path, img, true)?;
    }
    Ok(Report {
        header: vec!["regularizer", "dir", "lambda", "beta", "mse_noisy", "mse", "iters", "f", "cpu", "status"],
        rows: results.into_iter().map(|(r, _)| r).collect(),
    })
}

/// Runs a parsed command line, writing the report to `stdout` unless
/// `--out` is given.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let o = &cli.output;
    let timing = !o.no_timing;
    let report = match &cli.command {
        Command::Solve(a) => cmd_solve(a, timing, o.jobs)?,
        Command::QpBench(a) => cmd_qp_bench(a, timing, o.jobs)?,
        Command::Denoise(a) => cmd_denoise(a, timing, o.jobs)?,
    };
    let mut file;
    let out: &mut dyn Write = match &o.out {
        Some(p) => {
            file = std::fs::File::create(p)?;
            &mut file
        }
        None => stdout,
    };
    if o.table {
        report.write_table(out)
    } else {
        report.write_csv(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> Result<String> {
        let cli = Cli::try_parse_from(args).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut buf = Vec::new();
        execute(&cli, &mut buf)?;
        Ok(String::from_utf8(buf).unwrap())
    }

    #[test]
    fn solve_writes_one_row() {
        let out = run(&["lipmin", "solve", "--names", "MaxQ", "--n", "20", "--strategy", "CP", "--no-timing"]).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("name,dir,iters"));
        assert!(lines[1].starts_with("MaxQ,CP,"));
    }

    #[test]
    fn unknown_problem_is_an_error() {
        assert!(matches!(run(&["lipmin", "solve", "--names", "Nope"]), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn output_is_deterministic() {
        let args = ["lipmin", "solve", "--names", "MaxQ,ChainedLQ", "--n", "10", "--strategy", "G,GC,CP", "--no-timing"];
        assert_eq!(run(&args).unwrap(), run(&args).unwrap());
    }

    #[test]
    fn m_specs() {
        assert_eq!(parse_m("n+1", 10).unwrap(), 11);
        assert_eq!(parse_m("1.5", 10).unwrap(), 15);
        assert_eq!(parse_m("2n", 10).unwrap(), 20);
        assert!(parse_m("x", 10).is_err());
    }

    #[test]
    fn qp_bench_rows() {
        let out = run(&["lipmin", "qp-bench", "--n", "6", "--m", "n+1", "--seeds", "2", "--no-timing"]).unwrap();
        assert_eq!(out.lines().count(), 1 + 3 * 2 * 2);
    }

    #[test]
    fn table_layout() {
        let out = run(&["lipmin", "solve", "--names", "MaxQ", "--n", "5", "--table", "--no-timing"]).unwrap();
        assert!(out.lines().next().unwrap().contains("iters"));
        assert!(!out.contains(','));
    }
}
