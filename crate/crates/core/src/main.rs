use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use sparse_hopfield::attention::{sparse_hopfield_layer, ProjectionSet, SequenceBatch};
use sparse_hopfield::harness::table::CellOutcome;
use sparse_hopfield::harness::{
    capacity_bound_table, capacity_sweep, fmt_real, load_matrix_csv, load_patterns, parse_vector, robustness_sweep,
    write_capacity_csv, write_sweep_csv, ExperimentConfig, NormSpec, PatternFormat, PatternKind, PatternSource,
    RadiusSpec, SweepKind,
};
use sparse_hopfield::{energy, retrieve, softmax, sparsemax, HopfieldError, Mode, QueryState, Result, RetrievalConfig};

#[derive(Parser)]
#[command(name = "sparse-hopfield", version, about = "Sparse modern Hopfield retrieval, bounds and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sparsemax of β·z (and softmax for comparison with --mode dense|both).
    Sparsemax {
        /// Comma-separated scores, e.g. "1,0.5,-2".
        #[arg(allow_hyphen_values = true)]
        vec: String,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Sparse)]
        mode: ModeArg,
    },
    /// Hopfield energy of a query against a pattern file.
    Energy {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, allow_hyphen_values = true)]
        query: String,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Both)]
        mode: ModeArg,
    },
    /// Run retrieval dynamics from a query.
    Retrieve {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, allow_hyphen_values = true)]
        query: String,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Both)]
        mode: ModeArg,
        #[command(flatten)]
        dynamics: DynamicsArgs,
        /// Write the energy trace as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Success rate against pattern count with half-masked queries.
    CapacitySweep {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Pattern counts, strictly increasing.
        #[arg(long, default_value = "8,16,32,64,128")]
        grid: String,
    },
    /// Success rate against Gaussian query noise.
    RobustnessSweep {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Noise levels σ, strictly increasing.
        #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0,1.1,1.2,1.3,1.4,1.5")]
        grid: String,
        /// Patterns per trial.
        #[arg(long, default_value_t = 32)]
        num_patterns: usize,
    },
    /// Sparse and dense capacity lower bounds over a (d, β) grid.
    CapacityBound {
        #[arg(long, default_value = "8,32,128")]
        dims: String,
        #[arg(long, default_value = "100,1000")]
        betas: String,
        /// Pattern norm: a number or `sqrt-d`.
        #[arg(long, default_value = "sqrt-d")]
        m: String,
        #[arg(long, default_value_t = 0.01)]
        p_fail: f64,
        /// Sphere radius R as a multiple of m.
        #[arg(long, default_value_t = 1.0, conflicts_with = "radius")]
        radius_rel: f64,
        /// Absolute sphere radius R.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forward pass of the multi-step sparse Hopfield layer.
    AttnForward {
        /// Query sequence R, one row per token (CSV).
        #[arg(long)]
        queries: PathBuf,
        /// Memory sequence Y, one row per token (CSV).
        #[arg(long)]
        memory: PathBuf,
        #[arg(long)]
        w_q: Option<PathBuf>,
        #[arg(long)]
        w_k: Option<PathBuf>,
        #[arg(long)]
        w_v: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Sparse)]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct StoreArgs {
    /// Pattern file.
    #[arg(long)]
    patterns: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Args)]
struct DynamicsArgs {
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    step_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    energy_tol: f64,
}

impl DynamicsArgs {
    fn config(&self) -> RetrievalConfig {
        RetrievalConfig {
            max_iters: self.max_iters,
            step_tol: self.step_tol,
            energy_tol: self.energy_tol,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Success when ‖x_T − ξ_μ‖² < threshold.
    #[arg(long)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Draw patterns from this file instead of synthesizing them.
    #[arg(long)]
    patterns: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Synthetic patterns: gaussian, sphere[:m] or sparse-binary[:density].
    #[arg(long, default_value = "sparse-binary:0.1", conflicts_with = "patterns")]
    synthetic: String,
    /// Dimension of synthetic patterns.
    #[arg(long, default_value_t = 256)]
    dim: usize,
    #[command(flatten)]
    dynamics: DynamicsArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sparse,
    Dense,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::Sparse => vec![Mode::Sparse],
            ModeArg::Dense => vec![Mode::Dense],
            ModeArg::Both => Mode::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    F64le,
}

impl From<FormatArg> for PatternFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => PatternFormat::Csv,
            FormatArg::F64le => PatternFormat::F64Le,
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn join_reals(v: &[f64]) -> String {
    v.iter().map(|x| fmt_real(*x)).collect::<Vec<_>>().join(",")
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|f| {
            f.trim()
                .parse()
                .map_err(|_| HopfieldError::InvalidParameter(format!("bad {what} `{}`", f.trim())))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sparsemax { vec, beta, mode } => {
            let z = parse_vector(&vec)?;
            let mut out = output(None)?;
            for m in mode.modes() {
                let p = match m {
                    Mode::Sparse => {
                        let scaled: Vec<f64> = z.iter().map(|v| beta * v).collect();
                        sparsemax(&scaled)?
                    }
                    Mode::Dense => softmax(&z, beta)?,
                };
                writeln!(out, "{m}: p = {}", join_reals(&p.p))?;
                if m == Mode::Sparse {
                    writeln!(out, "{m}: tau = {}, kappa = {}", fmt_real(p.tau), p.kappa)?;
                }
            }
            out.flush()?;
        }
        Command::Energy { store, query, beta, mode } => {
            let patterns = load_patterns(&store.patterns, store.format.into())?;
            let x = QueryState::from_slice(&parse_vector(&query)?)?;
            let mut out = output(None)?;
            for m in mode.modes() {
                writeln!(out, "{m}: {}", fmt_real(energy(&patterns, &x, beta, m)?))?;
            }
            out.flush()?;
        }
        Command::Retrieve {
            store,
            query,
            beta,
            mode,
            dynamics,
            out,
        } => {
            let patterns = load_patterns(&store.patterns, store.format.into())?;
            let x = QueryState::from_slice(&parse_vector(&query)?)?;
            let traces = mode
                .modes()
                .into_iter()
                .map(|m| retrieve(&patterns, &x, beta, m, &dynamics.config()))
                .collect::<Result<Vec<_>>>()?;
            let mut stdout = output(None)?;
            for t in &traces {
                writeln!(
                    stdout,
                    "{}: iterations = {}, converged = {}, energy = {}",
                    t.mode,
                    t.iterations(),
                    t.converged,
                    fmt_real(*t.energies.last().unwrap())
                )?;
                writeln!(stdout, "{}: x = {}", t.mode, join_reals(t.final_state().as_slice()))?;
            }
            stdout.flush()?;
            if let Some(path) = out {
                let mut w = output(Some(&path))?;
                writeln!(w, "t,mode,energy")?;
                for tr in &traces {
                    for (t, h) in tr.energies.iter().enumerate() {
                        writeln!(w, "{t},{},{}", tr.mode, fmt_real(*h))?;
                    }
                }
                w.flush()?;
            }
        }
        Command::CapacitySweep { sweep, grid } => {
            let grid = parse_list(&grid, "pattern count")?;
            run_sweep(sweep, SweepKind::Capacity, grid, 0)?;
        }
        Command::RobustnessSweep {
            sweep,
            grid,
            num_patterns,
        } => {
            let grid = parse_list(&grid, "noise level")?;
            run_sweep(sweep, SweepKind::Robustness, grid, num_patterns)?;
        }
        Command::CapacityBound {
            dims,
            betas,
            m,
            p_fail,
            radius_rel,
            radius,
            delta,
            out,
        } => {
            let dims: Vec<usize> = parse_list(&dims, "dimension")?;
            let betas: Vec<f64> = parse_list(&betas, "beta")?;
            let norm = match m.as_str() {
                "sqrt-d" => NormSpec::SqrtD,
                other => NormSpec::Fixed(
                    other
                        .parse()
                        .map_err(|_| HopfieldError::InvalidParameter(format!("bad pattern norm `{other}`")))?,
                ),
            };
            let radius = radius.map_or(RadiusSpec::RelativeToNorm(radius_rel), RadiusSpec::Absolute);
            let rows = capacity_bound_table(&dims, &betas, norm, radius, delta, p_fail)?;
            let mut w = output(out.as_deref())?;
            write_capacity_csv(&mut w, &rows)?;
            w.flush()?;
            if !rows.iter().any(|r| r.is_feasible()) {
                let reason = match &rows[0].sparse {
                    CellOutcome::Infeasible { message, .. } => message.clone(),
                    CellOutcome::Feasible(_) => unreachable!(),
                };
                return Err(HopfieldError::InfeasibleBound(format!("every cell is infeasible; first: {reason}")));
            }
        }
        Command::AttnForward {
            queries,
            memory,
            w_q,
            w_k,
            w_v,
            beta,
            steps,
            mode,
            out,
        } => {
            let r = load_matrix_csv(&queries)?;
            let y = load_matrix_csv(&memory)?;
            let load = |p: Option<PathBuf>, dim: usize| -> Result<DMatrix<f64>> {
                p.map_or_else(|| Ok(DMatrix::identity(dim, dim)), |p| load_matrix_csv(&p))
            };
            let proj = ProjectionSet::new(load(w_q, r.ncols())?, load(w_k, y.ncols())?, load(w_v, y.ncols())?)?;
            let m = match mode {
                ModeArg::Sparse => Mode::Sparse,
                ModeArg::Dense => Mode::Dense,
                ModeArg::Both => {
                    return Err(HopfieldError::InvalidParameter("attn-forward takes a single mode".into()))
                }
            };
            let z = sparse_hopfield_layer(&SequenceBatch::new(r, y)?, &proj, beta, steps, m)?;
            let mut w = output(out.as_deref())?;
            for row in z.row_iter() {
                let v: Vec<f64> = row.iter().copied().collect();
                writeln!(w, "{}", join_reals(&v))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn run_sweep(args: SweepArgs, kind: SweepKind, grid: Vec<f64>, num_patterns: usize) -> Result<()> {
    let source = match &args.patterns {
        Some(path) => PatternSource::Store(load_patterns(path, args.format.into())?),
        None => PatternSource::Synthetic(args.synthetic.parse::<PatternKind>()?),
    };
    let config = ExperimentConfig {
        modes: args.mode.modes(),
        beta: args.beta,
        threshold: args.threshold,
        trials: args.trials,
        seed: args.seed,
        grid,
        dim: args.dim,
        num_patterns,
        source,
        retrieval: args.dynamics.config(),
    };
    let rows = match kind {
        SweepKind::Capacity => capacity_sweep(&config)?,
        SweepKind::Robustness => robustness_sweep(&config)?,
    };
    let mut w = output(args.out.as_deref())?;
    write_sweep_csv(&mut w, kind, &config, &rows)?;
    w.flush()?;
    Ok(())
}
