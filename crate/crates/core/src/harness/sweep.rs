use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{HopfieldError, Result};
use crate::harness::fmt_real;
use crate::harness::seed::{trial_rng, PRNG_DESCRIPTION};
use crate::harness::synth::{corrupt_with, squared_error, synthesize_with, Corruption, PatternKind};
use crate::hopfield::{retrieve, Mode, PatternStore, QueryState, RetrievalConfig};

pub const SWEEP_HEADER: &str = "x,mode,success_rate,mean_sq_error,mean_iters,trials,seed";

#[derive(Debug, Clone, PartialEq)]
pub enum PatternSource {
    /// Fresh patterns per trial.
    Synthetic(PatternKind),
    /// Patterns drawn without replacement from a fixed store per trial.
    Store(PatternStore),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// x = pattern count M, query = half-masked target.
    Capacity,
    /// x = noise σ, query = target plus N(0, σ²) noise, M fixed.
    Robustness,
}

impl SweepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKind::Capacity => "capacity",
            SweepKind::Robustness => "robustness",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub modes: Vec<Mode>,
    pub beta: f64,
    /// Success when ‖x_T − ξ_μ‖² < threshold.
    pub threshold: f64,
    pub trials: usize,
    pub seed: u64,
    /// Pattern counts (capacity) or noise levels (robustness), strictly increasing.
    pub grid: Vec<f64>,
    /// Dimension of synthetic patterns; ignored for a loaded store.
    pub dim: usize,
    /// Fixed pattern count of a robustness sweep.
    pub num_patterns: usize,
    pub source: PatternSource,
    pub retrieval: RetrievalConfig,
}

impl ExperimentConfig {
    fn validate(&self, kind: SweepKind) -> Result<()> {
        let bad = |msg: String| Err(HopfieldError::InvalidParameter(msg));
        if self.modes.is_empty() {
            return bad("at least one mode is required".into());
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.threshold > 0.0) {
            return bad(format!("success threshold must be positive, got {}", self.threshold));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.grid.is_empty() {
            return Err(HopfieldError::EmptyInput);
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("grid must be strictly increasing".into());
        }
        if let PatternSource::Synthetic(_) = self.source {
            if self.dim == 0 {
                return bad("pattern dimension must be at least 1".into());
            }
        }
        match kind {
            SweepKind::Capacity => {
                for &x in &self.grid {
                    if !(x >= 1.0) || x.fract() != 0.0 {
                        return bad(format!("capacity grid values must be positive integers, got {x}"));
                    }
                    self.check_count(x as usize)?;
                }
            }
            SweepKind::Robustness => {
                if let Some(x) = self.grid.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                    return bad(format!("noise levels must be non-negative, got {x}"));
                }
                if self.num_patterns == 0 {
                    return bad("pattern count must be at least 1".into());
                }
                self.check_count(self.num_patterns)?;
            }
        }
        Ok(())
    }

    fn check_count(&self, count: usize) -> Result<()> {
        match &self.source {
            PatternSource::Store(store) if count > store.len() => Err(HopfieldError::InvalidParameter(format!(
                "cannot draw {count} patterns from a store of {}",
                store.len()
            ))),
            _ => Ok(()),
        }
    }

    fn pattern_dim(&self) -> usize {
        match &self.source {
            PatternSource::Synthetic(_) => self.dim,
            PatternSource::Store(store) => store.dim(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub mode: Mode,
    pub success: bool,
    pub sq_error: f64,
    pub iterations: usize,
}

/// All modes run on the same (patterns, target, query) instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub target: usize,
    pub outcomes: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub x_value: f64,
    pub mode: Mode,
    pub success_rate: f64,
    pub mean_sq_error: f64,
    pub mean_iters: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Per-trial outcomes at one grid value, in trial order.
pub fn sweep_trials(config: &ExperimentConfig, kind: SweepKind, x: f64) -> Result<Vec<TrialRecord>> {
    config.validate(kind)?;
    run_point(config, kind, x)
}

fn run_point(config: &ExperimentConfig, kind: SweepKind, x: f64) -> Result<Vec<TrialRecord>> {
    (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, kind, x, trial))
        .collect()
}

fn run_trial(config: &ExperimentConfig, kind: SweepKind, x: f64, trial: usize) -> Result<TrialRecord> {
    let mut rng = trial_rng(config.seed, x.to_bits(), trial as u64);
    let count = match kind {
        SweepKind::Capacity => x as usize,
        SweepKind::Robustness => config.num_patterns,
    };
    let store = match &config.source {
        PatternSource::Synthetic(pk) => synthesize_with(&mut rng, config.pattern_dim(), count, *pk)?,
        PatternSource::Store(full) => {
            let mut idx = rand::seq::index::sample(&mut rng, full.len(), count).into_vec();
            idx.sort_unstable();
            full.select(&idx)?
        }
    };
    let target = rng.random_range(0..count);
    let xi = QueryState::new(store.pattern(target))?;
    let corruption = match kind {
        SweepKind::Capacity => Corruption::HalfMask,
        SweepKind::Robustness => Corruption::Gaussian { sigma: x },
    };
    let query = corrupt_with(&mut rng, &xi, corruption)?;

    let outcomes = config
        .modes
        .iter()
        .map(|&mode| {
            let trace = retrieve(&store, &query, config.beta, mode, &config.retrieval)?;
            let sq_error = squared_error(trace.final_state(), &xi, config.threshold)?;
            Ok(TrialOutcome {
                mode,
                success: sq_error < config.threshold,
                sq_error,
                iterations: trace.iterations(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialRecord {
        trial,
        target,
        outcomes,
    })
}

fn run_sweep(config: &ExperimentConfig, kind: SweepKind) -> Result<Vec<SweepRow>> {
    config.validate(kind)?;
    let mut rows = Vec::with_capacity(config.grid.len() * config.modes.len());
    for &x in &config.grid {
        let records = run_point(config, kind, x)?;
        for (k, &mode) in config.modes.iter().enumerate() {
            let n = records.len() as f64;
            let (mut hits, mut err, mut iters) = (0usize, 0.0, 0.0);
            for r in &records {
                let o = &r.outcomes[k];
                hits += o.success as usize;
                err += o.sq_error;
                iters += o.iterations as f64;
            }
            rows.push(SweepRow {
                x_value: x,
                mode,
                success_rate: hits as f64 / n,
                mean_sq_error: err / n,
                mean_iters: iters / n,
                trials: config.trials,
                seed: config.seed,
            });
        }
    }
    Ok(rows)
}

/// Success rate against pattern count with half-masked queries.
pub fn capacity_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    run_sweep(config, SweepKind::Capacity)
}

/// Success rate against Gaussian query noise at a fixed pattern count.
pub fn robustness_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    run_sweep(config, SweepKind::Robustness)
}

pub fn write_sweep_csv<W: Write>(
    mut out: W,
    kind: SweepKind,
    config: &ExperimentConfig,
    rows: &[SweepRow],
) -> Result<()> {
    let source = match &config.source {
        PatternSource::Synthetic(pk) => format!("synthetic {pk}"),
        PatternSource::Store(s) => format!("store d={} M={}", s.dim(), s.len()),
    };
    writeln!(out, "# sparse-hopfield {} sweep", kind.as_str())?;
    writeln!(out, "# prng: {PRNG_DESCRIPTION}")?;
    writeln!(
        out,
        "# source: {source}; d={}; beta={}; threshold={}; max_iters={}; step_tol={:e}; energy_tol={:e}",
        config.pattern_dim(),
        config.beta,
        config.threshold,
        config.retrieval.max_iters,
        config.retrieval.step_tol,
        config.retrieval.energy_tol
    )?;
    if kind == SweepKind::Robustness {
        writeln!(out, "# patterns per trial: {}", config.num_patterns)?;
    }
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_real(r.x_value),
            r.mode,
            fmt_real(r.success_rate),
            fmt_real(r.mean_sq_error),
            fmt_real(r.mean_iters),
            r.trials,
            r.seed
        )?;
    }
    Ok(())
}
