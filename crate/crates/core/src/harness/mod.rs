//! Desk-scale retrieval experiments: pattern ingestion, corruption, success
//! scoring, capacity and robustness sweeps, capacity-bound tables and CSV
//! output.

pub mod io;
pub mod seed;
pub mod sweep;
pub mod synth;
pub mod table;

pub use io::{load_matrix_csv, load_patterns, parse_vector, save_patterns, PatternFormat};
pub use seed::{derive_seed, trial_rng, PRNG_DESCRIPTION};
pub use sweep::{
    capacity_sweep, robustness_sweep, sweep_trials, write_sweep_csv, ExperimentConfig, PatternSource, SweepKind,
    SweepRow, TrialOutcome, TrialRecord, SWEEP_HEADER,
};
pub use synth::{corrupt, retrieval_success, synthesize_patterns, Corruption, PatternKind};
pub use table::{capacity_bound_table, write_capacity_csv, CapacityRow, CellOutcome, NormSpec, RadiusSpec};

/// Formats a real with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}
