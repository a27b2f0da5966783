//! Experiment plumbing: datasets, point files, and timed runs.

mod data;
mod run;

pub use data::{
    generate_uniform, generate_varden, load_points, parse_points, save_points, write_points, Dataset, Distribution, Provenance,
    VARDEN_RESTART,
};
pub use run::{
    crossover, run_dynamic, run_static, CrossoverRow, DynamicConfig, DynamicOp, RunReport, StaticConfig,
    DEFAULT_VERIFY_CUTOFF,
};
