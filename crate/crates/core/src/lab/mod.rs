//! Model spaces, comparisons and experiment suites.

mod generators;
mod pmgh;
mod suite;

pub use generators::{circle_cross_dist, gen_circle, gen_interval_with_atom, gen_split_interval, gen_unit_interval};
pub use pmgh::{pmgh_compare, PmghReport, PMGH_SEARCH_CAP};
pub use suite::{read_suite_csv, run_suite, Check, ExperimentConfig, SuiteArtifacts, SuiteKind, SuiteRow, SuiteSummary, SUITE_SCHEMA};
