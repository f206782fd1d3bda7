//! Data ingestion, simulated designs, run specifications, reports and
//! held-out evaluation.

mod dataset;
mod report;
mod run;
mod simulate;
mod spec;

pub use dataset::{load_csv, load_new_rows, Dataset, ResponseSelector};
pub use report::{fmt_g, write_pips, write_posterior_table, write_predictions};
pub use run::{
    chain_predictions, compare, evaluate_split, lips_predictions, split_indices, CompareConfig, Method, SplitOutcome,
    SplitSpec,
};
pub use simulate::{ase, banded_correlation, simulate_dataset, simulate_design, simulate_response, ResponseVariant};
pub use spec::{CoefSpec, Decorator, PriorKind, PriorSpec};
