//! Input and configuration: long-format death and exposure tables, binning,
//! adjacency graphs with augmentation edges, run configuration and a
//! synthetic data generator.

mod config;
mod graph_file;
mod raw;
mod simulate;

pub use config::{HindcastConfig, RrConfig, RunConfig};
pub use graph_file::{graph_from_rows, load_graph, write_graph, EdgeRow, GraphReport};
pub use raw::{aggregate, dataset_to_raw, Aggregated, BinSpec, RawRow, RawSeries};
pub use simulate::{ring_graph, simulate, simulate_dataset, truth_for, Simulation, SimulationConfig};
