//! Configuration, datasets, experiment drivers and result files.

mod config;
mod experiment;
mod idx;
mod output;

pub use config::{
    dbm_to_watts, load_config, DatasetSource, ExperimentConfig, FlBlock, MnistPaths, ModelKind, OutputBlock, OutputFormat,
    PhysicsBlock, ScenarioBlock, SolverBlock, SweepAxis, SweepSpec, SyntheticBlock,
};
pub use experiment::{
    apply_axis, generate_scenario, load_data, repetition_seed, run_comparison, run_sweep, run_training, shard_sizes, DataBundle,
    RunOutcome, SweepCell, SweepRow, SweepTable,
};
pub use idx::{load_mnist_idx, read_idx_images, read_idx_labels, IMAGES_MAGIC, LABELS_MAGIC};
pub use output::{
    emit_results, format_sig6, write_json, write_rounds_csv, write_sweep_cells_csv, write_sweep_csv, Manifest, Results,
    ROUND_HEADER,
};
