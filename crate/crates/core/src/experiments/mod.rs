//! Datasets, training and the evaluation campaigns.

mod ablation;
mod compress;
mod curves;
mod dataset;
mod eval;
mod spectrum;
mod train;

pub use ablation::{ablation_suite, ablation_variants, width_timing, AblationReport, Variant, VariantResult};
pub use compress::{compression_report, CompressionReport, CompressionRow};
pub use curves::{write_csv, CsvHeader, CurvePoint};
pub use dataset::{build_dataset, generate_record, split_seed, Dataset, DatasetRecord, Split};
pub use eval::{eval_doa, eval_reconstruction, DoaTable, ReconRow};
pub use spectrum::{spectrum_compare, SpectrumComparison};
pub use train::{train, train_with_architecture, TrainReport};
