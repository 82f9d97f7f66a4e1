//! Dataset files and synthetic data.

mod io;
mod synth;

pub use io::{read_dataset, write_dataset, write_records, DatasetFile, DatasetReader, FORMAT_VERSION};
pub use synth::{eg0_bits, generate, generate_with, oracle_rate, parse_sizes, SynthConfig};
