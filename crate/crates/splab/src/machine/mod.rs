//! Program-based priors: a toy monotone machine, exhaustive enumeration of
//! its programs into a mixture-over-outputs table, a phrase-parsing
//! complexity estimate, and a rational-parameter grid prior with explicit
//! code lengths.

pub mod enumerate;
pub mod grid;
pub mod lz78;
pub mod vm;

pub use enumerate::{
    cache_file_name, enumerate, enumerate_cached, EnumerateOptions, EnumerationTable,
    KmBoundReport, MachinePredictor, Prediction, ProgramRecord, StringRow, TableInvariantReport,
    MACHINE_VERSION,
};
pub use grid::{
    code_len_bits, code_weight, grid_mixture, invariance_report, kraft_sum, rational_grid, GridMap,
    GridMixture, GridPoint, InvarianceReport, InvarianceRow,
};
pub use vm::{
    bracket_match, run_opcodes, run_program, MachineState, Opcode, Program, RunStatus, VmScratch,
    BITS_PER_OPCODE, OPCODE_COUNT,
};
