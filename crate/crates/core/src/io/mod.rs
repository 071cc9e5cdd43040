//! Matrix and problem file formats.

pub mod binary;
pub mod mtx;
pub mod problem;

pub use binary::{read_binary_matrix, write_binary_matrix};
pub use mtx::{read_matrix_market, write_matrix_market_array, write_matrix_market_coordinate};
pub use problem::{
    load_matrix, parse_problem, read_problem_file, write_problem_file, write_problem_file_with_matrix, MatrixSource,
    ProblemFile,
};
