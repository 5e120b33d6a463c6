pub mod complex;
pub mod cli;
pub mod cone;
pub mod cusp;
pub mod error;
pub mod field;
pub mod heights;
pub mod linalg;
pub mod spine;
pub mod suites;
