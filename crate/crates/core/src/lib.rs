pub mod check;
pub mod classify;
pub mod cli;
pub mod expr;
pub mod jet;
pub mod scalar;
pub mod scalars;
pub mod tensor;
pub mod geometry;
pub mod soliton;
pub mod integrate;
pub mod report;
pub mod suite;
pub mod zoo;
