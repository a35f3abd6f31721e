//! Probabilistic process specifications, state-space exploration and a
//! quantitative modal mu-calculus checker for slot-machine models.

pub mod datalang;
pub mod models;
pub mod montecarlo;
pub mod quantcheck;
pub mod speclang;
pub mod statespace;
pub mod strategy;
pub mod symbol;
