pub mod alphabet;
pub mod config;
pub mod conjugate;
pub mod divergence;
pub mod env;
pub mod error;
pub mod experiment;
pub mod fsio;
pub mod machine;
pub mod mixture;
pub mod numeric;
