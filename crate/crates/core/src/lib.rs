pub mod cli;
pub mod exec;
pub mod fock;
pub mod optics;
pub mod params;
pub mod rates;
pub mod sim;
