pub mod energy;
pub mod montecarlo;
pub mod search;
pub mod train;
