pub mod error;
pub mod finite_sample;
pub mod normal;
pub mod optim;
pub mod prior;
pub mod prox;
pub mod quad;
pub mod risk;
pub mod rng;
pub mod state_evolution;
