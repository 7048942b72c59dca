pub mod basis;
pub mod cmat;
pub mod ensemble;
pub mod noise;
pub mod propagator;
pub mod pulse;
pub mod tol;
pub mod transfer;
