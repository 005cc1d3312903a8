pub mod eigengap;
pub mod equivalence;
pub mod explosion;
pub mod residual;
pub mod speed;
