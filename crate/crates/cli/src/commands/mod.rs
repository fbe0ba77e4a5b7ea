pub mod ensemble;
pub mod forward;
pub mod mesh;
pub mod multifreq;
pub mod phantom;
pub mod repro;
pub mod svd;
