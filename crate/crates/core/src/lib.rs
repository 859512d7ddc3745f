pub mod dynamics;
pub mod experiments;
pub mod gauges;
pub mod io;
pub mod norms;
pub mod spectral;
