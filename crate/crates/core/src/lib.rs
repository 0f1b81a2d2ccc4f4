pub mod classify;
pub mod config;
pub mod envgen;
pub mod error;
pub mod hitting;
pub mod model;
pub mod presets;
pub mod reproduce;
pub mod simulate;
pub mod smallmat;
pub mod spectral;

pub use error::{Error, Result};
pub use model::RegimeModel;
