//! Classical reference models: a small fully connected network and the
//! Xu-Randall diagnostic cloud-fraction scheme.

pub mod mlp;
pub mod xu_randall;

pub use mlp::{Activation, MlpConfig, MlpModel};
pub use xu_randall::{
    saturation_specific_humidity, saturation_vapor_pressure, xu_randall_cloud_cover, XuRandallConstants, XuRandallModel,
};
