//! Haze synthesis with the atmospheric scattering model, physics-based
//! rehazy generation, dark channel prior estimation and full-reference
//! image quality metrics.

pub mod asm;
pub mod config;
pub mod dcp;
pub mod depth;
pub mod error;
pub mod image;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod pyramid;
pub mod rehazy;
pub mod verify;

pub use crate::asm::{
    invert_asm, sample_haze_params, synthesize_haze, transmission, Airlight, DepthMap, HazeParams,
    Interval, SceneKind, SceneProfile, TransmissionMap, T_MIN,
};
pub use crate::error::{Error, Result};
pub use crate::image::{Image, Plane};
pub use crate::rehazy::{
    delta_transmission, generate_rehazy, generate_rehazy_general, sample_delta_beta, RehazyParams,
};
