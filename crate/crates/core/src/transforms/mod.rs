//! Geometric transforms of ground-truth masks: exact Euclidean distance
//! transforms, signed distance maps, connected components, boundary
//! extraction and soft skeletonization.

mod boundary;
mod components;
mod edt;
pub(crate) mod morphology;
mod skeleton;

pub use boundary::boundary_pixels;
pub use components::{connected_components, ComponentLabeling, Connectivity};
pub use edt::{
    edt, opposite_class_distance, signed_distance, squared_edt, DistanceMap, SignedDistanceMap,
};
pub use morphology::{max_pool3, min_pool3};
pub use skeleton::{soft_skeleton, DEFAULT_SKELETON_ITERATIONS};
pub(crate) use skeleton::{soft_skeleton_with, SoftMorphology};
