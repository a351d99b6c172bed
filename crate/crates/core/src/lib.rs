pub mod bundle;
pub mod chart;
pub mod error;
pub mod fixtures;
pub mod homogeneity;
pub mod identities;
pub mod lie;
pub mod report;
pub mod tensor;
pub mod total_space;

pub use chart::{Chart, ConnectionCoeffs, FrameFieldConnection, MetricField, TensorFieldSpec};
pub use error::{GeomError, Result};
pub use tensor::{Axis, DenseTensor, OrthoFrame};
