pub mod classical;
pub mod diagnostics;
pub mod error;
pub mod family;
pub mod free;
pub mod kernel;
pub mod law;
pub mod montecarlo;
pub mod network;
pub mod partition;
pub mod report;
pub mod scalar;
mod transform;
pub mod verify;

pub use error::{Error, Result};
pub use family::{FamilyId, KernelFamily};
pub use kernel::{Kernel, Mode};
pub use law::{ClassicalLaw, FreeLaw, Law, Regime, Sampler};
pub use partition::{BlockProfile, IntervalPattern, Partition};
pub use report::{Method, MomentReport};
pub use scalar::Scalar;
