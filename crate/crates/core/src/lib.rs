//! Scalar rough-path numerics: geometric lifts, sewing, controlled integration,
//! fBm sampling, rough flows, the local-time functional and rough transport.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controlled;
pub mod error;
pub mod fbm;
pub mod flow;
pub mod functions;
pub mod grid;
pub mod io;
pub mod localtime;
pub mod permanent;
pub mod quad;
pub mod rough;
pub mod stats;
pub mod tensor;
pub mod transport;

pub use error::{Error, Result};
pub use functions::{Smooth, SmoothFn};
pub use grid::{TimeGrid, Triangular};
pub use rough::{chen_defect, geometric_lift, rough_distance, sewing_integrate, RoughPath, TwoParamFn};
pub use tensor::{tensor_product, TruncTensor};
