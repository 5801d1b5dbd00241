//! Local moment estimation of a discrete population spectrum from the
//! eigenvalues of a large sample covariance matrix.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contour;
pub mod error;
pub mod esd;
pub mod local_moments;
pub mod forward;
pub mod inversion;
pub mod partition;
pub mod pipeline;
pub mod poly;
pub mod psd;
pub mod sim;

pub use error::{Error, InversionStage, Result};
pub use psd::{DiscretePsd, HankelMatrix, MomentOrigin, MomentVector, Partition};
