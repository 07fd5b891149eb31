//! Edge-guided recurrent residual super-resolution.
//!
//! The crate is organised around a small dense-tensor engine ([`tensor`]),
//! an image pipeline that turns files on disk into training patches
//! ([`image`]), the network itself ([`net`]), an SGD trainer with
//! checkpointing ([`train`]) and a PSNR/SSIM evaluator ([`eval`]).

pub mod error;
pub mod eval;
pub mod image;
pub mod net;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
