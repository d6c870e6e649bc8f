//! Polar code construction for discrete memoryless channels with arbitrary
//! finite input alphabets.
//!
//! The synthetic subchannels of a length-`2^n` code are obtained by evolving
//! the channel's joint input/output distribution through `n` kernel
//! transforms, keeping every intermediate output alphabet within a budget `mu`
//! by merging output symbols. [`construct::construct_all`] evaluates the whole
//! tree; [`sc`] provides the matching encoder and successive-cancellation decoder.
//!
//! ```
//! use qpolar::alphabet::KernelSpec;
//! use qpolar::channel::ChannelFamily;
//! use qpolar::construct::construct_all;
//! use qpolar::merge::MergePolicy;
//!
//! let w = ChannelFamily::Qsc { q: 4, eps: 0.15 }.build().unwrap();
//! let k = KernelSpec::mod_add(4).unwrap();
//! let recs = construct_all(&w, &k, 4, &MergePolicy::algorithm2(64)).unwrap();
//! let avg = recs.iter().map(|r| r.capacity).sum::<f64>() / 16.0;
//! assert!(avg <= w.symmetric_capacity() + 1e-12);
//! ```

pub mod alphabet;
pub mod channel;
pub mod cli;
pub mod construct;
mod error;
pub mod merge;
pub mod sc;
pub mod transform;

pub use error::{Error, Result};
