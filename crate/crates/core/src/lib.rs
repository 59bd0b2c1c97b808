//! 5G NR CSI codebooks.
//!
//! The crate covers the full NR codebook family: Type I single- and
//! multi-panel, Type II and its port-selection variant, Enhanced Type II
//! (regular and port selection) and Further Enhanced Type II port
//! selection. For each codebook there is a UE-side encoder turning a channel
//! estimate into a PMI and a gNB-side decoder rebuilding the per-subband
//! precoder from the PMI. Feedback overhead is accounted for in [`overhead`],
//! the canonical bit layout lives in [`codec`], and [`chansim`] runs
//! desk-scale MU-MIMO comparisons over a geometric multipath channel.

pub mod beamgrid;
pub mod chansim;
pub mod codec;
pub mod etype2;
pub mod fetype2ps;
pub mod linalg;
pub mod overhead;
pub mod pmi;
pub mod quantizers;
pub mod type1;
pub mod type2;

mod error;

pub use beamgrid::{AntennaConfig, BeamVector};
pub use chansim::{ChannelRealization, PathSet};
pub use error::Error;
pub use linalg::Precoder;
pub use pmi::{CodebookKind, Pmi};

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub use num_complex::Complex64 as C64;
