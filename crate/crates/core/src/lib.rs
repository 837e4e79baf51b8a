//! Exact solver core for near-optimal robust linear bilevel problems.
//!
//! Everything here works over arbitrary-precision rationals and needs only
//! `alloc`. File formats, timing and the command line live in the `norbip`
//! companion crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod bnb;
pub mod driver;
pub mod generate;
pub mod instance;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod rational;
pub mod samples;
pub mod vertex_enum;
