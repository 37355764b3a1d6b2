//! Rigorous construction of combinatorial index pairs for planar maps by
//! bottom-up box insertion, with Conley index computation and certified
//! lower bounds on topological entropy.

pub mod boxtree;
pub mod combinat;
pub mod connect;
pub mod dynamics;
pub mod error;
pub mod homology;
pub mod interval;
pub mod pipeline;
pub mod report;
pub mod seeds;

#[cfg(test)]
#[path = "../tests/common/hp.rs"]
mod hp;

pub use error::{Error, Result};
