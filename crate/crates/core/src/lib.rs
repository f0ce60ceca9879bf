//! Streaming sketches that answer subset-norm queries `‖v∘s‖_p` for every
//! set `s` of a declared set system, with space governed by the system's
//! heavy-hitter dimension.

pub mod bounded_sampler;
pub mod count_sketch;
pub mod error;
pub mod family;
pub mod hashing;
pub mod l1_adapter;
pub mod lp_additive;
pub mod oracle;
pub mod priority_sampling;
pub mod setsystem;
pub mod state;
pub mod subset_l0;

pub use error::{Error, Result};
pub use family::{Family, SetQuery};
pub use state::{AnySketch, SketchConfig, SketchKind};
