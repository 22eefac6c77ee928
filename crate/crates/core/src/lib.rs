//! Finite models of cusped spaces for free groups relative to cyclic
//! subgroups, with the coarse invariants used to compare their boundaries:
//! Gromov products, slim-triangle δ estimates, quasi-centers, cross-ratios,
//! relative cross-ratios, exit points and boundary-map distortion.

pub mod cayley;
pub mod coarse;
pub mod distortion;
pub mod cusped;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod hyperbolicity;
pub mod ledger;
pub mod morphism;
pub mod proxy;
pub mod group;
pub mod value;

pub use cayley::{CayleyBall, FlaggedDistance};
pub use cusped::{CuspedSpace, VertexId};
pub use error::{Error, Result};
pub use group::{CosetId, Generator, Presentation, Word};
pub use value::{ExtendedValue, HalfInt};
