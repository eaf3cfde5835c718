//! Hidden-matching quantum retrieval games.
//!
//! - [`matchings`]: perfect matchings, joint graphs, independence certificates
//!   and the canonical / sextet constructions.
//! - [`numerics`]: dense Hermitian linear algebra.
//! - [`game`]: hidden-matching states, the `O_a` operators and selective values.
//! - [`sdp`]: a small dense SDP solver for physical values.
//! - [`coherent`]: the coherent-state variant and its imperfection model.
//! - [`montecarlo`]: seeded simulation of the honest coherent-state receiver.

pub mod coherent;
pub mod error;
pub mod game;
pub mod gf2;
pub mod matchings;
pub mod montecarlo;
pub mod numerics;
pub mod sdp;

pub use error::{Error, Result};
