//! Delayed hysteretic relay systems.
//!
//! The crate simulates systems `ẏ = f(y, u)` whose binary input `u` is a
//! relay with hysteresis acting on `h(y(t - τ))`, reduces the dynamics near
//! a symmetric corner collision to a piecewise-smooth planar map `F`, and
//! provides the continuation and iteration tools used to study that map
//! for the rescaled unstable oscillator.
//!
//! ```
//! use hysteretic_relay::oscillator::{collision_point, OscillatorParams};
//!
//! let y = collision_point(-0.1, 4.2).unwrap();
//! let params = OscillatorParams::on_surface(-0.1, 4.2, -0.44).unwrap();
//! assert!(params.epsilon > 0.0);
//! assert!(y.norm() > 0.0);
//! ```

pub mod attractor;
pub mod continuation;
pub mod error;
pub mod flows;
pub mod oscillator;
pub mod reduced_map;
pub mod relay;
pub mod roots;

pub use error::{Error, Result};
pub use flows::{AffineOscillatorFlow, Flow, VectorFieldFlow};
pub use reduced_map::{Branch as MapBranch, CollisionContext, DomainTag};
pub use relay::{HistorySegment, HybridState, Relay, RelaySystem, Trajectory};
