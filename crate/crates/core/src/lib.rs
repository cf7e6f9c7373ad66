//! Explaining multi-agent policies from sampled behaviour.
//!
//! Traces of concrete joint states are abstracted into an MMDP over
//! feature-predicate bit vectors ([`abstraction`]). From that abstraction the
//! crate extracts the most probable task sequence as a chart ([`summarize`])
//! and answers when / why-not / what queries ([`query`]) with minimized
//! Boolean conditions ([`boolmin`]) rendered as English ([`nlg`]).
//!
//! Probabilities are generic over [`Probability`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod abstraction;
pub mod boolmin;
pub mod domain;
pub mod envs;
pub mod error;
pub mod nlg;
pub mod query;
mod scalar;
pub mod summarize;

pub use error::{Error, Result};
pub use scalar::Probability;

pub type PolicyAbstraction = abstraction::Abstraction<f64>;
pub type Transition = abstraction::Transition<f64>;
pub type MostProbablePath = summarize::MostProbablePath<f64>;
