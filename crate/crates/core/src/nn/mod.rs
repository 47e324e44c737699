//! Minimal neural-network engine: fully connected networks with an explicit
//! backward pass, Adam, and flat parameter storage.

mod adam;
pub mod io;
mod mlp;
mod params;

pub use adam::AdamState;
pub use mlp::{Activation, ForwardCache, Mlp};
pub use params::{clip_grad_norm, ParamVector};
