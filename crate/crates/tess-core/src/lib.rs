//! Training engine for spiking networks that learn from layer-local signals
//! instead of end-to-end backpropagation.
//!
//! Layers of leaky integrate-and-fire neurons run forward once per time step.
//! Each layer keeps O(n) eligibility state: a low-pass trace of its inputs
//! and, optionally, a low-pass trace of its own surrogate sensitivity. A
//! fixed square-wave class basis projects the layer's spikes onto class
//! scores, the softmax error comes back through the transpose of the same
//! basis, and the weight update is the outer product of that modulation with
//! the stored traces. No layer ever waits on another layer's backward pass,
//! and nothing n-squared is stored between steps.
//!
//! A dense backprop-through-time oracle ([`bptt`]) and an analytical cost
//! model ([`costmodel`]) support desk-scale verification of the rule.
//!
//! The crate is no_std (alloc required); IO, file formats and the CLI live in
//! the companion `tess-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod audit;
pub mod bptt;
pub mod conv;
pub mod costmodel;
pub mod data;
pub mod learning;
pub mod lif;
pub mod lsg;
pub mod network;
pub mod tensor;
pub mod traces;

mod error;

pub use error::{CoreError, CoreResult};
pub use tensor::Tensor;
