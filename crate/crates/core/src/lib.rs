//! Fourier growth of two-party protocols.
//!
//! The exact layer ([`boolean`], [`protocol`], [`fiber`], [`gadgets`]) is
//! generic over [`Scalar`]; the Monte-Carlo layer ([`gaussian`],
//! [`concentration`]) works in `f64`.

pub mod boolean;
pub mod concentration;
pub mod error;
pub mod experiments;
pub mod fiber;
pub mod gadgets;
pub mod gaussian;
pub mod linalg;
pub mod protocol;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::{Exact, Scalar};

pub type BooleanFnF64 = boolean::BooleanFn<f64>;
pub type BooleanFnF32 = boolean::BooleanFn<f32>;
pub type ExactBooleanFn = boolean::BooleanFn<Exact>;
pub type SpectrumF64 = boolean::FourierSpectrum<f64>;
pub type ExactSpectrum = boolean::FourierSpectrum<Exact>;
pub type ProtocolF64 = protocol::ProtocolTree<f64>;
pub type ExactProtocol = protocol::ProtocolTree<Exact>;
