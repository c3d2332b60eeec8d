//! Numerical geometry of finite pointed metric measure spaces.
//!
//! * [`space`] — spaces, validation, rescalings, isomorphism, covering data.
//! * [`transport`] — exact and entropic optimal transport, `W₂` and `W_c`.
//! * [`gromov`] — pointed Gromov-type distances, gluings and cylindrical measures.
//! * [`entropyflow`] — relative entropy, Fisher information and the minimizing-movement heat flow.
//! * [`spectral`] — graph Laplacians, resolvents, heat semigroups and spectra.
//! * [`lab`] — model-space generators, comparisons and reproducible experiment suites.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod space;

pub use error::{Error, Result};
pub use space::FinitePmmSpace;
pub mod transport;
pub mod gromov;
pub mod entropyflow;
pub mod spectral;
pub mod lab;
