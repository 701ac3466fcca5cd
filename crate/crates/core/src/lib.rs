//! k-Same face de-identification with a Siamese-guided conditional GAN.
//!
//! The crate bundles a small reverse-mode autodiff engine ([`nn`]), emulated mixed-precision
//! training ([`precision`]), the generator/critic/Siamese networks ([`models`]), their losses
//! ([`losses`]), k-Same grouping and surrogate generation ([`ksame`]), the alternating
//! training loop ([`training`]), hyperparameter search ([`hypertune`]), image-quality and
//! re-identification metrics ([`evaluation`]) and dataset/image IO ([`data`]).

pub mod error;
pub mod nn;
pub mod par;
pub mod precision;

pub use error::{Error, Result};
pub mod data;
pub mod evaluation;
pub mod hypertune;
pub mod ksame;
pub mod losses;
pub mod models;
pub mod seed;
pub mod training;
