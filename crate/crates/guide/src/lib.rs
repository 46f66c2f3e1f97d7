//! The guide in `book/src`, compiled as doc-tests so its examples stay
//! correct. This crate has no code of its own.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/dpp.md")]
pub mod dpp {}

#[doc = include_str!("../../../book/src/greedy.md")]
pub mod greedy {}

#[doc = include_str!("../../../book/src/forests.md")]
pub mod forests {}

#[doc = include_str!("../../../book/src/imputation.md")]
pub mod imputation {}

#[doc = include_str!("../../../book/src/quantum.md")]
pub mod quantum {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
