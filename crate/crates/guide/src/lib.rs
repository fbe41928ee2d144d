//! The book under `book/` is the narrative guide to `extclust`; this
//! crate exists so that every Rust code block in it runs as a doc-test.
//! Each chapter is attached to a module below, and `cargo test --doc
//! -p extclust-guide` executes all of its examples. If a chapter and the
//! library drift apart, the build breaks here.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/angles.md")]
pub mod angles {}

#[doc = include_str!("../../../book/src/clustering.md")]
pub mod clustering {}

#[doc = include_str!("../../../book/src/eigen.md")]
pub mod eigen {}

#[doc = include_str!("../../../book/src/faces.md")]
pub mod faces {}

#[doc = include_str!("../../../book/src/husler-reiss.md")]
pub mod husler_reiss {}

#[doc = include_str!("../../../book/src/theory.md")]
pub mod theory {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
