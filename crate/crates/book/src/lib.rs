//! The guide in `book/` is plain mdbook, which cannot run its own listings.
//! Each chapter is pulled in here as the docs of an empty module, so
//! `cargo test --doc -p thermoface-book` runs every code block. One module
//! per chapter keeps a failing listing traceable to its file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/tensors.md")]
pub mod tensors {}
#[doc = include_str!("../../../book/src/encoder.md")]
pub mod encoder {}
#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}
#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/gallery.md")]
pub mod gallery {}
#[doc = include_str!("../../../book/src/camera.md")]
pub mod camera {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
