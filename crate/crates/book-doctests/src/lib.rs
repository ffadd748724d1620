//! Compiles the guide's Rust snippets as doc tests, one module per chapter,
//! so a failing snippet points at its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/surfaces.md")]
pub mod surfaces {}
#[doc = include_str!("../../../book/src/algebra.md")]
pub mod algebra {}
#[doc = include_str!("../../../book/src/brackets.md")]
pub mod brackets {}
#[doc = include_str!("../../../book/src/coverings.md")]
pub mod coverings {}
#[doc = include_str!("../../../book/src/flips.md")]
pub mod flips {}
#[doc = include_str!("../../../book/src/representations.md")]
pub mod representations {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
