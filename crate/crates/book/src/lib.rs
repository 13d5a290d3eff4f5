//! The book's code listings, compiled and run as doc-tests.
//!
//! mdbook cannot run listings that depend on workspace crates, so each
//! chapter is included here as the docs of an empty module.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/groups.md")]
pub mod groups {}
#[doc = include_str!("../../../book/src/modular.md")]
pub mod modular {}
#[doc = include_str!("../../../book/src/orbits.md")]
pub mod orbits {}
#[doc = include_str!("../../../book/src/measures.md")]
pub mod measures {}
#[doc = include_str!("../../../book/src/density.md")]
pub mod density {}
#[doc = include_str!("../../../book/src/jacobson_morozov.md")]
pub mod jacobson_morozov {}
#[doc = include_str!("../../../book/src/ratner.md")]
pub mod ratner {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
