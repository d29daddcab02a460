//! The book's chapters as doc-tests: `cargo test -p cadproj-book-tests`
//! compiles and runs every listing in `book/src`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/constraints.md")]
pub mod constraints {}
#[doc = include_str!("../../../book/src/projection.md")]
pub mod projection {}
#[doc = include_str!("../../../book/src/jacobians.md")]
pub mod jacobians {}
#[doc = include_str!("../../../book/src/clipping.md")]
pub mod clipping {}
#[doc = include_str!("../../../book/src/oracles.md")]
pub mod oracles {}
#[doc = include_str!("../../../book/src/generators.md")]
pub mod generators {}
#[doc = include_str!("../../../book/src/descent.md")]
pub mod descent {}
#[doc = include_str!("../../../book/src/cadbench.md")]
pub mod cadbench {}
