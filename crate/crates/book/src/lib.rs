//! Guide chapters, compiled so that their snippets run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/meshes.md")]
pub mod meshes {}

#[doc = include_str!("../../../book/src/forms.md")]
pub mod forms {}

#[doc = include_str!("../../../book/src/time_stepping.md")]
pub mod time_stepping {}

#[doc = include_str!("../../../book/src/resolvent.md")]
pub mod resolvent {}

#[doc = include_str!("../../../book/src/mean_spaces.md")]
pub mod mean_spaces {}

#[doc = include_str!("../../../book/src/frequencies.md")]
pub mod frequencies {}

#[doc = include_str!("../../../book/src/degiorgi.md")]
pub mod degiorgi {}

#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
