// Chapters of the guide, compiled so their snippets run as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/circuits.md")]
mod circuits {}
#[doc = include_str!("../../../book/src/observables.md")]
mod observables {}
#[doc = include_str!("../../../book/src/gradients.md")]
mod gradients {}
#[doc = include_str!("../../../book/src/descent.md")]
mod descent {}
#[doc = include_str!("../../../book/src/heuristics.md")]
mod heuristics {}
#[doc = include_str!("../../../book/src/experiments.md")]
mod experiments {}
