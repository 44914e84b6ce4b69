// The guide under book/ is plain mdbook markdown. Pulling each chapter in as
// a doc comment lets `cargo test --doc` compile and run its snippets against
// this crate.

#[doc = include_str!("../../../book/src/datasets.md")]
mod datasets {}
#[doc = include_str!("../../../book/src/metrics.md")]
mod metrics {}
#[doc = include_str!("../../../book/src/queries.md")]
mod queries {}
#[doc = include_str!("../../../book/src/fastmap.md")]
mod fastmap {}
#[doc = include_str!("../../../book/src/views.md")]
mod views {}
#[doc = include_str!("../../../book/src/workspaces.md")]
mod workspaces {}
