//! Runs the code blocks of the guide in `book/` as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/neurons.md")]
pub mod neurons {}
#[doc = include_str!("../../../book/src/learning.md")]
pub mod learning {}
#[doc = include_str!("../../../book/src/federated.md")]
pub mod federated {}
#[doc = include_str!("../../../book/src/channel.md")]
pub mod channel {}
#[doc = include_str!("../../../book/src/jscc.md")]
pub mod jscc {}
#[doc = include_str!("../../../book/src/files.md")]
pub mod files {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
