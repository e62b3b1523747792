//! The guide in `book/` is compiled here so its code samples run as
//! doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/running.md")]
pub mod running {}
#[doc = include_str!("../../../book/src/personas.md")]
pub mod personas {}
#[doc = include_str!("../../../book/src/platform.md")]
pub mod platform {}
#[doc = include_str!("../../../book/src/scheduler.md")]
pub mod scheduler {}
#[doc = include_str!("../../../book/src/network.md")]
pub mod network {}
#[doc = include_str!("../../../book/src/coreperiphery.md")]
pub mod coreperiphery {}
#[doc = include_str!("../../../book/src/textmetrics.md")]
pub mod textmetrics {}
#[doc = include_str!("../../../book/src/toxicity.md")]
pub mod toxicity {}
