pub mod cumulant;
pub mod error;
pub mod harness;
pub mod infinitesimal;
pub mod independence;
pub mod model;
pub mod linalg;
pub mod partition;
pub mod quad;
pub mod transform;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/partitions.md")]
    mod partitions {}
    #[doc = include_str!("../../../book/src/transforms.md")]
    mod transforms {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/infinitesimal.md")]
    mod infinitesimal {}
}
