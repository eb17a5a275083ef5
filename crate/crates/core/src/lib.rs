pub mod basis;
pub mod cases;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod norms;
pub mod quadrature;
pub mod reference;
pub mod solver;
pub mod space;
pub mod study;
pub mod weak_gradient;

pub use error::{Error, Result};
