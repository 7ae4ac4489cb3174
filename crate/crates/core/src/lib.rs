//! Shape optimization of PDE-constrained functionals by deformation
//! diffeomorphisms.
//!
//! Domains are images `F(K0)` of a fixed initial triangulation `K0` under an
//! isoparametric finite element map `F`. Descent directions live in a space of
//! tensor B-spline vector fields on a hold-all box and are pushed onto `F`
//! through a frozen interpolation matrix.

pub mod deform;
pub mod descent;
pub mod driver;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod spline;

pub use error::{Error, Result};
