#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barycenter;
pub mod busemann;
pub mod error;
pub mod isometry;
pub mod jacobian;
pub mod measure;
pub mod model;
pub mod quadrature;
pub mod sampling;
pub mod simvol;
pub mod straighten;
