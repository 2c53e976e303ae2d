pub mod circuit;
pub mod hhl;
pub mod nmr;
pub mod qcore;
pub mod reference;
pub mod tomography;
