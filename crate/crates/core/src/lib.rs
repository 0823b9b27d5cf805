pub mod barriers;
pub mod counterexample;
pub mod error;
pub mod gauss;
pub mod kernels;
pub mod powerlog;
pub mod pv_quadrature;
pub mod regularity;
pub mod solver1d;
pub mod util;
