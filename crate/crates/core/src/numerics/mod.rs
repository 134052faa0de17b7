//! Special functions, small dense linear algebra, finite differences and
//! seeded sampling shared by the rest of the crate.

mod diff;
mod linalg;
mod normal;
mod rng;

pub use diff::{default_step_scale, numeric_jacobian, JacobianError};
pub use linalg::{solve_spd, spd_inverse, Cholesky, Matrix, Vector};
pub use normal::{
    inverse_mills, log_cdf_and_mills, std_normal_cdf, std_normal_log_cdf, std_normal_log_pdf, std_normal_pdf,
    std_normal_quantile,
};
pub use rng::{draw_bivariate_confounders, RngStream};
pub(crate) use rng::check_confounder_structure;
