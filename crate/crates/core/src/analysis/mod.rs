//! Analysis constants and Lyapunov diagnostics.

pub mod constants;
pub mod lyapunov;

pub use constants::{admissible_eps3, constants, kappa1, kappa2, Constants, ConstantsInput};
pub use lyapunov::{lyapunov, LyapunovSnapshot};
