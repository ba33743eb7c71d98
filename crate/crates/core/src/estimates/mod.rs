//! Numerical checks of the a-priori estimates along the continuity path.
//!
//! Every checker returns a [`CheckRecord`] whose `worst_margin` is
//! nonnegative exactly when the estimate holds. A check whose hypothesis is
//! not available is reported as a skip, with the measured data attached.
//! The `*_from_parts` functions take the raw quantities and are what the
//! detector tests drive.

mod integral;
mod lemmas;
mod pointwise;
mod record;
mod suite;

pub use integral::*;
pub use lemmas::*;
pub use pointwise::{
    check_max_u, check_newton_maclaurin, check_s_upper_negative, check_s_upper_nonpositive,
    check_sandwich_and_inf_u, check_schwarz, max_u_from_parts, newton_maclaurin_from_parts,
    s_upper_negative_from_parts, s_upper_nonpositive_from_parts, sandwich_from_parts,
    schwarz_from_parts, schwarz_hypothesis,
};
pub use record::*;
pub use suite::*;
