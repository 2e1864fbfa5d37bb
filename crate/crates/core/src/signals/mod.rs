//! Real controls on [0, T]: iterated primitives, weak norms, concatenation and the
//! oscillating families used for cubic recovery.

mod control;
mod families;
mod norms;
mod profile;
mod scaling;
mod term;

pub use control::{ControlSignal, Piece, Provenance, Segment, CELLS_PER_UNIT, CELL_ORDER, MAX_PRIMITIVE};
pub use families::{
    oscillating_control_pde, oscillating_control_sussmann, oscillating_control_toy, Normalization,
    OscillatingFamily,
};
pub use profile::{base_cubic_moment, base_deriv, base_square_moment, base_sussmann_moment, base_term, BumpProfile};
pub use scaling::{loglog_fit, measure, scaling_law_fit, NormSpec, SlopeFit};
pub use term::{Term, Trig};
