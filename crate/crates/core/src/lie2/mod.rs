//! Lie groups, actions, crossed modules and the 2-group action on holonomy words.

mod action;
mod crossed;
mod group;
mod holonomy;
mod star;

pub use action::{GroupAction, GENERATOR_FD_STEP, GENERATOR_FD_TOL};
pub use crossed::{semidirect_product, CrossedModule, Lie2Group, TwoElement};
pub use group::{u1, LieGroupModel, GROUP_AXIOM_SAMPLES, GROUP_AXIOM_TOL};
pub use holonomy::{
    compute_ideal, kernel_image_check, lifted_action, lifted_action_twisted, Ideal, WordAction, PHI_LSQ_TOL, PHI_STEP, word_action_check,
};
pub use star::{
    action_axiom_check, orbit_in_fiber_check, pullback_word_groupoid, same_action_check, star_pullback,
};
