//! Symbolic scalar expressions, chart manifolds and vector fields.

mod expr;
mod field;
mod manifold;
pub mod parse;
pub mod poly;

pub use expr::{product, sum, Expr, ExprDisplay, Params};
pub use field::{
    fields_sampled_equal, lie_bracket, pushforward_field, sampled_equal, Pushforward, SmoothMap,
    VectorField, EQUALITY_SAMPLES, SAMPLE_TOL,
};
pub use manifold::{ChartManifold, CoordKind, Coordinate};
pub use parse::parse_expr;
