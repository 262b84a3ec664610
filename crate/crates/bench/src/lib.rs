//! Fixtures shared by the benchmarks.

use holfol::scenario::Scenario;

pub fn scenario(name: &str) -> Scenario {
    Scenario::load(name).expect("built-in scenario")
}
