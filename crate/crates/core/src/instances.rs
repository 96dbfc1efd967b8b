//! Small named economies used throughout the documentation and tests.

use crate::model::Economy;
use crate::rational::qi;

/// Two quasi-linear agents: `v1 = (100, 60)`, `v2 = (80, 70)`, rent 100.
pub fn e1() -> Economy {
    Economy::quasi_linear(vec![vec![qi(100), qi(60)], vec![qi(80), qi(70)]], qi(100)).unwrap()
}

/// [`e1`] with agent 1 budget-constrained: `b1 = 60`, `rho1 = 1`.
pub fn e2() -> Economy {
    Economy::from_parts(
        vec![vec![qi(100), qi(60)], vec![qi(80), qi(70)]],
        vec![qi(60), qi(0)],
        vec![qi(1), qi(0)],
        qi(100),
    )
    .unwrap()
}

/// An agent indifferent between room a at 500 and room b at 300 under a
/// 400 budget with `rho = 1` (values `(600, 300)`), facing a quasi-linear
/// roommate, rent 600.
pub fn budget_story() -> Economy {
    Economy::from_parts(
        vec![vec![qi(500), qi(300)], vec![qi(600), qi(300)]],
        vec![qi(0), qi(400)],
        vec![qi(0), qi(1)],
        qi(600),
    )
    .unwrap()
}
