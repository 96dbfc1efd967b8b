//! Executable checks of the perturbation lemmas and the rent-growth bound.

use serde::{Deserialize, Serialize};

use crate::assignment::{max_tie_matching, tie_weight};
use crate::error::{Error, Result};
use crate::model::{budget_sets, is_envy_free, is_maxmin, kinked_budget_sets, tie_graph, Allocation, Economy};
use crate::oracle::{brute_force, optimize_fixed, OracleObjective};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationPoint {
    pub delta: Rational,
    pub allocation: Option<Allocation>,
    pub rents_lower: bool,
    pub utilities_higher: bool,
    pub maxmin: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub matching: Vec<usize>,
    /// A rebate size below which no tie can form and no pair can cross its
    /// budget; `None` when nothing limits it.
    pub radius: Option<Rational>,
    pub points: Vec<PerturbationPoint>,
    pub violations: Vec<String>,
}

impl PerturbationReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Conservative stable radius around a maxmin allocation.
pub fn perturbation_radius(e: &Economy, z: &Allocation) -> Option<Rational> {
    let mut best: Option<Rational> = None;
    let mut take = |x: Rational| {
        if best.as_ref().is_none_or(|b| x < *b) {
            best = Some(x);
        }
    };
    for (i, a) in kinked_budget_sets(e, &z.rents).strict {
        take(&z.rents[a] - &e.pref(i).budget);
    }
    for i in 0..e.n() {
        let own = z.bundle_utility(e, i, i);
        let slope = Rational::one() + &e.pref(i).rho;
        for j in 0..e.n() {
            let gap = &own - &z.bundle_utility(e, i, j);
            if gap.is_positive() {
                take(gap / (Rational::from(2) * &slope));
            }
        }
    }
    best
}

/// The default grid: quarters of the radius, or 1..4 when unbounded.
pub fn default_delta_grid(radius: Option<&Rational>) -> Vec<Rational> {
    (1..=4)
        .map(|k| match radius {
            Some(r) => r * &Rational::new(k, 4),
            None => Rational::from(k),
        })
        .collect()
}

/// For each rebate `delta`, the best allocation at `m - delta` that keeps
/// the max-weight tie matching must lower every rent, raise every utility
/// and be maxmin.
pub fn check_h_maxmin_perturbation(e: &Economy, z: &Allocation, deltas: Option<&[Rational]>) -> Result<PerturbationReport> {
    z.validate_total(e)?;
    if !is_maxmin(e, z)?.holds {
        return Err(Error::Precondition("allocation is not maxmin".into()));
    }
    let mu = max_tie_matching(&tie_graph(e, z)?)?.assignment;
    let radius = perturbation_radius(e, z);
    let grid = match deltas {
        Some(d) => d.to_vec(),
        None => default_delta_grid(radius.as_ref()),
    };
    let base: Vec<Rational> = (0..e.n()).map(|i| z.bundle_utility(e, i, i)).collect();
    let mut points = Vec::new();
    let mut violations = Vec::new();
    for delta in grid {
        if delta.is_negative() {
            return Err(Error::Precondition("negative rebate".into()));
        }
        if delta.is_zero() {
            let same = Allocation::new(mu.clone(), z.rents.clone());
            let maxmin = is_maxmin(e, &same)?.holds;
            points.push(PerturbationPoint { delta, allocation: Some(same), rents_lower: true, utilities_higher: true, maxmin });
            continue;
        }
        let total = e.total_rent() - &delta;
        let shifted = e.with_total_rent(total.clone());
        let Some((_, rents)) = optimize_fixed(&shifted, &mu, &total, &OracleObjective::MaxminUtility)? else {
            violations.push(format!("delta {delta}: no envy-free allocation keeps the matching"));
            points.push(PerturbationPoint { delta, allocation: None, rents_lower: false, utilities_higher: false, maxmin: false });
            continue;
        };
        let out = Allocation::new(mu.clone(), rents);
        let rents_lower = out.rents.iter().zip(&z.rents).all(|(x, y)| x < y);
        let utilities_higher = (0..e.n()).all(|i| out.bundle_utility(e, i, i) > base[i]);
        let maxmin = is_maxmin(&shifted, &out)?.holds;
        for (ok, what) in [(rents_lower, "rents not all lower"), (utilities_higher, "utilities not all higher"), (maxmin, "not maxmin")] {
            if !ok {
                violations.push(format!("delta {delta}: {what}"));
            }
        }
        points.push(PerturbationPoint { delta, allocation: Some(out), rents_lower, utilities_higher, maxmin });
    }
    Ok(PerturbationReport { matching: mu, radius, points, violations })
}

/// Whether the shared assignment is a max-weight tie matching at `z`.
pub fn assignment_is_max_weight(e: &Economy, z: &Allocation) -> Result<bool> {
    let g = tie_graph(e, z)?;
    let best = max_tie_matching(&g)?.weight;
    Ok(tie_weight(&g, &z.assignment).is_some_and(|w| w == best))
}

/// Given envy-free `z` and a strictly cheaper envy-free `lower` with the same
/// assignment and the same weak budget set, the assignment must be a
/// max-weight tie matching at `z`.
pub fn check_converse_perturbation(e: &Economy, z: &Allocation, lower: &Allocation) -> Result<bool> {
    z.validate(e)?;
    lower.validate(e)?;
    if z.assignment != lower.assignment {
        return Err(Error::Precondition("assignments differ".into()));
    }
    if !is_envy_free(e, z)? || !is_envy_free(e, lower)? {
        return Err(Error::Precondition("both allocations must be envy-free".into()));
    }
    if !lower.rents.iter().zip(&z.rents).all(|(t, r)| t < r) {
        return Err(Error::Precondition("rents must be strictly lower".into()));
    }
    if budget_sets(e, &z.rents).weak != budget_sets(e, &lower.rents).weak {
        return Err(Error::Precondition("weak budget sets differ".into()));
    }
    assignment_is_max_weight(e, z)
}

pub fn theta(e: &Economy) -> Rational {
    let n = e.n();
    let base = Rational::one() + e.rho_bar();
    (Rational::from(n) * base.pow((n * n) as u32)).recip()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThetaCheck {
    pub room: usize,
    pub low_total: Rational,
    pub epsilon: Rational,
    pub gain: Rational,
    pub required: Rational,
    pub holds: bool,
}

/// The largest envy-free rent of `room` grows by at least `theta * eps`
/// when the total grows by `eps`.
pub fn check_theta_bound(e: &Economy, room: usize, l: &Rational, eps: &Rational) -> Result<ThetaCheck> {
    if e.n() > 4 {
        return Err(Error::TooLarge("rent-growth check supports at most 4 agents".into()));
    }
    if room >= e.n() || !eps.is_positive() {
        return Err(Error::Precondition("room out of range or non-positive increment".into()));
    }
    let obj = OracleObjective::MaxRoomRent(room);
    let low = brute_force(e, l, &obj)?.value;
    let high = brute_force(e, &(l + eps), &obj)?.value;
    let gain = high - low;
    let required = theta(e) * eps;
    Ok(ThetaCheck { room, low_total: l.clone(), epsilon: eps.clone(), holds: gain >= required, gain, required })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{e1, e2};
    use crate::rational::{q, qi};

    #[test]
    fn quasi_linear_perturbation() {
        let e = e1();
        let z = Allocation::new(vec![0, 1], vec![qi(65), qi(35)]);
        let rep = check_h_maxmin_perturbation(&e, &z, Some(&[qi(0), qi(1)])).unwrap();
        assert!(rep.holds());
        assert_eq!(rep.points[0].allocation.as_ref().unwrap(), &z);
        let one = rep.points[1].allocation.as_ref().unwrap();
        assert_eq!(one.rents, vec![q(129, 2), q(69, 2)]);
        assert_eq!(one.utilities(&e), vec![q(71, 2), q(71, 2)]);
        assert_eq!(rep.radius, Some(qi(5)));
    }

    #[test]
    fn budget_perturbation() {
        let e = e2();
        let z = Allocation::new(vec![0, 1], vec![q(190, 3), q(110, 3)]);
        assert_eq!(perturbation_radius(&e, &z), Some(q(5, 2)));
        let rep = check_h_maxmin_perturbation(&e, &z, Some(&[qi(3)])).unwrap();
        assert!(rep.holds(), "{:?}", rep.violations);
        assert_eq!(rep.points[0].allocation.as_ref().unwrap().rents, vec![q(187, 3), q(104, 3)]);
        assert!(check_h_maxmin_perturbation(&e, &z, None).unwrap().holds());
    }

    #[test]
    fn perturbation_needs_maxmin() {
        let z = Allocation::new(vec![0, 1], vec![qi(60), qi(40)]);
        assert!(matches!(check_h_maxmin_perturbation(&e1(), &z, None), Err(Error::Precondition(_))));
    }

    #[test]
    fn converse_preconditions() {
        let e = e2();
        let hi = Allocation::new(vec![0, 1], vec![qi(75), qi(60)]);
        let lo = Allocation::new(vec![0, 1], vec![q(190, 3), q(110, 3)]);
        assert!(matches!(check_converse_perturbation(&e.with_total_rent(qi(135)), &hi, &lo), Err(Error::Precondition(_))));
        let e = e1();
        let hi = Allocation::new(vec![0, 1], vec![qi(65), qi(35)]);
        let lo = Allocation::new(vec![0, 1], vec![q(129, 2), q(69, 2)]);
        assert!(check_converse_perturbation(&e, &hi, &lo).unwrap());
    }

    #[test]
    fn non_maximal_assignment_is_flagged() {
        // At rents (15, 10, 5) agent 1 holds b and is tied with a (slope 2
        // above its budget), agent 2 holds c and is tied with b, agent 3
        // holds a and is tied with c. Rotating gives weight 2 instead of 1.
        let e = Economy::from_parts(
            vec![vec![qi(30), qi(20), qi(0)], vec![qi(0), qi(25), qi(20)], vec![qi(30), qi(0), qi(20)]],
            vec![qi(10), qi(100), qi(100)],
            vec![qi(1), qi(0), qi(0)],
            qi(30),
        )
        .unwrap();
        let z = Allocation::new(vec![1, 2, 0], vec![qi(15), qi(10), qi(5)]);
        assert!(is_envy_free(&e, &z).unwrap());
        assert!(!assignment_is_max_weight(&e, &z).unwrap());
    }

    #[test]
    fn theta_examples() {
        let e = e1();
        assert_eq!(theta(&e), q(1, 2));
        let c = check_theta_bound(&e, 0, &qi(100), &qi(10)).unwrap();
        assert_eq!((c.gain.clone(), c.required.clone()), (qi(5), qi(5)));
        assert!(c.holds);
        assert_eq!(theta(&e2()), q(1, 32));
        for l in [90, 100, 120, 160] {
            for eps in [q(1, 2), qi(3), qi(40)] {
                assert!(check_theta_bound(&e2(), 0, &qi(l), &eps).unwrap().holds);
            }
        }
        let single = Economy::quasi_linear(vec![vec![qi(4)]], qi(0)).unwrap();
        let c = check_theta_bound(&single, 0, &qi(3), &qi(2)).unwrap();
        assert_eq!(c.gain, qi(2));
    }
}
