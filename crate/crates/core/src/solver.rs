//! Maxmin envy-free allocations and their affine variants.
//!
//! The search starts at a total rent where every relevant preference is in a
//! single linear regime, solves one LP there, and then walks the total toward
//! `m` through a sequence of rebate (or surcharge) LPs, each linearized at the
//! previous rents and restricted to the current budget regime.

use serde::{Deserialize, Serialize};

use crate::assignment::{max_sum_assignment, max_tie_matching, min_tie_matching, tie_weight};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, Expr, LinearProgram, LpSolution, Sense};
use crate::model::{
    check_selection, envy_witness, kinked_below_budget, kinked_budget_sets, linearize_dir, tie_graph_dir, Allocation,
    Direction, Economy, Linearization, Objective, ObjectiveKind, SelectionCertificate,
};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// The rebate LP already landed on a selection.
    Accepted,
    /// The rebate LP overshot and the correction LP was used.
    Corrected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub s: usize,
    pub assignment: Vec<usize>,
    /// Product of slopes of `assignment` in the tie graph at the previous rents.
    pub matching_weight: Rational,
    /// Kinked pairs on the far side of their budget at the previous rents.
    pub budget_pairs: usize,
    pub lp_value: Rational,
    pub t: Vec<Rational>,
    pub branch: Branch,
    pub rents: Vec<Rational>,
    pub total: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub objective: ObjectiveKind,
    pub direction: Direction,
    pub initial_total: Rational,
    pub initial: Allocation,
    pub initial_value: Rational,
    pub iterations: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub allocation: Allocation,
    pub trace: SolveTrace,
    pub certificate: SelectionCertificate,
}

/// Largest iteration count the counting argument allows.
pub fn iteration_bound(n: usize, k: usize) -> u128 {
    let n = n as u128;
    n * n + (n + 1).pow(k.saturating_sub(1) as u32) + 1
}

fn loop_guard(n: usize, k: usize) -> usize {
    let n = n as u128;
    let g = (n * n + 1) * ((n + 1).pow(k.saturating_sub(1) as u32) + 1) + 1;
    usize::try_from(g).unwrap_or(usize::MAX)
}

/// Checks that every non-final iteration made progress: the budget-pair count
/// fell, or it held and the matching weight moved strictly in the search
/// direction.
pub fn check_progress(trace: &SolveTrace) -> std::result::Result<(), String> {
    let it = &trace.iterations;
    for w in 1..it.len() {
        let (prev, cur) = (&it[w - 1], &it[w]);
        let better_weight = match trace.direction {
            Direction::Down => cur.matching_weight > prev.matching_weight,
            Direction::Up => cur.matching_weight < prev.matching_weight,
        };
        if cur.budget_pairs > prev.budget_pairs {
            return Err(format!("iteration {}: budget pairs rose from {} to {}", cur.s, prev.budget_pairs, cur.budget_pairs));
        }
        if cur.budget_pairs == prev.budget_pairs && !better_weight {
            return Err(format!("iteration {}: no progress (budget pairs {}, weight {} then {})", cur.s, cur.budget_pairs, prev.matching_weight, cur.matching_weight));
        }
    }
    Ok(())
}

fn room_vars(lp: &mut LinearProgram, e: &Economy, prefix: &str) -> Vec<usize> {
    e.rooms().iter().map(|id| lp.add_var(format!("{prefix}_{id}"))).collect()
}

fn sum_expr(vars: &[usize]) -> Expr {
    vars.iter().map(|&v| (v, Rational::one())).collect()
}

fn sense_for(kind: ObjectiveKind) -> Sense {
    if kind.maximizes_minimum() {
        Sense::Maximize
    } else {
        Sense::Minimize
    }
}

/// Affine scores `c0 + c1 * x_room` whose min (or max) the objective ranks.
fn score_forms(obj: &Objective, lin: &Linearization, sigma: &[usize]) -> Vec<(usize, Rational, Rational)> {
    if obj.kind.is_rent_based() {
        obj.transform.iter().enumerate().map(|(a, (alpha, beta))| (a, alpha.clone(), beta.clone())).collect()
    } else {
        sigma.iter().enumerate().map(|(i, &a)| (a, lin.nu[i][a].clone(), -&lin.lambda[i][a])).collect()
    }
}

/// Bounds every score by `level`: a variable (`Ok`) or a constant (`Err`).
fn add_level_rows(
    lp: &mut LinearProgram,
    obj: &Objective,
    lin: &Linearization,
    sigma: &[usize],
    vars: &[usize],
    level: std::result::Result<usize, &Rational>,
) {
    let below = obj.kind.maximizes_minimum();
    for (a, c0, c1) in score_forms(obj, lin, sigma) {
        match level {
            Ok(rv) => {
                // R <= c0 + c1 x  <=>  R - c1 x <= c0
                let expr = vec![(rv, Rational::one()), (vars[a], -&c1)];
                if below {
                    lp.le(expr, c0);
                } else {
                    lp.ge(expr, c0);
                }
            }
            Err(l) => {
                let expr = vec![(vars[a], c1)];
                if below {
                    lp.ge(expr, l - &c0);
                } else {
                    lp.le(expr, l - &c0);
                }
            }
        }
    }
}

fn add_envy_rows(lp: &mut LinearProgram, lin: &Linearization, sigma: &[usize], vars: &[usize]) {
    for (i, &a) in sigma.iter().enumerate() {
        for &c in sigma.iter().filter(|&&c| c != a) {
            // nu_ia - l_ia x_a >= nu_ic - l_ic x_c
            lp.ge(
                vec![(vars[a], -&lin.lambda[i][a]), (vars[c], lin.lambda[i][c].clone())],
                &lin.nu[i][c] - &lin.nu[i][a],
            );
        }
    }
}

fn optimal(lp: &LinearProgram, what: &str) -> Result<(Vec<Rational>, Rational)> {
    match solve_lp(lp)? {
        LpSolution::Optimal { point, value } => Ok((point, value)),
        LpSolution::Infeasible => Err(Error::Internal(format!("{what} infeasible"))),
        LpSolution::Unbounded => Err(Error::Internal(format!("{what} unbounded"))),
    }
}

fn require_envy_free(e: &Economy, z: &Allocation, what: &str) -> Result<()> {
    match envy_witness(e, z)? {
        None => Ok(()),
        Some(w) => Err(Error::Internal(format!("{what}: agent {} envies agent {} by {}", w.agent, w.envied, w.gap))),
    }
}

/// Linearization valid on the regime the starting LP works in: everything
/// above budget when descending, everything below when ascending.
fn regime_linearization(e: &Economy, dir: Direction) -> Linearization {
    let n = e.n();
    let mut nu = vec![Vec::with_capacity(n); n];
    let mut lambda = vec![Vec::with_capacity(n); n];
    for (i, p) in e.prefs().iter().enumerate() {
        for a in 0..n {
            if dir == Direction::Down && p.is_kinked() {
                nu[i].push(&p.values[a] + &p.rho * &p.budget);
                lambda[i].push(Rational::one() + &p.rho);
            } else {
                nu[i].push(p.values[a].clone());
                lambda[i].push(Rational::one());
            }
        }
    }
    Linearization { nu, lambda }
}

/// Total rent at which the search starts.
pub fn starting_total(e: &Economy, dir: Direction) -> Rational {
    let m = e.total_rent().clone();
    let n = Rational::from(e.n());
    let kinked: Vec<&Rational> = e.prefs().iter().filter(|p| p.is_kinked()).map(|p| &p.budget).collect();
    match dir {
        Direction::Down => {
            let n_i = e.n();
            let mut spread = Rational::zero();
            let mut v = Vec::with_capacity(n_i);
            for p in e.prefs() {
                let scale = Rational::one() + &p.rho;
                v.push(p.values.iter().map(|x| (x + &p.rho * &p.budget) / &scale).collect::<Vec<_>>());
            }
            for row in &v {
                let hi = row.iter().max().unwrap();
                let lo = row.iter().min().unwrap();
                spread = spread.max(hi - lo);
            }
            let max_b = e.prefs().iter().map(|p| p.budget.clone()).max().unwrap();
            m.max(n * (spread + max_b))
        }
        Direction::Up => match kinked.into_iter().min() {
            None => m,
            Some(min_b) => m.min(n * (min_b - &e.value_spread())),
        },
    }
}

/// Selection at the starting total, where all preferences are quasi-linear
/// up to a positive rescaling.
fn initialize(e: &Economy, obj: &Objective) -> Result<(Rational, Allocation, Rational)> {
    let dir = obj.kind.direction();
    let total = starting_total(e, dir);
    let lin = regime_linearization(e, dir);
    let scaled: Vec<Vec<Rational>> = (0..e.n())
        .map(|i| (0..e.n()).map(|a| &lin.nu[i][a] / &lin.lambda[i][a]).collect())
        .collect();
    let sigma = max_sum_assignment(&scaled)?.assignment;
    let mut lp = LinearProgram::new(sense_for(obj.kind));
    let vars = room_vars(&mut lp, e, "r");
    let level = lp.add_var("R");
    lp.set_objective(vec![(level, Rational::one())]);
    add_level_rows(&mut lp, obj, &lin, &sigma, &vars, Ok(level));
    add_envy_rows(&mut lp, &lin, &sigma, &vars);
    lp.equal(sum_expr(&vars), total.clone());
    let (point, value) = optimal(&lp, "initial LP")?;
    let z = Allocation::new(sigma, point[..e.n()].to_vec());
    require_envy_free(e, &z, "initial allocation")?;
    Ok((total, z, value))
}

/// Initial allocation of the maxmin search: `(M, z)`.
pub fn algorithm1(e: &Economy) -> Result<(Rational, Allocation)> {
    let (m, z, _) = initialize(e, &Objective::maxmin_utility())?;
    Ok((m, z))
}

/// One step of the walk toward `m`.
fn step(e: &Economy, obj: &Objective, s: usize, prev: &Allocation) -> Result<IterationRecord> {
    let dir = obj.kind.direction();
    let n = e.n();
    let m = e.total_rent();
    let r = &prev.rents;
    let lin = linearize_dir(e, r, dir);
    let graph = tie_graph_dir(e, prev, dir)?;
    let matching = match dir {
        Direction::Down => max_tie_matching(&graph)?,
        Direction::Up => min_tie_matching(&graph)?,
    };
    let sigma = matching.assignment;
    let regime: Vec<(usize, usize)> = match dir {
        Direction::Down => kinked_budget_sets(e, r).strict.into_iter().collect(),
        Direction::Up => kinked_below_budget(e, r).into_iter().collect(),
    };

    let mut lp = LinearProgram::new(sense_for(obj.kind));
    let t = room_vars(&mut lp, e, "t");
    let level = lp.add_var("R");
    lp.set_objective(vec![(level, Rational::one())]);
    for a in 0..n {
        match dir {
            Direction::Down => lp.le(vec![(t[a], Rational::one())], r[a].clone()),
            Direction::Up => lp.ge(vec![(t[a], Rational::one())], r[a].clone()),
        }
    }
    add_level_rows(&mut lp, obj, &lin, &sigma, &t, Ok(level));
    add_envy_rows(&mut lp, &lin, &sigma, &t);
    for &(i, a) in &regime {
        let b = e.pref(i).budget.clone();
        match dir {
            Direction::Down => lp.ge(vec![(t[a], Rational::one())], b),
            Direction::Up => lp.le(vec![(t[a], Rational::one())], b),
        }
    }
    match dir {
        Direction::Down => {
            lp.ge(sum_expr(&t), m.clone());
            lp.set_secondary(Sense::Minimize, sum_expr(&t));
        }
        Direction::Up => {
            lp.le(sum_expr(&t), m.clone());
            lp.set_secondary(Sense::Maximize, sum_expr(&t));
        }
    }
    let (point, lp_value) = optimal(&lp, "rebate LP")?;
    let t_val = point[..n].to_vec();
    let candidate = Allocation::new(sigma.clone(), t_val.clone());
    require_envy_free(e, &candidate, "rebate LP")?;

    let (rents, branch) = if check_selection(e, &candidate, obj)?.holds {
        (t_val.clone(), Branch::Accepted)
    } else {
        let sense = match dir {
            Direction::Down => Sense::Maximize,
            Direction::Up => Sense::Minimize,
        };
        let mut lp = LinearProgram::new(sense);
        let x = room_vars(&mut lp, e, "r");
        lp.set_objective(sum_expr(&x));
        for a in 0..n {
            let (near, far) = (t_val[a].clone(), r[a].clone());
            match dir {
                Direction::Down => {
                    lp.ge(vec![(x[a], Rational::one())], near);
                    lp.le(vec![(x[a], Rational::one())], far);
                }
                Direction::Up => {
                    lp.le(vec![(x[a], Rational::one())], near);
                    lp.ge(vec![(x[a], Rational::one())], far);
                }
            }
        }
        add_level_rows(&mut lp, obj, &lin, &sigma, &x, Err(&lp_value));
        add_envy_rows(&mut lp, &lin, &sigma, &x);
        let (point, _) = optimal(&lp, "correction LP")?;
        (point, Branch::Corrected)
    };
    let z = Allocation::new(sigma.clone(), rents.clone());
    require_envy_free(e, &z, "iteration output")?;
    let matching_weight = tie_weight(&graph, &sigma).expect("matching uses tie edges");
    Ok(IterationRecord {
        s,
        assignment: sigma,
        matching_weight,
        budget_pairs: regime.len(),
        lp_value,
        t: t_val,
        branch,
        total: z.total(),
        rents,
    })
}

fn walk(e: &Economy, obj: &Objective, total: Rational, z0: Allocation, value: Rational) -> Result<(Allocation, SolveTrace)> {
    let dir = obj.kind.direction();
    let m = e.total_rent().clone();
    let mut trace = SolveTrace {
        objective: obj.kind,
        direction: dir,
        initial_total: total,
        initial: z0.clone(),
        initial_value: value,
        iterations: Vec::new(),
    };
    let guard = loop_guard(e.n(), e.rho_menu().len());
    let mut z = z0;
    loop {
        let remaining = match dir {
            Direction::Down => z.total() > m,
            Direction::Up => z.total() < m,
        };
        if !remaining {
            break;
        }
        if trace.iterations.len() >= guard {
            return Err(Error::Internal(format!("no convergence after {guard} iterations")));
        }
        let rec = step(e, obj, trace.iterations.len() + 1, &z)?;
        z = Allocation::new(rec.assignment.clone(), rec.rents.clone());
        trace.iterations.push(rec);
    }
    Ok((z, trace))
}

/// Walks a maxmin allocation at total `big_m >= m` down to `m`.
pub fn algorithm2(e: &Economy, big_m: Rational, z0: Allocation) -> Result<(Allocation, SolveTrace)> {
    if big_m < *e.total_rent() || z0.total() != big_m {
        return Err(Error::Precondition("starting allocation must collect the starting total, at least m".into()));
    }
    let obj = Objective::maxmin_utility();
    let value = obj.value(e, &z0);
    walk(e, &obj, big_m, z0, value)
}

pub fn solve(e: &Economy, obj: &Objective) -> Result<Solution> {
    obj.validate(e)?;
    let (total, z0, value) = initialize(e, obj)?;
    let (allocation, trace) = walk(e, obj, total, z0, value)?;
    allocation.validate_total(e)?;
    let certificate = check_selection(e, &allocation, obj)?;
    if !certificate.holds {
        return Err(Error::Internal(format!("output failed its certificate at agent {:?}", certificate.failing_agent)));
    }
    Ok(Solution { allocation, trace, certificate })
}

/// Whether some envy-free allocation charges every room a non-negative rent;
/// the witness maximizes the smallest rent.
pub fn has_noncompensation_ef(e: &Economy) -> Result<(bool, Allocation)> {
    let sol = solve(e, &Objective::maxmin_rent(e.n()))?;
    let ok = sol.allocation.rents.iter().all(|r| !r.is_negative());
    Ok((ok, sol.allocation))
}

/// Rebates up to `eta` from an envy-free allocation, keeping no-envy and
/// never pushing a rent that is above some budget below it.
pub fn eq1_descent_step(e: &Economy, z: &Allocation, eta: &Rational) -> Result<Allocation> {
    z.validate(e)?;
    if eta.is_negative() {
        return Err(Error::Precondition("rebate must be non-negative".into()));
    }
    let graph = tie_graph_dir(e, z, Direction::Down)?;
    if eta.is_zero() {
        return Ok(z.clone());
    }
    let mu = max_tie_matching(&graph)?.assignment;
    let r = &z.rents;
    let lin = linearize_dir(e, r, Direction::Down);
    let mut lp = LinearProgram::new(Sense::Minimize);
    let t = room_vars(&mut lp, e, "t");
    lp.set_objective(sum_expr(&t));
    for a in 0..e.n() {
        lp.le(vec![(t[a], Rational::one())], r[a].clone());
    }
    add_envy_rows(&mut lp, &lin, &mu, &t);
    for (i, a) in kinked_budget_sets(e, r).strict {
        lp.ge(vec![(t[a], Rational::one())], e.pref(i).budget.clone());
    }
    lp.ge(sum_expr(&t), z.total() - eta);
    let (point, _) = optimal(&lp, "rebate step")?;
    let out = Allocation::new(mu, point);
    require_envy_free(e, &out, "rebate step")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{e1, e2};
    use crate::model::is_maxmin;
    use crate::rational::{q, qi};

    #[test]
    fn initial_lp_on_budget_example() {
        let (m, z) = algorithm1(&e2()).unwrap();
        assert_eq!(m, qi(160));
        assert_eq!(z, Allocation::new(vec![0, 1], vec![qi(85), qi(75)]));
    }

    #[test]
    fn budget_example_trace() {
        let sol = solve(&e2(), &Objective::maxmin_utility()).unwrap();
        let tr = &sol.trace;
        assert_eq!(tr.initial_value, qi(-10));
        assert_eq!(tr.iterations.len(), 2);
        let first = &tr.iterations[0];
        assert_eq!(first.t, vec![qi(70), qi(60)]);
        assert_eq!(first.lp_value, qi(10));
        assert_eq!(first.branch, Branch::Corrected);
        assert_eq!(first.rents, vec![qi(75), qi(60)]);
        assert_eq!(first.budget_pairs, 2);
        assert_eq!(first.matching_weight, qi(2));
        let second = &tr.iterations[1];
        assert_eq!(second.rents, vec![q(190, 3), q(110, 3)]);
        assert_eq!(second.branch, Branch::Accepted);
        assert_eq!(second.budget_pairs, 1);
        assert_eq!(sol.allocation.utilities(&e2()), vec![q(100, 3), q(100, 3)]);
        check_progress(tr).unwrap();
    }

    #[test]
    fn quasi_linear_example() {
        let sol = solve(&e1(), &Objective::maxmin_utility()).unwrap();
        assert_eq!(sol.allocation.rents, vec![qi(65), qi(35)]);
        assert!(sol.trace.iterations.is_empty());
    }

    #[test]
    fn starting_at_m_is_a_fixed_point() {
        let e = e2();
        let (_, z) = algorithm1(&e).unwrap();
        let e160 = e.with_total_rent(qi(160));
        let (out, tr) = algorithm2(&e160, qi(160), z.clone()).unwrap();
        assert_eq!(out, z);
        assert!(tr.iterations.is_empty());
    }

    #[test]
    fn single_agent() {
        let e = Economy::from_parts(vec![vec![qi(10)]], vec![qi(3)], vec![qi(1)], qi(7)).unwrap();
        for obj in [Objective::maxmin_utility(), Objective::minmax_utility(), Objective::maxmin_rent(1), Objective::minmax_rent(1)] {
            assert_eq!(solve(&e, &obj).unwrap().allocation.rents, vec![qi(7)]);
        }
    }

    #[test]
    fn rent_variants_on_quasi_linear_example() {
        let sol = solve(&e1(), &Objective::maxmin_rent(2)).unwrap();
        assert_eq!(sol.allocation.rents, vec![qi(55), qi(45)]);
        let sol = solve(&e1(), &Objective::minmax_rent(2)).unwrap();
        assert_eq!(sol.allocation.rents, vec![qi(55), qi(45)]);
    }

    #[test]
    fn noncompensation() {
        let (ok, w) = has_noncompensation_ef(&e1()).unwrap();
        assert!(ok);
        assert_eq!(w.rents, vec![qi(55), qi(45)]);
        let (ok, _) = has_noncompensation_ef(&e1().with_total_rent(qi(-1000))).unwrap();
        assert!(!ok);
    }

    #[test]
    fn rebate_step() {
        let e = e2().with_total_rent(qi(160));
        let z = Allocation::new(vec![0, 1], vec![qi(85), qi(75)]);
        let out = eq1_descent_step(&e, &z, &qi(30)).unwrap();
        assert_eq!(out.rents, vec![qi(70), qi(60)]);
        assert_eq!(eq1_descent_step(&e, &z, &qi(0)).unwrap(), z);
        let out = eq1_descent_step(&e1(), &Allocation::new(vec![0, 1], vec![qi(65), qi(35)]), &qi(1000)).unwrap();
        assert_eq!(out.total(), qi(-900));
    }

    #[test]
    fn output_is_certified() {
        let sol = solve(&e2(), &Objective::maxmin_utility()).unwrap();
        assert!(is_maxmin(&e2(), &sol.allocation).unwrap().holds);
    }
}
