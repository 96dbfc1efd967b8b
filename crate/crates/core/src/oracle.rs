//! Independent brute-force optimizer over the envy-free set.
//!
//! Every assignment is tried. For a fixed assignment the envy-free set is a
//! union of polytopes, one per budget regime of each (agent, room) pair. The
//! regimes are explored by branch and bound: a room's rent interval is split
//! at an agent's budget only when the LP relaxation (chords of the concave
//! utility pieces on the "envied" side) returns a point that is not truly
//! envy-free. Everything is exact.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, Expr, LinearProgram, LpSolution, Sense};
use crate::model::{Allocation, Economy, Objective, ObjectiveKind, Preference};
use crate::rational::Rational;

pub const MAX_ORACLE_AGENTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleObjective {
    MaxminUtility,
    MinmaxUtility,
    MaxminRent(Vec<(Rational, Rational)>),
    MinmaxRent(Vec<(Rational, Rational)>),
    /// Largest possible rent of one room.
    MaxRoomRent(usize),
    /// Smallest sup-norm distance to the given rent vector.
    NearestTo(Vec<Rational>),
}

impl OracleObjective {
    pub fn from_objective(obj: &Objective) -> Self {
        match obj.kind {
            ObjectiveKind::MaxminUtility => OracleObjective::MaxminUtility,
            ObjectiveKind::MinmaxUtility => OracleObjective::MinmaxUtility,
            ObjectiveKind::MaxminTransformedRent => OracleObjective::MaxminRent(obj.transform.clone()),
            ObjectiveKind::MinmaxTransformedRent => OracleObjective::MinmaxRent(obj.transform.clone()),
        }
    }

    pub fn maximizes(&self) -> bool {
        matches!(self, OracleObjective::MaxminUtility | OracleObjective::MaxminRent(_) | OracleObjective::MaxRoomRent(_))
    }

    /// True objective value of rents `r` under assignment `sigma`.
    pub fn evaluate(&self, e: &Economy, sigma: &[usize], r: &[Rational]) -> Rational {
        let own = || sigma.iter().enumerate().map(|(i, &a)| e.pref(i).utility(a, &r[a]));
        let affine = |t: &[(Rational, Rational)]| -> Vec<Rational> {
            t.iter().zip(r).map(|((alpha, beta), x)| alpha + beta * x).collect()
        };
        match self {
            OracleObjective::MaxminUtility => own().min().unwrap(),
            OracleObjective::MinmaxUtility => own().max().unwrap(),
            OracleObjective::MaxminRent(t) => affine(t).into_iter().min().unwrap(),
            OracleObjective::MinmaxRent(t) => affine(t).into_iter().max().unwrap(),
            OracleObjective::MaxRoomRent(a) => r[*a].clone(),
            OracleObjective::NearestTo(target) => r.iter().zip(target).map(|(x, y)| (x - y).abs()).max().unwrap(),
        }
    }

    fn score(&self, value: &Rational) -> Rational {
        if self.maximizes() {
            value.clone()
        } else {
            -value
        }
    }

    fn unscore(&self, score: &Rational) -> Rational {
        self.score(score)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignmentOutcome {
    Infeasible,
    Optimal { value: Rational, rents: Vec<Rational> },
    /// Not solved to optimality because it cannot beat the incumbent; the
    /// optimum is no better than `bound`.
    Dominated { bound: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentEntry {
    pub assignment: Vec<usize>,
    pub outcome: AssignmentOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    pub optimum: Allocation,
    pub value: Rational,
    pub table: Vec<AssignmentEntry>,
}

/// `c0 + c1 * r`.
#[derive(Clone)]
struct Affine(Rational, Rational);

fn below_piece(p: &Preference, a: usize) -> Affine {
    Affine(p.values[a].clone(), -Rational::one())
}

fn above_piece(p: &Preference, a: usize) -> Affine {
    Affine(&p.values[a] + &p.rho * &p.budget, -(Rational::one() + &p.rho))
}

fn kink_inside(p: &Preference, lo: &Rational, hi: &Rational) -> bool {
    p.is_kinked() && *lo < p.budget && p.budget < *hi
}

/// Affine pieces whose minimum equals the utility on `[lo, hi]`.
fn exact_pieces(p: &Preference, a: usize, lo: &Rational, hi: &Rational) -> Vec<Affine> {
    if !p.is_kinked() || *hi <= p.budget {
        vec![below_piece(p, a)]
    } else if *lo >= p.budget {
        vec![above_piece(p, a)]
    } else {
        vec![below_piece(p, a), above_piece(p, a)]
    }
}

/// An affine minorant of the utility on `[lo, hi]`, exact unless the kink
/// lies strictly inside.
fn minorant(p: &Preference, a: usize, lo: &Rational, hi: &Rational) -> Affine {
    if !kink_inside(p, lo, hi) {
        return exact_pieces(p, a, lo, hi).pop().unwrap();
    }
    let ulo = p.utility(a, lo);
    let uhi = p.utility(a, hi);
    let slope = (&uhi - &ulo) / (hi - lo);
    Affine(&ulo - &slope * lo, slope)
}

struct Node {
    lo: Vec<Rational>,
    hi: Vec<Rational>,
}

fn push_ge(lp: &mut LinearProgram, left: (&Affine, usize), right: (&Affine, usize)) {
    // left.0 + left.1 * r_l >= right.0 + right.1 * r_r
    let (la, lv) = left;
    let (ra, rv) = right;
    let mut expr: Expr = Vec::new();
    if lv == rv {
        let c = &la.1 - &ra.1;
        if !c.is_zero() {
            expr.push((lv, c));
        }
    } else {
        expr.push((lv, la.1.clone()));
        expr.push((rv, -&ra.1));
    }
    lp.ge(expr, &ra.0 - &la.0);
}

fn node_program(e: &Economy, sigma: &[usize], total: &Rational, obj: &OracleObjective, node: &Node) -> LinearProgram {
    let n = e.n();
    let mut lp = LinearProgram::new(Sense::Maximize);
    let r: Vec<usize> = (0..n).map(|a| lp.add_var(format!("r{a}"))).collect();
    lp.equal(r.iter().map(|&v| (v, Rational::one())).collect(), total.clone());
    for a in 0..n {
        lp.ge(vec![(r[a], Rational::one())], node.lo[a].clone());
        lp.le(vec![(r[a], Rational::one())], node.hi[a].clone());
    }
    for (i, &a) in sigma.iter().enumerate() {
        let p = e.pref(i);
        let own = exact_pieces(p, a, &node.lo[a], &node.hi[a]);
        for &c in sigma.iter().filter(|&&c| c != a) {
            let other = minorant(p, c, &node.lo[c], &node.hi[c]);
            for piece in &own {
                push_ge(&mut lp, (piece, r[a]), (&other, r[c]));
            }
        }
    }
    let one = Rational::one();
    match obj {
        OracleObjective::MaxminUtility => {
            let x = lp.add_var("x");
            lp.set_objective(vec![(x, one.clone())]);
            for (i, &a) in sigma.iter().enumerate() {
                for piece in exact_pieces(e.pref(i), a, &node.lo[a], &node.hi[a]) {
                    // piece(r_a) - x >= 0
                    lp.ge(vec![(r[a], piece.1.clone()), (x, -&one)], -&piece.0);
                }
            }
        }
        OracleObjective::MinmaxUtility => {
            let y = lp.add_var("y");
            lp.set_objective(vec![(y, -&one)]);
            for (i, &a) in sigma.iter().enumerate() {
                let m = minorant(e.pref(i), a, &node.lo[a], &node.hi[a]);
                lp.ge(vec![(y, one.clone()), (r[a], -&m.1)], m.0.clone());
            }
        }
        OracleObjective::MaxminRent(t) => {
            let x = lp.add_var("x");
            lp.set_objective(vec![(x, one.clone())]);
            for (a, (alpha, beta)) in t.iter().enumerate() {
                lp.ge(vec![(r[a], beta.clone()), (x, -&one)], -alpha);
            }
        }
        OracleObjective::MinmaxRent(t) => {
            let y = lp.add_var("y");
            lp.set_objective(vec![(y, -&one)]);
            for (a, (alpha, beta)) in t.iter().enumerate() {
                lp.ge(vec![(y, one.clone()), (r[a], -beta)], alpha.clone());
            }
        }
        OracleObjective::MaxRoomRent(a) => {
            lp.set_objective(vec![(r[*a], one.clone())]);
        }
        OracleObjective::NearestTo(target) => {
            let d = lp.add_var("d");
            lp.set_objective(vec![(d, -&one)]);
            for a in 0..n {
                lp.ge(vec![(d, one.clone()), (r[a], -&one)], -&target[a]);
                lp.ge(vec![(d, one.clone()), (r[a], one.clone())], target[a].clone());
            }
        }
    }
    lp
}

/// First (agent, room) whose relaxation is not exact at `rents`, if any.
fn first_violation(
    e: &Economy,
    sigma: &[usize],
    obj: &OracleObjective,
    rents: &[Rational],
    relaxed_score: &Rational,
) -> Option<(usize, usize)> {
    for (i, &a) in sigma.iter().enumerate() {
        let own = e.pref(i).utility(a, &rents[a]);
        for &c in sigma {
            if c != a && e.pref(i).utility(c, &rents[c]) > own {
                return Some((i, c));
            }
        }
    }
    if let OracleObjective::MinmaxUtility = obj {
        let level = -relaxed_score;
        for (i, &a) in sigma.iter().enumerate() {
            if e.pref(i).utility(a, &rents[a]) > level {
                return Some((i, a));
            }
        }
    }
    None
}

struct Search {
    best: Option<(Rational, Vec<Rational>)>,
    pruned_bound: Option<Rational>,
    lps: usize,
}

fn root_node(e: &Economy, total: &Rational) -> Node {
    let (lo, hi) = e.ef_rent_bounds(total);
    Node { lo: vec![lo; e.n()], hi: vec![hi; e.n()] }
}

fn relax(e: &Economy, sigma: &[usize], total: &Rational, obj: &OracleObjective, node: &Node) -> Result<Option<(Vec<Rational>, Rational)>> {
    let lp = node_program(e, sigma, total, obj, node);
    match solve_lp(&lp)? {
        LpSolution::Optimal { point, value } => Ok(Some((point[..e.n()].to_vec(), value))),
        LpSolution::Infeasible => Ok(None),
        LpSolution::Unbounded => Err(Error::Internal("oracle relaxation unbounded".into())),
    }
}

/// Branch and bound for one assignment. Nodes whose relaxation is strictly
/// below `threshold` (in score units) are cut.
fn search_assignment(
    e: &Economy,
    sigma: &[usize],
    total: &Rational,
    obj: &OracleObjective,
    threshold: Option<&Rational>,
) -> Result<Search> {
    let mut s = Search { best: None, pruned_bound: None, lps: 0 };
    let mut stack = vec![root_node(e, total)];
    while let Some(node) = stack.pop() {
        s.lps += 1;
        let Some((rents, score)) = relax(e, sigma, total, obj, &node)? else { continue };
        if let Some((b, _)) = &s.best {
            if score <= *b {
                continue;
            }
        }
        if let Some(t) = threshold {
            if score < *t {
                if s.pruned_bound.as_ref().is_none_or(|p| score > *p) {
                    s.pruned_bound = Some(score);
                }
                continue;
            }
        }
        match first_violation(e, sigma, obj, &rents, &score) {
            None => {
                let exact = obj.score(&obj.evaluate(e, sigma, &rents));
                if exact != score {
                    return Err(Error::Internal("oracle relaxation exact but value differs".into()));
                }
                s.best = Some((score, rents));
            }
            Some((i, room)) => {
                let b = e.pref(i).budget.clone();
                if !(node.lo[room] < b && b < node.hi[room]) {
                    return Err(Error::Internal("oracle violation on an exact constraint".into()));
                }
                let mut upper = Node { lo: node.lo.clone(), hi: node.hi.clone() };
                upper.lo[room] = b.clone();
                let mut lower = node;
                lower.hi[room] = b;
                stack.push(upper);
                stack.push(lower);
            }
        }
    }
    Ok(s)
}

fn outcome(obj: &OracleObjective, s: Search, threshold: Option<&Rational>) -> AssignmentOutcome {
    match (&s.best, &s.pruned_bound) {
        (Some((score, rents)), None) => AssignmentOutcome::Optimal { value: obj.unscore(score), rents: rents.clone() },
        (Some((score, rents)), Some(_)) if threshold.is_none_or(|t| score >= t) => {
            AssignmentOutcome::Optimal { value: obj.unscore(score), rents: rents.clone() }
        }
        (None, None) => AssignmentOutcome::Infeasible,
        (best, Some(p)) => {
            let bound = best.as_ref().map_or(p.clone(), |(b, _)| b.clone().max(p.clone()));
            AssignmentOutcome::Dominated { bound: obj.unscore(&bound) }
        }
    }
}

/// Exact optimum over envy-free allocations with a fixed assignment.
pub fn optimize_fixed(
    e: &Economy,
    sigma: &[usize],
    total: &Rational,
    obj: &OracleObjective,
) -> Result<Option<(Rational, Vec<Rational>)>> {
    check_objective(e, obj)?;
    let s = search_assignment(e, sigma, total, obj, None)?;
    Ok(s.best.map(|(score, rents)| (obj.unscore(&score), rents)))
}

fn check_objective(e: &Economy, obj: &OracleObjective) -> Result<()> {
    let n = e.n();
    let ok = match obj {
        OracleObjective::MaxminRent(t) | OracleObjective::MinmaxRent(t) => {
            t.len() == n && t.iter().all(|(_, b)| b.is_positive())
        }
        OracleObjective::MaxRoomRent(a) => *a < n,
        OracleObjective::NearestTo(t) => t.len() == n,
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition("objective does not match the economy".into()))
    }
}

/// Exact optimum of `obj` over all envy-free allocations at rent `total`.
pub fn brute_force(e: &Economy, total: &Rational, obj: &OracleObjective) -> Result<OracleResult> {
    let n = e.n();
    if n > MAX_ORACLE_AGENTS {
        return Err(Error::TooLarge(format!("oracle supports at most {MAX_ORACLE_AGENTS} agents, got {n}")));
    }
    check_objective(e, obj)?;
    let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let roots: Vec<Option<Rational>> = perms
        .par_iter()
        .map(|sigma| Ok(relax(e, sigma, total, obj, &root_node(e, total))?.map(|(_, s)| s)))
        .collect::<Result<_>>()?;

    // Solve the most promising assignments first, sequentially, until one
    // is feasible; its value becomes a fixed cut for the rest.
    let mut order: Vec<usize> = (0..perms.len()).filter(|&k| roots[k].is_some()).collect();
    order.sort_by(|&x, &y| roots[y].cmp(&roots[x]).then(x.cmp(&y)));
    let mut outcomes: Vec<Option<AssignmentOutcome>> = vec![None; perms.len()];
    for k in 0..perms.len() {
        if roots[k].is_none() {
            outcomes[k] = Some(AssignmentOutcome::Infeasible);
        }
    }
    let mut incumbent: Option<Rational> = None;
    let mut rest = Vec::new();
    for (pos, &k) in order.iter().enumerate() {
        let s = search_assignment(e, &perms[k], total, obj, None)?;
        let found = s.best.as_ref().map(|(score, _)| score.clone());
        outcomes[k] = Some(outcome(obj, s, None));
        if let Some(score) = found {
            incumbent = Some(score);
            rest = order[pos + 1..].to_vec();
            break;
        }
    }
    let incumbent = incumbent.ok_or_else(|| Error::Internal("no envy-free allocation found".into()))?;
    let solved: Vec<(usize, AssignmentOutcome)> = rest
        .par_iter()
        .map(|&k| {
            let s = search_assignment(e, &perms[k], total, obj, Some(&incumbent))?;
            Ok((k, outcome(obj, s, Some(&incumbent))))
        })
        .collect::<Result<_>>()?;
    for (k, o) in solved {
        outcomes[k] = Some(o);
    }

    let table: Vec<AssignmentEntry> = perms
        .into_iter()
        .zip(outcomes)
        .map(|(assignment, o)| AssignmentEntry { assignment, outcome: o.expect("every assignment visited") })
        .collect();
    let mut best: Option<(Rational, usize)> = None;
    for (k, entry) in table.iter().enumerate() {
        if let AssignmentOutcome::Optimal { value, .. } = &entry.outcome {
            let score = obj.score(value);
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, k));
            }
        }
    }
    let (score, k) = best.expect("incumbent assignment is optimal");
    let AssignmentOutcome::Optimal { rents, .. } = &table[k].outcome else { unreachable!() };
    let optimum = Allocation::new(table[k].assignment.clone(), rents.clone());
    Ok(OracleResult { optimum, value: obj.unscore(&score), table })
}

pub fn brute_force_maxmin(e: &Economy) -> Result<OracleResult> {
    brute_force(e, e.total_rent(), &OracleObjective::MaxminUtility)
}

/// Sup-norm distance from `rents` to the envy-free rents compatible with
/// `sigma` at the same total; `None` when there are none.
pub fn distance_to_envy_free(e: &Economy, sigma: &[usize], rents: &[Rational]) -> Result<Option<Rational>> {
    let total: Rational = rents.iter().sum();
    Ok(optimize_fixed(e, sigma, &total, &OracleObjective::NearestTo(rents.to_vec()))?.map(|(d, _)| d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{e1, e2};
    use crate::model::{is_envy_free, is_maxmin};
    use crate::rational::{q, qi};

    #[test]
    fn quasi_linear_example() {
        let r = brute_force_maxmin(&e1()).unwrap();
        assert_eq!(r.optimum, Allocation::new(vec![0, 1], vec![qi(65), qi(35)]));
        assert_eq!(r.value, qi(35));
        assert!(matches!(r.table[1].outcome, AssignmentOutcome::Infeasible | AssignmentOutcome::Dominated { .. }));
    }

    #[test]
    fn budget_example() {
        let r = brute_force_maxmin(&e2()).unwrap();
        assert_eq!(r.optimum, Allocation::new(vec![0, 1], vec![q(190, 3), q(110, 3)]));
        assert_eq!(r.value, q(100, 3));
        assert!(is_maxmin(&e2(), &r.optimum).unwrap().holds);
    }

    #[test]
    fn single_agent() {
        let e = Economy::from_parts(vec![vec![qi(50)]], vec![qi(20)], vec![qi(2)], qi(30)).unwrap();
        let r = brute_force_maxmin(&e).unwrap();
        assert_eq!(r.optimum.rents, vec![qi(30)]);
        assert_eq!(r.value, qi(50 - 30 - 2 * 10));
    }

    #[test]
    fn rent_objectives_on_quasi_linear_example() {
        let e = e1();
        let r = brute_force(&e, &qi(100), &OracleObjective::MaxminRent(vec![(qi(0), qi(1)); 2])).unwrap();
        assert_eq!(r.optimum.rents, vec![qi(55), qi(45)]);
        let r = brute_force(&e, &qi(100), &OracleObjective::MinmaxRent(vec![(qi(0), qi(1)); 2])).unwrap();
        assert_eq!(r.optimum.rents, vec![qi(55), qi(45)]);
        let r = brute_force(&e, &qi(100), &OracleObjective::MaxRoomRent(0)).unwrap();
        assert_eq!(r.value, qi(70));
        let r = brute_force(&e, &qi(110), &OracleObjective::MaxRoomRent(0)).unwrap();
        assert_eq!(r.value, qi(75));
        // Minmax utility pushes the smaller surplus holder up to equality at the other end.
        let r = brute_force(&e, &qi(100), &OracleObjective::MinmaxUtility).unwrap();
        assert!(is_envy_free(&e, &r.optimum).unwrap());
    }

    #[test]
    fn distance_to_set() {
        let e = e1();
        let d = distance_to_envy_free(&e, &[0, 1], &[qi(80), qi(20)]).unwrap();
        assert_eq!(d, Some(qi(10)));
        let d = distance_to_envy_free(&e, &[0, 1], &[qi(60), qi(40)]).unwrap();
        assert_eq!(d, Some(qi(0)));
        assert_eq!(distance_to_envy_free(&e, &[1, 0], &[qi(50), qi(50)]).unwrap(), None);
    }

    #[test]
    fn too_large() {
        let e = Economy::quasi_linear(vec![vec![qi(0); 7]; 7], qi(0)).unwrap();
        assert!(matches!(brute_force_maxmin(&e), Err(Error::TooLarge(_))));
    }
}
