//! Grid experiments on the manipulability of the maxmin mechanism.
//!
//! The mechanism maps a profile of reported preferences to the maxmin
//! envy-free allocation for those reports. Agents are scored with their true
//! preferences. Report spaces are finite grids.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, Economy, Objective, Preference};
use crate::oracle::distance_to_envy_free;
use crate::polytope::vertices;
use crate::lp::Relation;
use crate::props::theta;
use crate::rational::Rational;
use crate::solver::solve;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportGrid {
    pub value_step: Rational,
    /// Inclusive `(low, high)` per room.
    pub value_ranges: Vec<(Rational, Rational)>,
    pub budget_step: Rational,
    pub budget_range: (Rational, Rational),
    pub rho_choices: Vec<Rational>,
}

fn steps(lo: &Rational, hi: &Rational, step: &Rational) -> Vec<Rational> {
    let mut out = Vec::new();
    let mut x = lo.clone();
    while x <= *hi {
        out.push(x.clone());
        if !step.is_positive() {
            break;
        }
        x += step;
    }
    out
}

impl ReportGrid {
    /// Quasi-linear reports with each room's value in its range.
    pub fn quasi_linear(value_step: Rational, value_ranges: Vec<(Rational, Rational)>) -> Self {
        ReportGrid {
            value_step,
            value_ranges,
            budget_step: Rational::one(),
            budget_range: (Rational::zero(), Rational::zero()),
            rho_choices: vec![Rational::zero()],
        }
    }

    /// Values within `radius` of `pref` on every room, its budget, and the
    /// given rho choices.
    pub fn around(pref: &Preference, step: Rational, radius: &Rational, rho_choices: Vec<Rational>) -> Self {
        ReportGrid {
            value_step: step,
            value_ranges: pref.values.iter().map(|v| (v - radius, v + radius)).collect(),
            budget_step: Rational::one(),
            budget_range: (pref.budget.clone(), pref.budget.clone()),
            rho_choices,
        }
    }

    pub fn validate(&self, e: &Economy) -> Result<()> {
        if self.value_ranges.len() != e.n() {
            return Err(Error::Precondition("grid needs a value range per room".into()));
        }
        if !self.value_step.is_positive() || !self.budget_step.is_positive() {
            return Err(Error::Precondition("grid steps must be positive".into()));
        }
        if self.rho_choices.is_empty() || self.rho_choices.iter().any(|r| !e.rho_menu().contains(r)) {
            return Err(Error::Precondition("grid rho choices must come from the menu".into()));
        }
        if self.budget_range.0.is_negative() || self.value_ranges.iter().any(|(l, h)| l > h) || self.budget_range.0 > self.budget_range.1 {
            return Err(Error::Precondition("empty or invalid grid range".into()));
        }
        Ok(())
    }

    /// Every report on the grid in a fixed order. With `rho = 0` only one
    /// budget is produced, since it has no effect.
    pub fn reports(&self) -> Vec<Preference> {
        let axes: Vec<Vec<Rational>> = self.value_ranges.iter().map(|(l, h)| steps(l, h, &self.value_step)).collect();
        let budgets = steps(&self.budget_range.0, &self.budget_range.1, &self.budget_step);
        let mut out = Vec::new();
        for values in axes.into_iter().multi_cartesian_product() {
            for rho in &self.rho_choices {
                let bs: &[Rational] = if rho.is_zero() { &budgets[..1] } else { &budgets };
                for b in bs {
                    out.push(Preference { values: values.clone(), budget: b.clone(), rho: rho.clone() });
                }
            }
        }
        out
    }
}

fn with_reports(e: &Economy, reports: &[Preference]) -> Result<Economy> {
    let mut out = e.clone();
    for (i, p) in reports.iter().enumerate() {
        out = out.with_preference(i, p.clone())?;
    }
    Ok(out)
}

/// Outcome of the maxmin mechanism for a report profile.
pub fn mechanism(e_true: &Economy, reports: &[Preference]) -> Result<Allocation> {
    Ok(solve(&with_reports(e_true, reports)?, &Objective::maxmin_utility())?.allocation)
}

fn true_utility(e_true: &Economy, z: &Allocation, i: usize) -> Rational {
    z.bundle_utility(e_true, i, i)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BestResponse {
    pub report: Preference,
    pub utility: Rational,
    pub outcome: Allocation,
    pub truthful_utility: Rational,
}

/// Exhaustive search over agent `i`'s grid with the others truthful.
pub fn best_response(e_true: &Economy, i: usize, grid: &ReportGrid) -> Result<BestResponse> {
    let truth: Vec<Preference> = e_true.prefs().to_vec();
    best_response_against(e_true, &truth, i, grid)
}

/// Best grid deviation of agent `i` from `profile`; earliest grid report wins ties.
pub fn best_response_against(e_true: &Economy, profile: &[Preference], i: usize, grid: &ReportGrid) -> Result<BestResponse> {
    if i >= e_true.n() {
        return Err(Error::UnknownAgent(i.to_string()));
    }
    grid.validate(e_true)?;
    let base = mechanism(e_true, profile)?;
    let truthful_utility = true_utility(e_true, &base, i);
    let scored: Vec<(Preference, Allocation, Rational)> = grid
        .reports()
        .into_par_iter()
        .map(|rep| {
            let mut prof = profile.to_vec();
            prof[i] = rep.clone();
            let z = mechanism(e_true, &prof)?;
            let u = true_utility(e_true, &z, i);
            Ok((rep, z, u))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(Preference, Allocation, Rational)> = None;
    for cand in scored {
        if best.as_ref().is_none_or(|b| cand.2 > b.2) {
            best = Some(cand);
        }
    }
    let (report, outcome, utility) = best.ok_or_else(|| Error::Precondition("empty grid".into()))?;
    Ok(BestResponse { report, utility, outcome, truthful_utility })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriumCheck {
    pub holds: bool,
    pub max_gain: Rational,
    /// Agent with the largest gain and the report achieving it.
    pub deviator: Option<(usize, Preference)>,
}

/// Whether no agent gains more than `eps` by a unilateral grid deviation.
pub fn is_epsilon_equilibrium(e_true: &Economy, profile: &[Preference], eps: &Rational, grids: &[ReportGrid]) -> Result<EquilibriumCheck> {
    if profile.len() != e_true.n() || grids.len() != e_true.n() {
        return Err(Error::Precondition("need one report and one grid per agent".into()));
    }
    let mut max_gain = Rational::zero();
    let mut deviator = None;
    for i in 0..e_true.n() {
        let br = best_response_against(e_true, profile, i, &grids[i])?;
        let gain = &br.utility - &br.truthful_utility;
        if gain > max_gain {
            max_gain = gain;
            deviator = Some((i, br.report));
        }
    }
    Ok(EquilibriumCheck { holds: max_gain <= *eps, max_gain, deviator })
}

/// Outcomes of every profile in the product of the agents' grids.
pub struct OutcomeTable {
    pub reports: Vec<Vec<Preference>>,
    pub outcomes: Vec<Allocation>,
    /// `utilities[p][i]`: agent `i`'s true utility at profile `p`.
    pub utilities: Vec<Vec<Rational>>,
}

impl OutcomeTable {
    pub fn build(e_true: &Economy, grids: &[ReportGrid]) -> Result<Self> {
        if grids.len() != e_true.n() {
            return Err(Error::Precondition("need one grid per agent".into()));
        }
        for g in grids {
            g.validate(e_true)?;
        }
        let reports: Vec<Vec<Preference>> = grids.iter().map(|g| g.reports()).collect();
        let total: usize = reports.iter().map(|r| r.len()).product();
        let table = OutcomeTable { reports, outcomes: Vec::new(), utilities: Vec::new() };
        let outcomes: Vec<Allocation> = (0..total)
            .into_par_iter()
            .map(|p| mechanism(e_true, &table.profile(p)))
            .collect::<Result<_>>()?;
        let utilities = outcomes.iter().map(|z| (0..e_true.n()).map(|i| true_utility(e_true, z, i)).collect()).collect();
        Ok(OutcomeTable { outcomes, utilities, ..table })
    }

    pub fn len(&self) -> usize {
        self.reports.iter().map(|r| r.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn digits(&self, mut p: usize) -> Vec<usize> {
        let mut d = vec![0; self.reports.len()];
        for i in (0..self.reports.len()).rev() {
            d[i] = p % self.reports[i].len();
            p /= self.reports[i].len();
        }
        d
    }

    fn index(&self, d: &[usize]) -> usize {
        d.iter().zip(&self.reports).fold(0, |acc, (x, r)| acc * r.len() + x)
    }

    pub fn profile(&self, p: usize) -> Vec<Preference> {
        self.digits(p).iter().enumerate().map(|(i, &k)| self.reports[i][k].clone()).collect()
    }

    /// Largest unilateral gain available at profile `p`.
    pub fn max_gain(&self, p: usize) -> Rational {
        let d = self.digits(p);
        let mut best = Rational::zero();
        for i in 0..d.len() {
            let here = &self.utilities[p][i];
            let mut dev = d.clone();
            for k in 0..self.reports[i].len() {
                dev[i] = k;
                let gain = &self.utilities[self.index(&dev)][i] - here;
                if gain > best {
                    best = gain;
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitRow {
    pub epsilon: Rational,
    pub grid_step: Rational,
    pub profiles: usize,
    pub equilibria: usize,
    /// Largest sup-norm distance from an equilibrium outcome to the true
    /// envy-free set; `None` without equilibria.
    pub max_distance: Option<Rational>,
    /// Some equilibrium outcome uses an assignment no true envy-free
    /// allocation uses.
    pub unbounded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitLevel {
    pub epsilon: Rational,
    pub grids: Vec<ReportGrid>,
}

/// For each level, enumerates the grid epsilon-equilibria and measures how
/// far their outcomes are from the true envy-free set.
pub fn limit_equilibrium_experiment(e_true: &Economy, levels: &[LimitLevel]) -> Result<Vec<LimitRow>> {
    if e_true.n() > 3 {
        return Err(Error::TooLarge("equilibrium enumeration supports at most 3 agents".into()));
    }
    let mut rows = Vec::new();
    for level in levels {
        let table = OutcomeTable::build(e_true, &level.grids)?;
        let eq: Vec<usize> = (0..table.len()).filter(|&p| table.max_gain(p) <= level.epsilon).collect();
        let dists: Vec<Option<Rational>> = eq
            .par_iter()
            .map(|&p| {
                let z = &table.outcomes[p];
                distance_to_envy_free(e_true, &z.assignment, &z.rents)
            })
            .collect::<Result<_>>()?;
        let unbounded = dists.iter().any(|d| d.is_none());
        let max_distance = dists.into_iter().flatten().max();
        rows.push(LimitRow {
            epsilon: level.epsilon.clone(),
            grid_step: level.grids.iter().map(|g| g.value_step.clone()).max().unwrap_or_else(Rational::zero),
            profiles: table.len(),
            equilibria: eq.len(),
            max_distance: if eq.is_empty() { None } else { max_distance.or(Some(Rational::zero())) },
            unbounded,
        });
    }
    Ok(rows)
}

/// Quasi-linear reports under which each agent values their room at `z`
/// slightly above its rent and every other room exactly at its rent.
pub fn lemma7_profile(z: &Allocation, eps: &Rational) -> Vec<Preference> {
    let n = z.assignment.len();
    let bonus = if n > 1 {
        let k = Rational::from(n - 1);
        eps / &k + eps / &(&k * &k)
    } else {
        Rational::zero()
    };
    (0..n)
        .map(|i| {
            let mut values = z.rents.clone();
            values[z.assignment[i]] = &values[z.assignment[i]] + &bonus;
            Preference::quasi_linear(values)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManipulationConstants {
    pub theta: Rational,
    pub omega1: Rational,
    pub omega2: Rational,
}

impl ManipulationConstants {
    pub fn for_economy(e: &Economy) -> Self {
        let theta = theta(e);
        ManipulationConstants { omega1: &theta / &Rational::from(2), theta, omega2: Rational::new(3, 4) }
    }
}

/// Envy-free allocations sampled exactly: the vertices of every linear piece
/// of the envy-free set and the midpoints between vertices of a piece.
/// `extra` adds breakpoints (e.g. a budget of someone scored elsewhere).
pub fn envy_free_samples(e: &Economy, extra: &[Rational]) -> Result<Vec<Allocation>> {
    let n = e.n();
    if n > 3 {
        return Err(Error::TooLarge("envy-free sampling supports at most 3 agents".into()));
    }
    let total = e.total_rent().clone();
    let (lo, hi) = e.ef_rent_bounds(&total);
    let mut cuts: Vec<Rational> = e.prefs().iter().filter(|p| p.is_kinked()).map(|p| p.budget.clone()).collect();
    cuts.extend(extra.iter().cloned());
    cuts.retain(|c| lo < *c && *c < hi);
    cuts.sort();
    cuts.dedup();
    let mut bounds = vec![lo];
    bounds.extend(cuts);
    bounds.push(hi);
    let intervals: Vec<(Rational, Rational)> = bounds.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();

    let mut out: Vec<Allocation> = Vec::new();
    for sigma in (0..n).permutations(n) {
        for boxes in std::iter::repeat_n(intervals.iter(), n).multi_cartesian_product() {
            let mut rows: Vec<(Vec<Rational>, Relation, Rational)> = Vec::new();
            let unit = |a: usize| {
                let mut v = vec![Rational::zero(); n];
                v[a] = Rational::one();
                v
            };
            rows.push((vec![Rational::one(); n], Relation::Eq, total.clone()));
            for (a, (l, h)) in boxes.iter().enumerate() {
                rows.push((unit(a), Relation::Ge, l.clone()));
                rows.push((unit(a), Relation::Le, h.clone()));
            }
            for (i, &a) in sigma.iter().enumerate() {
                let p = e.pref(i);
                for &c in sigma.iter().filter(|&&c| c != a) {
                    // Within a box each utility is affine; use its midpoint regime.
                    let (nu_a, la) = affine_on(p, a, boxes[a]);
                    let (nu_c, lc) = affine_on(p, c, boxes[c]);
                    let mut row = vec![Rational::zero(); n];
                    row[a] = -la;
                    row[c] = lc;
                    rows.push((row, Relation::Ge, nu_c - nu_a));
                }
            }
            let vs = vertices(n, &rows);
            let mut pts = vs.clone();
            for (x, y) in vs.iter().tuple_combinations() {
                pts.push(x.iter().zip(y).map(|(p, q)| (p + q) / Rational::from(2)).collect());
            }
            for rents in pts {
                let z = Allocation::new(sigma.clone(), rents);
                if !out.contains(&z) {
                    out.push(z);
                }
            }
        }
    }
    Ok(out)
}

/// `(nu, lambda)` of `u(room, r) = nu - lambda r` on the interval.
fn affine_on(p: &Preference, room: usize, (l, h): &(Rational, Rational)) -> (Rational, Rational) {
    let mid = (l + h) / Rational::from(2);
    let (nu, lambda) = p.local_form(room, &mid, crate::model::Direction::Down);
    (nu, lambda)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrongManipulation {
    pub constants: ManipulationConstants,
    pub eta: Rational,
    pub bound: Rational,
    pub searched: usize,
    pub witness: Option<Preference>,
    /// Worst true utility over the sampled envy-free set for the witness.
    pub witness_worst: Option<Rational>,
}

/// Searches quasi-linear reports of agent `i` that guarantee, over every
/// sampled envy-free allocation for the new reports, at least the smaller of
/// a rebate of `omega1 * eta` on `i`'s room and `j`'s room at `omega2 * eta`
/// above its rent.
pub fn check_strong_manipulation(
    reports: &Economy,
    z: &Allocation,
    i: usize,
    truth: &Preference,
    j: usize,
    grid: &ReportGrid,
) -> Result<StrongManipulation> {
    z.validate_total(reports)?;
    let n = reports.n();
    if i >= n || j >= n || i == j {
        return Err(Error::Precondition("need two distinct agents".into()));
    }
    if truth.values.len() != n {
        return Err(Error::Precondition("true preference has the wrong number of rooms".into()));
    }
    if !crate::model::is_envy_free(reports, z)? {
        return Err(Error::Precondition("allocation is not envy-free for the reports".into()));
    }
    grid.validate(reports)?;
    if grid.rho_choices.iter().any(|r| !r.is_zero()) {
        return Err(Error::Precondition("strong manipulation uses quasi-linear reports".into()));
    }
    let (own, other) = (z.assignment[i], z.assignment[j]);
    let here = truth.utility(own, &z.rents[own]);
    if truth.utility(other, &z.rents[other]) <= here {
        return Err(Error::Precondition(format!("agent {i} does not envy agent {j}")));
    }
    let eta = &truth.rent_for_utility(other, &here) - &z.rents[other];
    let constants = ManipulationConstants::for_economy(reports);
    let bound = truth
        .utility(own, &(&z.rents[own] - &(&constants.omega1 * &eta)))
        .min(truth.utility(other, &(&z.rents[other] + &(&constants.omega2 * &eta))));
    let extra = [truth.budget.clone()];
    let candidates = grid.reports();
    let searched = candidates.len();
    let found = candidates
        .into_par_iter()
        .map(|rep| -> Result<Option<(Preference, Rational)>> {
            let e = reports.with_preference(i, rep.clone())?;
            let samples = envy_free_samples(&e, &extra)?;
            let worst = samples.iter().map(|s| truth.utility(s.assignment[i], &s.rents[s.assignment[i]])).min();
            Ok(worst.filter(|w| *w >= bound).map(|w| (rep, w)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .next();
    let (witness, witness_worst) = match found {
        Some((w, u)) => (Some(w), Some(u)),
        None => (None, None),
    };
    Ok(StrongManipulation { constants, eta, bound, searched, witness, witness_worst })
}
