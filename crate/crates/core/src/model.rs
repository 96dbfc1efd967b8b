//! Economies, allocations and the graph machinery built on top of them.
//!
//! Agents and rooms are addressed by position; the string ids are kept for
//! I/O and their input order is the canonical order used by every
//! deterministic tie-break.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// A budget-constrained quasi-linear preference: `v_a - r - rho * max(0, r - b)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Preference {
    pub values: Vec<Rational>,
    pub budget: Rational,
    pub rho: Rational,
}

impl Preference {
    pub fn quasi_linear(values: Vec<Rational>) -> Self {
        Preference { values, budget: Rational::zero(), rho: Rational::zero() }
    }

    pub fn is_kinked(&self) -> bool {
        self.rho.is_positive()
    }

    pub fn utility(&self, room: usize, rent: &Rational) -> Rational {
        let base = &self.values[room] - rent;
        if self.rho.is_zero() || *rent <= self.budget {
            base
        } else {
            base - &self.rho * (rent - &self.budget)
        }
    }

    /// Local affine form `nu - lambda * r` of the utility of `room` around `rent`.
    pub fn local_form(&self, room: usize, rent: &Rational, dir: Direction) -> (Rational, Rational) {
        let above = match dir {
            Direction::Down => *rent > self.budget,
            Direction::Up => *rent >= self.budget,
        };
        if above && self.is_kinked() {
            let lambda = Rational::one() + &self.rho;
            (&self.values[room] + &self.rho * &self.budget, lambda)
        } else {
            (self.values[room].clone(), Rational::one())
        }
    }

    /// The rent at which `room` yields utility `level`.
    pub fn rent_for_utility(&self, room: usize, level: &Rational) -> Rational {
        let r = &self.values[room] - level;
        if self.rho.is_zero() || r <= self.budget {
            r
        } else {
            (&self.values[room] + &self.rho * &self.budget - level) / (Rational::one() + &self.rho)
        }
    }
}

/// Which side of the current rent a linearization describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Rents about to decrease; `r_a = b_i` uses the below-budget slope.
    Down,
    /// Rents about to increase; `r_a = b_i` uses the above-budget slope.
    Up,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Economy {
    agents: Vec<String>,
    rooms: Vec<String>,
    prefs: Vec<Preference>,
    total_rent: Rational,
    rho_menu: Vec<Rational>,
    rho_bar: Rational,
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let set: BTreeSet<&String> = ids.iter().collect();
    if set.len() != ids.len() {
        return Err(Error::InvalidEconomy(format!("duplicate {what} id")));
    }
    if ids.iter().any(|s| s.is_empty()) {
        return Err(Error::InvalidEconomy(format!("empty {what} id")));
    }
    Ok(())
}

impl Economy {
    pub fn new(
        agents: Vec<String>,
        rooms: Vec<String>,
        prefs: Vec<Preference>,
        total_rent: Rational,
        rho_menu: Vec<Rational>,
        rho_bar: Rational,
    ) -> Result<Self> {
        let n = agents.len();
        if n == 0 {
            return Err(Error::InvalidEconomy("no agents".into()));
        }
        if rooms.len() != n {
            return Err(Error::InvalidEconomy(format!("{} agents but {} rooms", n, rooms.len())));
        }
        if prefs.len() != n {
            return Err(Error::InvalidEconomy(format!("{} agents but {} preferences", n, prefs.len())));
        }
        check_unique(&agents, "agent")?;
        check_unique(&rooms, "room")?;
        let mut menu = rho_menu;
        menu.sort();
        menu.dedup();
        if menu.is_empty() {
            return Err(Error::InvalidEconomy("empty rho menu".into()));
        }
        if menu[0].is_negative() || *menu.last().unwrap() > rho_bar {
            return Err(Error::InvalidEconomy("rho menu entries must lie in [0, rho_bar]".into()));
        }
        for (i, p) in prefs.iter().enumerate() {
            if p.values.len() != n {
                return Err(Error::InvalidEconomy(format!(
                    "agent {} has {} values for {} rooms",
                    agents[i],
                    p.values.len(),
                    n
                )));
            }
            if p.budget.is_negative() {
                return Err(Error::InvalidEconomy(format!("agent {} has a negative budget", agents[i])));
            }
            if menu.binary_search(&p.rho).is_err() {
                return Err(Error::InvalidEconomy(format!("agent {} has rho {} outside the menu", agents[i], p.rho)));
            }
        }
        Ok(Economy { agents, rooms, prefs, total_rent, rho_menu: menu, rho_bar })
    }

    /// Builds an economy with agents `1..n`, rooms `a, b, ...` and the menu
    /// made of the rhos that occur (plus zero).
    pub fn from_parts(values: Vec<Vec<Rational>>, budgets: Vec<Rational>, rhos: Vec<Rational>, total_rent: Rational) -> Result<Self> {
        let n = values.len();
        if budgets.len() != n || rhos.len() != n {
            return Err(Error::InvalidEconomy("mismatched parameter lengths".into()));
        }
        let mut menu: Vec<Rational> = rhos.clone();
        menu.push(Rational::zero());
        let rho_bar = menu.iter().cloned().max().unwrap();
        let prefs = values
            .into_iter()
            .zip(budgets)
            .zip(rhos)
            .map(|((values, budget), rho)| Preference { values, budget, rho })
            .collect();
        Economy::new(default_agent_ids(n), default_room_ids(n), prefs, total_rent, menu, rho_bar)
    }

    pub fn quasi_linear(values: Vec<Vec<Rational>>, total_rent: Rational) -> Result<Self> {
        let n = values.len();
        Economy::from_parts(values, vec![Rational::zero(); n], vec![Rational::zero(); n], total_rent)
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn rooms(&self) -> &[String] {
        &self.rooms
    }

    pub fn prefs(&self) -> &[Preference] {
        &self.prefs
    }

    pub fn pref(&self, i: usize) -> &Preference {
        &self.prefs[i]
    }

    pub fn total_rent(&self) -> &Rational {
        &self.total_rent
    }

    pub fn rho_menu(&self) -> &[Rational] {
        &self.rho_menu
    }

    pub fn rho_bar(&self) -> &Rational {
        &self.rho_bar
    }

    pub fn agent_index(&self, id: &str) -> Result<usize> {
        self.agents.iter().position(|a| a == id).ok_or_else(|| Error::UnknownAgent(id.to_string()))
    }

    pub fn room_index(&self, id: &str) -> Result<usize> {
        self.rooms.iter().position(|a| a == id).ok_or_else(|| Error::UnknownRoom(id.to_string()))
    }

    pub fn with_total_rent(&self, m: Rational) -> Economy {
        Economy { total_rent: m, ..self.clone() }
    }

    /// Replaces agent `i`'s preference, extending the menu if needed.
    pub fn with_preference(&self, i: usize, pref: Preference) -> Result<Economy> {
        let mut prefs = self.prefs.clone();
        prefs[i] = pref;
        let mut menu = self.rho_menu.clone();
        menu.push(prefs[i].rho.clone());
        let rho_bar = self.rho_bar.clone().max(prefs[i].rho.clone());
        Economy::new(self.agents.clone(), self.rooms.clone(), prefs, self.total_rent.clone(), menu, rho_bar)
    }

    pub fn is_quasi_linear(&self) -> bool {
        self.prefs.iter().all(|p| p.rho.is_zero())
    }

    /// `max_{i,a,c} v_ia - v_ic`; in every envy-free allocation no two rents
    /// differ by more than this.
    pub fn value_spread(&self) -> Rational {
        let mut s = Rational::zero();
        for p in &self.prefs {
            let hi = p.values.iter().max().unwrap();
            let lo = p.values.iter().min().unwrap();
            s = s.max(hi - lo);
        }
        s
    }

    /// Interval containing every rent of every envy-free allocation at `total`.
    pub fn ef_rent_bounds(&self, total: &Rational) -> (Rational, Rational) {
        let n = Rational::from(self.n());
        let spread = self.value_spread();
        let slack = &spread * (&n - Rational::one());
        ((total - &slack) / &n, (total + &slack) / &n)
    }
}

pub fn default_agent_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

pub fn default_room_ids(n: usize) -> Vec<String> {
    (0..n)
        .map(|a| if a < 26 { ((b'a' + a as u8) as char).to_string() } else { format!("r{}", a + 1) })
        .collect()
}

/// Room assignment `agent -> room` plus per-room rents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    pub assignment: Vec<usize>,
    pub rents: Vec<Rational>,
}

impl Allocation {
    pub fn new(assignment: Vec<usize>, rents: Vec<Rational>) -> Self {
        Allocation { assignment, rents }
    }

    pub fn total(&self) -> Rational {
        self.rents.iter().sum()
    }

    pub fn validate(&self, e: &Economy) -> Result<()> {
        let n = e.n();
        if self.assignment.len() != n || self.rents.len() != n {
            return Err(Error::InvalidAllocation(format!(
                "expected {} agents and rooms, got {} and {}",
                n,
                self.assignment.len(),
                self.rents.len()
            )));
        }
        let mut seen = vec![false; n];
        for &a in &self.assignment {
            if a >= n || seen[a] {
                return Err(Error::InvalidAllocation("assignment is not a bijection".into()));
            }
            seen[a] = true;
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate) and additionally requires the rents to sum to `m`.
    pub fn validate_total(&self, e: &Economy) -> Result<()> {
        self.validate(e)?;
        let t = self.total();
        if &t != e.total_rent() {
            return Err(Error::InvalidAllocation(format!("rents sum to {} instead of {}", t, e.total_rent())));
        }
        Ok(())
    }

    pub fn owner_of(&self) -> Vec<usize> {
        let mut owner = vec![0; self.assignment.len()];
        for (i, &a) in self.assignment.iter().enumerate() {
            owner[a] = i;
        }
        owner
    }

    /// `u_i(z_j)`.
    pub fn bundle_utility(&self, e: &Economy, i: usize, j: usize) -> Rational {
        let a = self.assignment[j];
        e.pref(i).utility(a, &self.rents[a])
    }

    pub fn utilities(&self, e: &Economy) -> Vec<Rational> {
        (0..e.n()).map(|i| self.bundle_utility(e, i, i)).collect()
    }
}

pub fn eval_utility(e: &Economy, agent: usize, room: &str, rent: &Rational) -> Result<Rational> {
    let a = e.room_index(room)?;
    Ok(e.pref(agent).utility(a, rent))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envy {
    pub agent: usize,
    pub envied: usize,
    pub gap: Rational,
}

/// `None` when envy-free, otherwise the pair with the largest gap
/// (first in canonical order among equals).
pub fn envy_witness(e: &Economy, z: &Allocation) -> Result<Option<Envy>> {
    z.validate(e)?;
    let mut worst: Option<Envy> = None;
    for i in 0..e.n() {
        let own = z.bundle_utility(e, i, i);
        for j in 0..e.n() {
            let gap = z.bundle_utility(e, i, j) - &own;
            if gap.is_positive() && worst.as_ref().is_none_or(|w| gap > w.gap) {
                worst = Some(Envy { agent: i, envied: j, gap });
            }
        }
    }
    Ok(worst)
}

pub fn is_envy_free(e: &Economy, z: &Allocation) -> Result<bool> {
    Ok(envy_witness(e, z)?.is_none())
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BudgetSets {
    pub strict: BTreeSet<(usize, usize)>,
    pub weak: BTreeSet<(usize, usize)>,
}

pub fn budget_sets(e: &Economy, rents: &[Rational]) -> BudgetSets {
    let mut out = BudgetSets::default();
    for (i, p) in e.prefs().iter().enumerate() {
        for (a, r) in rents.iter().enumerate() {
            if *r > p.budget {
                out.strict.insert((i, a));
            }
            if *r >= p.budget {
                out.weak.insert((i, a));
            }
        }
    }
    out
}

/// Budget sets restricted to agents whose utility actually has a kink.
/// For `rho_i = 0` the budget is inert, and these are the pairs the descent
/// algorithm has to track.
pub fn kinked_budget_sets(e: &Economy, rents: &[Rational]) -> BudgetSets {
    let mut out = budget_sets(e, rents);
    out.strict.retain(|&(i, _)| e.pref(i).is_kinked());
    out.weak.retain(|&(i, _)| e.pref(i).is_kinked());
    out
}

/// Kinked pairs strictly below budget; the mirror of SB for ascending runs.
pub fn kinked_below_budget(e: &Economy, rents: &[Rational]) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for (i, p) in e.prefs().iter().enumerate() {
        if !p.is_kinked() {
            continue;
        }
        for (a, r) in rents.iter().enumerate() {
            if *r < p.budget {
                out.insert((i, a));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linearization {
    pub nu: Vec<Vec<Rational>>,
    pub lambda: Vec<Vec<Rational>>,
}

impl Linearization {
    pub fn eval(&self, i: usize, a: usize, t: &Rational) -> Rational {
        &self.nu[i][a] - &self.lambda[i][a] * t
    }
}

pub fn linearize(e: &Economy, rents: &[Rational]) -> Linearization {
    linearize_dir(e, rents, Direction::Down)
}

pub fn linearize_dir(e: &Economy, rents: &[Rational], dir: Direction) -> Linearization {
    let n = e.n();
    let mut nu = vec![Vec::with_capacity(n); n];
    let mut lambda = vec![Vec::with_capacity(n); n];
    for i in 0..n {
        for (a, r) in rents.iter().enumerate() {
            let (v, l) = e.pref(i).local_form(a, r, dir);
            nu[i].push(v);
            lambda[i].push(l);
        }
    }
    Linearization { nu, lambda }
}

/// Directed graph on agents with an edge `i -> j` iff `u_i(z_i) = u_i(z_j)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvyGraph {
    pub adj: Vec<Vec<bool>>,
}

impl EnvyGraph {
    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i][j]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            for j in 0..self.n() {
                if self.adj[i][j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// For each agent, a shortest path into `targets` (or `None`).
    pub fn paths_to(&self, targets: &[usize]) -> Vec<Option<Vec<usize>>> {
        self.bfs(targets, true)
    }

    /// For each agent, a shortest path from `sources` to it (or `None`).
    pub fn paths_from(&self, sources: &[usize]) -> Vec<Option<Vec<usize>>> {
        self.bfs(sources, false)
    }

    fn bfs(&self, roots: &[usize], reverse: bool) -> Vec<Option<Vec<usize>>> {
        let n = self.n();
        let mut next: Vec<Option<usize>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for &t in roots {
            seen[t] = true;
            queue.push_back(t);
        }
        while let Some(x) = queue.pop_front() {
            for y in 0..n {
                let edge = if reverse { self.adj[y][x] } else { self.adj[x][y] };
                if edge && !seen[y] {
                    seen[y] = true;
                    next[y] = Some(x);
                    queue.push_back(y);
                }
            }
        }
        (0..n)
            .map(|start| {
                if !seen[start] {
                    return None;
                }
                let mut path = vec![start];
                let mut cur = start;
                while let Some(p) = next[cur] {
                    path.push(p);
                    cur = p;
                }
                if !reverse {
                    path.reverse();
                }
                Some(path)
            })
            .collect()
    }
}

pub fn envy_graph(e: &Economy, z: &Allocation) -> Result<EnvyGraph> {
    z.validate(e)?;
    let n = e.n();
    let mut adj = vec![vec![false; n]; n];
    for (i, row) in adj.iter_mut().enumerate() {
        let own = z.bundle_utility(e, i, i);
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = z.bundle_utility(e, i, j) == own;
        }
    }
    Ok(EnvyGraph { adj })
}

/// Bipartite agent-room indifference graph weighted by the local slopes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieGraph {
    pub weights: Vec<Vec<Option<Rational>>>,
}

impl TieGraph {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.weights.iter().enumerate() {
            for (a, w) in row.iter().enumerate() {
                if w.is_some() {
                    out.push((i, a));
                }
            }
        }
        out
    }
}

pub fn tie_graph(e: &Economy, z: &Allocation) -> Result<TieGraph> {
    tie_graph_dir(e, z, Direction::Down)
}

pub fn tie_graph_dir(e: &Economy, z: &Allocation, dir: Direction) -> Result<TieGraph> {
    if let Some(w) = envy_witness(e, z)? {
        return Err(Error::NotEnvyFree { agent: w.agent, envied: w.envied });
    }
    let lin = linearize_dir(e, &z.rents, dir);
    let n = e.n();
    let mut weights = vec![vec![None; n]; n];
    for i in 0..n {
        let own = z.bundle_utility(e, i, i);
        for a in 0..n {
            if e.pref(i).utility(a, &z.rents[a]) == own {
                weights[i][a] = Some(lin.lambda[i][a].clone());
            }
        }
    }
    Ok(TieGraph { weights })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    MaxminUtility,
    MaxminTransformedRent,
    MinmaxUtility,
    MinmaxTransformedRent,
}

impl ObjectiveKind {
    pub fn is_rent_based(self) -> bool {
        matches!(self, ObjectiveKind::MaxminTransformedRent | ObjectiveKind::MinmaxTransformedRent)
    }

    pub fn maximizes_minimum(self) -> bool {
        matches!(self, ObjectiveKind::MaxminUtility | ObjectiveKind::MaxminTransformedRent)
    }

    /// Whether the selection is reached by lowering rent from above
    /// (`Down`) or raising it from below (`Up`).
    pub fn direction(self) -> Direction {
        match self {
            ObjectiveKind::MaxminUtility | ObjectiveKind::MinmaxTransformedRent => Direction::Down,
            ObjectiveKind::MinmaxUtility | ObjectiveKind::MaxminTransformedRent => Direction::Up,
        }
    }
}

/// A selection from the envy-free set. Rent-based kinds score room `a` by
/// `alpha_a + beta_a * r_a` with `beta_a > 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: ObjectiveKind,
    #[serde(default)]
    pub transform: Vec<(Rational, Rational)>,
}

impl Objective {
    pub fn maxmin_utility() -> Self {
        Objective { kind: ObjectiveKind::MaxminUtility, transform: Vec::new() }
    }

    pub fn minmax_utility() -> Self {
        Objective { kind: ObjectiveKind::MinmaxUtility, transform: Vec::new() }
    }

    /// Plain rents (`alpha = 0`, `beta = 1`) for `n` rooms.
    pub fn maxmin_rent(n: usize) -> Self {
        Objective { kind: ObjectiveKind::MaxminTransformedRent, transform: identity_transform(n) }
    }

    pub fn minmax_rent(n: usize) -> Self {
        Objective { kind: ObjectiveKind::MinmaxTransformedRent, transform: identity_transform(n) }
    }

    pub fn validate(&self, e: &Economy) -> Result<()> {
        if self.kind.is_rent_based() {
            if self.transform.len() != e.n() {
                return Err(Error::Precondition(format!(
                    "transform has {} entries for {} rooms",
                    self.transform.len(),
                    e.n()
                )));
            }
            if self.transform.iter().any(|(_, beta)| !beta.is_positive()) {
                return Err(Error::Precondition("transform slopes must be positive".into()));
            }
        }
        Ok(())
    }

    /// Per-agent score whose minimum (or maximum) the selection optimizes.
    pub fn scores(&self, e: &Economy, z: &Allocation) -> Vec<Rational> {
        if self.kind.is_rent_based() {
            z.assignment
                .iter()
                .map(|&a| {
                    let (alpha, beta) = &self.transform[a];
                    alpha + beta * &z.rents[a]
                })
                .collect()
        } else {
            z.utilities(e)
        }
    }

    pub fn value(&self, e: &Economy, z: &Allocation) -> Rational {
        let s = self.scores(e, z);
        if self.kind.maximizes_minimum() {
            s.into_iter().min().unwrap()
        } else {
            s.into_iter().max().unwrap()
        }
    }
}

fn identity_transform(n: usize) -> Vec<(Rational, Rational)> {
    vec![(Rational::zero(), Rational::one()); n]
}

/// Membership certificate: envy-freeness plus reachability in the envy graph
/// between every agent and the set of agents with the extreme score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionCertificate {
    pub kind: ObjectiveKind,
    pub holds: bool,
    pub envy: Option<Envy>,
    pub value: Rational,
    /// Agents attaining the extreme score.
    pub extreme: Vec<usize>,
    /// `true` when paths run from each agent into `extreme`, `false` when
    /// they run from `extreme` out to each agent.
    pub toward_extreme: bool,
    pub paths: Vec<Option<Vec<usize>>>,
    pub failing_agent: Option<usize>,
}

pub fn check_selection(e: &Economy, z: &Allocation, obj: &Objective) -> Result<SelectionCertificate> {
    obj.validate(e)?;
    let envy = envy_witness(e, z)?;
    let scores = obj.scores(e, z);
    let value = obj.value(e, z);
    let extreme: Vec<usize> = (0..e.n()).filter(|&i| scores[i] == value).collect();
    let graph = envy_graph(e, z)?;
    // Lowering the minimum utility holder's rent, or raising the maximum
    // rent holder's, must drag along every agent who points at them.
    let toward_extreme = matches!(obj.kind, ObjectiveKind::MaxminUtility | ObjectiveKind::MinmaxTransformedRent);
    let paths = if toward_extreme { graph.paths_to(&extreme) } else { graph.paths_from(&extreme) };
    let failing_agent = paths.iter().position(|p| p.is_none());
    Ok(SelectionCertificate {
        kind: obj.kind,
        holds: envy.is_none() && failing_agent.is_none(),
        envy,
        value,
        extreme,
        toward_extreme,
        paths,
        failing_agent,
    })
}

pub fn is_maxmin(e: &Economy, z: &Allocation) -> Result<SelectionCertificate> {
    check_selection(e, z, &Objective::maxmin_utility())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{e1, e2};
    use crate::rational::{q, qi};
    use proptest::prelude::*;

    fn alloc(rents: &[i64]) -> Allocation {
        Allocation::new((0..rents.len()).collect(), rents.iter().map(|&r| qi(r)).collect())
    }

    fn single(values: &[i64], budget: i64, rho: Rational) -> Preference {
        Preference { values: values.iter().map(|&v| qi(v)).collect(), budget: qi(budget), rho }
    }

    #[test]
    fn utility_formula() {
        let p = single(&[500, 300], 400, q(1, 2));
        assert_eq!(p.utility(0, &qi(450)), qi(25));
        let p = single(&[500, 300], 400, qi(2));
        assert_eq!(p.utility(1, &qi(200)), qi(100));
        let p = single(&[600, 300], 400, qi(1));
        assert_eq!(p.utility(0, &qi(500)), qi(0));
        assert_eq!(p.utility(1, &qi(300)), qi(0));
    }

    #[test]
    fn eval_utility_by_room_id() {
        let e = e2();
        assert_eq!(eval_utility(&e, 0, "a", &qi(85)).unwrap(), qi(-10));
        assert!(matches!(eval_utility(&e, 0, "z", &qi(1)), Err(Error::UnknownRoom(_))));
    }

    #[test]
    fn envy_checks() {
        let e = e1();
        assert!(is_envy_free(&e, &alloc(&[65, 35])).unwrap());
        let w = envy_witness(&e, &alloc(&[80, 20])).unwrap().unwrap();
        assert_eq!((w.agent, w.envied, w.gap), (0, 1, qi(20)));
        // An agent reporting (600,300) with budget 400 and rho 1, placed in
        // room b at 200 while the other pays 400 for a, envies room a.
        let e = crate::instances::budget_story();
        let z = alloc(&[400, 200]);
        let w = envy_witness(&e, &z).unwrap().unwrap();
        assert_eq!((w.agent, w.envied), (1, 0));
    }

    #[test]
    fn budget_set_examples() {
        let e = Economy::from_parts(vec![vec![qi(0), qi(0)], vec![qi(0), qi(0)]], vec![qi(400), qi(1000)], vec![qi(1), qi(0)], qi(0)).unwrap();
        let s = budget_sets(&e, &[qi(450), qi(390)]);
        assert_eq!(s.strict, [(0, 0)].into_iter().collect());
        assert_eq!(s.weak, [(0, 0)].into_iter().collect());
        let e = e2();
        let s = kinked_budget_sets(&e, &[qi(75), qi(60)]);
        assert_eq!(s.strict, [(0, 0)].into_iter().collect());
        assert_eq!(s.weak, [(0, 0), (0, 1)].into_iter().collect());
        let e = Economy::from_parts(vec![vec![qi(0), qi(0)], vec![qi(0), qi(0)]], vec![qi(500), qi(500)], vec![qi(1), qi(1)], qi(0)).unwrap();
        assert_eq!(budget_sets(&e, &[qi(10), qi(20)]), BudgetSets::default());
    }

    #[test]
    fn linearize_branches() {
        let p = single(&[500, 300], 400, q(1, 2));
        assert_eq!(p.local_form(0, &qi(450), Direction::Down), (qi(700), q(3, 2)));
        assert_eq!(p.local_form(0, &qi(400), Direction::Down), (qi(500), qi(1)));
        assert_eq!(p.local_form(0, &qi(399), Direction::Down), (qi(500), qi(1)));
        assert_eq!(p.local_form(0, &qi(400), Direction::Up), (qi(700), q(3, 2)));
    }

    #[test]
    fn graphs_on_examples() {
        let e = e1();
        let g = envy_graph(&e, &alloc(&[65, 35])).unwrap();
        assert_eq!(g.edges(), vec![(0, 0), (1, 1)]);
        assert_eq!(tie_graph(&e, &alloc(&[65, 35])).unwrap().edges(), vec![(0, 0), (1, 1)]);

        let e = e2();
        let t = tie_graph(&e, &alloc(&[85, 75])).unwrap();
        assert_eq!(t.edges(), vec![(0, 0), (1, 0), (1, 1)]);
        assert_eq!(t.weights[0][0], Some(qi(2)));
        assert_eq!(t.weights[1][0], Some(qi(1)));
        assert_eq!(t.weights[1][1], Some(qi(1)));

        let same = Economy::quasi_linear(vec![vec![qi(5), qi(5)], vec![qi(5), qi(5)]], qi(10)).unwrap();
        let g = envy_graph(&same, &alloc(&[5, 5])).unwrap();
        assert!(g.adj.iter().flatten().all(|&b| b));

        assert!(matches!(tie_graph(&e1(), &alloc(&[80, 20])), Err(Error::NotEnvyFree { .. })));
    }

    #[test]
    fn maxmin_certificates() {
        let e = e1();
        let c = is_maxmin(&e, &alloc(&[65, 35])).unwrap();
        assert!(c.holds);
        assert_eq!(c.extreme, vec![0, 1]);
        let c = is_maxmin(&e, &alloc(&[60, 40])).unwrap();
        assert!(!c.holds);
        assert_eq!(c.extreme, vec![1]);
        assert_eq!(c.failing_agent, Some(0));
        let e = e2().with_total_rent(qi(130));
        let c = is_maxmin(&e, &alloc(&[70, 60])).unwrap();
        assert!(!c.holds);
        assert_eq!(c.value, qi(10));
        let c = is_maxmin(&e, &Allocation::new(vec![0, 1], vec![q(220, 3), q(170, 3)])).unwrap();
        assert!(c.holds);
        assert_eq!(c.value, q(40, 3));
    }

    #[test]
    fn rent_selection_certificate() {
        let e = e1();
        let c = check_selection(&e, &alloc(&[55, 45]), &Objective::maxmin_rent(2)).unwrap();
        assert!(c.holds);
        let c = check_selection(&e, &alloc(&[60, 40]), &Objective::maxmin_rent(2)).unwrap();
        assert!(!c.holds);
    }

    #[test]
    fn rejects_bad_economies() {
        assert!(Economy::quasi_linear(vec![], qi(0)).is_err());
        let p = single(&[1, 2], 0, qi(3));
        let r = Economy::new(
            vec!["x".into(), "y".into()],
            vec!["a".into(), "b".into()],
            vec![p.clone(), p],
            qi(0),
            vec![qi(0)],
            qi(1),
        );
        assert!(r.is_err());
    }

    proptest! {
        #[test]
        fn utility_strictly_decreasing(v in -100i64..100, b in 0i64..100, rho in 0i64..4, r in -200i64..200, d in 1i64..50) {
            let p = single(&[v], b, q(rho, 2));
            prop_assert!(p.utility(0, &qi(r + d)) < p.utility(0, &qi(r)));
        }

        #[test]
        fn linearization_matches_utility(v in -100i64..100, b in 0i64..100, rho in 0i64..4, r in -200i64..200) {
            let e = Economy::from_parts(vec![vec![qi(v)]], vec![qi(b)], vec![q(rho, 2)], qi(r)).unwrap();
            for dir in [Direction::Down, Direction::Up] {
                let lin = linearize_dir(&e, &[qi(r)], dir);
                prop_assert_eq!(lin.eval(0, 0, &qi(r)), e.pref(0).utility(0, &qi(r)));
            }
        }

        #[test]
        fn lowering_a_rent_never_adds_strict_pairs(
            budgets in proptest::collection::vec(0i64..100, 3),
            rents in proptest::collection::vec(0i64..100, 3),
            room in 0usize..3, drop in 1i64..50,
        ) {
            let e = Economy::from_parts(
                vec![vec![qi(0); 3]; 3],
                budgets.iter().map(|&b| qi(b)).collect(),
                vec![qi(1); 3],
                qi(0),
            ).unwrap();
            let r: Vec<Rational> = rents.iter().map(|&x| qi(x)).collect();
            let mut lower = r.clone();
            lower[room] = &lower[room] - qi(drop);
            let before = budget_sets(&e, &r).strict;
            let after = budget_sets(&e, &lower).strict;
            prop_assert!(after.is_subset(&before));
        }

        #[test]
        fn own_room_tie_edges_when_envy_free(x in 0i64..=30) {
            // E1's envy-free interval at total 100 is r_a in [55, 70].
            let e = e1();
            let z = Allocation::new(vec![0, 1], vec![qi(55 + x / 2), qi(45 - x / 2)]);
            let t = tie_graph(&e, &z).unwrap();
            prop_assert!(t.weights[0][0].is_some() && t.weights[1][1].is_some());
        }
    }
}
