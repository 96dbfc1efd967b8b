//! Exact two-phase simplex over [`Rational`].
//!
//! All variables are free. Pivoting follows Bland's rule, so identical
//! programs always produce identical vertices. An optional secondary
//! objective is optimized over the face of primary optima.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope;
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

/// Sparse linear expression as `(variable, coefficient)` pairs.
pub type Expr = Vec<(usize, Rational)>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub expr: Expr,
    pub relation: Relation,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub variables: Vec<String>,
    pub sense: Sense,
    pub objective: Expr,
    pub secondary: Option<(Sense, Expr)>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpSolution {
    Optimal { point: Vec<Rational>, value: Rational },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpSolution {
    pub fn status(&self) -> LpStatus {
        match self {
            LpSolution::Optimal { .. } => LpStatus::Optimal,
            LpSolution::Infeasible => LpStatus::Infeasible,
            LpSolution::Unbounded => LpStatus::Unbounded,
        }
    }

    pub fn optimal(self) -> Option<(Vec<Rational>, Rational)> {
        match self {
            LpSolution::Optimal { point, value } => Some((point, value)),
            _ => None,
        }
    }
}

pub fn eval_expr(expr: &Expr, point: &[Rational]) -> Rational {
    expr.iter().map(|(v, c)| c * &point[*v]).sum()
}

impl Constraint {
    pub fn holds_at(&self, point: &[Rational]) -> bool {
        let lhs = eval_expr(&self.expr, point);
        match self.relation {
            Relation::Le => lhs <= self.rhs,
            Relation::Ge => lhs >= self.rhs,
            Relation::Eq => lhs == self.rhs,
        }
    }
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram { variables: Vec::new(), sense, objective: Vec::new(), secondary: None, constraints: Vec::new() }
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.variables.push(name.into());
        self.variables.len() - 1
    }

    pub fn set_objective(&mut self, expr: Expr) {
        self.objective = expr;
    }

    pub fn set_secondary(&mut self, sense: Sense, expr: Expr) {
        self.secondary = Some((sense, expr));
    }

    pub fn add(&mut self, expr: Expr, relation: Relation, rhs: Rational) {
        self.constraints.push(Constraint { expr, relation, rhs });
    }

    pub fn le(&mut self, expr: Expr, rhs: Rational) {
        self.add(expr, Relation::Le, rhs);
    }

    pub fn ge(&mut self, expr: Expr, rhs: Rational) {
        self.add(expr, Relation::Ge, rhs);
    }

    pub fn equal(&mut self, expr: Expr, rhs: Rational) {
        self.add(expr, Relation::Eq, rhs);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.variables.len();
        let check = |e: &Expr, what: &str| -> Result<()> {
            if let Some((v, _)) = e.iter().find(|(v, _)| *v >= n) {
                return Err(Error::MalformedLp(format!("{what} references undeclared variable {v}")));
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        if let Some((_, e)) = &self.secondary {
            check(e, "secondary objective")?;
        }
        for (k, c) in self.constraints.iter().enumerate() {
            check(&c.expr, &format!("constraint {k}"))?;
        }
        Ok(())
    }

    pub fn is_feasible_point(&self, point: &[Rational]) -> bool {
        point.len() == self.variables.len() && self.constraints.iter().all(|c| c.holds_at(point))
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, expr: &Expr, names: &[String]) -> fmt::Result {
    if expr.is_empty() {
        return f.write_str("0");
    }
    for (k, (v, c)) in expr.iter().enumerate() {
        let neg = c.is_negative();
        let mag = c.abs();
        match (k, neg) {
            (0, true) => f.write_str("- ")?,
            (0, false) => {}
            (_, true) => f.write_str(" - ")?,
            (_, false) => f.write_str(" + ")?,
        }
        if mag != Rational::one() {
            write!(f, "{} ", mag)?;
        }
        f.write_str(&names[*v])?;
    }
    Ok(())
}

/// Textual dump in an LP-file-like format with exact `p/q` coefficients.
impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sense = |s: Sense| if s == Sense::Maximize { "maximize" } else { "minimize" };
        writeln!(f, "{}", sense(self.sense))?;
        f.write_str("  obj: ")?;
        write_expr(f, &self.objective, &self.variables)?;
        writeln!(f)?;
        if let Some((s, e)) = &self.secondary {
            writeln!(f, "then {}", sense(*s))?;
            f.write_str("  obj2: ")?;
            write_expr(f, e, &self.variables)?;
            writeln!(f)?;
        }
        writeln!(f, "subject to")?;
        for (k, c) in self.constraints.iter().enumerate() {
            write!(f, "  c{}: ", k)?;
            write_expr(f, &c.expr, &self.variables)?;
            writeln!(f, " {} {}", c.relation, c.rhs)?;
        }
        writeln!(f, "free")?;
        writeln!(f, "  {}", self.variables.join(" "))?;
        write!(f, "end")
    }
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    ncols: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, r: usize) -> &Rational {
        &self.rows[r][self.ncols]
    }

    fn pivot(&mut self, pr: usize, pc: usize, objs: &mut [Vec<Rational>]) {
        let inv = self.rows[pr][pc].recip();
        for x in self.rows[pr].iter_mut() {
            if !x.is_zero() {
                *x = &*x * &inv;
            }
        }
        let pivot_row = self.rows[pr].clone();
        let reduce = |row: &mut Vec<Rational>| {
            let factor = row[pc].clone();
            if factor.is_zero() {
                return;
            }
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *x = &*x - &factor * p;
                }
            }
        };
        for (r, row) in self.rows.iter_mut().enumerate() {
            if r != pr {
                reduce(row);
            }
        }
        for row in objs.iter_mut() {
            reduce(row);
        }
        self.basis[pr] = pc;
    }

    /// Reduced-cost row (`c_j - z_j`, last entry `-value`) of a maximization objective.
    fn objective_row(&self, cost: &[Rational]) -> Vec<Rational> {
        let mut row: Vec<Rational> = cost.to_vec();
        row.push(Rational::zero());
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (x, a) in row.iter_mut().zip(&self.rows[r]) {
                if !a.is_zero() {
                    *x = &*x - cb * a;
                }
            }
        }
        row
    }

    /// Runs Bland's rule on `objs[0]`; `allowed` filters entering columns.
    fn optimize(&mut self, objs: &mut [Vec<Rational>], allowed: &[bool]) -> Step {
        loop {
            let entering = (0..self.ncols).find(|&j| allowed[j] && objs[0][j].is_positive());
            let Some(pc) = entering else { return Step::Optimal };
            let mut best: Option<(usize, Rational)> = None;
            for r in 0..self.rows.len() {
                let a = &self.rows[r][pc];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(r) / a;
                let better = match &best {
                    None => true,
                    Some((br, bv)) => ratio < *bv || (ratio == *bv && self.basis[r] < self.basis[*br]),
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            let Some((pr, _)) = best else { return Step::Unbounded };
            self.pivot(pr, pc, objs);
        }
    }
}

fn to_max_cost(sense: Sense, expr: &Expr, nvars: usize, ncols: usize) -> Vec<Rational> {
    let mut cost = vec![Rational::zero(); ncols];
    for (v, c) in expr {
        let c = if sense == Sense::Maximize { c.clone() } else { -c };
        cost[2 * v] = &cost[2 * v] + &c;
        cost[2 * v + 1] = &cost[2 * v + 1] - &c;
    }
    debug_assert!(2 * nvars <= ncols);
    cost
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let nv = lp.variables.len();
    let m = lp.constraints.len();
    // Columns: x+ / x- pairs, then one slack per inequality, then artificials.
    let n_slack = lp.constraints.iter().filter(|c| c.relation != Relation::Eq).count();
    let mut needs_art = Vec::with_capacity(m);
    let mut normalized = Vec::with_capacity(m);
    for c in &lp.constraints {
        let neg = c.rhs.is_negative();
        let relation = match (c.relation, neg) {
            (Relation::Le, true) => Relation::Ge,
            (Relation::Ge, true) => Relation::Le,
            (r, _) => r,
        };
        normalized.push((neg, relation));
        needs_art.push(relation != Relation::Le);
    }
    let n_art = needs_art.iter().filter(|&&b| b).count();
    let art_start = 2 * nv + n_slack;
    let ncols = art_start + n_art;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut slack = 2 * nv;
    let mut art = art_start;
    for (c, &(neg, relation)) in lp.constraints.iter().zip(&normalized) {
        let mut row = vec![Rational::zero(); ncols + 1];
        for (v, coef) in &c.expr {
            let coef = if neg { -coef } else { coef.clone() };
            row[2 * v] = &row[2 * v] + &coef;
            row[2 * v + 1] = &row[2 * v + 1] - &coef;
        }
        row[ncols] = c.rhs.abs();
        match c.relation {
            Relation::Eq => {}
            _ => {
                row[slack] = if relation == Relation::Le { Rational::one() } else { -Rational::one() };
                if relation == Relation::Le {
                    basis.push(slack);
                }
                slack += 1;
            }
        }
        if relation != Relation::Le {
            row[art] = Rational::one();
            basis.push(art);
            art += 1;
        }
        rows.push(row);
    }
    let mut tab = Tableau { rows, basis, ncols };

    if n_art > 0 {
        let mut cost = vec![Rational::zero(); ncols];
        for c in cost.iter_mut().skip(art_start) {
            *c = -Rational::one();
        }
        let mut objs = vec![tab.objective_row(&cost)];
        let allowed = vec![true; ncols];
        if let Step::Unbounded = tab.optimize(&mut objs, &allowed) {
            return Err(Error::Internal("phase one reported unbounded".into()));
        }
        if !objs[0][ncols].is_zero() {
            return Ok(LpSolution::Infeasible);
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= art_start {
                match (0..art_start).find(|&j| !tab.rows[r][j].is_zero()) {
                    Some(j) => {
                        tab.pivot(r, j, &mut []);
                        r += 1;
                    }
                    None => {
                        tab.rows.remove(r);
                        tab.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    let mut allowed: Vec<bool> = (0..ncols).map(|j| j < art_start).collect();
    let cost = to_max_cost(lp.sense, &lp.objective, nv, ncols);
    let mut objs = vec![tab.objective_row(&cost)];
    if let Step::Unbounded = tab.optimize(&mut objs, &allowed) {
        return Ok(LpSolution::Unbounded);
    }
    if let Some((sense, expr)) = &lp.secondary {
        for (j, ok) in allowed.iter_mut().enumerate() {
            if !objs[0][j].is_zero() {
                *ok = false;
            }
        }
        let cost2 = to_max_cost(*sense, expr, nv, ncols);
        let mut objs2 = vec![tab.objective_row(&cost2)];
        if let Step::Unbounded = tab.optimize(&mut objs2, &allowed) {
            return Ok(LpSolution::Unbounded);
        }
    }

    let mut cols = vec![Rational::zero(); ncols];
    for (r, &b) in tab.basis.iter().enumerate() {
        cols[b] = tab.rhs(r).clone();
    }
    let point: Vec<Rational> = (0..nv).map(|v| &cols[2 * v] - &cols[2 * v + 1]).collect();
    if !lp.is_feasible_point(&point) {
        return Err(Error::Internal("simplex returned an infeasible point".into()));
    }
    let value = eval_expr(&lp.objective, &point);
    Ok(LpSolution::Optimal { point, value })
}

/// Independent optimum by enumerating vertices; for tiny bounded programs only.
pub fn solve_by_vertex_enumeration(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let nv = lp.variables.len();
    if nv > 4 {
        return Err(Error::TooLarge(format!("{nv} variables")));
    }
    let rows: Vec<(Vec<Rational>, Relation, Rational)> = lp
        .constraints
        .iter()
        .map(|c| {
            let mut dense = vec![Rational::zero(); nv];
            for (v, coef) in &c.expr {
                dense[*v] = &dense[*v] + coef;
            }
            (dense, c.relation, c.rhs.clone())
        })
        .collect();
    let vertices = polytope::vertices(nv, &rows);
    let better = |a: &Rational, b: &Rational| if lp.sense == Sense::Maximize { a > b } else { a < b };
    let mut best: Option<(Vec<Rational>, Rational)> = None;
    for v in vertices {
        let val = eval_expr(&lp.objective, &v);
        if best.as_ref().is_none_or(|(_, bv)| better(&val, bv)) {
            best = Some((v, val));
        }
    }
    Ok(match best {
        Some((point, value)) => LpSolution::Optimal { point, value },
        None => LpSolution::Infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use proptest::prelude::*;

    #[test]
    fn tiny_programs() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var("x");
        lp.set_objective(vec![(x, qi(1))]);
        lp.le(vec![(x, qi(1))], qi(3));
        assert_eq!(solve_lp(&lp).unwrap(), LpSolution::Optimal { point: vec![qi(3)], value: qi(3) });

        lp.constraints.clear();
        lp.le(vec![(x, qi(1))], qi(1));
        lp.ge(vec![(x, qi(1))], qi(2));
        assert_eq!(solve_lp(&lp).unwrap(), LpSolution::Infeasible);

        lp.constraints.clear();
        lp.ge(vec![(x, qi(1))], qi(2));
        assert_eq!(solve_lp(&lp).unwrap(), LpSolution::Unbounded);
    }

    fn initial_lp() -> LinearProgram {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let r = lp.add_var("R");
        let a = lp.add_var("r_a");
        let b = lp.add_var("r_b");
        lp.set_objective(vec![(r, qi(1))]);
        lp.le(vec![(r, qi(1)), (a, qi(2))], qi(160));
        lp.le(vec![(r, qi(1)), (b, qi(1))], qi(70));
        lp.ge(vec![(a, qi(1)), (b, qi(-1))], qi(10));
        lp.le(vec![(a, qi(1)), (b, qi(-1))], qi(20));
        lp.equal(vec![(a, qi(1)), (b, qi(1))], qi(160));
        lp
    }

    #[test]
    fn initial_program_of_the_budget_example() {
        let lp = initial_lp();
        let expected = LpSolution::Optimal { point: vec![qi(-10), qi(85), qi(75)], value: qi(-10) };
        assert_eq!(solve_lp(&lp).unwrap(), expected);
        assert_eq!(solve_by_vertex_enumeration(&lp).unwrap(), expected);
    }

    #[test]
    fn secondary_objective_selects_within_optimal_face() {
        // max R with R <= 10 leaves t free on [0, 5]; then minimize t.
        let mut lp = LinearProgram::new(Sense::Maximize);
        let r = lp.add_var("R");
        let t = lp.add_var("t");
        lp.set_objective(vec![(r, qi(1))]);
        lp.le(vec![(r, qi(1))], qi(10));
        lp.ge(vec![(t, qi(1))], qi(0));
        lp.le(vec![(t, qi(1))], qi(5));
        lp.set_secondary(Sense::Minimize, vec![(t, qi(1))]);
        assert_eq!(solve_lp(&lp).unwrap().optimal().unwrap().0, vec![qi(10), qi(0)]);
        lp.set_secondary(Sense::Maximize, vec![(t, qi(1))]);
        assert_eq!(solve_lp(&lp).unwrap().optimal().unwrap().0, vec![qi(10), qi(5)]);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var("x");
        let y = lp.add_var("y");
        lp.set_objective(vec![(x, qi(1)), (y, qi(2))]);
        lp.equal(vec![(x, qi(1)), (y, qi(1))], qi(4));
        lp.equal(vec![(x, qi(2)), (y, qi(2))], qi(8));
        lp.ge(vec![(x, qi(1))], q(-1, 2));
        lp.le(vec![(x, qi(1))], qi(3));
        let (p, v) = solve_lp(&lp).unwrap().optimal().unwrap();
        assert_eq!(p, vec![qi(3), qi(1)]);
        assert_eq!(v, qi(5));
    }

    #[test]
    fn malformed_program_rejected() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        lp.add_var("x");
        lp.le(vec![(3, qi(1))], qi(1));
        assert!(matches!(solve_lp(&lp), Err(Error::MalformedLp(_))));
    }

    #[test]
    fn display_dump() {
        let text = initial_lp().to_string();
        assert!(text.starts_with("maximize\n  obj: R\nsubject to\n"));
        assert!(text.contains("c0: R + 2 r_a <= 160"));
        assert!(text.contains("c4: r_a + r_b = 160"));
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var("x");
        lp.le(vec![(x, q(-1, 3))], q(2, 7));
        assert!(lp.to_string().contains("c0: - 1/3 x <= 2/7"));
    }

    fn arb_program(nv: usize) -> impl Strategy<Value = LinearProgram> {
        let coef = -5i64..=5;
        let row = (proptest::collection::vec(coef.clone(), nv), 0u8..3, -20i64..=20);
        (
            proptest::collection::vec(coef, nv),
            proptest::collection::vec(row, 0..5),
            any::<bool>(),
        )
            .prop_map(move |(obj, rows, maximize)| {
                let mut lp = LinearProgram::new(if maximize { Sense::Maximize } else { Sense::Minimize });
                for k in 0..nv {
                    lp.add_var(format!("x{k}"));
                }
                lp.set_objective(obj.iter().enumerate().map(|(v, &c)| (v, qi(c))).collect());
                for v in 0..nv {
                    lp.le(vec![(v, qi(1))], qi(10));
                    lp.ge(vec![(v, qi(1))], qi(-10));
                }
                for (coefs, rel, rhs) in rows {
                    let rel = [Relation::Le, Relation::Ge, Relation::Eq][rel as usize];
                    lp.add(coefs.iter().enumerate().map(|(v, &c)| (v, qi(c))).collect(), rel, qi(rhs));
                }
                lp
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn agrees_with_vertex_enumeration(lp in (1usize..=3).prop_flat_map(arb_program)) {
            let simplex = solve_lp(&lp).unwrap();
            let oracle = solve_by_vertex_enumeration(&lp).unwrap();
            match (&simplex, &oracle) {
                (LpSolution::Optimal { point, value }, LpSolution::Optimal { value: v2, .. }) => {
                    prop_assert_eq!(value, v2);
                    prop_assert!(lp.is_feasible_point(point));
                }
                (LpSolution::Infeasible, LpSolution::Infeasible) => {}
                other => prop_assert!(false, "mismatch: {:?}", other),
            }
        }

        #[test]
        fn deterministic(lp in arb_program(3)) {
            prop_assert_eq!(solve_lp(&lp).unwrap(), solve_lp(&lp).unwrap());
        }
    }
}
