//! Exact maximum-weight perfect matchings.
//!
//! One Hungarian implementation serves both the additive assignment problem
//! and the multiplicative tie-graph problem: it only needs an ordered abelian
//! group. Missing edges are forbidden outright. Among optimal matchings the
//! lexicographically smallest room vector (in agent order) is returned.

use std::cmp::Ordering;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TieGraph;
use crate::rational::Rational;

/// An ordered abelian group written multiplicatively as `op` / `inv`.
pub trait GroupWeight: Clone + Ord {
    fn identity() -> Self;
    fn op(&self, other: &Self) -> Self;
    fn inv(&self) -> Self;

    fn minus(&self, other: &Self) -> Self {
        self.op(&other.inv())
    }
}

/// `(Q, +)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Additive(pub Rational);

impl GroupWeight for Additive {
    fn identity() -> Self {
        Additive(Rational::zero())
    }
    fn op(&self, other: &Self) -> Self {
        Additive(&self.0 + &other.0)
    }
    fn inv(&self) -> Self {
        Additive(-&self.0)
    }
}

/// `(Q_{>0}, *)`, ordered as rationals.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Multiplicative(pub Rational);

impl GroupWeight for Multiplicative {
    fn identity() -> Self {
        Multiplicative(Rational::one())
    }
    fn op(&self, other: &Self) -> Self {
        Multiplicative(&self.0 * &other.0)
    }
    fn inv(&self) -> Self {
        Multiplicative(self.0.recip())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    /// `assignment[i]` is agent `i`'s room.
    pub assignment: Vec<usize>,
    pub weight: Rational,
}

fn min_opt<W: GroupWeight>(a: &Option<W>, b: &Option<W>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Greater,
        (Some(_), None) => Ordering::Less,
        (Some(x), Some(y)) => x.cmp(y),
    }
}

/// Minimum-cost perfect matching on a square matrix with forbidden cells.
fn hungarian_min<W: GroupWeight>(cost: &[Vec<Option<W>>]) -> Option<Vec<usize>> {
    let n = cost.len();
    // 1-based potentials and matches, as in the classic shortest-augmenting-path form.
    let mut u = vec![W::identity(); n + 1];
    let mut v = vec![W::identity(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv: Vec<Option<W>> = vec![None; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta: Option<W> = None;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                if let Some(c) = &cost[i0 - 1][j - 1] {
                    let cur = c.minus(&u[i0]).minus(&v[j]);
                    if min_opt(&Some(cur.clone()), &minv[j]) == Ordering::Less {
                        minv[j] = Some(cur);
                        way[j] = j0;
                    }
                }
                if min_opt(&minv[j], &delta) == Ordering::Less {
                    delta = minv[j].clone();
                    j1 = j;
                }
            }
            let delta = delta?;
            for j in 0..=n {
                if used[j] {
                    u[p[j]] = u[p[j]].op(&delta);
                    v[j] = v[j].minus(&delta);
                } else if let Some(m) = &minv[j] {
                    minv[j] = Some(m.minus(&delta));
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    Some(assignment)
}

fn total<W: GroupWeight>(w: &[Vec<Option<W>>], assignment: &[usize]) -> W {
    assignment
        .iter()
        .enumerate()
        .fold(W::identity(), |acc, (i, &a)| acc.op(w[i][a].as_ref().expect("matching uses a forbidden edge")))
}

/// Maximum-weight perfect matching with the lexicographic tie-break.
pub fn max_weight_matching<W: GroupWeight>(w: &[Vec<Option<W>>]) -> Result<(Vec<usize>, W)> {
    let n = w.len();
    if w.iter().any(|row| row.len() != n) {
        return Err(Error::Precondition("weight matrix is not square".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), W::identity()));
    }
    let cost = |w: &[Vec<Option<W>>]| -> Vec<Vec<Option<W>>> {
        w.iter().map(|row| row.iter().map(|c| c.as_ref().map(|x| x.inv())).collect()).collect()
    };
    let first = hungarian_min(&cost(w)).ok_or(Error::NoPerfectMatching)?;
    let best = total(w, &first);
    let mut fixed = w.to_vec();
    let mut chosen = vec![usize::MAX; n];
    for i in 0..n {
        for a in 0..n {
            if fixed[i][a].is_none() {
                continue;
            }
            let mut trial = fixed.clone();
            for b in 0..n {
                if b != a {
                    trial[i][b] = None;
                }
            }
            for (k, row) in trial.iter_mut().enumerate() {
                if k != i {
                    row[a] = None;
                }
            }
            if let Some(m) = hungarian_min(&cost(&trial)) {
                if total(&trial, &m) == best {
                    chosen[i] = a;
                    fixed = trial;
                    break;
                }
            }
        }
        if chosen[i] == usize::MAX {
            return Err(Error::Internal("lexicographic refinement lost the optimum".into()));
        }
    }
    Ok((chosen, best))
}

pub fn max_sum_assignment(values: &[Vec<Rational>]) -> Result<Matching> {
    let w: Vec<Vec<Option<Additive>>> =
        values.iter().map(|row| row.iter().map(|v| Some(Additive(v.clone()))).collect()).collect();
    let (assignment, weight) = max_weight_matching(&w)?;
    Ok(Matching { assignment, weight: weight.0 })
}

/// Perfect matching inside the tie graph maximizing the product of slopes.
pub fn max_tie_matching(g: &TieGraph) -> Result<Matching> {
    let w: Vec<Vec<Option<Multiplicative>>> =
        g.weights.iter().map(|row| row.iter().map(|c| c.clone().map(Multiplicative)).collect()).collect();
    let (assignment, weight) = max_weight_matching(&w)?;
    Ok(Matching { assignment, weight: weight.0 })
}

/// Perfect matching inside the tie graph minimizing the product of slopes.
pub fn min_tie_matching(g: &TieGraph) -> Result<Matching> {
    let w: Vec<Vec<Option<Multiplicative>>> = g
        .weights
        .iter()
        .map(|row| row.iter().map(|c| c.as_ref().map(|x| Multiplicative(x.recip()))).collect())
        .collect();
    let (assignment, weight) = max_weight_matching(&w)?;
    Ok(Matching { assignment, weight: weight.0.recip() })
}

/// Weight of a given perfect matching in the tie graph, if all its edges are ties.
pub fn tie_weight(g: &TieGraph, assignment: &[usize]) -> Option<Rational> {
    let mut w = Rational::one();
    for (i, &a) in assignment.iter().enumerate() {
        w *= g.weights[i][a].as_ref()?;
    }
    Some(w)
}

/// Every perfect matching (as room vectors) using only permitted cells.
pub fn all_perfect_matchings<T>(w: &[Vec<Option<T>>]) -> Vec<Vec<usize>> {
    let n = w.len();
    (0..n)
        .permutations(n)
        .filter(|perm| perm.iter().enumerate().all(|(i, &a)| w[i][a].is_some()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;
    use proptest::prelude::*;

    fn m(rows: &[&[i64]]) -> Vec<Vec<Rational>> {
        rows.iter().map(|r| r.iter().map(|&x| qi(x)).collect()).collect()
    }

    #[test]
    fn additive_examples() {
        let r = max_sum_assignment(&m(&[&[80, 60], &[80, 70]])).unwrap();
        assert_eq!(r, Matching { assignment: vec![0, 1], weight: qi(150) });
        let r = max_sum_assignment(&m(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]])).unwrap();
        assert_eq!(r.assignment, vec![0, 1, 2]);
        let r = max_sum_assignment(&m(&[&[7, 7, 7], &[7, 7, 7], &[7, 7, 7]])).unwrap();
        assert_eq!(r.assignment, vec![0, 1, 2]);
        let r = max_sum_assignment(&m(&[&[0, 5, 5], &[5, 0, 5], &[5, 5, 0]])).unwrap();
        assert_eq!(r.assignment, vec![1, 2, 0]);
    }

    #[test]
    fn tie_examples() {
        let g = TieGraph { weights: vec![vec![Some(qi(2)), None], vec![Some(qi(1)), Some(qi(1))]] };
        assert_eq!(max_tie_matching(&g).unwrap(), Matching { assignment: vec![0, 1], weight: qi(2) });

        let g = TieGraph { weights: vec![vec![Some(qi(3)), None], vec![None, Some(qi(1))]] };
        assert_eq!(max_tie_matching(&g).unwrap().assignment, vec![0, 1]);

        // Identity has weight 2*1*1; the rotation 0->1, 1->2, 2->0 has 1*2*2.
        let g = TieGraph {
            weights: vec![
                vec![Some(qi(2)), Some(qi(1)), None],
                vec![None, Some(qi(1)), Some(qi(2))],
                vec![Some(qi(2)), None, Some(qi(1))],
            ],
        };
        assert_eq!(max_tie_matching(&g).unwrap(), Matching { assignment: vec![1, 2, 0], weight: qi(4) });
        assert_eq!(min_tie_matching(&g).unwrap(), Matching { assignment: vec![0, 1, 2], weight: qi(2) });

        let g = TieGraph { weights: vec![vec![Some(qi(1)), None], vec![Some(qi(1)), None]] };
        assert_eq!(max_tie_matching(&g), Err(Error::NoPerfectMatching));
    }

    #[test]
    fn non_square_rejected() {
        assert!(max_sum_assignment(&m(&[&[1, 2]])).is_err());
    }

    fn brute<W: GroupWeight>(w: &[Vec<Option<W>>]) -> Option<(Vec<usize>, W)> {
        let mut best: Option<(Vec<usize>, W)> = None;
        for perm in all_perfect_matchings(w) {
            let t = total(w, &perm);
            if best.as_ref().is_none_or(|(_, b)| t > *b) {
                best = Some((perm, t));
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn additive_matches_brute_force(n in 1usize..=5, cells in proptest::collection::vec(-3i64..=3, 25)) {
            let w: Vec<Vec<Option<Additive>>> = (0..n)
                .map(|i| (0..n).map(|a| Some(Additive(qi(cells[i * 5 + a])))).collect())
                .collect();
            let (assign, weight) = max_weight_matching(&w).unwrap();
            let (bassign, bweight) = brute(&w).unwrap();
            prop_assert_eq!(weight, bweight);
            // Brute force scans permutations in lexicographic order and keeps the first maximum.
            prop_assert_eq!(assign, bassign);
        }

        #[test]
        fn multiplicative_matches_brute_force(n in 1usize..=5, cells in proptest::collection::vec(0u8..4, 25)) {
            let slopes = [None, Some(qi(1)), Some(qi(2)), Some(qi(3))];
            let w: Vec<Vec<Option<Multiplicative>>> = (0..n)
                .map(|i| (0..n).map(|a| slopes[cells[i * 5 + a] as usize].clone().map(Multiplicative)).collect())
                .collect();
            match (max_weight_matching(&w), brute(&w)) {
                (Ok((assign, weight)), Some((bassign, bweight))) => {
                    prop_assert_eq!(weight, bweight);
                    prop_assert_eq!(assign, bassign);
                }
                (Err(Error::NoPerfectMatching), None) => {}
                (a, b) => prop_assert!(false, "mismatch {:?} vs {:?}", a.map(|x| x.0), b.map(|x| x.0)),
            }
        }
    }
}
