//! Exact vertex enumeration for small polyhedra.

use itertools::Itertools;

use crate::lp::Relation;
use crate::rational::Rational;

/// Solves a square system; `None` when singular.
pub fn solve_square(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].recip();
        for x in a[col].iter_mut() {
            *x = &*x * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in 0..n {
                let delta = &f * &a[col][c];
                a[r][c] = &a[r][c] - &delta;
            }
            let delta = &f * &b[col];
            b[r] = &b[r] - &delta;
        }
    }
    Some(b)
}

fn satisfies(row: &(Vec<Rational>, Relation, Rational), x: &[Rational]) -> bool {
    let lhs: Rational = row.0.iter().zip(x).map(|(a, v)| a * v).sum();
    match row.1 {
        Relation::Le => lhs <= row.2,
        Relation::Ge => lhs >= row.2,
        Relation::Eq => lhs == row.2,
    }
}

/// All vertices of `{x in R^dim : rows}` in a deterministic order. A
/// polyhedron without vertices (empty, or containing a line) yields none.
pub fn vertices(dim: usize, rows: &[(Vec<Rational>, Relation, Rational)]) -> Vec<Vec<Rational>> {
    let mut out: Vec<Vec<Rational>> = Vec::new();
    if dim == 0 {
        if rows.iter().all(|r| satisfies(r, &[])) {
            out.push(Vec::new());
        }
        return out;
    }
    for combo in (0..rows.len()).combinations(dim) {
        let a = combo.iter().map(|&k| rows[k].0.clone()).collect();
        let b = combo.iter().map(|&k| rows[k].2.clone()).collect();
        if let Some(x) = solve_square(a, b) {
            if rows.iter().all(|r| satisfies(r, &x)) && !out.contains(&x) {
                out.push(x);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;

    #[test]
    fn unit_square() {
        let rows = vec![
            (vec![qi(1), qi(0)], Relation::Ge, qi(0)),
            (vec![qi(1), qi(0)], Relation::Le, qi(1)),
            (vec![qi(0), qi(1)], Relation::Ge, qi(0)),
            (vec![qi(0), qi(1)], Relation::Le, qi(1)),
        ];
        let v = vertices(2, &rows);
        assert_eq!(v.len(), 4);
        assert!(v.contains(&vec![qi(1), qi(1)]));
    }

    #[test]
    fn segment_on_a_line() {
        let rows = vec![
            (vec![qi(1), qi(1)], Relation::Eq, qi(100)),
            (vec![qi(1), qi(-1)], Relation::Ge, qi(10)),
            (vec![qi(1), qi(-1)], Relation::Le, qi(40)),
        ];
        let mut v = vertices(2, &rows);
        v.sort();
        assert_eq!(v, vec![vec![qi(55), qi(45)], vec![qi(70), qi(30)]]);
    }

    #[test]
    fn singular_system() {
        assert!(solve_square(vec![vec![qi(1), qi(1)], vec![qi(2), qi(2)]], vec![qi(1), qi(2)]).is_none());
    }
}
