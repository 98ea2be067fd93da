//! Brute-force oracles shared by the integration tests. None of these call
//! into the library's solver or enumeration code.
#![allow(dead_code)]

use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

/// One linear row `a . x (rel) b`.
#[derive(Debug, Clone)]
pub struct Row {
    pub a: Vec<f64>,
    pub rel: Rel,
    pub b: f64,
}

pub fn row(a: Vec<f64>, rel: Rel, b: f64) -> Row {
    Row { a, rel, b }
}

/// Solves the square system `m x = rhs` by Gaussian elimination with
/// partial pivoting. `None` if singular.
pub fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for c in col..n {
                        m[r][c] -= f * m[col][c];
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

fn satisfied(r: &Row, x: &[f64], tol: f64) -> bool {
    let lhs: f64 = r.a.iter().zip(x).map(|(a, x)| a * x).sum();
    let scale = 1.0 + r.b.abs();
    match r.rel {
        Rel::Le => lhs <= r.b + tol * scale,
        Rel::Ge => lhs >= r.b - tol * scale,
        Rel::Eq => (lhs - r.b).abs() <= tol * scale,
    }
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    go(0, n, k, &mut Vec::with_capacity(k), &mut f);
}

/// Minimum of `c . x` over `{x >= 0 : rows}` by enumerating basic points:
/// every choice of `n` tight constraints (rows or `x_i = 0`). Valid when the
/// objective is bounded below on a nonempty feasible set, which is then
/// attained at a vertex. Returns the value and a minimizer, `None` if no
/// vertex is feasible.
pub fn vertex_min(c: &[f64], rows: &[Row]) -> Option<(f64, Vec<f64>)> {
    let n = c.len();
    let mut all: Vec<Vec<f64>> = rows.iter().map(|r| r.a.clone()).collect();
    let mut rhs: Vec<f64> = rows.iter().map(|r| r.b).collect();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        all.push(e);
        rhs.push(0.0);
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(all.len(), n, |pick| {
        let m = pick.iter().map(|&i| all[i].clone()).collect();
        let b = pick.iter().map(|&i| rhs[i]).collect();
        if let Some(x) = solve_square(m, b) {
            if x.iter().all(|&v| v >= -1e-9) && rows.iter().all(|r| satisfied(r, &x, 1e-9)) {
                let val: f64 = c.iter().zip(&x).map(|(c, x)| c * x).sum();
                if best.as_ref().is_none_or(|(b, _)| val < *b) {
                    best = Some((val, x));
                }
            }
        }
    });
    best
}

/// All maximal independent subsets of `subset` in the conflict graph given
/// by `conflicts[a][b]`, by scanning every bit mask. Each set is ascending;
/// the list is sorted.
pub fn brute_maximal_sets(conflicts: &[Vec<bool>], subset: &[usize]) -> Vec<Vec<usize>> {
    let k = subset.len();
    let independent = |mask: u32| {
        (0..k).all(|i| {
            (i + 1..k).all(|j| mask & (1 << i) == 0 || mask & (1 << j) == 0 || !conflicts[subset[i]][subset[j]])
        })
    };
    let mut out = Vec::new();
    for mask in 0u32..(1 << k) {
        if !independent(mask) {
            continue;
        }
        let maximal = (0..k).all(|i| mask & (1 << i) != 0 || !independent(mask | (1 << i)));
        if maximal {
            out.push((0..k).filter(|i| mask & (1 << i) != 0).map(|i| subset[i]).collect());
        }
    }
    out.sort();
    out
}

/// Exhaustive maximizer of `sum_l q_l r_l - u_l p_l` over every per-link
/// level choice with a conflict-free support. Ties go to the
/// lexicographically smallest power vector.
pub fn brute_maxweight(
    conflicts: &[Vec<bool>],
    levels: &[Vec<f64>],
    rates: &[Vec<f64>],
    q: &[f64],
    u: &[f64],
) -> (f64, Vec<f64>) {
    let n = levels.len();
    let mut idx = vec![0usize; n];
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let active: Vec<usize> = (0..n).filter(|&l| idx[l] > 0).collect();
        let ok = active
            .iter()
            .all(|&a| active.iter().all(|&b| a == b || !conflicts[a][b]));
        if ok {
            let power: Vec<f64> = (0..n).map(|l| levels[l][idx[l]]).collect();
            let val: f64 = (0..n).map(|l| q[l] * rates[l][idx[l]] - u[l] * levels[l][idx[l]]).sum();
            let better = match &best {
                None => true,
                Some((b, p)) => val > *b || (val == *b && power.iter().zip(p).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)),
            };
            if better {
                best = Some((val, power));
            }
        }
        let mut l = 0;
        loop {
            if l == n {
                return best.expect("the idle vector is always feasible");
            }
            idx[l] += 1;
            if idx[l] < levels[l].len() {
                break;
            }
            idx[l] = 0;
            l += 1;
        }
    }
}

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}
