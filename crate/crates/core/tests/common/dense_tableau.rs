//! Textbook two-phase dense tableau simplex with Bland's rule.
//!
//! Independent of the library's revised simplex: it converts the problem to
//! standard form `min c z, A z = b, z >= 0, b >= 0`, adds one artificial per
//! row and pivots on a full dense tableau.

use cep_eens::lp::{LpProblem, Sense};

#[derive(Debug, Clone, PartialEq)]
pub enum TableauResult {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-9;

enum Map {
    Shift(usize, f64),
    Reflect(usize, f64),
    Split(usize, usize),
}

pub fn solve_dense(problem: &LpProblem) -> TableauResult {
    let mut maps = Vec::new();
    let mut ncols = 0usize;
    let mut extra_rows: Vec<(usize, f64)> = Vec::new();
    for v in &problem.vars {
        if v.lower.is_finite() {
            maps.push(Map::Shift(ncols, v.lower));
            if v.upper.is_finite() {
                extra_rows.push((ncols, v.upper - v.lower));
            }
            ncols += 1;
        } else if v.upper.is_finite() {
            maps.push(Map::Reflect(ncols, v.upper));
            ncols += 1;
        } else {
            maps.push(Map::Split(ncols, ncols + 1));
            ncols += 2;
        }
    }

    // rows as (dense coeffs over structural z, sense, rhs)
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for row in &problem.rows {
        let mut a = vec![0.0; ncols];
        let mut rhs = row.rhs;
        for (v, c) in &row.terms {
            match maps[v.0] {
                Map::Shift(k, lo) => {
                    a[k] += c;
                    rhs -= c * lo;
                }
                Map::Reflect(k, hi) => {
                    a[k] -= c;
                    rhs -= c * hi;
                }
                Map::Split(p, q) => {
                    a[p] += c;
                    a[q] -= c;
                }
            }
        }
        rows.push((a, row.sense, rhs));
    }
    for (k, span) in &extra_rows {
        let mut a = vec![0.0; ncols];
        a[*k] = 1.0;
        rows.push((a, Sense::Le, *span));
    }

    let mut cost = vec![0.0; ncols];
    let mut constant = 0.0;
    for (v, m) in problem.vars.iter().zip(&maps) {
        match *m {
            Map::Shift(k, lo) => {
                cost[k] += v.cost;
                constant += v.cost * lo;
            }
            Map::Reflect(k, hi) => {
                cost[k] -= v.cost;
                constant += v.cost * hi;
            }
            Map::Split(p, q) => {
                cost[p] += v.cost;
                cost[q] -= v.cost;
            }
        }
    }

    let m = rows.len();
    let nslack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let nstruct = ncols + nslack;
    let width = nstruct + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    let mut basis = vec![0usize; m];
    let mut s = ncols;
    for (i, (a, sense, rhs)) in rows.iter().enumerate() {
        t[i][..ncols].copy_from_slice(a);
        match sense {
            Sense::Le => {
                t[i][s] = 1.0;
                s += 1;
            }
            Sense::Ge => {
                t[i][s] = -1.0;
                s += 1;
            }
            Sense::Eq => {}
        }
        t[i][width - 1] = *rhs;
        if *rhs < 0.0 {
            for v in t[i].iter_mut() {
                *v = -*v;
            }
        }
        t[i][nstruct + i] = 1.0;
        basis[i] = nstruct + i;
    }

    // phase one objective row: minimize sum of artificials
    for j in 0..width {
        t[m][j] = 0.0;
    }
    for i in 0..m {
        for j in 0..width {
            if j < nstruct || j == width - 1 {
                t[m][j] -= t[i][j];
            }
        }
    }
    if pivot_loop(&mut t, &mut basis, nstruct + m, width).is_err() {
        return TableauResult::Unbounded;
    }
    let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
    if -t[m][width - 1] > 1e-7 * scale {
        return TableauResult::Infeasible;
    }
    // drive artificials out of the basis where possible
    for i in 0..m {
        if basis[i] >= nstruct {
            if let Some(j) = (0..nstruct).find(|&j| t[i][j].abs() > EPS) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }

    // phase two objective row
    for j in 0..width {
        t[m][j] = if j < ncols { cost[j] } else { 0.0 };
    }
    for i in 0..m {
        let cb = if basis[i] < ncols { cost[basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                let v = t[i][j];
                t[m][j] -= cb * v;
            }
        }
    }
    match pivot_loop(&mut t, &mut basis, nstruct, width) {
        Err(()) => TableauResult::Unbounded,
        Ok(()) => TableauResult::Optimal(-t[m][width - 1] + constant),
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, q: usize) {
    let width = t[0].len();
    let p = t[r][q];
    for j in 0..width {
        t[r][j] /= p;
    }
    for i in 0..t.len() {
        if i != r {
            let f = t[i][q];
            if f != 0.0 {
                for j in 0..width {
                    let v = t[r][j];
                    t[i][j] -= f * v;
                }
            }
        }
    }
    basis[r] = q;
}

/// Bland's rule over columns `< allowed`. Err on unboundedness.
fn pivot_loop(t: &mut [Vec<f64>], basis: &mut [usize], allowed: usize, width: usize) -> Result<(), ()> {
    let m = t.len() - 1;
    for _ in 0..200_000 {
        let Some(q) = (0..allowed).find(|&j| t[m][j] < -EPS) else {
            return Ok(());
        };
        let mut best: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][q] > EPS {
                let ratio = t[i][width - 1] / t[i][q];
                match best {
                    None => best = Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12 || (ratio <= br + 1e-12 && basis[i] < basis[bi]) {
                            best = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((r, _)) = best else {
            return Err(());
        };
        pivot(t, basis, r, q);
    }
    panic!("dense tableau oracle did not terminate");
}
