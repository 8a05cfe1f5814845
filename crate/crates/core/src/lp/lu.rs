//! Basis factorization: LU with partial pivoting plus a product-form eta file.
//!
//! Elimination runs on a dense workspace but skips zero multipliers and zero
//! pivot-row entries, so bases dominated by logical columns factor in close to
//! O(m^2). Factors are stored sparse for the triangular solves.

const SINGULAR_TOL: f64 = 1e-11;

struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

pub(crate) struct LuFactor {
    m: usize,
    pivot_row: Vec<usize>,
    order: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
    etas: Vec<Eta>,
    scratch: Vec<f64>,
}

/// Factorization failed: the column at this basis position is (numerically)
/// dependent on the ones before it. `free_rows` lists rows left unpivoted.
pub(crate) struct Singular {
    pub position: usize,
    pub free_rows: Vec<usize>,
}

impl LuFactor {
    /// Factor the basis whose column at position `k` is `cols[k]` (sparse).
    pub fn factor(m: usize, cols: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&k| (cols[k].len(), k));

        let mut work = vec![0.0f64; m * m];
        for (k, &pos) in order.iter().enumerate() {
            for &(i, v) in &cols[pos] {
                work[i + k * m] += v;
            }
        }

        let mut done = vec![false; m];
        let mut pivot_row = vec![0usize; m];
        let mut u_diag = vec![0.0; m];
        let mut l_start = Vec::with_capacity(m + 1);
        let mut l_idx = Vec::new();
        let mut l_val = Vec::new();
        let mut u_start = Vec::with_capacity(m + 1);
        let mut u_idx = Vec::new();
        let mut u_val = Vec::new();
        let mut row_nz: Vec<(usize, f64)> = Vec::new();

        for k in 0..m {
            let col = &work[k * m..(k + 1) * m];
            let mut best = 0.0;
            let mut p = usize::MAX;
            for i in 0..m {
                if !done[i] {
                    let a = col[i].abs();
                    if a > best {
                        best = a;
                        p = i;
                    }
                }
            }
            if p == usize::MAX || best < SINGULAR_TOL {
                let free_rows = (0..m).filter(|&i| !done[i]).collect();
                return Err(Singular {
                    position: order[k],
                    free_rows,
                });
            }
            done[p] = true;
            pivot_row[k] = p;
            let piv = work[p + k * m];
            u_diag[k] = piv;

            row_nz.clear();
            for j in (k + 1)..m {
                let v = work[p + j * m];
                if v != 0.0 {
                    row_nz.push((j, v));
                }
            }
            u_start.push(u_idx.len());
            for &(j, v) in &row_nz {
                u_idx.push(j);
                u_val.push(v);
            }

            l_start.push(l_idx.len());
            for i in 0..m {
                if done[i] {
                    continue;
                }
                let a = work[i + k * m];
                if a == 0.0 {
                    continue;
                }
                let l = a / piv;
                l_idx.push(i);
                l_val.push(l);
                for &(j, v) in &row_nz {
                    work[i + j * m] -= l * v;
                }
            }
        }
        l_start.push(l_idx.len());
        u_start.push(u_idx.len());

        Ok(Self {
            m,
            pivot_row,
            order,
            l_start,
            l_idx,
            l_val,
            u_start,
            u_idx,
            u_val,
            u_diag,
            etas: Vec::new(),
            scratch: vec![0.0; m],
        })
    }

    /// Solve `B z = a`. Input indexed by row, output by basis position.
    pub fn ftran(&mut self, a: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let v = a[self.pivot_row[k]];
            if v != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    a[self.l_idx[e]] -= self.l_val[e] * v;
                }
            }
        }
        let u = &mut self.scratch;
        for k in (0..m).rev() {
            let mut s = a[self.pivot_row[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[e] * u[self.u_idx[e]];
            }
            u[k] = s / self.u_diag[k];
        }
        for k in 0..m {
            a[self.order[k]] = u[k];
        }
        for eta in &self.etas {
            let vr = a[eta.pos];
            if vr == 0.0 {
                continue;
            }
            let vr = vr / eta.pivot;
            a[eta.pos] = vr;
            for (i, v) in eta.idx.iter().zip(&eta.val) {
                a[*i] -= v * vr;
            }
        }
    }

    /// Solve `B^T y = c`. Input indexed by basis position, output by row.
    pub fn btran(&mut self, c: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for (i, v) in eta.idx.iter().zip(&eta.val) {
                s -= v * c[*i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        let u = &mut self.scratch;
        for k in 0..m {
            u[k] = c[self.order[k]];
        }
        for k in 0..m {
            let t = u[k] / self.u_diag[k];
            u[k] = t;
            if t != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    u[self.u_idx[e]] -= self.u_val[e] * t;
                }
            }
        }
        for x in c.iter_mut() {
            *x = 0.0;
        }
        for k in 0..m {
            c[self.pivot_row[k]] = u[k];
        }
        for k in (0..m).rev() {
            let mut s = 0.0;
            for e in self.l_start[k]..self.l_start[k + 1] {
                s += self.l_val[e] * c[self.l_idx[e]];
            }
            c[self.pivot_row[k]] -= s;
        }
    }

    /// Record a basis change at `pos` given the FTRAN'd entering column.
    pub fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > 1e-14 {
                idx.push(i);
                val.push(a);
            }
        }
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            idx,
            val,
        });
    }
}
