//! Dense active-set solver for tiny box-constrained convex QPs.
//!
//! Solves `min 0.5 x'Hx + g'x` subject to `lo <= x <= hi` for `N <= 4`
//! with `H` positive semidefinite. The primal active-set iteration handles
//! the common case; when a reduced Hessian is singular or the iteration
//! cycles, every active set is enumerated instead (`3^N` cases). Any extreme
//! point of the optimal set has a positive definite reduced Hessian on its
//! free coordinates, so skipping singular cases during enumeration is safe.

use nalgebra::{SMatrix, SVector};

const MAX_N: usize = 4;
const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Free,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy)]
pub struct BoxQp<const N: usize> {
    pub h: SMatrix<f64, N, N>,
    pub g: SVector<f64, N>,
    pub lo: SVector<f64, N>,
    pub hi: SVector<f64, N>,
}

#[derive(Debug, Clone, Copy)]
pub struct QpSolution<const N: usize> {
    pub x: SVector<f64, N>,
    pub active: [Bound; N],
    /// `0.5 x'Hx + g'x` at `x`.
    pub objective: f64,
}

impl<const N: usize> BoxQp<N> {
    pub fn objective(&self, x: &SVector<f64, N>) -> f64 {
        0.5 * x.dot(&(self.h * x)) + self.g.dot(x)
    }

    pub fn gradient(&self, x: &SVector<f64, N>) -> SVector<f64, N> {
        self.h * x + self.g
    }

    /// Active set first, enumeration when that fails.
    pub fn solve(&self, start: &SVector<f64, N>) -> QpSolution<N> {
        self.solve_active_set(start)
            .unwrap_or_else(|| self.solve_enumerate())
    }

    pub fn solve_active_set(&self, start: &SVector<f64, N>) -> Option<QpSolution<N>> {
        let mut x = *start;
        let mut active = [Bound::Free; N];
        for i in 0..N {
            if x[i] <= self.lo[i] {
                x[i] = self.lo[i];
                active[i] = Bound::Lower;
            } else if x[i] >= self.hi[i] {
                x[i] = self.hi[i];
                active[i] = Bound::Upper;
            }
        }
        let scale = self.scale();
        for _ in 0..(6 * N + 8) {
            let grad = self.gradient(&x);
            let step = self.reduced_step(&active, &grad)?;
            let step_norm = step.amax();
            if step_norm <= 1e-14 * (1.0 + x.amax()) {
                // Stationary on the current face: release the worst bound.
                let mut release = None;
                let mut worst = 1e-12 * scale;
                for i in 0..N {
                    let violation = match active[i] {
                        Bound::Lower => -grad[i],
                        Bound::Upper => grad[i],
                        Bound::Free => continue,
                    };
                    if violation > worst {
                        worst = violation;
                        release = Some(i);
                    }
                }
                match release {
                    Some(i) => active[i] = Bound::Free,
                    None => {
                        return Some(QpSolution {
                            x,
                            active,
                            objective: self.objective(&x),
                        })
                    }
                }
            } else {
                let mut alpha = 1.0;
                let mut blocking = None;
                for i in 0..N {
                    if active[i] != Bound::Free {
                        continue;
                    }
                    let limit = if step[i] < 0.0 {
                        (self.lo[i] - x[i]) / step[i]
                    } else if step[i] > 0.0 {
                        (self.hi[i] - x[i]) / step[i]
                    } else {
                        continue;
                    };
                    if limit < alpha {
                        alpha = limit;
                        blocking = Some(i);
                    }
                }
                x += step * alpha.max(0.0);
                if let Some(i) = blocking {
                    if step[i] < 0.0 {
                        x[i] = self.lo[i];
                        active[i] = Bound::Lower;
                    } else {
                        x[i] = self.hi[i];
                        active[i] = Bound::Upper;
                    }
                }
            }
        }
        None
    }

    /// Exhaustive search over all `3^N` active sets.
    pub fn solve_enumerate(&self) -> QpSolution<N> {
        let mut best: Option<QpSolution<N>> = None;
        let cases = 3usize.pow(N as u32);
        for code in 0..cases {
            let mut active = [Bound::Free; N];
            let mut x = SVector::<f64, N>::zeros();
            let mut c = code;
            for i in 0..N {
                active[i] = match c % 3 {
                    0 => Bound::Free,
                    1 => Bound::Lower,
                    _ => Bound::Upper,
                };
                c /= 3;
                x[i] = match active[i] {
                    Bound::Lower => self.lo[i],
                    Bound::Upper => self.hi[i],
                    Bound::Free => 0.0,
                };
            }
            let grad = self.gradient(&x);
            let Some(step) = self.reduced_step(&active, &grad) else {
                continue;
            };
            x += step;
            let tol = 1e-12 * (1.0 + x.amax());
            let feasible = (0..N).all(|i| x[i] >= self.lo[i] - tol && x[i] <= self.hi[i] + tol);
            if !feasible {
                continue;
            }
            for i in 0..N {
                x[i] = x[i].max(self.lo[i]).min(self.hi[i]);
            }
            let objective = self.objective(&x);
            if best.map_or(true, |b| objective < b.objective) {
                best = Some(QpSolution {
                    x,
                    active,
                    objective,
                });
            }
        }
        best.expect("vertex active sets are always solvable")
    }

    /// Largest KKT violation at `x`: stationarity on free coordinates and
    /// multiplier sign at active bounds.
    pub fn kkt_violation(&self, x: &SVector<f64, N>) -> f64 {
        let grad = self.gradient(x);
        let mut worst: f64 = 0.0;
        for i in 0..N {
            let at_lo = x[i] <= self.lo[i];
            let at_hi = x[i] >= self.hi[i];
            let v = if at_lo && at_hi {
                0.0
            } else if at_lo {
                (-grad[i]).max(0.0)
            } else if at_hi {
                grad[i].max(0.0)
            } else {
                grad[i].abs()
            };
            worst = worst.max(v);
        }
        worst
    }

    fn scale(&self) -> f64 {
        let mut s: f64 = 1e-300;
        for i in 0..N {
            s = s.max(self.h[(i, i)].abs());
        }
        s
    }

    /// Newton step on the free coordinates with active ones held fixed.
    /// `None` when the reduced Hessian is singular.
    fn reduced_step(&self, active: &[Bound; N], grad: &SVector<f64, N>) -> Option<SVector<f64, N>> {
        let mut idx = [0usize; MAX_N];
        let mut m = 0;
        for i in 0..N {
            if active[i] == Bound::Free {
                idx[m] = i;
                m += 1;
            }
        }
        let mut step = SVector::<f64, N>::zeros();
        if m == 0 {
            return Some(step);
        }
        let mut a = [[0.0; MAX_N]; MAX_N];
        let mut b = [0.0; MAX_N];
        for r in 0..m {
            for c in 0..m {
                a[r][c] = self.h[(idx[r], idx[c])];
            }
            b[r] = -grad[idx[r]];
        }
        if !cholesky_solve(&mut a, &mut b, m, PIVOT_TOL * self.scale()) {
            return None;
        }
        for r in 0..m {
            step[idx[r]] = b[r];
        }
        Some(step)
    }
}

/// In-place Cholesky solve of the leading `m x m` block.
fn cholesky_solve(a: &mut [[f64; MAX_N]; MAX_N], b: &mut [f64; MAX_N], m: usize, tol: f64) -> bool {
    for j in 0..m {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > tol) {
            return false;
        }
        let d = num_traits::Float::sqrt(d);
        a[j][j] = d;
        for i in j + 1..m {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i][k] * b[k];
        }
        b[i] = s / a[i][i];
    }
    for i in (0..m).rev() {
        let mut s = b[i];
        for k in i + 1..m {
            s -= a[k][i] * b[k];
        }
        b[i] = s / a[i][i];
    }
    true
}
