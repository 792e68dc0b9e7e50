//! Convex-hull membership as a phase-1 simplex feasibility problem:
//! find `λ ≥ 0` with `Σλ = 1` and `Σ λ_i p_i = q`.

/// Absolute tolerance for feasibility and rank decisions.
pub const GEOMETRY_EPS: f64 = 1e-9;

const PIVOT_EPS: f64 = 1e-12;
const BLAND_AFTER: usize = 20;

/// Whether `q` lies in the convex hull of `points`, with boundary points
/// (residual at most `eps`) counted as inside.
pub fn in_convex_hull(points: &[Vec<f64>], q: &[f64], eps: f64) -> bool {
    let n = points.len();
    if n == 0 {
        return false;
    }
    let d = q.len();
    for k in 0..d {
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[k]), hi.max(p[k])));
        if q[k] < lo - eps || q[k] > hi + eps {
            return false;
        }
    }
    phase_one_residual(points, q) <= eps
}

/// Minimum of `Σ|artificial|` over the feasibility system; zero iff `q` is
/// in the hull.
///
/// Dense tableau with `m = d + 1` rows. Columns: `n` weights, `m`
/// artificials, then the right-hand side. Bland's rule takes over from
/// Dantzig pricing after a run of degenerate pivots, preventing cycling.
pub fn phase_one_residual(points: &[Vec<f64>], q: &[f64]) -> f64 {
    let n = points.len();
    let d = q.len();
    let m = d + 1;
    let width = n + m + 1;
    let rhs = n + m;
    let mut t = vec![0.0; m * width];
    for k in 0..m {
        let (b, sign) = if k < d {
            (q[k], if q[k] < 0.0 { -1.0 } else { 1.0 })
        } else {
            (1.0, 1.0)
        };
        let row = &mut t[k * width..(k + 1) * width];
        for (i, p) in points.iter().enumerate() {
            row[i] = sign * if k < d { p[k] } else { 1.0 };
        }
        row[n + k] = 1.0;
        row[rhs] = sign * b;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // reduced costs of the phase-1 objective (sum of artificials)
    let mut cost = vec![0.0; width];
    for k in 0..m {
        for c in 0..width {
            cost[c] -= t[k * width + c];
        }
    }
    for k in 0..m {
        cost[n + k] = 0.0;
    }

    let max_iter = 50 * (n + m);
    let mut degenerate_run = 0usize;
    for _ in 0..max_iter {
        // Dantzig pricing; Bland's rule after a run of degenerate pivots
        let enter = if degenerate_run < BLAND_AFTER {
            (0..n + m)
                .filter(|&c| cost[c] < -PIVOT_EPS)
                .fold(None, |best: Option<usize>, c| match best {
                    Some(b) if cost[b] <= cost[c] => Some(b),
                    _ => Some(c),
                })
        } else {
            (0..n + m).find(|&c| cost[c] < -PIVOT_EPS)
        };
        let Some(enter) = enter else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for k in 0..m {
            let a = t[k * width + enter];
            if a > PIVOT_EPS {
                let ratio = t[k * width + rhs] / a;
                let better = match leave {
                    None => true,
                    Some((lk, lr)) => ratio < lr || (ratio == lr && basis[k] < basis[lk]),
                };
                if better {
                    leave = Some((k, ratio));
                }
            }
        }
        let Some((r, ratio)) = leave else {
            // unbounded direction cannot occur in phase 1; stop defensively
            break;
        };
        if ratio <= PIVOT_EPS {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
        pivot(&mut t, &mut cost, width, m, r, enter);
        basis[r] = enter;
    }
    -cost[rhs]
}

fn pivot(t: &mut [f64], cost: &mut [f64], width: usize, m: usize, r: usize, c: usize) {
    let piv = t[r * width + c];
    for v in &mut t[r * width..(r + 1) * width] {
        *v /= piv;
    }
    t[r * width + c] = 1.0;
    let pivot_row: Vec<f64> = t[r * width..(r + 1) * width].to_vec();
    for k in 0..m {
        if k == r {
            continue;
        }
        let f = t[k * width + c];
        if f != 0.0 {
            let row = &mut t[k * width..(k + 1) * width];
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[c] = 0.0;
        }
    }
    let f = cost[c];
    if f != 0.0 {
        for (v, pv) in cost.iter_mut().zip(&pivot_row) {
            *v -= f * pv;
        }
        cost[c] = 0.0;
    }
}

/// Indices of the points that are not in the hull of the remaining ones;
/// their hull equals the hull of the full set. Removal is sequential, so
/// of several coincident points the last one is kept.
pub fn extreme_points(points: &[Vec<f64>], eps: f64) -> Vec<usize> {
    let mut keep: Vec<bool> = vec![true; points.len()];
    for i in 0..points.len() {
        let others: Vec<Vec<f64>> = (0..points.len())
            .filter(|&j| j != i && keep[j])
            .map(|j| points[j].clone())
            .collect();
        if !others.is_empty() && in_convex_hull(&others, &points[i], eps) {
            keep[i] = false;
        }
    }
    (0..points.len()).filter(|&i| keep[i]).collect()
}
