//! Independent brute-force oracles shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Gaussian elimination with partial pivoting; `None` for (numerically)
/// singular systems.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-11 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Euclidean projection of `h` onto `{x : |<a_i, x>| <= q_i}` by
/// enumerating every assignment of {inactive, upper active, lower active}
/// to the slabs, solving the equality-constrained least-distance problem
/// of each assignment and keeping the closest feasible candidate.
pub fn qp_project_slabs(h: &[f64], rows: &[Vec<f64>], q: &[f64]) -> Vec<f64> {
    let k = rows.len();
    let feasible = |x: &[f64]| {
        rows.iter()
            .zip(q)
            .all(|(a, &qi)| dot(a, x).abs() <= qi * (1.0 + 1e-9) + 1e-12)
    };
    if feasible(h) {
        return h.to_vec();
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = 3usize.pow(k as u32);
    for code in 1..total {
        let mut c = code;
        let mut act = Vec::new();
        for i in 0..k {
            match c % 3 {
                1 => act.push((i, 1.0)),
                2 => act.push((i, -1.0)),
                _ => {}
            }
            c /= 3;
        }
        if act.len() > h.len() {
            continue;
        }
        // x = h - A^T mu with A x = b
        let gram: Vec<Vec<f64>> = act
            .iter()
            .map(|&(i, _)| act.iter().map(|&(j, _)| dot(&rows[i], &rows[j])).collect())
            .collect();
        let rhs: Vec<f64> = act
            .iter()
            .map(|&(i, s)| dot(&rows[i], h) - s * q[i])
            .collect();
        let Some(mu) = solve_dense(gram, rhs) else {
            continue;
        };
        let mut x = h.to_vec();
        for (&(i, _), m) in act.iter().zip(&mu) {
            for (xv, a) in x.iter_mut().zip(&rows[i]) {
                *xv -= m * a;
            }
        }
        if feasible(&x) {
            let d = dist(&x, h);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, x));
            }
        }
    }
    best.expect("a feasible active set exists").1
}

/// `1/2 ||u - z||^2 + lambda sum |u_{i+1} - u_i|`.
pub fn tv1_objective(z: &[f64], lambda: f64, u: &[f64]) -> f64 {
    0.5 * dist(u, z).powi(2) + lambda * u.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>()
}

/// Exact 1D TV prox by enumerating the sign pattern of every difference
/// `u_{i+1} - u_i` in {-, 0, +}. Each pattern fixes a block structure and
/// a linear penalty; the smooth minimizer is computed in closed form and
/// kept when it reproduces its pattern.
pub fn tv1_prox_exhaustive(z: &[f64], lambda: f64) -> Vec<f64> {
    let n = z.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow((n - 1) as u32) {
        let mut c = code;
        let signs: Vec<i32> = (0..n - 1)
            .map(|_| {
                let s = (c % 3) as i32 - 1;
                c /= 3;
                s
            })
            .collect();
        // blocks separated by nonzero signs
        let mut blocks: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for i in 0..n - 1 {
            if signs[i] != 0 {
                blocks.push((start, i + 1));
                start = i + 1;
            }
        }
        blocks.push((start, n));
        let mut u = vec![0.0; n];
        for (b, &(lo, hi)) in blocks.iter().enumerate() {
            // stationarity: n (v - mean) + lambda s_left - lambda s_right = 0
            let left = if b > 0 { signs[lo - 1] as f64 } else { 0.0 };
            let right = if hi < n { signs[hi - 1] as f64 } else { 0.0 };
            let mean = z[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            let val = mean + lambda * (right - left) / (hi - lo) as f64;
            u[lo..hi].iter_mut().for_each(|x| *x = val);
        }
        let consistent = (0..n - 1).all(|i| {
            let d = u[i + 1] - u[i];
            match signs[i] {
                1 => d >= -1e-12,
                -1 => d <= 1e-12,
                _ => true,
            }
        });
        if consistent {
            let f = tv1_objective(z, lambda, &u);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, u));
            }
        }
    }
    best.expect("some pattern is consistent").1
}

/// 1D TV prox through its dual `min_{|w_i| <= lambda} 1/2 ||z - D^T w||^2`
/// solved by accelerated projected gradient; `u = z - D^T w`.
pub fn tv1_prox_dual(z: &[f64], lambda: f64, iters: usize) -> Vec<f64> {
    let n = z.len();
    let dt = |w: &[f64]| -> Vec<f64> {
        // (D^T w)_i = w_{i-1} - w_i
        (0..n)
            .map(|i| {
                let a = if i > 0 { w[i - 1] } else { 0.0 };
                let b = if i + 1 < n { w[i] } else { 0.0 };
                a - b
            })
            .collect()
    };
    let mut w = vec![0.0; n - 1];
    let mut y = w.clone();
    let mut t = 1.0f64;
    let step = 0.25;
    for _ in 0..iters {
        let u = dt(&y).iter().zip(z).map(|(a, b)| b - a).collect::<Vec<_>>();
        // gradient of the dual objective wrt w is -D u
        let w_next: Vec<f64> = (0..n - 1)
            .map(|i| (y[i] + step * (u[i + 1] - u[i])).clamp(-lambda, lambda))
            .collect();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = w_next
            .iter()
            .zip(&w)
            .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
            .collect();
        w = w_next;
        t = t_next;
    }
    dt(&w).iter().zip(z).map(|(a, b)| b - a).collect()
}

/// `1/2 ||K u - z||^2 + lambda ||u||_1` for a row-major `rows x cols` K.
pub fn l1_objective(k: &[f64], rows: usize, cols: usize, z: &[f64], lambda: f64, u: &[f64]) -> f64 {
    let r: f64 = (0..rows)
        .map(|i| (dot(&k[i * cols..(i + 1) * cols], u) - z[i]).powi(2))
        .sum();
    0.5 * r + lambda * u.iter().map(|x| x.abs()).sum::<f64>()
}

/// Exact l1-penalized least squares by enumerating sign patterns: for a
/// pattern `s`, the smooth piece is minimized by
/// `K_A^T K_A u_A = K_A^T z - lambda s_A`; consistent candidates are
/// compared by objective.
pub fn l1_prox_sign_oracle(
    k: &[f64],
    rows: usize,
    cols: usize,
    z: &[f64],
    lambda: f64,
) -> Vec<f64> {
    let col = |j: usize| -> Vec<f64> { (0..rows).map(|i| k[i * cols + j]).collect() };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(cols as u32) {
        let mut c = code;
        let signs: Vec<f64> = (0..cols)
            .map(|_| {
                let s = (c % 3) as f64 - 1.0;
                c /= 3;
                s
            })
            .collect();
        let act: Vec<usize> = (0..cols).filter(|&j| signs[j] != 0.0).collect();
        let mut u = vec![0.0; cols];
        if !act.is_empty() {
            let gram: Vec<Vec<f64>> = act
                .iter()
                .map(|&a| act.iter().map(|&b| dot(&col(a), &col(b))).collect())
                .collect();
            let rhs: Vec<f64> = act
                .iter()
                .map(|&a| dot(&col(a), z) - lambda * signs[a])
                .collect();
            let Some(ua) = solve_dense(gram, rhs) else {
                continue;
            };
            for (&a, v) in act.iter().zip(ua) {
                u[a] = v;
            }
            if act.iter().any(|&a| u[a] * signs[a] < 0.0) {
                continue;
            }
        }
        let f = l1_objective(k, rows, cols, z, lambda, &u);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, u));
        }
    }
    best.expect("the zero pattern is always a candidate").1
}

/// Dantzig selector `min ||u||_1 s.t. ||K^T (y - K u)||_inf <= q` as a
/// linear program in `(u+, u-) >= 0`, solved by enumerating all vertices of
/// the feasible polyhedron. Returns the optimal value.
pub fn dantzig_lp_value(k: &[f64], rows: usize, cols: usize, y: &[f64], q: f64) -> f64 {
    let kt_y: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| k[i * cols + j] * y[i]).sum())
        .collect();
    let ktk: Vec<Vec<f64>> = (0..cols)
        .map(|a| {
            (0..cols)
                .map(|b| (0..rows).map(|i| k[i * cols + a] * k[i * cols + b]).sum())
                .collect()
        })
        .collect();
    let nv = 2 * cols;
    // constraints g . x <= h over x = (u+, u-)
    let mut g: Vec<Vec<f64>> = Vec::new();
    let mut hv: Vec<f64> = Vec::new();
    for a in 0..cols {
        // K^T K (u+ - u-) - K^T y <= q and >= -q
        let row: Vec<f64> = (0..nv)
            .map(|v| {
                if v < cols {
                    ktk[a][v]
                } else {
                    -ktk[a][v - cols]
                }
            })
            .collect();
        g.push(row.clone());
        hv.push(q + kt_y[a]);
        g.push(row.iter().map(|x| -x).collect());
        hv.push(q - kt_y[a]);
    }
    for v in 0..nv {
        let mut row = vec![0.0; nv];
        row[v] = -1.0;
        g.push(row);
        hv.push(0.0);
    }
    let m = g.len();
    let feasible = |x: &[f64]| (0..m).all(|i| dot(&g[i], x) <= hv[i] + 1e-9 * (1.0 + hv[i].abs()));
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..nv).collect();
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| g[i].clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| hv[i]).collect();
        if let Some(x) = solve_dense(a, b) {
            if feasible(&x) {
                best = best.min(x.iter().sum());
            }
        }
        // next combination of nv out of m
        let mut i = nv;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] != i + m - nv {
                break;
            }
            if i == 0 && idx[0] == m - nv {
                return best;
            }
        }
        idx[i] += 1;
        for j in i + 1..nv {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
