//! Dense reference implementations shared by the integration tests.
//!
//! Everything here is deliberately naive and independent of the library's
//! sparse kernels.

#![allow(dead_code)]

use std::collections::HashSet;

use pcamg::SparseMatrix;
use proptest::prelude::*;

pub type Dense = Vec<Vec<f64>>;

pub fn dense_matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

pub fn dense_matmul(a: &Dense, b: &Dense) -> Dense {
    let m = b[0].len();
    a.iter()
        .map(|row| {
            (0..m)
                .map(|j| row.iter().enumerate().map(|(k, v)| v * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn dense_transpose(a: &Dense) -> Dense {
    if a.is_empty() {
        return vec![];
    }
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn project(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Dense = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| row.iter().copied().chain([bi]).collect())
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        assert!(m[c][c].abs() > 1e-300, "singular system");
        let pivot = m[c].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != c {
                let f = row[c] / pivot[c];
                for (v, p) in row.iter_mut().zip(&pivot).skip(c) {
                    *v -= f * p;
                }
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

/// Minimum-norm solution of `L x = b` for a connected Laplacian and `b ⊥ 1`,
/// through `(L + 11ᵀ/n) x = b`.
pub fn laplacian_pinv_solve(l: &Dense, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let shifted: Dense = l
        .iter()
        .map(|row| row.iter().map(|v| v + 1.0 / n as f64).collect())
        .collect();
    dense_solve(&shifted, b)
}

/// Textbook unpreconditioned CG; returns every iterate.
pub fn dense_cg(a: &Dense, b: &[f64], x0: &[f64], iters: usize) -> Vec<Vec<f64>> {
    let mut x = x0.to_vec();
    let ax = dense_matvec(a, &x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let mut p = r.clone();
    let mut out = vec![x.clone()];
    for _ in 0..iters {
        let ap = dense_matvec(a, &p);
        let rr = dot(&r, &r);
        let alpha = rr / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let beta = dot(&r, &r) / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        out.push(x.clone());
    }
    out
}

pub fn energy(a: &Dense, x: &[f64]) -> f64 {
    dot(x, &dense_matvec(a, x))
}

/// Builds a symmetric adjacency from undirected weighted edges.
pub fn adjacency(n: usize, edges: &[(usize, usize, f64)]) -> SparseMatrix {
    let mut t = Vec::new();
    for &(u, v, w) in edges {
        t.push((u, v, w));
        t.push((v, u, w));
    }
    SparseMatrix::from_triplets(n, n, &t).unwrap()
}

pub fn path_laplacian(n: usize) -> SparseMatrix {
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    pcamg::sparse::laplacian_from_adjacency(&adjacency(n, &edges)).unwrap()
}

/// Maximum total weight of a linear forest (vertex-disjoint simple paths) by
/// exhaustive search over edge subsets.
pub fn brute_force_path_cover_weight(n: usize, edges: &[(usize, usize, f64)]) -> f64 {
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            x = parent[x];
        }
        x
    }
    fn go(
        i: usize,
        edges: &[(usize, usize, f64)],
        deg: &mut Vec<u8>,
        parent: &mut Vec<usize>,
        acc: f64,
        best: &mut f64,
    ) {
        if acc > *best {
            *best = acc;
        }
        if i == edges.len() {
            return;
        }
        let rest: f64 = edges[i..].iter().map(|e| e.2).sum();
        if acc + rest <= *best {
            return;
        }
        let (u, v, w) = edges[i];
        if deg[u] < 2 && deg[v] < 2 {
            let (ru, rv) = (find(parent, u), find(parent, v));
            if ru != rv {
                let saved = parent.clone();
                parent[ru] = rv;
                deg[u] += 1;
                deg[v] += 1;
                go(i + 1, edges, deg, parent, acc + w, best);
                deg[u] -= 1;
                deg[v] -= 1;
                *parent = saved;
            }
        }
        go(i + 1, edges, deg, parent, acc, best);
    }
    let mut sorted = edges.to_vec();
    sorted.sort_by(|a, b| b.2.total_cmp(&a.2));
    let mut best = 0.0;
    go(0, &sorted, &mut vec![0; n], &mut (0..n).collect(), 0.0, &mut best);
    best
}

/// Manufactured smooth error on an `nx × ny` grid (row-major numbering).
pub fn smooth_grid_error(nx: usize, ny: usize) -> Vec<f64> {
    let mut e = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = (i as f64 + 0.5) / nx as f64;
            let y = (j as f64 + 0.5) / ny as f64;
            e.push((std::f64::consts::PI * x).cos() + 0.5 * (std::f64::consts::PI * y).cos());
        }
    }
    project(&e)
}

/// Connected graph: random spanning tree plus extra random edges.
pub fn connected_graph(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (2..max_n).prop_flat_map(|n| {
        let tree = prop::collection::vec((any::<prop::sample::Index>(), 0.1..10.0f64), n - 1);
        let extra = prop::collection::vec((0..n, 0..n, 0.1..10.0f64), 0..2 * n);
        (Just(n), tree, extra).prop_map(|(n, tree, extra)| {
            let mut seen = HashSet::new();
            let mut edges = Vec::new();
            for (i, (parent, w)) in tree.into_iter().enumerate() {
                let v = i + 1;
                let u = parent.index(v);
                seen.insert((u.min(v), u.max(v)));
                edges.push((u, v, w));
            }
            for (u, v, w) in extra {
                if u != v && seen.insert((u.min(v), u.max(v))) {
                    edges.push((u, v, w));
                }
            }
            (n, edges)
        })
    })
}

/// Seeded random connected graph: a random spanning tree plus each remaining
/// pair with probability `extra`.
pub fn random_connected_graph<R: rand::Rng>(rng: &mut R, n: usize, extra: f64) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        seen.insert((u, v));
        edges.push((u, v, rng.random_range(0.1..10.0)));
    }
    for v in 0..n {
        for u in 0..v {
            if !seen.contains(&(u, v)) && rng.random_bool(extra) {
                edges.push((u, v, rng.random_range(0.1..10.0)));
            }
        }
    }
    edges
}
