//! Aggregation machinery: greedy weighted matching, greedy path covers,
//! smooth-error reweighting, and aggregation along path covers.
//!
//! Every routine that scans edges by weight breaks ties by
//! `(min endpoint, max endpoint)` ascending, and every neighbour search breaks
//! ties toward the lower vertex index, so results are fully deterministic.

use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::sparse::{square_pattern_capped, SparseMatrix};

/// Vertex-disjoint simple paths. Vertices touched by no path are implicit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathCover {
    pub paths: Vec<Vec<usize>>,
}

/// Surjective map from vertices onto `0..num_agg`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregation {
    pub assign: Vec<usize>,
    pub num_agg: usize,
}

const UNASSIGNED: usize = usize::MAX;

impl PathCover {
    /// Checks disjointness and simplicity, and, when `graph` is given, that
    /// consecutive vertices are adjacent in it.
    pub fn validate(&self, n: usize, graph: Option<&SparseMatrix>) -> Result<()> {
        let mut used = vec![false; n];
        for (p, path) in self.paths.iter().enumerate() {
            for &v in path {
                if v >= n {
                    return Err(Error::InvalidCover(format!("path {p} has vertex {v} >= {n}")));
                }
                if used[v] {
                    return Err(Error::InvalidCover(format!("vertex {v} appears twice")));
                }
                used[v] = true;
            }
            if let Some(g) = graph {
                for pair in path.windows(2) {
                    if g.get(pair[0], pair[1]).is_none_or(|w| w == 0.0) {
                        return Err(Error::InvalidCover(format!(
                            "({}, {}) is not an edge",
                            pair[0], pair[1]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_edges(&self) -> usize {
        self.paths.iter().map(|p| p.len().saturating_sub(1)).sum()
    }
}

impl Aggregation {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_agg];
        for &a in &self.assign {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_agg];
        for (v, &a) in self.assign.iter().enumerate() {
            members[a].push(v);
        }
        members
    }

    pub fn validate(&self) -> Result<()> {
        let sizes_ok = self.assign.iter().all(|&a| a < self.num_agg);
        if !sizes_ok || self.sizes().contains(&0) {
            return Err(Error::InvalidArgument("aggregation is not a surjective map".into()));
        }
        Ok(())
    }

    /// Builds the compact form from per-aggregate member lists, dropping
    /// empty lists and keeping the order of the rest.
    fn from_members(n: usize, members: &[Vec<usize>]) -> Self {
        let mut assign = vec![UNASSIGNED; n];
        let mut num_agg = 0;
        for m in members.iter().filter(|m| !m.is_empty()) {
            for &v in m {
                assign[v] = num_agg;
            }
            num_agg += 1;
        }
        debug_assert!(assign.iter().all(|&a| a != UNASSIGNED));
        Aggregation { assign, num_agg }
    }
}

/// Upper-triangle edges with positive weight, heaviest first.
pub fn sorted_edges(w: &SparseMatrix) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::with_capacity(w.nnz() / 2);
    for i in 0..w.n_rows() {
        let (cols, vals) = w.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j > i && v > 0.0 {
                edges.push((i, j, v));
            }
        }
    }
    edges.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    edges
}

/// Heaviest positive-weight neighbour of `u`, lowest index on ties.
fn heaviest_neighbor(w: &SparseMatrix, u: usize) -> Option<usize> {
    let (cols, vals) = w.row(u);
    let mut best: Option<(usize, f64)> = None;
    for (&j, &v) in cols.iter().zip(vals) {
        if j != u && v > 0.0 && best.is_none_or(|(_, bv)| v > bv) {
            best = Some((j, v));
        }
    }
    best.map(|(j, _)| j)
}

/// Greedy heaviest-edge matching followed by absorption of the unmatched
/// vertices.
///
/// An unmatched vertex joins the aggregate at the far end of its heaviest
/// edge when the grown aggregate still has induced diameter at most three;
/// otherwise it stays a singleton.
pub fn mwm_aggregate(w: &SparseMatrix) -> Aggregation {
    let n = w.n_rows();
    let mut assign = vec![UNASSIGNED; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (u, v, _) in sorted_edges(w) {
        if assign[u] == UNASSIGNED && assign[v] == UNASSIGNED {
            assign[u] = members.len();
            assign[v] = members.len();
            members.push(vec![u, v]);
        }
    }

    let unmatched: Vec<usize> = (0..n).filter(|&u| assign[u] == UNASSIGNED).collect();
    for u in unmatched {
        let target = heaviest_neighbor(w, u).map(|v| assign[v]).filter(|&a| a != UNASSIGNED);
        match target {
            Some(a) if eccentricity_within(w, &assign, a, members[a].len(), u) <= 3 => {
                assign[u] = a;
                members[a].push(u);
            }
            _ => {
                assign[u] = members.len();
                members.push(vec![u]);
            }
        }
    }
    Aggregation {
        assign,
        num_agg: members.len(),
    }
}

/// Largest BFS distance from `u` to the members of aggregate `agg`, walking
/// only through `u` and those members. Distances only shrink when a vertex is
/// added, so this alone decides whether the grown aggregate keeps its
/// diameter bound.
fn eccentricity_within(w: &SparseMatrix, assign: &[usize], agg: usize, size: usize, u: usize) -> usize {
    let inside = |v: usize| v == u || assign[v] == agg;
    let mut seen = HashSet::from([u]);
    let mut queue = VecDeque::from([(u, 0usize)]);
    let mut ecc = 0;
    while let Some((x, d)) = queue.pop_front() {
        ecc = ecc.max(d);
        let (cols, vals) = w.row(x);
        for (&y, &v) in cols.iter().zip(vals) {
            if v > 0.0 && inside(y) && seen.insert(y) {
                queue.push_back((y, d + 1));
            }
        }
    }
    let reached = seen.len() - 1;
    if reached < size {
        usize::MAX
    } else {
        ecc
    }
}

/// Greedy ½-approximate maximum-weight path cover.
///
/// Edges are scanned heaviest first; an edge is kept when both endpoints
/// still have cover degree at most one and lie on different paths. Each path
/// is reported starting from its lower-index endpoint, paths ordered by that
/// start vertex.
pub fn path_cover(w: &SparseMatrix) -> PathCover {
    let n = w.n_rows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut links = vec![[UNASSIGNED; 2]; n];
    let mut degree = vec![0u8; n];
    for (u, v, _) in sorted_edges(w) {
        if degree[u] > 1 || degree[v] > 1 {
            continue;
        }
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru == rv {
            continue;
        }
        parent[ru] = rv;
        links[u][degree[u] as usize] = v;
        links[v][degree[v] as usize] = u;
        degree[u] += 1;
        degree[v] += 1;
    }

    let mut paths = Vec::new();
    let mut visited = vec![false; n];
    for start in 0..n {
        if degree[start] != 1 || visited[start] {
            continue;
        }
        let mut path = vec![start];
        visited[start] = true;
        let (mut prev, mut cur) = (start, links[start][0]);
        loop {
            path.push(cur);
            visited[cur] = true;
            let next = if links[cur][0] == prev {
                links[cur][1]
            } else {
                links[cur][0]
            };
            if degree[cur] < 2 || next == UNASSIGNED {
                break;
            }
            prev = cur;
            cur = next;
        }
        paths.push(path);
    }
    PathCover { paths }
}

/// Total weight of the cover's edges.
pub fn cover_weight(cover: &PathCover, w: &SparseMatrix) -> Result<f64> {
    let mut total = 0.0;
    for path in &cover.paths {
        for pair in path.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a >= w.n_rows() || b >= w.n_rows() {
                return Err(Error::InvalidCover(format!("({a}, {b}) outside the graph")));
            }
            match w.get(a, b) {
                Some(v) if v != 0.0 => total += v,
                _ => return Err(Error::InvalidCover(format!("({a}, {b}) is not an edge"))),
            }
        }
    }
    Ok(total)
}

/// Reweights the A² pattern by inverse smooth-error differences:
/// `w_ij = 1 / max(|e_i − e_j|, δ)` with `δ = 1e-12 · max(‖e‖∞, 1)`.
pub fn reweight(a: &SparseMatrix, e: &[f64]) -> Result<SparseMatrix> {
    reweight_capped(a, e, None)
}

/// [`reweight`] over a fill-capped A² pattern.
pub fn reweight_capped(a: &SparseMatrix, e: &[f64], row_cap: Option<usize>) -> Result<SparseMatrix> {
    if e.len() != a.n_rows() {
        return Err(Error::DimensionMismatch {
            op: "reweight",
            expected: a.n_rows(),
            got: e.len(),
        });
    }
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("smooth error has non-finite entries".into()));
    }
    let delta = 1e-12 * crate::sparse::norm_inf(e).max(1.0);
    let pattern = square_pattern_capped(a, row_cap)?;
    let mut values = Vec::with_capacity(pattern.nnz());
    for i in 0..pattern.n_rows() {
        for &j in pattern.row(i).0 {
            values.push(1.0 / (e[i] - e[j]).abs().max(delta));
        }
    }
    SparseMatrix::from_csr(
        pattern.n_rows(),
        pattern.n_cols(),
        pattern.row_offsets().to_vec(),
        pattern.col_indices().to_vec(),
        values,
    )
}

/// Aggregates along a path cover and builds the matching prolongation.
///
/// Consecutive path vertices are paired from each path's start; leftover
/// vertices then attach through their heaviest `w` edge (new pair, join a
/// pair, or steal the neighbour out of a triple). A vertex with no neighbour
/// becomes a singleton. On `level == 1` the prolongation carries the entries
/// of `e`; deeper levels get a boolean prolongation.
pub fn path_cover_aggregate(
    cover: &PathCover,
    w: &SparseMatrix,
    level: usize,
    e: Option<&[f64]>,
) -> Result<(Aggregation, SparseMatrix)> {
    let n = w.n_rows();
    let mut assign = vec![UNASSIGNED; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for path in &cover.paths {
        for &v in path {
            if v >= n {
                return Err(Error::InvalidCover(format!("vertex {v} outside {n} vertices")));
            }
        }
        for pair in path.chunks_exact(2) {
            if assign[pair[0]] != UNASSIGNED || assign[pair[1]] != UNASSIGNED || pair[0] == pair[1] {
                return Err(Error::InvalidCover("paths are not vertex-disjoint".into()));
            }
            assign[pair[0]] = members.len();
            assign[pair[1]] = members.len();
            members.push(vec![pair[0], pair[1]]);
        }
    }

    for u in 0..n {
        if assign[u] != UNASSIGNED {
            continue;
        }
        let Some(v) = heaviest_neighbor(w, u) else {
            assign[u] = members.len();
            members.push(vec![u]);
            continue;
        };
        let a = assign[v];
        if a == UNASSIGNED {
            assign[u] = members.len();
            assign[v] = members.len();
            members.push(vec![u, v]);
        } else if members[a].len() >= 3 {
            members[a].retain(|&x| x != v);
            assign[u] = members.len();
            assign[v] = members.len();
            members.push(vec![v, u]);
        } else {
            assign[u] = a;
            members[a].push(u);
        }
    }

    let agg = Aggregation::from_members(n, &members);
    let weights = if level == 1 {
        let e = e.ok_or_else(|| Error::InvalidArgument("level-1 prolongation needs the smooth error".into()))?;
        if e.len() != n {
            return Err(Error::DimensionMismatch {
                op: "path_cover_aggregate",
                expected: n,
                got: e.len(),
            });
        }
        Some(e)
    } else {
        None
    };
    let p = prolongation(&agg, weights);
    Ok((agg, p))
}

/// Piecewise prolongation: row `k` has its single entry in column
/// `assign[k]`, equal to `weights[k]` (or 1 without weights).
pub fn prolongation(agg: &Aggregation, weights: Option<&[f64]>) -> SparseMatrix {
    let n = agg.assign.len();
    let values = match weights {
        Some(e) => e.to_vec(),
        None => vec![1.0; n],
    };
    SparseMatrix::from_csr(n, agg.num_agg, (0..=n).collect(), agg.assign.clone(), values)
        .expect("one entry per row is canonical")
}

/// Rewrites a fine cover in coarse indices.
///
/// Runs of vertices in one aggregate collapse to a single coarse vertex. A
/// coarse vertex already claimed by an earlier path (or earlier in the same
/// path) splits the path there, keeping the result vertex-disjoint. Paths
/// shorter than two vertices are dropped.
pub fn shorten_cover(cover: &PathCover, agg: &Aggregation) -> PathCover {
    let mut claimed = vec![false; agg.num_agg];
    let mut paths = Vec::new();
    for path in &cover.paths {
        let mut collapsed: Vec<usize> = path.iter().map(|&v| agg.assign[v]).collect();
        collapsed.dedup();
        let mut segment = Vec::new();
        for c in collapsed {
            if claimed[c] {
                if segment.len() >= 2 {
                    paths.push(std::mem::take(&mut segment));
                }
                segment.clear();
                continue;
            }
            claimed[c] = true;
            segment.push(c);
        }
        if segment.len() >= 2 {
            paths.push(segment);
        }
    }
    PathCover { paths }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{adjacency_from_laplacian, laplacian_from_adjacency};

    pub(crate) fn graph(n: usize, edges: &[(usize, usize, f64)]) -> SparseMatrix {
        let mut t = Vec::new();
        for &(u, v, w) in edges {
            t.push((u, v, w));
            t.push((v, u, w));
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn agg_sets(agg: &Aggregation) -> Vec<Vec<usize>> {
        let mut m = agg.members();
        m.iter_mut().for_each(|s| s.sort());
        m.sort();
        m
    }

    #[test]
    fn mwm_k2() {
        let agg = mwm_aggregate(&graph(2, &[(0, 1, 1.0)]));
        assert_eq!(agg.num_agg, 1);
        assert_eq!(agg.assign, vec![0, 0]);
    }

    #[test]
    fn mwm_path_absorbs_tail() {
        let agg = mwm_aggregate(&graph(3, &[(0, 1, 2.0), (1, 2, 1.0)]));
        assert_eq!(agg_sets(&agg), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn mwm_star_absorbs_every_leaf() {
        let agg = mwm_aggregate(&graph(5, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (0, 4, 1.0)]));
        assert_eq!(agg_sets(&agg), vec![vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn mwm_isolated_vertex_is_singleton() {
        let agg = mwm_aggregate(&graph(3, &[(0, 1, 1.0)]));
        assert_eq!(agg_sets(&agg), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn path_cover_on_path() {
        let cover = path_cover(&graph(3, &[(0, 1, 2.0), (1, 2, 1.0)]));
        assert_eq!(cover.paths, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn path_cover_triangle_skips_cycle() {
        let w = graph(3, &[(0, 1, 3.0), (1, 2, 2.0), (0, 2, 1.0)]);
        let cover = path_cover(&w);
        assert_eq!(cover.paths, vec![vec![0, 1, 2]]);
        assert_eq!(cover_weight(&cover, &w).unwrap(), 5.0);
    }

    #[test]
    fn path_cover_star_leaves_one_leaf() {
        let cover = path_cover(&graph(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]));
        assert_eq!(cover.paths, vec![vec![1, 0, 2]]);
    }

    #[test]
    fn cover_weight_errors_on_non_edge() {
        let w = graph(3, &[(0, 1, 1.0)]);
        assert_eq!(cover_weight(&PathCover::default(), &w).unwrap(), 0.0);
        let bad = PathCover {
            paths: vec![vec![0, 2]],
        };
        assert!(cover_weight(&bad, &w).is_err());
    }

    #[test]
    fn reweight_constant_error_gives_cap() {
        let a = laplacian_from_adjacency(&graph(3, &[(0, 1, 1.0), (1, 2, 1.0)])).unwrap();
        let w = reweight(&a, &[0.3; 3]).unwrap();
        assert!(w.values().iter().all(|&v| v == 1e12));
    }

    #[test]
    fn reweight_path3() {
        let a = laplacian_from_adjacency(&graph(3, &[(0, 1, 1.0), (1, 2, 1.0)])).unwrap();
        let w = reweight(&a, &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(w.get(0, 1), Some(1.0));
        assert_eq!(w.get(1, 2), Some(1e12));
        assert_eq!(w.get(0, 2), Some(1.0));
        assert_eq!(w.get(0, 0), None);
    }

    #[test]
    fn reweight_ramp_prefers_columns_and_diagonals() {
        let a = crate::graph_io::grid_laplacian(5, 5).unwrap();
        let e: Vec<f64> = (0..25).map(|k| (k % 5) as f64).collect();
        let w = reweight(&a, &e).unwrap();
        // (1,1) is vertex 6; vertical neighbour 11 shares the level set,
        // horizontal neighbour 7 does not, diagonal 12 does not either
        let vertical = w.get(6, 11).unwrap();
        let horizontal = w.get(6, 7).unwrap();
        let diagonal = w.get(6, 12).unwrap();
        let two_down = w.get(6, 16).unwrap();
        assert!(vertical > horizontal);
        assert!(two_down > horizontal);
        assert_eq!(diagonal, horizontal);
    }

    #[test]
    fn aggregate_even_path() {
        let w = graph(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]);
        let cover = PathCover {
            paths: vec![vec![0, 1, 2, 3]],
        };
        let (agg, p) = path_cover_aggregate(&cover, &w, 2, None).unwrap();
        assert_eq!(agg.assign, vec![0, 0, 1, 1]);
        assert_eq!(
            p.to_dense(),
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]
        );
    }

    #[test]
    fn aggregate_trailing_vertex_joins_pair() {
        let w = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let cover = PathCover {
            paths: vec![vec![0, 1, 2]],
        };
        let (agg, _) = path_cover_aggregate(&cover, &w, 2, None).unwrap();
        assert_eq!(agg_sets(&agg), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn aggregate_case_one_and_case_three() {
        // path [0,1,2] gives {0,1,2} after 2 joins; vertex 3 hangs off 1 and
        // steals it (Case 3); vertex 4/5 are unaggregated neighbours (Case 1).
        let w = graph(6, &[(0, 1, 5.0), (1, 2, 5.0), (1, 3, 4.0), (4, 5, 1.0)]);
        let cover = PathCover {
            paths: vec![vec![0, 1, 2]],
        };
        let (agg, _) = path_cover_aggregate(&cover, &w, 2, None).unwrap();
        // 2 trailing -> joins {0,1}; 3 -> heaviest is 1 in a triple -> {1,3};
        // 4 -> 5 unaggregated -> {4,5}
        assert_eq!(agg_sets(&agg), vec![vec![0, 2], vec![1, 3], vec![4, 5]]);
    }

    #[test]
    fn aggregate_isolated_vertex_is_singleton() {
        let w = graph(3, &[(0, 1, 1.0)]);
        let (agg, _) = path_cover_aggregate(&PathCover::default(), &w, 2, None).unwrap();
        assert_eq!(agg_sets(&agg), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn aggregate_rejects_out_of_range_cover() {
        let w = graph(2, &[(0, 1, 1.0)]);
        let cover = PathCover {
            paths: vec![vec![0, 5]],
        };
        assert!(path_cover_aggregate(&cover, &w, 2, None).is_err());
    }

    #[test]
    fn level_one_prolongation_reproduces_e() {
        let agg = Aggregation {
            assign: vec![0, 0, 1],
            num_agg: 2,
        };
        let e = [0.5, 0.5, -1.0];
        let p = prolongation(&agg, Some(&e));
        assert_eq!(p.to_dense(), vec![vec![0.5, 0.0], vec![0.5, 0.0], vec![0.0, -1.0]]);
        assert_eq!(p.spmv(&[1.0, 1.0]).unwrap(), e.to_vec());
    }

    #[test]
    fn shorten_even_path() {
        let cover = PathCover {
            paths: vec![vec![0, 1, 2, 3]],
        };
        let agg = Aggregation {
            assign: vec![0, 0, 1, 1],
            num_agg: 2,
        };
        assert_eq!(shorten_cover(&cover, &agg).paths, vec![vec![0, 1]]);
    }

    #[test]
    fn shorten_drops_collapsed_path() {
        let cover = PathCover {
            paths: vec![vec![0, 1, 2]],
        };
        let agg = Aggregation {
            assign: vec![0, 0, 0],
            num_agg: 1,
        };
        assert!(shorten_cover(&cover, &agg).paths.is_empty());
    }

    #[test]
    fn shorten_keeps_disjointness() {
        let cover = PathCover {
            paths: vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7, 8]],
        };
        // 8 was absorbed into aggregate 1 (vertices 2,3)
        let agg = Aggregation {
            assign: vec![0, 0, 1, 1, 2, 2, 3, 3, 1],
            num_agg: 4,
        };
        let short = shorten_cover(&cover, &agg);
        assert_eq!(short.paths, vec![vec![0, 1], vec![2, 3]]);
        short.validate(4, None).unwrap();
    }

    #[test]
    fn eight_vertex_ramp_pairs_along_the_path() {
        let w = graph(8, &(0..7).map(|i| (i, i + 1, 1.0)).collect::<Vec<_>>());
        let a = laplacian_from_adjacency(&w).unwrap();
        let e: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let wt = reweight(&a, &e).unwrap();
        let cover = path_cover(&wt);
        // A² weights: distance-1 pairs weigh 1, distance-2 pairs 1/2
        assert_eq!(cover.paths, vec![(0..8).collect::<Vec<_>>()]);
        let (agg, _) = path_cover_aggregate(&cover, &wt, 1, Some(&e)).unwrap();
        assert_eq!(agg.assign, vec![0, 0, 1, 1, 2, 2, 3, 3]);
        assert!(adjacency_from_laplacian(&a).is_ok());
    }
}
