//! Graph generators, file readers, preprocessing and right-hand sides.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg32;

use crate::error::{Error, Result};
use crate::sparse::{laplacian_from_adjacency, SparseMatrix};

/// A raw weighted graph as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub n_vertices: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

/// Right-hand-side families used by the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsKind {
    /// `[1, 1, …, 1, 1 − n]`
    LowFrequency,
    /// Uniform(−1, 1) entries from a seeded PCG32 stream, mean removed.
    ZeroSumRandom(u64),
    Zero,
}

/// Laplacian of the `nx × ny` four-neighbour grid, row-major numbering.
pub fn grid_laplacian(nx: usize, ny: usize) -> Result<SparseMatrix> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid needs nx, ny >= 2 (got {nx}x{ny})"
        )));
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut t = Vec::with_capacity(4 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                t.push((id(i, j), id(i + 1, j), 1.0));
                t.push((id(i + 1, j), id(i, j), 1.0));
            }
            if j + 1 < ny {
                t.push((id(i, j), id(i, j + 1), 1.0));
                t.push((id(i, j + 1), id(i, j), 1.0));
            }
        }
    }
    let w = SparseMatrix::from_triplets(nx * ny, nx * ny, &t)?;
    laplacian_from_adjacency(&w)
}

/// Laplacian of the degree-4 ring lattice (Watts–Strogatz with β = 0).
pub fn ring_graph(n: usize) -> Result<SparseMatrix> {
    if n < 5 {
        return Err(Error::InvalidArgument(format!("ring graph needs n >= 5 (got {n})")));
    }
    let mut t = Vec::with_capacity(4 * n);
    for i in 0..n {
        for d in [1, 2, n - 1, n - 2] {
            t.push((i, (i + d) % n, 1.0));
        }
    }
    let w = SparseMatrix::from_triplets(n, n, &t)?;
    laplacian_from_adjacency(&w)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<EdgeList> {
    let path = path.as_ref();
    parse_matrix_market(open(path)?, &path.display().to_string())
}

/// Parses a coordinate-format Matrix Market stream.
///
/// Each unordered vertex pair yields one edge: when both `(i, j)` and `(j, i)`
/// are present the later one is treated as the mirror and dropped. Diagonal
/// entries come through as self-loops.
pub fn parse_matrix_market<R: BufRead>(reader: R, source: &str) -> Result<EdgeList> {
    let err = |line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        line,
        msg,
    };
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));

    let (lineno, header) = match lines.next() {
        Some((k, l)) => (k, l.map_err(|e| err(k, e.to_string()))?),
        None => return Err(err(1, "empty file".into())),
    };
    let tokens: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(lineno, format!("bad banner {header:?}")));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::UnsupportedFormat(format!(
            "{} storage (only coordinate)",
            tokens[2]
        )));
    }
    let pattern = match tokens[3].as_str() {
        "pattern" => true,
        "real" | "integer" => false,
        other => return Err(Error::UnsupportedFormat(format!("{other} field"))),
    };
    // symmetric files list one triangle; both map onto the same undirected edge
    if !matches!(tokens[4].as_str(), "general" | "symmetric") {
        return Err(Error::UnsupportedFormat(format!("{} symmetry", tokens[4])));
    }

    let mut size: Option<(usize, usize)> = None;
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut edges = Vec::new();
    let mut n_entries = 0usize;
    for (k, line) in lines {
        let line = line.map_err(|e| err(k, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some((n, nnz)) = size else {
            if fields.len() != 3 {
                return Err(err(k, "size line needs `rows cols nnz`".into()));
            }
            let parsed: Vec<usize> = fields
                .iter()
                .map(|f| f.parse::<usize>().map_err(|_| err(k, format!("bad size token {f:?}"))))
                .collect::<Result<_>>()?;
            if parsed[0] != parsed[1] {
                return Err(Error::UnsupportedFormat(format!(
                    "non-square matrix {}x{} is not a graph",
                    parsed[0], parsed[1]
                )));
            }
            size = Some((parsed[0], parsed[2]));
            continue;
        };
        let expected = if pattern { 2 } else { 3 };
        if fields.len() != expected {
            return Err(err(k, format!("expected {expected} fields, found {}", fields.len())));
        }
        let index = |f: &str| -> Result<usize> {
            let v: usize = f.parse().map_err(|_| err(k, format!("bad index {f:?}")))?;
            if v == 0 || v > n {
                return Err(err(k, format!("index {v} outside 1..={n}")));
            }
            Ok(v - 1)
        };
        let i = index(fields[0])?;
        let j = index(fields[1])?;
        let w = if pattern {
            1.0
        } else {
            let w: f64 = fields[2]
                .parse()
                .map_err(|_| err(k, format!("bad value {:?}", fields[2])))?;
            if !w.is_finite() {
                return Err(err(k, format!("non-finite value {w}")));
            }
            w
        };
        n_entries += 1;
        if n_entries > nnz {
            return Err(err(k, format!("more than the declared {nnz} entries")));
        }
        let key = (i.min(j), i.max(j));
        if seen.insert(key) {
            edges.push((i, j, w));
        }
    }
    let Some((n, nnz)) = size else {
        return Err(Error::Parse {
            path: source.to_string(),
            line: 0,
            msg: "missing size line".into(),
        });
    };
    if n_entries != nnz {
        return Err(Error::Parse {
            path: source.to_string(),
            line: 0,
            msg: format!("declared {nnz} entries, found {n_entries}"),
        });
    }
    Ok(EdgeList { n_vertices: n, edges })
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<EdgeList> {
    let path = path.as_ref();
    parse_edge_list(open(path)?, &path.display().to_string())
}

/// Parses `u v [w]` lines; ids are re-indexed densely by first appearance.
pub fn parse_edge_list<R: BufRead>(reader: R, source: &str) -> Result<EdgeList> {
    let mut ids: HashMap<u64, usize> = HashMap::new();
    let mut edges = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let k = k + 1;
        let err = |msg: String| Error::Parse {
            path: source.to_string(),
            line: k,
            msg,
        };
        let line = line.map_err(|e| err(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(err(format!("expected `u v [w]`, found {} fields", fields.len())));
        }
        let mut vertex = |f: &str| -> Result<usize> {
            let raw: u64 = f.parse().map_err(|_| err(format!("bad vertex id {f:?}")))?;
            let next = ids.len();
            Ok(*ids.entry(raw).or_insert(next))
        };
        let u = vertex(fields[0])?;
        let v = vertex(fields[1])?;
        let w = match fields.get(2) {
            Some(f) => f
                .parse::<f64>()
                .ok()
                .filter(|w| w.is_finite())
                .ok_or_else(|| err(format!("bad weight {f:?}")))?,
            None => 1.0,
        };
        edges.push((u, v, w));
    }
    Ok(EdgeList {
        n_vertices: ids.len(),
        edges,
    })
}

/// Writes the upper triangle of a symmetric adjacency matrix as a
/// `real symmetric` Matrix Market file (stored as the lower triangle).
pub fn write_matrix_market(path: impl AsRef<Path>, adjacency: &SparseMatrix) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let mut entries = Vec::new();
    for i in 0..adjacency.n_rows() {
        let (cols, vals) = adjacency.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j < i {
                entries.push((i, j, v));
            }
        }
    }
    writeln!(out, "%%MatrixMarket matrix coordinate real symmetric").map_err(io)?;
    writeln!(out, "{} {} {}", adjacency.n_rows(), adjacency.n_cols(), entries.len()).map_err(io)?;
    for (i, j, v) in entries {
        writeln!(out, "{} {} {}", i + 1, j + 1, v).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Laplacian of the largest connected component.
///
/// Weights are made absolute before parallel edges (including both
/// directions of a directed pair) are summed. Self-loops and zero-weight edges
/// are discarded. Vertices keep their relative order. Ties between equally
/// large components go to the one holding the smallest vertex index.
pub fn preprocess(raw: &EdgeList) -> Result<SparseMatrix> {
    let n = raw.n_vertices;
    let mut merged: HashMap<(usize, usize), f64> = HashMap::new();
    for &(u, v, w) in &raw.edges {
        if u >= n || v >= n {
            return Err(Error::InvalidArgument(format!("edge ({u}, {v}) outside {n} vertices")));
        }
        if u == v || w == 0.0 {
            continue;
        }
        *merged.entry((u.min(v), u.max(v))).or_insert(0.0) += w.abs();
    }
    if merged.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * merged.len());
    for (&(u, v), &w) in &merged {
        triplets.push((u, v, w));
        triplets.push((v, u, w));
    }
    let w = SparseMatrix::from_triplets(n, n, &triplets)?;

    let (labels, count) = connected_components(&w);
    let mut sizes = vec![0usize; count];
    for &c in &labels {
        sizes[c] += 1;
    }
    // labels are assigned in order of the smallest member, so max_by_key's
    // last-wins tie rule is reversed here
    let best = (0..count).rev().max_by_key(|&c| sizes[c]).unwrap();
    if sizes[best] < 2 {
        return Err(Error::EmptyGraph);
    }
    let mut new_index = vec![usize::MAX; n];
    let mut m = 0;
    for v in 0..n {
        if labels[v] == best {
            new_index[v] = m;
            m += 1;
        }
    }
    let kept: Vec<(usize, usize, f64)> = triplets
        .into_iter()
        .filter(|&(u, _, _)| labels[u] == best)
        .map(|(u, v, w)| (new_index[u], new_index[v], w))
        .collect();
    laplacian_from_adjacency(&SparseMatrix::from_triplets(m, m, &kept)?)
}

/// Component label per vertex (labels ordered by smallest member) and the
/// number of components.
pub fn connected_components(adjacency: &SparseMatrix) -> (Vec<usize>, usize) {
    let n = adjacency.n_rows();
    let mut label = vec![usize::MAX; n];
    let mut count = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = count;
        stack.push(s);
        while let Some(u) = stack.pop() {
            for &v in adjacency.row(u).0 {
                if label[v] == usize::MAX {
                    label[v] = count;
                    stack.push(v);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

pub fn make_rhs(kind: RhsKind, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "right-hand side needs n >= 2 (got {n})"
        )));
    }
    Ok(match kind {
        RhsKind::LowFrequency => {
            let mut b = vec![1.0; n];
            b[n - 1] = 1.0 - n as f64;
            b
        }
        RhsKind::ZeroSumRandom(seed) => {
            let mut rng = Pcg32::seed_from_u64(seed);
            let mut b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            crate::sparse::project_out_constant_in_place(&mut b);
            b
        }
        RhsKind::Zero => vec![0.0; n],
    })
}
