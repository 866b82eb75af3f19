//! Sparse symmetric matrices: assembly triplets, CSR storage, fill-in
//! orderings, and an up-looking LDLᵀ factorization with dynamic 2×2
//! pivots for the indefinite shifted systems.
//!
//! Everything here is deterministic: triplet compression sums duplicates
//! in insertion order, orderings break ties by index, and the numeric
//! factorization is sequential.

use crate::mesh::Point3;
use std::collections::BinaryHeap;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("matrix is numerically singular at column {col} (pivot block could not be formed)")]
    Singular { col: usize },
    #[error(
        "estimated factor size {est} bytes exceeds the {limit}-byte limit; \
         export the matrices and solve out of process, or coarsen the mesh"
    )]
    FillGuard { est: usize, limit: usize },
    #[error("matrix dimension mismatch: {0}")]
    Dimension(String),
}

// ---------------------------------------------------------------------------
// Triplet assembly.

/// Assembly-order triplets.  `compress` is stable: duplicate entries sum
/// in insertion order, so identical insertion sequences give bit-identical
/// matrices regardless of how the triplets were produced.
#[derive(Debug, Clone, Default)]
pub struct Coo {
    pub n: usize,
    rows: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Coo {
    pub fn new(n: usize) -> Self {
        assert!(n < u32::MAX as usize);
        Self { n, rows: Vec::new(), cols: Vec::new(), vals: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.rows.push(i as u32);
        self.cols.push(j as u32);
        self.vals.push(v);
    }

    pub fn append(&mut self, other: &mut Coo) {
        assert_eq!(self.n, other.n);
        self.rows.append(&mut other.rows);
        self.cols.append(&mut other.cols);
        self.vals.append(&mut other.vals);
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn compress(&self) -> Csr {
        let mut order: Vec<u32> = (0..self.vals.len() as u32).collect();
        // Stable sort: ties (duplicate coordinates) stay in insertion order.
        order.sort_by_key(|&p| (self.rows[p as usize], self.cols[p as usize]));
        let mut indptr = vec![0usize; self.n + 1];
        let mut indices = Vec::new();
        let mut vals = Vec::new();
        let mut last: Option<(u32, u32)> = None;
        for &p in &order {
            let key = (self.rows[p as usize], self.cols[p as usize]);
            if last == Some(key) {
                *vals.last_mut().unwrap() += self.vals[p as usize];
            } else {
                indices.push(key.1);
                vals.push(self.vals[p as usize]);
                indptr[key.0 as usize + 1] += 1;
                last = Some(key);
            }
        }
        for i in 0..self.n {
            indptr[i + 1] += indptr[i];
        }
        Csr { n: self.n, indptr, indices, vals }
    }
}

// ---------------------------------------------------------------------------
// CSR storage.

/// Square CSR matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn zero(n: usize) -> Self {
        Self { n, indptr: vec![0; n + 1], indices: Vec::new(), vals: Vec::new() }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c as usize];
            }
            y[i] = acc;
        }
    }

    /// `alpha·self + beta·other`, with the union pattern.
    pub fn add_scaled(&self, alpha: f64, other: &Csr, beta: f64) -> Csr {
        assert_eq!(self.n, other.n);
        let mut indptr = vec![0usize; self.n + 1];
        let mut indices = Vec::new();
        let mut vals = Vec::new();
        for i in 0..self.n {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let (col, val) = if q >= cb.len() || (p < ca.len() && ca[p] < cb[q]) {
                    let out = (ca[p], alpha * va[p]);
                    p += 1;
                    out
                } else if p >= ca.len() || cb[q] < ca[p] {
                    let out = (cb[q], beta * vb[q]);
                    q += 1;
                    out
                } else {
                    let out = (ca[p], alpha * va[p] + beta * vb[q]);
                    p += 1;
                    q += 1;
                    out
                };
                indices.push(col);
                vals.push(val);
            }
            indptr[i + 1] = indices.len();
        }
        Csr { n: self.n, indptr, indices, vals }
    }

    /// Largest `|A_ij − A_ji|` over all stored entries.
    pub fn symmetry_gap(&self) -> f64 {
        let mut gap = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                gap = gap.max((v - self.get(*c as usize, i)).abs());
            }
        }
        gap
    }

    /// Averages the matrix with its transpose in place of the original:
    /// the return shares the union pattern.
    pub fn symmetrized(&self) -> Csr {
        self.add_scaled(0.5, &self.transpose(), 0.5)
    }

    pub fn transpose(&self) -> Csr {
        let mut indptr = vec![0usize; self.n + 1];
        for &c in &self.indices {
            indptr[c as usize + 1] += 1;
        }
        for i in 0..self.n {
            indptr[i + 1] += indptr[i];
        }
        let mut pos = indptr.clone();
        let mut indices = vec![0u32; self.nnz()];
        let mut vals = vec![0.0f64; self.nnz()];
        for i in 0..self.n {
            let (cols, vs) = self.row(i);
            for (c, v) in cols.iter().zip(vs) {
                let p = pos[*c as usize];
                indices[p] = i as u32;
                vals[p] = *v;
                pos[*c as usize] += 1;
            }
        }
        Csr { n: self.n, indptr, indices, vals }
    }

    /// `1 − nnz/n²`: the figure the CLI reports for assembled systems.
    pub fn sparsity_score(&self) -> f64 {
        1.0 - self.nnz() as f64 / (self.n as f64 * self.n as f64)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                m[(i, *c as usize)] = *v;
            }
        }
        m
    }

    /// Writes the upper triangle in the `plates-sym v1` format.  The
    /// header lines (provenance comments) are emitted verbatim after the
    /// magic line; each should already start with `#`.
    pub fn save_sym(&self, path: &std::path::Path, headers: &[String]) -> Result<(), SparseError> {
        let as_io = |source: std::io::Error| SparseError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut upper = Vec::new();
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if *c as usize >= i {
                    upper.push((i, *c as usize, *v));
                }
            }
        }
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(as_io)?);
        writeln!(out, "plates-sym v1").map_err(as_io)?;
        for h in headers {
            writeln!(out, "{h}").map_err(as_io)?;
        }
        writeln!(out, "{} {}", self.n, upper.len()).map_err(as_io)?;
        for (i, j, v) in upper {
            writeln!(out, "{i} {j} {v:.16e}").map_err(as_io)?;
        }
        out.flush().map_err(as_io)
    }

    /// Reads a `plates-sym v1` file and mirrors it to a full symmetric
    /// matrix.  `#` comment lines after the magic are skipped.
    pub fn load_sym(path: &std::path::Path) -> Result<Csr, SparseError> {
        let text = path.display().to_string();
        let as_io = |source: std::io::Error| SparseError::Io { path: text.clone(), source };
        let parse = |line: usize, msg: String| SparseError::Parse { path: text.clone(), line, msg };
        let file = std::fs::File::open(path).map_err(as_io)?;
        let mut lines = std::io::BufReader::new(file).lines().enumerate();
        let magic = lines
            .next()
            .ok_or_else(|| parse(1, "empty file".into()))?
            .1
            .map_err(as_io)?;
        if magic.trim_end() != "plates-sym v1" {
            return Err(parse(1, format!("bad magic {magic:?}, expected \"plates-sym v1\"")));
        }
        let mut header: Option<(usize, usize)> = None;
        let mut coo = Coo::default();
        let mut seen = 0usize;
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.map_err(as_io)?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match header {
                None => {
                    if fields.len() != 2 {
                        return Err(parse(lineno, format!("expected \"n nnz\", got {line:?}")));
                    }
                    let n: usize = fields[0]
                        .parse()
                        .map_err(|e| parse(lineno, format!("bad n: {e}")))?;
                    let nnz: usize = fields[1]
                        .parse()
                        .map_err(|e| parse(lineno, format!("bad nnz: {e}")))?;
                    header = Some((n, nnz));
                    coo = Coo::new(n);
                }
                Some((n, _)) => {
                    if fields.len() != 3 {
                        return Err(parse(lineno, format!("expected \"i j value\", got {line:?}")));
                    }
                    let i: usize = fields[0]
                        .parse()
                        .map_err(|e| parse(lineno, format!("bad row: {e}")))?;
                    let j: usize = fields[1]
                        .parse()
                        .map_err(|e| parse(lineno, format!("bad col: {e}")))?;
                    let v: f64 = fields[2]
                        .parse()
                        .map_err(|e| parse(lineno, format!("bad value: {e}")))?;
                    if i > j {
                        return Err(parse(lineno, format!("lower-triangle entry ({i}, {j})")));
                    }
                    if j >= n {
                        return Err(parse(lineno, format!("index {j} out of range for n = {n}")));
                    }
                    coo.push(i, j, v);
                    if i != j {
                        coo.push(j, i, v);
                    }
                    seen += 1;
                }
            }
        }
        let (_, nnz) = header.ok_or_else(|| parse(2, "missing \"n nnz\" header".into()))?;
        if seen != nnz {
            return Err(parse(0, format!("header declared {nnz} entries, file has {seen}")));
        }
        Ok(coo.compress())
    }
}

// ---------------------------------------------------------------------------
// Fill-reducing orderings.  Both return `perm` with `perm[new] = old`.

/// Reverse Cuthill–McKee: breadth-first from a minimum-degree vertex of
/// each component, neighbors by ascending degree (ties by index), order
/// reversed.  The fallback for matrices without geometry.
pub fn reverse_cuthill_mckee(a: &Csr) -> Vec<u32> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<u32> = (0..n as u32).collect();
    by_degree.sort_by_key(|&v| (degree[v as usize], v));
    let mut queue = std::collections::VecDeque::new();
    for &start in &by_degree {
        if visited[start as usize] {
            continue;
        }
        visited[start as usize] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<u32> = a
                .row(v as usize)
                .0
                .iter()
                .copied()
                .filter(|&w| w != v && !visited[w as usize])
                .collect();
            nbrs.sort_by_key(|&w| (degree[w as usize], w));
            for w in nbrs {
                if !visited[w as usize] {
                    visited[w as usize] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Nested dissection with geometric bisection: nodes split at the median
/// of their widest coordinate axis, a one-sided vertex separator is
/// ordered last, halves recurse.  Coordinates are the support centroids
/// of the basis elements.
pub fn geometric_nested_dissection(a: &Csr, coords: &[Point3]) -> Vec<u32> {
    assert_eq!(coords.len(), a.n);
    let mut order = Vec::with_capacity(a.n);
    let nodes: Vec<u32> = (0..a.n as u32).collect();
    let mut side = vec![0u8; a.n];
    nd_recurse(a, coords, nodes, &mut side, &mut order);
    order
}

fn nd_recurse(a: &Csr, coords: &[Point3], mut nodes: Vec<u32>, side: &mut [u8], out: &mut Vec<u32>) {
    const LEAF: usize = 48;
    if nodes.len() <= LEAF {
        nodes.sort_unstable();
        out.extend_from_slice(&nodes);
        return;
    }
    // Widest axis of the bounding box.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &v in &nodes {
        for d in 0..3 {
            lo[d] = lo[d].min(coords[v as usize][d]);
            hi[d] = hi[d].max(coords[v as usize][d]);
        }
    }
    let axis = (0..3).max_by(|&p, &q| {
        (hi[p] - lo[p]).partial_cmp(&(hi[q] - lo[q])).unwrap()
    })
    .unwrap();
    nodes.sort_by(|&p, &q| {
        coords[p as usize][axis]
            .partial_cmp(&coords[q as usize][axis])
            .unwrap()
            .then(p.cmp(&q))
    });
    let mid = nodes.len() / 2;
    let (left, right) = nodes.split_at(mid);
    // side: 1 = left, 2 = right, in this frame only.
    for &v in left {
        side[v as usize] = 1;
    }
    for &v in right {
        side[v as usize] = 2;
    }
    // One-sided separator: right nodes adjacent to the left half.
    let mut sep = Vec::new();
    let mut right_kept = Vec::new();
    for &v in right {
        let touches_left = a.row(v as usize).0.iter().any(|&w| side[w as usize] == 1);
        if touches_left {
            sep.push(v);
        } else {
            right_kept.push(v);
        }
    }
    let left: Vec<u32> = left.to_vec();
    // Clear markers before recursing (the slices overlap deeper frames).
    for &v in &nodes {
        side[v as usize] = 0;
    }
    nd_recurse(a, coords, left, side, out);
    nd_recurse(a, coords, right_kept, side, out);
    sep.sort_unstable();
    out.extend_from_slice(&sep);
}

/// Which ordering `factorize` applies.
#[derive(Clone, Copy)]
pub enum OrderingChoice<'a> {
    /// Identity (mostly for tests).
    Natural,
    /// Reverse Cuthill–McKee on the matrix graph.
    Rcm,
    /// Geometric nested dissection on per-unknown support centroids.
    GeometricNd(&'a [Point3]),
}

// ---------------------------------------------------------------------------
// LDLᵀ factorization.

#[derive(Debug, Clone, Copy)]
pub struct FactorOptions {
    /// A 1×1 pivot `d` is degenerate when `|d| ≤ pivot_tol · colscale`;
    /// degenerate pivots open a 2×2 block with the next column.
    pub pivot_tol: f64,
    /// Abort before allocating when the symbolic fill estimate exceeds
    /// this many bytes.
    pub max_factor_bytes: usize,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self { pivot_tol: 1e-13, max_factor_bytes: 4 << 30 }
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Piv {
    Single,
    BlockOpen,
    BlockStart,
    BlockSecond,
}

/// `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L` and block-diagonal
/// `D` of 1×1 and 2×2 pivots.  2×2 blocks appear only where a 1×1 pivot
/// degenerates, which keeps the factorization well-defined on the
/// indefinite shifted systems without a full Bunch–Kaufman search.
#[derive(Debug)]
pub struct LdlFactor {
    n: usize,
    /// perm[new] = old
    perm: Vec<u32>,
    /// Column-major L (strictly lower): cols[j] = [(row, value), …],
    /// rows ascending.
    cols: Vec<Vec<(u32, f64)>>,
    d: Vec<f64>,
    /// Off-diagonal of the 2×2 block starting at each BlockStart column.
    e: Vec<f64>,
    kind: Vec<Piv>,
    /// Number of 2×2 pivot blocks formed.
    pub n_blocks: usize,
}

pub fn factorize(
    a: &Csr,
    ordering: OrderingChoice,
    opts: &FactorOptions,
) -> Result<LdlFactor, SparseError> {
    let n = a.n;
    let perm = match ordering {
        OrderingChoice::Natural => (0..n as u32).collect(),
        OrderingChoice::Rcm => reverse_cuthill_mckee(a),
        OrderingChoice::GeometricNd(coords) => geometric_nested_dissection(a, coords),
    };
    let mut iperm = vec![0u32; n];
    for (new, &old) in perm.iter().enumerate() {
        iperm[old as usize] = new as u32;
    }

    // Permuted strictly-lower rows plus diagonal.
    let mut rows_lower: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let mut diag = vec![0.0f64; n];
    for i in 0..n {
        let pi = iperm[i] as usize;
        let (cols, vals) = a.row(i);
        for (c, v) in cols.iter().zip(vals) {
            let pj = iperm[*c as usize] as usize;
            match pj.cmp(&pi) {
                std::cmp::Ordering::Less => rows_lower[pi].push((pj as u32, *v)),
                std::cmp::Ordering::Equal => diag[pi] = *v,
                std::cmp::Ordering::Greater => {} // mirrored entry
            }
        }
    }
    for r in &mut rows_lower {
        r.sort_unstable_by_key(|&(c, _)| c);
    }

    // Symbolic pass: elimination tree and fill count on the static
    // pattern (2×2 merges can add a little beyond this; the guard is a
    // budget check, not an exact bound).
    let mut parent = vec![u32::MAX; n];
    let mut ancestor = vec![u32::MAX; n];
    for k in 0..n {
        for &(j, _) in &rows_lower[k] {
            let mut j = j as usize;
            while ancestor[j] != u32::MAX && ancestor[j] != k as u32 {
                let next = ancestor[j];
                ancestor[j] = k as u32;
                j = next as usize;
            }
            if ancestor[j] == u32::MAX {
                ancestor[j] = k as u32;
                parent[j] = k as u32;
            }
        }
    }
    let mut mark = vec![u32::MAX; n];
    let mut fill = 0usize;
    for k in 0..n {
        mark[k] = k as u32;
        for &(j, _) in &rows_lower[k] {
            let mut j = j as usize;
            while mark[j] != k as u32 {
                mark[j] = k as u32;
                fill += 1;
                if parent[j] == u32::MAX {
                    break;
                }
                j = parent[j] as usize;
            }
        }
    }
    let est = fill * 12 + n * 48;
    if est > opts.max_factor_bytes {
        return Err(SparseError::FillGuard { est, limit: opts.max_factor_bytes });
    }

    // Numeric up-looking pass with dynamic column patterns.
    let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    let mut kind = vec![Piv::Single; n];
    let mut colscale = vec![0.0f64; n];
    let mut n_blocks = 0usize;

    let mut w = vec![0.0f64; n];
    let mut seen = vec![u32::MAX; n];
    let mut heap: BinaryHeap<std::cmp::Reverse<u32>> = BinaryHeap::new();
    let mut pattern: Vec<u32> = Vec::new();

    for k in 0..n {
        let stamp = k as u32;
        pattern.clear();
        for &(j, v) in &rows_lower[k] {
            w[j as usize] = v;
            seen[j as usize] = stamp;
            heap.push(std::cmp::Reverse(j));
        }
        // Sparse forward solve: z = L[0..k,0..k]⁻¹ · A[0..k, k].
        while let Some(std::cmp::Reverse(j)) = heap.pop() {
            if pattern.last() == Some(&j) {
                continue; // duplicate heap entry
            }
            pattern.push(j);
            let zj = w[j as usize];
            if zj != 0.0 {
                for &(i, lij) in &cols[j as usize] {
                    if seen[i as usize] != stamp {
                        seen[i as usize] = stamp;
                        w[i as usize] = 0.0;
                        heap.push(std::cmp::Reverse(i));
                    }
                    w[i as usize] -= lij * zj;
                }
            }
        }

        // Division by completed pivot blocks; capture the off-diagonal of
        // an open block; accumulate the diagonal update.
        let mut acc = 0.0f64;
        let mut scale = diag[k].abs();
        let mut row_out: Vec<(u32, f64)> = Vec::with_capacity(pattern.len());
        let mut p = 0;
        let mut open_offdiag: Option<f64> = None;
        while p < pattern.len() {
            let j = pattern[p] as usize;
            let zj = w[j];
            scale = scale.max(zj.abs());
            match kind[j] {
                Piv::Single => {
                    let l = zj / d[j];
                    if l != 0.0 {
                        row_out.push((j as u32, l));
                    }
                    acc += l * zj;
                    p += 1;
                }
                Piv::BlockOpen => {
                    // Only the immediately preceding row can leave a block
                    // open, so this is row k = j + 1 closing it.
                    debug_assert_eq!(j + 1, k);
                    open_offdiag = Some(zj);
                    p += 1;
                }
                Piv::BlockStart => {
                    let j1 = j + 1;
                    let z1 = if seen[j1] == stamp && pattern.binary_search(&(j1 as u32)).is_ok() {
                        w[j1]
                    } else {
                        0.0
                    };
                    scale = scale.max(z1.abs());
                    let det = d[j] * d[j1] - e[j] * e[j];
                    let l0 = (d[j1] * zj - e[j] * z1) / det;
                    let l1 = (-e[j] * zj + d[j] * z1) / det;
                    if l0 != 0.0 {
                        row_out.push((j as u32, l0));
                    }
                    if l1 != 0.0 {
                        row_out.push((j1 as u32, l1));
                    }
                    acc += l0 * zj + l1 * z1;
                    // Skip the partner if it is next in the pattern.
                    p += 1;
                    if p < pattern.len() && pattern[p] as usize == j1 {
                        p += 1;
                    }
                }
                Piv::BlockSecond => {
                    // Partner j−1 was not in the pattern: same joint solve
                    // with z at the block start equal to zero.
                    let j0 = j - 1;
                    let det = d[j0] * d[j] - e[j0] * e[j0];
                    let l0 = -e[j0] * zj / det;
                    let l1 = d[j0] * zj / det;
                    if l0 != 0.0 {
                        row_out.push((j0 as u32, l0));
                    }
                    if l1 != 0.0 {
                        row_out.push((j as u32, l1));
                    }
                    acc += l1 * zj;
                    p += 1;
                }
            }
        }
        row_out.sort_unstable_by_key(|&(c, _)| c);

        let dk = diag[k] - acc;
        colscale[k] = scale;

        if k > 0 && kind[k - 1] == Piv::BlockOpen {
            // A block opened at k−1 must close here, coupled or not; an
            // uncoupled degenerate pair is genuinely singular for this
            // pivot strategy and the caller retries with a perturbed
            // shift.
            let off = open_offdiag.unwrap_or(0.0);
            let j0 = k - 1;
            d[k] = dk;
            e[j0] = off;
            let block_scale = colscale[j0]
                .max(scale)
                .max(off.abs())
                .max(f64::MIN_POSITIVE);
            let det = d[j0] * d[k] - off * off;
            if !(det.abs() > opts.pivot_tol * block_scale * block_scale) {
                return Err(SparseError::Singular { col: k });
            }
            kind[j0] = Piv::BlockStart;
            kind[k] = Piv::BlockSecond;
            n_blocks += 1;
        } else if dk.abs() <= opts.pivot_tol * scale || dk == 0.0 {
            // Degenerate 1×1 pivot: open a block with the next column.
            if k + 1 == n {
                return Err(SparseError::Singular { col: k });
            }
            d[k] = dk;
            kind[k] = Piv::BlockOpen;
        } else {
            d[k] = dk;
            kind[k] = Piv::Single;
        }

        for (j, l) in row_out {
            cols[j as usize].push((k as u32, l));
        }
    }

    Ok(LdlFactor { n, perm, cols, d, e, kind, n_blocks })
}

impl LdlFactor {
    /// Solves `A x = b` through the factorization (no refinement).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut z: Vec<f64> = self.perm.iter().map(|&old| b[old as usize]).collect();
        // Forward: L z' = z.
        for j in 0..self.n {
            let zj = z[j];
            if zj != 0.0 {
                for &(i, lij) in &self.cols[j] {
                    z[i as usize] -= lij * zj;
                }
            }
        }
        // Block diagonal.
        let mut j = 0;
        while j < self.n {
            match self.kind[j] {
                Piv::Single => {
                    z[j] /= self.d[j];
                    j += 1;
                }
                Piv::BlockStart => {
                    let det = self.d[j] * self.d[j + 1] - self.e[j] * self.e[j];
                    let (z0, z1) = (z[j], z[j + 1]);
                    z[j] = (self.d[j + 1] * z0 - self.e[j] * z1) / det;
                    z[j + 1] = (-self.e[j] * z0 + self.d[j] * z1) / det;
                    j += 2;
                }
                Piv::BlockSecond | Piv::BlockOpen => unreachable!("factorization left no open blocks"),
            }
        }
        // Backward: Lᵀ x = z.
        for j in (0..self.n).rev() {
            let mut acc = z[j];
            for &(i, lij) in &self.cols[j] {
                acc -= lij * z[i as usize];
            }
            z[j] = acc;
        }
        let mut x = vec![0.0f64; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old as usize] = z[new];
        }
        x
    }

    /// Solve with iterative refinement against the original matrix:
    /// up to `max_steps` corrections or until `‖r‖ ≤ rtol·‖b‖`.
    /// Returns the solution, the final relative residual, and the number
    /// of refinement steps taken.
    pub fn solve_refined(
        &self,
        a: &Csr,
        b: &[f64],
        max_steps: usize,
        rtol: f64,
    ) -> (Vec<f64>, f64, usize) {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let bnorm = norm(b).max(f64::MIN_POSITIVE);
        let mut x = self.solve(b);
        let mut r = vec![0.0f64; self.n];
        let mut steps = 0;
        loop {
            a.matvec(&x, &mut r);
            for i in 0..self.n {
                r[i] = b[i] - r[i];
            }
            let rel = norm(&r) / bnorm;
            if rel <= rtol || steps >= max_steps {
                return (x, rel, steps);
            }
            let dx = self.solve(&r);
            for i in 0..self.n {
                x[i] += dx[i];
            }
            steps += 1;
        }
    }

    pub fn nnz_l(&self) -> usize {
        self.cols.iter().map(|c| c.len()).sum()
    }
}
