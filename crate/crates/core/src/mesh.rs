//! Tetrahedral complexes, their barycentric subdivisions, and incidence data.
//!
//! A [`SimplicialComplex3`] stores the simplices of each dimension as
//! ascending vertex tuples, sorted lexicographically.  That ordering is the
//! backbone of reproducibility: simplex ids are fully determined by the
//! vertex set, independent of construction order or thread count.
//!
//! The subdivision `K'` of a complex `K` refines every tetrahedron into 24
//! flag tetrahedra `[b_T, b_f, b_e, b_v]` spanned by barycenters of a
//! descending chain of faces.  Vertices of `K'` are banded by parent
//! dimension — tet barycenters first, then face, edge and vertex
//! barycenters — so a flag chain read in decreasing parent dimension is
//! automatically an ascending vertex tuple.
//!
//! Boundary faces carry an outward frame used by the traction terms of the
//! assembled systems, and `face_tet` incidence absorbs the geometric
//! orientation of each tet so that the two signs seen by an interior face
//! are always opposite regardless of how the ascending tuple happens to be
//! oriented.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Coordinates of a mesh vertex, metres.
pub type Point3 = [f64; 3];

/// Identifies the simplex of `K` a subdivision vertex is the barycenter of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Parent {
    /// Dimension of the parent simplex (0..=3).
    pub dim: u8,
    /// Index into the parent complex's simplex list of that dimension.
    pub index: usize,
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("extent {extent} is not an integer multiple of block size {block} along axis {axis}")]
    DimensionMismatch { axis: char, extent: f64, block: f64 },
    #[error("block sizes must be positive, got {0:?}")]
    BadBlock(Point3),
    #[error("{path}:{line}: parse error: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("closure violation: tetrahedron {tet:?} references vertex {vertex} but only {nverts} vertices are defined")]
    ClosureViolation { tet: [usize; 4], vertex: usize, nverts: usize },
    #[error("tetrahedron {0:?} has repeated vertices")]
    RepeatedVertex([usize; 4]),
    #[error("tetrahedron {tet:?} is degenerate (volume {vol:.3e})")]
    DegenerateTet { tet: [usize; 4], vol: f64 },
    #[error("non-conforming mesh: face {face:?} bounds {count} tetrahedra")]
    NonConforming { face: [usize; 3], count: usize },
    #[error("duplicate tetrahedron {0:?}")]
    DuplicateTet([usize; 4]),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A finite 3-dimensional simplicial complex embedded in `R^3`.
///
/// All simplex tuples are ascending and each dimension's list is sorted
/// lexicographically, so ids are canonical.  Lower-dimensional simplices
/// are exactly the subsets of the stored tetrahedra: the complex is the
/// closure of its top cells.
#[derive(Debug, Clone)]
pub struct SimplicialComplex3 {
    pub verts: Vec<Point3>,
    pub edges: Vec<[usize; 2]>,
    pub faces: Vec<[usize; 3]>,
    pub tets: Vec<[usize; 4]>,

    /// Per-face incident tets; boundary faces have exactly one.
    pub face_tets: Vec<(usize, Option<usize>)>,
    /// The four faces of each tet, in delete-vertex order (`faces[k]` omits
    /// vertex `k` of the ascending tuple).
    pub tet_faces: Vec<[usize; 4]>,
    /// The six edges of each tet, ordered as pairs (0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
    pub tet_edges: Vec<[usize; 6]>,
    /// The three edges of each face, in delete-vertex order.
    pub face_edges: Vec<[usize; 3]>,

    pub vert_boundary: Vec<bool>,
    pub edge_boundary: Vec<bool>,
    pub face_boundary: Vec<bool>,

    /// For a barycentric subdivision, the parent simplex of every vertex.
    pub vertex_parent: Option<Vec<Parent>>,
    /// The complex this one subdivides, when applicable.
    pub parent: Option<Box<SimplicialComplex3>>,
}

impl SimplicialComplex3 {
    /// Builds the closure of a set of tetrahedra and validates that it is a
    /// conforming mesh: vertex indices in range, no repeated or duplicate
    /// tets, no degenerate tets, and every face shared by at most two.
    pub fn from_tets(verts: Vec<Point3>, tets: Vec<[usize; 4]>) -> Result<Self, MeshError> {
        let nverts = verts.len();
        let mut canon: Vec<[usize; 4]> = Vec::with_capacity(tets.len());
        for t in &tets {
            for &v in t {
                if v >= nverts {
                    return Err(MeshError::ClosureViolation { tet: *t, vertex: v, nverts });
                }
            }
            let mut s = *t;
            s.sort_unstable();
            if s[0] == s[1] || s[1] == s[2] || s[2] == s[3] {
                return Err(MeshError::RepeatedVertex(*t));
            }
            canon.push(s);
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(MeshError::DuplicateTet(w[0]));
        }

        // Degeneracy: volume below a scale-relative floor.
        for t in &canon {
            let vol = signed_volume(&verts, t);
            let scale = edge_len_max(&verts, t);
            if vol.abs() <= 1e-14 * scale * scale * scale {
                return Err(MeshError::DegenerateTet { tet: *t, vol });
            }
        }

        // Derive faces and edges as subsets.
        let mut faces: Vec<[usize; 3]> = Vec::with_capacity(4 * canon.len());
        let mut edges: Vec<[usize; 2]> = Vec::with_capacity(6 * canon.len());
        for t in &canon {
            for k in 0..4 {
                faces.push(delete4(t, k));
            }
            for (a, b) in PAIRS6 {
                edges.push([t[a], t[b]]);
            }
        }
        faces.sort_unstable();
        edges.sort_unstable();
        faces.dedup();
        edges.dedup();

        // Face -> tets incidence, with the conformity check.
        let mut face_tets: Vec<(usize, Option<usize>)> = vec![(usize::MAX, None); faces.len()];
        for (ti, t) in canon.iter().enumerate() {
            for k in 0..4 {
                let fi = faces.binary_search(&delete4(t, k)).expect("face of tet is in face list");
                let slot = &mut face_tets[fi];
                if slot.0 == usize::MAX {
                    slot.0 = ti;
                } else if slot.1.is_none() {
                    slot.1 = Some(ti);
                } else {
                    return Err(MeshError::NonConforming { face: faces[fi], count: 3 });
                }
            }
        }

        let mut tet_faces = vec![[0usize; 4]; canon.len()];
        let mut tet_edges = vec![[0usize; 6]; canon.len()];
        for (ti, t) in canon.iter().enumerate() {
            for k in 0..4 {
                tet_faces[ti][k] = faces.binary_search(&delete4(t, k)).unwrap();
            }
            for (j, (a, b)) in PAIRS6.iter().enumerate() {
                tet_edges[ti][j] = edges.binary_search(&[t[*a], t[*b]]).unwrap();
            }
        }
        let mut face_edges = vec![[0usize; 3]; faces.len()];
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                face_edges[fi][k] = edges.binary_search(&delete3(f, k)).unwrap();
            }
        }

        let face_boundary: Vec<bool> = face_tets.iter().map(|ft| ft.1.is_none()).collect();
        let mut edge_boundary = vec![false; edges.len()];
        let mut vert_boundary = vec![false; nverts];
        for (fi, f) in faces.iter().enumerate() {
            if face_boundary[fi] {
                for k in 0..3 {
                    edge_boundary[face_edges[fi][k]] = true;
                }
                for &v in f {
                    vert_boundary[v] = true;
                }
            }
        }

        Ok(Self {
            verts,
            edges,
            faces,
            tets: canon,
            face_tets,
            tet_faces,
            tet_edges,
            face_edges,
            vert_boundary,
            edge_boundary,
            face_boundary,
            vertex_parent: None,
            parent: None,
        })
    }

    /// Number of simplices per dimension, `[V, E, F, T]`.
    pub fn counts(&self) -> [usize; 4] {
        [self.verts.len(), self.edges.len(), self.faces.len(), self.tets.len()]
    }

    /// Boundary simplex counts, `[V, E, F]`.
    pub fn boundary_counts(&self) -> [usize; 3] {
        [
            self.vert_boundary.iter().filter(|b| **b).count(),
            self.edge_boundary.iter().filter(|b| **b).count(),
            self.face_boundary.iter().filter(|b| **b).count(),
        ]
    }

    /// `V - E + F - T`; equals 1 for any complex contractible to a point.
    pub fn euler_characteristic(&self) -> i64 {
        let [v, e, f, t] = self.counts();
        v as i64 - e as i64 + f as i64 - t as i64
    }

    /// `V - E + F` over boundary simplices; equals 2 when the boundary is a
    /// topological sphere.
    pub fn boundary_euler_characteristic(&self) -> i64 {
        let [v, e, f] = self.boundary_counts();
        v as i64 - e as i64 + f as i64
    }

    /// Tessellates the slab `[0,ex] x [0,ey] x [0,ez]` into rectangular
    /// blocks of size `block`, each split into five tetrahedra.  The split
    /// alternates with the parity of the block so that neighbouring blocks
    /// agree on the diagonal of their shared rectangle.
    ///
    /// Fails if an extent is not an integer multiple of the block size.
    pub fn slab(extent: Point3, block: Point3) -> Result<Self, MeshError> {
        if block.iter().any(|&b| !(b > 0.0)) {
            return Err(MeshError::BadBlock(block));
        }
        let mut n = [0usize; 3];
        for ax in 0..3 {
            let ratio = extent[ax] / block[ax];
            let r = ratio.round();
            if r < 1.0 || (ratio - r).abs() > 1e-9 * ratio.max(1.0) {
                return Err(MeshError::DimensionMismatch {
                    axis: (b'x' + ax as u8) as char,
                    extent: extent[ax],
                    block: block[ax],
                });
            }
            n[ax] = r as usize;
        }
        let [nx, ny, nz] = n;
        let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
        let mut verts = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    verts.push([i as f64 * block[0], j as f64 * block[1], k as f64 * block[2]]);
                }
            }
        }

        // Corner-tet apexes per block parity.  A corner tet joins a corner
        // of the block to its three neighbours along the edges; the central
        // tet is spanned by the four unused corners.
        const EVEN_CORNERS: [[usize; 3]; 4] = [[0, 0, 0], [1, 1, 0], [1, 0, 1], [0, 1, 1]];
        const ODD_CORNERS: [[usize; 3]; 4] = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]];

        let mut tets = Vec::with_capacity(5 * nx * ny * nz);
        for bk in 0..nz {
            for bj in 0..ny {
                for bi in 0..nx {
                    let corner = |d: &[usize; 3]| vid(bi + d[0], bj + d[1], bk + d[2]);
                    let apexes =
                        if (bi + bj + bk) % 2 == 0 { &EVEN_CORNERS } else { &ODD_CORNERS };
                    for a in apexes {
                        let mut tet = [corner(a), 0, 0, 0];
                        for ax in 0..3 {
                            let mut nb = *a;
                            nb[ax] ^= 1;
                            tet[1 + ax] = corner(&nb);
                        }
                        tets.push(tet);
                    }
                    // Central tet: the opposite parity corners.
                    let others = if (bi + bj + bk) % 2 == 0 { &ODD_CORNERS } else { &EVEN_CORNERS };
                    tets.push([corner(&others[0]), corner(&others[1]), corner(&others[2]), corner(&others[3])]);
                }
            }
        }
        Self::from_tets(verts, tets)
    }

    /// The barycentric subdivision `K'`.
    ///
    /// Vertices of `K'` are barycenters, banded by parent dimension: first
    /// all tet barycenters (in tet order), then face, then edge, then the
    /// original vertices.  Each tetrahedron contributes the 24 flags
    /// `[b_T, b_f, b_e, b_v]` over chains `v < e < f < T`.  The result
    /// keeps a copy of `self` and the per-vertex parent map so that
    /// boundary sub-simplices can be grouped under their parent face.
    pub fn barycentric_subdivide(&self) -> Self {
        let [nv, ne, nf, nt] = self.counts();
        let off_tet = 0usize;
        let off_face = nt;
        let off_edge = nt + nf;
        let off_vert = nt + nf + ne;

        let mut verts = Vec::with_capacity(nv + ne + nf + nt);
        let mut vertex_parent = Vec::with_capacity(verts.capacity());
        for (i, t) in self.tets.iter().enumerate() {
            verts.push(barycenter(&self.verts, t));
            vertex_parent.push(Parent { dim: 3, index: i });
        }
        for (i, f) in self.faces.iter().enumerate() {
            verts.push(barycenter(&self.verts, f));
            vertex_parent.push(Parent { dim: 2, index: i });
        }
        for (i, e) in self.edges.iter().enumerate() {
            verts.push(barycenter(&self.verts, e));
            vertex_parent.push(Parent { dim: 1, index: i });
        }
        for (i, p) in self.verts.iter().enumerate() {
            verts.push(*p);
            vertex_parent.push(Parent { dim: 0, index: i });
        }

        let mut tets = Vec::with_capacity(24 * nt);
        for (ti, t) in self.tets.iter().enumerate() {
            for k in 0..4 {
                let f = delete4(t, k);
                let fi = self.tet_faces[ti][k];
                for m in 0..3 {
                    let e = delete3(&f, m);
                    let ei = self.face_edges[fi][m];
                    for &v in &e {
                        tets.push([off_tet + ti, off_face + fi, off_edge + ei, off_vert + v]);
                    }
                }
            }
        }

        let mut sub = Self::from_tets(verts, tets)
            .expect("barycentric subdivision of a valid complex is valid");
        sub.vertex_parent = Some(vertex_parent);
        sub.parent = Some(Box::new(self.clone()));
        sub
    }

    /// Parent simplex of the highest-dimensional barycenter among the given
    /// subdivision vertices, i.e. the simplex of `K` whose subdivision the
    /// simplex spanned by `verts` belongs to.  `None` unless this complex
    /// was produced by [`Self::barycentric_subdivide`].
    pub fn top_parent(&self, verts: &[usize]) -> Option<Parent> {
        let vp = self.vertex_parent.as_ref()?;
        verts.iter().map(|&v| vp[v]).max_by_key(|p| p.dim)
    }

    /// Signed volume of tet `t` (positive when the ascending tuple is
    /// positively oriented).
    pub fn tet_signed_volume(&self, t: usize) -> f64 {
        signed_volume(&self.verts, &self.tets[t])
    }

    /// Total unsigned volume.
    pub fn volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_signed_volume(t).abs()).sum()
    }

    /// Area of a face.
    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        let u = sub3(self.verts[b], self.verts[a]);
        let v = sub3(self.verts[c], self.verts[a]);
        0.5 * norm3(cross3(u, v))
    }

    /// Outward unit normal and area of a boundary face, oriented away from
    /// the unique incident tet.  Panics if the face is interior.
    pub fn boundary_face_frame(&self, f: usize) -> (Point3, f64) {
        assert!(self.face_boundary[f], "face {f} is not a boundary face");
        let ti = self.face_tets[f].0;
        let [a, b, c] = self.faces[f];
        let u = sub3(self.verts[b], self.verts[a]);
        let v = sub3(self.verts[c], self.verts[a]);
        let mut n = cross3(u, v);
        let area = 0.5 * norm3(n);
        // Point away from the vertex of the tet not on the face.
        let opp = *self.tets[ti]
            .iter()
            .find(|&&w| w != a && w != b && w != c)
            .expect("incident tet has an apex over the face");
        let d = sub3(self.verts[opp], self.verts[a]);
        if dot3(n, d) > 0.0 {
            n = [-n[0], -n[1], -n[2]];
        }
        let inv = 1.0 / (2.0 * area);
        ([n[0] * inv, n[1] * inv, n[2] * inv], area)
    }

    /// Barycenter of a face.
    pub fn face_barycenter(&self, f: usize) -> Point3 {
        barycenter(&self.verts, &self.faces[f])
    }

    /// The lowest-indexed tet whose closure contains `x`, with the
    /// barycentric coordinates of `x` in it.  Deterministic tie-breaking on
    /// shared faces: the smaller tet id wins.
    pub fn locate(&self, x: Point3) -> Option<(usize, [f64; 4])> {
        const TOL: f64 = 1e-10;
        for t in 0..self.tets.len() {
            let lam = self.barycentric_in_tet(t, x);
            if lam.iter().all(|&l| l >= -TOL) {
                return Some((t, lam));
            }
        }
        None
    }

    /// Barycentric coordinates of `x` with respect to tet `t`.
    pub fn barycentric_in_tet(&self, t: usize, x: Point3) -> [f64; 4] {
        let g = self.tet_geometry(t);
        let p0 = self.verts[self.tets[t][0]];
        let d = sub3(x, p0);
        let mut lam = [0.0f64; 4];
        for k in 1..4 {
            lam[k] = dot3(g.grads[k], d);
        }
        lam[0] = 1.0 - lam[1] - lam[2] - lam[3];
        lam
    }

    /// Affine geometry of tet `t`: barycentric gradients, signed and
    /// unsigned volume.
    pub fn tet_geometry(&self, t: usize) -> TetGeometry {
        TetGeometry::new(&self.verts, &self.tets[t])
    }

    /// Serializes in the `plates-mesh v1` format: a header, vertex
    /// coordinates to 17 significant digits, then tetrahedra as vertex
    /// indices.  Line feeds only.
    pub fn save(&self, path: &Path) -> Result<(), MeshError> {
        let mut out = String::new();
        out.push_str("plates-mesh v1\n");
        let _ = writeln!(out, "vertices {}", self.verts.len());
        for p in &self.verts {
            let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]);
        }
        let _ = writeln!(out, "tets {}", self.tets.len());
        for t in &self.tets {
            let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Reads a `plates-mesh v1` file, rebuilding the closure and running
    /// the full conformity validation.  Subdivision provenance is not part
    /// of the format; a loaded complex has no parent links.
    pub fn load(path: &Path) -> Result<Self, MeshError> {
        let text = std::fs::read_to_string(path)?;
        let pstr = path.display().to_string();
        let perr = |line: usize, msg: String| MeshError::Parse { path: pstr.clone(), line, msg };

        let mut lines = text.lines().enumerate();
        let (ln, header) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
        if header.trim() != "plates-mesh v1" {
            return Err(perr(ln + 1, format!("bad header {header:?}, expected \"plates-mesh v1\"")));
        }

        let (ln, vline) = lines.next().ok_or_else(|| perr(2, "missing vertex count".into()))?;
        let nv: usize = vline
            .strip_prefix("vertices ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| perr(ln + 1, format!("expected \"vertices N\", got {vline:?}")))?;
        let mut verts = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "unexpected end of vertex list".into()))?;
            let mut it = l.split_whitespace().map(str::parse::<f64>);
            let mut p = [0.0f64; 3];
            for c in &mut p {
                *c = it
                    .next()
                    .and_then(Result::ok)
                    .ok_or_else(|| perr(ln + 1, format!("expected three coordinates, got {l:?}")))?;
            }
            if it.next().is_some() {
                return Err(perr(ln + 1, format!("trailing tokens after coordinates in {l:?}")));
            }
            verts.push(p);
        }

        let (ln, tline) = lines.next().ok_or_else(|| perr(0, "missing tet count".into()))?;
        let nt: usize = tline
            .strip_prefix("tets ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| perr(ln + 1, format!("expected \"tets M\", got {tline:?}")))?;
        let mut tets = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "unexpected end of tet list".into()))?;
            let mut it = l.split_whitespace().map(str::parse::<usize>);
            let mut t = [0usize; 4];
            for c in &mut t {
                *c = it
                    .next()
                    .and_then(Result::ok)
                    .ok_or_else(|| perr(ln + 1, format!("expected four vertex indices, got {l:?}")))?;
            }
            if it.next().is_some() {
                return Err(perr(ln + 1, format!("trailing tokens after indices in {l:?}")));
            }
            tets.push(t);
        }
        Self::from_tets(verts, tets)
    }
}

/// Affine data of one tetrahedron.
#[derive(Debug, Clone, Copy)]
pub struct TetGeometry {
    /// `grads[i]` is the (constant) gradient of the barycentric coordinate
    /// of local vertex `i`.
    pub grads: [[f64; 3]; 4],
    /// Signed volume of the ascending tuple.
    pub signed_vol: f64,
    /// `signed_vol.abs()`.
    pub vol: f64,
}

impl TetGeometry {
    pub fn new(verts: &[Point3], t: &[usize; 4]) -> Self {
        let p0 = verts[t[0]];
        let m = [sub3(verts[t[1]], p0), sub3(verts[t[2]], p0), sub3(verts[t[3]], p0)];
        let det = dot3(m[0], cross3(m[1], m[2]));
        // Rows of the inverse of the edge matrix [p1-p0 | p2-p0 | p3-p0].
        let inv_det = 1.0 / det;
        let r1 = scale3(cross3(m[1], m[2]), inv_det);
        let r2 = scale3(cross3(m[2], m[0]), inv_det);
        let r3 = scale3(cross3(m[0], m[1]), inv_det);
        let r0 = [-r1[0] - r2[0] - r3[0], -r1[1] - r2[1] - r3[1], -r1[2] - r2[2] - r3[2]];
        Self { grads: [r0, r1, r2, r3], signed_vol: det / 6.0, vol: (det / 6.0).abs() }
    }

    /// Orientation sign of the ascending tuple, `+1` or `-1`.
    pub fn orientation(&self) -> i8 {
        if self.signed_vol >= 0.0 {
            1
        } else {
            -1
        }
    }
}

/// Signed incidence numbers of a complex.
///
/// `vert_edge` and `edge_face` are the combinatorial boundary signs of
/// ascending tuples (alternating deletion).  `face_tet` additionally
/// multiplies in the geometric orientation of the tet, so that an interior
/// face always sees opposite signs from its two tets and the divergence
/// identity `div W_f = b_ft / V_t` holds per tet with unsigned volumes.
#[derive(Debug, Clone)]
pub struct IncidenceData {
    /// Per edge: `[(vertex, sign); 2]` — `[b] - [a]` for the edge `[a, b]`.
    pub vert_edge: Vec<[(usize, i8); 2]>,
    /// Per face: `[(edge, sign); 3]`.
    pub edge_face: Vec<[(usize, i8); 3]>,
    /// Per tet: `[(face, sign); 4]`, orientation-corrected.
    pub face_tet: Vec<[(usize, i8); 4]>,
    /// Geometric orientation of each tet's ascending tuple.
    pub tet_sign: Vec<i8>,
}

impl IncidenceData {
    pub fn build(k: &SimplicialComplex3) -> Self {
        let vert_edge = k.edges.iter().map(|&[a, b]| [(a, -1i8), (b, 1i8)]).collect();
        let edge_face = k
            .faces
            .iter()
            .enumerate()
            .map(|(fi, _)| {
                let mut row = [(0usize, 0i8); 3];
                for kk in 0..3 {
                    row[kk] = (k.face_edges[fi][kk], if kk % 2 == 0 { 1 } else { -1 });
                }
                row
            })
            .collect();
        let tet_sign: Vec<i8> =
            (0..k.tets.len()).map(|t| if k.tet_signed_volume(t) >= 0.0 { 1 } else { -1 }).collect();
        let face_tet = (0..k.tets.len())
            .map(|ti| {
                let mut row = [(0usize, 0i8); 4];
                for kk in 0..4 {
                    let comb = if kk % 2 == 0 { 1i8 } else { -1i8 };
                    row[kk] = (k.tet_faces[ti][kk], comb * tet_sign[ti]);
                }
                row
            })
            .collect();
        Self { vert_edge, edge_face, face_tet, tet_sign }
    }

    /// Composes vertex–edge with edge–face incidence; identically zero.
    pub fn compose_vertex_face(&self) -> BTreeMap<(usize, usize), i64> {
        let mut acc = BTreeMap::new();
        for (fi, row) in self.edge_face.iter().enumerate() {
            for &(e, se) in row {
                for &(v, sv) in &self.vert_edge[e] {
                    *acc.entry((v, fi)).or_insert(0i64) += se as i64 * sv as i64;
                }
            }
        }
        acc.retain(|_, s| *s != 0);
        acc
    }

    /// Composes edge–face with face–tet incidence; identically zero.
    pub fn compose_edge_tet(&self) -> BTreeMap<(usize, usize), i64> {
        let mut acc = BTreeMap::new();
        for (ti, row) in self.face_tet.iter().enumerate() {
            for &(f, sf) in row {
                for &(e, se) in &self.edge_face[f] {
                    *acc.entry((e, ti)).or_insert(0i64) += sf as i64 * se as i64;
                }
            }
        }
        acc.retain(|_, s| *s != 0);
        acc
    }
}

const PAIRS6: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

fn delete4(t: &[usize; 4], k: usize) -> [usize; 3] {
    let mut out = [0usize; 3];
    let mut j = 0;
    for (i, &v) in t.iter().enumerate() {
        if i != k {
            out[j] = v;
            j += 1;
        }
    }
    out
}

fn delete3(f: &[usize; 3], k: usize) -> [usize; 2] {
    let mut out = [0usize; 2];
    let mut j = 0;
    for (i, &v) in f.iter().enumerate() {
        if i != k {
            out[j] = v;
            j += 1;
        }
    }
    out
}

fn barycenter(verts: &[Point3], ids: &[usize]) -> Point3 {
    let mut c = [0.0f64; 3];
    for &v in ids {
        for ax in 0..3 {
            c[ax] += verts[v][ax];
        }
    }
    let inv = 1.0 / ids.len() as f64;
    [c[0] * inv, c[1] * inv, c[2] * inv]
}

fn signed_volume(verts: &[Point3], t: &[usize; 4]) -> f64 {
    let p0 = verts[t[0]];
    let a = sub3(verts[t[1]], p0);
    let b = sub3(verts[t[2]], p0);
    let c = sub3(verts[t[3]], p0);
    dot3(a, cross3(b, c)) / 6.0
}

fn edge_len_max(verts: &[Point3], t: &[usize; 4]) -> f64 {
    PAIRS6
        .iter()
        .map(|&(a, b)| norm3(sub3(verts[t[a]], verts[t[b]])))
        .fold(0.0f64, f64::max)
}

#[inline]
pub(crate) fn sub3(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot3(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross3(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm3(a: Point3) -> f64 {
    dot3(a, a).sqrt()
}

#[inline]
pub(crate) fn scale3(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_tet() -> SimplicialComplex3 {
        let verts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        SimplicialComplex3::from_tets(verts, vec![[0, 1, 2, 3]]).unwrap()
    }

    fn unit_cube() -> SimplicialComplex3 {
        SimplicialComplex3::slab([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn reference_tet_counts_and_subdivision() {
        let k = reference_tet();
        assert_eq!(k.counts(), [4, 6, 4, 1]);
        assert_eq!(k.boundary_counts(), [4, 6, 4]);
        assert_eq!(k.euler_characteristic(), 1);
        assert_eq!(k.boundary_euler_characteristic(), 2);

        let ks = k.barycentric_subdivide();
        // V' = V + E + F + T, E' = 2E + 6F + 14T, F' = 6F + 36T, T' = 24T.
        assert_eq!(ks.counts(), [15, 50, 60, 24]);
        assert_eq!(ks.boundary_counts(), [14, 36, 24]);
        assert_eq!(ks.euler_characteristic(), 1);
        assert_eq!(ks.boundary_euler_characteristic(), 2);
    }

    #[test]
    fn five_tet_cube_counts() {
        let k = unit_cube();
        assert_eq!(k.counts(), [8, 18, 16, 5]);
        assert_eq!(k.boundary_counts(), [8, 18, 12]);
        assert_eq!(k.euler_characteristic(), 1);
        assert_eq!(k.boundary_euler_characteristic(), 2);

        let ks = k.barycentric_subdivide();
        assert_eq!(ks.counts(), [47, 202, 276, 120]);
        assert_eq!(ks.boundary_counts(), [38, 108, 72]);
        assert_eq!(ks.euler_characteristic(), 1);
        assert_eq!(ks.boundary_euler_characteristic(), 2);
    }

    #[test]
    fn subdivision_id_bands_are_by_parent_dimension() {
        let k = unit_cube();
        let ks = k.barycentric_subdivide();
        let vp = ks.vertex_parent.as_ref().unwrap();
        let [nv, ne, nf, nt] = k.counts();
        for (i, p) in vp.iter().enumerate() {
            let expect = if i < nt {
                (3, i)
            } else if i < nt + nf {
                (2, i - nt)
            } else if i < nt + nf + ne {
                (1, i - nt - nf)
            } else {
                (0, i - nt - nf - ne)
            };
            assert_eq!((p.dim as usize, p.index), expect);
        }
        assert_eq!(vp.len(), nv + ne + nf + nt);

        // Flags read in decreasing parent dimension: every subdivision tet
        // spans one barycenter from each band.
        for t in &ks.tets {
            let dims: Vec<u8> = t.iter().map(|&v| vp[v].dim).collect();
            assert_eq!(dims, vec![3, 2, 1, 0]);
        }
    }

    #[test]
    fn subdivision_preserves_volume() {
        let k = SimplicialComplex3::slab([0.02, 0.005, 0.02], [0.01, 0.005, 0.01]).unwrap();
        let ks = k.barycentric_subdivide();
        let v0 = k.volume();
        let v1 = ks.volume();
        assert!((v0 - v1).abs() <= 1e-12 * v0, "{v0} vs {v1}");
        assert!((v0 - 0.02 * 0.005 * 0.02).abs() <= 1e-12 * v0);
    }

    #[test]
    fn boundary_faces_of_slab_lie_on_its_surface() {
        // A diagonal mismatch between neighbouring blocks would leave
        // orphaned interior faces flagged as boundary; all boundary faces
        // must lie in a surface plane of the box.
        let ext = [0.03, 0.01, 0.02];
        let k = SimplicialComplex3::slab(ext, [0.01, 0.005, 0.01]).unwrap();
        for (fi, f) in k.faces.iter().enumerate() {
            if !k.face_boundary[fi] {
                continue;
            }
            let on_plane = (0..3).any(|ax| {
                f.iter().all(|&v| k.verts[v][ax].abs() < 1e-12)
                    || f.iter().all(|&v| (k.verts[v][ax] - ext[ax]).abs() < 1e-12)
            });
            assert!(on_plane, "boundary face {f:?} not on the slab surface");
        }
    }

    #[test]
    fn incidence_boundary_of_boundary_vanishes() {
        let k = SimplicialComplex3::slab([0.02, 0.005, 0.02], [0.01, 0.005, 0.01]).unwrap();
        for complex in [k.clone(), k.barycentric_subdivide()] {
            let inc = IncidenceData::build(&complex);
            assert!(inc.compose_vertex_face().is_empty());
            assert!(inc.compose_edge_tet().is_empty());
        }
    }

    #[test]
    fn interior_faces_see_opposite_orientations() {
        let k = unit_cube().barycentric_subdivide();
        let inc = IncidenceData::build(&k);
        let mut seen: Vec<Vec<i8>> = vec![Vec::new(); k.faces.len()];
        for row in &inc.face_tet {
            for &(f, s) in row {
                seen[f].push(s);
            }
        }
        for (fi, signs) in seen.iter().enumerate() {
            if k.face_boundary[fi] {
                assert_eq!(signs.len(), 1);
            } else {
                assert_eq!(signs.len(), 2);
                assert_eq!(signs[0] + signs[1], 0, "face {fi} signs {signs:?}");
            }
        }
    }

    #[test]
    fn barycentric_coordinates_partition_unity() {
        let k = unit_cube();
        let g = k.tet_geometry(0);
        let sum: Point3 = [
            g.grads.iter().map(|r| r[0]).sum(),
            g.grads.iter().map(|r| r[1]).sum(),
            g.grads.iter().map(|r| r[2]).sum(),
        ];
        assert!(norm3(sum) < 1e-14);
        let lam = k.barycentric_in_tet(0, barycenter(&k.verts, &k.tets[0]));
        for l in lam {
            assert!((l - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn locate_prefers_lowest_tet_id() {
        let k = unit_cube();
        // The barycenter of a shared interior face lies in two tets.
        let fi = k.face_boundary.iter().position(|b| !b).unwrap();
        let x = k.face_barycenter(fi);
        let (t, _) = k.locate(x).unwrap();
        let (t0, t1) = (k.face_tets[fi].0, k.face_tets[fi].1.unwrap());
        assert_eq!(t, t0.min(t1));
    }

    #[test]
    fn boundary_frames_point_outward() {
        let k = unit_cube();
        for fi in 0..k.faces.len() {
            if !k.face_boundary[fi] {
                continue;
            }
            let (n, area) = k.boundary_face_frame(fi);
            assert!((norm3(n) - 1.0).abs() < 1e-14);
            assert!(area > 0.0);
            let c = k.face_barycenter(fi);
            // Unit cube: outward means pointing away from the center.
            let d = sub3(c, [0.5, 0.5, 0.5]);
            assert!(dot3(n, d) > 0.0, "face {fi} normal {n:?} at {c:?}");
        }
    }

    #[test]
    fn save_load_roundtrip_is_exact() {
        let k = SimplicialComplex3::slab([0.02, 0.005, 0.02], [0.01, 0.005, 0.01]).unwrap();
        let dir = std::env::temp_dir().join("plates-mesh-roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("slab.mesh");
        k.save(&path).unwrap();
        let k2 = SimplicialComplex3::load(&path).unwrap();
        assert_eq!(k.verts, k2.verts);
        assert_eq!(k.tets, k2.tets);
        assert_eq!(k.edges, k2.edges);
        assert_eq!(k.faces, k2.faces);
        // And the bytes themselves are stable.
        let path2 = dir.join("slab2.mesh");
        k2.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = SimplicialComplex3::slab([0.10, 0.011, 0.20], [0.01, 0.005, 0.01]).unwrap_err();
        match err {
            MeshError::DimensionMismatch { axis, .. } => assert_eq!(axis, 'y'),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn closure_violation_is_rejected() {
        let verts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let err = SimplicialComplex3::from_tets(verts, vec![[0, 1, 2, 7]]).unwrap_err();
        assert!(matches!(err, MeshError::ClosureViolation { vertex: 7, .. }));
    }

    #[test]
    fn degenerate_tet_is_rejected() {
        let verts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.5, 0.5, 0.0], // coplanar
        ];
        let err = SimplicialComplex3::from_tets(verts, vec![[0, 1, 2, 3]]).unwrap_err();
        assert!(matches!(err, MeshError::DegenerateTet { .. }));
    }

    #[test]
    fn overfull_face_is_rejected() {
        // Three tets over the same base triangle.
        let verts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
            [0.3, 0.3, 0.5],
        ];
        let err =
            SimplicialComplex3::from_tets(verts, vec![[0, 1, 2, 3], [0, 1, 2, 4], [0, 1, 2, 5]])
                .unwrap_err();
        assert!(matches!(err, MeshError::NonConforming { count: 3, .. }));
    }
}
