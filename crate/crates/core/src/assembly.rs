//! Global system assembly over the edge/face Whitney basis.
//!
//! The coefficient vector stacks all edge fields first, then all face
//! fields; [`BasisIndex`] owns that layout.  [`assemble_gram`] and
//! [`assemble_stiffness`] produce the two sparse symmetric matrices of the
//! coarse evolution system, [`boundary_condition_system`] row-reduces the
//! per-face boundary conditions into the `C` block, and
//! [`assemble_fine`] applies the resulting congruence to obtain the
//! constrained system.
//!
//! Sparsity of the stiffness matrix comes from structure, not filtering:
//! edge fields have antisymmetric gradients, so their strain, divergence,
//! and weighted divergence vanish identically and no volume block touching
//! an edge is ever computed.  Edges enter only through the boundary terms,
//! where each boundary face couples to the three edges of that same face.
//! Every symmetric entry is evaluated once and mirrored, which makes the
//! assembled matrices symmetric to the last bit; the measured gap is still
//! recorded and the matrix symmetrized so the invariant does not rest on
//! that argument.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::hash;
use crate::material::{self, ElasticTensor, LambdaPreset};
use crate::mesh::{cross3, dot3, norm3, scale3, sub3, Point3, SimplicialComplex3};
use crate::sparse::{Coo, Csr};
use crate::whitney::{
    edge_whitney, eval_in_tet, face_whitney, matvec3, tet_dot, tet_quadrature_deg5,
    trace_on_face, GeomCache, WhitneyField,
};

#[derive(Debug, Error)]
pub enum AssemblyError {
    /// Boundary handling needs the parent complex and the per-vertex
    /// parent map that only a barycentric subdivision carries.
    #[error("complex is not a barycentric subdivision of a parent mesh")]
    NotASubdivision,
    /// The face subblock of a boundary-condition block vanished, which the
    /// coercivity of the boundary operator rules out for any admissible
    /// material.
    #[error("boundary block of parent face {parent_face} has rank zero (coercivity violation)")]
    RankZeroBlock { parent_face: usize },
    #[error("dimension mismatch: got {got}, want {want}")]
    Dimension { got: usize, want: usize },
}

// ---------------------------------------------------------------------------
// Basis layout.

/// Layout of the global coefficient vector: unknown `e` is edge `e`,
/// unknown `n_edges + f` is face `f`.
#[derive(Debug, Clone)]
pub struct BasisIndex {
    pub n_edges: usize,
    pub n_faces: usize,
}

impl BasisIndex {
    pub fn new(k: &SimplicialComplex3) -> Self {
        BasisIndex { n_edges: k.edges.len(), n_faces: k.faces.len() }
    }

    pub fn dim(&self) -> usize {
        self.n_edges + self.n_faces
    }

    #[inline]
    pub fn edge_unknown(&self, e: usize) -> usize {
        e
    }

    #[inline]
    pub fn face_unknown(&self, f: usize) -> usize {
        self.n_edges + f
    }

    /// Whether unknown `u` is an edge coefficient.
    #[inline]
    pub fn is_edge(&self, u: usize) -> bool {
        u < self.n_edges
    }

    /// Midpoint of the edge or barycenter of the face behind each unknown.
    /// Fill-reducing orderings use these as a geometric proxy for the
    /// support of the basis field.
    pub fn support_centroids(&self, k: &SimplicialComplex3) -> Vec<Point3> {
        let mut out = Vec::with_capacity(self.dim());
        for e in 0..self.n_edges {
            let [a, b] = k.edges[e];
            let (va, vb) = (k.verts[a], k.verts[b]);
            out.push([
                0.5 * (va[0] + vb[0]),
                0.5 * (va[1] + vb[1]),
                0.5 * (va[2] + vb[2]),
            ]);
        }
        for f in 0..self.n_faces {
            out.push(k.face_barycenter(f));
        }
        out
    }

    /// Per-unknown boundary flag (edge or face lies in `∂Ω`).
    pub fn boundary_mask(&self, k: &SimplicialComplex3) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend_from_slice(&k.edge_boundary);
        out.extend_from_slice(&k.face_boundary);
        out
    }
}

// ---------------------------------------------------------------------------
// Gram matrix.

/// `I[s][t] = ⟨W_s, W_t⟩` over the edge/face basis, by exact quadrature of
/// the piecewise-linear products on each tet.
pub fn assemble_gram(k: &SimplicialComplex3, cache: &GeomCache, basis: &BasisIndex) -> Csr {
    let per_tet: Vec<Vec<(usize, usize, f64)>> = (0..k.tets.len())
        .into_par_iter()
        .map(|t| {
            let g = &cache.tets[t];
            let mut fields = Vec::with_capacity(10);
            for &e in &k.tet_edges[t] {
                let w = edge_whitney(k, g, t, e).expect("edge of the tet");
                fields.push((basis.edge_unknown(e), w));
            }
            for &f in &k.tet_faces[t] {
                let w = face_whitney(k, g, t, f).expect("face of the tet");
                fields.push((basis.face_unknown(f), w));
            }
            let mut out = Vec::with_capacity(100);
            for i in 0..fields.len() {
                for j in i..fields.len() {
                    let v = tet_dot(&fields[i].1, &fields[j].1, g.vol);
                    out.push((fields[i].0, fields[j].0, v));
                    if i != j {
                        out.push((fields[j].0, fields[i].0, v));
                    }
                }
            }
            out
        })
        .collect();

    let mut coo = Coo::new(basis.dim());
    for chunk in &per_tet {
        for &(i, j, v) in chunk {
            coo.push(i, j, v);
        }
    }
    coo.compress()
}

/// The three exact null vectors of the Gram matrix.
///
/// A constant field `c` has two exact representations in the basis: by
/// edges alone (`c·(v_b − v_a)` per edge, telescoping to `c`) and by faces
/// alone (`−c·n A` per face, the lowest-order face element reproducing
/// constants).  Their difference therefore represents the zero field, and
/// the Gram matrix annihilates it.  The combined edge/face space is *not*
/// a direct sum: `I` is positive semidefinite with this exact
/// three-dimensional kernel (one vector per coordinate direction), and
/// solvers must treat the pencil accordingly rather than assume `I ≻ 0`.
///
/// Returned in the [`BasisIndex`] layout, one vector per coordinate
/// direction, unnormalized.
pub fn gram_null_basis(k: &SimplicialComplex3, basis: &BasisIndex) -> [Vec<f64>; 3] {
    let mut out = [(); 3].map(|_| vec![0.0f64; basis.dim()]);
    for (e, &[a, b]) in k.edges.iter().enumerate() {
        let d = sub3(k.verts[b], k.verts[a]);
        for c in 0..3 {
            out[c][basis.edge_unknown(e)] = d[c];
        }
    }
    for (f, &[a, b, c3]) in k.faces.iter().enumerate() {
        // Area-weighted normal of the ascending tuple.
        let na = scale3(
            cross3(sub3(k.verts[b], k.verts[a]), sub3(k.verts[c3], k.verts[a])),
            0.5,
        );
        for c in 0..3 {
            out[c][basis.face_unknown(f)] = -na[c];
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Stiffness matrix.

/// Assembles the stiffness matrix for a material and a `λ_L` value and
/// returns it with the raw (pre-symmetrization) asymmetry gap.
///
/// Volume terms pair the constant gradients of two face fields on a shared
/// tet: the elastic energy contraction, the `−λ_L div·div` penalty, and
/// the symmetrized weighted-divergence surrogate with the material's
/// `l_i` constants.  Boundary terms add, per boundary face, the diagonal
/// face-face entry and the couplings to the face's own three edges; all
/// integrands there are constants times linear traces, so one mean value
/// per trace integrates them exactly.
pub fn assemble_stiffness(
    k: &SimplicialComplex3,
    cache: &GeomCache,
    basis: &BasisIndex,
    mat: &ElasticTensor,
    lambda: f64,
) -> (Csr, f64) {
    let v6 = &mat.sym6;
    let l = mat.l_constants;
    let w1 = material::boundary_contraction(v6);

    let volume: Vec<Vec<(usize, usize, f64)>> = (0..k.tets.len())
        .into_par_iter()
        .map(|t| {
            let g = &cache.tets[t];
            let mut grads = [[[0.0f64; 3]; 3]; 4];
            let mut div = [0.0f64; 4];
            let mut wdiv = [0.0f64; 4];
            for (m, &f) in k.tet_faces[t].iter().enumerate() {
                let w = face_whitney(k, g, t, f).expect("face of the tet");
                grads[m] = w.gradient(g);
                div[m] = grads[m][0][0] + grads[m][1][1] + grads[m][2][2];
                wdiv[m] = l[0] * grads[m][0][0] + l[1] * grads[m][1][1] + l[2] * grads[m][2][2];
            }
            let mut out = Vec::with_capacity(20);
            for i in 0..4 {
                for j in i..4 {
                    let v = g.vol
                        * (-material::energy_pair(v6, &grads[i], &grads[j])
                            - lambda * div[i] * div[j]
                            + 0.5 * (wdiv[i] * div[j] + wdiv[j] * div[i]));
                    let (a, b) = (
                        basis.face_unknown(k.tet_faces[t][i]),
                        basis.face_unknown(k.tet_faces[t][j]),
                    );
                    out.push((a, b, v));
                    if i != j {
                        out.push((b, a, v));
                    }
                }
            }
            out
        })
        .collect();

    let boundary_faces: Vec<usize> = (0..k.faces.len()).filter(|&f| k.face_boundary[f]).collect();
    let boundary: Vec<Vec<(usize, usize, f64)>> = boundary_faces
        .par_iter()
        .map(|&f| {
            let t = k.face_tets[f].0;
            let g = &cache.tets[t];
            let (n, area) = k.boundary_face_frame(f);
            let wf = face_whitney(k, g, t, f).expect("boundary face of its tet");
            let gf = wf.gradient(g);
            let sig_n = matvec3(&material::stress(v6, &gf), n);
            let snn = dot3(n, sig_n);
            let dnn_f = dot3(n, matvec3(&gf, n));
            let w1nn = dot3(n, matvec3(&w1, n));
            let mean_f = trace_on_face(k, &wf, t, f).mean();
            let uf = basis.face_unknown(f);

            let mut out = Vec::with_capacity(7);
            let b_val = area * (dot3(sig_n, mean_f) - (snn + w1nn * dnn_f) * dot3(mean_f, n));
            out.push((uf, uf, b_val));

            // The only boundary edges whose trace survives on this face are
            // its own three; each pairs with the face through the halved
            // stress and contraction terms.
            for &e in &k.face_edges[f] {
                debug_assert!(k.edge_boundary[e]);
                let we = edge_whitney(k, g, t, e).expect("edge of the face's tet");
                let dnn_e = dot3(n, matvec3(&we.gradient(g), n));
                let mean_e = trace_on_face(k, &we, t, f).mean();
                let v = area
                    * (0.5 * dot3(sig_n, mean_e)
                        - 0.5 * snn * dot3(mean_e, n)
                        - 0.5 * w1nn * (dnn_f * dot3(mean_e, n) + dnn_e * dot3(mean_f, n)));
                let ue = basis.edge_unknown(e);
                out.push((ue, uf, v));
                out.push((uf, ue, v));
            }
            out
        })
        .collect();

    let mut coo = Coo::new(basis.dim());
    for chunk in volume.iter().chain(boundary.iter()) {
        for &(i, j, v) in chunk {
            coo.push(i, j, v);
        }
    }
    let raw = coo.compress();
    let gap = raw.symmetry_gap();
    (raw.symmetrized(), gap)
}

// ---------------------------------------------------------------------------
// Assembled system bundle.

/// Provenance recorded alongside an assembled pair of matrices.
#[derive(Debug, Clone)]
pub struct SystemMeta {
    pub lambda: f64,
    pub l_constants: [f64; 3],
    pub material: String,
    pub mesh_hash: u64,
    /// Largest `|K_ij − K_ji|` before symmetrization.
    pub raw_symmetry_gap: f64,
}

/// The coarse system: Gram matrix, stiffness matrix, and their layout.
/// The density `ρ` is *not* folded into the Gram matrix here; solvers
/// scale by it so one assembly serves any density.
#[derive(Debug)]
pub struct SparseSymSystem {
    pub gram: Csr,
    pub stiffness: Csr,
    pub basis: BasisIndex,
    pub meta: SystemMeta,
}

pub fn assemble_system(
    k: &SimplicialComplex3,
    cache: &GeomCache,
    mat: &ElasticTensor,
    preset: LambdaPreset,
) -> SparseSymSystem {
    let basis = BasisIndex::new(k);
    let lambda = mat.lambda_value(preset);
    let gram = assemble_gram(k, cache, &basis);
    let (stiffness, gap) = assemble_stiffness(k, cache, &basis, mat, lambda);
    SparseSymSystem {
        gram,
        stiffness,
        basis,
        meta: SystemMeta {
            lambda,
            l_constants: mat.l_constants,
            material: mat.name.clone(),
            mesh_hash: hash::mesh_hash(k),
            raw_symmetry_gap: gap,
        },
    }
}

// ---------------------------------------------------------------------------
// Load vectors.

/// `ℓ[s] = ⟨F, W_s⟩` for an analytically sampled force field, by the
/// degree-5 rule on every tet.  `F` is arbitrary (typically a plane wave),
/// so this is the one place assembly integrates numerically.
pub fn load_vector<F>(
    k: &SimplicialComplex3,
    cache: &GeomCache,
    basis: &BasisIndex,
    force: F,
) -> Vec<f64>
where
    F: Fn(Point3) -> [f64; 3] + Sync,
{
    let per_tet: Vec<Vec<(usize, f64)>> = (0..k.tets.len())
        .into_par_iter()
        .map(|t| {
            let g = &cache.tets[t];
            let mut fields = Vec::with_capacity(10);
            for &e in &k.tet_edges[t] {
                let w = edge_whitney(k, g, t, e).expect("edge of the tet");
                fields.push((basis.edge_unknown(e), w));
            }
            for &f in &k.tet_faces[t] {
                let w = face_whitney(k, g, t, f).expect("face of the tet");
                fields.push((basis.face_unknown(f), w));
            }
            let verts = k.tets[t].map(|v| k.verts[v]);
            let mut acc = vec![0.0f64; fields.len()];
            for (lam, w) in tet_quadrature_deg5(g.vol) {
                let mut x = [0.0f64; 3];
                for i in 0..4 {
                    for d in 0..3 {
                        x[d] += lam[i] * verts[i][d];
                    }
                }
                let fv = force(x);
                for (a, (_, field)) in acc.iter_mut().zip(&fields) {
                    *a += w * dot3(fv, field.eval(&lam));
                }
            }
            fields.iter().map(|&(u, _)| u).zip(acc).collect()
        })
        .collect();

    let mut out = vec![0.0f64; basis.dim()];
    for chunk in &per_tet {
        for &(u, v) in chunk {
            out[u] += v;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Boundary-condition system.

/// Tolerance of the rank decision: a block's face subblock is rank
/// deficient when `σ₂ ≤ RANK_TOL · σ₁`.
pub const RANK_TOL: f64 = 1e-10;

/// Diagnostics for one boundary face of the parent mesh.
#[derive(Debug, Clone)]
pub struct BoundaryBlock {
    pub parent_face: usize,
    /// Rank of the 2×6 face subblock (1 or 2); rank 0 is an error.
    pub rank: u8,
    /// `σ₂/σ₁` of the face subblock.
    pub sv_ratio: f64,
    /// For rank-one blocks: the largest entry surviving in the dropped
    /// row, relative to that row's norm before elimination.  Zero for
    /// rank-two blocks.
    pub null_residual: f64,
    /// The twelve subdivided edges of the parent face, ascending.
    pub edges: [usize; 12],
    /// The six subdivided faces, ascending.
    pub faces: [usize; 6],
    /// The assembled block before reduction: two frame rows over the
    /// columns `edges ++ faces`.
    pub raw: [[f64; 18]; 2],
}

/// One row of the reduced system: `c[face] = Σ row·c[retained]`.
#[derive(Debug, Clone)]
pub struct ExpressedFace {
    /// Global face id of the eliminated boundary face coefficient.
    pub face: usize,
    /// Coefficients over retained coarse unknowns (edges of the same
    /// parent face and its non-pivot subdivided faces).
    pub row: Vec<(u32, f64)>,
}

/// The row-reduced boundary conditions, with the maps that carry matrices,
/// loads, and solutions between the coarse and constrained bases.
#[derive(Debug)]
pub struct BoundaryReduction {
    pub blocks: Vec<BoundaryBlock>,
    /// Eliminated boundary faces with their `C` rows, ascending by face id.
    pub expressed: Vec<ExpressedFace>,
    pub rank_one: usize,
    pub rank_two: usize,
    pub coarse_dim: usize,
    pub fine_dim: usize,
    /// Position of each retained coarse unknown in the fine vector.
    pub fine_of_coarse: Vec<Option<u32>>,
    /// Coarse unknown behind each fine position (ascending in coarse id).
    pub coarse_of_fine: Vec<u32>,
    /// Rows of the embedding `P`: coarse unknown → fine pairs.
    expansion: Vec<Vec<(u32, f64)>>,
}

/// Builds and row-reduces the boundary-condition blocks of a subdivided
/// complex.
///
/// Each boundary face of the parent mesh contributes two rows — one per
/// tangent direction of its frame — over the twelve subdivided edges and
/// six subdivided faces it contains.  The tangential derivative of every
/// field pairs with `W'(1)N`; face fields additionally pair their stress
/// with the tangents.
///
/// The derivative pairing is evaluated weakly.  The trace of the
/// combination on the parent face is discontinuous across the interior
/// subdivided edges, so its tangential derivative carries jump terms
/// there; `W'(1)N` is constant on the face, and integrating the full
/// distributional derivative by parts collapses the pairing to a line
/// integral over the face's rim,
/// `∮ (W·W'(1)N)(T_a·ν) dl`,
/// with `ν` the outward in-plane normal of the rim.  Each subdivided face
/// owns exactly one rim segment, and only the four fields of its tet (its
/// three edges and itself) have a nonzero trace there, evaluated exactly
/// by two-point Gauss.  The classical per-tet evaluation is a trap: face
/// fields are radial (`∇W_f = κ·Id`), so their classical columns reduce to
/// `κ·area·2⟨T_a, σ(Id)N⟩`, which vanishes identically whenever `N` is a
/// principal direction of `σ(Id)` — on *every* face of an axis-aligned
/// mesh for an axis-aligned orthotropic material — and the reduction would
/// then pivot on roundoff noise.
///
/// The stress term keeps its classical form (the integrand is constant on
/// each subdivided face): stress of an edge field is identically zero, its
/// gradient being antisymmetric, so edge columns carry only the weak
/// derivative term.
///
/// The rank of each block is decided on its face subblock, so pivots are
/// chosen among face columns only (largest magnitude, ties to the lowest
/// column id) and edges are never eliminated.  Rank-one blocks drop their
/// numerically null second row and leave an extra face retained.
pub fn boundary_condition_system(
    k: &SimplicialComplex3,
    cache: &GeomCache,
    mat: &ElasticTensor,
) -> Result<BoundaryReduction, AssemblyError> {
    boundary_system_impl(k, cache, mat, true)
}

/// The same reduction without the stress term — the pairing the first
/// iterate needs.
pub(crate) fn boundary_system_impl(
    k: &SimplicialComplex3,
    cache: &GeomCache,
    mat: &ElasticTensor,
    include_stress: bool,
) -> Result<BoundaryReduction, AssemblyError> {
    let parent = k.parent.as_deref().ok_or(AssemblyError::NotASubdivision)?;
    let basis = BasisIndex::new(k);
    let v6 = &mat.sym6;
    let w1 = material::boundary_contraction(v6);
    let vp = k.vertex_parent.as_deref().ok_or(AssemblyError::NotASubdivision)?;

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for f in 0..k.faces.len() {
        if !k.face_boundary[f] {
            continue;
        }
        let p = k.top_parent(&k.faces[f]).ok_or(AssemblyError::NotASubdivision)?;
        debug_assert_eq!(p.dim, 2, "boundary subdivided face sits inside a parent face");
        groups.entry(p.index).or_default().push(f);
    }

    let mut blocks = Vec::with_capacity(groups.len());
    let mut expressed = Vec::new();

    for (&pf, subs) in &groups {
        assert_eq!(subs.len(), 6, "a parent face subdivides into six faces");

        // Frame: T₁ along the longest edge of the parent face (ties to the
        // lexicographically first pair), N outward, T₂ = N × T₁.
        let corners = parent.faces[pf];
        let pairs = [
            (corners[0], corners[1]),
            (corners[0], corners[2]),
            (corners[1], corners[2]),
        ];
        let (mut best, mut best_len) = (pairs[0], -1.0f64);
        for &(i, j) in &pairs {
            let len = norm3(sub3(parent.verts[j], parent.verts[i]));
            if len > best_len {
                best = (i, j);
                best_len = len;
            }
        }
        let t1 = scale3(sub3(parent.verts[best.1], parent.verts[best.0]), 1.0 / best_len);
        let (n, _) = k.boundary_face_frame(subs[0]);
        let t2 = cross3(n, t1);
        let w1n = matvec3(&w1, n);

        let mut edge_set = BTreeSet::new();
        for &f in subs {
            for &e in &k.face_edges[f] {
                edge_set.insert(e);
            }
        }
        let edges: Vec<usize> = edge_set.into_iter().collect();
        assert_eq!(edges.len(), 12, "a parent face subdivides into twelve edges");
        let faces: [usize; 6] = subs.as_slice().try_into().unwrap();

        // The 2×18 block: edge columns 0..12, face columns 12..18.  Each
        // subdivided face contributes the rim integral over its one side on
        // ∂F, with its own (one-sided) trace, plus the stress area term for
        // its own face column.
        let mut m = [[0.0f64; 18]; 2];
        for (kf, &f) in faces.iter().enumerate() {
            let t = k.face_tets[f].0;
            let g = &cache.tets[t];
            let (nf, area) = k.boundary_face_frame(f);
            debug_assert!(dot3(nf, n) > 1.0 - 1e-9, "subdivided faces share the parent normal");

            // The rim side is the one opposite the parent-face barycenter:
            // its endpoints are the two vertices of `f` not born from `pf`.
            let mut rim = [usize::MAX; 2];
            let mut nr = 0;
            for &v in &k.faces[f] {
                let p = vp[v];
                if !(p.dim == 2 && p.index == pf) {
                    rim[nr] = v;
                    nr += 1;
                }
            }
            assert_eq!(nr, 2, "a subdivided face has exactly one side on the parent rim");
            let (pa, pb) = (k.verts[rim[0]], k.verts[rim[1]]);
            let d = sub3(pb, pa);
            let len = norm3(d);
            let dn = scale3(d, 1.0 / len);

            // Outward in-plane normal of the rim side: project the
            // centroid-to-midpoint vector off the side direction.
            let centroid = k.faces[f]
                .iter()
                .fold([0.0; 3], |s, &v| {
                    let p = k.verts[v];
                    [s[0] + p[0] / 3.0, s[1] + p[1] / 3.0, s[2] + p[2] / 3.0]
                });
            let mid = scale3([pa[0] + pb[0], pa[1] + pb[1], pa[2] + pb[2]], 0.5);
            let w = sub3(mid, centroid);
            let nu = {
                let v = sub3(w, scale3(dn, dot3(w, dn)));
                scale3(v, 1.0 / norm3(v))
            };

            // Two-point Gauss on the side is exact: every trace is linear.
            let xi = 0.5 / 3.0f64.sqrt();
            let qpts = [0.5 - xi, 0.5 + xi].map(|s| {
                k.barycentric_in_tet(t, [
                    pa[0] + s * d[0],
                    pa[1] + s * d[1],
                    pa[2] + s * d[2],
                ])
            });
            let mut rim_entry = |col: usize, field: WhitneyField| {
                let mut acc = 0.0;
                for lam in &qpts {
                    let v = eval_in_tet(k, cache, &field, t, lam).as_vector();
                    acc += 0.5 * dot3(v, w1n);
                }
                for (a, ta) in [t1, t2].into_iter().enumerate() {
                    m[a][col] += dot3(ta, nu) * len * acc;
                }
            };
            for (col, &e) in edges.iter().enumerate() {
                rim_entry(col, WhitneyField::edge(e));
            }
            for (col, &fc) in faces.iter().enumerate() {
                rim_entry(12 + col, WhitneyField::face(fc));
            }

            if include_stress {
                let gf =
                    face_whitney(k, g, t, f).expect("boundary face of its tet").gradient(g);
                let sig = material::stress(v6, &gf);
                for (a, ta) in [t1, t2].into_iter().enumerate() {
                    m[a][12 + kf] += area * dot3(ta, matvec3(&sig, n));
                }
            }
        }

        let raw = m;

        // Rank of the face subblock from the singular values of the
        // normalized 2×6, via its 2×2 Gram matrix.
        let mut scale = 0.0f64;
        for row in &m {
            for &v in &row[12..18] {
                scale = scale.max(v.abs());
            }
        }
        if scale == 0.0 {
            return Err(AssemblyError::RankZeroBlock { parent_face: pf });
        }
        let (mut g11, mut g12, mut g22) = (0.0f64, 0.0, 0.0);
        for j in 12..18 {
            let (a, b) = (m[0][j] / scale, m[1][j] / scale);
            g11 += a * a;
            g12 += a * b;
            g22 += b * b;
        }
        let disc = ((g11 - g22) * (g11 - g22) + 4.0 * g12 * g12).sqrt();
        let eig1 = 0.5 * ((g11 + g22) + disc);
        // The small eigenvalue via the product form avoids the cancellation
        // in (tr − disc)/2.
        let det = (g11 * g22 - g12 * g12).max(0.0);
        let eig2 = if eig1 > 0.0 { det / eig1 } else { 0.0 };
        let sv_ratio = (eig2 / eig1).sqrt();
        let rank: u8 = if sv_ratio > RANK_TOL { 2 } else { 1 };

        // Gauss–Jordan on the block, pivoting only among face columns.
        let pivot = |m: &[[f64; 18]; 2], rows: &[usize], skip: Option<usize>| {
            let (mut bj, mut br, mut bv) = (usize::MAX, usize::MAX, -1.0f64);
            for j in 0..6 {
                if Some(j) == skip {
                    continue;
                }
                for &r in rows {
                    if m[r][12 + j].abs() > bv {
                        bv = m[r][12 + j].abs();
                        bj = j;
                        br = r;
                    }
                }
            }
            (br, bj)
        };

        let (r1, j1) = pivot(&m, &[0, 1], None);
        let other = 1 - r1;
        let pre: [f64; 18] = m[other];
        let fac = m[other][12 + j1] / m[r1][12 + j1];
        for c in 0..18 {
            m[other][c] -= fac * m[r1][c];
        }
        m[other][12 + j1] = 0.0;

        let mut null_residual = 0.0f64;
        let mut pivots = vec![(r1, j1)];
        if rank == 2 {
            let (_, j2) = pivot(&m, &[other], Some(j1));
            assert!(
                m[other][12 + j2] != 0.0,
                "rank-two block lost its second pivot in elimination"
            );
            let fac2 = m[r1][12 + j2] / m[other][12 + j2];
            for c in 0..18 {
                m[r1][c] -= fac2 * m[other][c];
            }
            m[r1][12 + j2] = 0.0;
            pivots.push((other, j2));
        } else {
            let pre_norm = pre.iter().map(|v| v * v).sum::<f64>().sqrt();
            let left = m[other].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            null_residual = if pre_norm > 0.0 { left / pre_norm } else { 0.0 };
        }

        for &(r, j) in &pivots {
            let piv = m[r][12 + j];
            let mut row = Vec::with_capacity(17);
            for (c, &v) in m[r].iter().enumerate() {
                if c == 12 + j || v == 0.0 {
                    continue;
                }
                let unk = if c < 12 {
                    basis.edge_unknown(edges[c])
                } else {
                    basis.face_unknown(faces[c - 12])
                };
                row.push((unk as u32, -v / piv));
            }
            expressed.push(ExpressedFace { face: faces[j], row });
        }

        blocks.push(BoundaryBlock {
            parent_face: pf,
            rank,
            sv_ratio,
            null_residual,
            edges: edges.try_into().unwrap(),
            faces,
            raw,
        });
    }

    expressed.sort_by_key(|e| e.face);
    Ok(BoundaryReduction::from_parts(basis.n_edges, basis.n_faces, expressed, blocks))
}

impl BoundaryReduction {
    /// Builds the fine-space maps from an explicit list of eliminated
    /// faces.  `boundary_condition_system` is the normal entry point; this
    /// is public so synthetic reductions can be set up directly.
    pub fn from_parts(
        n_edges: usize,
        n_faces: usize,
        expressed: Vec<ExpressedFace>,
        blocks: Vec<BoundaryBlock>,
    ) -> Self {
        let coarse_dim = n_edges + n_faces;
        let mut eliminated = vec![false; coarse_dim];
        for ef in &expressed {
            eliminated[n_edges + ef.face] = true;
        }
        let mut fine_of_coarse = vec![None; coarse_dim];
        let mut coarse_of_fine = Vec::with_capacity(coarse_dim - expressed.len());
        for (u, &gone) in eliminated.iter().enumerate() {
            if !gone {
                fine_of_coarse[u] = Some(coarse_of_fine.len() as u32);
                coarse_of_fine.push(u as u32);
            }
        }
        let fine_dim = coarse_of_fine.len();

        let mut expansion: Vec<Vec<(u32, f64)>> = fine_of_coarse
            .iter()
            .map(|p| p.map(|q| vec![(q, 1.0)]).unwrap_or_default())
            .collect();
        for ef in &expressed {
            let row = ef
                .row
                .iter()
                .map(|&(u, w)| {
                    let p = fine_of_coarse[u as usize]
                        .expect("C rows reference retained unknowns only");
                    (p, w)
                })
                .collect();
            expansion[n_edges + ef.face] = row;
        }

        let rank_one = blocks.iter().filter(|b| b.rank == 1).count();
        let rank_two = blocks.len() - rank_one;
        BoundaryReduction {
            blocks,
            expressed,
            rank_one,
            rank_two,
            coarse_dim,
            fine_dim,
            fine_of_coarse,
            coarse_of_fine,
            expansion,
        }
    }

    /// Congruence `PᵀAP` of a coarse matrix onto the constrained basis.
    ///
    /// The product is accumulated as ½(PᵀAP) + ½(PᵀAP)ᵀ, each contribution
    /// pushed to both mirror entries back to back: `compress` sums
    /// duplicates in insertion order, so the two entries of every mirror
    /// pair see identical value sequences and the result is symmetric to
    /// the last bit whenever `A` is.
    pub fn reduce_matrix(&self, a: &Csr) -> Result<Csr, AssemblyError> {
        if a.n != self.coarse_dim {
            return Err(AssemblyError::Dimension { got: a.n, want: self.coarse_dim });
        }
        let mut coo = Coo::new(self.fine_dim);
        for i in 0..a.n {
            let ei = &self.expansion[i];
            if ei.is_empty() {
                continue;
            }
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for &(p, wp) in ei {
                    for &(q, wq) in &self.expansion[j as usize] {
                        let h = 0.5 * wp * wq * v;
                        coo.push(p as usize, q as usize, h);
                        coo.push(q as usize, p as usize, h);
                    }
                }
            }
        }
        Ok(coo.compress())
    }

    /// `Pᵀℓ`: the load vector seen by the constrained basis.
    pub fn reduce_load(&self, l: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        if l.len() != self.coarse_dim {
            return Err(AssemblyError::Dimension { got: l.len(), want: self.coarse_dim });
        }
        let mut out = vec![0.0f64; self.fine_dim];
        for (i, &v) in l.iter().enumerate() {
            for &(p, w) in &self.expansion[i] {
                out[p as usize] += w * v;
            }
        }
        Ok(out)
    }

    /// `Pc`: coarse coefficients of a fine solution, with the eliminated
    /// face coefficients reconstructed from their `C` rows.
    pub fn embed(&self, fine: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        if fine.len() != self.fine_dim {
            return Err(AssemblyError::Dimension { got: fine.len(), want: self.fine_dim });
        }
        let mut out = vec![0.0f64; self.coarse_dim];
        for (i, o) in out.iter_mut().enumerate() {
            for &(p, w) in &self.expansion[i] {
                *o += w * fine[p as usize];
            }
        }
        Ok(out)
    }

    /// Support centroids of the fine unknowns (those of the retained
    /// coarse elements).
    pub fn fine_centroids(&self, k: &SimplicialComplex3, basis: &BasisIndex) -> Vec<Point3> {
        let coarse = basis.support_centroids(k);
        self.coarse_of_fine.iter().map(|&u| coarse[u as usize]).collect()
    }
}

/// Applies the boundary reduction to an assembled system.
pub fn assemble_fine(
    sys: &SparseSymSystem,
    red: &BoundaryReduction,
) -> Result<(Csr, Csr), AssemblyError> {
    Ok((red.reduce_matrix(&sys.gram)?, red.reduce_matrix(&sys.stiffness)?))
}
