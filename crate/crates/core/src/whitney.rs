//! Whitney basis fields of the subdivision complex and their integrals.
//!
//! Degree 0 is the barycentric hat function `x_p`.  The degree-1 and
//! degree-2 fields used as the displacement basis are the metric duals
//!
//! ```text
//! W_e = x_{p0}∇x_{p1} − x_{p1}∇x_{p0}                       (edge e = [p0, p1])
//! W_f = 2(x_{p0}∇x_{p1}×∇x_{p2} + cyclic)                   (face f = [p0, p1, p2])
//! ```
//!
//! and degree 3 is the locally constant `W_t = 6·1_t`, so that
//! `Σ_t (1/6) W_t = 1`.  Within one tet every such field is
//! `Σ_i λ_i u_i` for constant vectors `u_i` attached to the tet's
//! vertices; [`TetLinear`] carries that form, and all Gram/stiffness/
//! boundary integrands reduce to exact low-degree quadrature of products
//! of barycentric coordinates.
//!
//! Edge fields are tangentially continuous and divergence-free per tet;
//! face fields have continuous normal component across their face and
//! constant divergence `b_ft / V_t` in each incident tet.  Line integrals
//! and fluxes below exploit exactly those continuity properties.

use crate::mesh::{
    cross3, dot3, norm3, scale3, sub3, IncidenceData, Point3, SimplicialComplex3, TetGeometry,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WhitneyError {
    #[error("point {0:?} lies outside the polytope")]
    OutsidePolytope(Point3),
    #[error("face {0} is interior; boundary pairings need a boundary face")]
    InteriorFace(usize),
    #[error("coefficient vector has length {got}, expected {want}")]
    DimensionMismatch { got: usize, want: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Vertex,
    Edge,
    Face,
    Tet,
}

/// A single Whitney basis field, identified by the simplex that owns it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WhitneyField {
    pub kind: BasisKind,
    pub index: usize,
}

impl WhitneyField {
    pub fn vertex(i: usize) -> Self {
        Self { kind: BasisKind::Vertex, index: i }
    }
    pub fn edge(i: usize) -> Self {
        Self { kind: BasisKind::Edge, index: i }
    }
    pub fn face(i: usize) -> Self {
        Self { kind: BasisKind::Face, index: i }
    }
    pub fn tet(i: usize) -> Self {
        Self { kind: BasisKind::Tet, index: i }
    }
}

/// Value of a field at a point: scalar for degrees 0 and 3, vector else.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Scalar(f64),
    Vector([f64; 3]),
}

impl Value {
    pub fn as_vector(self) -> [f64; 3] {
        match self {
            Value::Vector(v) => v,
            Value::Scalar(s) => panic!("expected vector value, got scalar {s}"),
        }
    }
    pub fn as_scalar(self) -> f64 {
        match self {
            Value::Scalar(s) => s,
            Value::Vector(v) => panic!("expected scalar value, got vector {v:?}"),
        }
    }
}

/// Per-tet geometry plus the star adjacency needed to localize fields.
pub struct GeomCache {
    pub tets: Vec<TetGeometry>,
    /// Tets incident to each edge, ascending.
    pub edge_star: Vec<Vec<u32>>,
    /// Tets incident to each vertex, ascending.
    pub vert_star: Vec<Vec<u32>>,
}

impl GeomCache {
    pub fn new(k: &SimplicialComplex3) -> Self {
        let tets: Vec<TetGeometry> = (0..k.tets.len()).map(|t| k.tet_geometry(t)).collect();
        let mut edge_star = vec![Vec::new(); k.edges.len()];
        let mut vert_star = vec![Vec::new(); k.verts.len()];
        for (ti, t) in k.tets.iter().enumerate() {
            for &e in &k.tet_edges[ti] {
                edge_star[e].push(ti as u32);
            }
            for &v in t {
                vert_star[v].push(ti as u32);
            }
        }
        Self { tets, edge_star, vert_star }
    }

    /// Tets in the closed star of the owning simplex, ascending.
    pub fn star_vec(&self, k: &SimplicialComplex3, field: &WhitneyField) -> Vec<u32> {
        match field.kind {
            BasisKind::Vertex => self.vert_star[field.index].clone(),
            BasisKind::Edge => self.edge_star[field.index].clone(),
            BasisKind::Face => {
                let (t0, t1) = k.face_tets[field.index];
                let mut v = vec![t0 as u32];
                if let Some(t1) = t1 {
                    v.push(t1 as u32);
                }
                v.sort_unstable();
                v
            }
            BasisKind::Tet => vec![field.index as u32],
        }
    }
}

/// A vector field that is linear on one tet: `x ↦ Σ_i λ_i(x) u[i]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TetLinear {
    pub u: [[f64; 3]; 4],
}

impl TetLinear {
    pub fn eval(&self, lam: &[f64; 4]) -> [f64; 3] {
        let mut out = [0.0f64; 3];
        for i in 0..4 {
            for a in 0..3 {
                out[a] += lam[i] * self.u[i][a];
            }
        }
        out
    }

    /// The constant gradient `G[component][derivative]`.
    pub fn gradient(&self, g: &TetGeometry) -> [[f64; 3]; 3] {
        let mut out = [[0.0f64; 3]; 3];
        for i in 0..4 {
            for a in 0..3 {
                for d in 0..3 {
                    out[a][d] += self.u[i][a] * g.grads[i][d];
                }
            }
        }
        out
    }

    pub fn divergence(&self, g: &TetGeometry) -> f64 {
        let mut div = 0.0;
        for i in 0..4 {
            div += dot3(self.u[i], g.grads[i]);
        }
        div
    }

    /// Mean value over the tet, `(Σ_i u_i)/4`.
    pub fn mean(&self) -> [f64; 3] {
        let mut m = [0.0f64; 3];
        for i in 0..4 {
            for a in 0..3 {
                m[a] += 0.25 * self.u[i][a];
            }
        }
        m
    }
}

/// A vector field linear on one triangle: `Σ_m λ_m v[m]` over the face's
/// own barycentric coordinates (the trace of a [`TetLinear`]).
#[derive(Debug, Clone, Copy, Default)]
pub struct TriLinear {
    pub v: [[f64; 3]; 3],
}

impl TriLinear {
    pub fn eval(&self, lam: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0f64; 3];
        for m in 0..3 {
            for a in 0..3 {
                out[a] += lam[m] * self.v[m][a];
            }
        }
        out
    }

    pub fn mean(&self) -> [f64; 3] {
        let mut m = [0.0f64; 3];
        for i in 0..3 {
            for a in 0..3 {
                m[a] += self.v[i][a] / 3.0;
            }
        }
        m
    }
}

/// `W_e` restricted to a tet; `None` when the tet is outside the star.
pub fn edge_whitney(
    k: &SimplicialComplex3,
    g: &TetGeometry,
    tet: usize,
    edge: usize,
) -> Option<TetLinear> {
    let t = &k.tets[tet];
    let [ea, eb] = k.edges[edge];
    let a = t.iter().position(|&v| v == ea)?;
    let b = t.iter().position(|&v| v == eb)?;
    let mut u = [[0.0f64; 3]; 4];
    u[a] = g.grads[b];
    u[b] = scale3(g.grads[a], -1.0);
    Some(TetLinear { u })
}

/// `W_f` restricted to a tet; `None` when the tet is outside the star.
pub fn face_whitney(
    k: &SimplicialComplex3,
    g: &TetGeometry,
    tet: usize,
    face: usize,
) -> Option<TetLinear> {
    let t = &k.tets[tet];
    let [fa, fb, fc] = k.faces[face];
    let a = t.iter().position(|&v| v == fa)?;
    let b = t.iter().position(|&v| v == fb)?;
    let c = t.iter().position(|&v| v == fc)?;
    let mut u = [[0.0f64; 3]; 4];
    u[a] = scale3(cross3(g.grads[b], g.grads[c]), 2.0);
    u[b] = scale3(cross3(g.grads[c], g.grads[a]), 2.0);
    u[c] = scale3(cross3(g.grads[a], g.grads[b]), 2.0);
    Some(TetLinear { u })
}

/// Barycentric weights of `x_p` on a tet (the indicator of the local
/// position of `p`); `None` outside the star.
pub fn vertex_weights(k: &SimplicialComplex3, tet: usize, vert: usize) -> Option<[f64; 4]> {
    let p = k.tets[tet].iter().position(|&v| v == vert)?;
    let mut w = [0.0f64; 4];
    w[p] = 1.0;
    Some(w)
}

/// Trace of a [`TetLinear`] on a face of its tet.  The apex coordinate
/// vanishes there, so the trace is linear in the face's own barycentrics.
pub fn trace_on_face(
    k: &SimplicialComplex3,
    field: &TetLinear,
    tet: usize,
    face: usize,
) -> TriLinear {
    let t = &k.tets[tet];
    let f = &k.faces[face];
    let mut v = [[0.0f64; 3]; 3];
    for (m, &fv) in f.iter().enumerate() {
        let i = t.iter().position(|&w| w == fv).expect("face vertex belongs to the tet");
        v[m] = field.u[i];
    }
    TriLinear { v }
}

// ---------------------------------------------------------------------------
// Exact quadrature.

/// `∫ λ₀^a λ₁^b λ₂^c λ₃^d dV = a!b!c!d!·3!/(a+b+c+d+3)!·V`.
pub fn tet_monomial(exps: [u32; 4], vol: f64) -> f64 {
    let s: u32 = exps.iter().sum();
    let mut num = 6.0; // 3!
    for &e in &exps {
        num *= factorial(e);
    }
    num / factorial(s + 3) * vol
}

/// `∫ λ₀^a λ₁^b λ₂^c dA = a!b!c!·2!/(a+b+c+2)!·A`.
pub fn tri_monomial(exps: [u32; 3], area: f64) -> f64 {
    let s: u32 = exps.iter().sum();
    let mut num = 2.0;
    for &e in &exps {
        num *= factorial(e);
    }
    num / factorial(s + 2) * area
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product::<f64>().max(1.0)
}

/// Exact `∫_t a·b dV` for two linear fields on a tet:
/// `V/20 · Σ_{ij} (u_i·u_j)(1 + δ_ij)`.
pub fn tet_dot(a: &TetLinear, b: &TetLinear, vol: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let w = if i == j { 2.0 } else { 1.0 };
            acc += w * dot3(a.u[i], b.u[j]);
        }
    }
    acc * vol / 20.0
}

/// Exact `∫_f a·b dσ` for two linear fields on a triangle:
/// `A/12 · Σ_{ij} (v_i·v_j)(1 + δ_ij)`.
pub fn tri_dot(a: &TriLinear, b: &TriLinear, area: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let w = if i == j { 2.0 } else { 1.0 };
            acc += w * dot3(a.v[i], b.v[j]);
        }
    }
    acc * area / 12.0
}

/// Exact `∫_f (a·n)(b·n) dσ` on a triangle with unit normal `n`.
pub fn tri_nn(a: &TriLinear, b: &TriLinear, n: Point3, area: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let w = if i == j { 2.0 } else { 1.0 };
            acc += w * dot3(a.v[i], n) * dot3(b.v[j], n);
        }
    }
    acc * area / 12.0
}

/// Exact `∫_f c·b dσ` for a constant vector against a linear field.
pub fn tri_const_dot(c: Point3, b: &TriLinear, area: f64) -> f64 {
    dot3(c, b.mean()) * area
}

/// Degree-5 Grundmann–Möller quadrature on a tet, as barycentric points
/// with weights summing to the tet volume.  Used for non-polynomial loads.
pub fn tet_quadrature_deg5(vol: f64) -> Vec<([f64; 4], f64)> {
    // s = 2, d = 2s+1 = 5, n = 3; c_i = (−1)^i 2^{−2s} n! (d+n−2i)^d / (i!(d+n−i)!).
    let mut rule = Vec::with_capacity(15);
    for i in 0..=2u32 {
        let denom = (5 + 3 - 2 * i) as f64;
        let c = (-1.0f64).powi(i as i32) * 0.0625 * 6.0 * denom.powi(5)
            / (factorial(i) * factorial(5 + 3 - i));
        // all β with |β| = s − i over 4 slots
        let s_i = (2 - i) as usize;
        for b0 in 0..=s_i {
            for b1 in 0..=(s_i - b0) {
                for b2 in 0..=(s_i - b0 - b1) {
                    let b3 = s_i - b0 - b1 - b2;
                    let lam = [
                        (2 * b0 + 1) as f64 / denom,
                        (2 * b1 + 1) as f64 / denom,
                        (2 * b2 + 1) as f64 / denom,
                        (2 * b3 + 1) as f64 / denom,
                    ];
                    rule.push((lam, c * vol));
                }
            }
        }
    }
    rule
}

// ---------------------------------------------------------------------------
// Point evaluation.

/// Evaluates a basis field at a point of the polytope, resolving shared
/// simplex boundaries through the lowest-indexed incident tet.
pub fn eval(
    k: &SimplicialComplex3,
    cache: &GeomCache,
    field: &WhitneyField,
    x: Point3,
) -> Result<Value, WhitneyError> {
    let (tet, lam) = k.locate(x).ok_or(WhitneyError::OutsidePolytope(x))?;
    Ok(eval_in_tet(k, cache, field, tet, &lam))
}

/// Evaluates a basis field at barycentric coordinates of a known tet.
pub fn eval_in_tet(
    k: &SimplicialComplex3,
    cache: &GeomCache,
    field: &WhitneyField,
    tet: usize,
    lam: &[f64; 4],
) -> Value {
    let g = &cache.tets[tet];
    match field.kind {
        BasisKind::Vertex => {
            let v = vertex_weights(k, tet, field.index)
                .map(|w| (0..4).map(|i| w[i] * lam[i]).sum())
                .unwrap_or(0.0);
            Value::Scalar(v)
        }
        BasisKind::Edge => Value::Vector(
            edge_whitney(k, g, tet, field.index).map(|f| f.eval(lam)).unwrap_or([0.0; 3]),
        ),
        BasisKind::Face => Value::Vector(
            face_whitney(k, g, tet, field.index).map(|f| f.eval(lam)).unwrap_or([0.0; 3]),
        ),
        BasisKind::Tet => Value::Scalar(if tet == field.index { 6.0 } else { 0.0 }),
    }
}

/// `∫_{e'} W · dl` along an edge of the complex, oriented by its ascending
/// tuple.  Tangential continuity makes any incident tet equivalent; the
/// lowest-indexed one is used.
pub fn line_integral(
    k: &SimplicialComplex3,
    cache: &GeomCache,
    field: &WhitneyField,
    edge: usize,
) -> f64 {
    let [a, b] = k.edges[edge];
    let tet = cache.edge_star[edge][0] as usize;
    let pa = k.verts[a];
    let pb = k.verts[b];
    let mid = [
        0.5 * (pa[0] + pb[0]),
        0.5 * (pa[1] + pb[1]),
        0.5 * (pa[2] + pb[2]),
    ];
    let lam = k.barycentric_in_tet(tet, mid);
    let v = eval_in_tet(k, cache, field, tet, &lam).as_vector();
    dot3(v, sub3(pb, pa))
}

/// Flux `∫_{f'} W · n dσ` through a face, with `n` the normal of the
/// ascending tuple as an oriented 2-simplex (not the exterior normal).
/// Normal continuity makes either incident tet equivalent.
pub fn face_flux(
    k: &SimplicialComplex3,
    cache: &GeomCache,
    field: &WhitneyField,
    face: usize,
) -> f64 {
    let [a, b, c] = k.faces[face];
    let n = cross3(sub3(k.verts[b], k.verts[a]), sub3(k.verts[c], k.verts[a]));
    let area2 = norm3(n); // 2 × area
    let n_hat = scale3(n, 1.0 / area2);
    let tet = k.face_tets[face].0;
    let centroid = k.face_barycenter(face);
    let lam = k.barycentric_in_tet(tet, centroid);
    let v = eval_in_tet(k, cache, field, tet, &lam).as_vector();
    dot3(v, n_hat) * 0.5 * area2
}

// ---------------------------------------------------------------------------
// Whole-domain pairings.

/// The volume bilinear forms appearing in the Gram and stiffness matrices.
#[derive(Clone, Copy)]
pub enum VolumePairing<'a> {
    /// `∫ a·b`.
    Dot,
    /// `∫ div a · div b`.
    DivDiv,
    /// `∫ ∂_i a^α W^{αβ}_{ij} ∂_j b^β` with the 6×6 moduli.
    GradGrad(&'a [[f64; 6]; 6]),
    /// `½ ∫ (Σ_i l_i ∂_i a^i)(div b) + (a ↔ b)`.
    WeightedDiv([f64; 3]),
}

/// Integrates a pairing of two basis fields over the whole complex.
/// Scalar (vertex) fields pair only under `Dot`.
pub fn integrate_pairing(
    k: &SimplicialComplex3,
    cache: &GeomCache,
    a: &WhitneyField,
    b: &WhitneyField,
    pairing: VolumePairing,
) -> f64 {
    if a.kind == BasisKind::Vertex || b.kind == BasisKind::Vertex {
        assert!(
            matches!(pairing, VolumePairing::Dot)
                && a.kind == BasisKind::Vertex
                && b.kind == BasisKind::Vertex,
            "scalar fields pair only with scalar fields under Dot"
        );
        return vertex_dot(k, cache, a.index, b.index);
    }
    let star_a = cache.star_vec(k, a);
    let star_b = cache.star_vec(k, b);
    let mut acc = 0.0;
    let mut ia = 0;
    let mut ib = 0;
    while ia < star_a.len() && ib < star_b.len() {
        match star_a[ia].cmp(&star_b[ib]) {
            std::cmp::Ordering::Less => ia += 1,
            std::cmp::Ordering::Greater => ib += 1,
            std::cmp::Ordering::Equal => {
                let tet = star_a[ia] as usize;
                let g = &cache.tets[tet];
                let fa = local_field(k, g, tet, a).expect("tet is in star of a");
                let fb = local_field(k, g, tet, b).expect("tet is in star of b");
                acc += tet_pairing_value(&fa, &fb, g, &pairing);
                ia += 1;
                ib += 1;
            }
        }
    }
    acc
}

fn tet_pairing_value(
    fa: &TetLinear,
    fb: &TetLinear,
    g: &TetGeometry,
    pairing: &VolumePairing,
) -> f64 {
    match pairing {
        VolumePairing::Dot => tet_dot(fa, fb, g.vol),
        VolumePairing::DivDiv => fa.divergence(g) * fb.divergence(g) * g.vol,
        VolumePairing::GradGrad(v6) => {
            crate::material::energy_pair(v6, &fa.gradient(g), &fb.gradient(g)) * g.vol
        }
        VolumePairing::WeightedDiv(l) => {
            let ga = fa.gradient(g);
            let gb = fb.gradient(g);
            let wa: f64 = (0..3).map(|i| l[i] * ga[i][i]).sum();
            let wb: f64 = (0..3).map(|i| l[i] * gb[i][i]).sum();
            let da = ga[0][0] + ga[1][1] + ga[2][2];
            let db = gb[0][0] + gb[1][1] + gb[2][2];
            0.5 * (wa * db + wb * da) * g.vol
        }
    }
}

fn vertex_dot(k: &SimplicialComplex3, cache: &GeomCache, p: usize, q: usize) -> f64 {
    let star_p = &cache.vert_star[p];
    let star_q = &cache.vert_star[q];
    let mut acc = 0.0;
    let (mut ip, mut iq) = (0, 0);
    while ip < star_p.len() && iq < star_q.len() {
        match star_p[ip].cmp(&star_q[iq]) {
            std::cmp::Ordering::Less => ip += 1,
            std::cmp::Ordering::Greater => iq += 1,
            std::cmp::Ordering::Equal => {
                let tet = star_p[ip] as usize;
                let vol = cache.tets[tet].vol;
                let lp = k.tets[tet].iter().position(|&v| v == p).unwrap();
                let lq = k.tets[tet].iter().position(|&v| v == q).unwrap();
                let mut exps = [0u32; 4];
                exps[lp] += 1;
                exps[lq] += 1;
                acc += tet_monomial(exps, vol);
                ip += 1;
                iq += 1;
            }
        }
    }
    acc
}

pub fn local_field(
    k: &SimplicialComplex3,
    g: &TetGeometry,
    tet: usize,
    field: &WhitneyField,
) -> Option<TetLinear> {
    match field.kind {
        BasisKind::Edge => edge_whitney(k, g, tet, field.index),
        BasisKind::Face => face_whitney(k, g, tet, field.index),
        _ => panic!("local_field expects an edge or face field"),
    }
}

// ---------------------------------------------------------------------------
// Boundary pairings.

/// The L²(∂Ω) bilinear forms of the boundary coupling blocks.  All are
/// integrals over a single boundary face; `v6` is the 6×6 moduli where a
/// stress appears, and `w1n` the contraction `W'(1)N`.
#[derive(Clone, Copy)]
pub enum BoundaryPairing<'a> {
    /// `∫ a·b dσ`.
    Dot,
    /// `∫ (a·N)(b·N) dσ`.
    NormalNormal,
    /// `∫ (σ(∇a)N)·b dσ` — the stress of the first slot against the second.
    StressDot(&'a [[f64; 6]; 6]),
    /// `∫ (N·σ(∇a)N)(b·N) dσ`.
    StressNormalNormal(&'a [[f64; 6]; 6]),
    /// `∫ (N·W'(1)N)(N·∇a·N)(b·N) dσ` — the normal-derivative coupling.
    ContractionNormalDeriv(&'a [[f64; 3]; 3]),
    /// `∫ (W'(1)N)·b dσ` (first slot unused).
    ContractionDot(&'a [[f64; 3]; 3]),
}

/// Evaluates a boundary pairing of two basis fields over one boundary
/// face.  Both fields are evaluated from the face's unique incident tet;
/// fields without support there contribute zero.
pub fn boundary_pairing(
    k: &SimplicialComplex3,
    cache: &GeomCache,
    face: usize,
    a: &WhitneyField,
    b: &WhitneyField,
    pairing: BoundaryPairing,
) -> Result<f64, WhitneyError> {
    if !k.face_boundary[face] {
        return Err(WhitneyError::InteriorFace(face));
    }
    let tet = k.face_tets[face].0;
    let g = &cache.tets[tet];
    let (n, area) = k.boundary_face_frame(face);
    let fa = local_field(k, g, tet, a);
    let fb = local_field(k, g, tet, b);
    let (fa, fb) = match (fa, fb) {
        (Some(fa), Some(fb)) => (fa, fb),
        _ => return Ok(0.0),
    };
    let ta = trace_on_face(k, &fa, tet, face);
    let tb = trace_on_face(k, &fb, tet, face);
    Ok(match pairing {
        BoundaryPairing::Dot => tri_dot(&ta, &tb, area),
        BoundaryPairing::NormalNormal => tri_nn(&ta, &tb, n, area),
        BoundaryPairing::StressDot(v6) => {
            let s = crate::material::stress(v6, &fa.gradient(g));
            let sn = matvec3(&s, n);
            tri_const_dot(sn, &tb, area)
        }
        BoundaryPairing::StressNormalNormal(v6) => {
            let s = crate::material::stress(v6, &fa.gradient(g));
            let snn = dot3(matvec3(&s, n), n);
            snn * dot3(tb.mean(), n) * area
        }
        BoundaryPairing::ContractionNormalDeriv(w1) => {
            let w1nn = dot3(matvec3(w1, n), n);
            let ga = fa.gradient(g);
            let dnn = dot3(matvec3(&ga, n), n);
            w1nn * dnn * dot3(tb.mean(), n) * area
        }
        BoundaryPairing::ContractionDot(w1) => {
            let w1n = matvec3(w1, n);
            tri_const_dot(w1n, &tb, area)
        }
    })
}

pub(crate) fn matvec3(m: &[[f64; 3]; 3], v: Point3) -> Point3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

// ---------------------------------------------------------------------------
// The chain complex.

/// Kinds of coefficient vectors the chain operators map between.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainOp {
    /// Fun(K′) → Grad(K′): `Σ f_p x_p ↦ Σ_e (f_b − f_a) W_e`.
    Grad,
    /// Grad(K′) → Div(K′): `curl(Σ c_e W_e) = Σ_f (Σ_e b_ef c_e) W_f`.
    Curl,
    /// Div(K′) → Char(K′): integer-weighted cochain divergence,
    /// `d_t = Σ_f b_ft c_f`; the function value on a tet is `d_t / V_t`.
    Div,
}

/// Applies a chain operator to a coefficient vector.
pub fn apply_chain(
    inc: &IncidenceData,
    op: ChainOp,
    coeffs: &[f64],
) -> Result<Vec<f64>, WhitneyError> {
    match op {
        ChainOp::Grad => {
            let want = inc.vert_edge.iter().flatten().map(|&(v, _)| v + 1).max().unwrap_or(0);
            if coeffs.len() != want {
                return Err(WhitneyError::DimensionMismatch { got: coeffs.len(), want });
            }
            Ok(inc
                .vert_edge
                .iter()
                .map(|row| row.iter().map(|&(v, s)| s as f64 * coeffs[v]).sum())
                .collect())
        }
        ChainOp::Curl => {
            if coeffs.len() != inc.vert_edge.len() {
                return Err(WhitneyError::DimensionMismatch {
                    got: coeffs.len(),
                    want: inc.vert_edge.len(),
                });
            }
            Ok(inc
                .edge_face
                .iter()
                .map(|row| row.iter().map(|&(e, s)| s as f64 * coeffs[e]).sum())
                .collect())
        }
        ChainOp::Div => {
            if coeffs.len() != inc.edge_face.len() {
                return Err(WhitneyError::DimensionMismatch {
                    got: coeffs.len(),
                    want: inc.edge_face.len(),
                });
            }
            Ok(inc
                .face_tet
                .iter()
                .map(|row| row.iter().map(|&(f, s)| s as f64 * coeffs[f]).sum())
                .collect())
        }
    }
}
