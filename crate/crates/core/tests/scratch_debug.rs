//! Scratch diagnostics; delete before finishing.

use nalgebra::DMatrix;
use plates_core::assembly::{
    assemble_fine, assemble_gram, assemble_system, boundary_condition_system, BasisIndex,
};
use plates_core::material::{self, LambdaPreset};
use plates_core::mesh::{Point3, SimplicialComplex3};
use plates_core::whitney::GeomCache;

fn reference_tet_subdivision() -> SimplicialComplex3 {
    let verts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let tets = vec![[0, 1, 2, 3]];
    SimplicialComplex3::from_tets(verts, tets).unwrap().barycentric_subdivide()
}

fn cube_subdivision() -> SimplicialComplex3 {
    SimplicialComplex3::slab([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]).unwrap().barycentric_subdivide()
}

fn dot3(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[test]
fn probe_gram_kernel() {
    let k = cube_subdivision();
    let cache = GeomCache::new(&k);
    let basis = BasisIndex::new(&k);
    let mat = material::spruce_engelmann();
    let sys = assemble_system(&k, &cache, &mat, LambdaPreset::One);

    for (name, alpha) in [
        ("ex", [1.0, 0.0, 0.0]),
        ("ey", [0.0, 1.0, 0.0]),
        ("ez", [0.0, 0.0, 1.0]),
    ] {
        let mut v = vec![0.0f64; basis.dim()];
        for (e, &[a, b]) in k.edges.iter().enumerate() {
            let ta = k.verts[a];
            let tb = k.verts[b];
            v[basis.edge_unknown(e)] =
                dot3([tb[0] - ta[0], tb[1] - ta[1], tb[2] - ta[2]], alpha);
        }
        for (f, &[a, b, c]) in k.faces.iter().enumerate() {
            let pa = k.verts[a];
            let pb = k.verts[b];
            let pc = k.verts[c];
            let na = cross3(
                [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]],
                [pc[0] - pa[0], pc[1] - pa[1], pc[2] - pa[2]],
            );
            // area-weighted ascending normal = 0.5 * cross
            v[basis.face_unknown(f)] = -0.5 * dot3(na, alpha);
        }
        let mut r = vec![0.0f64; v.len()];
        sys.gram.matvec(&v, &mut r);
        let rn = r.iter().fold(0.0f64, |s, x| s + x * x).sqrt();
        let vn = v.iter().fold(0.0f64, |s, x| s + x * x).sqrt();
        let mut kr = vec![0.0f64; v.len()];
        sys.stiffness.matvec(&v, &mut kr);
        let krn = kr.iter().fold(0.0f64, |s, x| s + x * x).sqrt();
        println!("alpha={name}: |I v|/|v| = {:.3e}   |K v|/|v| = {:.3e}", rn / vn, krn / vn);
    }

    // Fine gram spectrum.
    let red = boundary_condition_system(&k, &cache, &mat).unwrap();
    let (fine_gram, _fine_stiff) = assemble_fine(&sys, &red).unwrap();
    let dg = fine_gram.to_dense();
    let sym = DMatrix::from_fn(dg.nrows(), dg.ncols(), |i, j| 0.5 * (dg[(i, j)] + dg[(j, i)]));
    let eig = sym.symmetric_eigen().eigenvalues;
    let mut ev: Vec<f64> = eig.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    println!(
        "fine gram: dim {} min {:.6e} next {:.6e} {:.6e} {:.6e} max {:.6e}",
        red.fine_dim,
        ev[0],
        ev[1],
        ev[2],
        ev[3],
        ev[ev.len() - 1]
    );
    // Coarse gram spectrum low end for reference.
    let dgc = sys.gram.to_dense();
    let eigc = dgc.symmetric_eigen().eigenvalues;
    let mut evc: Vec<f64> = eigc.iter().copied().collect();
    evc.sort_by(f64::total_cmp);
    println!(
        "coarse gram: dim {} low: {:.3e} {:.3e} {:.3e} {:.3e} {:.3e} {:.3e}",
        basis.dim(),
        evc[0],
        evc[1],
        evc[2],
        evc[3],
        evc[4],
        evc[5]
    );
}

#[test]
fn probe_reference_tet_block() {
    let mat = material::isotropic(2.0e9, 0.8e9, 1.0e3);
    let k = reference_tet_subdivision();
    let cache = GeomCache::new(&k);
    let red = boundary_condition_system(&k, &cache, &mat).unwrap();
    for block in &red.blocks {
        let full = DMatrix::from_fn(2, 18, |r, c| block.raw[r][c]);
        let face = DMatrix::from_fn(2, 6, |r, c| block.raw[r][12 + c]);
        let edge = DMatrix::from_fn(2, 12, |r, c| block.raw[r][c]);
        let sv_full = full.clone().svd(false, false).singular_values;
        let sv_face = face.clone().svd(false, false).singular_values;
        let sv_edge = edge.clone().svd(false, false).singular_values;
        println!(
            "parent face {}: face sv ratio {:.3e}, edge sv ratio {:.3e}, full sv ratio {:.3e}",
            block.parent_face,
            sv_face[1] / sv_face[0],
            sv_edge[1] / sv_edge[0],
            sv_full[1] / sv_full[0]
        );
        if sv_face[1] / sv_face[0] < 1e-8 {
            // Left null combo of the face block.
            let svd = face.clone().svd(true, false);
            let u = svd.u.unwrap();
            let (a, b) = (u[(0, 1)], u[(1, 1)]);
            println!("  null combo ({a:.6}, {b:.6})");
            let mut comb = [0.0f64; 18];
            for c in 0..18 {
                comb[c] = a * block.raw[0][c] + b * block.raw[1][c];
            }
            println!("  combo edge cols: {:?}", &comb[..12]);
            println!("  combo face cols: {:?}", &comb[12..]);
            println!("  row0: {:?}", block.raw[0]);
            println!("  row1: {:?}", block.raw[1]);
        }
    }
}

#[test]
fn probe_slab_block_ratios() {
    let k = SimplicialComplex3::slab([0.10, 0.01, 0.20], [0.01, 0.005, 0.01]).unwrap().barycentric_subdivide();
    let cache = GeomCache::new(&k);
    let mat = material::spruce_engelmann();
    let red = boundary_condition_system(&k, &cache, &mat).unwrap();
    let mut face_ratios: Vec<(f64, usize)> = Vec::new();
    let mut full_ratios: Vec<(f64, usize)> = Vec::new();
    for block in &red.blocks {
        let full = DMatrix::from_fn(2, 18, |r, c| block.raw[r][c]);
        let face = DMatrix::from_fn(2, 6, |r, c| block.raw[r][12 + c]);
        let svf = face.svd(false, false).singular_values;
        let svl = full.svd(false, false).singular_values;
        face_ratios.push((svf[1] / svf[0], block.parent_face));
        full_ratios.push((svl[1] / svl[0], block.parent_face));
    }
    face_ratios.sort_by(|x, y| x.0.total_cmp(&y.0));
    full_ratios.sort_by(|x, y| x.0.total_cmp(&y.0));
    println!("blocks: {}", red.blocks.len());
    for t in [1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2] {
        let nf = face_ratios.iter().filter(|x| x.0 <= t).count();
        let nl = full_ratios.iter().filter(|x| x.0 <= t).count();
        println!("  thr {t:.0e}: face {nf}  full {nl}");
    }
    println!("smallest 16 face ratios:");
    for (r, pf) in face_ratios.iter().take(16) {
        println!("    {r:.6e}  parent {pf}");
    }
    println!("smallest 16 full ratios:");
    for (r, pf) in full_ratios.iter().take(16) {
        println!("    {r:.6e}  parent {pf}");
    }
}

#[test]
fn probe_cube_blocks() {
    let k = cube_subdivision();
    let cache = GeomCache::new(&k);
    let mat = material::spruce_engelmann();
    let red = boundary_condition_system(&k, &cache, &mat).unwrap();
    println!("blocks: {} rank_one {} rank_two {}", red.blocks.len(), red.rank_one, red.rank_two);
    for block in &red.blocks {
        let edge_scale = block.raw.iter().flat_map(|r| &r[..12]).fold(0.0f64, |s, v| s.max(v.abs()));
        let face_scale = block.raw.iter().flat_map(|r| &r[12..]).fold(0.0f64, |s, v| s.max(v.abs()));
        // Row-wise face scales.
        let f0 = block.raw[0][12..].iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let f1 = block.raw[1][12..].iter().fold(0.0f64, |s, v| s.max(v.abs()));
        println!(
            "parent {} rank {} sv_ratio {:.3e}  edge_scale {:.3e} face_scale {:.3e} (rows {:.2e} {:.2e})",
            block.parent_face, block.rank, block.sv_ratio, edge_scale, face_scale, f0, f1
        );
    }
    // Largest C coefficient.
    let mut cmax = 0.0f64;
    for ef in &red.expressed {
        for &(_, w) in &ef.row {
            cmax = cmax.max(w.abs());
        }
    }
    println!("max |C| = {cmax:.3e}");
}

#[test]
fn probe_face_gradient_isotropy() {
    use plates_core::whitney::face_whitney;
    let k = cube_subdivision();
    let cache = GeomCache::new(&k);
    // First boundary face and its tet.
    let f = (0..k.faces.len()).find(|&f| k.face_tets[f].1.is_none()).unwrap();
    let t = k.face_tets[f].0;
    let g = &cache.tets[t];
    let w = face_whitney(&k, g, t, f).unwrap();
    let gf = w.gradient(g);
    println!("face {f} tet {t} gradient rows:");
    for r in 0..3 {
        println!("  {:?}", gf[r]);
    }
    // And one interior face of the same tet for comparison.
    let fi = (0..k.faces.len()).find(|&f2| k.face_tets[f2].0 == t && k.face_tets[f2].1.is_some())
        .or((0..k.faces.len()).find(|&f2| k.face_tets[f2].1 == Some(t)))
        .unwrap();
    if let Some(w2) = face_whitney(&k, g, t, fi) {
        let g2 = w2.gradient(g);
        println!("interior face {fi} gradient rows:");
        for r in 0..3 {
            println!("  {:?}", g2[r]);
        }
    }
}

// Prototype of the weak (rim line integral) reading of the tangential
// derivative pairing: for constant w1n,
//   <d_T W, w1n>_F  =  sum over rim segments of (T.nu) * int_seg (W.w1n) dl.
fn rim_block(
    k: &SimplicialComplex3,
    cache: &GeomCache,
    mat: &plates_core::material::ElasticTensor,
    pf: usize,
    faces: &[usize; 6],
    edges: &[usize; 12],
) -> [[f64; 18]; 2] {
    use plates_core::whitney::{eval_in_tet, face_whitney, WhitneyField};
    let parent = k.parent.as_deref().unwrap();
    let corners = parent.faces[pf];
    let pairs = [(corners[0], corners[1]), (corners[0], corners[2]), (corners[1], corners[2])];
    let (mut best, mut best_len) = (pairs[0], -1.0f64);
    for &(i, j) in &pairs {
        let d = [
            parent.verts[j][0] - parent.verts[i][0],
            parent.verts[j][1] - parent.verts[i][1],
            parent.verts[j][2] - parent.verts[i][2],
        ];
        let len = dot3(d, d).sqrt();
        if len > best_len {
            best = (i, j);
            best_len = len;
        }
    }
    let t1 = [
        (parent.verts[best.1][0] - parent.verts[best.0][0]) / best_len,
        (parent.verts[best.1][1] - parent.verts[best.0][1]) / best_len,
        (parent.verts[best.1][2] - parent.verts[best.0][2]) / best_len,
    ];
    let (n, _) = k.boundary_face_frame(faces[0]);
    let t2 = cross3(n, t1);
    let w1 = material::boundary_contraction(&mat.sym6);
    let w1n = {
        let mut v = [0.0; 3];
        for r in 0..3 {
            v[r] = w1[r][0] * n[0] + w1[r][1] * n[1] + w1[r][2] * n[2];
        }
        v
    };

    let mut m = [[0.0f64; 18]; 2];
    for (kf, &f) in faces.iter().enumerate() {
        let t = k.face_tets[f].0;
        let g = &cache.tets[t];
        // Identify the rim segment: the two vertices of f that are NOT the
        // parent-face barycenter. The sub-face is [b_F, m, v] where b_F has
        // the highest subdivision depth... safer: the rim vertices are the
        // two whose parent is NOT the parent face pf itself.
        let vp = k.vertex_parent.as_deref().unwrap();
        let mut rim: Vec<usize> = Vec::new();
        for &v in &k.faces[f] {
            let p = vp[v];
            let on_face_bary = p.dim == 2 && p.index == pf;
            if !on_face_bary {
                rim.push(v);
            }
        }
        assert_eq!(rim.len(), 2, "sub-face has exactly one rim side");
        let (a, b) = (k.verts[rim[0]], k.verts[rim[1]]);
        let bf = k.faces[f].iter().map(|&v| k.verts[v]).fold([0.0; 3], |s, p| {
            [s[0] + p[0] / 3.0, s[1] + p[1] / 3.0, s[2] + p[2] / 3.0]
        });
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let len = dot3(d, d).sqrt();
        let dn = [d[0] / len, d[1] / len, d[2] / len];
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
        let w = [mid[0] - bf[0], mid[1] - bf[1], mid[2] - bf[2]];
        let wd = dot3(w, dn);
        let mut nu = [w[0] - wd * dn[0], w[1] - wd * dn[1], w[2] - wd * dn[2]];
        let nl = dot3(nu, nu).sqrt();
        nu = [nu[0] / nl, nu[1] / nl, nu[2] / nl];

        // 2-point Gauss on the segment (exact for the linear traces).
        let xi = 0.5 / 3.0f64.sqrt();
        let qpts = [
            [
                a[0] + (0.5 - xi) * (b[0] - a[0]),
                a[1] + (0.5 - xi) * (b[1] - a[1]),
                a[2] + (0.5 - xi) * (b[2] - a[2]),
            ],
            [
                a[0] + (0.5 + xi) * (b[0] - a[0]),
                a[1] + (0.5 + xi) * (b[1] - a[1]),
                a[2] + (0.5 + xi) * (b[2] - a[2]),
            ],
        ];
        let mut columns: Vec<(usize, WhitneyField)> = Vec::new();
        for (ci, &e) in edges.iter().enumerate() {
            columns.push((ci, WhitneyField::edge(e)));
        }
        for (ci, &fc) in faces.iter().enumerate() {
            columns.push((12 + ci, WhitneyField::face(fc)));
        }
        for (col, field) in columns {
            let mut acc = 0.0;
            for q in qpts {
                let lam = k.barycentric_in_tet(t, q);
                let val = eval_in_tet(k, cache, &field, t, &lam).as_vector();
                acc += 0.5 * dot3(val, w1n);
            }
            for (arow, ta) in [t1, t2].into_iter().enumerate() {
                m[arow][col] += dot3(ta, nu) * len * acc;
            }
        }
        // sigma area term for face columns (classical, zero on principal
        // faces, kept for generality).
        let gf = face_whitney(k, g, t, f).unwrap().gradient(g);
        let sig = material::stress(&mat.sym6, &gf);
        let area = k.face_area(f);
        for (arow, ta) in [t1, t2].into_iter().enumerate() {
            let sn = [
                sig[0][0] * n[0] + sig[0][1] * n[1] + sig[0][2] * n[2],
                sig[1][0] * n[0] + sig[1][1] * n[1] + sig[1][2] * n[2],
                sig[2][0] * n[0] + sig[2][1] * n[1] + sig[2][2] * n[2],
            ];
            m[arow][12 + kf] += area * dot3(ta, sn);
        }
    }
    m
}

#[test]
fn probe_r2_slab() {
    let k = SimplicialComplex3::slab([0.10, 0.01, 0.20], [0.01, 0.005, 0.01])
        .unwrap()
        .barycentric_subdivide();
    let cache = GeomCache::new(&k);
    let mat = material::spruce_engelmann();
    let red = boundary_condition_system(&k, &cache, &mat).unwrap();
    let mut face_ratios: Vec<(f64, usize)> = Vec::new();
    let mut full_ratios: Vec<(f64, usize)> = Vec::new();
    let mut escale = 0.0f64;
    let mut fscale = 0.0f64;
    for block in &red.blocks {
        let m = rim_block(&k, &cache, &mat, block.parent_face, &block.faces, &block.edges);
        escale = escale.max(m.iter().flat_map(|r| &r[..12]).fold(0.0f64, |s, v| s.max(v.abs())));
        fscale = fscale.max(m.iter().flat_map(|r| &r[12..]).fold(0.0f64, |s, v| s.max(v.abs())));
        let full = DMatrix::from_fn(2, 18, |r, c| m[r][c]);
        let face = DMatrix::from_fn(2, 6, |r, c| m[r][12 + c]);
        let svf = face.svd(false, false).singular_values;
        let svl = full.svd(false, false).singular_values;
        face_ratios.push((svf[1] / svf[0], block.parent_face));
        full_ratios.push((svl[1] / svl[0], block.parent_face));
    }
    face_ratios.sort_by(|x, y| x.0.total_cmp(&y.0));
    full_ratios.sort_by(|x, y| x.0.total_cmp(&y.0));
    println!("R2 scales: edge {escale:.3e} face {fscale:.3e}");
    for t in [1e-14, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2] {
        let nf = face_ratios.iter().filter(|x| x.0 <= t).count();
        let nl = full_ratios.iter().filter(|x| x.0 <= t).count();
        println!("  thr {t:.0e}: face {nf}  full {nl}");
    }
    println!("smallest 16 face ratios:");
    for (r, pf) in face_ratios.iter().take(16) {
        println!("    {r:.6e}  parent {pf}");
    }
    println!("smallest 16 full ratios:");
    for (r, pf) in full_ratios.iter().take(16) {
        println!("    {r:.6e}  parent {pf}");
    }
}

#[test]
fn probe_production_matches_prototype() {
    let k = SimplicialComplex3::slab([0.10, 0.01, 0.20], [0.01, 0.005, 0.01])
        .unwrap()
        .barycentric_subdivide();
    let cache = GeomCache::new(&k);
    let mat = material::spruce_engelmann();
    let red = boundary_condition_system(&k, &cache, &mat).unwrap();
    let mut worst = 0.0f64;
    for block in &red.blocks {
        let m = rim_block(&k, &cache, &mat, block.parent_face, &block.faces, &block.edges);
        let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
        for r in 0..2 {
            for c in 0..18 {
                worst = worst.max((block.raw[r][c] - m[r][c]).abs() / scale);
            }
        }
    }
    println!("production vs prototype worst rel diff: {worst:.3e}");
    println!("rank_one {}  rank_two {}", red.rank_one, red.rank_two);
    let mut maxc = 0.0f64;
    for ef in &red.expressed {
        for &(_, v) in &ef.row {
            maxc = maxc.max(v.abs());
        }
    }
    println!("max |C| entry: {maxc:.3e}");
    assert!(worst < 1e-12, "production deviates from prototype: {worst:.3e}");
}

#[test]
fn probe_fine_gram_spd_cube() {
    let k = SimplicialComplex3::slab([0.02, 0.01, 0.02], [0.01, 0.005, 0.01])
        .unwrap()
        .barycentric_subdivide();
    let cache = GeomCache::new(&k);
    let basis = BasisIndex::new(&k);
    let mat = material::spruce_engelmann();
    let gram = assemble_gram(&k, &cache, &basis);
    let red = boundary_condition_system(&k, &cache, &mat).unwrap();
    let fine = red.reduce_matrix(&gram).unwrap();
    println!("fine dim {}", fine.n);
    let mut gap = 0.0f64;
    let dm = fine.to_dense();
    for i in 0..fine.n {
        for j in 0..i {
            gap = gap.max((dm[(i, j)] - dm[(j, i)]).abs());
        }
    }
    println!("fine symmetry gap: {gap:.3e}");
    let eig = dm.clone().symmetric_eigen();
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    println!("fine gram eigs low: {:?}", &ev[..6.min(ev.len())]);
    println!("fine gram eig max: {:.6e}", ev[ev.len() - 1]);
    assert!(ev[0] > 0.0, "fine Gram not SPD: {:.3e}", ev[0]);
}

#[test]
#[ignore]
fn probe_residual_floor_scales() {
    let k = SimplicialComplex3::slab([0.02, 0.005, 0.02], [0.01, 0.005, 0.01])
        .unwrap()
        .barycentric_subdivide();
    let cache = GeomCache::new(&k);
    let mat = material::spruce_engelmann();
    let sys = assemble_system(&k, &cache, &mat, LambdaPreset::MeanL);
    let rho = 435.0;
    let n = sys.basis.dim();
    println!("coarse dim {n}, edges {}, faces {}", k.edges.len(), k.faces.len());

    let kmax = sys.stiffness.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gmax = sys.gram.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("max |K| {kmax:.3e}, max |gram| {gmax:.3e}, rho*gram {:.3e}", rho * gmax);

    // Rigid translation along x: edge coefficients only.
    let mut c = vec![0.0f64; n];
    for (e, &[a, b]) in k.edges.iter().enumerate() {
        c[sys.basis.edge_unknown(e)] = k.verts[b][0] - k.verts[a][0];
    }
    let mut kc = vec![0.0; n];
    let mut bc = vec![0.0; n];
    sys.stiffness.matvec(&c, &mut kc);
    sys.gram.matvec(&c, &mut bc);
    for v in bc.iter_mut() {
        *v *= rho;
    }
    let nrm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sigma80 = (2.0 * std::f64::consts::PI * 80.0).powi(2);
    println!(
        "translation: |Kc| {:.3e}  |Bc| {:.3e}  raw res {:.3e}  /sigma80 {:.3e}",
        nrm(&kc),
        nrm(&bc),
        nrm(&kc) / nrm(&bc),
        nrm(&kc) / nrm(&bc) / sigma80
    );

    // The gram null vectors should be stiffness-null too.
    let gram_null = plates_core::assembly::gram_null_basis(&k, &sys.basis);
    for (i, z) in gram_null.iter().enumerate() {
        let mut kz = vec![0.0; n];
        sys.stiffness.matvec(z, &mut kz);
        println!("null {i}: |Kz|/(|K| |z|) = {:.3e}", nrm(&kz) / (kmax * nrm(z)));
    }

    // Rough roundoff floor of a K matvec: eps * || |K| |c| ||.
    let mut abs_floor = 0.0f64;
    for i in 0..n {
        let (cols, vals) = sys.stiffness.row(i);
        let mut acc = 0.0;
        for (j, v) in cols.iter().zip(vals) {
            acc += v.abs() * c[*j as usize].abs();
        }
        abs_floor += acc * acc;
    }
    let floor = 2.2e-16 * abs_floor.sqrt();
    println!(
        "matvec floor {:.3e}, floor/|Bc| {:.3e}, /(sigma80 |Bc|) {:.3e}",
        floor,
        floor / nrm(&bc),
        floor / nrm(&bc) / sigma80
    );
}

#[test]
#[ignore]
fn probe_dense_pencil_spectrum() {
    let k = SimplicialComplex3::slab([0.02, 0.005, 0.02], [0.01, 0.005, 0.01])
        .unwrap()
        .barycentric_subdivide();
    let cache = GeomCache::new(&k);
    let mat = material::spruce_engelmann();
    let sys = assemble_system(&k, &cache, &mat, LambdaPreset::MeanL);
    let rho = 435.0;
    let n = sys.basis.dim();
    let kd = sys.stiffness.to_dense();
    let bd = sys.gram.to_dense() * rho;

    let be = nalgebra::SymmetricEigen::new(bd.clone());
    let bmax = be.eigenvalues.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let keep: Vec<usize> = (0..n).filter(|&i| be.eigenvalues[i] > 1e-10 * bmax).collect();
    let null: Vec<usize> = (0..n).filter(|&i| be.eigenvalues[i] <= 1e-10 * bmax).collect();
    println!("dim {n}, B-null count {}, bmax {bmax:.3e}", null.len());
    let q = nalgebra::DMatrix::from_fn(n, keep.len(), |r, c| be.eigenvectors[(r, keep[c])]);
    let z = nalgebra::DMatrix::from_fn(n, null.len(), |r, c| be.eigenvectors[(r, null[c])]);
    let br = q.transpose() * &bd * &q;
    let kqq = q.transpose() * &kd * &q;
    let kqz = q.transpose() * &kd * &z;
    let kzz = z.transpose() * &kd * &z;
    println!("kzz diag {:?}", (0..null.len()).map(|i| kzz[(i, i)]).collect::<Vec<_>>());
    let kzz_inv = kzz.clone().try_inverse().expect("kzz nonsingular");
    let ks = &kqq - &kqz * kzz_inv * kqz.transpose();
    let chol = nalgebra::Cholesky::new(br).expect("restricted gram SPD");
    let l = chol.l();
    let m1 = l.solve_lower_triangular(&ks).expect("tri solve");
    let m2 = l.solve_lower_triangular(&m1.transpose()).expect("tri solve");
    let s = (&m2 + &m2.transpose()) * 0.5;
    let se = nalgebra::SymmetricEigen::new(s);
    let mut mus: Vec<f64> = se.eigenvalues.iter().copied().collect();
    mus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("mu range [{:.6e}, {:.6e}]", mus[0], mus[mus.len() - 1]);
    let sigma = -(2.0 * std::f64::consts::PI * 80.0).powi(2);
    let mut near = mus.clone();
    near.sort_by(|a, b| (a - sigma).abs().partial_cmp(&(b - sigma).abs()).unwrap());
    println!("sigma {sigma:.6e}");
    println!("12 closest mus: {:?}", &near[..12]);
    let negcount = mus.iter().filter(|&&m| m < 0.0).count();
    println!("negative mus {negcount} of {}", mus.len());

    // Residual floor for the eigenvector of the closest mu, in the
    // original basis.
    let idx = (0..se.eigenvalues.len())
        .min_by(|&a, &b| {
            (se.eigenvalues[a] - sigma)
                .abs()
                .partial_cmp(&(se.eigenvalues[b] - sigma).abs())
                .unwrap()
        })
        .unwrap();
    let mu1 = se.eigenvalues[idx];
    let y = se.eigenvectors.column(idx);
    // back-transform: w = L^{-T} y; c_q = Q w; c_z = -Kzz^{-1} Kzq c_q
    let w = l.transpose().solve_upper_triangular(&y.clone_owned()).expect("tri");
    let cq = &q * &w;
    let kzz_inv2 = kzz.clone().try_inverse().unwrap();
    let cz_coeff = -(kzz_inv2 * kqz.transpose() * &w);
    let c_full = &cq + &z * cz_coeff;
    // normalize in B
    let bnorm = (c_full.transpose() * &bd * &c_full)[(0, 0)].sqrt();
    let c0: Vec<f64> = c_full.iter().map(|x| x / bnorm).collect();
    let mut kc = vec![0.0; n];
    let mut bc = vec![0.0; n];
    sys.stiffness.matvec(&c0, &mut kc);
    sys.gram.matvec(&c0, &mut bc);
    for v in bc.iter_mut() {
        *v *= rho;
    }
    let nrm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut r2 = 0.0;
    for i in 0..n {
        let r = kc[i] - mu1 * bc[i];
        r2 += r * r;
    }
    let res_raw = r2.sqrt() / nrm(&bc);
    println!(
        "closest mu {mu1:.6e}: raw residual {res_raw:.3e}, / max(|mu|,|sigma|) = {:.3e}",
        res_raw / mu1.abs().max(sigma.abs())
    );
    // epsilon floor of the K matvec for this vector
    let mut abs2 = 0.0;
    for i in 0..n {
        let (cols, vals) = sys.stiffness.row(i);
        let mut acc = 0.0;
        for (j, v) in cols.iter().zip(vals) {
            acc += v.abs() * c0[*j as usize].abs();
        }
        abs2 += acc * acc;
    }
    let floor = 2.2e-16 * abs2.sqrt();
    println!(
        "eps floor {floor:.3e} -> /|Bc| {:.3e} -> scaled {:.3e}",
        floor / nrm(&bc),
        floor / nrm(&bc) / mu1.abs().max(sigma.abs())
    );
}

fn dense_finite_mus(stiff: &plates_core::sparse::Csr, gram: &plates_core::sparse::Csr, rho: f64) -> Vec<f64> {
    let n = gram.n;
    let kd = stiff.to_dense();
    let bd = gram.to_dense() * rho;
    let be = nalgebra::SymmetricEigen::new(bd.clone());
    let bmax = be.eigenvalues.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let keep: Vec<usize> = (0..n).filter(|&i| be.eigenvalues[i] > 1e-10 * bmax).collect();
    let null: Vec<usize> = (0..n).filter(|&i| be.eigenvalues[i] <= 1e-10 * bmax).collect();
    let q = nalgebra::DMatrix::from_fn(n, keep.len(), |r, c| be.eigenvectors[(r, keep[c])]);
    let br = q.transpose() * &bd * &q;
    let kqq = q.transpose() * &kd * &q;
    let ks = if null.is_empty() {
        kqq
    } else {
        let z = nalgebra::DMatrix::from_fn(n, null.len(), |r, c| be.eigenvectors[(r, null[c])]);
        let kqz = q.transpose() * &kd * &z;
        let kzz = z.transpose() * &kd * &z;
        let kzz_inv = kzz.try_inverse().expect("kzz nonsingular");
        &kqq - &kqz * kzz_inv * kqz.transpose()
    };
    let chol = nalgebra::Cholesky::new(br).expect("restricted gram SPD");
    let l = chol.l();
    let m1 = l.solve_lower_triangular(&ks).expect("tri solve");
    let m2 = l.solve_lower_triangular(&m1.transpose()).expect("tri solve");
    let s = (&m2 + &m2.transpose()) * 0.5;
    let se = nalgebra::SymmetricEigen::new(s);
    let mut mus: Vec<f64> = se.eigenvalues.iter().copied().collect();
    mus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    mus
}

fn spectrum_report(label: &str, mus: &[f64]) {
    println!("== {label}: {} finite mus, range [{:.4e}, {:.4e}]", mus.len(), mus[0], mus[mus.len() - 1]);
    for f in [2.0e3, 5.0e3, 1.0e4, 2.0e4, 4.0e4] {
        let sigma = -(2.0 * std::f64::consts::PI * f).powi(2);
        let mut near = mus.to_vec();
        near.sort_by(|a, b| (a - sigma).abs().partial_cmp(&(b - sigma).abs()).unwrap());
        let d6 = (near[5] - sigma).abs();
        let d7 = (near[6] - sigma).abs();
        println!(
            "  f {f:.0}: sigma {sigma:.4e}; 8 closest {:?}; cut gap d7-d6 {:.3e} (rel {:.3e})",
            &near[..8].iter().map(|m| format!("{m:.6e}")).collect::<Vec<_>>(),
            d7 - d6,
            (d7 - d6) / sigma.abs()
        );
    }
}

#[test]
#[ignore]
fn probe_reduced_slab_spectra() {
    let rho = 435.0;
    let mat = material::spruce_engelmann();

    let k4 = SimplicialComplex3::slab([0.02, 0.005, 0.04], [0.01, 0.005, 0.01])
        .unwrap()
        .barycentric_subdivide();
    let cache4 = GeomCache::new(&k4);
    let sys4 = assemble_system(&k4, &cache4, &mat, LambdaPreset::MeanL);
    println!("2x1x4 coarse dim {}", sys4.basis.dim());
    let mus = dense_finite_mus(&sys4.stiffness, &sys4.gram, rho);
    spectrum_report("2x1x4 coarse MeanL", &mus);

    let red = boundary_condition_system(&k4, &cache4, &mat).unwrap();
    let (gram_f, stiff_f) = assemble_fine(&sys4, &red).unwrap();
    println!("2x1x4 fine dim {}", gram_f.n);
    let mus_f = dense_finite_mus(&stiff_f, &gram_f, rho);
    spectrum_report("2x1x4 fine MeanL", &mus_f);

    let k2 = SimplicialComplex3::slab([0.02, 0.005, 0.02], [0.01, 0.005, 0.01])
        .unwrap()
        .barycentric_subdivide();
    let cache2 = GeomCache::new(&k2);
    let sys2 = assemble_system(&k2, &cache2, &mat, LambdaPreset::One);
    println!("2x1x2 coarse dim {}", sys2.basis.dim());
    let mus2 = dense_finite_mus(&sys2.stiffness, &sys2.gram, rho);
    spectrum_report("2x1x2 coarse One", &mus2);
}
