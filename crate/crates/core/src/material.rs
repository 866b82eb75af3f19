//! Orthotropic elastic moduli: engineering constants in, stiffness out.
//!
//! The moduli tensor `W^{ijkl}` is stored as a symmetric 6×6 matrix over
//! the index pairs `11, 22, 33, 23, 31, 12` (axes `1,2,3 = r,θ,z`).  A
//! four-index component is looked up directly: `W^{iαjβ} = sym6[v(iα)][v(jβ)]`
//! with `v` the pair-to-slot map; strain-like objects contract against it
//! through [`voigt_strain`], which folds the two off-diagonal occurrences
//! of each pair into one slot.
//!
//! Construction goes through the compliance matrix: normal block from the
//! Young moduli and Poisson ratios, shear diagonal from the shear moduli.
//! Measured Poisson ratios rarely satisfy the reciprocity relations
//! exactly, so the off-diagonal compliance entries are repaired by
//! averaging the two measured values of each symmetric pair before the
//! block is inverted.

use nalgebra::{Matrix3, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("compliance normal block is singular or not positive definite: {0}")]
    SingularCompliance(String),
    #[error("moduli must be positive: {0}")]
    NonPositiveModulus(String),
    #[error("{path}:{line}: parse error: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("unknown material key {0:?}")]
    UnknownKey(String),
    #[error("material file missing key {0:?}")]
    MissingKey(&'static str),
    #[error("unknown built-in material {0:?}; available: spruce-engelmann")]
    UnknownBuiltin(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Voigt slot of an (unordered) index pair, axes 0-based.
#[inline]
pub fn voigt(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (1, 2) => 3,
        (0, 2) => 4,
        (0, 1) => 5,
        _ => unreachable!("axis out of range"),
    }
}

/// Contracts a displacement gradient `G[component][derivative]` into the
/// six-slot strain vector `(G₁₁, G₂₂, G₃₃, G₃₂+G₂₃, G₁₃+G₃₁, G₂₁+G₁₂)`,
/// so that `ĝ(∇u)ᵀ · sym6 · ĝ(∇v)` equals the four-index contraction
/// `⟨∂_i u^α, W^{αβ}_{ij} ∂_j v^β⟩` and `sym6 · ĝ(∇u)` is the stress.
#[inline]
pub fn voigt_strain(g: &[[f64; 3]; 3]) -> [f64; 6] {
    [
        g[0][0],
        g[1][1],
        g[2][2],
        g[2][1] + g[1][2],
        g[0][2] + g[2][0],
        g[1][0] + g[0][1],
    ]
}

/// `ĝ(ga)ᵀ · v6 · ĝ(gb)`: the elastic energy pairing of two gradients.
pub fn energy_pair(v6: &[[f64; 6]; 6], ga: &[[f64; 3]; 3], gb: &[[f64; 3]; 3]) -> f64 {
    let a = voigt_strain(ga);
    let b = voigt_strain(gb);
    let mut acc = 0.0;
    for i in 0..6 {
        let mut row = 0.0;
        for j in 0..6 {
            row += v6[i][j] * b[j];
        }
        acc += a[i] * row;
    }
    acc
}

/// Stress tensor `σ(∇u) = W : ∇u` as a symmetric 3×3 matrix.
pub fn stress(v6: &[[f64; 6]; 6], g: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let e = voigt_strain(g);
    let mut s = [0.0f64; 6];
    for i in 0..6 {
        for j in 0..6 {
            s[i] += v6[i][j] * e[j];
        }
    }
    [
        [s[0], s[5], s[4]],
        [s[5], s[1], s[3]],
        [s[4], s[3], s[2]],
    ]
}

/// The boundary contraction `W'(1)`: `W'(1)^i_α = Σ_j W^{iαjj}`.  For an
/// orthotropic tensor this is diagonal with the row sums of the normal
/// block on the diagonal.
pub fn boundary_contraction(v6: &[[f64; 6]; 6]) -> [[f64; 3]; 3] {
    let mut w = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for a in 0..3 {
            let row = voigt(i, a);
            for j in 0..3 {
                w[i][a] += v6[row][voigt(j, j)];
            }
        }
    }
    w
}

/// How the λ_L constant multiplying the div·div penalty is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaPreset {
    /// λ_L = 1.
    #[default]
    One,
    /// λ_L = mean(l₁, l₂, l₃).
    MeanL,
}

/// An orthotropic elastic material, ready for assembly.
#[derive(Debug, Clone)]
pub struct ElasticTensor {
    /// Moduli in the six-slot ordering `11, 22, 33, 23, 31, 12`, Pa.
    pub sym6: [[f64; 6]; 6],
    /// Compliance (the inverse relation), same ordering, 1/Pa.
    pub compliance: [[f64; 6]; 6],
    /// Mass density, kg/m³.
    pub density: f64,
    /// Mean second-order coefficients (l₁, l₂, l₃) of the component-wise
    /// elliptic operators, Pa.  See [`weighted_divergence_constants`].
    pub l_constants: [f64; 3],
    /// Identifier recorded in output metadata.
    pub name: String,
}

impl ElasticTensor {
    /// λ_L value for a preset.
    pub fn lambda_value(&self, preset: LambdaPreset) -> f64 {
        match preset {
            LambdaPreset::One => 1.0,
            LambdaPreset::MeanL => {
                (self.l_constants[0] + self.l_constants[1] + self.l_constants[2]) / 3.0
            }
        }
    }

    /// The 3×3 normal block of the moduli.
    pub fn normal_block(&self) -> [[f64; 3]; 3] {
        let mut b = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i][j] = self.sym6[i][j];
            }
        }
        b
    }

    /// The shear diagonal `(W_{23,23}, W_{31,31}, W_{12,12})`.
    pub fn shear_diagonal(&self) -> [f64; 3] {
        [self.sym6[3][3], self.sym6[4][4], self.sym6[5][5]]
    }
}

/// Engineering constants of an orthotropic material.  Axes `(1,2,3) = (r,θ,z)`.
/// `mu_ij` couples a stress along `i` to the strain response along `j`.
#[derive(Debug, Clone, Copy)]
pub struct Engineering {
    pub e_r: f64,
    pub e_theta: f64,
    pub e_z: f64,
    pub g_thetaz: f64,
    pub g_rz: f64,
    pub g_rtheta: f64,
    pub mu_rtheta: f64,
    pub mu_rz: f64,
    pub mu_thetar: f64,
    pub mu_thetaz: f64,
    pub mu_zr: f64,
    pub mu_ztheta: f64,
    pub density: f64,
}

/// Builds the moduli tensor from engineering constants.
///
/// The compliance normal block has rows
/// `(1/e_r, −μ_θr/e_θ, −μ_zr/e_z)`, `(−μ_rθ/e_r, 1/e_θ, −μ_zθ/e_z)`,
/// `(−μ_rz/e_r, −μ_θz/e_θ, 1/e_z)`; each off-diagonal pair is replaced by
/// its arithmetic mean (the reciprocity repair), the block is inverted,
/// and the shear moduli pass through unchanged.
pub fn tensor_from_engineering(eng: &Engineering, name: &str) -> Result<ElasticTensor, MaterialError> {
    for (v, n) in [
        (eng.e_r, "e_r"),
        (eng.e_theta, "e_theta"),
        (eng.e_z, "e_z"),
        (eng.g_thetaz, "g_thetaz"),
        (eng.g_rz, "g_rz"),
        (eng.g_rtheta, "g_rtheta"),
        (eng.density, "density"),
    ] {
        if !(v > 0.0) {
            return Err(MaterialError::NonPositiveModulus(format!("{n} = {v}")));
        }
    }

    let mut u = [[0.0f64; 3]; 3];
    u[0][0] = 1.0 / eng.e_r;
    u[1][1] = 1.0 / eng.e_theta;
    u[2][2] = 1.0 / eng.e_z;
    u[0][1] = -eng.mu_thetar / eng.e_theta;
    u[1][0] = -eng.mu_rtheta / eng.e_r;
    u[0][2] = -eng.mu_zr / eng.e_z;
    u[2][0] = -eng.mu_rz / eng.e_r;
    u[1][2] = -eng.mu_ztheta / eng.e_z;
    u[2][1] = -eng.mu_thetaz / eng.e_theta;
    // Reciprocity repair: average the two measurements of each pair.
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let m = 0.5 * (u[i][j] + u[j][i]);
        u[i][j] = m;
        u[j][i] = m;
    }

    let un = Matrix3::from_fn(|i, j| u[i][j]);
    let wn = un
        .try_inverse()
        .ok_or_else(|| MaterialError::SingularCompliance("normal 3×3 block".into()))?;
    // The inverse of a symmetric matrix is symmetric; enforce it exactly.
    let wn = 0.5 * (wn + wn.transpose());

    let mut sym6 = [[0.0f64; 6]; 6];
    let mut compliance = [[0.0f64; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            sym6[i][j] = wn[(i, j)];
            compliance[i][j] = u[i][j];
        }
    }
    for (slot, g) in [(3, eng.g_thetaz), (4, eng.g_rz), (5, eng.g_rtheta)] {
        sym6[slot][slot] = g;
        compliance[slot][slot] = 1.0 / g;
    }

    let l_constants = weighted_divergence_constants(&sym6);
    Ok(ElasticTensor {
        sym6,
        compliance,
        density: eng.density,
        l_constants,
        name: name.to_string(),
    })
}

/// Mean second-order coefficients of the three component-wise operators
///
/// ```text
/// L₁ = W₁₁∂₁² + (2W₆₆+W₁₂)∂₂² + (2W₅₅+W₁₃)∂₃²
/// L₂ = (2W₆₆+W₁₂)∂₁² + W₂₂∂₂² + (2W₄₄+W₂₃)∂₃²
/// L₃ = (2W₅₅+W₁₃)∂₁² + (2W₄₄+W₂₃)∂₂² + W₃₃∂₃²
/// ```
///
/// `lᵢ` is the plain arithmetic mean of the three coefficients of `Lᵢ`.
/// These weight the divergence surrogate for the mean-pressure term.
pub fn weighted_divergence_constants(v6: &[[f64; 6]; 6]) -> [f64; 3] {
    let c12 = 2.0 * v6[5][5] + v6[0][1];
    let c13 = 2.0 * v6[4][4] + v6[0][2];
    let c23 = 2.0 * v6[3][3] + v6[1][2];
    [
        (v6[0][0] + c12 + c13) / 3.0,
        (c12 + v6[1][1] + c23) / 3.0,
        (c13 + c23 + v6[2][2]) / 3.0,
    ]
}

/// Eigenvalues of the normal block followed by the shear diagonal, each
/// sorted ascending.  All six must be positive for a coercive stored
/// energy.
pub fn coercivity_spectrum(t: &ElasticTensor) -> ([f64; 3], [f64; 3]) {
    let nb = t.normal_block();
    let m = Matrix3::from_fn(|i, j| nb[i][j]);
    let eig = SymmetricEigen::new(m);
    let mut normal = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    normal.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut shear = t.shear_diagonal();
    shear.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (normal, shear)
}

/// Engelmann spruce, the material of all built-in experiments.
/// Moduli are ratios of `e_z = 9790 MPa`; density 360 kg/m³.
pub fn spruce_engelmann() -> ElasticTensor {
    let e_z = 9.790e9;
    let eng = Engineering {
        e_r: 0.128 * e_z,
        e_theta: 0.059 * e_z,
        e_z,
        g_thetaz: 0.120 * e_z,
        g_rz: 0.124 * e_z,
        g_rtheta: 0.010 * e_z,
        mu_rtheta: 0.530,
        mu_rz: 0.083,
        mu_thetar: 0.255,
        mu_thetaz: 0.058,
        mu_zr: 0.422,
        mu_ztheta: 0.462,
        density: 360.0,
    };
    tensor_from_engineering(&eng, "spruce-engelmann").expect("built-in spruce constants are valid")
}

/// Isotropic-like diagonal material for tests: all Poisson ratios zero.
pub fn isotropic(e: f64, g: f64, density: f64) -> ElasticTensor {
    let eng = Engineering {
        e_r: e,
        e_theta: e,
        e_z: e,
        g_thetaz: g,
        g_rz: g,
        g_rtheta: g,
        mu_rtheta: 0.0,
        mu_rz: 0.0,
        mu_thetar: 0.0,
        mu_thetaz: 0.0,
        mu_zr: 0.0,
        mu_ztheta: 0.0,
        density,
    };
    tensor_from_engineering(&eng, "isotropic").expect("diagonal compliance is invertible")
}

/// Resolves a built-in material by CLI name.
pub fn builtin(name: &str) -> Result<ElasticTensor, MaterialError> {
    match name {
        "spruce-engelmann" => Ok(spruce_engelmann()),
        other => Err(MaterialError::UnknownBuiltin(other.to_string())),
    }
}

/// Parses a material definition file: `key = value` lines, `#` comments.
/// Keys are the fields of [`Engineering`] (moduli in Pa, density kg/m³).
pub fn load_material_file(path: &std::path::Path) -> Result<ElasticTensor, MaterialError> {
    let text = std::fs::read_to_string(path)?;
    let pstr = path.display().to_string();
    let mut vals: std::collections::BTreeMap<&str, f64> = std::collections::BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, val) = line.split_once('=').ok_or_else(|| MaterialError::Parse {
            path: pstr.clone(),
            line: ln + 1,
            msg: format!("expected key = value, got {raw:?}"),
        })?;
        let key = key.trim();
        let val: f64 = val.trim().parse().map_err(|_| MaterialError::Parse {
            path: pstr.clone(),
            line: ln + 1,
            msg: format!("bad number {:?}", val.trim()),
        })?;
        let canonical = match key {
            "e_r" => "e_r",
            "e_theta" => "e_theta",
            "e_z" => "e_z",
            "g_thetaz" => "g_thetaz",
            "g_rz" => "g_rz",
            "g_rtheta" => "g_rtheta",
            "mu_rtheta" => "mu_rtheta",
            "mu_rz" => "mu_rz",
            "mu_thetar" => "mu_thetar",
            "mu_thetaz" => "mu_thetaz",
            "mu_zr" => "mu_zr",
            "mu_ztheta" => "mu_ztheta",
            "density" => "density",
            other => return Err(MaterialError::UnknownKey(other.to_string())),
        };
        vals.insert(canonical, val);
    }
    let get = |k: &'static str| vals.get(k).copied().ok_or(MaterialError::MissingKey(k));
    let eng = Engineering {
        e_r: get("e_r")?,
        e_theta: get("e_theta")?,
        e_z: get("e_z")?,
        g_thetaz: get("g_thetaz")?,
        g_rz: get("g_rz")?,
        g_rtheta: get("g_rtheta")?,
        mu_rtheta: get("mu_rtheta")?,
        mu_rz: get("mu_rz")?,
        mu_thetar: get("mu_thetar")?,
        mu_thetaz: get("mu_thetaz")?,
        mu_zr: get("mu_zr")?,
        mu_ztheta: get("mu_ztheta")?,
        density: get("density")?,
    };
    tensor_from_engineering(&eng, &format!("file:{pstr}"))
}

/// Fingerprint of a material for provenance headers.
pub fn material_hash(t: &ElasticTensor) -> u64 {
    let mut h = crate::hash::Fnv1a::new();
    h.update(t.name.as_bytes());
    for row in &t.sym6 {
        for &v in row {
            h.update_f64(v);
        }
    }
    h.update_f64(t.density);
    h.finish()
}
