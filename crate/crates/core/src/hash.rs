//! FNV-1a fingerprints for provenance headers.
//!
//! Output files record short hashes of the run configuration, the mesh and
//! the material so a stray CSV can be traced back to the exact inputs that
//! produced it.  FNV-1a is not cryptographic, but it is stable, trivially
//! portable, and adequate for provenance.

use crate::mesh::SimplicialComplex3;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// 64-bit FNV-1a of a byte string.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Incremental FNV-1a accumulator.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Self(FNV_OFFSET)
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn update_f64(&mut self, x: f64) {
        self.update(&x.to_le_bytes());
    }

    pub fn update_usize(&mut self, x: usize) {
        self.update(&(x as u64).to_le_bytes());
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

/// Fingerprint of a mesh: vertex bit patterns and tet indices.
pub fn mesh_hash(k: &SimplicialComplex3) -> u64 {
    let mut h = Fnv1a::new();
    h.update(b"plates-mesh v1");
    h.update_usize(k.verts.len());
    for p in &k.verts {
        for &c in p {
            h.update_f64(c);
        }
    }
    h.update_usize(k.tets.len());
    for t in &k.tets {
        for &v in t {
            h.update_usize(v);
        }
    }
    h.finish()
}
