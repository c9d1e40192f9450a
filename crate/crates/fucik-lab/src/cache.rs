//! On-disk cache for assembled Galerkin matrices.
//!
//! Files are keyed by a hash of `(domain, kernel, N)` and live at
//! `<out>/cache/<hash>.bin`. The binary layout is a small header
//! `{n_dofs: u64, s: f64, lambda: f64, domain_hash: u64}` followed by the
//! stiffness matrix `A` and the consistent mass `M` in row-major order and
//! the lumped mass diagonal `M_L`, all as little-endian 64-bit floats.
//! Loads verify the header against the requested mesh/kernel; any mismatch,
//! truncation, or non-finite entry makes the load miss so the caller
//! recomputes.

use std::fs;
use std::io::{Read as _, Write as _};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::assembly::GalerkinPair;
use crate::geometry::Mesh;
use crate::kernel::Kernel;
use crate::real::{lit, Real};

/// FNV-1a 64-bit hash.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn domain_hash<T: Real>(mesh: &Mesh<T>) -> u64 {
    fnv1a(&mesh.domain().canonical_bytes())
}

/// Cache key for a `(domain, kernel, N)` triple.
pub fn cache_key<T: Real>(mesh: &Mesh<T>, kernel: &Kernel<T>) -> u64 {
    let mut bytes = mesh.domain().canonical_bytes();
    bytes.extend_from_slice(&kernel.canonical_bytes());
    bytes.extend_from_slice(&(mesh.n_dofs() as u64).to_le_bytes());
    bytes.extend_from_slice(&(mesh.nodes().len() as u64).to_le_bytes());
    fnv1a(&bytes)
}

/// Path of the cache file for this assembly under `out_dir`.
pub fn cache_path<T: Real>(out_dir: &Path, mesh: &Mesh<T>, kernel: &Kernel<T>) -> PathBuf {
    out_dir
        .join("cache")
        .join(format!("{:016x}.bin", cache_key(mesh, kernel)))
}

/// Serialize an assembled pair to `path` (parent directories are created).
pub fn store<T: Real>(path: &Path, gp: &GalerkinPair<T>) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let n = gp.n_dofs();
    let mut buf: Vec<u8> = Vec::with_capacity(32 + 8 * (2 * n * n + n));
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&gp.kernel().s().to_f64().unwrap().to_le_bytes());
    buf.extend_from_slice(&gp.kernel().lambda().to_f64().unwrap().to_le_bytes());
    buf.extend_from_slice(&domain_hash(gp.mesh()).to_le_bytes());
    let push_mat = |m: &DMatrix<T>, buf: &mut Vec<u8>| {
        for i in 0..n {
            for j in 0..n {
                buf.extend_from_slice(&m[(i, j)].to_f64().unwrap().to_le_bytes());
            }
        }
    };
    push_mat(gp.a(), &mut buf);
    push_mat(gp.m(), &mut buf);
    for i in 0..n {
        buf.extend_from_slice(&gp.m_lumped()[i].to_f64().unwrap().to_le_bytes());
    }
    let tmp = path.with_extension("bin.tmp");
    let mut file = fs::File::create(&tmp)?;
    file.write_all(&buf)?;
    file.sync_all()?;
    fs::rename(&tmp, path)
}

/// Try to load an assembly for `(mesh, kernel)` from `path`. Returns `None`
/// on any mismatch or corruption; the reason is logged at warn level.
pub fn load<T: Real>(path: &Path, mesh: &Mesh<T>, kernel: &Kernel<T>) -> Option<GalerkinPair<T>> {
    let mut file = fs::File::open(path).ok()?;
    let mut buf = Vec::new();
    if file.read_to_end(&mut buf).is_err() {
        log::warn!("cache {}: unreadable, recomputing", path.display());
        return None;
    }
    let n = mesh.n_dofs();
    let expected = 32 + 8 * (2 * n * n + n);
    if buf.len() != expected {
        log::warn!(
            "cache {}: size {} != expected {}, recomputing",
            path.display(),
            buf.len(),
            expected
        );
        return None;
    }
    let u64_at = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    let header_ok = u64_at(0) == n as u64
        && f64_at(8) == kernel.s().to_f64().unwrap()
        && f64_at(16) == kernel.lambda().to_f64().unwrap()
        && u64_at(24) == domain_hash(mesh);
    if !header_ok {
        log::warn!("cache {}: header mismatch, recomputing", path.display());
        return None;
    }
    let mut off = 32usize;
    let read_mat = |off: &mut usize| -> Option<DMatrix<T>> {
        let mut m = DMatrix::<T>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let v = f64_at(*off);
                *off += 8;
                if !v.is_finite() {
                    return None;
                }
                m[(i, j)] = lit(v);
            }
        }
        Some(m)
    };
    let a = read_mat(&mut off)?;
    let m = read_mat(&mut off)?;
    let mut ml = DVector::<T>::zeros(n);
    for i in 0..n {
        let v = f64_at(off);
        off += 8;
        if !(v.is_finite() && v > 0.0) {
            log::warn!("cache {}: invalid lumped mass, recomputing", path.display());
            return None;
        }
        ml[i] = lit(v);
    }
    match GalerkinPair::from_parts(a, m, ml, mesh.clone(), kernel.clone()) {
        Ok(gp) => Some(gp),
        Err(err) => {
            log::warn!("cache {}: rejected ({err}), recomputing", path.display());
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::geometry::Domain;
    use crate::kernel::KernelVariant;

    fn setup(n: usize) -> (Mesh<f64>, Kernel<f64>, GalerkinPair<f64>) {
        let domain = Domain::interval(-1.0, 1.0).unwrap();
        let mesh = Mesh::uniform(domain, n).unwrap();
        let kernel = Kernel::new(0.25, 1.0, KernelVariant::Fractional).unwrap();
        let gp = assemble(&mesh, &kernel).unwrap();
        (mesh, kernel, gp)
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (mesh, kernel, gp) = setup(16);
        let path = cache_path(dir.path(), &mesh, &kernel);
        store(&path, &gp).unwrap();
        let back = load(&path, &mesh, &kernel).expect("cache hit");
        assert_eq!(gp.a(), back.a());
        assert_eq!(gp.m(), back.m());
        assert_eq!(gp.m_lumped(), back.m_lumped());
    }

    #[test]
    fn mismatched_or_corrupted_files_miss() {
        let dir = tempfile::tempdir().unwrap();
        let (mesh, kernel, gp) = setup(16);
        let path = cache_path(dir.path(), &mesh, &kernel);
        store(&path, &gp).unwrap();

        // Different kernel: key differs, and a forced load against the
        // wrong kernel is rejected by the header.
        let other = Kernel::new(0.3, 1.0, KernelVariant::Fractional).unwrap();
        assert_ne!(path, cache_path(dir.path(), &mesh, &other));
        assert!(load(&path, &mesh, &other).is_none());

        // Truncation.
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(load(&path, &mesh, &kernel).is_none());

        // Non-finite payload.
        let mut bytes2 = bytes.clone();
        bytes2[40..48].copy_from_slice(&f64::NAN.to_le_bytes());
        fs::write(&path, &bytes2).unwrap();
        assert!(load(&path, &mesh, &kernel).is_none());

        // Garbage header.
        let mut bytes3 = bytes;
        bytes3[0] ^= 0xff;
        fs::write(&path, &bytes3).unwrap();
        assert!(load(&path, &mesh, &kernel).is_none());
    }
}
