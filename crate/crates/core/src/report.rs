//! Artifact emission: CSV tables, JSON report records, the binary grid
//! dump, and run manifests with reproducible content hashes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::geometry::DomainGeometry;
use crate::grid::GridFunction;
use crate::pohozaev::PohozaevReport;
use crate::traces::{BoundaryTrace, SingularFit};
use crate::{Error, Result};

/// FNV-1a 64-bit content hash (hex). Not cryptographic; used to confirm
/// byte-identical artifacts across reruns.
pub fn fnv1a64(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(fnv1a64(&fs::read(path)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Run provenance: config echo, input/artifact hashes, timings.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: String,
    pub seed: u64,
    pub inputs: Vec<ManifestEntry>,
    pub stages: Vec<StageTiming>,
    pub artifacts: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn new(config_echo: String, seed: u64) -> Self {
        Self {
            tool: "stablepoh".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config_echo,
            seed,
            inputs: Vec::new(),
            stages: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(ManifestEntry {
            path: path.display().to_string(),
            hash: hash_file(path)?,
        });
        Ok(())
    }

    pub fn add_stage(&mut self, stage: &str, seconds: f64) {
        self.stages.push(StageTiming { stage: stage.into(), seconds });
    }

    pub fn add_artifact(&mut self, path: &Path) -> Result<()> {
        self.artifacts.push(ManifestEntry {
            path: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            hash: hash_file(path)?,
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
        fs::write(&path, json)?;
        Ok(path)
    }

    /// Re-hash every listed artifact under `dir` and compare.
    pub fn check(dir: &Path) -> Result<Vec<(String, bool)>> {
        let text = fs::read_to_string(dir.join("manifest.json"))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("manifest parse: {e}")))?;
        let mut results = Vec::new();
        for entry in value["artifacts"].as_array().into_iter().flatten() {
            let name = entry["path"].as_str().unwrap_or_default().to_string();
            let expected = entry["hash"].as_str().unwrap_or_default();
            let ok = hash_file(&dir.join(&name)).map(|h| h == expected).unwrap_or(false);
            results.push((name, ok));
        }
        Ok(results)
    }
}

// ---------------------------------------------------------------------------
// CSV and table writers
// ---------------------------------------------------------------------------

/// Write rows of floats as CSV with a header line. Values use the shortest
/// round-trip formatting, which is byte-stable across runs.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_reports_json(path: &Path, reports: &[PohozaevReport]) -> Result<()> {
    let json = serde_json::to_string_pretty(reports)
        .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

/// Human-readable defect table.
pub fn render_report_table(reports: &[PohozaevReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<34} {:>14} {:>14} {:>11} {:>10} {:>9}",
        "identity", "lhs", "rhs", "abs defect", "rel defect", "h"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<34} {:>14.6e} {:>14.6e} {:>11.3e} {:>10.4} {:>9.5}",
            r.identity, r.lhs, r.rhs, r.abs_defect, r.rel_defect, r.h
        );
    }
    out
}

pub fn trace_rows(domain: &DomainGeometry, trace: &BoundaryTrace) -> Vec<Vec<f64>> {
    domain
        .boundary_nodes()
        .iter()
        .zip(trace.nodes.iter())
        .enumerate()
        .map(|(i, (bn, tn))| {
            vec![
                i as f64,
                bn.point[0],
                bn.point[1],
                bn.normal[0],
                bn.normal[1],
                tn.q0,
                tn.residual,
            ]
        })
        .collect()
}

pub fn fit_rows(fits: &[SingularFit]) -> Vec<Vec<f64>> {
    fits.iter()
        .map(|f| {
            vec![
                f.boundary_point[0],
                f.boundary_point[1],
                f.c_log,
                f.c_jump,
                f.smooth,
                f.residual,
            ]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// binary grid dump
// ---------------------------------------------------------------------------

const GRID_MAGIC: &[u8; 4] = b"SPGD";
const GRID_VERSION: u32 = 1;

/// Binary dump layout (little endian): magic `SPGD`, u32 version, u32 dim,
/// u64 nx, u64 ny, f64 h, f64 lo_x, f64 lo_y, then nx·ny f64 values in
/// row-major order (x fastest).
pub fn write_grid_dump(path: &Path, u: &GridFunction) -> Result<()> {
    let grid = u.grid();
    let mut f = fs::File::create(path)?;
    f.write_all(GRID_MAGIC)?;
    f.write_all(&GRID_VERSION.to_le_bytes())?;
    f.write_all(&(grid.dim as u32).to_le_bytes())?;
    f.write_all(&(grid.nodes[0] as u64).to_le_bytes())?;
    f.write_all(&(grid.nodes[1] as u64).to_le_bytes())?;
    f.write_all(&grid.h.to_le_bytes())?;
    f.write_all(&grid.lo[0].to_le_bytes())?;
    f.write_all(&grid.lo[1].to_le_bytes())?;
    for v in u.values() {
        f.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Parse a grid dump back into `(dim, nodes, h, lo, values)`.
pub fn read_grid_dump(path: &Path) -> Result<(usize, [usize; 2], f64, [f64; 2], Vec<f64>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 48 || &bytes[0..4] != GRID_MAGIC {
        return Err(Error::Validation("not a grid dump".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != GRID_VERSION {
        return Err(Error::Validation("unsupported grid dump version".into()));
    }
    let dim = u32_at(8) as usize;
    let nodes = [u64_at(12) as usize, u64_at(20) as usize];
    let h = f64_at(28);
    let lo = [f64_at(36), f64_at(44)];
    let n = nodes[0] * nodes[1];
    if bytes.len() != 52 + 8 * n {
        return Err(Error::Validation("grid dump length mismatch".into()));
    }
    let values = (0..n).map(|k| f64_at(52 + 8 * k)).collect();
    Ok((dim, nodes, h, lo, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainGeometry, DomainKind};
    use std::sync::Arc;

    #[test]
    fn hash_is_stable() {
        assert_eq!(fnv1a64(b""), "cbf29ce484222325");
        assert_eq!(fnv1a64(b"a"), fnv1a64(b"a"));
        assert_ne!(fnv1a64(b"a"), fnv1a64(b"b"));
    }

    #[test]
    fn grid_dump_round_trip() {
        let dom = DomainGeometry::new(DomainKind::Interval { a: -1.0, b: 1.0 }).unwrap();
        let sc = Arc::new(dom.interior_scaffold(0.25, 100).unwrap());
        let u = GridFunction::from_fn(sc, |p| p[0] * 2.0 + 1.0).unwrap();
        let dir = std::env::temp_dir().join("stablepoh_report_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("u.grid");
        write_grid_dump(&path, &u).unwrap();
        let (dim, nodes, h, lo, values) = read_grid_dump(&path).unwrap();
        assert_eq!(dim, 1);
        assert_eq!(nodes, [9, 1]);
        assert_eq!(h, 0.25);
        assert_eq!(lo[0], -1.0);
        assert_eq!(values, u.values());
        // identical content hashes on rewrite
        let h1 = hash_file(&path).unwrap();
        write_grid_dump(&path, &u).unwrap();
        assert_eq!(h1, hash_file(&path).unwrap());
    }
}
