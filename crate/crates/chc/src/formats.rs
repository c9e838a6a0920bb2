//! On-disk formats for meshes and sampled Brownian increments.
//!
//! Mesh text: a header line `dim vertices cells`, one line of coordinates per
//! vertex, then one line of vertex indices per cell.
//!
//! Increments binary, little-endian: magic `CHCW`, `u32` version, `u64`
//! sample, `u64` fine steps, `f64` fine step, `u64` factor count and the
//! factors, `u64` mode count and the scales, the mode-major increments, and
//! the `u64` checksum of the increments.

use std::fmt::Write as _;

use chc_core::mesh::Mesh;
use chc_core::noise::WienerIncrements;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CHCW";
const VERSION: u32 = 1;

fn bad(what: &'static str, message: impl Into<String>) -> Error {
    Error::Format {
        what,
        message: message.into(),
    }
}

pub fn mesh_to_text(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {}",
        mesh.dim(),
        mesh.num_vertices(),
        mesh.num_cells()
    );
    for i in 0..mesh.num_vertices() {
        let coords: Vec<String> = mesh.vertex(i).iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{}", coords.join(" "));
    }
    for c in 0..mesh.num_cells() {
        let ids: Vec<String> = mesh.cell(c).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", ids.join(" "));
    }
    out
}

pub fn mesh_from_text(text: &str) -> Result<Mesh> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<usize> = lines
        .next()
        .ok_or_else(|| bad("mesh", "empty input"))?
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| bad("mesh", format!("bad header field {t:?}")))
        })
        .collect::<Result<_>>()?;
    let [dim, nv, nc] = header[..] else {
        return Err(bad("mesh", "header must be `dim vertices cells`"));
    };
    let mut coords = Vec::with_capacity(nv * dim);
    for i in 0..nv {
        let line = lines
            .next()
            .ok_or_else(|| bad("mesh", format!("missing vertex {i}")))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| bad("mesh", format!("vertex {i}: bad coordinate {t:?}")))
            })
            .collect::<Result<_>>()?;
        if row.len() != dim {
            return Err(bad(
                "mesh",
                format!("vertex {i} has {} coordinates, expected {dim}", row.len()),
            ));
        }
        coords.extend(row);
    }
    let mut cells = Vec::with_capacity(nc * (dim + 1));
    for c in 0..nc {
        let line = lines
            .next()
            .ok_or_else(|| bad("mesh", format!("missing cell {c}")))?;
        let row: Vec<usize> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| bad("mesh", format!("cell {c}: bad index {t:?}")))
            })
            .collect::<Result<_>>()?;
        if row.len() != dim + 1 {
            return Err(bad(
                "mesh",
                format!("cell {c} has {} vertices, expected {}", row.len(), dim + 1),
            ));
        }
        cells.extend(row);
    }
    if lines.next().is_some() {
        return Err(bad("mesh", "trailing data"));
    }
    Ok(Mesh::from_parts(dim, coords, cells)?)
}

pub fn increments_to_bytes(inc: &WienerIncrements) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&inc.sample().to_le_bytes());
    out.extend_from_slice(&(inc.fine_steps() as u64).to_le_bytes());
    out.extend_from_slice(&inc.k_fine().to_le_bytes());
    out.extend_from_slice(&(inc.factors().len() as u64).to_le_bytes());
    for &f in inc.factors() {
        out.extend_from_slice(&(f as u64).to_le_bytes());
    }
    out.extend_from_slice(&(inc.modes() as u64).to_le_bytes());
    for s in inc.scales() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    for b in inc.fine() {
        out.extend_from_slice(&b.to_le_bytes());
    }
    out.extend_from_slice(&inc.checksum().to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() < n {
            return Err(bad("increments", "truncated input"));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("eight bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("eight bytes"),
        ))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        // every counted item takes at least eight bytes
        if n > (self.bytes.len() / 8) as u64 {
            return Err(bad(
                "increments",
                format!("count {n} exceeds the remaining input"),
            ));
        }
        Ok(n as usize)
    }
}

pub fn increments_from_bytes(bytes: &[u8]) -> Result<WienerIncrements> {
    let mut r = Reader { bytes };
    if r.take(4)? != MAGIC {
        return Err(bad("increments", "bad magic"));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("four bytes"));
    if version != VERSION {
        return Err(bad("increments", format!("unsupported version {version}")));
    }
    let sample = r.u64()?;
    let fine_steps = r.len()?;
    let k_fine = r.f64()?;
    let nf = r.len()?;
    let factors = (0..nf)
        .map(|_| r.u64().map(|f| f as usize))
        .collect::<Result<Vec<_>>>()?;
    let modes = r.len()?;
    let scales = (0..modes).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let count = modes
        .checked_mul(fine_steps)
        .filter(|&c| c <= r.bytes.len() / 8)
        .ok_or_else(|| bad("increments", "increment block exceeds the input"))?;
    let beta = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let stored = r.u64()?;
    if !r.bytes.is_empty() {
        return Err(bad("increments", "trailing data"));
    }
    let inc = WienerIncrements::from_parts(sample, fine_steps, k_fine, factors, scales, beta)?;
    if inc.checksum() != stored {
        return Err(bad(
            "increments",
            format!(
                "checksum mismatch: stored {stored:016x}, computed {:016x}",
                inc.checksum()
            ),
        ));
    }
    Ok(inc)
}
