//! Exporters: ASCII PLY point clouds, raw f32 volumes with a text sidecar,
//! 8-bit PGM slices and CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::geometry::SceneBounds;
use crate::scene::VoxelField;
use crate::{Error, Result, Vec3};

/// Writes `x y z intensity` vertices as ASCII PLY.
pub fn export_ply(points: &[(Vec3, f64)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut out = String::with_capacity(64 * points.len() + 160);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", points.len());
    out.push_str("property float x\nproperty float y\nproperty float z\nproperty float intensity\nend_header\n");
    for (p, v) in points {
        let _ = writeln!(out, "{} {} {} {}", p[0] as f32, p[1] as f32, p[2] as f32, *v as f32);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Sidecar header path for a raw volume: `<path>.hdr`.
pub fn volume_header_path(raw: &Path) -> PathBuf {
    let mut name = raw.as_os_str().to_owned();
    name.push(".hdr");
    PathBuf::from(name)
}

/// Writes the voxel values as little-endian f32 (x fastest) to `path` and a
/// `key = value` header to `<path>.hdr`.
pub fn export_volume(field: &VoxelField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut raw = Vec::with_capacity(4 * field.len());
    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    for &v in &field.values {
        let v = v as f32;
        lo = lo.min(v);
        hi = hi.max(v);
        raw.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, raw).map_err(|e| Error::io(path, e))?;
    let [nx, ny, nz] = field.resolution;
    let c = field.bounds.center;
    let header = format!(
        "format = raw\ndtype = f32le\norder = x-fastest\nresolution = {nx}, {ny}, {nz}\n\
         center = {}, {}, {}\nside = {}\nmin = {}\nmax = {}\n",
        c[0], c[1], c[2], field.bounds.side, lo, hi
    );
    let hdr = volume_header_path(path);
    fs::write(&hdr, header).map_err(|e| Error::io(hdr, e))
}

/// Reads a volume written by [`export_volume`].
pub fn read_volume(path: impl AsRef<Path>) -> Result<VoxelField> {
    let path = path.as_ref();
    let doc = super::config::Document::load(volume_header_path(path))?;
    let h = doc.require("")?;
    let res = h.vec3("resolution")?.ok_or_else(|| Error::config("volume header lacks resolution"))?;
    let center = h.vec3("center")?.ok_or_else(|| Error::config("volume header lacks center"))?;
    let side: f64 = h.req("side")?;
    let resolution = [res[0] as usize, res[1] as usize, res[2] as usize];
    let bounds = SceneBounds::new(Vec3::from(center), side)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = 4 * resolution.iter().product::<usize>();
    if bytes.len() != expected {
        return Err(Error::TruncatedFile {
            offset: bytes.len().min(expected) as u64,
            needed: expected.saturating_sub(bytes.len()),
        });
    }
    let values = bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64).collect();
    VoxelField::from_values(bounds, resolution, values)
}

/// Writes slice `index` along `axis` as a binary 8-bit PGM, min-max scaled.
/// A constant slice maps to all zeros. Image columns follow the first
/// remaining axis, rows the second.
pub fn render_slice(field: &VoxelField, axis: usize, index: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (pixels, width, height) = slice_pixels(field, axis, index)?;
    let mut out = Vec::with_capacity(pixels.len() + 32);
    write!(out, "P5\n{width} {height}\n255\n").expect("write to vec");
    out.extend_from_slice(&pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Pixel bytes of a slice plus (width, height).
pub fn slice_pixels(field: &VoxelField, axis: usize, index: usize) -> Result<(Vec<u8>, usize, usize)> {
    if axis > 2 {
        return Err(Error::IndexOutOfRange { index: axis, len: 3 });
    }
    if index >= field.resolution[axis] {
        return Err(Error::IndexOutOfRange { index, len: field.resolution[axis] });
    }
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (width, height) = (field.resolution[u], field.resolution[v]);
    let mut vals = Vec::with_capacity(width * height);
    for j in 0..height {
        for i in 0..width {
            let mut c = [0usize; 3];
            c[axis] = index;
            c[u] = i;
            c[v] = j;
            vals.push(field.values[field.index(c[0], c[1], c[2])]);
        }
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let pixels = vals.iter().map(|&x| if span > 0.0 { (255.0 * (x - lo) / span).round() as u8 } else { 0 }).collect();
    Ok((pixels, width, height))
}

/// Minimal CSV table: a header row plus rows of already formatted cells.
/// Floats should be formatted with `{}` so they parse back exactly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    /// Appends rows to an existing file with the same header, or creates it.
    pub fn append(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let header = self.header.join(",");
        if let Ok(existing) = fs::read_to_string(path) {
            if let Some(first) = existing.lines().next() {
                if first != header {
                    return Err(Error::ShapeMismatch(format!(
                        "{} has header '{first}', expected '{header}'",
                        path.display()
                    )));
                }
                let mut f = fs::OpenOptions::new().append(true).open(path).map_err(|e| Error::io(path, e))?;
                let body: String = self.rows.iter().map(|r| r.join(",") + "\n").collect();
                return f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e));
            }
        }
        self.write(path)
    }
}
