//! Persistence of embeddings: dense per-region raster tensors, the flat
//! embeddings file that links stage 2 to exporters, and a 2-D principal
//! component projection for qualitative inspection.

use crate::cae::EmbeddingVector;
use crate::error::{Error, Result};
use crate::tilegrid::{self, TileId};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

const ERAS_MAGIC: &str = "ERAS1";
const EMB_MAGIC: &str = "EMB1";

/// Provenance carried by rasters and embedding files so consumers can
/// check compatibility without the upstream artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterManifest {
    pub d_r: usize,
    pub r: u32,
    pub t0: i64,
    pub delta_t: i64,
    pub model_hash: String,
    pub norm_maxima: [f64; 6],
}

/// Dense H x W x d_R tensor over a tile rectangle. Pixel `(row i, col j)`
/// holds the embedding of tile `(origin.x + j, origin.y + i)`; unobserved
/// tiles are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRaster {
    pub origin: TileId,
    pub width: u32,
    pub height: u32,
    pub d: usize,
    pub data: Vec<f32>,
    pub manifest: RasterManifest,
}

impl EmbeddingRaster {
    pub fn get(&self, col: u32, row: u32) -> &[f32] {
        let base = (row as usize * self.width as usize + col as usize) * self.d;
        &self.data[base..base + self.d]
    }
}

/// Inclusive tile rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileRect {
    pub min: TileId,
    pub max: TileId,
}

impl TileRect {
    pub fn new(min: TileId, max: TileId) -> Result<TileRect> {
        if max.x < min.x || max.y < min.y {
            return Err(Error::Parameter(format!(
                "empty tile rectangle: {min} .. {max}"
            )));
        }
        Ok(TileRect { min, max })
    }

    /// Smallest rectangle covering every embedding.
    pub fn covering(embeddings: &[EmbeddingVector]) -> Result<TileRect> {
        if embeddings.is_empty() {
            return Err(Error::Parameter(
                "cannot derive a bounding box from zero embeddings".into(),
            ));
        }
        let mut min = embeddings[0].tile;
        let mut max = embeddings[0].tile;
        for e in embeddings {
            min.x = min.x.min(e.tile.x);
            min.y = min.y.min(e.tile.y);
            max.x = max.x.max(e.tile.x);
            max.y = max.y.max(e.tile.y);
        }
        Ok(TileRect { min, max })
    }

    pub fn contains(&self, t: TileId) -> bool {
        t.x >= self.min.x && t.x <= self.max.x && t.y >= self.min.y && t.y <= self.max.y
    }

    pub fn width(&self) -> u32 {
        self.max.x - self.min.x + 1
    }

    pub fn height(&self) -> u32 {
        self.max.y - self.min.y + 1
    }
}

/// Scatters embeddings into a dense zero-filled raster. Embeddings outside
/// the rectangle are skipped and counted. All inputs must share one `d_R`.
pub fn rasterize(
    embeddings: &[EmbeddingVector],
    bbox: TileRect,
    manifest: RasterManifest,
) -> Result<(EmbeddingRaster, u64)> {
    let d = manifest.d_r;
    let (w, h) = (bbox.width() as usize, bbox.height() as usize);
    let mut data = vec![0.0f32; w * h * d];
    let mut skipped = 0u64;
    for e in embeddings {
        if e.values.len() != d {
            return Err(Error::ArtifactMismatch {
                field: "d_r",
                expected: d.to_string(),
                actual: e.values.len().to_string(),
            });
        }
        if !bbox.contains(e.tile) {
            skipped += 1;
            continue;
        }
        let col = (e.tile.x - bbox.min.x) as usize;
        let row = (e.tile.y - bbox.min.y) as usize;
        let base = (row * w + col) * d;
        data[base..base + d].copy_from_slice(&e.values);
    }
    Ok((
        EmbeddingRaster {
            origin: bbox.min,
            width: bbox.width(),
            height: bbox.height(),
            d,
            data,
            manifest,
        },
        skipped,
    ))
}

/// Writes ERAS1: a text manifest block, then the tensor as row-major
/// little-endian f32. Bit-exact roundtrip with [`import_raster`].
pub fn export_raster<W: Write>(r: &EmbeddingRaster, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{ERAS_MAGIC}")?;
    writeln!(w, "origin_x={}", r.origin.x)?;
    writeln!(w, "origin_y={}", r.origin.y)?;
    writeln!(w, "width={}", r.width)?;
    writeln!(w, "height={}", r.height)?;
    writeln!(w, "d_r={}", r.d)?;
    writeln!(w, "r={}", r.manifest.r)?;
    writeln!(w, "t0={}", r.manifest.t0)?;
    writeln!(w, "delta_t={}", r.manifest.delta_t)?;
    writeln!(w, "model_hash={}", r.manifest.model_hash)?;
    for (i, v) in r.manifest.norm_maxima.iter().enumerate() {
        writeln!(w, "max_{i}={v}")?;
    }
    writeln!(w, "end_header")?;
    let mut buf = Vec::with_capacity(r.data.len() * 4);
    for v in &r.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn export_raster_file(r: &EmbeddingRaster, path: &Path) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    export_raster(r, std::io::BufWriter::new(&mut tmp))?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn import_raster<R: BufRead>(mut r: R, origin: &Path) -> Result<EmbeddingRaster> {
    let kv = read_header(&mut r, origin, ERAS_MAGIC)?;
    let get = |k: &str| -> Result<&String> {
        kv.get(k)
            .ok_or_else(|| Error::format(origin, format!("missing manifest field {k}")))
    };
    macro_rules! field {
        ($k:literal) => {
            get($k)?
                .parse()
                .map_err(|_| Error::format(origin, concat!("bad value for field ", $k)))?
        };
    }
    let origin_tile = TileId::new(field!("origin_x"), field!("origin_y"));
    let width: u32 = field!("width");
    let height: u32 = field!("height");
    let d: usize = field!("d_r");
    let mut norm_maxima = [0.0f64; 6];
    for (i, slot) in norm_maxima.iter_mut().enumerate() {
        *slot = get(&format!("max_{i}"))?
            .parse()
            .map_err(|_| Error::format(origin, format!("bad value for field max_{i}")))?;
    }
    let manifest = RasterManifest {
        d_r: d,
        r: field!("r"),
        t0: field!("t0"),
        delta_t: field!("delta_t"),
        model_hash: get("model_hash")?.clone(),
        norm_maxima,
    };
    let expected = width as usize * height as usize * d;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != expected * 4 {
        return Err(Error::format(
            origin,
            format!(
                "data length mismatch: width*height*d_r wants {} floats, payload has {}",
                expected,
                payload.len() / 4
            ),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(EmbeddingRaster {
        origin: origin_tile,
        width,
        height,
        d,
        data,
        manifest,
    })
}

pub fn import_raster_file(path: &Path) -> Result<EmbeddingRaster> {
    let f = std::fs::File::open(path)?;
    import_raster(std::io::BufReader::new(f), path)
}

/// Writes the flat embeddings file (EMB1): header with `d_r`, count and
/// the raster manifest fields, then one `quadkey<TAB>v0<TAB>...` line per
/// tile in quadkey order. Floats use shortest-roundtrip formatting, so
/// reading back is exact.
pub fn write_embeddings<W: Write>(
    mut w: W,
    embeddings: &[EmbeddingVector],
    manifest: &RasterManifest,
) -> std::io::Result<()> {
    writeln!(w, "{EMB_MAGIC}")?;
    writeln!(w, "d_r={}", manifest.d_r)?;
    writeln!(w, "count={}", embeddings.len())?;
    writeln!(w, "r={}", manifest.r)?;
    writeln!(w, "t0={}", manifest.t0)?;
    writeln!(w, "delta_t={}", manifest.delta_t)?;
    writeln!(w, "model_hash={}", manifest.model_hash)?;
    for (i, v) in manifest.norm_maxima.iter().enumerate() {
        writeln!(w, "max_{i}={v}")?;
    }
    writeln!(w, "end_header")?;
    for e in embeddings {
        write!(w, "{}", tilegrid::tile_to_quadkey(e.tile))?;
        for v in &e.values {
            write!(w, "\t{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_embeddings<R: BufRead>(
    mut r: R,
    origin: &Path,
) -> Result<(Vec<EmbeddingVector>, RasterManifest)> {
    let kv = read_header(&mut r, origin, EMB_MAGIC)?;
    let get = |k: &str| -> Result<&String> {
        kv.get(k)
            .ok_or_else(|| Error::format(origin, format!("missing header field {k}")))
    };
    macro_rules! field {
        ($k:literal) => {
            get($k)?
                .parse()
                .map_err(|_| Error::format(origin, concat!("bad value for field ", $k)))?
        };
    }
    let d: usize = field!("d_r");
    let count: usize = field!("count");
    let mut norm_maxima = [0.0f64; 6];
    for (i, slot) in norm_maxima.iter_mut().enumerate() {
        *slot = get(&format!("max_{i}"))?
            .parse()
            .map_err(|_| Error::format(origin, format!("bad value for field max_{i}")))?;
    }
    let manifest = RasterManifest {
        d_r: d,
        r: field!("r"),
        t0: field!("t0"),
        delta_t: field!("delta_t"),
        model_hash: get("model_hash")?.clone(),
        norm_maxima,
    };
    let mut out = Vec::with_capacity(count);
    for line in r.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut f = line.split('\t');
        let qk = f
            .next()
            .ok_or_else(|| Error::format(origin, "missing quadkey"))?;
        let tile = tilegrid::quadkey_to_tile(qk)?;
        let values: Vec<f32> = f
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::format(origin, format!("bad float {v:?}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != d {
            return Err(Error::format(
                origin,
                format!("row for {qk} has {} values, d_r={d}", values.len()),
            ));
        }
        out.push(EmbeddingVector { tile, values });
    }
    if out.len() != count {
        return Err(Error::format(
            origin,
            format!("count={count} but {} rows present", out.len()),
        ));
    }
    Ok((out, manifest))
}

pub fn read_embeddings_file(path: &Path) -> Result<(Vec<EmbeddingVector>, RasterManifest)> {
    let f = std::fs::File::open(path)?;
    read_embeddings(std::io::BufReader::new(f), path)
}

fn read_header<R: BufRead>(
    r: &mut R,
    origin: &Path,
    magic: &str,
) -> Result<BTreeMap<String, String>> {
    let mut first = String::new();
    if r.read_line(&mut first)? == 0 || first.trim_end() != magic {
        return Err(Error::format(origin, format!("bad magic: expected {magic}")));
    }
    let mut kv = BTreeMap::new();
    loop {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::format(origin, "truncated header"));
        }
        let line = line.trim_end();
        if line == "end_header" {
            return Ok(kv);
        }
        if let Some((k, v)) = line.split_once('=') {
            kv.insert(k.to_string(), v.to_string());
        }
    }
}

/// Result of a 2-D principal component projection.
#[derive(Debug, Clone)]
pub struct Projection {
    /// `(quadkey, pc1, pc2)`, sorted by quadkey.
    pub rows: Vec<(String, f64, f64)>,
    /// Eigenvalues of the two leading components.
    pub eigenvalues: (f64, f64),
    /// True when the inputs were all identical (projection is all zeros).
    pub degenerate: bool,
}

impl Projection {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("quadkey,pc1,pc2\n");
        for (qk, a, b) in &self.rows {
            s.push_str(&format!("{qk},{a},{b}\n"));
        }
        s
    }
}

/// Projects embeddings onto their two leading principal components using
/// deterministic power iteration on the centered covariance. Inputs are
/// sorted by quadkey first, so the result is independent of input order;
/// each axis's sign is canonicalized by its largest loading.
pub fn project_2d(embeddings: &[EmbeddingVector]) -> Result<Projection> {
    if embeddings.len() < 2 {
        return Err(Error::Parameter(format!(
            "projection needs at least 2 embeddings, got {}",
            embeddings.len()
        )));
    }
    let d = embeddings[0].values.len();
    let mut rows: Vec<(String, &EmbeddingVector)> = embeddings
        .iter()
        .map(|e| {
            if e.values.len() != d {
                return Err(Error::ArtifactMismatch {
                    field: "d_r",
                    expected: d.to_string(),
                    actual: e.values.len().to_string(),
                });
            }
            Ok((tilegrid::tile_to_quadkey(e.tile), e))
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.0.cmp(&b.0));

    let n = rows.len();
    let mut mean = vec![0.0f64; d];
    for (_, e) in &rows {
        for (m, &v) in mean.iter_mut().zip(&e.values) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    // Centered covariance, d x d.
    let mut cov = vec![vec![0.0f64; d]; d];
    for (_, e) in &rows {
        for i in 0..d {
            let ci = f64::from(e.values[i]) - mean[i];
            for j in i..d {
                cov[i][j] += ci * (f64::from(e.values[j]) - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= n as f64;
            cov[j][i] = cov[i][j];
        }
    }

    let (l1, v1) = power_iteration(&cov);
    let mut deflated = cov.clone();
    for i in 0..d {
        for j in 0..d {
            deflated[i][j] -= l1 * v1[i] * v1[j];
        }
    }
    let (mut l2, mut v2) = power_iteration(&deflated);
    // Deflation residue: below this the "second component" is iteration
    // noise pointing anywhere, not structure.
    if l2 <= l1 * 1e-12 {
        l2 = 0.0;
        v2 = vec![0.0; d];
    }
    let degenerate = l1 <= f64::EPSILON;

    let out = rows
        .into_iter()
        .map(|(qk, e)| {
            let mut p1 = 0.0;
            let mut p2 = 0.0;
            for i in 0..d {
                let c = f64::from(e.values[i]) - mean[i];
                p1 += c * v1[i];
                p2 += c * v2[i];
            }
            (qk, p1, p2)
        })
        .collect();
    Ok(Projection {
        rows: out,
        eigenvalues: (l1.max(0.0), l2.max(0.0)),
        degenerate,
    })
}

/// Leading eigenpair of a symmetric PSD matrix by power iteration with a
/// fixed start vector and iteration budget. Returns a zero vector for the
/// zero matrix. The returned vector's largest-magnitude loading is
/// non-negative, fixing the sign.
fn power_iteration(m: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let d = m.len();
    let frob: f64 = m.iter().flatten().map(|v| v * v).sum();
    if frob <= f64::MIN_POSITIVE {
        return (0.0, vec![0.0; d]);
    }
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut next = vec![0.0f64; d];
    for _ in 0..1_000 {
        for (i, row) in m.iter().enumerate() {
            next[i] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= f64::MIN_POSITIVE {
            // Start vector lies in the null space; nudge along the axis
            // with the largest diagonal entry.
            let k = (0..d).max_by(|&a, &b| m[a][a].total_cmp(&m[b][b])).unwrap_or(0);
            v.iter_mut().for_each(|x| *x = 0.0);
            v[k] = 1.0;
            continue;
        }
        let mut delta = 0.0f64;
        for (vi, ni) in v.iter_mut().zip(&next) {
            let nv = ni / norm;
            delta = delta.max((*vi - nv).abs());
            *vi = nv;
        }
        if delta < 1e-15 {
            break;
        }
    }
    let mut eig = 0.0;
    for (i, row) in m.iter().enumerate() {
        let mv: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        eig += v[i] * mv;
    }
    // Canonical sign: largest |loading| positive.
    let k = (0..d)
        .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
        .unwrap_or(0);
    if v[k] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    (eig, v)
}
