//! Binary grid cache for curvature and K values.
//!
//! Layout (all integers little endian):
//!
//! ```text
//! magic        8 bytes  "WCSGRID1"
//! header_len   u32      bytes from magic through the header digest
//! version      u32
//! byte_order   u8       1 = little endian payload
//! name_len     u32, name bytes (UTF-8)
//! param_hash   u64
//! chart_dim    u32
//! naxes        u32, then naxes × u32 node counts
//! rank         u32
//! components   u32      values per node
//! payload_len  u64      number of f64 values
//! payload_sha  8 bytes  SHA-256 prefix of the payload bytes
//! header_sha   8 bytes  SHA-256 prefix of every preceding header byte
//! payload      payload_len × f64, node-major (last axis fastest), then component
//! ```
//!
//! Axes along which the metric is invariant are stored with a single node.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::curvature::{riemann_at, CurvatureSample, MetricField};
use crate::error::{Error, Result};
use crate::geometry::DerivativeEngine;
use crate::ktensor::{build_k, KField, KTensorSample};
use crate::quadrature::{par_map_indexed, QuadratureGrid};

pub const MAGIC: &[u8; 8] = b"WCSGRID1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CacheHeader {
    pub version: u32,
    pub metric: String,
    pub param_hash: u64,
    pub chart_dim: u32,
    pub counts: Vec<u32>,
    pub rank: u32,
    pub components: u32,
    pub little_endian: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCache {
    pub header: CacheHeader,
    pub payload: Vec<f64>,
}

fn digest8(bytes: &[u8]) -> [u8; 8] {
    let d = Sha256::digest(bytes);
    let mut out = [0u8; 8];
    out.copy_from_slice(&d[..8]);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CorruptHeader(format!("header ends early at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl GridCache {
    pub fn nodes(&self) -> usize {
        self.header.counts.iter().map(|&c| c as usize).product()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(64 + h.metric.len() + 8 * self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[0; 4]);
        out.extend_from_slice(&h.version.to_le_bytes());
        out.push(h.little_endian as u8);
        out.extend_from_slice(&(h.metric.len() as u32).to_le_bytes());
        out.extend_from_slice(h.metric.as_bytes());
        out.extend_from_slice(&h.param_hash.to_le_bytes());
        out.extend_from_slice(&h.chart_dim.to_le_bytes());
        out.extend_from_slice(&(h.counts.len() as u32).to_le_bytes());
        for c in &h.counts {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&h.rank.to_le_bytes());
        out.extend_from_slice(&h.components.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u64).to_le_bytes());
        let payload: Vec<u8> = self.payload.iter().flat_map(|v| v.to_le_bytes()).collect();
        out.extend_from_slice(&digest8(&payload));
        let header_len = (out.len() + 8) as u32;
        out[8..12].copy_from_slice(&header_len.to_le_bytes());
        let hd = digest8(&out);
        out.extend_from_slice(&hd);
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<GridCache> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(Error::CorruptHeader("bad magic".into()));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        if header_len < 20 || header_len > bytes.len() {
            return Err(Error::CorruptHeader(format!("header length {header_len} out of range")));
        }
        let (head, stored) = bytes[..header_len].split_at(header_len - 8);
        if digest8(head) != stored {
            return Err(Error::HashMismatch("header digest does not match".into()));
        }
        let mut r = Reader { bytes: head, pos: 12 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::CorruptHeader(format!("unsupported version {version}")));
        }
        let little_endian = match r.u8()? {
            1 => true,
            b => return Err(Error::CorruptHeader(format!("unsupported byte order {b}"))),
        };
        let name_len = r.u32()? as usize;
        let metric = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::CorruptHeader("metric name is not UTF-8".into()))?;
        let param_hash = r.u64()?;
        let chart_dim = r.u32()?;
        let naxes = r.u32()? as usize;
        let counts = (0..naxes).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let rank = r.u32()?;
        let components = r.u32()?;
        let payload_len = r.u64()? as usize;
        let payload_sha: [u8; 8] = r.take(8)?.try_into().expect("8 bytes");
        if r.pos != head.len() {
            return Err(Error::CorruptHeader("trailing header bytes".into()));
        }
        let expected = payload_len
            .checked_mul(8)
            .ok_or_else(|| Error::CorruptHeader("payload length overflows".into()))?;
        let body = &bytes[header_len..];
        if body.len() < expected {
            return Err(Error::TruncatedPayload {
                expected,
                found: body.len(),
            });
        }
        let body = &body[..expected];
        if digest8(body) != payload_sha {
            return Err(Error::HashMismatch("payload digest does not match".into()));
        }
        let payload = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let cache = GridCache {
            header: CacheHeader {
                version,
                metric,
                param_hash,
                chart_dim,
                counts,
                rank,
                components,
                little_endian,
            },
            payload,
        };
        if cache.nodes() * components as usize != payload_len {
            return Err(Error::CorruptHeader(format!(
                "{} nodes × {components} components ≠ {payload_len} values",
                cache.nodes()
            )));
        }
        Ok(cache)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<GridCache> {
        GridCache::from_bytes(&fs::read(path)?)
    }

    /// Rejects caches written for a different metric or parameter set.
    pub fn check_metric(&self, metric: &MetricField) -> Result<()> {
        if self.header.metric != metric.name || self.header.param_hash != metric.param_hash() {
            return Err(Error::HashMismatch(format!(
                "cache is for {} ({:016x}), expected {} ({:016x})",
                self.header.metric,
                self.header.param_hash,
                metric.name,
                metric.param_hash()
            )));
        }
        Ok(())
    }

    fn check_grid(&self, counts: &[u32], components: usize) -> Result<()> {
        if self.header.counts != counts || self.header.components as usize != components {
            return Err(Error::CorruptHeader(format!(
                "cache grid {:?}×{} does not match requested {:?}×{components}",
                self.header.counts, self.header.components, counts
            )));
        }
        Ok(())
    }

    fn node(&self, i: usize) -> &[f64] {
        let c = self.header.components as usize;
        &self.payload[i * c..(i + 1) * c]
    }
}

/// Nodes of `grid` that differ in at least one non-ignorable coordinate.
/// Ignorable axes collapse to their first node.
pub fn essential_nodes(metric: &MetricField, grid: &QuadratureGrid) -> (Vec<u32>, Vec<Vec<f64>>) {
    let ign = metric.ignorable();
    let counts: Vec<u32> = grid
        .axes
        .iter()
        .enumerate()
        .map(|(a, ax)| if ign[a] { 1 } else { ax.count as u32 })
        .collect();
    let total: usize = counts.iter().map(|&c| c as usize).product();
    let nodes = (0..total)
        .map(|mut i| {
            let mut x = vec![0.0; counts.len()];
            for a in (0..counts.len()).rev() {
                let c = counts[a] as usize;
                x[a] = grid.axes[a].nodes()[i % c];
                i /= c;
            }
            x
        })
        .collect();
    (counts, nodes)
}

fn header(metric: &MetricField, counts: Vec<u32>, rank: u32, components: usize) -> CacheHeader {
    CacheHeader {
        version: FORMAT_VERSION,
        metric: metric.name.clone(),
        param_hash: metric.param_hash(),
        chart_dim: metric.dim() as u32,
        counts,
        rank,
        components: components as u32,
        little_endian: true,
    }
}

/// `R_{ijk}^ℓ` at every essential node of `grid`.
pub fn curvature_grid(
    metric: &MetricField,
    grid: &QuadratureGrid,
    engine: &DerivativeEngine,
    workers: usize,
) -> Result<GridCache> {
    let (counts, nodes) = essential_nodes(metric, grid);
    let n = metric.dim();
    let samples = par_map_indexed(nodes.len(), workers, |i| riemann_at(metric, &nodes[i], engine))?;
    let payload = samples.into_iter().flat_map(|s| s.riemann_mixed).collect();
    Ok(GridCache {
        header: header(metric, counts, 4, n.pow(4)),
        payload,
    })
}

/// `κ` and its magnitude at every essential node of `grid`.
pub fn k_grid(kfield: &KField, grid: &QuadratureGrid, workers: usize) -> Result<GridCache> {
    let (counts, nodes) = essential_nodes(&kfield.metric, grid);
    let n = kfield.dim();
    let samples = par_map_indexed(nodes.len(), workers, |i| kfield.k(&nodes[i]))?;
    let payload = samples
        .iter()
        .flat_map(|s| s.kappa.iter().chain(&s.magnitude).copied())
        .collect();
    Ok(GridCache {
        header: header(&kfield.metric, counts, 1, 2 * n),
        payload,
    })
}

/// Rebuilds `K` from a cached curvature grid and seeds `kfield` with it.
/// Returns the number of seeded nodes.
pub fn seed_from_curvature(kfield: &KField, grid: &QuadratureGrid, cache: &GridCache) -> Result<usize> {
    cache.check_metric(&kfield.metric)?;
    let n = kfield.dim();
    let (counts, nodes) = essential_nodes(&kfield.metric, grid);
    cache.check_grid(&counts, n.pow(4))?;
    for (i, x) in nodes.iter().enumerate() {
        let curv = CurvatureSample {
            point: x.clone(),
            dim: n,
            metric: Vec::new(),
            christoffel: Vec::new(),
            riemann_mixed: cache.node(i).to_vec(),
            riemann_lowered: Vec::new(),
        };
        kfield.seed(x, build_k(&curv, &kfield.schedule)?);
    }
    Ok(nodes.len())
}

/// Seeds `kfield` from a cached K grid.
pub fn seed_from_k(kfield: &KField, grid: &QuadratureGrid, cache: &GridCache) -> Result<usize> {
    cache.check_metric(&kfield.metric)?;
    let n = kfield.dim();
    let (counts, nodes) = essential_nodes(&kfield.metric, grid);
    cache.check_grid(&counts, 2 * n)?;
    for (i, x) in nodes.iter().enumerate() {
        let v = cache.node(i);
        kfield.seed(
            x,
            KTensorSample {
                point: x.clone(),
                dim: n,
                order_k: n.div_ceil(2),
                kappa: v[..n].to_vec(),
                magnitude: v[n..].to_vec(),
            },
        );
    }
    Ok(nodes.len())
}

/// `<dir>/<kind>-<metric>-<param hash>-<counts>.wcs`.
pub fn cache_path(dir: &Path, kind: &str, metric: &MetricField, grid: &QuadratureGrid) -> PathBuf {
    let (counts, _) = essential_nodes(metric, grid);
    let counts: Vec<String> = counts.iter().map(u32::to_string).collect();
    dir.join(format!(
        "{kind}-{}-{:016x}-{}.wcs",
        metric.name,
        metric.param_hash(),
        counts.join("x")
    ))
}

/// Loads the curvature grid from `dir` if present and valid, otherwise
/// computes and writes it. Either way `kfield` is seeded from it.
pub fn load_or_build_curvature(
    kfield: &KField,
    grid: &QuadratureGrid,
    dir: &Path,
    workers: usize,
) -> Result<(GridCache, bool)> {
    let path = cache_path(dir, "curvature", &kfield.metric, grid);
    if path.exists() {
        let cache = GridCache::read(&path)?;
        seed_from_curvature(kfield, grid, &cache)?;
        return Ok((cache, true));
    }
    let cache = curvature_grid(&kfield.metric, grid, &kfield.engine, workers)?;
    cache.write(&path)?;
    seed_from_curvature(kfield, grid, &cache)?;
    Ok((cache, false))
}
