//! Piecewise-constant intensity multipliers `u_i^k > 0`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Bounds applied to every estimated multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for ClampBounds {
    fn default() -> Self {
        Self { min: 1e-3, max: 1e3 }
    }
}

impl ClampBounds {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        let b = Self { min, max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.min <= 1.0 && self.max >= 1.0 && self.max.is_finite()) {
            return Err(Error::invalid(format!(
                "clamp bounds must satisfy 0 < min <= 1 <= max < inf, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, u: f64) -> f64 {
        u.clamp(self.min, self.max)
    }
}

/// Multipliers on bins `[t_k, t_{k+1})`, stored `K x M` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantPolicy {
    edges: Vec<f64>,
    dims: usize,
    values: Vec<f64>,
}

impl PiecewiseConstantPolicy {
    pub fn new(edges: Vec<f64>, dims: usize, values: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::invalid("a policy needs at least one bin"));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(
                "policy bin edges must be finite and strictly increasing",
            ));
        }
        if dims == 0 || values.len() != (edges.len() - 1) * dims {
            return Err(Error::invalid(format!(
                "policy has {} values, expected {} bins x {dims} dims",
                values.len(),
                edges.len() - 1
            )));
        }
        if let Some(p) = values.iter().position(|u| !(u.is_finite() && *u > 0.0)) {
            return Err(Error::invalid(format!(
                "multiplier u[{}][{}] = {} must be positive",
                p / dims,
                p % dims,
                values[p]
            )));
        }
        Ok(Self { edges, dims, values })
    }

    pub fn constant(edges: Vec<f64>, dims: usize, value: f64) -> Result<Self> {
        let n = edges.len().saturating_sub(1) * dims;
        Self::new(edges, dims, vec![value; n])
    }

    /// `bins` equal-width bins on `[start, end]`.
    pub fn uniform(start: f64, end: f64, bins: usize, dims: usize, value: f64) -> Result<Self> {
        Self::constant(uniform_edges(start, end, bins)?, dims, value)
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.edges[0]
    }

    pub fn end(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn value(&self, bin: usize, dim: usize) -> f64 {
        self.values[bin * self.dims + dim]
    }

    pub fn row(&self, bin: usize) -> &[f64] {
        &self.values[bin * self.dims..(bin + 1) * self.dims]
    }

    pub fn set_row(&mut self, bin: usize, row: &[f64]) -> Result<()> {
        if row.len() != self.dims || row.iter().any(|u| !(u.is_finite() && *u > 0.0)) {
            return Err(Error::invalid("policy row must hold M positive multipliers"));
        }
        self.values[bin * self.dims..(bin + 1) * self.dims].copy_from_slice(row);
        Ok(())
    }

    /// Bin holding `t`; the last bin is closed on the right.
    pub fn bin_index(&self, t: f64) -> Option<usize> {
        if t < self.start() || t > self.end() {
            return None;
        }
        Some(
            self.edges
                .partition_point(|&e| e <= t)
                .saturating_sub(1)
                .min(self.bins() - 1),
        )
    }

    pub fn at(&self, t: f64, dim: usize) -> Option<f64> {
        self.bin_index(t).map(|k| self.value(k, dim))
    }

    /// True if every bin intersecting `[start, end]` exists (no gap).
    pub fn covers(&self, start: f64, end: f64) -> bool {
        let tol = 1e-9 * end.abs().max(1.0);
        self.start() <= start + tol && self.end() >= end - tol
    }

    pub fn is_identity(&self) -> bool {
        self.values.iter().all(|&u| u == 1.0)
    }

    pub fn clamped(&self, bounds: ClampBounds) -> Self {
        Self {
            edges: self.edges.clone(),
            dims: self.dims,
            values: self.values.iter().map(|&u| bounds.apply(u)).collect(),
        }
    }

    /// Mean multiplier of bin `k` over the dimensions selected by `mask`.
    pub fn mean_multiplier(&self, bin: usize, mask: Option<&[bool]>) -> f64 {
        let row = self.row(bin);
        let (s, n) = row
            .iter()
            .enumerate()
            .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
            .fold((0.0, 0usize), |(s, n), (_, u)| (s + u, n + 1));
        if n == 0 {
            1.0
        } else {
            s / n as f64
        }
    }

    /// CSV rows `bin_start,bin_end,dimension,multiplier`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_start", "bin_end", "dimension", "multiplier"])?;
        for k in 0..self.bins() {
            for i in 0..self.dims {
                w.write_record([
                    self.edges[k].to_string(),
                    self.edges[k + 1].to_string(),
                    i.to_string(),
                    self.value(k, i).to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut rows: Vec<(f64, f64, usize, f64)> = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| -> Result<f64> {
                rec.get(c)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::invalid(format!("policy csv row {}: bad column {c}", line + 1)))
            };
            rows.push((field(0)?, field(1)?, field(2)? as usize, field(3)?));
        }
        let dims = rows.iter().map(|r| r.2 + 1).max().unwrap_or(0);
        let mut edges: Vec<f64> = rows.iter().map(|r| r.0).collect();
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        if let Some(last) = rows.iter().map(|r| r.1).max_by(f64::total_cmp) {
            edges.push(last);
        }
        let k = edges.len().saturating_sub(1);
        let mut values = vec![f64::NAN; k * dims];
        for (s, _, i, u) in rows {
            let b = edges.partition_point(|&e| e < s);
            values[b * dims + i] = u;
        }
        Self::new(edges, dims, values)
    }
}

pub fn uniform_edges(start: f64, end: f64, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 || !(start < end) {
        return Err(Error::invalid(format!(
            "cannot split [{start}, {end}] into {bins} bins"
        )));
    }
    let width = (end - start) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|k| start + k as f64 * width).collect();
    edges.push(end);
    Ok(edges)
}
