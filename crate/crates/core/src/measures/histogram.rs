use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::Region;
use crate::error::{Result, SrbError};
use crate::linalg::Point;

/// Uniform box partition of a region's bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Cells per axis.
    pub resolution: usize,
}

impl Grid {
    pub fn new(lower: &[f64], upper: &[f64], resolution: usize) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(SrbError::InvalidArgument("grid bounds mismatch".into()));
        }
        if resolution == 0
            || lower
                .iter()
                .zip(upper)
                .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
        {
            return Err(SrbError::InvalidArgument(
                "grid needs finite bounds and resolution >= 1".into(),
            ));
        }
        Ok(Grid {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            resolution,
        })
    }

    pub fn for_region(region: &Region, resolution: usize) -> Result<Self> {
        if !region.is_bounded() {
            return Err(SrbError::InvalidArgument(
                "cannot grid an unbounded region".into(),
            ));
        }
        Grid::new(&region.lower, &region.upper, resolution)
    }

    /// 64 cells per axis in the plane, 32 in space.
    pub fn default_resolution(dim: usize) -> usize {
        if dim <= 2 {
            64
        } else {
            32
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn cells(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.resolution as f64
    }

    /// Row-major cell index, axis 0 most significant. `None` outside the box.
    pub fn cell_of(&self, p: &Point) -> Option<usize> {
        let mut idx = 0;
        for i in 0..self.dim() {
            let t = (p[i] - self.lower[i]) / (self.upper[i] - self.lower[i]);
            if !(0.0..=1.0).contains(&t) {
                return None;
            }
            let k = ((t * self.resolution as f64) as usize).min(self.resolution - 1);
            idx = idx * self.resolution + k;
        }
        Some(idx)
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            out[i] = idx % self.resolution;
            idx /= self.resolution;
        }
        out
    }

    /// Lower corner of a cell.
    pub fn cell_lower(&self, idx: usize) -> Point {
        let m = self.multi_index(idx);
        let c: Vec<f64> = (0..self.dim())
            .map(|i| self.lower[i] + m[i] as f64 * self.cell_width(i))
            .collect();
        Point::new(&c)
    }

    pub fn center(&self, idx: usize) -> Point {
        let m = self.multi_index(idx);
        let c: Vec<f64> = (0..self.dim())
            .map(|i| self.lower[i] + (m[i] as f64 + 0.5) * self.cell_width(i))
            .collect();
        Point::new(&c)
    }
}

/// Integer-weight accumulator behind every histogram. Sums of integers are
/// associative, so merged results do not depend on how the ensemble was split.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramAccumulator {
    pub grid: Grid,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl HistogramAccumulator {
    pub fn new(grid: Grid) -> Self {
        let n = grid.cells();
        HistogramAccumulator {
            grid,
            counts: vec![0; n],
            total: 0,
        }
    }

    /// Adds `weight` at `p`; points outside the box are dropped.
    #[inline]
    pub fn add(&mut self, p: &Point, weight: u64) -> bool {
        match self.grid.cell_of(p) {
            Some(c) => {
                self.counts[c] += weight;
                self.total += weight;
                true
            }
            None => false,
        }
    }

    pub fn merge(mut self, other: &HistogramAccumulator) -> Result<Self> {
        if self.grid != other.grid {
            return Err(SrbError::GridMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(self)
    }

    pub fn normalize(&self, n: usize) -> Result<GridHistogram> {
        if self.total == 0 {
            return Err(SrbError::EmptyEnsemble);
        }
        let t = self.total as f64;
        Ok(GridHistogram {
            grid: self.grid.clone(),
            masses: self.counts.iter().map(|c| *c as f64 / t).collect(),
            total_mass: 1.0,
            n,
        })
    }
}

/// Normalised empirical measure on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHistogram {
    pub grid: Grid,
    pub masses: Vec<f64>,
    pub total_mass: f64,
    /// Number of iterates averaged (the checkpoint).
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramHeader {
    pub system: String,
    pub parameters: serde_json::Value,
    pub grid: Grid,
    pub n: usize,
    pub seed: u64,
    pub checkpoint: usize,
}

impl GridHistogram {
    /// Unit mass in the cell containing `p`.
    pub fn dirac(grid: Grid, p: &Point) -> Result<Self> {
        let mut acc = HistogramAccumulator::new(grid);
        if !acc.add(p, 1) {
            return Err(SrbError::InvalidArgument("point outside the grid".into()));
        }
        acc.normalize(1)
    }

    /// Equal mass in every cell.
    pub fn uniform(grid: Grid) -> Self {
        let n = grid.cells();
        GridHistogram {
            grid,
            masses: vec![1.0 / n as f64; n],
            total_mass: 1.0,
            n: 0,
        }
    }

    /// Midpoint-rule integral of `h`.
    pub fn integrate(&self, h: impl Fn(&Point) -> f64) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(i, m)| m * h(&self.grid.center(i)))
            .sum()
    }

    pub fn l1_distance(&self, other: &GridHistogram) -> Result<f64> {
        if self.grid != other.grid {
            return Err(SrbError::GridMismatch);
        }
        Ok(self
            .masses
            .iter()
            .zip(&other.masses)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }

    pub fn mass_sum(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// JSON header line, then `cell_index,center_coord_0..,mass` for the
    /// nonzero cells.
    pub fn write<W: Write>(&self, mut w: W, header: &HistogramHeader) -> Result<()> {
        writeln!(w, "{}", serde_json::to_string(header)?)?;
        let mut line = String::from("cell_index");
        for i in 0..self.grid.dim() {
            line.push_str(&format!(",center_coord_{i}"));
        }
        writeln!(w, "{line},mass")?;
        for (i, m) in self.masses.iter().enumerate() {
            if *m > 0.0 {
                let c = self.grid.center(i);
                let mut line = i.to_string();
                for x in c.as_slice() {
                    line.push_str(&format!(",{x}"));
                }
                writeln!(w, "{line},{m}")?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<(HistogramHeader, GridHistogram)> {
        let mut lines = r.lines();
        let head = lines
            .next()
            .ok_or_else(|| SrbError::Parse("missing header".into()))??;
        let header: HistogramHeader = serde_json::from_str(&head)?;
        lines
            .next()
            .ok_or_else(|| SrbError::Parse("missing column line".into()))??;
        let mut masses = vec![0.0; header.grid.cells()];
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let idx: usize = fields[0]
                .parse()
                .map_err(|_| SrbError::Parse(format!("bad cell index in {line:?}")))?;
            let m: f64 = fields
                .last()
                .unwrap()
                .parse()
                .map_err(|_| SrbError::Parse(format!("bad mass in {line:?}")))?;
            *masses
                .get_mut(idx)
                .ok_or_else(|| SrbError::Parse(format!("cell {idx} out of range")))? = m;
        }
        let hist = GridHistogram {
            grid: header.grid.clone(),
            total_mass: 1.0,
            n: header.checkpoint,
            masses,
        };
        Ok((header, hist))
    }
}
