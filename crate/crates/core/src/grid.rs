//! Uniform bounding-box grids and discretized scalar fields that vanish
//! identically outside the domain.

use std::sync::Arc;

use crate::{Error, Result};

/// Uniform node grid with square cells. For `dim = 1` the second axis has a
/// single node row and the `y` coordinate is ignored.
#[derive(Debug, Clone)]
pub struct Grid {
    pub dim: usize,
    pub lo: [f64; 2],
    pub h: f64,
    /// Node counts per axis.
    pub nodes: [usize; 2],
}

impl Grid {
    pub fn node_count(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nodes[0] + i
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.lo[0] + i as f64 * self.h,
            if self.dim == 1 { 0.0 } else { self.lo[1] + j as f64 * self.h },
        ]
    }

    pub fn hi(&self) -> [f64; 2] {
        [
            self.lo[0] + (self.nodes[0] - 1) as f64 * self.h,
            if self.dim == 1 { 0.0 } else { self.lo[1] + (self.nodes[1] - 1) as f64 * self.h },
        ]
    }

    /// Bilinear interpolation stencil at `x`: up to four `(node, weight)`
    /// pairs. Empty outside the grid box (the field is zero there).
    pub fn stencil(&self, x: [f64; 2], out: &mut Vec<(usize, f64)>) {
        out.clear();
        let fx = (x[0] - self.lo[0]) / self.h;
        if fx < 0.0 || fx > (self.nodes[0] - 1) as f64 {
            return;
        }
        let i0 = (fx.floor() as usize).min(self.nodes[0] - 2).min(self.nodes[0] - 1);
        let tx = (fx - i0 as f64).clamp(0.0, 1.0);
        if self.dim == 1 {
            if tx > 0.0 && i0 + 1 < self.nodes[0] {
                out.push((self.index(i0, 0), 1.0 - tx));
                out.push((self.index(i0 + 1, 0), tx));
            } else {
                out.push((self.index(i0, 0), 1.0 - tx));
                if i0 + 1 < self.nodes[0] {
                    out.push((self.index(i0 + 1, 0), tx));
                }
            }
            return;
        }
        let fy = (x[1] - self.lo[1]) / self.h;
        if fy < 0.0 || fy > (self.nodes[1] - 1) as f64 {
            return;
        }
        let j0 = (fy.floor() as usize).min(self.nodes[1].saturating_sub(2));
        let ty = (fy - j0 as f64).clamp(0.0, 1.0);
        let j1 = (j0 + 1).min(self.nodes[1] - 1);
        let i1 = (i0 + 1).min(self.nodes[0] - 1);
        out.push((self.index(i0, j0), (1.0 - tx) * (1.0 - ty)));
        out.push((self.index(i1, j0), tx * (1.0 - ty)));
        out.push((self.index(i0, j1), (1.0 - tx) * ty));
        out.push((self.index(i1, j1), tx * ty));
    }
}

/// Grid plus inside mask and per-node distance to the complement.
#[derive(Debug, Clone)]
pub struct GridScaffold {
    pub grid: Grid,
    pub inside: Vec<bool>,
    pub dist: Vec<f64>,
    pub n_interior: usize,
}

/// Scalar field on a grid scaffold; exterior nodes carry exactly zero.
#[derive(Debug, Clone)]
pub struct GridFunction {
    scaffold: Arc<GridScaffold>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(scaffold: Arc<GridScaffold>) -> Self {
        let n = scaffold.grid.node_count();
        Self { scaffold, values: vec![0.0; n] }
    }

    /// Sample `f` at interior nodes; exterior nodes stay zero.
    pub fn from_fn(scaffold: Arc<GridScaffold>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let mut gf = Self::zeros(scaffold);
        let grid = gf.scaffold.grid.clone();
        for j in 0..grid.nodes[1] {
            for i in 0..grid.nodes[0] {
                let idx = grid.index(i, j);
                if gf.scaffold.inside[idx] {
                    let v = f(grid.point(i, j));
                    if !v.is_finite() {
                        return Err(Error::Validation(format!(
                            "non-finite field value at node ({i}, {j})"
                        )));
                    }
                    gf.values[idx] = v;
                }
            }
        }
        Ok(gf)
    }

    /// Wrap precomputed interior values (indexed by unknown order).
    pub fn from_interior_values(
        scaffold: Arc<GridScaffold>,
        interior_nodes: &[usize],
        interior_values: &[f64],
    ) -> Self {
        let mut gf = Self::zeros(scaffold);
        for (&node, &v) in interior_nodes.iter().zip(interior_values) {
            gf.values[node] = v;
        }
        gf
    }

    pub fn scaffold(&self) -> &Arc<GridScaffold> {
        &self.scaffold
    }

    pub fn grid(&self) -> &Grid {
        &self.scaffold.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_value(&self, i: usize, j: usize) -> f64 {
        self.values[self.scaffold.grid.index(i, j)]
    }

    pub fn set_interior(&mut self, i: usize, j: usize, v: f64) {
        let idx = self.scaffold.grid.index(i, j);
        if self.scaffold.inside[idx] {
            self.values[idx] = v;
        }
    }

    /// Bilinear evaluation; identically zero outside the grid box (which
    /// contains the domain, so outside the domain bounding box too).
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let grid = &self.scaffold.grid;
        let fx = (x[0] - grid.lo[0]) / grid.h;
        if fx < 0.0 || fx > (grid.nodes[0] - 1) as f64 {
            return 0.0;
        }
        let i0 = (fx.floor() as usize).min(grid.nodes[0].saturating_sub(2));
        let tx = fx - i0 as f64;
        if grid.dim == 1 {
            let a = self.values[grid.index(i0, 0)];
            let b = self.values[grid.index((i0 + 1).min(grid.nodes[0] - 1), 0)];
            return a + tx * (b - a);
        }
        let fy = (x[1] - grid.lo[1]) / grid.h;
        if fy < 0.0 || fy > (grid.nodes[1] - 1) as f64 {
            return 0.0;
        }
        let j0 = (fy.floor() as usize).min(grid.nodes[1].saturating_sub(2));
        let ty = fy - j0 as f64;
        let i1 = (i0 + 1).min(grid.nodes[0] - 1);
        let j1 = (j0 + 1).min(grid.nodes[1] - 1);
        let v00 = self.values[grid.index(i0, j0)];
        let v10 = self.values[grid.index(i1, j0)];
        let v01 = self.values[grid.index(i0, j1)];
        let v11 = self.values[grid.index(i1, j1)];
        v00 * (1.0 - tx) * (1.0 - ty)
            + v10 * tx * (1.0 - ty)
            + v01 * (1.0 - tx) * ty
            + v11 * tx * ty
    }

    /// Centered-difference gradient at an arbitrary point (step `h`).
    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let h = self.scaffold.grid.h;
        let gx = (self.eval([x[0] + h, x[1]]) - self.eval([x[0] - h, x[1]])) / (2.0 * h);
        let gy = if self.scaffold.grid.dim == 1 {
            0.0
        } else {
            (self.eval([x[0], x[1] + h]) - self.eval([x[0], x[1] - h])) / (2.0 * h)
        };
        [gx, gy]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, &v| m.max(v.abs()))
    }

    /// Scale all values in place (used by the scaling invariants).
    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}
