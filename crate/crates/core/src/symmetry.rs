//! Slice-wise ball symmetrization of bodies in `ℝ^n × ℝ^s` with respect to
//! `{y = 0}`.
//!
//! Each slice `C(x̄) = {y : (x̄, y) ∈ C}` is replaced by the discrete ball
//! made of the same number of fiber cells, taken in order of increasing
//! `|y|²` and then lexicographically. Fiber cells of the result are centered
//! at `y = l * spacing`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{unit_ball_measure, Cell, VoxelJson, VoxelSet};
use crate::error::{domain, Error, Result};
use crate::gridfn::GridFunction;
use crate::hull::{hull2d, hull3d, polygon_contains};
use crate::MAX_DIM;

/// A voxel body whose first `n_split` axes are the base and the remaining
/// axes the fiber.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitBody {
    pub voxels: VoxelSet,
    pub n_split: usize,
}

impl SplitBody {
    pub fn new(voxels: VoxelSet, n_split: usize) -> Result<Self> {
        if n_split == 0 || n_split >= voxels.dim() {
            return domain(format!(
                "n_split must lie in 1..{}, got {n_split}",
                voxels.dim()
            ));
        }
        Ok(Self { voxels, n_split })
    }

    pub fn fiber_dim(&self) -> usize {
        self.voxels.dim() - self.n_split
    }
}

impl Serialize for SplitBody {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        VoxelJson::from_set(&self.voxels, Some(self.n_split)).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for SplitBody {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let (voxels, n_split) = VoxelJson::deserialize(de)?.into_set().map_err(D::Error::custom)?;
        let n_split = n_split.ok_or_else(|| D::Error::custom("missing n_split"))?;
        SplitBody::new(voxels, n_split).map_err(D::Error::custom)
    }
}

fn slice_key(c: &Cell, n: usize) -> Cell {
    let mut key: Cell = [0; MAX_DIM];
    key[..n].copy_from_slice(&c[..n]);
    key
}

/// `r_C(x̄) = (|C(x̄)| / ω_s)^{1/s}` for the slice at base index `x̄`.
pub fn slice_radius(c: &SplitBody, x: &[i64]) -> f64 {
    let n = c.n_split;
    let s = c.fiber_dim();
    let count = c
        .voxels
        .cells()
        .iter()
        .filter(|cell| cell[..n] == x[..n])
        .count();
    radius_of_count(count, c.voxels.spacing(), s)
}

fn radius_of_count(count: usize, h: f64, s: usize) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let measure = count as f64 * h.powi(s as i32);
    (measure / unit_ball_measure(s as f64)).powf(1.0 / s as f64)
}

/// The first `count` fiber cells in symmetrization order.
fn ball_order(s: usize, count: usize) -> Vec<[i64; MAX_DIM]> {
    if count == 0 {
        return Vec::new();
    }
    // Radius whose cube certainly holds `count` lattice points of the ball.
    let mut reach = 0i64;
    loop {
        let inside = ball_points(s, reach);
        if inside.len() >= count {
            let mut pts = inside;
            pts.sort_unstable_by_key(|y| (y.iter().map(|v| v * v).sum::<i64>(), *y));
            pts.truncate(count);
            return pts;
        }
        reach = (reach * 2).max(1);
    }
}

/// Lattice points with `|y|² ≤ reach²`.
fn ball_points(s: usize, reach: i64) -> Vec<[i64; MAX_DIM]> {
    let mut out = Vec::new();
    let mut y = [0i64; MAX_DIM];
    y[..s].fill(-reach);
    loop {
        if y[..s].iter().map(|v| v * v).sum::<i64>() <= reach * reach {
            out.push(y);
        }
        let mut a = s;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            y[a] += 1;
            if y[a] <= reach {
                break;
            }
            y[a] = -reach;
        }
    }
}

/// Replaces each slice by the centered discrete ball with the same cell count.
pub fn s_symmetrize(c: &SplitBody) -> Result<SplitBody> {
    let n = c.n_split;
    let s = c.fiber_dim();
    let cells = c.voxels.cells();
    let mut slices: Vec<(Cell, usize)> = Vec::new();
    for cell in cells {
        let key = slice_key(cell, n);
        match slices.last_mut() {
            Some((k, count)) if *k == key => *count += 1,
            _ => slices.push((key, 1)),
        }
    }
    let largest = slices.iter().map(|p| p.1).max().unwrap_or(0);
    let order = ball_order(s, largest);
    let out: Vec<Cell> = slices
        .par_iter()
        .flat_map_iter(|(key, count)| {
            order[..*count].iter().map(move |y| {
                let mut cell = *key;
                cell[n..n + s].copy_from_slice(&y[..s]);
                cell
            })
        })
        .collect();
    let mut origin = c.voxels.origin().to_vec();
    origin[n..].fill(0.0);
    SplitBody::new(VoxelSet::from_cells(origin, c.voxels.spacing(), out)?, n)
}

fn is_symmetric(c: &SplitBody) -> Result<bool> {
    if c.voxels.origin()[c.n_split..].iter().any(|&o| o != 0.0) {
        return Ok(false);
    }
    Ok(s_symmetrize(c)?.voxels.cells() == c.voxels.cells())
}

/// `u(x̄) = r_C(x̄)^s = |C(x̄)| / ω_s` on the base of a symmetric body.
pub fn body_from_symmetric(c: &SplitBody) -> Result<GridFunction> {
    if !is_symmetric(c)? {
        return domain("body is not symmetric about {y = 0}");
    }
    let n = c.n_split;
    let s = c.fiber_dim();
    let h = c.voxels.spacing();
    let origin = c.voxels.origin()[..n].to_vec();
    let Some((lo, hi)) = c.voxels.bounds() else {
        return GridFunction::zeros(origin, h, vec![1; n]);
    };
    let shape: Vec<usize> = (0..n).map(|a| (hi[a] - lo[a] + 1) as usize).collect();
    let start: Vec<f64> = (0..n).map(|a| origin[a] + lo[a] as f64 * h).collect();
    let mut out = GridFunction::zeros(start, h, shape)?;
    let mut values = out.values().to_vec();
    let cell_measure = h.powi(s as i32) / unit_ball_measure(s as f64);
    for cell in c.voxels.cells() {
        let idx: Vec<usize> = (0..n).map(|a| (cell[a] - lo[a]) as usize).collect();
        values[out.ravel(&idx)] += cell_measure;
    }
    out = GridFunction::new(out.origin().to_vec(), h, out.shape().to_vec(), values)?;
    Ok(out)
}

/// Number of lattice cells inside the convex hull of the occupied cell
/// centers that are missing from the set and whose every Chebyshev neighbour
/// is also inside the hull. Zero means the set is convex up to a boundary
/// shell of one cell.
pub fn hull_shell_defect(v: &VoxelSet) -> Result<usize> {
    let m = v.dim();
    let Some((lo, hi)) = v.bounds() else {
        return Ok(0);
    };
    let inside: Box<dyn Fn(&Cell) -> bool> = match m {
        1 => Box::new(move |c: &Cell| c[0] >= lo[0] && c[0] <= hi[0]),
        2 => {
            let pts: Vec<[i64; 2]> = v.cells().iter().map(|c| [c[0], c[1]]).collect();
            let hull = hull2d(&pts);
            Box::new(move |c: &Cell| polygon_contains(&hull, [c[0], c[1]]))
        }
        3 => {
            let pts: Vec<[i64; 3]> = v.cells().iter().map(|c| [c[0], c[1], c[2]]).collect();
            match hull3d(&pts) {
                Some(hull) => Box::new(move |c: &Cell| hull.contains([c[0], c[1], c[2]])),
                // Flat bodies: every cell lies on the boundary.
                None => return Ok(0),
            }
        }
        _ => return Err(Error::Unsupported(format!("convexity test for dimension {m}"))),
    };
    let mut defect = 0;
    let mut cell: Cell = [0; MAX_DIM];
    cell[..m].copy_from_slice(&lo[..m]);
    loop {
        if !v.contains(&cell) && inside(&cell) && neighbours_inside(&cell, m, &inside) {
            defect += 1;
        }
        let mut a = m;
        loop {
            if a == 0 {
                return Ok(defect);
            }
            a -= 1;
            cell[a] += 1;
            if cell[a] <= hi[a] {
                break;
            }
            cell[a] = lo[a];
        }
    }
}

fn neighbours_inside(c: &Cell, m: usize, inside: &dyn Fn(&Cell) -> bool) -> bool {
    let total = 3usize.pow(m as u32);
    (0..total).all(|mut t| {
        let mut nb = *c;
        for a in 0..m {
            nb[a] += (t % 3) as i64 - 1;
            t /= 3;
        }
        inside(&nb)
    })
}
