//! Voxel sets, Minkowski combinations, Brunn-Minkowski deficits and the
//! lifted bodies `K_{f,s}` and `W_{f,s}` of a grid function.
//!
//! A voxel set is a finite union of closed cubes of side `spacing`; cell `c`
//! is the cube centered at `origin + c * spacing`. Minkowski combinations of
//! such unions are again unions of cubes on the lattice refined by the
//! denominator of `λ`, so the set arithmetic is exact integer arithmetic.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU8, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gridfn::GridFunction;
use crate::rational::{ConcavityIndex, RationalWeight};
use crate::MAX_DIM;

/// Integer cell coordinates; entries past the set's dimension are zero.
pub type Cell = [i64; MAX_DIM];

/// Largest denominator of `λ` accepted for lattice refinement.
pub const MAX_REFINEMENT: u32 = 16;

/// Upper bound on the bounding-box cell count of a Minkowski combination.
pub const MAX_COMBINATION_BOX: usize = 1 << 27;

#[derive(Clone, Debug, PartialEq)]
pub struct VoxelSet {
    origin: Vec<f64>,
    spacing: f64,
    cells: Vec<Cell>,
}

impl VoxelSet {
    pub fn from_cells(origin: Vec<f64>, spacing: f64, mut cells: Vec<Cell>) -> Result<Self> {
        let dim = origin.len();
        if dim == 0 || dim > MAX_DIM {
            return domain(format!("voxel dimension must be in 1..={MAX_DIM}, got {dim}"));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return domain(format!("voxel spacing must be positive, got {spacing}"));
        }
        if origin.iter().any(|v| !v.is_finite()) {
            return domain("voxel origin must be finite");
        }
        for c in cells.iter_mut() {
            c[dim..].fill(0);
        }
        cells.sort_unstable();
        cells.dedup();
        Ok(Self { origin, spacing, cells })
    }

    pub fn empty(origin: Vec<f64>, spacing: f64) -> Result<Self> {
        Self::from_cells(origin, spacing, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Occupied cells in sorted order.
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn measure(&self) -> f64 {
        self.cells.len() as f64 * self.cell_volume()
    }

    pub fn contains(&self, cell: &Cell) -> bool {
        self.cells.binary_search(cell).is_ok()
    }

    pub fn center(&self, cell: &Cell) -> Vec<f64> {
        (0..self.dim()).map(|a| self.origin[a] + cell[a] as f64 * self.spacing).collect()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.cells.iter().all(|c| other.contains(c))
    }

    /// Inclusive per-axis index bounds, `None` for the empty set.
    pub fn bounds(&self) -> Option<(Cell, Cell)> {
        let first = self.cells.first()?;
        let (mut lo, mut hi) = (*first, *first);
        for c in &self.cells {
            for a in 0..self.dim() {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        Some((lo, hi))
    }

    /// Splits every cell into `factor^m` congruent subcells.
    pub fn refine(&self, factor: u32) -> Result<Self> {
        if factor == 0 {
            return domain("refinement factor must be positive");
        }
        let f = factor as i64;
        let m = self.dim();
        let h = self.spacing / factor as f64;
        let shift = (factor as f64 - 1.0) / 2.0 * h;
        let origin = self.origin.iter().map(|o| o - shift).collect();
        let sub = (factor as usize).pow(m as u32);
        let mut cells = Vec::with_capacity(self.cells.len() * sub);
        for c in &self.cells {
            for t in 0..sub {
                let mut r = t;
                let mut out: Cell = [0; MAX_DIM];
                for a in (0..m).rev() {
                    out[a] = c[a] * f + (r % factor as usize) as i64;
                    r /= factor as usize;
                }
                cells.push(out);
            }
        }
        Self::from_cells(origin, h, cells)
    }

    /// Integer offset `(other.origin - self.origin) / spacing`, if any.
    fn offset_to(&self, other: &Self) -> Option<Cell> {
        let mut off: Cell = [0; MAX_DIM];
        for a in 0..self.dim() {
            let t = (other.origin[a] - self.origin[a]) / self.spacing;
            let r = t.round();
            if (t - r).abs() > 1e-6 {
                return None;
            }
            off[a] = r as i64;
        }
        Some(off)
    }

    /// Re-expresses both sets on one lattice. A coarser set whose spacing is
    /// an integer multiple of the finer one is refined first; lattices offset
    /// by half a cell are refined by two.
    fn common_lattice(&self, other: &Self) -> Result<(Self, Self)> {
        if self.dim() != other.dim() {
            return Err(Error::Alignment("voxel sets differ in dimension".into()));
        }
        let ratio = |coarse: f64, fine: f64| -> Option<u32> {
            let r = (coarse / fine).round();
            ((coarse / fine - r).abs() <= 1e-9 * r && r >= 1.0 && r <= MAX_REFINEMENT as f64)
                .then_some(r as u32)
        };
        let (a, b) = if let Some(r) = ratio(self.spacing, other.spacing) {
            (self.refine(r)?, other.clone())
        } else if let Some(r) = ratio(other.spacing, self.spacing) {
            (self.clone(), other.refine(r)?)
        } else {
            return Err(Error::Alignment(format!(
                "voxel spacings differ: {} vs {}",
                self.spacing, other.spacing
            )));
        };
        let (a, b) = match a.offset_to(&b) {
            Some(_) => (a, b),
            None => (a.refine(2)?, b.refine(2)?),
        };
        let off = a
            .offset_to(&b)
            .ok_or_else(|| Error::Alignment("voxel lattices are not commensurate".into()))?;
        let m = a.dim();
        let moved = b
            .cells
            .iter()
            .map(|c| {
                let mut out = *c;
                for k in 0..m {
                    out[k] += off[k];
                }
                out
            })
            .collect();
        let b = Self::from_cells(a.origin.clone(), a.spacing, moved)?;
        Ok((a, b))
    }

    /// `|A Δ B|` after bringing both sets onto a common lattice.
    pub fn symmetric_difference_measure(&self, other: &Self) -> Result<f64> {
        let (a, b) = self.common_lattice(other)?;
        let only_a = a.cells.iter().filter(|c| !b.contains(c)).count();
        let only_b = b.cells.iter().filter(|c| !a.contains(c)).count();
        Ok((only_a + only_b) as f64 * a.cell_volume())
    }

    /// Cells of `self` missing from `other`, on a common lattice.
    pub fn difference_count(&self, other: &Self) -> Result<usize> {
        let (a, b) = self.common_lattice(other)?;
        Ok(a.cells.iter().filter(|c| !b.contains(c)).count())
    }

    /// Occupied-cell counts per slice `{x fixed}` where `x` is the first
    /// `n_split` coordinates.
    pub fn slice_counts(&self, n_split: usize) -> BTreeMap<Cell, usize> {
        let mut out = BTreeMap::new();
        for c in &self.cells {
            let mut key: Cell = [0; MAX_DIM];
            key[..n_split].copy_from_slice(&c[..n_split]);
            *out.entry(key).or_insert(0) += 1;
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct VoxelJson {
    pub dim: usize,
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub cells: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_split: Option<usize>,
}

impl VoxelJson {
    pub(crate) fn from_set(v: &VoxelSet, n_split: Option<usize>) -> Self {
        let m = v.dim();
        VoxelJson {
            dim: m,
            origin: v.origin.clone(),
            spacing: v.spacing,
            cells: v.cells.iter().map(|c| c[..m].to_vec()).collect(),
            n_split,
        }
    }

    pub(crate) fn into_set(self) -> Result<(VoxelSet, Option<usize>)> {
        if self.dim != self.origin.len() {
            return Err(Error::Format(format!(
                "dim = {} but origin has {} entries",
                self.dim,
                self.origin.len()
            )));
        }
        let mut cells = Vec::with_capacity(self.cells.len());
        for c in &self.cells {
            if c.len() != self.dim {
                return Err(Error::Format(format!("cell {c:?} does not have {} coordinates", self.dim)));
            }
            let mut cell: Cell = [0; MAX_DIM];
            cell[..self.dim].copy_from_slice(c);
            cells.push(cell);
        }
        Ok((VoxelSet::from_cells(self.origin, self.spacing, cells)?, self.n_split))
    }
}

impl Serialize for VoxelSet {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        VoxelJson::from_set(self, None).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for VoxelSet {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = VoxelJson::deserialize(de)?;
        raw.into_set().map(|(v, _)| v).map_err(D::Error::custom)
    }
}

/// How a lifted body was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiftSource {
    GraphLift,
    ProductLift,
}

/// A body in `ℝ^{n_split} × ℝ^{fiber_dim}` whose fibers are centered balls.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedBody {
    pub voxels: VoxelSet,
    pub n_split: usize,
    pub fiber_dim: usize,
    pub source: LiftSource,
}

/// Volume `ω_s = π^{s/2} / Γ(s/2 + 1)` of the unit ball in dimension `s`.
pub fn unit_ball_measure(s: f64) -> f64 {
    if s == s.floor() && s <= 64.0 {
        let k = s as u32;
        let (mut w, start) = if k % 2 == 0 { (1.0, 2) } else { (2.0, 3) };
        let mut j = start;
        while j <= k {
            w *= 2.0 * std::f64::consts::PI / j as f64;
            j += 2;
        }
        return w;
    }
    std::f64::consts::PI.powf(s / 2.0) / libm::tgamma(s / 2.0 + 1.0)
}

/// Relative slack on the ball test so that samples lying exactly on a fiber
/// boundary are kept despite rounding in `f^{1/s}`.
const BALL_SLACK: f64 = 1e-12;

/// `K_{f,s}`: cell `(x, y)` is occupied iff `x` is in the support and the
/// fiber center satisfies `|y| ≤ f(x)^{1/s}`. Fiber cells share the grid
/// spacing and are centered on `y = 0`.
pub fn lift_graph(f: &GridFunction, s: u32) -> Result<LiftedBody> {
    lift_graph_with_limit(f, s, MAX_DIM)
}

pub fn lift_graph_with_limit(f: &GridFunction, s: u32, max_dim: usize) -> Result<LiftedBody> {
    let n = f.dim();
    let s_us = s as usize;
    if s == 0 {
        return domain("fiber dimension must be positive");
    }
    if n + s_us > max_dim.min(MAX_DIM) {
        return Err(Error::Capacity(format!(
            "lifting a {n}-dimensional function with s = {s} exceeds dimension {max_dim}"
        )));
    }
    let h = f.spacing();
    let mut cells = Vec::new();
    let mut idx = vec![0usize; n];
    let inv_s = 1.0 / s as f64;
    for (flat, &v) in f.values().iter().enumerate() {
        if !f.is_supported(v) {
            continue;
        }
        f.unravel_into(flat, &mut idx);
        let r = v.powf(inv_s) / h;
        let r2 = r * r * (1.0 + BALL_SLACK);
        let reach = r2.sqrt().floor() as i64;
        let mut base: Cell = [0; MAX_DIM];
        for a in 0..n {
            base[a] = idx[a] as i64;
        }
        for_each_in_ball(s_us, reach, r2, |y| {
            let mut c = base;
            c[n..n + s_us].copy_from_slice(y);
            cells.push(c);
        });
    }
    let mut origin = f.origin().to_vec();
    origin.extend(std::iter::repeat_n(0.0, s_us));
    Ok(LiftedBody {
        voxels: VoxelSet::from_cells(origin, h, cells)?,
        n_split: n,
        fiber_dim: s_us,
        source: LiftSource::GraphLift,
    })
}

/// Calls `visit` for every integer vector `y` in `[-reach, reach]^dim` with
/// `|y|² ≤ r2`.
fn for_each_in_ball(dim: usize, reach: i64, r2: f64, mut visit: impl FnMut(&[i64])) {
    let mut y = vec![-reach; dim];
    if reach < 0 {
        return;
    }
    loop {
        let norm2: i64 = y.iter().map(|v| v * v).sum();
        if norm2 as f64 <= r2 {
            visit(&y);
        }
        let mut a = dim;
        loop {
            if a == 0 {
                return;
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

/// `W_{f,s} = K_{f̃,p}` for `s = p/q`, where `f̃` is the q-fold product lift.
pub fn lift_product(f: &GridFunction, s: ConcavityIndex) -> Result<LiftedBody> {
    let (p, q) = s
        .fraction()
        .ok_or_else(|| Error::Domain(format!("product lift needs a rational index, got {s}")))?;
    let n = f.dim();
    if n * q as usize + p as usize > MAX_DIM {
        return Err(Error::Capacity(format!(
            "product lift for n = {n}, s = {p}/{q} needs dimension {} > {MAX_DIM}",
            n * q as usize + p as usize
        )));
    }
    let lifted = f.product_lift(q as usize)?;
    let mut body = lift_graph(&lifted, p)?;
    if q > 1 {
        body.source = LiftSource::ProductLift;
    }
    Ok(body)
}

fn check_combinable(a: &VoxelSet, b: &VoxelSet, lambda: RationalWeight) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Alignment("voxel sets differ in dimension".into()));
    }
    if (a.spacing - b.spacing).abs() > 1e-12 * a.spacing {
        return Err(Error::Alignment(format!(
            "voxel spacings differ: {} vs {}",
            a.spacing, b.spacing
        )));
    }
    if lambda.den() > MAX_REFINEMENT {
        return Err(Error::Capacity(format!(
            "weight denominator {} exceeds the refinement cap {MAX_REFINEMENT}",
            lambda.den()
        )));
    }
    Ok(())
}

/// Sumset of lattice points `(k-j) c_a + j c_b` in units of `h/k`, optionally
/// dilated by the `k`-cube so every pair contributes the full combined cube.
fn combine_lattice(a: &VoxelSet, b: &VoxelSet, lambda: RationalWeight, solid: bool) -> Result<VoxelSet> {
    check_combinable(a, b, lambda)?;
    let m = a.dim();
    let k = lambda.den() as i64;
    let (wa, wb) = (lambda.complement_num() as i64, lambda.num() as i64);
    let h = a.spacing / k as f64;
    let shift = if solid { (k as f64 - 1.0) / 2.0 * h } else { 0.0 };
    let origin: Vec<f64> = (0..m)
        .map(|i| lambda.complement() * a.origin[i] + lambda.value() * b.origin[i] - shift)
        .collect();
    let (Some((lo_a, hi_a)), Some((lo_b, hi_b))) = (a.bounds(), b.bounds()) else {
        return VoxelSet::empty(origin, h);
    };
    let pad = if solid { k - 1 } else { 0 };
    let mut lo: Cell = [0; MAX_DIM];
    let mut extent = [1usize; MAX_DIM];
    let mut total = 1usize;
    for i in 0..m {
        lo[i] = wa * lo_a[i] + wb * lo_b[i];
        let hi = wa * hi_a[i] + wb * hi_b[i] + pad;
        extent[i] = (hi - lo[i] + 1) as usize;
        total = total
            .checked_mul(extent[i])
            .filter(|&t| t <= MAX_COMBINATION_BOX)
            .ok_or_else(|| Error::Capacity("Minkowski combination bounding box is too large".into()))?;
    }
    let mut strides = [0usize; MAX_DIM];
    let mut acc = 1;
    for i in (0..m).rev() {
        strides[i] = acc;
        acc *= extent[i];
    }
    let marks: Vec<AtomicU8> = (0..total).map(|_| AtomicU8::new(0)).collect();
    a.cells.par_iter().for_each(|ca| {
        let mut base = 0usize;
        for i in 0..m {
            base += ((wa * (ca[i] - lo_a[i])) as usize) * strides[i];
        }
        for cb in &b.cells {
            let mut flat = base;
            for i in 0..m {
                flat += ((wb * (cb[i] - lo_b[i])) as usize) * strides[i];
            }
            marks[flat].store(1, Ordering::Relaxed);
        }
    });
    let mut grid: Vec<u8> = marks.into_iter().map(AtomicU8::into_inner).collect();
    if solid {
        for axis in 0..m {
            dilate_forward(&mut grid, &extent[..m], axis, (k - 1) as usize);
        }
    }
    let mut cells = Vec::new();
    for (flat, &v) in grid.iter().enumerate() {
        if v != 0 {
            let mut rem = flat;
            let mut c: Cell = [0; MAX_DIM];
            for i in (0..m).rev() {
                c[i] = lo[i] + (rem % extent[i]) as i64;
                rem /= extent[i];
            }
            cells.push(c);
        }
    }
    VoxelSet::from_cells(origin, h, cells)
}

/// Sets cell `i` whenever any of cells `i - width ..= i` along `axis` is set.
fn dilate_forward(grid: &mut [u8], extent: &[usize], axis: usize, width: usize) {
    if width == 0 {
        return;
    }
    let stride: usize = extent[axis + 1..].iter().product();
    let len = extent[axis];
    let outer: usize = extent[..axis].iter().product();
    let mut line = vec![0u8; len];
    for o in 0..outer {
        for inner in 0..stride {
            let base = o * len * stride + inner;
            for (t, slot) in line.iter_mut().enumerate() {
                *slot = grid[base + t * stride];
            }
            let mut last_set: Option<usize> = None;
            for (t, &v) in line.iter().enumerate() {
                if v != 0 {
                    last_set = Some(t);
                }
                if let Some(ls) = last_set {
                    if t - ls <= width {
                        grid[base + t * stride] = 1;
                    }
                }
            }
        }
    }
}

/// `(1-λ)A + λB` for unions of closed cubes, computed exactly on the lattice
/// of spacing `h/k`.
pub fn minkowski_combine(a: &VoxelSet, b: &VoxelSet, lambda: RationalWeight) -> Result<VoxelSet> {
    combine_lattice(a, b, lambda, true)
}

/// `{(1-λ)c_a + λc_b}` over cell centers only, on the lattice of spacing
/// `h/k` anchored at `(1-λ)origin_A + λ origin_B`.
pub fn minkowski_combine_centers(a: &VoxelSet, b: &VoxelSet, lambda: RationalWeight) -> Result<VoxelSet> {
    combine_lattice(a, b, lambda, false)
}

/// Result of [`bm_deficit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmDeficit {
    pub measure_a: f64,
    pub measure_b: f64,
    pub measure_s: f64,
    pub rhs: f64,
    pub delta: f64,
}

fn bm_rhs(ma: f64, mb: f64, lambda: RationalWeight, m: usize) -> f64 {
    let e = 1.0 / m as f64;
    (lambda.complement() * ma.powf(e) + lambda.value() * mb.powf(e)).powi(m as i32)
}

/// Relative Brunn-Minkowski excess `δ = (|S| - rhs)/rhs` with
/// `S = (1-λ)A + λB` and `rhs = ((1-λ)|A|^{1/m} + λ|B|^{1/m})^m`.
pub fn bm_deficit(a: &VoxelSet, b: &VoxelSet, lambda: RationalWeight) -> Result<BmDeficit> {
    if a.is_empty() || b.is_empty() {
        return domain("Brunn-Minkowski deficit needs nonempty sets");
    }
    let s = minkowski_combine(a, b, lambda)?;
    let (ma, mb, ms) = (a.measure(), b.measure(), s.measure());
    let rhs = bm_rhs(ma, mb, lambda, a.dim());
    Ok(BmDeficit { measure_a: ma, measure_b: mb, measure_s: ms, rhs, delta: (ms - rhs) / rhs })
}

/// Unit-volume rescalings of two bodies.
#[derive(Clone, Debug)]
pub struct NormalizedBodies {
    /// `A / |A|^{1/m}`, rasterized on the lattice of the input spacing.
    pub a: VoxelSet,
    pub b: VoxelSet,
    /// Exact factors `|A|^{-1/m}` and `|B|^{-1/m}`.
    pub scale_a: f64,
    pub scale_b: f64,
    /// `(1-λ)|A|^{1/m} / ((1-λ)|A|^{1/m} + λ|B|^{1/m})`.
    pub mu: f64,
}

impl NormalizedBodies {
    /// `|S̃|` where `S̃ = (1-μ)Ã + μB̃ = S / ((1-λ)|A|^{1/m} + λ|B|^{1/m})`,
    /// evaluated with the exact scale factors.
    pub fn combined_measure(&self, s_measure: f64, lambda: RationalWeight, m: usize) -> f64 {
        let t = lambda.complement() / self.scale_a + lambda.value() / self.scale_b;
        s_measure / t.powi(m as i32)
    }
}

fn rescale(set: &VoxelSet, factor: f64) -> Result<VoxelSet> {
    let m = set.dim();
    let origin: Vec<f64> = set.origin.iter().map(|o| o * factor).collect();
    let Some((lo, hi)) = set.bounds() else {
        return VoxelSet::empty(origin, set.spacing);
    };
    // Target cell i has center factor*origin + i*h; its preimage sits at
    // origin + (i/factor)*h, i.e. source index round(i/factor).
    let mut tlo: Cell = [0; MAX_DIM];
    let mut text = [1usize; MAX_DIM];
    for a in 0..m {
        tlo[a] = ((lo[a] as f64 - 1.0) * factor).floor() as i64;
        let thi = ((hi[a] as f64 + 1.0) * factor).ceil() as i64;
        text[a] = (thi - tlo[a] + 1) as usize;
    }
    let total: usize = text[..m].iter().product();
    if total > MAX_COMBINATION_BOX {
        return Err(Error::Capacity("rescaled body is too large".into()));
    }
    let mut cells = Vec::new();
    for flat in 0..total {
        let mut rem = flat;
        let mut t: Cell = [0; MAX_DIM];
        let mut src: Cell = [0; MAX_DIM];
        for a in (0..m).rev() {
            t[a] = tlo[a] + (rem % text[a]) as i64;
            rem /= text[a];
            src[a] = (t[a] as f64 / factor).round() as i64;
        }
        if set.contains(&src) {
            cells.push(t);
        }
    }
    VoxelSet::from_cells(origin, set.spacing, cells)
}

/// Rescales `A` and `B` to unit measure and reports the combination weight
/// `μ` under which `S̃ = (1-μ)Ã + μB̃` is the normalized combination.
pub fn normalize_bodies(a: &VoxelSet, b: &VoxelSet, lambda: RationalWeight) -> Result<NormalizedBodies> {
    if a.is_empty() || b.is_empty() {
        return domain("normalization needs nonempty sets");
    }
    let m = a.dim() as f64;
    let ra = a.measure().powf(1.0 / m);
    let rb = b.measure().powf(1.0 / m);
    let mu = lambda.complement() * ra / (lambda.complement() * ra + lambda.value() * rb);
    let (scale_a, scale_b) = (1.0 / ra, 1.0 / rb);
    let na = if scale_a == 1.0 { a.clone() } else { rescale(a, scale_a)? };
    let nb = if scale_b == 1.0 { b.clone() } else { rescale(b, scale_b)? };
    Ok(NormalizedBodies { a: na, b: nb, scale_a, scale_b, mu })
}
