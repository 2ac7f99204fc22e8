//! Compactly supported nonnegative functions sampled on uniform grids.
//!
//! Sample `i` (a multi-index) sits at the cell center `origin + i * spacing`
//! and the function is piecewise constant on the cube of side `spacing`
//! around it. Values are stored row-major, last axis fastest.

use serde::{Deserialize, Serialize};

use crate::bodies::{Cell, VoxelSet};
use crate::error::{domain, Error, Result};
use crate::sum::pairwise_sum;
use crate::MAX_DIM;

/// Values at or below this are treated as outside the support.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-12;

/// Upper bound on the number of samples a single grid may hold.
pub const MAX_CELLS: usize = 1 << 26;

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    origin: Vec<f64>,
    spacing: f64,
    shape: Vec<usize>,
    values: Vec<f64>,
    zero_threshold: f64,
}

fn cell_count(shape: &[usize]) -> Result<usize> {
    shape
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .filter(|&n| n <= MAX_CELLS)
        .ok_or_else(|| Error::Capacity(format!("grid of shape {shape:?} is too large")))
}

impl GridFunction {
    pub fn new(origin: Vec<f64>, spacing: f64, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let dim = shape.len();
        if dim == 0 || dim > MAX_DIM {
            return domain(format!("grid dimension must be in 1..={MAX_DIM}, got {dim}"));
        }
        if origin.len() != dim {
            return domain(format!("origin has {} entries for a {dim}-dimensional grid", origin.len()));
        }
        if origin.iter().any(|v| !v.is_finite()) {
            return domain("grid origin must be finite");
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return domain(format!("grid spacing must be positive, got {spacing}"));
        }
        if shape.contains(&0) {
            return domain(format!("grid shape entries must be positive, got {shape:?}"));
        }
        let n = cell_count(&shape)?;
        if values.len() != n {
            return domain(format!("grid of shape {shape:?} needs {n} values, got {}", values.len()));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return domain(format!("grid values must be finite and nonnegative, found {bad}"));
        }
        Ok(Self { origin, spacing, shape, values, zero_threshold: DEFAULT_ZERO_THRESHOLD })
    }

    pub fn zeros(origin: Vec<f64>, spacing: f64, shape: Vec<usize>) -> Result<Self> {
        let n = cell_count(&shape)?;
        Self::new(origin, spacing, shape, vec![0.0; n])
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(
        origin: Vec<f64>,
        spacing: f64,
        shape: Vec<usize>,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let mut g = Self::zeros(origin, spacing, shape)?;
        let mut x = vec![0.0; g.dim()];
        for flat in 0..g.values.len() {
            g.center_into(flat, &mut x);
            g.values[flat] = f(&x);
        }
        Self::new(g.origin, g.spacing, g.shape, g.values)
    }

    /// Samples `f` on the grid of spacing `h` whose cells tile the box
    /// `[lo, hi]` (one cell per `h` along each axis, centers at `lo + (i+1/2)h`).
    pub fn sample_box(lo: &[f64], hi: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let shape: Vec<usize> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (((b - a) / h).round() as usize).max(1))
            .collect();
        let origin = lo.iter().map(|a| a + 0.5 * h).collect();
        Self::from_fn(origin, h, shape, f)
    }

    pub fn with_zero_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold.is_finite() && threshold >= 0.0) {
            return domain("zero threshold must be finite and nonnegative");
        }
        self.zero_threshold = threshold;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_threshold(&self) -> f64 {
        self.zero_threshold
    }

    #[inline]
    pub fn is_supported(&self, v: f64) -> bool {
        v > self.zero_threshold
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Multi-index of a flat position.
    pub fn unravel_into(&self, mut flat: usize, idx: &mut [usize]) {
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % self.shape[axis];
            flat /= self.shape[axis];
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn center_into(&self, flat: usize, x: &mut [f64]) {
        let mut rem = flat;
        for axis in (0..self.dim()).rev() {
            let i = rem % self.shape[axis];
            rem /= self.shape[axis];
            x[axis] = self.origin[axis] + i as f64 * self.spacing;
        }
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.center_into(flat, &mut x);
        x
    }

    /// Value at a (possibly out-of-range) integer index; zero outside the grid.
    pub fn get(&self, idx: &[i64]) -> f64 {
        let mut flat = 0usize;
        for (axis, &i) in idx.iter().enumerate() {
            if i < 0 || i as usize >= self.shape[axis] {
                return 0.0;
            }
            flat = flat * self.shape[axis] + i as usize;
        }
        self.values[flat]
    }

    /// Value of the piecewise-constant extension at a point.
    pub fn value_at_point(&self, x: &[f64]) -> f64 {
        let mut idx = [0i64; MAX_DIM];
        for axis in 0..self.dim() {
            idx[axis] = ((x[axis] - self.origin[axis]) / self.spacing).round() as i64;
        }
        self.get(&idx[..self.dim()])
    }

    /// Midpoint Riemann sum `spacing^n * Σ values`, pairwise-summed in
    /// row-major order.
    pub fn integrate(&self) -> f64 {
        pairwise_sum(&self.values) * self.spacing.powi(self.dim() as i32)
    }

    /// `v(x) = μ^s f((x - x̄)/μ)`, realised exactly by mapping the lattice:
    /// the new grid has spacing `μ h` and origin `x̄ + μ origin`.
    pub fn homothety(&self, mu: f64, shift: &[f64], s: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return domain(format!("homothety factor must be positive, got {mu}"));
        }
        if shift.len() != self.dim() {
            return domain("translation has the wrong dimension");
        }
        let scale = mu.powf(s);
        let origin = self.origin.iter().zip(shift).map(|(o, t)| t + mu * o).collect();
        let values = self.values.iter().map(|v| v * scale).collect();
        let out = Self::new(origin, self.spacing * mu, self.shape.clone(), values)?;
        Ok(Self { zero_threshold: self.zero_threshold, ..out })
    }

    /// `f̃(x_1, …, x_q) = ∏ f(x_j)` on the q-fold product grid.
    pub fn product_lift(&self, q: usize) -> Result<Self> {
        self.product_lift_with_limit(q, MAX_DIM)
    }

    pub fn product_lift_with_limit(&self, q: usize, max_dim: usize) -> Result<Self> {
        if q == 0 {
            return domain("product lift needs q >= 1");
        }
        let n = self.dim();
        if n * q > max_dim.min(MAX_DIM) {
            return Err(Error::Capacity(format!(
                "product lift of a {n}-dimensional grid with q = {q} exceeds dimension {max_dim}"
            )));
        }
        if q == 1 {
            return Ok(self.clone());
        }
        let origin: Vec<f64> = (0..q).flat_map(|_| self.origin.iter().copied()).collect();
        let shape: Vec<usize> = (0..q).flat_map(|_| self.shape.iter().copied()).collect();
        let m = self.values.len();
        let total = cell_count(&shape)?;
        let mut values = Vec::with_capacity(total);
        // Row-major over (x_1, …, x_q): the flat index is a base-m number.
        let mut digits = vec![0usize; q];
        for _ in 0..total {
            values.push(digits.iter().map(|&d| self.values[d]).product());
            for d in digits.iter_mut().rev() {
                *d += 1;
                if *d < m {
                    break;
                }
                *d = 0;
            }
        }
        let out = Self::new(origin, self.spacing, shape, values)?;
        Ok(Self { zero_threshold: self.zero_threshold, ..out })
    }

    /// Cells whose value exceeds the zero threshold.
    pub fn support_cells(&self) -> VoxelSet {
        let dim = self.dim();
        let mut idx = vec![0usize; dim];
        let mut cells = Vec::new();
        for (flat, &v) in self.values.iter().enumerate() {
            if self.is_supported(v) {
                self.unravel_into(flat, &mut idx);
                let mut c: Cell = [0; MAX_DIM];
                for (a, &i) in idx.iter().enumerate() {
                    c[a] = i as i64;
                }
                cells.push(c);
            }
        }
        VoxelSet::from_cells(self.origin.clone(), self.spacing, cells)
            .expect("grid geometry is already validated")
    }

    /// Integer lattice offset of `other.origin - self.origin`, when both grids
    /// share a spacing and their lattices coincide.
    pub fn lattice_offset(&self, other: &Self) -> Result<Vec<i64>> {
        if self.dim() != other.dim() {
            return Err(Error::Alignment("grids differ in dimension".into()));
        }
        let h = self.spacing;
        if (other.spacing - h).abs() > 1e-9 * h {
            return Err(Error::Alignment(format!(
                "grid spacings differ: {} vs {}",
                self.spacing, other.spacing
            )));
        }
        self.origin
            .iter()
            .zip(&other.origin)
            .map(|(a, b)| {
                let t = (b - a) / h;
                let r = t.round();
                if (t - r).abs() > 1e-6 {
                    Err(Error::Alignment(format!("grid origins are off-lattice by {t} cells")))
                } else {
                    Ok(r as i64)
                }
            })
            .collect()
    }

    /// Re-grids onto the aligned window starting `start` cells from the
    /// current origin with the given shape; samples outside the old grid are 0.
    pub fn window(&self, start: &[i64], shape: &[usize]) -> Result<Self> {
        let dim = self.dim();
        let origin = (0..dim).map(|a| self.origin[a] + start[a] as f64 * self.spacing).collect();
        let mut out = Self::zeros(origin, self.spacing, shape.to_vec())?;
        let mut idx = vec![0usize; dim];
        let mut src = vec![0i64; dim];
        for flat in 0..out.values.len() {
            out.unravel_into(flat, &mut idx);
            for a in 0..dim {
                src[a] = idx[a] as i64 + start[a];
            }
            out.values[flat] = self.get(&src);
        }
        out.zero_threshold = self.zero_threshold;
        Ok(out)
    }

    /// Places two aligned grids on their common bounding window.
    pub fn align_pair(a: &Self, b: &Self) -> Result<(Self, Self)> {
        let off = a.lattice_offset(b)?;
        let dim = a.dim();
        let mut start = vec![0i64; dim];
        let mut shape = vec![0usize; dim];
        for k in 0..dim {
            let lo = 0.min(off[k]);
            let hi = (a.shape[k] as i64).max(off[k] + b.shape[k] as i64);
            start[k] = lo;
            shape[k] = (hi - lo) as usize;
        }
        let wa = a.window(&start, &shape)?;
        let start_b: Vec<i64> = (0..dim).map(|k| start[k] - off[k]).collect();
        let mut wb = b.window(&start_b, &shape)?;
        // Reuse a's origin so both grids are bit-identical in geometry.
        wb.origin = wa.origin.clone();
        Ok((wa, wb))
    }

    /// Pointwise maximum of two aligned grids on their common window.
    pub fn pointwise_max(a: &Self, b: &Self) -> Result<Self> {
        let (mut wa, wb) = Self::align_pair(a, b)?;
        for (x, y) in wa.values.iter_mut().zip(&wb.values) {
            *x = x.max(*y);
        }
        Ok(wa)
    }

    /// Translation by whole cells.
    pub fn shifted(&self, cells: &[i64]) -> Self {
        let mut out = self.clone();
        for (o, c) in out.origin.iter_mut().zip(cells) {
            *o += *c as f64 * self.spacing;
        }
        out
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        let out = Self::new(self.origin.clone(), self.spacing, self.shape.clone(), values)?;
        Ok(Self { zero_threshold: self.zero_threshold, ..out })
    }

    /// Smallest window containing every supported sample (one sample if the
    /// function vanishes).
    pub fn cropped(&self) -> Result<Self> {
        let dim = self.dim();
        let mut lo = vec![i64::MAX; dim];
        let mut hi = vec![i64::MIN; dim];
        let mut idx = vec![0usize; dim];
        for (flat, &v) in self.values.iter().enumerate() {
            if self.is_supported(v) {
                self.unravel_into(flat, &mut idx);
                for a in 0..dim {
                    lo[a] = lo[a].min(idx[a] as i64);
                    hi[a] = hi[a].max(idx[a] as i64);
                }
            }
        }
        if lo[0] == i64::MAX {
            return self.window(&vec![0; dim], &vec![1; dim]);
        }
        let shape: Vec<usize> = (0..dim).map(|a| (hi[a] - lo[a] + 1) as usize).collect();
        self.window(&lo, &shape)
    }

    /// Area-weighted resampling onto the grid with the given origin, spacing
    /// and shape. Mass inside the target window is preserved exactly up to
    /// rounding.
    pub fn resample_conservative(&self, origin: &[f64], spacing: f64, shape: &[usize]) -> Result<Self> {
        let dim = self.dim();
        if origin.len() != dim || shape.len() != dim {
            return domain("target grid has the wrong dimension");
        }
        // Per-axis overlap lists: target index -> [(source index, fraction of target cell)].
        let mut weights: Vec<Vec<Vec<(usize, f64)>>> = Vec::with_capacity(dim);
        for a in 0..dim {
            let mut axis = vec![Vec::new(); shape[a]];
            let h_src = self.spacing;
            for (t, list) in axis.iter_mut().enumerate() {
                let t_lo = origin[a] + (t as f64 - 0.5) * spacing;
                let t_hi = t_lo + spacing;
                let first = ((t_lo - self.origin[a]) / h_src + 0.5).floor().max(0.0) as i64;
                let last = ((t_hi - self.origin[a]) / h_src + 0.5).floor() as i64;
                for i in first..=last.min(self.shape[a] as i64 - 1) {
                    let s_lo = self.origin[a] + (i as f64 - 0.5) * h_src;
                    let s_hi = s_lo + h_src;
                    let overlap = t_hi.min(s_hi) - t_lo.max(s_lo);
                    if overlap > 0.0 {
                        list.push((i as usize, overlap / spacing));
                    }
                }
            }
            weights.push(axis);
        }
        let mut out = Self::zeros(origin.to_vec(), spacing, shape.to_vec())?;
        let mut idx = vec![0usize; dim];
        let mut src = vec![0usize; dim];
        for flat in 0..out.values.len() {
            out.unravel_into(flat, &mut idx);
            let lists: Vec<&Vec<(usize, f64)>> = (0..dim).map(|a| &weights[a][idx[a]]).collect();
            if lists.iter().any(|l| l.is_empty()) {
                continue;
            }
            let mut acc = 0.0;
            let mut pos = vec![0usize; dim];
            'outer: loop {
                let mut w = 1.0;
                for a in 0..dim {
                    let (i, wa) = lists[a][pos[a]];
                    src[a] = i;
                    w *= wa;
                }
                acc += w * self.values[self.ravel(&src)];
                for a in (0..dim).rev() {
                    pos[a] += 1;
                    if pos[a] < lists[a].len() {
                        continue 'outer;
                    }
                    pos[a] = 0;
                }
                break;
            }
            out.values[flat] = acc;
        }
        out.zero_threshold = self.zero_threshold;
        Ok(out)
    }

    /// Discrete total variation `Σ |jumps| · h^{n-1}`, counting the jumps to
    /// the implicit zero outside the grid.
    pub fn total_variation(&self) -> f64 {
        let dim = self.dim();
        let mut idx = vec![0usize; dim];
        let mut jumps = Vec::with_capacity(self.values.len() * dim);
        let mut strides = vec![1usize; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.shape[a + 1];
        }
        for (flat, &v) in self.values.iter().enumerate() {
            self.unravel_into(flat, &mut idx);
            for a in 0..dim {
                let prev = if idx[a] == 0 { 0.0 } else { self.values[flat - strides[a]] };
                jumps.push((v - prev).abs());
                if idx[a] + 1 == self.shape[a] {
                    jumps.push(v);
                }
            }
        }
        pairwise_sum(&jumps) * self.spacing.powi(dim as i32 - 1)
    }

    /// Center of mass; `None` for a vanishing function.
    pub fn centroid(&self) -> Option<Vec<f64>> {
        let dim = self.dim();
        let mass = pairwise_sum(&self.values);
        if mass <= 0.0 {
            return None;
        }
        let mut x = vec![0.0; dim];
        let mut moments = vec![Vec::with_capacity(self.values.len()); dim];
        for (flat, &v) in self.values.iter().enumerate() {
            self.center_into(flat, &mut x);
            for a in 0..dim {
                moments[a].push(v * x[a]);
            }
        }
        Some(moments.iter().map(|m| pairwise_sum(m) / mass).collect())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SpacingJson {
    Scalar(f64),
    PerAxis(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridJson {
    dim: usize,
    origin: Vec<f64>,
    spacing: SpacingJson,
    shape: Vec<usize>,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    zero_threshold: Option<f64>,
}

impl Serialize for GridFunction {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        GridJson {
            dim: self.dim(),
            origin: self.origin.clone(),
            spacing: SpacingJson::Scalar(self.spacing),
            shape: self.shape.clone(),
            values: self.values.clone(),
            zero_threshold: (self.zero_threshold != DEFAULT_ZERO_THRESHOLD).then_some(self.zero_threshold),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for GridFunction {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = GridJson::deserialize(de)?;
        let spacing = match raw.spacing {
            SpacingJson::Scalar(h) => h,
            SpacingJson::PerAxis(hs) => {
                let first = *hs.first().ok_or_else(|| D::Error::custom("empty spacing array"))?;
                if hs.iter().any(|&h| h != first) {
                    return Err(D::Error::custom("anisotropic grids are not supported"));
                }
                first
            }
        };
        if raw.dim != raw.shape.len() {
            return Err(D::Error::custom(format!(
                "dim = {} but shape has {} entries",
                raw.dim,
                raw.shape.len()
            )));
        }
        let g = GridFunction::new(raw.origin, spacing, raw.shape, raw.values).map_err(D::Error::custom)?;
        match raw.zero_threshold {
            Some(t) => g.with_zero_threshold(t).map_err(D::Error::custom),
            None => Ok(g),
        }
    }
}
