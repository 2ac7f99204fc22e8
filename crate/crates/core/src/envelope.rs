//! Least concave and p-concave majorants of grid functions in one and two
//! dimensions.
//!
//! Hull combinatorics are decided exactly on integer coordinates (cell
//! indices and heights quantised to 48 bits); the envelope itself is then
//! interpolated from the original floating-point values at the hull
//! vertices, so sampled points that are already extreme keep their value
//! bit for bit.

use crate::error::{domain, Error, Result};
use crate::gridfn::GridFunction;
use crate::hull::{cross2, hull2d, hull3d, polygon_contains, P2, P3};
use crate::sum::pairwise_sum;

/// Default tolerance of [`is_p_concave`], applied after scaling to max 1.
pub const DEFAULT_CONCAVITY_TOL: f64 = 1e-6;

const HEIGHT_BITS: i32 = 48;

fn quantise(w: f64, wmax: f64) -> i64 {
    (w / wmax * (1u64 << HEIGHT_BITS) as f64).round() as i64
}

/// Least concave majorant of the supported samples, evaluated on the same
/// grid and zero outside the convex hull of the support.
pub fn concave_envelope(w: &GridFunction) -> Result<GridFunction> {
    envelope_with(w, |v| v, |v| v)
}

/// `(concave_envelope(f^p))^(1/p)`.
pub fn p_concave_envelope(f: &GridFunction, p: f64) -> Result<GridFunction> {
    if !(p.is_finite() && p > 0.0) {
        return domain(format!("concavity exponent must be positive, got {p}"));
    }
    if p == 1.0 {
        return concave_envelope(f);
    }
    envelope_with(f, |v| v.powf(p), |v| v.powf(1.0 / p))
}

/// Whether the pointwise gap to the p-concave envelope stays within `tol`
/// once `f` is scaled to maximum 1.
pub fn is_p_concave(f: &GridFunction, p: f64, tol: f64) -> bool {
    let max = f.max_value();
    if !(max > 0.0) {
        return true;
    }
    match p_concave_envelope(f, p) {
        Ok(u) => u
            .values()
            .iter()
            .zip(f.values())
            .all(|(a, b)| (a - b) / max <= tol),
        Err(_) => false,
    }
}

/// `∫(u - f)` over a common lattice, with negative rounding dirt clamped.
pub fn envelope_deficit(f: &GridFunction, u: &GridFunction) -> Result<f64> {
    let (wf, wu) = GridFunction::align_pair(f, u)?;
    let mut gaps = Vec::with_capacity(wf.len());
    for (a, b) in wf.values().iter().zip(wu.values()) {
        let d = b - a;
        if d < -1e-9 {
            return domain(format!("envelope lies below the function by {}", -d));
        }
        gaps.push(d.max(0.0));
    }
    Ok(pairwise_sum(&gaps) * wf.spacing().powi(wf.dim() as i32))
}

fn envelope_with(
    f: &GridFunction,
    to_power: impl Fn(f64) -> f64,
    from_power: impl Fn(f64) -> f64,
) -> Result<GridFunction> {
    let dim = f.dim();
    if dim > 2 {
        return Err(Error::Unsupported(format!("envelopes are implemented for n <= 2, got n = {dim}")));
    }
    let w: Vec<f64> = f
        .values()
        .iter()
        .map(|&v| if f.is_supported(v) { to_power(v) } else { 0.0 })
        .collect();
    let env = if dim == 1 { envelope_1d(&w) } else { envelope_2d(&w, f.shape()[0], f.shape()[1]) };
    // Interpolation may round a hair below an extreme sample; the majorant
    // property is restored pointwise.
    let values = env
        .iter()
        .zip(f.values())
        .map(|(&e, &v)| if e > 0.0 { from_power(e).max(v) } else { v })
        .collect();
    GridFunction::new(f.origin().to_vec(), f.spacing(), f.shape().to_vec(), values)?
        .with_zero_threshold(f.zero_threshold())
}

/// Upper hull over the supported (positive) entries of a sequence,
/// interpolated linearly between hull vertices. Entries outside the first
/// and last supported index stay zero.
fn envelope_1d(w: &[f64]) -> Vec<f64> {
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let mut out = vec![0.0; w.len()];
    let Some(&wmax) = support.iter().map(|&i| &w[i]).max_by(|a, b| a.total_cmp(b)) else {
        return out;
    };
    let pts: Vec<(i64, f64)> = support.iter().map(|&i| (i as i64, w[i])).collect();
    for (t, v) in upper_chain(&pts, wmax) {
        out[t as usize] = v;
    }
    out
}

/// Evaluates the upper concave hull of `(t, v)` points (strictly increasing
/// `t`) at every integer between the first and last `t`.
fn upper_chain(pts: &[(i64, f64)], wmax: f64) -> Vec<(i64, f64)> {
    let mut hull: Vec<usize> = Vec::new();
    let q: Vec<P2> = pts.iter().map(|&(t, v)| [t, quantise(v, wmax)]).collect();
    for k in 0..pts.len() {
        while hull.len() >= 2 && cross2(q[hull[hull.len() - 2]], q[hull[hull.len() - 1]], q[k]) >= 0 {
            hull.pop();
        }
        hull.push(k);
    }
    let mut out = Vec::new();
    if hull.len() == 1 {
        out.push(pts[hull[0]]);
        return out;
    }
    for pair in hull.windows(2) {
        let (t0, v0) = pts[pair[0]];
        let (t1, v1) = pts[pair[1]];
        let len = (t1 - t0) as f64;
        for t in t0..t1 {
            let a = (t - t0) as f64 / len;
            out.push((t, (1.0 - a) * v0 + a * v1));
        }
    }
    out.push(pts[*hull.last().expect("nonempty")]);
    out
}

fn envelope_2d(w: &[f64], nx: usize, ny: usize) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    let support: Vec<usize> = (0..w.len()).filter(|&k| w[k] > 0.0).collect();
    let Some(&wmax) = support.iter().map(|&k| &w[k]).max_by(|a, b| a.total_cmp(b)) else {
        return out;
    };
    let xy = |k: usize| -> P2 { [(k / ny) as i64, (k % ny) as i64] };
    let flat = |p: P2| p[0] as usize * ny + p[1] as usize;
    let _ = nx;

    let planar: Vec<P2> = support.iter().map(|&k| xy(k)).collect();
    let footprint = hull2d(&planar);
    if footprint.len() <= 2 {
        // Point or segment: a one-dimensional problem along the lattice line.
        let p0 = footprint[0];
        if footprint.len() == 1 {
            out[flat(p0)] = w[flat(p0)];
            return out;
        }
        let p1 = *footprint.last().expect("nonempty");
        let (dx, dy) = (p1[0] - p0[0], p1[1] - p0[1]);
        let g = gcd(dx.unsigned_abs(), dy.unsigned_abs()) as i64;
        let d = [dx / g, dy / g];
        let mut line: Vec<(i64, f64)> = planar
            .iter()
            .map(|&p| {
                let t = if d[0] != 0 { (p[0] - p0[0]) / d[0] } else { (p[1] - p0[1]) / d[1] };
                (t, w[flat(p)])
            })
            .collect();
        line.sort_by_key(|&(t, _)| t);
        for (t, v) in upper_chain(&line, wmax) {
            out[flat([p0[0] + t * d[0], p0[1] + t * d[1]])] = v;
        }
        return out;
    }

    let mut pts: Vec<P3> = support.iter().map(|&k| {
        let p = xy(k);
        [p[0], p[1], quantise(w[k], wmax)]
    }).collect();
    pts.extend(footprint.iter().map(|p| [p[0], p[1], -1]));
    let hull = hull3d(&pts).expect("footprint spans the plane and the base lies below");
    for facet in &hull.facets {
        if facet.normal[2] <= 0 {
            continue;
        }
        let v: Vec<P3> = facet.vertices.iter().map(|&i| hull.points[i]).collect();
        let tri: [P2; 3] = [[v[0][0], v[0][1]], [v[1][0], v[1][1]], [v[2][0], v[2][1]]];
        let vals = [w[flat(tri[0])], w[flat(tri[1])], w[flat(tri[2])]];
        let area = cross2(tri[0], tri[1], tri[2]);
        if area == 0 {
            continue;
        }
        let (xlo, xhi) = (tri.iter().map(|p| p[0]).min().unwrap(), tri.iter().map(|p| p[0]).max().unwrap());
        let (ylo, yhi) = (tri.iter().map(|p| p[1]).min().unwrap(), tri.iter().map(|p| p[1]).max().unwrap());
        for x in xlo..=xhi {
            for y in ylo..=yhi {
                let p = [x, y];
                let b = [cross2(tri[1], tri[2], p), cross2(tri[2], tri[0], p), cross2(tri[0], tri[1], p)];
                let inside = if area > 0 { b.iter().all(|&c| c >= 0) } else { b.iter().all(|&c| c <= 0) };
                if !inside {
                    continue;
                }
                let a = area as f64;
                let val = (b[0] as f64 * vals[0] + b[1] as f64 * vals[1] + b[2] as f64 * vals[2]) / a;
                let slot = &mut out[flat(p)];
                *slot = slot.max(val);
            }
        }
    }
    debug_assert!(planar.iter().all(|&p| polygon_contains(&footprint, p)));
    out
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
