//! The `(1/s, λ)`-supremal convolution and the BBL deficit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::MAX_REFINEMENT;
use crate::error::{domain, Error, Result};
use crate::gridfn::GridFunction;
use crate::means::{q_mean, MeanOrder};
use crate::rational::RationalWeight;

/// Rows of `f` handled by one parallel task.
const CHUNK: usize = 64;

/// `h_λ(z) = sup { ((1-λ) f(x)^{1/s} + λ g(y)^{1/s})^s : z = (1-λ)x + λy }`
/// restricted to lattice pairs.
///
/// With `λ = j/k`, the combination of cell centers `x_i`, `y_l` lands on
/// index `(k-j) i + j l` of the grid with spacing `h/k` anchored at
/// `(1-λ) origin_f + λ origin_g`, so every pair hits an exact output sample.
/// Samples that receive no pair are zero.
pub fn sup_convolution(
    f: &GridFunction,
    g: &GridFunction,
    lambda: RationalWeight,
    s: f64,
) -> Result<GridFunction> {
    if f.dim() != g.dim() {
        return Err(Error::Alignment("functions differ in dimension".into()));
    }
    if (f.spacing() - g.spacing()).abs() > 1e-12 * f.spacing() {
        return Err(Error::Alignment(format!(
            "sup-convolution needs equal spacings, got {} and {}",
            f.spacing(),
            g.spacing()
        )));
    }
    if !(s.is_finite() && s > 0.0) {
        return domain(format!("concavity index must be positive, got {s}"));
    }
    let k = lambda.den();
    if k > MAX_REFINEMENT {
        return Err(Error::Capacity(format!(
            "weight denominator {k} exceeds the refinement cap {MAX_REFINEMENT}"
        )));
    }
    let dim = f.dim();
    let (wf, wg) = (lambda.complement_num() as usize, lambda.num() as usize);
    let (cf, cg) = (lambda.complement(), lambda.value());
    let shape: Vec<usize> = (0..dim)
        .map(|a| wf * (f.shape()[a] - 1) + wg * (g.shape()[a] - 1) + 1)
        .collect();
    let origin: Vec<f64> = (0..dim).map(|a| cf * f.origin()[a] + cg * g.origin()[a]).collect();
    let out = GridFunction::zeros(origin, f.spacing() / k as f64, shape.clone())?;

    let inv_s = 1.0 / s;
    let support = |grid: &GridFunction| -> Vec<(usize, f64)> {
        grid.values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| grid.is_supported(v))
            .map(|(flat, &v)| (flat, v.powf(inv_s)))
            .collect()
    };
    let fs = support(f);
    let gs = support(g);

    // Output offsets: flat(out) of (wf*i + wg*l) = wf*flat_out(i) + wg*flat_out(l)
    // when both are expressed with the output strides.
    let mut strides = vec![1usize; dim];
    for a in (0..dim.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    let out_offset = |grid: &GridFunction, flat: usize, weight: usize| -> usize {
        let mut rem = flat;
        let mut acc = 0;
        for a in (0..dim).rev() {
            let i = rem % grid.shape()[a];
            rem /= grid.shape()[a];
            acc += weight * i * strides[a];
        }
        acc
    };
    let f_pts: Vec<(usize, f64)> = fs.iter().map(|&(flat, p)| (out_offset(f, flat, wf), cf * p)).collect();
    let g_pts: Vec<(usize, f64)> = gs.iter().map(|&(flat, p)| (out_offset(g, flat, wg), cg * p)).collect();

    let n_out = out.len();
    let best = f_pts
        .par_chunks(CHUNK)
        .fold(
            || vec![0.0f64; n_out],
            |mut acc, chunk| {
                for &(fo, fp) in chunk {
                    for &(go, gp) in &g_pts {
                        let v = fp + gp;
                        let slot = &mut acc[fo + go];
                        if v > *slot {
                            *slot = v;
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0.0f64; n_out],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    if y > *x {
                        *x = y;
                    }
                }
                a
            },
        );
    let values: Vec<f64> = best.into_iter().map(|m| if m > 0.0 { m.powf(s) } else { 0.0 }).collect();
    GridFunction::new(out.origin().to_vec(), out.spacing(), shape, values)?
        .with_zero_threshold(f.zero_threshold())
}

/// Both sides of the BBL inequality and their gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BblDeficit {
    /// `F = ∫f`.
    pub mass_f: f64,
    /// `G = ∫g`.
    pub mass_g: f64,
    /// `∫h`.
    pub lhs: f64,
    /// `M_{1/(n+s)}(F, G; λ)`.
    pub rhs: f64,
    /// `lhs - rhs`.
    pub deficit: f64,
    /// `deficit / rhs`.
    pub delta: f64,
}

/// Evaluates `∫h - M_{1/(n+s)}(∫f, ∫g; λ)`, with `h` defaulting to the
/// supremal convolution of `f` and `g`.
pub fn bbl_deficit(
    f: &GridFunction,
    g: &GridFunction,
    h: Option<&GridFunction>,
    lambda: RationalWeight,
    s: f64,
) -> Result<BblDeficit> {
    let mass_f = f.integrate();
    let mass_g = g.integrate();
    if !(mass_f > 0.0 && mass_g > 0.0) {
        return domain(format!("BBL deficit needs positive masses, got {mass_f} and {mass_g}"));
    }
    let lhs = match h {
        Some(h) => {
            if h.dim() != f.dim() {
                return domain("h has the wrong dimension");
            }
            h.integrate()
        }
        None => sup_convolution(f, g, lambda, s)?.integrate(),
    };
    let order = MeanOrder::new(1.0 / (f.dim() as f64 + s))?;
    let rhs = q_mean(mass_f, mass_g, lambda.value(), order)?;
    let deficit = lhs - rhs;
    Ok(BblDeficit { mass_f, mass_g, lhs, rhs, deficit, delta: deficit / rhs })
}

/// Discretization tolerance for integrals of lattice sup-convolutions:
/// `spacing · (TV(f) + TV(g))`, where TV is the discrete total variation
/// including the jumps at the support boundary.
pub fn discretization_tolerance(f: &GridFunction, g: &GridFunction) -> f64 {
    f.spacing().max(g.spacing()) * (f.total_variation() + g.total_variation())
}
