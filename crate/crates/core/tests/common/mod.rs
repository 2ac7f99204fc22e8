#![allow(dead_code)]

use bblab_core::bodies::{Cell, VoxelSet};
use bblab_core::hull::{hull2d, hull3d, polygon_contains};
use bblab_core::{GridFunction, RationalWeight};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn weight(j: u32, k: u32) -> RationalWeight {
    RationalWeight::new(j, k).unwrap()
}

pub fn quarter_weights() -> [RationalWeight; 3] {
    [weight(1, 4), weight(1, 2), weight(3, 4)]
}

/// Maximum of a few radial tents `a (1 - |x - c| / r)_+`.
#[derive(Clone, Debug)]
pub struct Tents(pub Vec<(Vec<f64>, f64, f64)>);

impl Tents {
    pub fn random(rng: &mut ChaCha8Rng, n: usize, amplitude: (f64, f64)) -> Self {
        let k = rng.gen_range(1..=3);
        Tents(
            (0..k)
                .map(|_| {
                    let c = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
                    (c, rng.gen_range(0.4..0.8), rng.gen_range(amplitude.0..amplitude.1))
                })
                .collect(),
        )
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|(c, r, a)| {
                let d = c.iter().zip(x).map(|(c, x)| (c - x).powi(2)).sum::<f64>().sqrt();
                a * (1.0 - d / r).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    pub fn grid(&self, n: usize, h: f64) -> GridFunction {
        GridFunction::sample_box(&vec![-1.4; n], &vec![1.4; n], h, |x| self.eval(x)).unwrap()
    }
}

pub fn cell(c: &[i64]) -> Cell {
    let mut out: Cell = [0; 4];
    out[..c.len()].copy_from_slice(c);
    out
}

/// Lattice cells inside the hull of `k` random integer points in `[-r, r]^m`.
pub fn convex_body(rng: &mut ChaCha8Rng, m: usize, r: i64, k: usize, spacing: f64) -> VoxelSet {
    let pts: Vec<Vec<i64>> = (0..k).map(|_| (0..m).map(|_| rng.gen_range(-r..=r)).collect()).collect();
    let inside: Box<dyn Fn(&[i64]) -> bool> = match m {
        2 => {
            let hull = hull2d(&pts.iter().map(|p| [p[0], p[1]]).collect::<Vec<_>>());
            Box::new(move |c: &[i64]| polygon_contains(&hull, [c[0], c[1]]))
        }
        3 => match hull3d(&pts.iter().map(|p| [p[0], p[1], p[2]]).collect::<Vec<_>>()) {
            Some(hull) => Box::new(move |c: &[i64]| hull.contains([c[0], c[1], c[2]])),
            None => return convex_body(rng, m, r, k, spacing),
        },
        _ => panic!("convex bodies in dimension {m}"),
    };
    let mut cells = Vec::new();
    let side = (2 * r + 1) as usize;
    for flat in 0..side.pow(m as u32) {
        let mut rem = flat;
        let c: Vec<i64> = (0..m)
            .map(|_| {
                let v = (rem % side) as i64 - r;
                rem /= side;
                v
            })
            .collect();
        if inside(&c) {
            cells.push(cell(&c));
        }
    }
    VoxelSet::from_cells(vec![0.0; m], spacing, cells).unwrap()
}

/// Random subset of the box `[0, side)^m` with occupancy `fill`.
pub fn random_set(rng: &mut ChaCha8Rng, m: usize, side: i64, fill: f64) -> VoxelSet {
    let mut cells = Vec::new();
    for flat in 0..(side as usize).pow(m as u32) {
        if rng.gen_bool(fill) {
            let mut rem = flat;
            let c: Vec<i64> = (0..m)
                .map(|_| {
                    let v = (rem % side as usize) as i64;
                    rem /= side as usize;
                    v
                })
                .collect();
            cells.push(cell(&c));
        }
    }
    if cells.is_empty() {
        cells.push(cell(&vec![0; m]));
    }
    VoxelSet::from_cells(vec![0.0; m], 1.0, cells).unwrap()
}
