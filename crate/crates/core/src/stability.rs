//! Normalization, witness construction and the explicit stability constants.
//!
//! Given `f`, `g` (and optionally `h`) the report measures the BBL deficit,
//! brings `f` and `g` to unit lifted volume by homotheties, searches a
//! lattice translation of `ĝ` minimizing `∫(u - f̂) + ∫(u - ĝ)` where `u` is
//! the least `1/s`-concave majorant of both, and evaluates the explicit
//! infinitesimal function `C_{n+s}` in log space.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::unit_ball_measure;
use crate::envelope::{envelope_deficit, p_concave_envelope};
use crate::error::{domain, Error, Result};
use crate::format::fmt_f64;
use crate::gridfn::GridFunction;
use crate::means::{q_mean, MeanOrder};
use crate::rational::{ConcavityIndex, IndexKind, RationalWeight};
use crate::supconv::{discretization_tolerance, sup_convolution};
use crate::MAX_DIM;

/// `log M_n(τ)` and `log σ_n(τ)` together with the free constant `N_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FjConstants {
    pub n: u32,
    pub tau: f64,
    #[serde(rename = "N")]
    pub n_override: f64,
    pub log_m: f64,
    pub log_sigma: f64,
}

impl FjConstants {
    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }
}

/// Evaluates
///
/// * `log M_n(τ) = 3^{n+2} log 2 + 3^n log n + 3^n log|log τ| - 3^n log τ`,
/// * `log σ_n(τ) = 3^n log τ - 3^{n+1} log 2 - 3^n log n - 3^n log|log τ|`,
///
/// termwise so that neither `M` nor `σ` is ever formed.
pub fn fj_log_constants(n: u32, tau: f64, n_override: f64) -> Result<FjConstants> {
    if n < 2 {
        return domain(format!("the constants are defined for n >= 2, got {n}"));
    }
    if !(tau > 0.0 && tau <= 0.5) {
        return domain(format!("tau must lie in (0, 1/2], got {tau}"));
    }
    if !(n_override.is_finite() && n_override > 0.0) {
        return domain(format!("N must be positive, got {n_override}"));
    }
    let p = 3f64.powi(n as i32);
    let ln2 = std::f64::consts::LN_2;
    let ln_n = (n as f64).ln();
    let ln_tau = tau.ln();
    let ln_abs_ln_tau = (-ln_tau).ln();
    let log_m = 9.0 * p * ln2 + p * ln_n + p * ln_abs_ln_tau - p * ln_tau;
    let log_sigma = p * ln_tau - 3.0 * p * ln2 - p * ln_n - p * ln_abs_ln_tau;
    Ok(FjConstants { n, tau, n_override, log_m, log_sigma })
}

/// `log C_{n+s}(η)` and whether the threshold `η ≤ e^{-M}` fails.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogBound {
    pub eta: f64,
    pub log_value: f64,
    pub vacuous: bool,
}

/// `log C(η) = σ log η - log ω_s - N log τ` with the constants evaluated at
/// the total dimension `n + s`.
pub fn bound_log_value(eta: f64, s: f64, constants: &FjConstants) -> Result<LogBound> {
    if !(eta.is_finite() && eta > 0.0) {
        return domain(format!("normalized deficit must be positive, got {eta}"));
    }
    if !(s.is_finite() && s > 0.0) {
        return domain(format!("s must be positive, got {s}"));
    }
    let log_eta = eta.ln();
    let offset = -unit_ball_measure(s).ln() - constants.n_override * constants.tau.ln();
    let log_value = offset + constants.sigma() * log_eta;
    let vacuous = log_eta > -constants.log_m.exp();
    Ok(LogBound { eta, log_value, vacuous })
}

/// `μ = (ω_s M)^{-1/(n+s)}` for both masses, so that `∫f̂ = ∫ĝ = 1/ω_s`.
pub fn normalization_scales(mass_f: f64, mass_g: f64, n: usize, s: f64) -> Result<(f64, f64)> {
    if !(mass_f > 0.0 && mass_g > 0.0) {
        return domain(format!("normalization needs positive masses, got {mass_f} and {mass_g}"));
    }
    let w = unit_ball_measure(s);
    let e = -1.0 / (n as f64 + s);
    Ok(((w * mass_f).powf(e), (w * mass_g).powf(e)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// First coordinate-descent step, in cells.
    pub initial_step: i64,
    /// Budget of distinct translations evaluated.
    pub max_evaluations: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { initial_step: 4, max_evaluations: 400 }
    }
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub u: GridFunction,
    /// Lattice translation of `ĝ`, in cells.
    pub shift: Vec<i64>,
    /// The same translation in coordinates.
    pub translation: Vec<f64>,
    pub deficit: f64,
    pub evaluations: usize,
}

fn witness_at(f: &GridFunction, g: &GridFunction, p: f64, shift: &[i64]) -> Result<(f64, GridFunction)> {
    let moved = g.shifted(shift);
    let both = GridFunction::pointwise_max(f, &moved)?;
    let u = p_concave_envelope(&both, p)?;
    let d = envelope_deficit(f, &u)? + envelope_deficit(&moved, &u)?;
    Ok((d, u))
}

/// Least `1/s`-concave majorant of `f̂` and a lattice translate of `ĝ`,
/// with the translation chosen by coordinate descent from the centroid
/// alignment. Ties go to the lexicographically smallest translation.
pub fn witness_search(f: &GridFunction, g: &GridFunction, s: f64, cfg: &SearchConfig) -> Result<Witness> {
    if !(f.max_value() > 0.0 && g.max_value() > 0.0) {
        return domain("witness search needs nonempty supports");
    }
    if !(s.is_finite() && s > 0.0) {
        return domain(format!("s must be positive, got {s}"));
    }
    f.lattice_offset(g)?;
    let n = f.dim();
    let h = f.spacing();
    let p = 1.0 / s;
    let (cf, cg) = (f.centroid().expect("nonempty"), g.centroid().expect("nonempty"));
    let seed: Vec<i64> = (0..n).map(|a| ((cf[a] - cg[a]) / h).round() as i64).collect();

    let mut memo: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    memo.insert(seed.clone(), witness_at(f, g, p, &seed)?.0);
    let mut cur = seed;
    let mut step = cfg.initial_step.max(1);
    loop {
        let fresh: Vec<Vec<i64>> = (0..n)
            .flat_map(|a| [-step, step].map(|d| {
                let mut t = cur.clone();
                t[a] += d;
                t
            }))
            .filter(|t| !memo.contains_key(t))
            .collect();
        if memo.len() + fresh.len() > cfg.max_evaluations {
            break;
        }
        let scored: Vec<(Vec<i64>, Result<f64>)> = fresh
            .into_par_iter()
            .map(|t| {
                let d = witness_at(f, g, p, &t).map(|r| r.0);
                (t, d)
            })
            .collect();
        for (t, d) in scored {
            memo.insert(t, d?);
        }
        let cur_d = memo[&cur];
        let best = (0..n)
            .flat_map(|a| [-step, step].map(move |d| (a, d)))
            .map(|(a, d)| {
                let mut t = cur.clone();
                t[a] += d;
                t
            })
            .map(|t| (memo[&t], t))
            .min_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(&y.1)))
            .expect("n >= 1");
        if best.0 < cur_d || (best.0 == cur_d && best.1 < cur) {
            cur = best.1;
        } else if step > 1 {
            step /= 2;
        } else {
            break;
        }
    }
    let (deficit, u) = witness_at(f, g, p, &cur)?;
    let translation = cur.iter().map(|&c| c as f64 * h).collect();
    Ok(Witness { u, shift: cur, translation, deficit, evaluations: memo.len() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    IntegerS,
    RationalLift,
    IntegerPartFallback,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::IntegerS => "integer-s",
            Route::RationalLift => "rational-lift",
            Route::IntegerPartFallback => "integer-part-fallback",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub tau: f64,
    #[serde(rename = "N")]
    pub n_override: f64,
    /// Allowed `|∫f - 1|`, `|∫g - 1|` on the fallback route before warning.
    pub mass_tolerance: f64,
    /// Cap on the cells of each normalized grid handed to the witness search.
    pub witness_cells: usize,
    pub search: SearchConfig,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            n_override: 1.0,
            mass_tolerance: 1e-6,
            witness_cells: 1 << 16,
            search: SearchConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    #[serde(rename = "F")]
    pub mass_f: f64,
    #[serde(rename = "G")]
    pub mass_g: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub mu_f: f64,
    pub mu_g: f64,
    pub translation: Vec<f64>,
    pub witness_deficit: f64,
    pub log_bound: f64,
    pub vacuous: bool,
    pub route: Route,
    pub lambda: RationalWeight,
    pub s: f64,
    /// Concavity index the witness and bound are computed with.
    pub s_effective: f64,
    /// Total dimension of the constants `M`, `σ`.
    pub bound_dimension: u32,
    pub log_m: f64,
    pub log_sigma: f64,
    /// Argument of the bound: the relative deficit on the route's space,
    /// clamped below by the discretization resolution.
    pub eta: f64,
    pub tol_disc: f64,
    /// On the lifted route: `(∫h)^q - M_{1/(nq+p)}(F^q, G^q)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_lifted: Option<f64>,
    pub search_evaluations: usize,
    pub warnings: Vec<String>,
}

impl StabilityReport {
    pub fn is_consistent(&self) -> bool {
        (self.epsilon - (self.lhs - self.rhs)).abs() <= 1e-12 * self.lhs.abs().max(1.0)
            && (self.delta - self.epsilon / self.rhs).abs() <= 1e-12 * self.delta.abs().max(1.0)
            && self.witness_deficit >= 0.0
    }
}

/// Pipeline inputs after route-specific lifting.
struct Stage {
    f: GridFunction,
    g: GridFunction,
}

/// Brings both functions to one lattice `{k · spacing}` with the finer of
/// the two spacings, coarsened if needed to respect `cap` cells per grid.
fn common_lattice(f: &GridFunction, g: &GridFunction, cap: usize) -> Result<(GridFunction, GridFunction)> {
    let n = f.dim();
    let bounds = |w: &GridFunction| -> Vec<(f64, f64)> {
        (0..n)
            .map(|a| {
                let lo = w.origin()[a] - 0.5 * w.spacing();
                (lo, lo + w.shape()[a] as f64 * w.spacing())
            })
            .collect()
    };
    let (bf, bg) = (bounds(f), bounds(g));
    let mut hc = f.spacing().min(g.spacing());
    let cells = |b: &[(f64, f64)], hc: f64| -> (Vec<i64>, Vec<usize>) {
        let lo: Vec<i64> = b.iter().map(|&(l, _)| (l / hc + 0.5).floor() as i64).collect();
        let hi: Vec<i64> = b.iter().map(|&(_, u)| (u / hc - 0.5).ceil() as i64).collect();
        let shape = lo.iter().zip(&hi).map(|(l, u)| (u - l + 1).max(1) as usize).collect();
        (lo, shape)
    };
    let count = |b: &[(f64, f64)], hc: f64| cells(b, hc).1.iter().product::<usize>();
    let mut factor = 1.0;
    let h0 = hc;
    while count(&bf, hc).max(count(&bg, hc)) > cap {
        factor += 1.0;
        hc = h0 * factor;
    }
    let resample = |w: &GridFunction, b: &[(f64, f64)]| -> Result<GridFunction> {
        let (lo, shape) = cells(b, hc);
        let origin: Vec<f64> = lo.iter().map(|&k| k as f64 * hc).collect();
        if (w.spacing() - hc).abs() <= 1e-12 * hc
            && w.origin().iter().zip(&origin).all(|(a, b)| (a - b).abs() <= 1e-9 * hc)
        {
            let same = GridFunction::new(origin, hc, w.shape().to_vec(), w.values().to_vec())?;
            return same.with_zero_threshold(w.zero_threshold());
        }
        w.resample_conservative(&origin, hc, &shape)
    };
    Ok((resample(f, &bf)?, resample(g, &bg)?))
}

/// Measures the BBL deficit of `(f, g, h)` and constructs the witness.
pub fn stability_report(
    f: &GridFunction,
    g: &GridFunction,
    h: Option<&GridFunction>,
    lambda: RationalWeight,
    s: ConcavityIndex,
    cfg: &StabilityConfig,
) -> Result<StabilityReport> {
    if f.dim() != g.dim() {
        return Err(Error::Alignment("f and g differ in dimension".into()));
    }
    if let Some(h) = h {
        if h.dim() != f.dim() {
            return Err(Error::Alignment("h has the wrong dimension".into()));
        }
    }
    let n = f.dim();
    let mass_f = f.integrate();
    let mass_g = g.integrate();
    if !(mass_f > 0.0 && mass_g > 0.0) {
        return domain(format!("stability report needs positive masses, got {mass_f} and {mass_g}"));
    }
    let sv = s.value();
    let lhs = match h {
        Some(h) => h.integrate(),
        None => sup_convolution(f, g, lambda, sv)?.integrate(),
    };
    let tol_disc = discretization_tolerance(f, g);
    let mut warnings = Vec::new();

    let lift = match s.kind() {
        IndexKind::Rational { p, q } => {
            let (nq, total) = (n * q as usize, n * q as usize + p as usize);
            if total <= MAX_DIM && nq <= 2 {
                Some((p, q))
            } else {
                warnings.push(format!(
                    "s = {p}/{q} in n = {n} needs the lifted dimensions nq = {nq}, nq+p = {total}; \
                     using the integer-part route"
                ));
                None
            }
        }
        _ => None,
    };

    let (route, stage, s_eff, rhs) = match (s.kind(), lift) {
        (IndexKind::Integer(k), _) => {
            let rhs = q_mean(mass_f, mass_g, lambda.value(), MeanOrder::new(1.0 / (n as f64 + sv))?)?;
            (Route::IntegerS, Stage { f: f.clone(), g: g.clone() }, k, rhs)
        }
        (_, Some((p, q))) => {
            let rhs = q_mean(mass_f, mass_g, lambda.value(), MeanOrder::new(1.0 / (n as f64 + sv))?)?;
            let stage = Stage { f: f.product_lift(q as usize)?, g: g.product_lift(q as usize)? };
            (Route::RationalLift, stage, p, rhs)
        }
        _ => {
            let k = s.integer_part() + 1;
            let kf = k as f64;
            // h ≥ h_{s'} follows from M_{1/s} ≥ M_{1/s'}; checked on the lattice.
            let coarse = sup_convolution(f, g, lambda, kf)?;
            let reference = match h {
                Some(h) => h.clone(),
                None => sup_convolution(f, g, lambda, sv)?,
            };
            match GridFunction::align_pair(&reference, &coarse) {
                Ok((a, b)) => {
                    let scale = b.max_value().max(1.0);
                    let bad = a
                        .values()
                        .iter()
                        .zip(b.values())
                        .filter(|(x, y)| **x < **y - 1e-12 * scale)
                        .count();
                    if bad > 0 {
                        warnings.push(format!(
                            "h falls below the s' = {k} supremal convolution at {bad} cells"
                        ));
                    }
                }
                Err(_) => warnings.push("h is not on the supremal-convolution lattice; hypothesis transfer unchecked".into()),
            }
            if (mass_f - 1.0).abs() > cfg.mass_tolerance || (mass_g - 1.0).abs() > cfg.mass_tolerance {
                warnings.push(format!(
                    "masses are not normalized (F = {}, G = {}); the integer-part route assumes F = G = 1",
                    fmt_f64(mass_f),
                    fmt_f64(mass_g)
                ));
            }
            let rhs = q_mean(mass_f, mass_g, lambda.value(), MeanOrder::new(1.0 / (n as f64 + kf))?)?;
            (Route::IntegerPartFallback, Stage { f: f.clone(), g: g.clone() }, k, rhs)
        }
    };

    let epsilon = lhs - rhs;
    let delta = epsilon / rhs;

    // Route-space deficit for the bound.
    let (rel_deficit, epsilon_lifted) = match route {
        Route::RationalLift => {
            let q = s.fraction().expect("rational").1 as i32;
            let e = lhs.powi(q) - rhs.powi(q);
            (e / rhs.powi(q), Some(e))
        }
        _ => (delta, None),
    };

    let dim = stage.f.dim();
    let se = s_eff as f64;
    let (mu_f, mu_g) = normalization_scales(stage.f.integrate(), stage.g.integrate(), dim, se)?;
    if stage.f.dim() > 2 {
        return Err(Error::Unsupported(format!("witness construction in dimension {}", stage.f.dim())));
    }
    let zero = vec![0.0; dim];
    let fh = stage.f.homothety(mu_f, &zero, se)?;
    let gh = stage.g.homothety(mu_g, &zero, se)?;
    let (fh, gh) = common_lattice(&fh, &gh, cfg.witness_cells)?;
    let witness = witness_search(&fh, &gh, se, &cfg.search)?;

    let bound_dim = (dim as u32) + s_eff;
    let constants = fj_log_constants(bound_dim, cfg.tau, cfg.n_override)?;
    let eta = rel_deficit.max(tol_disc / rhs).max(f64::MIN_POSITIVE);
    let bound = bound_log_value(eta, se, &constants)?;

    Ok(StabilityReport {
        mass_f,
        mass_g,
        lhs,
        rhs,
        epsilon,
        delta,
        mu_f,
        mu_g,
        translation: witness.translation,
        witness_deficit: witness.deficit,
        log_bound: bound.log_value,
        vacuous: bound.vacuous,
        route,
        lambda,
        s: sv,
        s_effective: se,
        bound_dimension: bound_dim,
        log_m: constants.log_m,
        log_sigma: constants.log_sigma,
        eta,
        tol_disc,
        epsilon_lifted,
        search_evaluations: witness.evaluations,
        warnings,
    })
}

/// One row of the spike experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub witness_deficit: f64,
    pub log_bound: f64,
    pub route: Route,
}

/// `base` plus a box bump of mass `m` placed past the end of the support
/// along the first axis, one bump-width away.
pub fn with_spike(base: &GridFunction, m: f64) -> Result<GridFunction> {
    if !(m.is_finite() && m >= 0.0) {
        return domain(format!("spike mass must be nonnegative, got {m}"));
    }
    let n = base.dim();
    let width = (base.shape()[0] / 10).max(1);
    let mut shape = base.shape().to_vec();
    let start = shape[0] + width;
    shape[0] = start + width;
    let pad = base.window(&vec![0; n], &shape)?;
    let mut values = pad.values().to_vec();
    let cross: usize = base.shape()[1..].iter().product();
    let height = m / (width as f64 * cross as f64 * base.spacing().powi(n as i32));
    for (flat, v) in values.iter_mut().enumerate() {
        if flat / cross >= start {
            *v = height;
        }
    }
    GridFunction::new(pad.origin().to_vec(), pad.spacing(), shape, values)?
        .with_zero_threshold(base.zero_threshold())
}

/// `f_m = base + spike(m)`, `g = base`, `s = 1`, `λ = 1/2` for each mass.
pub fn spike_sweep(base: &GridFunction, masses: &[f64], cfg: &StabilityConfig) -> Result<Vec<SweepRow>> {
    let lambda = RationalWeight::new(1, 2)?;
    let s = ConcavityIndex::integer(1)?;
    masses
        .iter()
        .map(|&m| {
            let f = with_spike(base, m)?;
            let r = stability_report(&f, base, None, lambda, s, cfg)?;
            Ok(SweepRow {
                param: m,
                epsilon: r.epsilon,
                delta: r.delta,
                witness_deficit: r.witness_deficit,
                log_bound: r.log_bound,
                route: r.route,
            })
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "param,epsilon,delta,witness_deficit,log_bound,route";

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(r.param),
            fmt_f64(r.epsilon),
            fmt_f64(r.delta),
            fmt_f64(r.witness_deficit),
            fmt_f64(r.log_bound),
            r.route
        )?;
    }
    Ok(())
}
