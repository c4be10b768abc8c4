use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, gaussian, seeded};
use crate::Scalar;

use super::{approximate_auerbach, build_density, sample_and_map, sample_size, AuerbachBasis, Density, NormKind};
use super::{SamplingMap, SubspaceL1X};

const VECTORS_PER_TASK: usize = 32;

/// Extremal values of `‖Je‖ / ‖e‖` over test vectors of a subspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DistortionReport<T> {
    /// Random test vectors evaluated.
    pub n_test: usize,
    /// Deterministic net points evaluated.
    #[serde(default)]
    pub n_net: usize,
    pub max_ratio: T,
    pub min_ratio: T,
    /// `max(max_ratio, 1/min_ratio) − 1`.
    pub distortion: T,
    /// Whether inner norms were estimated rather than exact.
    #[serde(default)]
    pub estimated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<T>>,
}

impl<T: Scalar> DistortionReport<T> {
    fn from_ratios(n_test: usize, n_net: usize, ratios: &[T], estimated: bool, keep: bool) -> Self {
        let max_ratio = ratios.iter().copied().fold(T::neg_infinity(), T::max);
        let min_ratio = ratios.iter().copied().fold(T::infinity(), T::min);
        DistortionReport {
            n_test,
            n_net,
            max_ratio,
            min_ratio,
            distortion: max_ratio.max(T::one() / min_ratio) - T::one(),
            estimated,
            samples: keep.then(|| ratios.to_vec()),
        }
    }
}

fn ratio<T: Scalar>(j: &SamplingMap<T>, e: &SubspaceL1X<T>, coeffs: &[T]) -> Option<T> {
    let x = e.combine(coeffs);
    let norms = e.atom_norms(&x);
    let full: T = norms.iter().copied().sum();
    (full > T::zero()).then(|| j.norm_from_atoms(&norms) / full)
}

/// Points of the cube surface `{c : ‖c‖_∞ = 1}` on a grid of step `η/√m`;
/// their normalizations form an `η`-net of the coefficient sphere.
fn cube_net(m: usize, eta: f64) -> Vec<Vec<f64>> {
    let steps = ((2.0 * (m as f64).sqrt() / eta).ceil() as usize).max(1);
    let grid: Vec<f64> = (0..=steps).map(|i| -1.0 + 2.0 * i as f64 / steps as f64).collect();
    let total = grid.len().pow(m as u32);
    (0..total)
        .map(|mut idx| {
            (0..m)
                .map(|_| {
                    let v = grid[idx % grid.len()];
                    idx /= grid.len();
                    v
                })
                .collect::<Vec<f64>>()
        })
        .filter(|p| p.iter().any(|v| v.abs() == 1.0))
        .collect()
}

/// Ratios `‖Je‖/‖e‖` for `n_test` Gaussian coefficient vectors of `E` and,
/// when `net_eta` is set and the level is one with `m ≤ 3`, for an `η`-net of
/// the coefficient sphere.
///
/// The change of density is folded into the weights of `J`, so `‖Je‖ =
/// Σ_k α_k ‖e(i_k)‖`. At matrix level `d`, coefficients are Gaussian `d×d`
/// matrices and norms are the lower estimates.
pub fn measure_distortion<T: Scalar>(
    j: &SamplingMap<T>,
    e: &SubspaceL1X<T>,
    n_test: usize,
    seed: u64,
    net_eta: Option<f64>,
) -> Result<DistortionReport<T>> {
    measure(j, e, n_test, seed, net_eta, false)
}

/// [`measure_distortion`] keeping every ratio, random vectors first.
pub fn measure_distortion_samples<T: Scalar>(
    j: &SamplingMap<T>,
    e: &SubspaceL1X<T>,
    n_test: usize,
    seed: u64,
    net_eta: Option<f64>,
) -> Result<DistortionReport<T>> {
    measure(j, e, n_test, seed, net_eta, true)
}

fn measure<T: Scalar>(
    j: &SamplingMap<T>,
    e: &SubspaceL1X<T>,
    n_test: usize,
    seed: u64,
    net_eta: Option<f64>,
    keep: bool,
) -> Result<DistortionReport<T>> {
    if let Some(&bad) = j.indices().iter().find(|&&i| i >= e.n_atoms()) {
        return Err(Error::arg(format!("map samples atom {bad} of {}", e.n_atoms())));
    }
    let len = e.coeff_len();
    let tasks = n_test.div_ceil(VECTORS_PER_TASK);
    let mut ratios: Vec<T> = (0..tasks)
        .into_par_iter()
        .flat_map_iter(|t| {
            let mut rng = seeded(seed, t as u64);
            let count = VECTORS_PER_TASK.min(n_test - t * VECTORS_PER_TASK);
            (0..count)
                .filter_map(|_| {
                    let c: Vec<T> = (0..len).map(|_| gaussian(&mut rng)).collect();
                    ratio(j, e, &c)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut n_net = 0;
    if let Some(eta) = net_eta {
        if !(0.25..2.0).contains(&eta) {
            return Err(Error::arg(format!("net spacing {eta} outside [1/4, 2)")));
        }
        if e.kind() == NormKind::Sup && e.dim() <= 3 {
            let net = cube_net(e.dim(), eta);
            n_net = net.len();
            let more: Vec<T> = net
                .par_iter()
                .filter_map(|p| {
                    let c: Vec<T> = p.iter().map(|v| T::of(*v)).collect();
                    ratio(j, e, &c)
                })
                .collect();
            ratios.extend(more);
        }
    }
    if ratios.is_empty() {
        return Err(Error::arg("no test vectors"));
    }
    Ok(DistortionReport::from_ratios(
        n_test,
        n_net,
        &ratios,
        !e.kind().is_exact(),
        keep,
    ))
}

/// Sampling parameters for [`reduce_until`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducePolicy {
    pub max_rounds: usize,
    /// Factor applied to the sample count after each unsuccessful round.
    pub growth: f64,
    /// Independent draws per round before growing.
    pub redraws: usize,
    /// Constant of the starting sample count.
    pub c0: f64,
    /// Overrides the starting sample count.
    pub start_samples: Option<usize>,
    pub n_test: usize,
    pub net_eta: Option<f64>,
    pub auerbach_iters: usize,
}

impl Default for ReducePolicy {
    fn default() -> Self {
        ReducePolicy {
            max_rounds: 12,
            growth: 1.5,
            redraws: 3,
            c0: 4.0,
            start_samples: None,
            n_test: 1000,
            net_eta: Some(0.25),
            auerbach_iters: 10,
        }
    }
}

/// One sampling attempt of [`reduce_until`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Reduction<T> {
    pub basis: AuerbachBasis<T>,
    pub density: Density<T>,
    /// Samples drawn.
    pub n_samples: usize,
    /// Draws with repeated atoms merged; its length is the reduced atom count.
    pub map: SamplingMap<T>,
    pub report: DistortionReport<T>,
    /// Attempts made, this one included.
    pub attempts: usize,
    pub success: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ReduceError<T: Scalar> {
    #[error(transparent)]
    Input(#[from] Error),
    #[error("no draw reached distortion {target} in {attempts} attempts (best {best_distortion})")]
    Exhausted {
        target: f64,
        attempts: usize,
        best_distortion: f64,
        best: Box<Reduction<T>>,
    },
}

/// Normalizes `E`, builds its density and draws sampling maps until the
/// measured distortion is at most `target_eps`.
///
/// Starts from `sample_size(m, 1, target_eps, c0)` samples, tries
/// `policy.redraws` independent draws per size and grows the size by
/// `policy.growth` between rounds. Test vectors are the same for every draw.
pub fn reduce_until<T: Scalar>(
    e: &SubspaceL1X<T>,
    target_eps: f64,
    policy: &ReducePolicy,
    seed: u64,
) -> Result<Reduction<T>, ReduceError<T>> {
    if !(target_eps > 0.0 && target_eps <= 0.5) {
        return Err(Error::arg(format!("target {target_eps} outside (0, 1/2]")).into());
    }
    if policy.max_rounds == 0 || policy.redraws == 0 || !(policy.growth > 1.0) {
        return Err(Error::arg("need max_rounds ≥ 1, redraws ≥ 1 and growth > 1").into());
    }
    let basis = approximate_auerbach(e, policy.auerbach_iters.max(1))?;
    let density = build_density(&basis.subspace, T::one())?;
    let mut n_samples = match policy.start_samples {
        Some(n) => n.max(1),
        None => sample_size(e.dim(), 1.0, target_eps, policy.c0)?,
    };
    let test_seed = derive_seed(seed, 0);
    let mut best: Option<Reduction<T>> = None;
    let mut attempts = 0;
    for _ in 0..policy.max_rounds {
        for _ in 0..policy.redraws {
            attempts += 1;
            let raw = sample_and_map(&density, n_samples, derive_seed(seed, attempts as u64))?;
            let map = raw.consolidate();
            let report = measure_distortion(&map, &basis.subspace, policy.n_test, test_seed, policy.net_eta)?;
            let success = report.distortion <= T::of(target_eps);
            let better = best.as_ref().is_none_or(|b| report.distortion < b.report.distortion);
            if success || better {
                let r = Reduction {
                    basis: basis.clone(),
                    density: density.clone(),
                    n_samples,
                    map,
                    report,
                    attempts,
                    success,
                };
                if success {
                    return Ok(r);
                }
                best = Some(r);
            }
        }
        n_samples = ((n_samples as f64) * policy.growth).ceil() as usize;
    }
    let best = best.expect("at least one attempt");
    Err(ReduceError::Exhausted {
        target: target_eps,
        attempts,
        best_distortion: best.report.distortion.to_f64_lossy(),
        best: Box::new(best),
    })
}
