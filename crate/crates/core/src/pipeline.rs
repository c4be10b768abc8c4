//! End-to-end question reduction for the noise-kernel game.
//!
//! The noise operator `V` is cut down to the subspace `H` on which the
//! rank-one measurement map `U` acts, the images `Ṽθ_i = V Rθ_i` of an
//! orthonormal basis of `H` are sampled down to fewer questions by the
//! empirical method, and the sampled images `Tθ_i = J Ṽθ_i` define the reduced
//! Bell functional `(1/‖T‖²) Σ_i Tθ_i ⊗ Tθ_i`.

use serde::{Deserialize, Serialize};

use crate::boolean_cube::{build_cosets, is_power_of_two, noise_convolve, ConvolutionMode, CubeFunction, NoiseParams};
use crate::empirical::{reduce_until, NormKind, ReduceError, ReducePolicy, Reduction, SubspaceL1X};
use crate::error::{Error, Result};
use crate::games::{bell_to_game, build_kv_tensor, pad_answers, BellTensor, GameTensor};
use crate::numkit::{gram_schmidt_rows_default, svd, DenseMatrix};
use crate::values::{
    classical_value_bruteforce, classical_value_heuristic, kv_me_strategy, me_functional_sum_of_squares,
    me_state_value, oh_map_norm, NormMode, OhMap, DEFAULT_CLASSICAL_BUDGET, DEFAULT_EXTREME_BUDGET,
};

/// Largest cube dimension the pipeline accepts.
pub const MAX_PIPELINE_BITS: u32 = 8;

/// How far a reported number can be trusted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rigor {
    Exact,
    Lower,
    Upper,
    Estimator,
}

impl Rigor {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rigor::Exact => "exact",
            Rigor::Lower => "lower",
            Rigor::Upper => "upper",
            Rigor::Estimator => "estimator",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub rigor: Rigor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicalMethod {
    Bruteforce,
    Heuristic,
}

impl ClassicalMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassicalMethod::Bruteforce => "bruteforce",
            ClassicalMethod::Heuristic => "heuristic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEstimate {
    pub value: f64,
    pub rigor: Rigor,
    pub method: ClassicalMethod,
}

/// Search limits shared by the norm and value estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    /// Cap on deterministic strategy pairs for exact classical values.
    pub classical: u64,
    /// Cap on extreme points for exact map norms.
    pub extreme: u64,
    /// Restarts for the heuristics.
    pub restarts: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            classical: DEFAULT_CLASSICAL_BUDGET,
            extreme: DEFAULT_EXTREME_BUDGET,
            restarts: 64,
        }
    }
}

/// `1/ln(max(n, 3))`.
pub fn default_eps_noise(n: u32) -> f64 {
    1.0 / (n.max(3) as f64).ln()
}

fn check_n(n: u32) -> Result<()> {
    if !is_power_of_two(n as usize) || !(2..=MAX_PIPELINE_BITS).contains(&n) {
        return Err(Error::arg(format!("n = {n} must be 2, 4 or 8")));
    }
    Ok(())
}

/// Orthonormal basis of the active subspace and its images under `V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveSubspace {
    pub n: u32,
    pub eps_noise: f64,
    /// `s × 2^n`, orthonormal rows spanning the row space of `UV`.
    pub r: DenseMatrix<f64>,
    /// `Ṽθ_i = V(Rθ_i)` in `ℓ1^N(ℓ∞^n)` through the coset identification.
    pub vt: OhMap<f64>,
}

impl ActiveSubspace {
    pub fn s(&self) -> usize {
        self.r.rows()
    }
}

/// `UV` as an `n² × 2^n` matrix: column `x` is `Σ_y V(x,y) h_y h_yᵀ` flattened.
pub fn uv_matrix(n: u32, eps_noise: f64) -> Result<DenseMatrix<f64>> {
    let params = NoiseParams::new(n, eps_noise)?;
    let len = 1usize << n;
    let nn = n as usize;
    // Row (a, b) as a function of y is (1/n)(−1)^{y_a + y_b}; apply V to it.
    let mut data = Vec::with_capacity(nn * nn * len);
    for a in 0..nn {
        for b in 0..nn {
            let f = CubeFunction::from_fn(n, |y| {
                let s = ((y >> a) ^ (y >> b)) & 1;
                if s == 0 {
                    1.0 / nn as f64
                } else {
                    -1.0 / nn as f64
                }
            })?;
            data.extend(noise_convolve(&f, &params, ConvolutionMode::Spectral)?.into_values());
        }
    }
    DenseMatrix::new(nn * nn, len, data)
}

pub fn build_reduced_subspace(n: u32, eps_noise: f64) -> Result<ActiveSubspace> {
    check_n(n)?;
    let params = NoiseParams::new(n, eps_noise)?;
    let cosets = build_cosets(n)?;
    let r = gram_schmidt_rows_default(&uv_matrix(n, eps_noise)?);
    let s = r.rows();
    if s == 0 || s > (n * n) as usize {
        return Err(Error::Numerical(format!("active subspace has dimension {s}")));
    }
    let len = 1u64 << n;
    let columns = (0..s)
        .map(|i| {
            let f = CubeFunction::new(r.row(i).to_vec())?;
            let v = noise_convolve(&f, &params, ConvolutionMode::Spectral)?;
            let mut col = vec![0.0; len as usize];
            for g in 0..len {
                col[cosets.flat_index(g)] = v.values()[g as usize];
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;
    let vt = OhMap::new(cosets.num_cosets(), n as usize, columns)?;
    Ok(ActiveSubspace { n, eps_noise, r, vt })
}

/// Inputs of [`run_reduction`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub n: u32,
    /// Defaults to [`default_eps_noise`].
    pub eps_noise: Option<f64>,
    pub target_eps: f64,
    /// `1` measures distortion with exact `ℓ∞^n` norms, `d > 1` with estimated
    /// `S_1^d[ℓ∞^n]` norms.
    pub level_d: usize,
    pub policy: ReducePolicy,
    pub budgets: Budgets,
    pub seed: u64,
}

impl ReductionConfig {
    pub fn new(n: u32) -> Self {
        ReductionConfig {
            n,
            eps_noise: None,
            target_eps: 0.5,
            level_d: 1,
            policy: ReducePolicy::default(),
            budgets: Budgets::default(),
            seed: 0,
        }
    }

    pub fn eps_noise(&self) -> f64 {
        self.eps_noise.unwrap_or_else(|| default_eps_noise(self.n))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    pub n: u32,
    pub eps_noise: f64,
    pub target_eps: f64,
    pub level_d: usize,
    pub seed: u64,
    pub active: ActiveSubspace,
    pub reduction: Reduction<f64>,
    /// `Tθ_i = J Ṽθ_i` in `ℓ1^m(ℓ∞^n)`.
    pub t: OhMap<f64>,
    pub t_norm: Estimate,
    pub vt_norm: Estimate,
    /// `(1/‖T‖²) Σ_i Tθ_i ⊗ Tθ_i`.
    pub m_reduced: BellTensor<f64>,
    pub g_reduced: GameTensor<f64>,
    /// Scale `L` of the conversion to `g_reduced`.
    pub game_scale: f64,
}

impl ReducedModel {
    pub fn s(&self) -> usize {
        self.active.s()
    }

    /// Reduced question count.
    pub fn m(&self) -> usize {
        self.reduction.map.n_samples()
    }

    /// The element `e` of the span of `Ṽ` with `Je = y`, by least squares on
    /// the images `Tθ_i`.
    pub fn left_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let cols = self.t.columns();
        let rows = cols[0].len();
        if y.len() != rows {
            return Err(Error::Dimension {
                expected: rows,
                found: y.len(),
            });
        }
        let a = DenseMatrix::from_fn(rows, cols.len(), |p, i| cols[i][p]);
        let f = svd(&a);
        let tol = f.s.first().copied().unwrap_or(0.0) * 1e-12;
        let uty: Vec<f64> = (0..f.s.len())
            .map(|k| {
                if f.s[k] > tol {
                    (0..rows).map(|p| f.u[(p, k)] * y[p]).sum::<f64>() / f.s[k]
                } else {
                    0.0
                }
            })
            .collect();
        let coeffs: Vec<f64> = (0..cols.len())
            .map(|i| (0..f.s.len()).map(|k| f.v[(i, k)] * uty[k]).sum())
            .collect();
        let vt = self.active.vt.columns();
        Ok((0..vt[0].len())
            .map(|p| coeffs.iter().zip(vt).map(|(c, v)| c * v[p]).sum())
            .collect())
    }
}

fn map_norm(v: &OhMap<f64>, budgets: &Budgets, seed: u64) -> Result<Estimate> {
    let mode = NormMode::Exact {
        budget: budgets.extreme,
    };
    match oh_map_norm(v, mode, seed) {
        Ok(r) => Ok(Estimate {
            value: r.value,
            rigor: Rigor::Exact,
        }),
        Err(Error::BudgetExceeded { .. }) => {
            let r = oh_map_norm(
                v,
                NormMode::Heuristic {
                    restarts: budgets.restarts,
                },
                seed,
            )?;
            Ok(Estimate {
                value: r.value,
                rigor: Rigor::Lower,
            })
        }
        Err(e) => Err(e),
    }
}

/// Builds the active subspace, reduces its question count and assembles the
/// reduced Bell functional and game. Deterministic given `config.seed`.
pub fn run_reduction(config: &ReductionConfig) -> Result<ReducedModel, ReduceError<f64>> {
    let n = config.n;
    check_n(n)?;
    let eps_noise = config.eps_noise();
    if config.level_d == 0 {
        return Err(Error::arg("level_d must be positive").into());
    }
    let active = build_reduced_subspace(n, eps_noise)?;
    let kind = if config.level_d == 1 {
        NormKind::Sup
    } else {
        NormKind::BlockS1 { d: config.level_d }
    };
    let e = SubspaceL1X::new(
        active.vt.num_questions(),
        n as usize,
        kind,
        active.vt.columns().to_vec(),
    )?;
    let reduction = reduce_until(&e, config.target_eps, &config.policy, config.seed)?;
    let block = n as usize;
    let t_cols = active
        .vt
        .columns()
        .iter()
        .map(|c| reduction.map.apply(c, block))
        .collect();
    let t = OhMap::new(reduction.map.n_samples(), block, t_cols)?;
    let t_norm = map_norm(&t, &config.budgets, config.seed)?;
    let vt_norm = map_norm(&active.vt, &config.budgets, config.seed)?;
    if !(t_norm.value > 0.0) {
        return Err(Error::Degenerate("reduced map vanishes".into()).into());
    }
    let m_reduced = t.symmetric_square().scaled(1.0 / (t_norm.value * t_norm.value));
    let (g_reduced, game_scale) = bell_to_game(&pad_answers(&m_reduced))?;
    Ok(ReducedModel {
        n,
        eps_noise,
        target_eps: config.target_eps,
        level_d: config.level_d,
        seed: config.seed,
        active,
        reduction,
        t,
        t_norm,
        vt_norm,
        m_reduced,
        g_reduced,
        game_scale,
    })
}

/// All numbers of one reduction run.
///
/// Quantum values come from explicit strategies and are lower bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub n: u32,
    #[serde(rename = "N")]
    pub num_questions: usize,
    pub m: usize,
    pub s: usize,
    pub eps_noise: f64,
    pub target_eps: f64,
    pub n_samples: usize,
    pub distortion: f64,
    pub distortion_rigor: Rigor,
    pub level_d: usize,
    #[serde(rename = "T_norm")]
    pub t_norm: Estimate,
    #[serde(rename = "Vt_norm")]
    pub vt_norm: Estimate,
    pub classical_original: ClassicalEstimate,
    pub classical_reduced: ClassicalEstimate,
    pub quantum_me_original: f64,
    pub quantum_me_reduced: f64,
    pub ratio_original: Estimate,
    pub ratio_reduced: Estimate,
    pub seed: u64,
    pub wall_ms: Option<u64>,
}

fn classical(m: &BellTensor<f64>, budgets: &Budgets, seed: u64) -> Result<ClassicalEstimate> {
    match classical_value_bruteforce(m, budgets.classical) {
        Ok(c) => Ok(ClassicalEstimate {
            value: c.value,
            rigor: Rigor::Exact,
            method: ClassicalMethod::Bruteforce,
        }),
        Err(Error::BudgetExceeded { .. }) => Ok(ClassicalEstimate {
            value: classical_value_heuristic(m, budgets.restarts, seed).value,
            rigor: Rigor::Lower,
            method: ClassicalMethod::Heuristic,
        }),
        Err(e) => Err(e),
    }
}

/// `quantum / classical`: a lower bound on the true ratio when the classical
/// value is exact, an estimate otherwise.
fn ratio(quantum: f64, classical: &ClassicalEstimate, quantum_exact_scale: bool) -> Estimate {
    let rigor = if classical.rigor == Rigor::Exact && quantum_exact_scale {
        Rigor::Lower
    } else {
        Rigor::Estimator
    };
    Estimate {
        value: quantum / classical.value,
        rigor,
    }
}

/// Classical and maximally entangled values of the original and reduced
/// functionals, with their ratios.
///
/// The reduced quantum value uses the strategy transported through the
/// sampling map: since `J` is injective on the span of `Ṽ`, it equals the
/// maximally entangled functional of `(1/‖T‖²) Σ_i UṼθ_i ⊗ UṼθ_i`.
pub fn evaluate_report(model: &ReducedModel, budgets: &Budgets, seed: u64) -> Result<ReductionReport> {
    let kv = build_kv_tensor(model.n, model.eps_noise)?;
    let strategy = kv_me_strategy(&kv.cosets);
    let quantum_original = me_state_value(&kv.tensor, &strategy)?;
    let classical_original = classical(&kv.tensor, budgets, seed)?;
    let t2 = model.t_norm.value * model.t_norm.value;
    let quantum_reduced = me_functional_sum_of_squares(model.active.vt.columns(), model.n as usize, &strategy)? / t2;
    let classical_reduced = classical(&model.m_reduced, budgets, seed)?;
    let distortion_rigor = if model.level_d == 1 {
        Rigor::Lower
    } else {
        Rigor::Estimator
    };
    Ok(ReductionReport {
        n: model.n,
        num_questions: kv.num_questions(),
        m: model.m(),
        s: model.s(),
        eps_noise: model.eps_noise,
        target_eps: model.target_eps,
        n_samples: model.reduction.n_samples,
        distortion: model.reduction.report.distortion,
        distortion_rigor,
        level_d: model.level_d,
        t_norm: model.t_norm,
        vt_norm: model.vt_norm,
        ratio_original: ratio(quantum_original, &classical_original, true),
        ratio_reduced: ratio(quantum_reduced, &classical_reduced, model.t_norm.rigor == Rigor::Exact),
        classical_original,
        classical_reduced,
        quantum_me_original: quantum_original,
        quantum_me_reduced: quantum_reduced,
        seed,
        wall_ms: None,
    })
}

/// Column names of [`ReductionReport::csv_row`], nested fields joined by `.`.
pub const CSV_HEADER: [&str; 28] = [
    "n",
    "N",
    "m",
    "s",
    "eps_noise",
    "target_eps",
    "n_samples",
    "distortion",
    "distortion_rigor",
    "level_d",
    "T_norm.value",
    "T_norm.rigor",
    "Vt_norm.value",
    "Vt_norm.rigor",
    "classical_original.value",
    "classical_original.rigor",
    "classical_original.method",
    "classical_reduced.value",
    "classical_reduced.rigor",
    "classical_reduced.method",
    "quantum_me_original",
    "quantum_me_reduced",
    "ratio_original.value",
    "ratio_original.rigor",
    "ratio_reduced.value",
    "ratio_reduced.rigor",
    "seed",
    "wall_ms",
];

impl ReductionReport {
    pub fn csv_header() -> String {
        CSV_HEADER.join(",")
    }

    /// One CSV row; floats use the shortest representation that parses back
    /// to the same value, and a missing `wall_ms` is an empty cell.
    pub fn csv_row(&self) -> String {
        let f = |v: f64| format!("{v:?}");
        let cells: Vec<String> = vec![
            self.n.to_string(),
            self.num_questions.to_string(),
            self.m.to_string(),
            self.s.to_string(),
            f(self.eps_noise),
            f(self.target_eps),
            self.n_samples.to_string(),
            f(self.distortion),
            self.distortion_rigor.as_str().into(),
            self.level_d.to_string(),
            f(self.t_norm.value),
            self.t_norm.rigor.as_str().into(),
            f(self.vt_norm.value),
            self.vt_norm.rigor.as_str().into(),
            f(self.classical_original.value),
            self.classical_original.rigor.as_str().into(),
            self.classical_original.method.as_str().into(),
            f(self.classical_reduced.value),
            self.classical_reduced.rigor.as_str().into(),
            self.classical_reduced.method.as_str().into(),
            f(self.quantum_me_original),
            f(self.quantum_me_reduced),
            f(self.ratio_original.value),
            self.ratio_original.rigor.as_str().into(),
            f(self.ratio_reduced.value),
            self.ratio_reduced.rigor.as_str().into(),
            self.seed.to_string(),
            self.wall_ms.map(|w| w.to_string()).unwrap_or_default(),
        ];
        cells.join(",")
    }
}
