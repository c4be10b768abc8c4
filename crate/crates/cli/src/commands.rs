use std::path::Path;
use std::time::Instant;

use kvred::boolean_cube::{build_cosets, fwht, fwht_in_place, inverse_fwht, is_power_of_two};
use kvred::empirical::ReduceError;
use kvred::games::{build_kv_tensor, build_kv_tensor_spectral, chsh_game};
use kvred::pipeline::{
    build_reduced_subspace, default_eps_noise, evaluate_report, run_reduction, ClassicalEstimate, ClassicalMethod,
    ReductionConfig, ReductionReport, Rigor,
};
use kvred::values::{
    chsh_optimal_strategy, classical_value_bruteforce, classical_value_heuristic, kv_me_strategy,
    kv_quantum_closed_form, me_state_value,
};
use kvred::{BellTensor, CubeFunction, ProjectiveStrategyME, SamplingMap};
use serde::{Deserialize, Serialize};

use crate::output::{csv_text, emit, json_text, num, read_text, CliError};
use crate::{BenchArgs, BuildKvArgs, ClassicalChoice, Format, ReduceArgs, ValuesArgs, VerifyArgs};

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

pub fn build_kv(a: &BuildKvArgs) -> Result<(), CliError> {
    let eps = a.eps.unwrap_or_else(|| default_eps_noise(a.n));
    let kv = build_kv_tensor(a.n, eps)?;
    let text = match a.common.format {
        Format::Json => {
            let mut s = kv.tensor.to_json();
            s.push('\n');
            s
        }
        Format::Csv => {
            let (na, ka, nb, kb) = kv.tensor.shape();
            let mut rows = Vec::with_capacity(kv.tensor.coeffs().len());
            for x in 0..na {
                for i in 0..ka {
                    for y in 0..nb {
                        for j in 0..kb {
                            rows.push(format!("{x},{i},{y},{j},{}", num(kv.tensor.get(x, i, y, j))));
                        }
                    }
                }
            }
            csv_text("x,a,y,b,value", &rows)
        }
    };
    emit(a.common.out.as_deref(), &text)
}

/// Output of the `values` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValuesReport {
    /// `[N_A, K_A, N_B, K_B]`.
    pub shape: [usize; 4],
    pub classical: ClassicalEstimate,
    /// Value of an explicit strategy with the maximally entangled state.
    pub quantum_me: Option<f64>,
    pub seed: u64,
    pub wall_ms: Option<u64>,
}

pub const VALUES_CSV_HEADER: &str =
    "N_A,K_A,N_B,K_B,classical.value,classical.rigor,classical.method,quantum_me,seed,wall_ms";

impl ValuesReport {
    fn csv_row(&self) -> String {
        let [na, ka, nb, kb] = self.shape;
        format!(
            "{na},{ka},{nb},{kb},{},{},{},{},{},{}",
            num(self.classical.value),
            self.classical.rigor.as_str(),
            self.classical.method.as_str(),
            self.quantum_me.map(num).unwrap_or_default(),
            self.seed,
            self.wall_ms.map(|w| w.to_string()).unwrap_or_default()
        )
    }
}

/// The Khot-Vishnoi strategy when the shape is that of a Khot-Vishnoi tensor.
fn inferred_strategy(m: &BellTensor) -> Option<ProjectiveStrategyME> {
    let (na, ka, nb, kb) = m.shape();
    if ka != kb || na != nb || !(2..=16).contains(&ka) || !is_power_of_two(ka) {
        return None;
    }
    if (1usize << ka) / ka != na {
        return None;
    }
    let cosets = build_cosets(ka as u32).ok()?;
    Some(kv_me_strategy(&cosets))
}

pub fn values(a: &ValuesArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let m = BellTensor::from_json(&read_text(&a.input)?)?;
    let classical = match a.classical {
        ClassicalChoice::Brute => ClassicalEstimate {
            value: classical_value_bruteforce(&m, a.budget)?.value,
            rigor: Rigor::Exact,
            method: ClassicalMethod::Bruteforce,
        },
        ClassicalChoice::Heuristic => {
            if a.restarts == 0 {
                return Err(CliError::Usage("--restarts must be positive".into()));
            }
            ClassicalEstimate {
                value: classical_value_heuristic(&m, a.restarts, a.common.seed).value,
                rigor: Rigor::Lower,
                method: ClassicalMethod::Heuristic,
            }
        }
    };
    let quantum_me = match a.quantum {
        None => None,
        Some(_) => {
            let strat = match &a.strategy {
                Some(p) => serde_json::from_str::<ProjectiveStrategyME>(&read_text(p)?)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
                None => inferred_strategy(&m)
                    .ok_or_else(|| CliError::Usage("no strategy for this tensor shape; pass --strategy".into()))?,
            };
            Some(me_state_value(&m, &strat)?)
        }
    };
    let (na, ka, nb, kb) = m.shape();
    let report = ValuesReport {
        shape: [na, ka, nb, kb],
        classical,
        quantum_me,
        seed: a.common.seed,
        wall_ms: a.common.timings.then(|| elapsed_ms(start)),
    };
    let text = match a.common.format {
        Format::Json => json_text(&report),
        Format::Csv => csv_text(VALUES_CSV_HEADER, &[report.csv_row()]),
    };
    emit(a.common.out.as_deref(), &text)
}

pub fn reduce(a: &ReduceArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let mut config = ReductionConfig::new(a.n);
    config.eps_noise = a.eps;
    config.target_eps = a.target_eps;
    config.level_d = a.level_d;
    config.policy.c0 = a.c0;
    config.seed = a.common.seed;
    if a.restarts == 0 {
        return Err(CliError::Usage("--restarts must be positive".into()));
    }
    config.budgets.restarts = a.restarts;
    if let Some(b) = a.budget {
        config.budgets.classical = b;
        config.budgets.extreme = b;
    }
    let model = match run_reduction(&config) {
        Ok(m) => m,
        Err(ReduceError::Input(e)) => return Err(e.into()),
        Err(ReduceError::Exhausted {
            target,
            attempts,
            best_distortion,
            best,
        }) => {
            return Err(CliError::Reduction(format!(
            "distortion target {target} not reached after {attempts} attempts; best {best_distortion} with {} samples",
            best.n_samples
        )))
        }
    };
    let mut report = evaluate_report(&model, &config.budgets, config.seed)?;
    if a.common.timings {
        report.wall_ms = Some(elapsed_ms(start));
    }
    let text = match a.common.format {
        Format::Json => json_text(&report),
        Format::Csv => csv_text(&ReductionReport::csv_header(), &[report.csv_row()]),
    };
    emit(a.common.out.as_deref(), &text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// The measured quantity the check compares.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub kind: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn check(name: &str, pass: bool, value: f64) -> Check {
    Check {
        name: name.into(),
        pass,
        value,
    }
}

fn suite(n: u32) -> Result<Vec<Check>, CliError> {
    if ![2, 4, 8].contains(&n) {
        return Err(CliError::Usage(format!(
            "--n = {n}: the checks run for n in {{2, 4, 8}}"
        )));
    }
    let mut out = Vec::new();
    let f = CubeFunction::from_fn(n, |x| ((x.wrapping_mul(2654435761) % 1000) as f64) / 1000.0 - 0.5)?;
    let back = inverse_fwht(&fwht(&f));
    let d = f.max_abs_diff(&back);
    out.push(check("fwht_round_trip", d <= 1e-10, d));

    let eps = default_eps_noise(n);
    let kv = build_kv_tensor(n, eps)?;
    let d = kv.tensor.max_abs_diff(&build_kv_tensor_spectral(n, eps)?)?;
    out.push(check("kv_spectral_match", d <= 1e-10, d));
    let (na, ka, _, _) = kv.tensor.shape();
    let mut worst = 0.0f64;
    for x in 0..na {
        for i in 0..ka {
            let s: f64 = kv.tensor.row(x, i).iter().sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    out.push(check("kv_row_sums", worst <= 1e-10, worst));
    let total = (kv.tensor.sum() - (1u64 << n) as f64).abs();
    out.push(check("kv_total_sum", total <= 1e-10 * (1u64 << n) as f64, total));

    let q = me_state_value(&kv.tensor, &kv_me_strategy(&kv.cosets))?;
    let closed = kv_quantum_closed_form(n, eps)?;
    let d = (q - closed.value).abs();
    out.push(check("kv_quantum_closed_form", d <= 1e-12 * closed.value.max(1.0), d));
    out.push(check(
        "kv_quantum_above_lower_bound",
        q > closed.lower_bound,
        q - closed.lower_bound,
    ));

    let chsh = chsh_game::<f64>();
    let c = classical_value_bruteforce(&chsh, kvred::values::DEFAULT_CLASSICAL_BUDGET)?.value;
    out.push(check("chsh_classical", c == 0.75, c));
    let q = me_state_value(&chsh, &chsh_optimal_strategy())?;
    let target = (std::f64::consts::PI / 8.0).cos().powi(2);
    out.push(check("chsh_quantum", (q - target).abs() <= 1e-9, q));

    let s = build_reduced_subspace(n, eps)?.s();
    out.push(check("active_dimension", s <= (n * n) as usize, s as f64));
    Ok(out)
}

fn json_keys(v: &serde_json::Value) -> Vec<&str> {
    v.as_object()
        .map(|o| o.keys().map(|k| k.as_str()).collect())
        .unwrap_or_default()
}

fn verify_reduction(r: &ReductionReport) -> Vec<Check> {
    let finite = [
        r.eps_noise,
        r.distortion,
        r.t_norm.value,
        r.vt_norm.value,
        r.classical_original.value,
        r.classical_reduced.value,
        r.quantum_me_original,
        r.quantum_me_reduced,
        r.ratio_original.value,
        r.ratio_reduced.value,
    ]
    .iter()
    .all(|v| v.is_finite());
    vec![
        check("finite", finite, 0.0),
        check("distortion_within_target", r.distortion <= r.target_eps, r.distortion),
        check("active_dimension", r.s <= (r.n * r.n) as usize, r.s as f64),
        check("questions_reduced", r.m >= 1 && r.m <= r.num_questions, r.m as f64),
        check(
            "ratio_original",
            r.ratio_original.value == r.quantum_me_original / r.classical_original.value,
            r.ratio_original.value,
        ),
        check(
            "ratio_reduced",
            r.ratio_reduced.value == r.quantum_me_reduced / r.classical_reduced.value,
            r.ratio_reduced.value,
        ),
    ]
}

fn verify_csv(text: &str) -> Result<(String, Vec<Check>), CliError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let (kind, width) = if header == ReductionReport::csv_header() {
        ("reduction_report_csv", kvred::pipeline::CSV_HEADER.len())
    } else if header == VALUES_CSV_HEADER {
        ("values_report_csv", VALUES_CSV_HEADER.split(',').count())
    } else if header == "x,a,y,b,value" {
        ("tensor_csv", 5)
    } else {
        return Err(CliError::Usage("unrecognized CSV header".into()));
    };
    let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    let widths_ok = rows.iter().all(|r| r.split(',').count() == width);
    let numbers_ok = rows.iter().all(|r| {
        r.split(',').all(|c| {
            c.is_empty()
                || c.parse::<f64>().is_ok()
                || ["exact", "lower", "upper", "estimator", "bruteforce", "heuristic"].contains(&c)
        })
    });
    Ok((
        kind.into(),
        vec![
            check("has_rows", !rows.is_empty(), rows.len() as f64),
            check("row_width", widths_ok, width as f64),
            check("cells_parse", numbers_ok, 0.0),
        ],
    ))
}

fn verify_file(path: &Path) -> Result<(String, Vec<Check>), CliError> {
    let text = read_text(path)?;
    if !text.trim_start().starts_with('{') {
        return verify_csv(&text);
    }
    let bad = |e: serde_json::Error| CliError::Usage(format!("{}: {e}", path.display()));
    let v: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    let keys = json_keys(&v);
    if keys.contains(&"classical_reduced") {
        let r: ReductionReport = serde_json::from_value(v).map_err(bad)?;
        Ok(("reduction_report".into(), verify_reduction(&r)))
    } else if keys.contains(&"classical") {
        let r: ValuesReport = serde_json::from_value(v).map_err(bad)?;
        Ok((
            "values_report".into(),
            vec![
                check("classical_nonnegative", r.classical.value >= 0.0, r.classical.value),
                check(
                    "quantum_finite",
                    r.quantum_me.is_none_or(f64::is_finite),
                    r.quantum_me.unwrap_or(0.0),
                ),
            ],
        ))
    } else if keys.contains(&"coeffs") {
        let m: BellTensor = serde_json::from_value(v).map_err(bad)?;
        let finite = m.coeffs().iter().all(|c| c.is_finite());
        Ok(("tensor".into(), vec![check("finite", finite, m.coeffs().len() as f64)]))
    } else if keys.contains(&"indices") {
        let m = SamplingMap::from_json(&text)?;
        Ok((
            "sampling_map".into(),
            vec![check("weights_positive", true, m.n_samples() as f64)],
        ))
    } else if keys.contains(&"alice") {
        let s: ProjectiveStrategyME = serde_json::from_value(v).map_err(bad)?;
        let ok = s.validate().is_ok();
        Ok((
            "strategy".into(),
            vec![check("projective_measurements", ok, s.dim() as f64)],
        ))
    } else {
        Err(CliError::Usage(format!("{}: unrecognized file", path.display())))
    }
}

pub fn verify(a: &VerifyArgs) -> Result<(), CliError> {
    let (kind, checks) = match &a.input {
        Some(p) => verify_file(p)?,
        None => ("invariants".to_string(), suite(a.n)?),
    };
    let pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport { kind, checks, pass };
    let text = match a.common.format {
        Format::Json => json_text(&report),
        Format::Csv => {
            let rows: Vec<String> = report
                .checks
                .iter()
                .map(|c| format!("{},{},{}", c.name, c.pass, num(c.value)))
                .collect();
            csv_text("check,pass,value", &rows)
        }
    };
    emit(a.common.out.as_deref(), &text)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Usage("verification failed".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n: u32,
    pub reps: usize,
    /// Fastest single transform.
    pub best_ms: f64,
    /// `max |f - H⁻¹Hf|` after one round trip.
    pub round_trip_error: f64,
}

pub fn bench_fwht(a: &BenchArgs) -> Result<(), CliError> {
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    let f = CubeFunction::from_fn(a.n, |x| ((x.wrapping_mul(2654435761) % 1000) as f64) / 1000.0 - 0.5)?;
    let mut best = f64::INFINITY;
    let mut data = f.values().to_vec();
    for _ in 0..a.reps {
        data.copy_from_slice(f.values());
        let t = Instant::now();
        fwht_in_place(&mut data)?;
        best = best.min(t.elapsed().as_secs_f64() * 1e3);
    }
    let back = inverse_fwht(&CubeFunction::new(data)?);
    let report = BenchReport {
        n: a.n,
        reps: a.reps,
        best_ms: best,
        round_trip_error: f.max_abs_diff(&back),
    };
    let text = match a.common.format {
        Format::Json => json_text(&report),
        Format::Csv => csv_text(
            "n,reps,best_ms,round_trip_error",
            &[format!(
                "{},{},{},{}",
                report.n,
                report.reps,
                num(report.best_ms),
                num(report.round_trip_error)
            )],
        ),
    };
    emit(a.common.out.as_deref(), &text)
}
