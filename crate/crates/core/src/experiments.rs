//! Monte Carlo harness tying sampling to the analytic limits: MOpN
//! estimation by alternating dual ascent, convergence studies, Bell-pair
//! and MOE experiments, optimal-shape validation, and JSON/CSV emission.
//!
//! Everything is a pure function of (plan, master seed). Trials parallelize
//! over independent seed streams; reductions are order-deterministic.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use faer::{Col, Mat};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{
    bell_overlap, build_rectifier, complementary_on_pure, effective_ops, pair_output_on_bell,
    ChannelKind, KrausFamily, Rectifier,
};
use crate::ensembles::{sample_kraus_family, EnsembleFlavor, GaussStream, SeedSpec};
use crate::freelimits::{
    bell_pair_lower_bound, f_of_values, limit_mopn, mp_edges, quadratic_entropy_bound,
    CoefficientMatrix,
};
use crate::matrixkit::{
    self, bell_state, eig_herm, eigvals_herm, outer, schatten_norm, von_neumann_entropy, CMat,
    HermMat, SchattenIndex,
};
use crate::{Error, Result};

/// Version stamped into every emitted report.
pub const SCHEMA_VERSION: u32 = 1;

/// Stream spacing between (n, trial) cells: k family streams plus room for
/// probe states and restarts.
const STREAM_STRIDE: u64 = 4096;
const AUX_STREAM: u64 = 256;
const RESTART_STREAM: u64 = 512;

fn default_trials() -> usize {
    4
}
fn default_epsilon() -> f64 {
    0.3
}
fn default_p_list() -> Vec<SchattenIndex> {
    vec![SchattenIndex::Infinity]
}
fn default_probes() -> usize {
    8
}

/// Full description of a Monte Carlo run; reports echo it for exact replay.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub flavor: EnsembleFlavor,
    pub k: usize,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_p_list")]
    pub p_list: Vec<SchattenIndex>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Absent in a config file means "draw one and print it"; the resolved
    /// seed is echoed back in every report.
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl ExperimentPlan {
    pub fn new(flavor: EnsembleFlavor, k: usize, n_grid: Vec<usize>) -> Self {
        Self {
            flavor,
            k,
            n_grid,
            p_list: default_p_list(),
            trials: default_trials(),
            master_seed: None,
            epsilon: default_epsilon(),
            probes: default_probes(),
            tolerances: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidPlan {
                field: "k".into(),
                msg: format!("need k >= 2, got {}", self.k),
            });
        }
        if self.n_grid.is_empty() {
            return Err(Error::InvalidPlan {
                field: "n_grid".into(),
                msg: "at least one dimension required".into(),
            });
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPlan {
                field: "n_grid".into(),
                msg: "dimensions must be strictly ascending".into(),
            });
        }
        if self.trials < 1 {
            return Err(Error::InvalidPlan {
                field: "trials".into(),
                msg: "need trials >= 1".into(),
            });
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidPlan {
                field: "epsilon".into(),
                msg: format!("need 0 < epsilon < 1, got {}", self.epsilon),
            });
        }
        if self.tolerances.values().any(|&v| v <= 0.0) {
            return Err(Error::InvalidPlan {
                field: "tolerances".into(),
                msg: "all tolerances must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64> {
        self.master_seed.ok_or_else(|| Error::InvalidPlan {
            field: "master_seed".into(),
            msg: "seed must be resolved before running".into(),
        })
    }

    /// Base stream for the (grid-index, trial) cell.
    fn cell_seed(&self, gi: usize, trial: usize) -> Result<SeedSpec> {
        Ok(SeedSpec::new(
            self.seed()?,
            ((gi * self.trials + trial) as u64) * STREAM_STRIDE,
        ))
    }

    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

/// Timestamps live here, outside the deterministic payload.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportMeta {
    pub unix_time: u64,
}

impl ReportMeta {
    fn now() -> Self {
        let unix_time = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self { unix_time }
    }
}

// ---------------------------------------------------------------------------
// power iteration on implicitly-given PSD matrices
// ---------------------------------------------------------------------------

fn rayleigh(apply: &impl Fn(&Col<Complex64>) -> Col<Complex64>, x: &Col<Complex64>) -> f64 {
    let y = apply(x);
    let mut acc = Complex64::ZERO;
    for i in 0..x.nrows() {
        acc += x[i].conj() * y[i];
    }
    acc.re
}

/// Power iteration for the top eigenpair of a PSD operator given by matvec.
/// Starting from `start` the Rayleigh quotient is non-decreasing, which the
/// dual-ascent scheme relies on.
fn power_top(
    apply: impl Fn(&Col<Complex64>) -> Col<Complex64>,
    start: Col<Complex64>,
    max_steps: usize,
    tol: f64,
) -> (f64, Col<Complex64>) {
    let mut x = start;
    matrixkit::normalize(&mut x);
    let mut val = rayleigh(&apply, &x);
    for _ in 0..max_steps {
        let mut y = apply(&x);
        matrixkit::normalize(&mut y);
        let next = rayleigh(&apply, &y);
        x = y;
        if (next - val).abs() <= tol * (1.0 + next.abs()) {
            val = next;
            break;
        }
        val = next;
    }
    (val, x)
}

fn random_unit(n: usize, seed: SeedSpec) -> Col<Complex64> {
    let mut g = GaussStream::new(seed);
    let mut x = Col::from_fn(n, |_| g.complex_normal(1.0));
    matrixkit::normalize(&mut x);
    x
}

// ---------------------------------------------------------------------------
// quadratic forms in the Kraus operators
// ---------------------------------------------------------------------------

/// Decomposes A = Σ λ_m v_m v_m* and forms Z_m = Σ_i conj((v_m)_i) K_i, so
/// that Σ a_{j,i} K_j* K_i = Σ_m λ_m Z_m* Z_m without k² matrix products.
fn eig_combinations(ops: &[CMat], a: &CoefficientMatrix) -> Result<Vec<(f64, CMat)>> {
    let (vals, u) = eig_herm(a.matrix())?;
    let k = ops.len();
    let n = ops[0].nrows();
    let mut out = Vec::with_capacity(k);
    for (m, &lam) in vals.values().iter().enumerate() {
        let lam = lam.max(0.0);
        if lam <= 1e-14 {
            continue;
        }
        let mut z = Mat::<Complex64>::zeros(n, n);
        for (i, op) in ops.iter().enumerate() {
            let c = u[(i, m)].conj();
            if c.norm() > 0.0 {
                z += matrixkit::scale(op, c);
            }
        }
        out.push((lam, z));
    }
    Ok(out)
}

/// f_n(A) = λ_max(Σ a_{j,i} K_j* K_i), the finite-n quadratic form norm
/// whose limit is f(A).
pub fn quadratic_form_norm(ops: &[CMat], a: &CoefficientMatrix, seed: SeedSpec) -> Result<f64> {
    let combos = eig_combinations(ops, a)?;
    let n = ops[0].nrows();
    let apply = |x: &Col<Complex64>| -> Col<Complex64> {
        let mut acc = Col::<Complex64>::zeros(n);
        for (lam, z) in &combos {
            let t = z * x;
            let back = z.adjoint() * &t;
            for i in 0..n {
                acc[i] += back[i] * *lam;
            }
        }
        acc
    };
    let (val, _) = power_top(apply, random_unit(n, seed), 800, 1e-12);
    Ok(val)
}

// ---------------------------------------------------------------------------
// MOpN estimation
// ---------------------------------------------------------------------------

/// Outcome of the alternating dual-ascent estimate.
#[derive(Clone, Debug)]
pub struct MopnEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// ‖Φ^c(|x⟩⟨x|)‖_p after each full round, non-decreasing by construction.
    pub objective: Vec<f64>,
    pub witness_x: Col<Complex64>,
    pub witness_a: HermMat,
}

/// Dual maximizer step: for p = ∞ the Hölder dual degenerates to the top
/// eigenprojector (q = 1), otherwise Appendix-C duality applies.
fn dual_step(b: &HermMat, p: SchattenIndex) -> Result<(f64, HermMat)> {
    match p {
        SchattenIndex::Infinity => {
            let (vals, u) = eig_herm(b)?;
            let k = b.dim();
            let v = Col::from_fn(k, |i| u[(i, 0)]);
            Ok((vals.max(), HermMat::symmetrize(outer(&v))?))
        }
        SchattenIndex::Finite(_) => {
            let a = matrixkit::holder_dual_maximizer(b, p)?;
            Ok((schatten_norm(b, p)?, a))
        }
    }
}

/// Alternating maximization of ‖Φ^c(|x⟩⟨x|)‖_p: given A, x moves to the top
/// eigenvector of M(A) = (1/k) Σ a_{j,i} K_j* K_i; given x, A moves to the
/// Hölder dual maximizer of B = Φ^c(|x⟩⟨x|). Each half-step has a
/// closed-form optimum, so the objective is non-decreasing. Best over
/// `restarts` random initial vectors.
pub fn estimate_mopn(
    fam: &KrausFamily,
    kind: ChannelKind,
    rect: Option<&Rectifier>,
    p: SchattenIndex,
    restarts: usize,
    max_iters: usize,
    seed: SeedSpec,
) -> Result<MopnEstimate> {
    if restarts < 4 {
        return Err(Error::InvalidPlan {
            field: "restarts".into(),
            msg: format!("need restarts >= 4, got {restarts}"),
        });
    }
    let ops = effective_ops(fam, kind, rect)?;
    let scale = fam.scale();
    let n = fam.n();
    let tol = 1e-9;

    let run_one = |r: usize| -> Result<MopnEstimate> {
        let mut x = random_unit(n, seed.offset(RESTART_STREAM + r as u64));
        let mut objective = Vec::new();
        let mut best_a: Option<HermMat> = None;
        let mut converged = false;
        let mut iterations = 0;
        let mut stalled = 0;
        for it in 0..max_iters {
            iterations = it + 1;
            let b = complementary_on_pure(&ops, scale, &x);
            let (val, a) = dual_step(&b, p)?;
            objective.push(val);
            best_a = Some(a.clone());
            if objective.len() >= 2 {
                let prev = objective[objective.len() - 2];
                if val - prev < tol * (1.0 + val.abs()) {
                    stalled += 1;
                    if stalled >= 3 {
                        converged = true;
                        break;
                    }
                } else {
                    stalled = 0;
                }
            }
            // x-step: power iteration on M(A), started at the current x so
            // the Rayleigh quotient (the objective) cannot decrease
            let combos = eig_combinations(&ops, &CoefficientMatrix::new(a)?)?;
            let apply = |v: &Col<Complex64>| -> Col<Complex64> {
                let mut acc = Col::<Complex64>::zeros(n);
                for (lam, z) in &combos {
                    let t = z * v;
                    let back = z.adjoint() * &t;
                    let w = lam * scale;
                    for i in 0..n {
                        acc[i] += back[i] * w;
                    }
                }
                acc
            };
            let (_, next_x) = power_top(apply, x.clone(), 400, 1e-12);
            x = next_x;
        }
        let value = objective.last().copied().unwrap_or(0.0);
        Ok(MopnEstimate {
            value,
            converged,
            iterations,
            objective,
            witness_x: x,
            witness_a: best_a.expect("at least one iteration ran"),
        })
    };

    let runs: Vec<Result<MopnEstimate>> = (0..restarts).into_par_iter().map(run_one).collect();
    let mut best: Option<MopnEstimate> = None;
    for r in runs {
        let r = r?;
        if best.as_ref().map_or(true, |b| r.value > b.value) {
            best = Some(r);
        }
    }
    Ok(best.expect("restarts >= 4"))
}

// ---------------------------------------------------------------------------
// probe set
// ---------------------------------------------------------------------------

const PROBE_SEED: u64 = 0xA11C_E5EE_D5;

/// Fixed PSD probe matrices spanning ranks 1..k: probe 0 is I/√k, the rest
/// are frozen-seed Gaussian Wishart-type matrices normalized to ‖A‖₂ = 1.
pub fn probe_set(k: usize, count: usize) -> Vec<CoefficientMatrix> {
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        if idx == 0 {
            let kf = k as f64;
            out.push(
                CoefficientMatrix::from_diagonal(&vec![1.0 / kf.sqrt(); k])
                    .expect("isotropic probe"),
            );
            continue;
        }
        let rank = 1 + (idx - 1) % k;
        let mut g = GaussStream::new(SeedSpec::new(PROBE_SEED, idx as u64));
        let mut m = Mat::<Complex64>::zeros(k, k);
        for _ in 0..rank {
            let v = Col::from_fn(k, |_| g.complex_normal(1.0));
            m += outer(&v);
        }
        let norm = matrixkit::frobenius_norm(&m);
        let a = matrixkit::scale(&m, Complex64::new(1.0 / norm, 0.0));
        out.push(
            CoefficientMatrix::new(HermMat::symmetrize(a).expect("sum of outer products"))
                .expect("probe is PSD"),
        );
    }
    out
}

// ---------------------------------------------------------------------------
// convergence study
// ---------------------------------------------------------------------------

/// One observed-vs-limit comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub quantity: String,
    pub n: usize,
    pub trial: usize,
    pub observed: f64,
    pub limit: f64,
    pub abs_err: f64,
    pub seed: SeedSpec,
}

impl ConvergenceRecord {
    fn new(quantity: &str, n: usize, trial: usize, observed: f64, limit: f64, seed: SeedSpec) -> Self {
        Self {
            quantity: quantity.to_string(),
            n,
            trial,
            observed,
            limit,
            abs_err: (observed - limit).abs(),
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub schema_version: u32,
    pub plan: ExperimentPlan,
    pub records: Vec<ConvergenceRecord>,
    pub meta: ReportMeta,
}

/// Edge eigenvalues, channel traces, f_n(A) on the probe set, and
/// estimate_mopn vs limit_mopn, per (n, trial).
pub fn convergence_study(plan: &ExperimentPlan) -> Result<ConvergenceReport> {
    plan.validate()?;
    let k = plan.k;
    let probes = probe_set(k, plan.probes);
    let probe_limits: Vec<f64> = probes
        .iter()
        .map(|a| f_of_values(&a.spectrum().clamped_psd()?).map(|(v, _)| v))
        .collect::<Result<_>>()?;
    let mopn_limits: Vec<f64> = plan
        .p_list
        .iter()
        .map(|&p| limit_mopn(k, p).map(|r| r.value))
        .collect::<Result<_>>()?;
    let (edge_lo, edge_hi) = mp_edges(k);

    let cells: Vec<(usize, usize)> = (0..plan.n_grid.len())
        .flat_map(|gi| (0..plan.trials).map(move |t| (gi, t)))
        .collect();
    let all: Vec<Result<Vec<ConvergenceRecord>>> = cells
        .par_iter()
        .map(|&(gi, trial)| -> Result<Vec<ConvergenceRecord>> {
            let n = plan.n_grid[gi];
            let seed = plan.cell_seed(gi, trial)?;
            let fam = sample_kraus_family(n, k, plan.flavor, seed);
            let mut recs = Vec::new();

            let w = fam.frame_operator();
            let spec = eigvals_herm(&w)?;
            recs.push(ConvergenceRecord::new(
                "lambda_max", n, trial, spec.max(), edge_hi, seed,
            ));
            recs.push(ConvergenceRecord::new(
                "lambda_min", n, trial, spec.min(), edge_lo, seed,
            ));

            // channel trace on a random pure state: (1/k) Σ ‖X_i x‖²
            let x = random_unit(n, seed.offset(AUX_STREAM));
            let tr: f64 = fam
                .ops()
                .iter()
                .map(|op| (op * &x).norm_l2().powi(2))
                .sum::<f64>()
                * fam.scale();
            recs.push(ConvergenceRecord::new("channel_trace", n, trial, tr, 1.0, seed));

            for (pi, a) in probes.iter().enumerate() {
                let fn_a = quadratic_form_norm(
                    fam.ops(),
                    a,
                    seed.offset(AUX_STREAM + 1 + pi as u64),
                )?;
                recs.push(ConvergenceRecord::new(
                    &format!("f_n_probe_{pi}"),
                    n,
                    trial,
                    fn_a,
                    probe_limits[pi],
                    seed,
                ));
            }

            for (li, &p) in plan.p_list.iter().enumerate() {
                let est = estimate_mopn(&fam, ChannelKind::RAW, None, p, 4, 40, seed)?;
                recs.push(ConvergenceRecord::new(
                    &format!("mopn_p_{p}"),
                    n,
                    trial,
                    est.value,
                    mopn_limits[li],
                    seed,
                ));
            }
            Ok(recs)
        })
        .collect();
    let mut records = Vec::new();
    for r in all {
        records.extend(r?);
    }
    Ok(ConvergenceReport {
        schema_version: SCHEMA_VERSION,
        plan: plan.clone(),
        records,
        meta: ReportMeta::now(),
    })
}

// ---------------------------------------------------------------------------
// Bell-pair experiment
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct PNormComparison {
    pub p: SchattenIndex,
    pub observed: f64,
    pub limit: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BellTrial {
    pub trial: usize,
    pub n: usize,
    pub seed: SeedSpec,
    /// Frobenius distance of the raw pair output to (1/k²)I + (1/k)|b⟩⟨b|.
    pub frobenius_distance: f64,
    pub p_norms: Vec<PNormComparison>,
    pub overlap_raw: f64,
    /// Rectified-channel quantities; None if the rectifier failed at this n.
    pub overlap_rectified: Option<f64>,
    pub rectified_trace: Option<f64>,
    pub rectifier_note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BellPairReport {
    pub schema_version: u32,
    pub plan: ExperimentPlan,
    pub trials: Vec<BellTrial>,
    pub meta: ReportMeta,
}

fn bell_limit_matrix(k: usize) -> CMat {
    let kf = k as f64;
    let b = bell_state(k);
    Mat::from_fn(k * k, k * k, |r, c| {
        let mut z = b[r] * b[c].conj() * (1.0 / kf);
        if r == c {
            z += 1.0 / (kf * kf);
        }
        z
    })
}

/// Pair outputs on the Bell state per trial: distance to the Theorem-3.7
/// limit, p-norms vs the closed-form lower bound, and Bell overlaps for both
/// raw and rectified kinds.
pub fn bell_pair_experiment(plan: &ExperimentPlan) -> Result<BellPairReport> {
    plan.validate()?;
    let k = plan.k;
    let limit = bell_limit_matrix(k);
    let cells: Vec<(usize, usize)> = (0..plan.n_grid.len())
        .flat_map(|gi| (0..plan.trials).map(move |t| (gi, t)))
        .collect();
    let trials: Vec<Result<BellTrial>> = cells
        .par_iter()
        .map(|&(gi, trial)| -> Result<BellTrial> {
            let n = plan.n_grid[gi];
            let seed = plan.cell_seed(gi, trial)?;
            let fam = sample_kraus_family(n, k, plan.flavor, seed);
            let raw = pair_output_on_bell(&fam, ChannelKind::RAW, None)?;
            let dist = matrixkit::frobenius_norm(&(raw.mat() - &limit));
            let p_norms = plan
                .p_list
                .iter()
                .map(|&p| -> Result<PNormComparison> {
                    Ok(PNormComparison {
                        p,
                        observed: schatten_norm(&raw, p)?,
                        limit: bell_pair_lower_bound(k, p),
                    })
                })
                .collect::<Result<_>>()?;
            let overlap_raw = bell_overlap(&raw)?;
            let (overlap_rectified, rectified_trace, rectifier_note) =
                match build_rectifier(&fam, plan.epsilon) {
                    Ok(r) => {
                        let rect = pair_output_on_bell(&fam, ChannelKind::RECTIFIED, Some(&r))?;
                        (
                            Some(bell_overlap(&rect)?),
                            Some(rect.trace_re()),
                            (!r.bracket_holds()).then(|| "bracket failed".to_string()),
                        )
                    }
                    Err(e) => (None, None, Some(e.to_string())),
                };
            Ok(BellTrial {
                trial,
                n,
                seed,
                frobenius_distance: dist,
                p_norms,
                overlap_raw,
                overlap_rectified,
                rectified_trace,
                rectifier_note,
            })
        })
        .collect();
    Ok(BellPairReport {
        schema_version: SCHEMA_VERSION,
        plan: plan.clone(),
        trials: trials.into_iter().collect::<Result<_>>()?,
        meta: ReportMeta::now(),
    })
}

// ---------------------------------------------------------------------------
// MOE experiment
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct MoeTrial {
    pub trial: usize,
    pub n: usize,
    pub seed: SeedSpec,
    /// Smallest entropy of Ψ^c(|x⟩⟨x|) found (heuristic, not certified).
    pub min_entropy: f64,
    /// log k − 9k/(√k−1)⁴, the asymptotic single-channel floor.
    pub entropy_lower_bound: f64,
    /// Entropy of (Ψ^c ⊗ Ψ̄^c)(|b_n⟩⟨b_n|).
    pub bell_pair_entropy: f64,
    /// 2 log k − (log k)/k + 2/k, the pair-MOE ceiling.
    pub pair_ceiling: f64,
    pub bell_overlap: f64,
    /// max over probed inputs of ‖Ψ^c(x) − I/k‖₂.
    pub max_two_norm_dev: f64,
    /// 3/(k+1−2√k).
    pub two_norm_bound: f64,
    /// Every probed output satisfied S ≥ log k − k‖·−I/k‖₂².
    pub quadratic_bound_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MoeReport {
    pub schema_version: u32,
    pub plan: ExperimentPlan,
    pub trials: Vec<MoeTrial>,
    /// Trials whose rectifier could not be built, with diagnostics.
    pub aborted: Vec<String>,
    pub meta: ReportMeta,
}

fn two_norm_dev(out: &HermMat) -> f64 {
    let k = out.dim();
    let kf = k as f64;
    let mut acc = 0.0;
    for i in 0..k {
        for j in 0..k {
            let mut z = out.mat()[(i, j)];
            if i == j {
                z -= 1.0 / kf;
            }
            acc += z.norm_sqr();
        }
    }
    acc.sqrt()
}

/// MOE statistics for the rectified channel: minimum output entropy via
/// probes + a p→1 dual-ascent surrogate + local polish, the Bell-pair
/// entropy against the pair ceiling, and the 2-norm deviation bound.
pub fn moe_experiment(plan: &ExperimentPlan) -> Result<MoeReport> {
    plan.validate()?;
    let k = plan.k;
    let kf = k as f64;
    let entropy_lower_bound = kf.ln() - 9.0 * kf / (kf.sqrt() - 1.0).powi(4);
    let pair_ceiling = 2.0 * kf.ln() - kf.ln() / kf + 2.0 / kf;
    let two_norm_bound = 3.0 / (kf + 1.0 - 2.0 * kf.sqrt());

    let cells: Vec<(usize, usize)> = (0..plan.n_grid.len())
        .flat_map(|gi| (0..plan.trials).map(move |t| (gi, t)))
        .collect();
    let results: Vec<std::result::Result<MoeTrial, String>> = cells
        .par_iter()
        .map(|&(gi, trial)| -> std::result::Result<MoeTrial, String> {
            let n = plan.n_grid[gi];
            let seed = plan
                .cell_seed(gi, trial)
                .map_err(|e| e.to_string())?;
            let fam = sample_kraus_family(n, k, plan.flavor, seed);
            let rect = build_rectifier(&fam, plan.epsilon)
                .map_err(|e| format!("trial {trial} n {n}: {e}"))?;
            let ops = effective_ops(&fam, ChannelKind::RECTIFIED, Some(&rect))
                .map_err(|e| e.to_string())?;
            let scale = fam.scale();
            let entropy_of = |x: &Col<Complex64>| -> f64 {
                let out = complementary_on_pure(&ops, scale, x);
                von_neumann_entropy(&out).expect("rectified output is a state")
            };

            // probe inputs: random pure states
            let mut best_x = random_unit(n, seed.offset(AUX_STREAM));
            let mut best_s = entropy_of(&best_x);
            let mut max_dev = 0.0f64;
            let mut quad_ok = true;
            let consider = |x: &Col<Complex64>,
                                max_dev: &mut f64,
                                quad_ok: &mut bool|
             -> f64 {
                let out = complementary_on_pure(&ops, scale, x);
                let s = von_neumann_entropy(&out).expect("rectified output is a state");
                *max_dev = max_dev.max(two_norm_dev(&out));
                let qb = quadratic_entropy_bound(&out).expect("trace-1 output");
                if s < qb - 1e-10 {
                    *quad_ok = false;
                }
                s
            };
            for i in 0..24 {
                let x = random_unit(n, seed.offset(AUX_STREAM + 1 + i));
                let s = consider(&x, &mut max_dev, &mut quad_ok);
                if s < best_s {
                    best_s = s;
                    best_x = x;
                }
            }
            // p slightly above 1 as an entropy-minimization surrogate
            let surrogate_p = SchattenIndex::new(1.05).expect("valid index");
            if let Ok(est) = estimate_mopn(
                &fam,
                ChannelKind::RECTIFIED,
                Some(&rect),
                surrogate_p,
                4,
                30,
                seed,
            ) {
                let s = consider(&est.witness_x, &mut max_dev, &mut quad_ok);
                if s < best_s {
                    best_s = s;
                    best_x = est.witness_x;
                }
            }
            // local polish directly on the entropy
            let mut g = GaussStream::new(seed.offset(AUX_STREAM + 100));
            let mut step = 0.2;
            for _ in 0..60 {
                let mut cand = best_x.clone();
                for i in 0..n {
                    cand[i] += g.complex_normal(step / (n as f64).sqrt());
                }
                matrixkit::normalize(&mut cand);
                let s = consider(&cand, &mut max_dev, &mut quad_ok);
                if s < best_s {
                    best_s = s;
                    best_x = cand;
                } else {
                    step *= 0.93;
                }
            }

            let pair = pair_output_on_bell(&fam, ChannelKind::RECTIFIED, Some(&rect))
                .map_err(|e| e.to_string())?;
            let pair_entropy = von_neumann_entropy(&pair).map_err(|e| e.to_string())?;
            let overlap = bell_overlap(&pair).map_err(|e| e.to_string())?;
            Ok(MoeTrial {
                trial,
                n,
                seed,
                min_entropy: best_s,
                entropy_lower_bound,
                bell_pair_entropy: pair_entropy,
                pair_ceiling,
                bell_overlap: overlap,
                max_two_norm_dev: max_dev,
                two_norm_bound,
                quadratic_bound_ok: quad_ok,
            })
        })
        .collect();
    let mut trials = Vec::new();
    let mut aborted = Vec::new();
    for r in results {
        match r {
            Ok(t) => trials.push(t),
            Err(d) => aborted.push(d),
        }
    }
    Ok(MoeReport {
        schema_version: SCHEMA_VERSION,
        plan: plan.clone(),
        trials,
        aborted,
        meta: ReportMeta::now(),
    })
}

// ---------------------------------------------------------------------------
// optimal shape validation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ShapeRecord {
    pub k: usize,
    pub q: f64,
    /// maximizing spectrum from the brute-force simplex search, descending.
    pub maximizer: Vec<f64>,
    pub brute_value: f64,
    /// k · limit_mopn value, the reduced two-level optimum.
    pub reduced_value: f64,
    /// Maximizer is (α, β, …, β) within 1e-3; asserted only for q ≥ 3.
    pub two_level_shape: bool,
    pub asserted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShapeReport {
    pub schema_version: u32,
    pub records: Vec<ShapeRecord>,
    pub meta: ReportMeta,
}

fn simplex_grid(k: usize, resolution: usize) -> Vec<Vec<f64>> {
    // descending compositions of `resolution` into k parts (f is symmetric
    // in the eigenvalues, so one ordering per multiset suffices)
    let mut out = Vec::new();
    let mut current = vec![0usize; k];
    fn rec(
        k: usize,
        remaining: usize,
        idx: usize,
        cap: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<f64>>,
        resolution: usize,
    ) {
        if idx == k - 1 {
            if remaining <= cap {
                current[idx] = remaining;
                out.push(
                    current
                        .iter()
                        .map(|&c| c as f64 / resolution as f64)
                        .collect(),
                );
            }
            return;
        }
        let lo = remaining.div_ceil(k - idx);
        for v in lo..=remaining.min(cap) {
            current[idx] = v;
            rec(k, remaining - v, idx + 1, v, current, out, resolution);
        }
    }
    rec(k, resolution, 0, resolution, &mut current, &mut out, resolution);
    out
}

/// Brute-force maximization of f over {λ ≥ 0, ‖λ‖_q = 1}: t_i = λ_i^q on a
/// dense simplex grid plus a local polish, compared with the two-level
/// reduction of limit_mopn.
pub fn validate_optimal_shape(k: usize, q_list: &[f64]) -> Result<ShapeReport> {
    if !(2..=4).contains(&k) {
        return Err(Error::SizeGuard {
            what: "shape validation k",
            limit: 4,
            got: k,
        });
    }
    let mut records = Vec::new();
    for &q in q_list {
        if q <= 1.0 {
            return Err(Error::InvalidSchattenIndex { p: q });
        }
        let f_of_t = |t: &[f64]| -> f64 {
            let lam: Vec<f64> = t.iter().map(|&v| v.powf(1.0 / q)).collect();
            if lam.iter().all(|&v| v <= 0.0) {
                return f64::NEG_INFINITY;
            }
            f_of_values(&lam).map(|(v, _)| v).unwrap_or(f64::NEG_INFINITY)
        };
        let resolution = 120usize;
        let grid = simplex_grid(k, resolution);
        let mut best_t = grid[0].clone();
        let mut best_v = f_of_t(&best_t);
        for t in &grid[1..] {
            let v = f_of_t(t);
            if v > best_v {
                best_v = v;
                best_t = t.clone();
            }
        }
        // local polish: pairwise mass transfers on the t-simplex
        let mut step = 1.0 / resolution as f64;
        for _ in 0..200 {
            let mut improved = false;
            for i in 0..k {
                for j in 0..k {
                    if i == j || best_t[j] < step {
                        continue;
                    }
                    let mut cand = best_t.clone();
                    cand[i] += step;
                    cand[j] -= step;
                    let v = f_of_t(&cand);
                    if v > best_v {
                        best_v = v;
                        best_t = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
                if step < 1e-12 {
                    break;
                }
            }
        }
        let mut maximizer: Vec<f64> = best_t.iter().map(|&v| v.powf(1.0 / q)).collect();
        maximizer.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        let two_level_shape = maximizer[1..]
            .windows(2)
            .all(|w| (w[0] - w[1]).abs() < 1e-3);
        let p = SchattenIndex::new(q / (q - 1.0))?;
        let reduced = limit_mopn(k, p)?;
        let reduced_value = reduced.value * k as f64;
        records.push(ShapeRecord {
            k,
            q,
            maximizer,
            brute_value: best_v,
            reduced_value,
            two_level_shape,
            asserted: q >= 3.0,
        });
    }
    Ok(ShapeReport {
        schema_version: SCHEMA_VERSION,
        records,
        meta: ReportMeta::now(),
    })
}

// ---------------------------------------------------------------------------
// emission
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmitFormat {
    Json,
    Csv,
}

/// Anything the harness can serialize to disk.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "report_type", rename_all = "snake_case")]
pub enum Report {
    Convergence(ConvergenceReport),
    BellPair(BellPairReport),
    Moe(MoeReport),
    Shape(ShapeReport),
}

impl Report {
    /// CSV rendering; column sets are fixed per report type and documented
    /// in the README.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        match self {
            Report::Convergence(r) => {
                s.push_str("quantity,n,trial,observed,limit,abs_err,master_seed,stream_index\n");
                for rec in &r.records {
                    s.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        rec.quantity,
                        rec.n,
                        rec.trial,
                        rec.observed,
                        rec.limit,
                        rec.abs_err,
                        rec.seed.master_seed,
                        rec.seed.stream_index
                    ));
                }
            }
            Report::BellPair(r) => {
                s.push_str(
                    "trial,n,p,p_norm_observed,p_norm_limit,frobenius_distance,\
                     overlap_raw,overlap_rectified,rectified_trace\n",
                );
                for t in &r.trials {
                    for pn in &t.p_norms {
                        s.push_str(&format!(
                            "{},{},{},{},{},{},{},{},{}\n",
                            t.trial,
                            t.n,
                            pn.p,
                            pn.observed,
                            pn.limit,
                            t.frobenius_distance,
                            t.overlap_raw,
                            t.overlap_rectified.map_or(String::new(), |v| v.to_string()),
                            t.rectified_trace.map_or(String::new(), |v| v.to_string()),
                        ));
                    }
                }
            }
            Report::Moe(r) => {
                s.push_str(
                    "trial,n,min_entropy,entropy_lower_bound,bell_pair_entropy,pair_ceiling,\
                     bell_overlap,max_two_norm_dev,two_norm_bound,quadratic_bound_ok\n",
                );
                for t in &r.trials {
                    s.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{}\n",
                        t.trial,
                        t.n,
                        t.min_entropy,
                        t.entropy_lower_bound,
                        t.bell_pair_entropy,
                        t.pair_ceiling,
                        t.bell_overlap,
                        t.max_two_norm_dev,
                        t.two_norm_bound,
                        t.quadratic_bound_ok
                    ));
                }
            }
            Report::Shape(r) => {
                s.push_str("k,q,brute_value,reduced_value,two_level_shape,asserted,maximizer\n");
                for rec in &r.records {
                    let lam = rec
                        .maximizer
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(";");
                    s.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        rec.k,
                        rec.q,
                        rec.brute_value,
                        rec.reduced_value,
                        rec.two_level_shape,
                        rec.asserted,
                        lam
                    ));
                }
            }
        }
        s
    }
}

/// Writes the report to `path` in the requested format.
pub fn emit(report: &Report, format: EmitFormat, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    emit_to(report, format, &mut file)
}

pub fn emit_to(report: &Report, format: EmitFormat, out: &mut dyn Write) -> Result<()> {
    match format {
        EmitFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            out.write_all(b"\n")?;
        }
        EmitFormat::Csv => {
            out.write_all(report.to_csv().as_bytes())?;
        }
    }
    Ok(())
}
