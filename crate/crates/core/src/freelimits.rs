//! Analytic limit quantities: the variational functional h(x,A) and
//! f(A) = min_x h(x,A), Marchenko–Pastur edges, the Haagerup bound, the
//! limiting maximum output p-norm via the two-level eigenvalue-shape
//! reduction, and the closed-form multiplicativity/additivity bounds.
//!
//! Everything here is deterministic arithmetic; all randomness lives in
//! `ensembles`/`experiments`.

use serde::Serialize;

use crate::matrixkit::{self, CMat, HermMat, SchattenIndex, SpectralProfile};
use crate::{Error, Result};

/// Root-finding iterations for the strictly increasing h'(x); bisection is
/// unconditionally convergent here, no Newton step needed.
const BISECT_ITERS: usize = 200;

/// Grid density for the outer maximization in [`limit_mopn`]; tunable.
pub const MOPN_GRID: usize = 2048;

// ---------------------------------------------------------------------------
// CoefficientMatrix
// ---------------------------------------------------------------------------

/// A k×k PSD coefficient matrix with cached spectrum, the argument of
/// f(A) and the dual variable of the MOpN optimization.
#[derive(Clone, Debug)]
pub struct CoefficientMatrix {
    matrix: HermMat,
    spectrum: SpectralProfile,
}

impl CoefficientMatrix {
    pub fn new(matrix: HermMat) -> Result<Self> {
        let spectrum = matrixkit::eigvals_herm(&matrix)?;
        if spectrum.min() < -1e-10 {
            return Err(Error::NotPsd {
                min_eig: spectrum.min(),
            });
        }
        Ok(Self { matrix, spectrum })
    }

    /// Diagonal matrix with the given (non-negative) values.
    pub fn from_diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let m = faer::Mat::from_fn(n, n, |i, j| {
            if i == j {
                num_complex::Complex64::new(values[i], 0.0)
            } else {
                num_complex::Complex64::ZERO
            }
        });
        Self::new(HermMat::new(m)?)
    }

    pub fn k(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &HermMat {
        &self.matrix
    }

    pub fn spectrum(&self) -> &SpectralProfile {
        &self.spectrum
    }
}

// ---------------------------------------------------------------------------
// TwoLevelProfile
// ---------------------------------------------------------------------------

/// Eigenvalue shape (α, β, β, …, β) on the sphere ‖λ‖_q = 1; the maximizer
/// form of the shape-reduction lemma.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TwoLevelProfile {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub q: f64,
}

impl TwoLevelProfile {
    pub fn new(alpha: f64, beta: f64, k: usize, q: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta >= 0.0 && alpha >= beta) {
            return Err(Error::InvalidPlan {
                field: "two-level profile".into(),
                msg: format!("need alpha >= beta >= 0, got ({alpha}, {beta})"),
            });
        }
        let norm = alpha.powf(q) + (k as f64 - 1.0) * beta.powf(q);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidPlan {
                field: "two-level profile".into(),
                msg: format!("alpha^q + (k-1) beta^q = {norm}, expected 1"),
            });
        }
        Ok(Self { alpha, beta, k, q })
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.beta; self.k];
        v[0] = self.alpha;
        v
    }
}

// ---------------------------------------------------------------------------
// h and f
// ---------------------------------------------------------------------------

/// h(x, A) = 1/x + Σ λ_i / (1 − λ_i x) on 0 < x < 1/λ_max.
pub fn h_value(x: f64, spectrum: &SpectralProfile) -> Result<f64> {
    let lmax = spectrum.max();
    let hi = if lmax > 0.0 { 1.0 / lmax } else { f64::INFINITY };
    if !(x > 0.0 && x < hi) {
        return Err(Error::OutOfDomain {
            value: x,
            lo: 0.0,
            hi,
        });
    }
    Ok(1.0 / x
        + spectrum
            .values()
            .iter()
            .map(|&l| l / (1.0 - l * x))
            .sum::<f64>())
}

/// h'(x, A) = −1/x² + Σ λ_i² / (1 − λ_i x)², strictly increasing on the domain.
fn h_prime(x: f64, values: &[f64]) -> f64 {
    -1.0 / (x * x)
        + values
            .iter()
            .map(|&l| {
                let d = 1.0 - l * x;
                l * l / (d * d)
            })
            .sum::<f64>()
}

/// f over a raw eigenvalue slice (clamped PSD, not necessarily sorted).
/// Returns (min value, minimizer x).
pub fn f_of_values(values: &[f64]) -> Result<(f64, f64)> {
    let lmax = values.iter().cloned().fold(0.0f64, f64::max);
    if lmax <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    // h' runs from −∞ at 0⁺ to +∞ at (1/λ_max)⁻; bisect its unique root
    let mut lo = 1e-300;
    let mut hi = (1.0 / lmax) * (1.0 - 1e-14);
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if h_prime(mid, values) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let value = 1.0 / x + values.iter().map(|&l| l / (1.0 - l * x)).sum::<f64>();
    Ok((value, x))
}

/// f(A) = min_{0<x<1/‖A‖} h(x, A); strictly convex in x, so the minimum is
/// the unique root of h'. Depends only on the spectrum.
pub fn f_limit(a: &CoefficientMatrix) -> Result<(f64, f64)> {
    let values = a.spectrum().clamped_psd()?;
    f_of_values(&values)
}

/// Marchenko–Pastur support edges of Σ X_i*X_i: ((√k−1)², (√k+1)²).
pub fn mp_edges(k: usize) -> (f64, f64) {
    let s = (k as f64).sqrt();
    ((s - 1.0) * (s - 1.0), (s + 1.0) * (s + 1.0))
}

/// Haagerup bound 3‖A‖₂ + |Tr A|; dominates f(A) for PSD A.
pub fn haagerup_bound(a: &CMat) -> f64 {
    3.0 * matrixkit::frobenius_norm(a) + matrixkit::trace(a).norm()
}

// ---------------------------------------------------------------------------
// limiting MOpN
// ---------------------------------------------------------------------------

/// Result of the limiting-MOpN maximization.
#[derive(Clone, Debug, Serialize)]
pub struct LimitMopn {
    pub value: f64,
    pub argmax: TwoLevelProfile,
    /// Whether the two-level shape reduction is inside its proven regime
    /// (q ≥ 3 for any k; smaller q requires large k and is cross-validated
    /// by brute force in `experiments`).
    pub shape_reduction_proven: bool,
}

fn two_level_f(alpha: f64, k: usize, q: f64) -> f64 {
    let rest = (1.0 - alpha.powf(q)).max(0.0);
    let beta = (rest / (k as f64 - 1.0)).powf(1.0 / q);
    let mut values = vec![beta; k];
    values[0] = alpha;
    f_of_values(&values).expect("alpha > 0 keeps the profile nonzero").0
}

/// lim ‖Φ‖_p = (1/k) max f(A) over PSD A with ‖A‖_q = 1, reduced to the
/// two-level shape (α, β, …, β): dense grid over α ∈ [k^{−1/q}, 1] plus
/// golden-section refinement. p = ∞ is handled symbolically and returns
/// exactly 4/k with the degenerate rank-one profile.
pub fn limit_mopn(k: usize, p: SchattenIndex) -> Result<LimitMopn> {
    if k < 2 {
        return Err(Error::InvalidPlan {
            field: "k".into(),
            msg: format!("need k >= 2, got {k}"),
        });
    }
    let kf = k as f64;
    if p.is_infinite() {
        // q = 1 endpoint: maximizer degenerates to rank one, f = 4, value 4/k
        return Ok(LimitMopn {
            value: 4.0 / kf,
            argmax: TwoLevelProfile::new(1.0, 0.0, k, 1.0)?,
            shape_reduction_proven: true,
        });
    }
    let q = p.conjugate();
    let a_min = kf.powf(-1.0 / q);
    let grid = MOPN_GRID;
    let step = (1.0 - a_min) / grid as f64;
    let mut best_i = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    let evals: Vec<f64> = (0..=grid)
        .map(|i| {
            let alpha = (a_min + i as f64 * step).min(1.0);
            two_level_f(alpha, k, q)
        })
        .collect();
    for (i, &v) in evals.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    // golden-section refinement on the bracket around the best grid point
    let mut lo = a_min + best_i.saturating_sub(1) as f64 * step;
    let mut hi = (a_min + (best_i + 1) as f64 * step).min(1.0);
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = two_level_f(x1, k, q);
    let mut f2 = two_level_f(x2, k, q);
    for _ in 0..120 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = two_level_f(x2, k, q);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = two_level_f(x1, k, q);
        }
    }
    let alpha = 0.5 * (lo + hi);
    let value = two_level_f(alpha, k, q).max(best_v);
    let beta = ((1.0 - alpha.powf(q)).max(0.0) / (kf - 1.0)).powf(1.0 / q);
    Ok(LimitMopn {
        value: value / kf,
        argmax: TwoLevelProfile::new(alpha, beta, k, q)?,
        shape_reduction_proven: q >= 3.0,
    })
}

// ---------------------------------------------------------------------------
// violation bounds
// ---------------------------------------------------------------------------

/// Single-channel upper bound on lim ‖Φ‖_p:
/// ((4/k)^p + (1/(k−1))^{p−1} [1 − 3/k + 2/√k]^p)^{1/p}; 4/k at p = ∞.
pub fn single_channel_upper_bound(k: usize, p: SchattenIndex) -> f64 {
    let kf = k as f64;
    match p {
        SchattenIndex::Infinity => 4.0 / kf,
        SchattenIndex::Finite(p) => {
            let bracket = 1.0 - 3.0 / kf + 2.0 / kf.sqrt();
            ((4.0 / kf).powf(p) + (1.0 / (kf - 1.0)).powf(p - 1.0) * bracket.powf(p))
                .powf(1.0 / p)
        }
    }
}

/// Bell-pair lower bound on lim ‖Φ ⊗ Φ̄‖_p, the p-norm of the limit matrix
/// (1/k²)I + (1/k)|b_k⟩⟨b_k|: ((1/k + 1/k²)^p + (k²−1)(1/k²)^p)^{1/p}.
pub fn bell_pair_lower_bound(k: usize, p: SchattenIndex) -> f64 {
    let kf = k as f64;
    let top = 1.0 / kf + 1.0 / (kf * kf);
    match p {
        SchattenIndex::Infinity => top,
        SchattenIndex::Finite(p) => {
            (top.powf(p) + (kf * kf - 1.0) * (1.0 / (kf * kf)).powf(p)).powf(1.0 / p)
        }
    }
}

/// Which comparison a [`ViolationReport`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationForm {
    /// pair_lower vs single_upper² for the p-norm.
    Mopn,
    /// entropy gap 2·(single MOE lower) − (pair MOE ceiling).
    Moe,
}

/// Paired single-channel vs tensor-pair bounds and the verdict.
///
/// MOpN form: `single_bound` is the single-channel upper bound,
/// `pair_bound` the Bell-pair lower bound, `margin = pair − single²`.
/// MOE form: `single_bound` is the single-channel entropy lower bound,
/// `pair_bound` the pair-entropy ceiling, `margin = 2·single − pair` (the
/// additivity-violation gap).
#[derive(Clone, Debug, Serialize)]
pub struct ViolationReport {
    pub k: usize,
    pub p: Option<SchattenIndex>,
    pub form: ViolationForm,
    pub single_bound: f64,
    pub pair_bound: f64,
    pub violated: bool,
    pub margin: f64,
    /// k^{2p}·pair^p and k^{2p}·single^{2p} for finite p (the scale on which
    /// the two closed forms are compared analytically).
    pub scaled_pair: Option<f64>,
    pub scaled_single_sq: Option<f64>,
}

/// Compares the Bell-pair lower bound against the squared single-channel
/// upper bound (p = ∞: against (4/k)²).
pub fn multiplicativity_verdict(k: usize, p: SchattenIndex) -> ViolationReport {
    let single = single_channel_upper_bound(k, p);
    let pair = bell_pair_lower_bound(k, p);
    let margin = pair - single * single;
    let (scaled_pair, scaled_single_sq) = match p {
        SchattenIndex::Finite(pf) => {
            let kf = k as f64;
            let s = kf.powf(2.0 * pf);
            (Some(s * pair.powf(pf)), Some(s * single.powf(2.0 * pf)))
        }
        SchattenIndex::Infinity => (None, None),
    };
    ViolationReport {
        k,
        p: Some(p),
        form: ViolationForm::Mopn,
        single_bound: single,
        pair_bound: pair,
        violated: margin > 0.0,
        margin,
        scaled_pair,
        scaled_single_sq,
    }
}

/// Smallest k in [2, k_max] whose verdict is violated, if any.
pub fn minimal_violating_k(p: SchattenIndex, k_max: usize) -> Option<usize> {
    (2..=k_max).find(|&k| multiplicativity_verdict(k, p).violated)
}

/// MOE additivity gap:
/// gap = 2(log k − 9k/(√k−1)⁴) − (2 log k − (log k)/k + 2/k)
///     = (log k − 2)/k − 18k/(√k−1)⁴.
pub fn moe_gap(k: usize) -> ViolationReport {
    let kf = k as f64;
    let s = kf.sqrt();
    let single_lower = kf.ln() - 9.0 * kf / (s - 1.0).powi(4);
    let pair_ceiling = 2.0 * kf.ln() - kf.ln() / kf + 2.0 / kf;
    let gap = (kf.ln() - 2.0) / kf - 18.0 * kf / (s - 1.0).powi(4);
    ViolationReport {
        k,
        p: None,
        form: ViolationForm::Moe,
        single_bound: single_lower,
        pair_bound: pair_ceiling,
        violated: gap > 0.0,
        margin: gap,
        scaled_pair: None,
        scaled_single_sq: None,
    }
}

/// Smallest k with a positive MOE gap. k·gap = log k − 2 − 18/(1−1/√k)⁴ is
/// strictly increasing, so the crossing is unique and bisection applies.
pub fn minimal_moe_violating_k() -> usize {
    let gap = |k: usize| moe_gap(k).margin;
    let mut lo = 2usize; // gap < 0
    let mut hi = 1usize << 40; // gap > 0
    debug_assert!(gap(lo) < 0.0 && gap(hi) > 0.0);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if gap(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// log k − k·‖ρ − I/k‖₂²; lower-bounds the von Neumann entropy near the
/// maximally mixed state.
pub fn quadratic_entropy_bound(rho: &HermMat) -> Result<f64> {
    let tr = rho.trace_re();
    if (tr - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidTrace { trace: tr });
    }
    let k = rho.dim();
    let kf = k as f64;
    let mut dist2 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let mut z = rho.mat()[(i, j)];
            if i == j {
                z -= 1.0 / kf;
            }
            dist2 += z.norm_sqr();
        }
    }
    Ok(kf.ln() - kf * dist2)
}

// ---------------------------------------------------------------------------
// Appendix D checks
// ---------------------------------------------------------------------------

/// Grid verification of the small-p inequalities.
#[derive(Clone, Debug, Serialize)]
pub struct AppendixDReport {
    /// min over the grid of g(k) = 4p k^{3/2} − (1+k)^p + 1 (must be > 0).
    pub min_g: f64,
    pub all_g_positive: bool,
    /// min of (k^{−2+1/p}(√k+1)²)^{2p} − [(1/k+1/k²)^p + (k²−1)(1/k²)^p]
    /// (must be > 0: Bell inputs cannot beat the isotropic single bound²
    /// for p ≤ 1.5).
    pub min_additivity_check: f64,
    pub all_additivity_positive: bool,
    /// max of the free-vs-Haar contrast k^{−2p}(k − k^p) over k ≥ 2
    /// (must be < 0).
    pub max_haar_contrast: f64,
    pub haar_contrast_negative: bool,
}

pub fn appendix_d_checks(p_grid: &[f64], k_grid: &[usize]) -> Result<AppendixDReport> {
    for &p in p_grid {
        if !(p > 1.0 && p <= 1.5) {
            return Err(Error::OutOfDomain {
                value: p,
                lo: 1.0,
                hi: 1.5,
            });
        }
    }
    let mut min_g = f64::INFINITY;
    let mut min_add = f64::INFINITY;
    let mut max_haar = f64::NEG_INFINITY;
    for &p in p_grid {
        for &k in k_grid {
            let kf = k as f64;
            let g = 4.0 * p * kf.powf(1.5) - (1.0 + kf).powf(p) + 1.0;
            min_g = min_g.min(g);
            let iso = kf.powf(-2.0 + 1.0 / p) * (kf.sqrt() + 1.0).powi(2);
            let bell = (1.0 / kf + 1.0 / (kf * kf)).powf(p)
                + (kf * kf - 1.0) * (kf * kf).powf(-p);
            min_add = min_add.min(iso.powf(2.0 * p) - bell);
            if k >= 2 {
                max_haar = max_haar.max(kf.powf(-2.0 * p) * (kf - kf.powf(p)));
            }
        }
    }
    Ok(AppendixDReport {
        min_g,
        all_g_positive: min_g > 0.0,
        min_additivity_check: min_add,
        all_additivity_positive: min_add > 0.0,
        max_haar_contrast: max_haar,
        haar_contrast_negative: max_haar < 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{GaussStream, SeedSpec};
    use crate::matrixkit::identity;
    use faer::Mat;

    fn random_psd(k: usize, seed: SeedSpec) -> CoefficientMatrix {
        let mut g = GaussStream::new(seed);
        let b = Mat::from_fn(k, k, |_, _| g.complex_normal(1.0));
        CoefficientMatrix::new(crate::HermMat::symmetrize(b.adjoint() * &b).unwrap()).unwrap()
    }

    #[test]
    fn h_closed_forms() {
        let k = 5usize;
        let ones = SpectralProfile::new(vec![1.0; k]).unwrap();
        let x = 1.0 / (1.0 + (k as f64).sqrt());
        let want = (1.0 + (k as f64).sqrt()).powi(2);
        assert!((h_value(x, &ones).unwrap() - want).abs() < 1e-12);

        let single = SpectralProfile::new(vec![1.0]).unwrap();
        assert!((h_value(0.5, &single).unwrap() - 4.0).abs() < 1e-12);
        assert!(h_value(1e-7, &single).unwrap() > 1e6);
        assert!(h_value(0.0, &single).is_err());
        assert!(h_value(1.5, &single).is_err());
    }

    #[test]
    fn f_closed_forms() {
        for k in [2usize, 3, 7, 16, 64] {
            let a = CoefficientMatrix::new(crate::HermMat::new(identity(k)).unwrap()).unwrap();
            let (v, _) = f_limit(&a).unwrap();
            let want = (1.0 + (k as f64).sqrt()).powi(2);
            assert!((v - want).abs() < 1e-10, "k={k}: {v} vs {want}");
        }
        let rank_one = CoefficientMatrix::from_diagonal(&[1.0, 0.0, 0.0]).unwrap();
        assert!((f_limit(&rank_one).unwrap().0 - 4.0).abs() < 1e-10);
    }

    #[test]
    fn f_scales_linearly() {
        for t in 0..10 {
            let a = random_psd(4, SeedSpec::new(400, t));
            let c = 0.3 + 0.5 * t as f64;
            let scaled: Vec<f64> = a.spectrum().values().iter().map(|v| c * v).collect();
            let (fa, _) = f_limit(&a).unwrap();
            let (fca, _) = f_of_values(&scaled).unwrap();
            assert!((fca - c * fa).abs() < 1e-10 * (1.0 + fca.abs()));
        }
    }

    #[test]
    fn f_rotation_invariant() {
        // f depends only on eigenvalues: conjugating by a random unitary
        // (from QR of a Ginibre) leaves it fixed
        let a = random_psd(4, SeedSpec::new(401, 0));
        let mut g = GaussStream::new(SeedSpec::new(402, 0));
        let z = Mat::from_fn(4, 4, |_, _| g.complex_normal(1.0));
        let qr = z.qr();
        let q = qr.compute_Q();
        let rotated = crate::HermMat::symmetrize(&q * a.matrix().mat() * q.adjoint()).unwrap();
        let b = CoefficientMatrix::new(rotated).unwrap();
        assert!((f_limit(&a).unwrap().0 - f_limit(&b).unwrap().0).abs() < 1e-9);
    }

    #[test]
    fn h_convexity_witness() {
        let a = random_psd(5, SeedSpec::new(403, 0));
        let vals = SpectralProfile::new(a.spectrum().clamped_psd().unwrap()).unwrap();
        let hi = 1.0 / vals.max();
        let mut g = GaussStream::new(SeedSpec::new(404, 0));
        for _ in 0..1000 {
            let u = (g.standard_normal().abs() % 1.0).clamp(1e-6, 1.0 - 1e-6) * hi;
            let v = (g.standard_normal().abs() % 1.0).clamp(1e-6, 1.0 - 1e-6) * hi;
            if (u - v).abs() < 1e-9 * hi {
                continue;
            }
            let mid = 0.5 * (u + v);
            let lhs = h_value(mid, &vals).unwrap();
            let rhs = 0.5 * (h_value(u, &vals).unwrap() + h_value(v, &vals).unwrap());
            assert!(lhs <= rhs + 1e-12 * rhs.abs());
        }
    }

    #[test]
    fn mp_edges_values() {
        assert_eq!(mp_edges(1), (0.0, 4.0));
        assert_eq!(mp_edges(4), (1.0, 9.0));
        assert_eq!(mp_edges(16), (9.0, 25.0));
    }

    #[test]
    fn haagerup_closed_forms_and_domination() {
        let k = 6usize;
        let id = identity(k);
        let want = 3.0 * (k as f64).sqrt() + k as f64;
        assert!((haagerup_bound(&id) - want).abs() < 1e-12);
        for t in 0..200 {
            let a = random_psd(2 + (t % 11) as usize, SeedSpec::new(405, t));
            let (f, _) = f_limit(&a).unwrap();
            assert!(f <= haagerup_bound(a.matrix().mat()) + 1e-9);
        }
    }

    #[test]
    fn limit_mopn_infinity_and_lower_bound() {
        for k in [2usize, 5, 16, 100] {
            let r = limit_mopn(k, SchattenIndex::Infinity).unwrap();
            assert!((r.value - 4.0 / k as f64).abs() < 1e-15);
        }
        for &k in &[3usize, 8, 20] {
            for &pf in &[1.5f64, 2.0, 3.0] {
                let p = SchattenIndex::new(pf).unwrap();
                let r = limit_mopn(k, p).unwrap();
                let kf = k as f64;
                let iso = kf.powf(-2.0 + 1.0 / pf) * (kf.sqrt() + 1.0).powi(2);
                assert!(
                    r.value >= iso - 1e-9,
                    "k={k} p={pf}: {} < isotropic {iso}",
                    r.value
                );
            }
        }
    }

    #[test]
    fn limit_mopn_upper_bounded_by_theorem() {
        for &k in &[50usize, 100, 200] {
            for &pf in &[2.0f64, 3.0] {
                let p = SchattenIndex::new(pf).unwrap();
                let lim = limit_mopn(k, p).unwrap().value;
                let ub = single_channel_upper_bound(k, p);
                assert!(lim <= ub + 1e-9, "k={k} p={pf}: {lim} > {ub}");
            }
        }
    }

    #[test]
    fn bell_pair_bound_closed_forms() {
        // p=inf, k=16: 17/256 beats (4/16)^2 = 1/16
        let v = bell_pair_lower_bound(16, SchattenIndex::Infinity);
        assert!((v - 17.0 / 256.0).abs() < 1e-15);
        assert!(v > 0.25 * 0.25);
        // trace (p -> 1 limit): 1 + 1/k
        let near_one = SchattenIndex::new(1.0 + 1e-9).unwrap();
        let k = 7usize;
        let t = bell_pair_lower_bound(k, near_one);
        assert!((t - (1.0 + 1.0 / k as f64)).abs() < 1e-5);
    }

    #[test]
    fn verdict_infinity_threshold() {
        for k in 2..=15 {
            assert!(!multiplicativity_verdict(k, SchattenIndex::Infinity).violated);
        }
        let r = multiplicativity_verdict(16, SchattenIndex::Infinity);
        assert!(r.violated);
        assert_eq!(
            minimal_violating_k(SchattenIndex::Infinity, 100),
            Some(16)
        );
        // k=15 is the exact-equality boundary: 16/225 on both sides
        let r15 = multiplicativity_verdict(15, SchattenIndex::Infinity);
        assert!(r15.margin.abs() < 1e-15);
    }

    #[test]
    fn moe_gap_signs() {
        assert!(moe_gap(4).margin < 0.0);
        let big = 1usize << 33;
        let r = moe_gap(big);
        assert!(r.violated);
        // k*gap = log k - 2 - 18/(1 - 1/sqrt(k))^4 exactly
        let kf = big as f64;
        let scaled = kf.ln() - 2.0 - 18.0 / (1.0 - 1.0 / kf.sqrt()).powi(4);
        assert!((r.margin * kf - scaled).abs() < 1e-9 * (1.0 + scaled.abs()));
        // and the scaled gap is increasing in k
        assert!(moe_gap(big * 2).margin * (2.0 * kf) > r.margin * kf);
    }

    #[test]
    fn quadratic_bound_examples() {
        let k = 5usize;
        let mixed = CoefficientMatrix::from_diagonal(&vec![1.0 / k as f64; k]).unwrap();
        let b = quadratic_entropy_bound(mixed.matrix()).unwrap();
        assert!((b - (k as f64).ln()).abs() < 1e-12);
        let pure = CoefficientMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let b2 = quadratic_entropy_bound(pure.matrix()).unwrap();
        assert!((b2 - (2.0f64.ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn appendix_d_small_grid() {
        let ps = [1.05, 1.2, 1.3, 1.5];
        let ks: Vec<usize> = (1..=200).collect();
        let r = appendix_d_checks(&ps, &ks).unwrap();
        assert!(r.all_g_positive, "min g = {}", r.min_g);
        assert!(r.all_additivity_positive, "min = {}", r.min_additivity_check);
        assert!(r.haar_contrast_negative, "max = {}", r.max_haar_contrast);
        // spot value: g(1) at p=1.5 is 6 - 2^1.5 + 1
        let g1 = 4.0 * 1.5 - 2.0f64.powf(1.5) + 1.0;
        assert!(g1 > 0.0);
    }
}
