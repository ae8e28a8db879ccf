//! Dense complex matrix substrate: Hermitian eigendecomposition, Schatten
//! norms, von Neumann entropy, Bell states, and the Hölder duality used by
//! the maximum-output-norm machinery.
//!
//! All operations are pure functions on immutable inputs. Eigenvalues of
//! nominally PSD matrices in `[-1e-8, 0)` are clamped to zero before norm
//! and entropy evaluation; anything below `-1e-8` is an error.

use faer::{Col, Mat, Side};
use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Dense complex matrix, row-major semantics via `faer`.
pub type CMat = Mat<Complex64>;

/// Threshold below which a nominally PSD eigenvalue is an error.
pub const PSD_EIG_FLOOR: f64 = -1e-8;

/// Max-entry tolerance for the Hermiticity check.
pub const HERM_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// small dense helpers shared across the crate
// ---------------------------------------------------------------------------

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::ZERO
        }
    })
}

pub fn scale(m: &CMat, c: Complex64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * c)
}

/// Entrywise complex conjugate (no transpose).
pub fn conj_entries(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}

pub fn trace(m: &CMat) -> Complex64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `Tr[a b]` without forming the product: O(n^2).
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(b.ncols(), a.nrows());
    let mut acc = Complex64::ZERO;
    for r in 0..a.nrows() {
        for s in 0..a.ncols() {
            acc += a[(r, s)] * b[(s, r)];
        }
    }
    acc
}

/// `Tr[a b*]` = sum of entrywise products with conj(b): O(n^2).
pub fn trace_product_adjoint(a: &CMat, b: &CMat) -> Complex64 {
    debug_assert_eq!(a.nrows(), b.nrows());
    debug_assert_eq!(a.ncols(), b.ncols());
    let mut acc = Complex64::ZERO;
    for r in 0..a.nrows() {
        for s in 0..a.ncols() {
            acc += a[(r, s)] * b[(r, s)].conj();
        }
    }
    acc
}

pub fn frobenius_norm(m: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn max_entry_abs(m: &CMat) -> f64 {
    let mut acc = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            acc = acc.max(m[(i, j)].norm());
        }
    }
    acc
}

/// Outer product `v v*` as a dense matrix.
pub fn outer(v: &Col<Complex64>) -> CMat {
    Mat::from_fn(v.nrows(), v.nrows(), |i, j| v[i] * v[j].conj())
}

pub fn normalize(v: &mut Col<Complex64>) {
    let n = v.norm_l2();
    if n > 0.0 {
        for i in 0..v.nrows() {
            v[i] /= n;
        }
    }
}

// ---------------------------------------------------------------------------
// HermMat
// ---------------------------------------------------------------------------

/// Hermitian matrix, validated at construction.
#[derive(Clone, Debug)]
pub struct HermMat {
    m: CMat,
}

impl HermMat {
    /// Validates squareness, finiteness, and Hermiticity (max-entry tolerance
    /// [`HERM_TOL`], scaled by the matrix magnitude).
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let mut max_dev = 0.0f64;
        let mut max_abs = 0.0f64;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite);
                }
                max_abs = max_abs.max(z.norm());
                if j >= i {
                    max_dev = max_dev.max((z - m[(j, i)].conj()).norm());
                }
            }
        }
        if max_dev > HERM_TOL * (1.0 + max_abs) {
            return Err(Error::NotHermitian { max_dev });
        }
        Ok(Self { m })
    }

    /// Symmetrizes `(m + m*)/2` first, then validates. For matrices that are
    /// Hermitian analytically but carry floating-point noise.
    pub fn symmetrize(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let h = Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
            (m[(i, j)] + m[(j, i)].conj()) * 0.5
        });
        Self::new(h)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn mat(&self) -> &CMat {
        &self.m
    }

    pub fn into_mat(self) -> CMat {
        self.m
    }

    /// Real trace; the imaginary part of the trace of a Hermitian matrix is 0.
    pub fn trace_re(&self) -> f64 {
        trace(&self.m).re
    }
}

// ---------------------------------------------------------------------------
// SpectralProfile
// ---------------------------------------------------------------------------

/// Non-increasing real eigenvalue vector; the currency of all norm and
/// entropy computations.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralProfile {
    values: Vec<f64>,
}

impl SpectralProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidPlan {
                field: "spectral profile".into(),
                msg: "values must be sorted non-increasing".into(),
            });
        }
        Ok(Self { values })
    }

    /// Sorts descending.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
        Self::new(values)
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

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Clamps values in `[-1e-8, 0)` to zero; errors below the floor.
    pub fn clamped_psd(&self) -> Result<Vec<f64>> {
        let min = self.min();
        if min < PSD_EIG_FLOOR {
            return Err(Error::NotPsd { min_eig: min });
        }
        Ok(self.values.iter().map(|&v| v.max(0.0)).collect())
    }
}

// ---------------------------------------------------------------------------
// SchattenIndex
// ---------------------------------------------------------------------------

/// Schatten index `p` in `(1, ∞]`, with `∞` a distinguished variant rather
/// than a large float.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SchattenIndex {
    Finite(f64),
    Infinity,
}

impl SchattenIndex {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p <= 1.0 {
            return Err(Error::InvalidSchattenIndex { p });
        }
        Ok(Self::Finite(p))
    }

    pub const fn infinity() -> Self {
        Self::Infinity
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Self::Infinity)
    }

    /// The Hölder conjugate `q = p/(p-1)`, with `q = 1` for `p = ∞`.
    pub fn conjugate(self) -> f64 {
        match self {
            Self::Finite(p) => p / (p - 1.0),
            Self::Infinity => 1.0,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Self::Finite(p) => p,
            Self::Infinity => f64::INFINITY,
        }
    }
}

impl fmt::Display for SchattenIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(p) => write!(f, "{p}"),
            Self::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for SchattenIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "∞" {
            return Ok(Self::Infinity);
        }
        let p: f64 = t
            .parse()
            .map_err(|_| Error::InvalidSchattenIndex { p: f64::NAN })?;
        Self::new(p)
    }
}

impl serde::Serialize for SchattenIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for SchattenIndex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------------

/// Full Hermitian eigendecomposition, eigenvalues sorted non-increasing,
/// `m = U diag(λ) U*`.
pub fn eig_herm(m: &HermMat) -> Result<(SpectralProfile, CMat)> {
    let n = m.dim();
    let evd = m
        .mat()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenFailure { dim: n })?;
    let mut idx: Vec<usize> = (0..n).collect();
    let raw: Vec<f64> = (0..n).map(|i| evd.S()[i].re).collect();
    idx.sort_by(|&a, &b| raw[b].partial_cmp(&raw[a]).expect("finite eigenvalues"));
    let values: Vec<f64> = idx.iter().map(|&i| raw[i]).collect();
    let u = evd.U();
    let unitary = Mat::from_fn(n, n, |i, j| u[(i, idx[j])]);
    Ok((SpectralProfile::new(values)?, unitary))
}

/// Eigenvalues only, sorted non-increasing.
pub fn eigvals_herm(m: &HermMat) -> Result<SpectralProfile> {
    let n = m.dim();
    let vals = m
        .mat()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::EigenFailure { dim: n })?;
    SpectralProfile::from_unsorted(vals)
}

/// p-norm of a non-negative value vector; `p = ∞` returns the max.
pub fn vec_pnorm(values: &[f64], p: SchattenIndex) -> f64 {
    match p {
        SchattenIndex::Infinity => values.iter().cloned().fold(0.0, f64::max),
        SchattenIndex::Finite(p) => values.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p),
    }
}

/// Schatten p-norm of a PSD matrix: `(Σ λ_i^p)^{1/p}`, `λ_max` for `p = ∞`.
pub fn schatten_norm(m: &HermMat, p: SchattenIndex) -> Result<f64> {
    let vals = eigvals_herm(m)?.clamped_psd()?;
    Ok(vec_pnorm(&vals, p))
}

/// Von Neumann entropy `-Σ λ log λ` in nats; requires trace ≈ 1.
pub fn von_neumann_entropy(rho: &HermMat) -> Result<f64> {
    let tr = rho.trace_re();
    if (tr - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidTrace { trace: tr });
    }
    let vals = eigvals_herm(rho)?.clamped_psd()?;
    Ok(entropy_of_values(&vals))
}

/// `-Σ λ log λ` with `0 log 0 = 0`, for an already-clamped value vector.
pub fn entropy_of_values(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum()
}

/// The Bell state `(1/√n) Σ_i e_i ⊗ e_i` in dimension `n²`.
pub fn bell_state(n: usize) -> Col<Complex64> {
    assert!(n >= 1, "bell_state needs n >= 1");
    let amp = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
    Col::from_fn(n * n, |idx| if idx % (n + 1) == 0 { amp } else { Complex64::ZERO })
}

/// The Hölder-dual maximizer: for PSD `a ≠ 0` and finite `p`, the PSD `B`
/// with `‖B‖_q = 1`, sharing eigenvectors with `a`, whose eigenvalues satisfy
/// `λ_i(B)^q = ‖a‖_p^{-p} λ_i(a)^p`. Achieves `Tr[aB] = ‖a‖_p`.
pub fn holder_dual_maximizer(a: &HermMat, p: SchattenIndex) -> Result<HermMat> {
    let SchattenIndex::Finite(pf) = p else {
        return Err(Error::InvalidSchattenIndex { p: f64::INFINITY });
    };
    let q = p.conjugate();
    let (profile, u) = eig_herm(a)?;
    let vals = profile.clamped_psd()?;
    let norm_p = vec_pnorm(&vals, p);
    if norm_p <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    // λ_i(B) = (λ_i(a)/‖a‖_p)^{p/q} = (λ_i/‖a‖_p)^{p-1}
    let ratio = pf / q;
    let b_vals: Vec<f64> = vals.iter().map(|&l| (l / norm_p).powf(ratio)).collect();
    let n = a.dim();
    let b = Mat::from_fn(n, n, |i, j| {
        let mut acc = Complex64::ZERO;
        for m in 0..n {
            acc += u[(i, m)] * b_vals[m] * u[(j, m)].conj();
        }
        acc
    });
    HermMat::symmetrize(b)
}

/// Diagonal-vs-spectrum majorization self-test: the p-norm of the sorted
/// diagonal never exceeds the Schatten p-norm, for p ∈ {1.5, 2, 3, ∞}.
pub fn majorization_check(a: &HermMat) -> Result<bool> {
    let eig = eigvals_herm(a)?.clamped_psd()?;
    let mut diag: Vec<f64> = (0..a.dim()).map(|i| a.mat()[(i, i)].re.max(0.0)).collect();
    diag.sort_by(|x, y| y.partial_cmp(x).expect("finite diagonal"));
    let ps = [
        SchattenIndex::Finite(1.5),
        SchattenIndex::Finite(2.0),
        SchattenIndex::Finite(3.0),
        SchattenIndex::Infinity,
    ];
    Ok(ps
        .iter()
        .all(|&p| vec_pnorm(&diag, p) <= vec_pnorm(&eig, p) + 1e-10))
}
