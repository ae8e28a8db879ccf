//! The random CP maps: Φ(ρ) = (1/k) Σ X_i ρ X_i*, its conjugate Φ̄, the
//! complementary map Φ^c, the rectifier R = √k (Σ X_i*X_i)^{-1/2}, and the
//! rectified channel Ψ(ρ) = Φ(RρR).
//!
//! The 1/k normalization lives in channel application, not in the stored
//! Kraus matrices, so sampled operators keep the GUE/Ginibre normalization
//! for spectral tests. Bell-pair outputs are computed only through the
//! k²×k² trace formula; nothing n²-dimensional is ever materialized.

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::EnsembleFlavor;
use crate::matrixkit::{
    self, bell_state, conj_entries, eig_herm, CMat, HermMat, SpectralProfile,
};
use crate::{Error, Result};

/// The k Kraus operators (n×n) defining one sampled CP map.
#[derive(Clone, Debug)]
pub struct KrausFamily {
    n: usize,
    k: usize,
    flavor: EnsembleFlavor,
    ops: Vec<CMat>,
}

impl KrausFamily {
    pub fn new(n: usize, k: usize, flavor: EnsembleFlavor, ops: Vec<CMat>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidPlan {
                field: "k".into(),
                msg: format!("Kraus family size must be >= 2, got {k}"),
            });
        }
        if ops.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: ops.len(),
            });
        }
        for op in &ops {
            if op.nrows() != n || op.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: op.nrows().max(op.ncols()),
                });
            }
        }
        Ok(Self { n, k, flavor, ops })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn flavor(&self) -> EnsembleFlavor {
        self.flavor
    }

    pub fn ops(&self) -> &[CMat] {
        &self.ops
    }

    /// The channel normalization 1/k.
    pub fn scale(&self) -> f64 {
        1.0 / self.k as f64
    }

    /// The frame operator W = Σ X_i* X_i.
    pub fn frame_operator(&self) -> HermMat {
        let mut w = Mat::<Complex64>::zeros(self.n, self.n);
        for op in &self.ops {
            w += op.adjoint() * op;
        }
        HermMat::symmetrize(w).expect("sum of Gram matrices is Hermitian")
    }
}

/// Which of the four maps Φ, Φ̄, Ψ, Ψ̄ to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelKind {
    pub rectified: bool,
    pub conjugated: bool,
}

impl ChannelKind {
    pub const RAW: Self = Self {
        rectified: false,
        conjugated: false,
    };
    pub const RAW_CONJ: Self = Self {
        rectified: false,
        conjugated: true,
    };
    pub const RECTIFIED: Self = Self {
        rectified: true,
        conjugated: false,
    };
    pub const RECTIFIED_CONJ: Self = Self {
        rectified: true,
        conjugated: true,
    };
}

/// R = √k W^{-1/2} with the Lemma 4.1 spectral bracket recorded at the ε
/// given to [`build_rectifier`].
#[derive(Clone, Debug)]
pub struct Rectifier {
    matrix: HermMat,
    epsilon: f64,
    lower_edge: f64,
    upper_edge: f64,
    bracket_holds: bool,
}

impl Rectifier {
    pub fn matrix(&self) -> &HermMat {
        &self.matrix
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// √(k(1−ε))/(√k+1).
    pub fn lower_edge(&self) -> f64 {
        self.lower_edge
    }

    /// √(k(1+ε))/(√k−1).
    pub fn upper_edge(&self) -> f64 {
        self.upper_edge
    }

    /// Whether every eigenvalue of R sits inside the bracket.
    pub fn bracket_holds(&self) -> bool {
        self.bracket_holds
    }
}

/// Builds R = √k (Σ X_i*X_i)^{-1/2} by eigendecomposition of the frame
/// operator, with eigenvalue floor 1e-10. Records whether the Lemma 4.1
/// bracket holds at the given ε; an out-of-bracket R is still returned.
pub fn build_rectifier(fam: &KrausFamily, epsilon: f64) -> Result<Rectifier> {
    if !(0.0..1.0).contains(&epsilon) || epsilon <= 0.0 {
        return Err(Error::OutOfDomain {
            value: epsilon,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let w = fam.frame_operator();
    let (profile, u) = eig_herm(&w)?;
    let min_eig = profile.min();
    if min_eig < 1e-10 {
        return Err(Error::NearSingularFrame { min_eig });
    }
    let k = fam.k as f64;
    let n = fam.n;
    let r_eigs: Vec<f64> = profile.values().iter().map(|&l| (k / l).sqrt()).collect();
    let r = Mat::from_fn(n, n, |i, j| {
        let mut acc = Complex64::ZERO;
        for m in 0..n {
            acc += u[(i, m)] * r_eigs[m] * u[(j, m)].conj();
        }
        acc
    });
    let lower_edge = (k * (1.0 - epsilon)).sqrt() / (k.sqrt() + 1.0);
    let upper_edge = (k * (1.0 + epsilon)).sqrt() / (k.sqrt() - 1.0);
    let bracket_holds = r_eigs
        .iter()
        .all(|&v| v >= lower_edge - 1e-12 && v <= upper_edge + 1e-12);
    Ok(Rectifier {
        matrix: HermMat::symmetrize(r)?,
        epsilon,
        lower_edge,
        upper_edge,
        bracket_holds,
    })
}

/// Effective (unscaled) Kraus operators for a kind: X_i, X̄_i, X_iR, or
/// conj(X_iR). The 1/k channel weight is applied by the callers.
pub fn effective_ops(
    fam: &KrausFamily,
    kind: ChannelKind,
    rect: Option<&Rectifier>,
) -> Result<Vec<CMat>> {
    let base: Vec<CMat> = if kind.rectified {
        let r = rect.ok_or(Error::RectifierRequired)?;
        if r.matrix().dim() != fam.n {
            return Err(Error::DimensionMismatch {
                expected: fam.n,
                got: r.matrix().dim(),
            });
        }
        fam.ops.iter().map(|x| x * r.matrix().mat()).collect()
    } else {
        fam.ops.clone()
    };
    Ok(if kind.conjugated {
        base.iter().map(conj_entries).collect()
    } else {
        base
    })
}

fn check_state(fam: &KrausFamily, rho: &HermMat) -> Result<()> {
    if rho.dim() != fam.n {
        return Err(Error::DimensionMismatch {
            expected: fam.n,
            got: rho.dim(),
        });
    }
    let tr = rho.trace_re();
    if (tr - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidTrace { trace: tr });
    }
    Ok(())
}

/// Φ/Φ̄/Ψ/Ψ̄ applied to a state: (1/k) Σ K_i ρ K_i*.
pub fn apply_cp(
    fam: &KrausFamily,
    kind: ChannelKind,
    rect: Option<&Rectifier>,
    rho: &HermMat,
) -> Result<HermMat> {
    check_state(fam, rho)?;
    let ops = effective_ops(fam, kind, rect)?;
    let n = fam.n;
    let mut out = Mat::<Complex64>::zeros(n, n);
    for kop in &ops {
        let t = kop * rho.mat();
        out += &t * kop.adjoint();
    }
    let s = Complex64::new(fam.scale(), 0.0);
    HermMat::symmetrize(matrixkit::scale(&out, s))
}

/// Complementary map output: the k×k matrix with entries (1/k)·Tr[K_i ρ K_j*].
pub fn apply_complementary(
    fam: &KrausFamily,
    kind: ChannelKind,
    rect: Option<&Rectifier>,
    rho: &HermMat,
) -> Result<HermMat> {
    check_state(fam, rho)?;
    let ops = effective_ops(fam, kind, rect)?;
    let k = fam.k;
    let prods: Vec<CMat> = ops.iter().map(|kop| kop * rho.mat()).collect();
    let s = fam.scale();
    let m = Mat::from_fn(k, k, |i, j| {
        matrixkit::trace_product_adjoint(&prods[i], &ops[j]) * s
    });
    HermMat::symmetrize(m)
}

/// Complementary output on a pure state |x⟩⟨x| without forming the n×n
/// density matrix: entry (i,j) = (1/k)⟨K_j x, K_i x⟩.
pub fn complementary_on_pure(ops: &[CMat], scale: f64, x: &faer::Col<Complex64>) -> HermMat {
    let ys: Vec<faer::Col<Complex64>> = ops.iter().map(|kop| kop * x).collect();
    let k = ops.len();
    let m = Mat::from_fn(k, k, |i, j| {
        let mut acc = Complex64::ZERO;
        for r in 0..ys[i].nrows() {
            acc += ys[j][r].conj() * ys[i][r];
        }
        acc * scale
    });
    HermMat::symmetrize(m).expect("Gram matrix is Hermitian")
}

/// The complementary Bell-pair output (Φ^c ⊗ Φ̄^c)(|b_n⟩⟨b_n|) as a k²×k²
/// matrix: entry ((i,u),(j,v)) = (1/(n k²)) Tr[X̃_i X̃_u* X̃_v X̃_j*], with
/// X̃ = X (raw) or XR (rectified). Row index (i,u) ↦ i·k+u.
pub fn pair_output_on_bell(
    fam: &KrausFamily,
    kind: ChannelKind,
    rect: Option<&Rectifier>,
) -> Result<HermMat> {
    let base_kind = ChannelKind {
        rectified: kind.rectified,
        conjugated: false,
    };
    let ops = effective_ops(fam, base_kind, rect)?;
    let k = fam.k;
    let n = fam.n as f64;
    // G[a*k+b] = X̃_a X̃_b*; entry = (1/(n k²)) Tr[G_{i,u} G_{v,j}]
    let grams: Vec<CMat> = (0..k * k)
        .into_par_iter()
        .map(|ab| {
            let (a, b) = (ab / k, ab % k);
            &ops[a] * ops[b].adjoint()
        })
        .collect();
    let w = 1.0 / (n * (k * k) as f64);
    let dim = k * k;
    let entries: Vec<Complex64> = (0..dim * dim)
        .into_par_iter()
        .map(|idx| {
            let (row, col) = (idx / dim, idx % dim);
            let (i, u) = (row / k, row % k);
            let (j, v) = (col / k, col % k);
            matrixkit::trace_product(&grams[i * k + u], &grams[v * k + j]) * w
        })
        .collect();
    HermMat::symmetrize(Mat::from_fn(dim, dim, |r, c| entries[r * dim + c]))
}

/// ⟨b_k| M |b_k⟩ for a k²×k² pair output M.
pub fn bell_overlap(pair_out: &HermMat) -> Result<f64> {
    let dim = pair_out.dim();
    let k = (dim as f64).sqrt().round() as usize;
    if k * k != dim {
        return Err(Error::DimensionMismatch {
            expected: k * k,
            got: dim,
        });
    }
    let b = bell_state(k);
    let mut acc = Complex64::ZERO;
    for r in 0..dim {
        for c in 0..dim {
            acc += b[r].conj() * pair_out.mat()[(r, c)] * b[c];
        }
    }
    debug_assert!(acc.im.abs() < 1e-10);
    Ok(acc.re)
}

/// Sorted nonzero eigenvalues of direct and complementary outputs on a pure
/// state; Prop.-A.1-style spectrum sharing (used in tests and self-checks).
pub fn shared_spectra(
    fam: &KrausFamily,
    kind: ChannelKind,
    rect: Option<&Rectifier>,
    x: &faer::Col<Complex64>,
) -> Result<(SpectralProfile, SpectralProfile)> {
    let rho = HermMat::new(matrixkit::outer(x))?;
    let direct = apply_cp(fam, kind, rect, &rho)?;
    let comp = apply_complementary(fam, kind, rect, &rho)?;
    Ok((
        matrixkit::eigvals_herm(&direct)?,
        matrixkit::eigvals_herm(&comp)?,
    ))
}
