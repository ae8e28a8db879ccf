//! Seeded sampling of GUE and Ginibre matrices at the 1/n normalization.
//!
//! Randomness comes from ChaCha8 counter-based streams: the pair
//! `(master_seed, stream_index)` fully determines a stream, and distinct
//! stream indices are independent without sequential draining. Gaussians are
//! produced by the polar (Marsaglia) method, frozen so that seeded outputs
//! are bit-stable across releases.

use faer::Mat;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::KrausFamily;
use crate::matrixkit::CMat;
use crate::HermMat;

/// Which Gaussian ensemble a Kraus family is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleFlavor {
    /// Hermitian: diagonal N(0,1/n), off-diagonal re/im each N(0,1/(2n)).
    Gue,
    /// All entries with re/im independent N(0,1/(2n)).
    Ginibre,
}

impl std::fmt::Display for EnsembleFlavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Gue => write!(f, "gue"),
            Self::Ginibre => write!(f, "ge"),
        }
    }
}

/// Addresses one independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// The stream shifted by `offset`; used to fan one spec out into a
    /// contiguous block of independent streams.
    pub fn offset(self, offset: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_index: self.stream_index + offset,
        }
    }
}

/// Standard-normal stream over ChaCha8, polar method, frozen draw order.
pub struct GaussStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussStream {
    pub fn new(seed: SeedSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.master_seed);
        rng.set_stream(seed.stream_index);
        Self { rng, spare: None }
    }

    /// Uniform in [0, 1) with 53 random bits.
    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * factor);
                return u * factor;
            }
        }
    }

    pub fn normal(&mut self, std_dev: f64) -> f64 {
        self.standard_normal() * std_dev
    }

    /// Complex with independent re/im each N(0, std_dev²).
    pub fn complex_normal(&mut self, std_dev: f64) -> Complex64 {
        let re = self.standard_normal() * std_dev;
        let im = self.standard_normal() * std_dev;
        Complex64::new(re, im)
    }
}

/// GUE sample: Hermitian, diagonal N(0,1/n), off-diagonal re/im N(0,1/(2n)).
///
/// Draw order is frozen: rows i = 0..n, within a row the diagonal entry
/// first, then columns j = i+1..n as (re, im) pairs.
pub fn sample_gue(n: usize, seed: SeedSpec) -> HermMat {
    assert!(n >= 1, "sample_gue needs n >= 1");
    let mut g = GaussStream::new(seed);
    let diag_sd = (1.0 / n as f64).sqrt();
    let off_sd = (1.0 / (2.0 * n as f64)).sqrt();
    let mut m = Mat::<Complex64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = Complex64::new(g.normal(diag_sd), 0.0);
        for j in (i + 1)..n {
            let z = g.complex_normal(off_sd);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    HermMat::new(m).expect("construction is Hermitian by symmetry")
}

/// Ginibre sample: every entry's re/im independent N(0, 1/(2n)).
/// Draw order frozen: row-major, re before im.
pub fn sample_ginibre(n: usize, seed: SeedSpec) -> CMat {
    assert!(n >= 1, "sample_ginibre needs n >= 1");
    let mut g = GaussStream::new(seed);
    let sd = (1.0 / (2.0 * n as f64)).sqrt();
    let mut m = Mat::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = g.complex_normal(sd);
        }
    }
    m
}

/// Samples the k Kraus operators of one channel. Operator `i` uses the
/// stream `seed.stream_index + i`, so a caller spacing base streams `k`
/// apart gets fully independent families.
pub fn sample_kraus_family(n: usize, k: usize, flavor: EnsembleFlavor, seed: SeedSpec) -> KrausFamily {
    assert!(n >= 1, "sample_kraus_family needs n >= 1");
    assert!(k >= 2, "sample_kraus_family needs k >= 2");
    let ops: Vec<CMat> = (0..k)
        .map(|i| match flavor {
            EnsembleFlavor::Gue => sample_gue(n, seed.offset(i as u64)).into_mat(),
            EnsembleFlavor::Ginibre => sample_ginibre(n, seed.offset(i as u64)),
        })
        .collect();
    KrausFamily::new(n, k, flavor, ops).expect("sampled operators have the requested shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixkit::{eigvals_herm, max_entry_abs, trace_product_adjoint};

    #[test]
    fn gue_deterministic() {
        let seed = SeedSpec::new(7, 3);
        let a = sample_gue(40, seed);
        let b = sample_gue(40, seed);
        assert_eq!(max_entry_abs(&(a.mat() - b.mat())), 0.0);
        let c = sample_gue(40, SeedSpec::new(7, 4));
        assert!(max_entry_abs(&(a.mat() - c.mat())) > 1e-3);
    }

    #[test]
    fn ginibre_deterministic() {
        let seed = SeedSpec::new(11, 0);
        let a = sample_ginibre(40, seed);
        let b = sample_ginibre(40, seed);
        assert_eq!(max_entry_abs(&(&a - &b)), 0.0);
    }

    #[test]
    fn gue_second_moment() {
        // E[(1/n)Tr S^2] = 1: the n diagonal variances 1/n plus n(n-1)
        // off-diagonal |entry|^2 means 1/n sum to n.
        let n = 600;
        let trials = 50;
        let mut vals = Vec::with_capacity(trials);
        for t in 0..trials {
            let s = sample_gue(n, SeedSpec::new(1000, t as u64));
            let m = trace_product_adjoint(s.mat(), s.mat()).re / n as f64;
            vals.push(m);
        }
        let mean: f64 = vals.iter().sum::<f64>() / trials as f64;
        let var: f64 =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!(
            (mean - 1.0).abs() < 3.0 * se.max(1e-3),
            "mean {mean}, se {se}"
        );
    }

    #[test]
    fn gue_odd_moments_vanish() {
        let n = 300;
        let trials = 50;
        let mut vals = Vec::with_capacity(trials);
        for t in 0..trials {
            let s = sample_gue(n, SeedSpec::new(2000, t as u64));
            // (1/n) Tr S^3 via S^2 then trace against S
            let s2 = s.mat() * s.mat();
            let m3 = crate::matrixkit::trace_product(&s2, s.mat()).re / n as f64;
            vals.push(m3);
        }
        let mean: f64 = vals.iter().sum::<f64>() / trials as f64;
        let var: f64 =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!(mean.abs() < 3.0 * se.max(1e-3), "mean {mean}, se {se}");
    }

    #[test]
    fn gue_semicircle_ks() {
        let n = 1200;
        let s = sample_gue(n, SeedSpec::new(42, 0));
        let eigs = eigvals_herm(&s).unwrap();
        // ascending order for the CDF comparison
        let mut asc: Vec<f64> = eigs.values().to_vec();
        asc.reverse();
        let semicircle_cdf = |x: f64| -> f64 {
            if x <= -2.0 {
                0.0
            } else if x >= 2.0 {
                1.0
            } else {
                0.5 + (x * (4.0 - x * x).sqrt() + 4.0 * (x / 2.0).asin())
                    / (4.0 * std::f64::consts::PI)
            }
        };
        let mut ks = 0.0f64;
        for (i, &x) in asc.iter().enumerate() {
            let f = semicircle_cdf(x);
            ks = ks.max((f - i as f64 / n as f64).abs());
            ks = ks.max((f - (i + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 0.03, "KS distance {ks}");
    }

    #[test]
    fn ginibre_mp_ks() {
        let n = 1200;
        let c = sample_ginibre(n, SeedSpec::new(43, 0));
        let w = HermMat::symmetrize(c.adjoint() * &c).unwrap();
        let eigs = eigvals_herm(&w).unwrap();
        let mut asc: Vec<f64> = eigs.values().to_vec();
        asc.reverse();
        // MP rate 1 CDF on [0,4] by numeric integration of the density
        let density = |x: f64| (x * (4.0 - x)).max(0.0).sqrt() / (2.0 * std::f64::consts::PI * x);
        let grid = 40_000usize;
        let dx = 4.0 / grid as f64;
        let mut cdf = Vec::with_capacity(grid + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for g in 0..grid {
            let xm = (g as f64 + 0.5) * dx;
            acc += density(xm) * dx;
            cdf.push(acc);
        }
        let cdf_at = |x: f64| -> f64 {
            if x <= 0.0 {
                0.0
            } else if x >= 4.0 {
                1.0
            } else {
                cdf[(x / dx) as usize].min(1.0)
            }
        };
        let mut ks = 0.0f64;
        for (i, &x) in asc.iter().enumerate() {
            let f = cdf_at(x);
            ks = ks.max((f - i as f64 / n as f64).abs());
            ks = ks.max((f - (i + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 0.03, "KS distance {ks}");
    }

    #[test]
    fn ginibre_second_moment() {
        let n = 600;
        let trials = 50;
        let mut vals = Vec::with_capacity(trials);
        for t in 0..trials {
            let c = sample_ginibre(n, SeedSpec::new(3000, t as u64));
            vals.push(trace_product_adjoint(&c, &c).re / n as f64);
        }
        let mean: f64 = vals.iter().sum::<f64>() / trials as f64;
        let var: f64 =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se.max(1e-3), "mean {mean}");
    }

    #[test]
    fn gue_to_ginibre_construction() {
        // (S + iS')/sqrt2 from two GUE streams has Ginibre entry statistics
        let n = 500;
        let s = sample_gue(n, SeedSpec::new(50, 0));
        let sp = sample_gue(n, SeedSpec::new(50, 1));
        let i = Complex64::new(0.0, 1.0);
        let half = Complex64::new(1.0 / 2.0f64.sqrt(), 0.0);
        let c = Mat::from_fn(n, n, |r, col| (s.mat()[(r, col)] + i * sp.mat()[(r, col)]) * half);
        let m2 = trace_product_adjoint(&c, &c).re / n as f64;
        assert!((m2 - 1.0).abs() < 0.05, "second moment {m2}");
        let mean_re: f64 = (0..n)
            .map(|r| (0..n).map(|q| c[(r, q)].re).sum::<f64>())
            .sum::<f64>()
            / (n * n) as f64;
        assert!(mean_re.abs() < 3.0 / n as f64 * 3.0);
    }

    #[test]
    fn kraus_family_shapes_and_determinism() {
        let fam = sample_kraus_family(30, 3, EnsembleFlavor::Gue, SeedSpec::new(9, 0));
        assert_eq!(fam.k(), 3);
        assert_eq!(fam.n(), 30);
        for op in fam.ops() {
            assert!(max_entry_abs(&(op.adjoint().to_owned() - op)) < 1e-12);
        }
        let fam2 = sample_kraus_family(30, 3, EnsembleFlavor::Gue, SeedSpec::new(9, 0));
        for (a, b) in fam.ops().iter().zip(fam2.ops()) {
            assert_eq!(max_entry_abs(&(a - b)), 0.0);
        }
    }
}
