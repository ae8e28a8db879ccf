//! Acceptance gate: eight criteria, each printing a single pass/fail line.
//! Criteria 1-4 and 8 are exact/analytic; 5-7 are tolerance-banded Monte
//! Carlo runs at fixed seeds.

use std::time::Instant;

use faer::{Col, Mat};
use num_complex::Complex64;

use gecp::channels::{build_rectifier, complementary_on_pure, effective_ops, ChannelKind};
use gecp::ensembles::{sample_kraus_family, EnsembleFlavor, GaussStream, SeedSpec};
use gecp::experiments::{bell_pair_experiment, estimate_mopn, validate_optimal_shape};
use gecp::freelimits::{
    appendix_d_checks, f_limit, haagerup_bound, limit_mopn, minimal_moe_violating_k,
    minimal_violating_k, mp_edges, multiplicativity_verdict, quadratic_entropy_bound,
};
use gecp::matrixkit::{
    self, eigvals_herm, holder_dual_maximizer, schatten_norm, trace, von_neumann_entropy,
};
use gecp::ncoracle::{enumerate_nc, quadratic_form_cumulant, quadratic_form_moment, word_moment};
use gecp::ncoracle::{Letter, LetterKind};
use gecp::{CoefficientMatrix, ExperimentPlan, HermMat, SchattenIndex};

fn report(criterion: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} ({name}): {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

fn random_psd(k: usize, seed: SeedSpec) -> CoefficientMatrix {
    let mut g = GaussStream::new(seed);
    let gm = Mat::from_fn(k, k, |_, _| g.complex_normal(1.0));
    let a = &gm * gm.adjoint();
    CoefficientMatrix::new(HermMat::symmetrize(a).unwrap()).unwrap()
}

#[test]
fn criterion_1_closed_form_identities() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for k in 2..=64usize {
        let kf = k as f64;
        let iso = CoefficientMatrix::from_diagonal(&vec![1.0; k]).unwrap();
        let (f_iso, _) = f_limit(&iso).unwrap();
        worst = worst.max((f_iso - (1.0 + kf.sqrt()).powi(2)).abs());

        let mut rank_one = vec![0.0; k];
        rank_one[0] = 1.0;
        let r1 = CoefficientMatrix::from_diagonal(&rank_one).unwrap();
        let (f_r1, _) = f_limit(&r1).unwrap();
        worst = worst.max((f_r1 - 4.0).abs());

        let lim = limit_mopn(k, SchattenIndex::Infinity).unwrap();
        worst = worst.max((lim.value - 4.0 / kf).abs());

        let (lo, hi) = mp_edges(k);
        worst = worst.max((lo - (kf.sqrt() - 1.0).powi(2)).abs());
        worst = worst.max((hi - (kf.sqrt() + 1.0).powi(2)).abs());
    }
    let elapsed = t0.elapsed().as_secs_f64();
    report(
        1,
        "closed-form identities",
        worst < 1e-10 && elapsed < 1.0,
        &format!("max dev {worst:.2e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_2_oracle_equivalence() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for t in 0..100u64 {
        let k = 2 + (t % 2) as usize;
        let a = random_psd(k, SeedSpec::new(0xACC2, t));
        let m = a.matrix().mat();
        let tr_pow = |r: usize| -> f64 {
            let mut acc = m.to_owned();
            for _ in 1..r {
                acc = &acc * m;
            }
            trace(&acc).re
        };
        for r in 1..=4usize {
            // moments against the explicit non-crossing partition sum
            let got = quadratic_form_moment(&a, r, LetterKind::Semicircular).unwrap();
            let mut want = 0.0;
            for p in enumerate_nc(r).unwrap() {
                want += p.blocks.iter().map(|b| tr_pow(b.len())).product::<f64>();
            }
            worst = worst.max((got - want).abs() / (1.0 + want.abs()));

            // free cumulants are trace powers
            let kappa = quadratic_form_cumulant(&a, r, LetterKind::Semicircular).unwrap();
            worst = worst.max((kappa - tr_pow(r)).abs() / (1.0 + tr_pow(r).abs()));
        }
        // *-moment agreement between the two quadratic forms
        for r in 1..=3usize {
            let s = quadratic_form_moment(&a, 2 * r, LetterKind::Semicircular).unwrap();
            let c = quadratic_form_moment(&a, 2 * r, LetterKind::Circular).unwrap();
            worst = worst.max((s - c).abs() / (1.0 + s.abs()));
        }
    }
    // fourth-moment 2/1/0 table, both kinds
    let cases = [
        ([0usize, 0, 0, 0], 2.0),
        ([0, 0, 1, 1], 1.0),
        ([0, 1, 1, 0], 1.0),
        ([0, 1, 0, 1], 0.0),
        ([0, 0, 0, 1], 0.0),
        ([0, 1, 2, 0], 0.0),
    ];
    for ([i, j, u, v], want) in cases {
        let circ = [
            Letter::circular(i, false),
            Letter::circular(j, true),
            Letter::circular(u, false),
            Letter::circular(v, true),
        ];
        worst = worst.max((word_moment(&circ).unwrap() - want).abs());
        let semi = [
            Letter::semicircular(i),
            Letter::semicircular(j),
            Letter::semicircular(u),
            Letter::semicircular(v),
        ];
        worst = worst.max((word_moment(&semi).unwrap() - want).abs());
    }
    let elapsed = t0.elapsed().as_secs_f64();
    report(
        2,
        "oracle equivalence",
        worst < 1e-10 && elapsed < 30.0,
        &format!("max rel dev {worst:.2e}, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_3_violation_thresholds() {
    let inf = SchattenIndex::Infinity;
    let mut ok = (2..=15).all(|k| !multiplicativity_verdict(k, inf).violated)
        && multiplicativity_verdict(16, inf).violated;
    // regression constants: first violating k under a scan to 10^6
    let p2 = minimal_violating_k(SchattenIndex::new(2.0).unwrap(), 1_000_000);
    let p3 = minimal_violating_k(SchattenIndex::new(3.0).unwrap(), 1_000_000);
    ok &= p2 == Some(153) && p3 == Some(23);
    let moe_k = minimal_moe_violating_k();
    ok &= moe_k == 486_751_282;
    report(
        3,
        "violation thresholds",
        ok,
        &format!("p=inf: k*=16, p=2: k*={p2:?}, p=3: k*={p3:?}, moe: k*={moe_k}"),
    );
}

#[test]
fn criterion_4_haagerup_domination() {
    let t0 = Instant::now();
    let mut min_margin = f64::INFINITY;
    for t in 0..10_000u64 {
        let k = 2 + (t % 11) as usize; // k in 2..=12
        let a = random_psd(k, SeedSpec::new(0xACC4, t));
        let (f, _) = f_limit(&a).unwrap();
        let bound = haagerup_bound(a.matrix().mat());
        min_margin = min_margin.min(bound - f);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    report(
        4,
        "Haagerup domination",
        min_margin >= 0.0 && elapsed < 60.0,
        &format!("min margin {min_margin:.3e}, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_5_monte_carlo_strong_convergence() {
    let t0 = Instant::now();
    let k = 4usize;
    let n = 1000usize;
    let trials = 20usize;
    use rayon::prelude::*;
    let stats: Vec<(f64, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = SeedSpec::new(0xACC5, (t as u64) * 64);
            let fam = sample_kraus_family(n, k, EnsembleFlavor::Gue, seed);
            let spec = eigvals_herm(&fam.frame_operator()).unwrap();
            let mut g = GaussStream::new(seed.offset(32));
            let mut x = Col::from_fn(n, |_| g.complex_normal(1.0));
            matrixkit::normalize(&mut x);
            let tr: f64 = fam
                .ops()
                .iter()
                .map(|op| (op * &x).norm_l2().powi(2))
                .sum::<f64>()
                * fam.scale();
            (spec.max(), spec.min(), tr)
        })
        .collect();
    let mean = |f: &dyn Fn(&(f64, f64, f64)) -> f64| {
        stats.iter().map(f).sum::<f64>() / trials as f64
    };
    let max_dev = (mean(&|s| s.0) - 9.0).abs();
    let min_dev = (mean(&|s| s.1) - 1.0).abs();
    let kf = k as f64;
    let (tlo, thi) = (
        (1.0 - 1.0 / kf.sqrt()).powi(2) - 0.1,
        (1.0 + 1.0 / kf.sqrt()).powi(2) + 0.1,
    );
    let traces_ok = stats.iter().all(|s| s.2 > tlo && s.2 < thi);

    // MOpN estimate at k = 8, n = 600, p = infinity against 4/k
    let fam8 = sample_kraus_family(600, 8, EnsembleFlavor::Gue, SeedSpec::new(0xACC5, 1 << 20));
    let est = estimate_mopn(
        &fam8,
        ChannelKind::RAW,
        None,
        SchattenIndex::Infinity,
        8,
        40,
        SeedSpec::new(0xACC5, 1 << 21),
    )
    .unwrap();
    let rel = (est.value - 0.5).abs() / 0.5;

    let elapsed = t0.elapsed().as_secs_f64();
    report(
        5,
        "Monte Carlo strong convergence",
        max_dev < 0.2 && min_dev < 0.2 && traces_ok && rel < 0.15 && elapsed < 300.0,
        &format!(
            "edge devs ({max_dev:.3}, {min_dev:.3}), traces in window: {traces_ok}, \
             mopn rel err {rel:.3}, {elapsed:.0}s"
        ),
    );
}

#[test]
fn criterion_6_bell_pair_limit() {
    let t0 = Instant::now();
    let mut plan = ExperimentPlan::new(EnsembleFlavor::Gue, 4, vec![800]);
    plan.trials = 10;
    plan.master_seed = Some(0xACC6);
    plan.p_list = vec![SchattenIndex::Infinity];
    let rep = bell_pair_experiment(&plan).unwrap();
    let mean_dist = rep
        .trials
        .iter()
        .map(|t| t.frobenius_distance)
        .sum::<f64>()
        / rep.trials.len() as f64;
    let overlap_ok = rep.trials.iter().all(|t| {
        t.overlap_rectified
            .map(|o| o >= 0.25 - 0.02)
            .unwrap_or(false)
    });
    let elapsed = t0.elapsed().as_secs_f64();
    report(
        6,
        "Bell-pair limit",
        mean_dist < 0.1 && overlap_ok && elapsed < 600.0,
        &format!("mean Frobenius {mean_dist:.4}, overlaps ok: {overlap_ok}, {elapsed:.0}s"),
    );
}

#[test]
fn criterion_7_entropy_machinery() {
    // quadratic lower bound on 10^4 random trace-1 PSD matrices
    let mut g = GaussStream::new(SeedSpec::new(0xACC7, 0));
    let mut quad_ok = true;
    for t in 0..10_000usize {
        let k = 2 + t % 15; // k in 2..=16
        let mut lam: Vec<f64> = (0..k).map(|_| g.standard_normal().powi(2)).collect();
        let total: f64 = lam.iter().sum();
        lam.iter_mut().for_each(|v| *v /= total);
        let rho = HermMat::new(Mat::from_fn(k, k, |i, j| {
            if i == j {
                Complex64::new(lam[i], 0.0)
            } else {
                Complex64::ZERO
            }
        }))
        .unwrap();
        let s = von_neumann_entropy(&rho).unwrap();
        let b = quadratic_entropy_bound(&rho).unwrap();
        if s < b - 1e-10 {
            quad_ok = false;
        }
    }

    // rectified 2-norm deviation at k = 8, n = 600
    let k = 8usize;
    let kf = k as f64;
    let fam = sample_kraus_family(600, k, EnsembleFlavor::Gue, SeedSpec::new(0xACC7, 1));
    let rect = build_rectifier(&fam, 0.3).unwrap();
    let ops = effective_ops(&fam, ChannelKind::RECTIFIED, Some(&rect)).unwrap();
    let bound = 3.0 / (kf + 1.0 - 2.0 * kf.sqrt()) + 0.1;
    let mut max_dev = 0.0f64;
    for probe in 0..40u64 {
        let mut g = GaussStream::new(SeedSpec::new(0xACC7, 100 + probe));
        let mut x = Col::from_fn(600, |_| g.complex_normal(1.0));
        matrixkit::normalize(&mut x);
        let out = complementary_on_pure(&ops, fam.scale(), &x);
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
        max_dev = max_dev.max(acc.sqrt());
    }
    report(
        7,
        "entropy machinery",
        quad_ok && max_dev <= bound,
        &format!("quadratic bound ok: {quad_ok}, max 2-norm dev {max_dev:.3} <= {bound:.3}"),
    );
}

#[test]
fn criterion_8_appendix_checks() {
    // g(k) > 0 on the full grid, including k = 1
    let p_grid: Vec<f64> = (0..10).map(|i| 1.05 + 0.05 * i as f64).collect();
    let k_grid: Vec<usize> = (1..=10_000).collect();
    let rep = appendix_d_checks(&p_grid, &k_grid).unwrap();
    let g_ok = rep.all_g_positive;

    // Holder dual maximizer achieves the p-norm to 1e-9
    let mut worst = 0.0f64;
    for t in 0..1000u64 {
        let k = 2 + (t % 7) as usize;
        let b = random_psd(k, SeedSpec::new(0xACC8, t));
        let p = SchattenIndex::new(1.5 + (t % 5) as f64 * 0.75).unwrap();
        let a = holder_dual_maximizer(b.matrix(), p).unwrap();
        let pairing = trace(&(b.matrix().mat() * a.mat())).re;
        let norm = schatten_norm(b.matrix(), p).unwrap();
        worst = worst.max((pairing - norm).abs() / (1.0 + norm));
    }
    let dual_ok = worst < 1e-9;

    // two-level maximizer shape for k in {2,3,4}, q in {3,4}
    let mut shape_ok = true;
    for k in 2..=4usize {
        let rep = validate_optimal_shape(k, &[3.0, 4.0]).unwrap();
        for rec in &rep.records {
            shape_ok &= rec.two_level_shape
                && (rec.brute_value - rec.reduced_value).abs() < 1e-3;
        }
    }
    report(
        8,
        "appendix checks",
        g_ok && dual_ok && shape_ok,
        &format!(
            "min g {:.3e}, dual dev {worst:.2e}, shapes ok: {shape_ok}",
            rep.min_g
        ),
    );
}
