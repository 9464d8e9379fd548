//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! 1. trace-form HSIC estimators equal their direct-sum definitions
//! 2. unit weights reproduce the classical estimators
//! 3. first-level good-ranking rates, triangular targets from a uniform sample
//! 4. second-level indices of the three-law Ishigami study (R² and ranking QoIs)
//! 5. good-ranking rates of the single loop for the three drawing rules
//! 6. single loop against double loop at equal budget
//! 7. null calibration of both tests, and GSA1 p-values below 0.05 on the Ishigami model
//! 8. kernel Gram invariants and closed-form kernel values
//!
//! Runs with `cargo test -p gsa2 --test acceptance -- --nocapture`; takes
//! about a quarter of an hour on one core. `ACCEPTANCE_ONLY=3,7` runs a subset.

use std::time::Instant;

use gsa2::bench::{budget_comparison, convergence_study, reference_ranking, Estimator, ReferenceInfo};
use gsa2::exec::{resolve_workers, PoolExecutor};
use gsa2_core::densities::{
    sample_product, DistributionEnsemble, DrawingRule, EnsembleEntry, ProductDensity, UnivariateDensity,
};
use gsa2_core::engine::{
    double_loop_gsa2, sample_draws, single_loop_gsa2, Calibration, DrawSampling, Gsa2Config, LoopKind, QoiOption,
    QuantityOfInterest, SampleSource,
};
use gsa2_core::hsic::{
    hsic_v, hsic_v_naive, r2_hsic, weighted_hsic, weighted_hsic_naive, weighted_r2, FirstLevel, SampleSet,
};
use gsa2_core::kernels::{
    discordant_pairs, distribution_gram, distribution_kernel, gram_matrix, mallows_bandwidth, mallows_gram,
    mallows_kernel, mmd_squared, GramMatrix, KernelSpec, Ranking,
};
use gsa2_core::math::norm_ppf;
use gsa2_core::models::{evaluate, IshigamiVariant};
use gsa2_core::quadrature::QuadratureSpec;
use gsa2_core::rng::{derive_seed, open_unit, stream_rng};
use nalgebra::DMatrix;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn exec() -> PoolExecutor {
    PoolExecutor::new(resolve_workers(None, None).unwrap()).unwrap()
}

fn random_gram<R: Rng>(rng: &mut R, n: usize) -> GramMatrix {
    let dim = rng.random_range(1..=3);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    gram_matrix(&pts, &KernelSpec::gaussian(rng.random_range(0.1..5.0)).unwrap()).unwrap()
}

fn criterion_1() -> Verdict {
    let mut rng = stream_rng(1, 0);
    let (mut worst_w, mut worst_c) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = rng.random_range(4..=64);
        let (gx, gy) = (random_gram(&mut rng, n), random_gram(&mut rng, n));
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        worst_w = worst_w.max((weighted_hsic(&gx, &gy, &w).unwrap() - weighted_hsic_naive(&gx, &gy, &w).unwrap()).abs());
        worst_c = worst_c.max((hsic_v(&gx, &gy).unwrap() - hsic_v_naive(&gx, &gy).unwrap()).abs());
    }
    verdict(
        worst_w <= 1e-10 && worst_c <= 1e-10,
        format!("max |trace - naive|: weighted {worst_w:.2e}, classical {worst_c:.2e} (200 instances)"),
    )
}

fn criterion_2() -> Verdict {
    let mut rng = stream_rng(2, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(4..=64);
        let (gx, gy) = (random_gram(&mut rng, n), random_gram(&mut rng, n));
        let ones = vec![1.0; n];
        let classical = hsic_v(&gx, &gy).unwrap();
        worst = worst.max((weighted_hsic(&gx, &gy, &ones).unwrap() - classical).abs());
        worst = worst.max((weighted_hsic_naive(&gx, &gy, &ones).unwrap() - hsic_v_naive(&gx, &gy).unwrap()).abs());
        let r2 = r2_hsic(classical, hsic_v(&gx, &gx).unwrap(), hsic_v(&gy, &gy).unwrap()).unwrap();
        worst = worst.max((weighted_r2(&gx, &gy, &ones).unwrap() - r2).abs());
    }
    verdict(worst <= 1e-14, format!("max deviation at unit weights {worst:.2e} (100 instances)"))
}

fn unit3() -> ProductDensity {
    ProductDensity::new(vec![UnivariateDensity::uniform(0.0, 1.0).unwrap(); 3])
}

// percentage points, exact for rates that are multiples of 1/reps
fn points(rate: f64, reps: usize) -> f64 {
    (rate * reps as f64).round() * 100.0 / reps as f64
}

fn criterion_3(exec: &PoolExecutor) -> Verdict {
    let est = Estimator::Gsa1 {
        drawing: unit3(),
        target: ProductDensity::new(vec![UnivariateDensity::triangular(0.0, 1.0, 0.5).unwrap(); 3]),
        input_kernel: KernelSpec::standardized(),
        output_kernel: KernelSpec::standardized(),
        calibration: Calibration::Target,
    };
    let reference = reference_ranking(&est, &IshigamiVariant, 10_000, 20, 0, exec).unwrap();
    let rep = convergence_study(&est, &IshigamiVariant, &[100, 200, 300, 500], 200, reference.clone(), 0, exec).unwrap();
    let want = [88.0, 93.5, 97.0, 100.0];
    let got: Vec<f64> = rep.sizes.iter().map(|s| points(s.good_ranking_rate, 200)).collect();
    let pass = got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 7.0);
    verdict(pass, format!("reference {:?}; rates {got:?}% vs {want:?}% (±7)", reference.ranking))
}

fn three_laws() -> DistributionEnsemble {
    let entry = || {
        EnsembleEntry::finite(
            vec![
                UnivariateDensity::uniform(0.0, 1.0).unwrap(),
                UnivariateDensity::triangular(0.0, 1.0, 0.4).unwrap(),
                UnivariateDensity::truncated_normal(0.0, 1.0, 0.6, 0.2).unwrap(),
            ],
            None,
        )
        .unwrap()
    };
    DistributionEnsemble::new(vec![entry(), entry(), entry()]).unwrap()
}

fn exhaustive(qoi: QoiOption, n2: usize, seed: u64) -> Gsa2Config {
    let mut c = Gsa2Config::new(27, n2, qoi, seed);
    c.sampling = DrawSampling::Exhaustive;
    c
}

fn close(got: &[f64], want: &[f64], tol: f64) -> bool {
    got.iter().zip(want).all(|(g, w)| (g - w).abs() <= tol)
}

fn criterion_4(exec: &PoolExecutor) -> Verdict {
    let ens = three_laws();
    let want = [0.4152, 0.2516, 0.0086];
    let reps = 10;
    let mut mean = [0.0; 3];
    let mut ordered = 0;
    for seed in 0..reps {
        let r2 = single_loop_gsa2(&ens, SampleSource::Model(&IshigamiVariant), &exhaustive(QoiOption::R2, 1000, seed), exec)
            .unwrap()
            .r2();
        ordered += usize::from(r2[0] > r2[1] && r2[1] > r2[2]);
        for k in 0..3 {
            mean[k] += r2[k] / reps as f64;
        }
    }
    let single_ok = close(&mean, &want, 0.08) && ordered * 10 >= reps as usize * 9;
    let double = double_loop_gsa2(&ens, &IshigamiVariant, &exhaustive(QoiOption::R2, 1000, 0), exec).unwrap().r2();
    let double_ok = close(&double, &want, 0.08) && double[0] > double[1] && double[1] > double[2];
    let want_b = [0.3830, 0.0958, 0.0];
    let rank_single =
        single_loop_gsa2(&ens, SampleSource::Model(&IshigamiVariant), &exhaustive(QoiOption::Ranking, 1000, 1), exec)
            .unwrap()
            .r2();
    let rank_double = double_loop_gsa2(&ens, &IshigamiVariant, &exhaustive(QoiOption::Ranking, 1000, 1), exec).unwrap().r2();
    let rank_ok = close(&rank_single, &want_b, 0.08) && close(&rank_double, &want_b, 0.08);
    let f = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    verdict(
        single_ok && double_ok && rank_ok,
        format!(
            "R² single (mean of {reps}) [{}], ordered {ordered}/{reps}; double [{}]; ranking QoI single [{}], double [{}]",
            f(&mean),
            f(&double),
            f(&rank_single),
            f(&rank_double)
        ),
    )
}

fn rule_rate(rule: DrawingRule, exec: &PoolExecutor) -> f64 {
    let mut engine = exhaustive(QoiOption::R2, 1000, 0);
    engine.rule = rule;
    let est = Estimator::Gsa2 { ensemble: three_laws(), engine, kind: LoopKind::Single };
    let reference = ReferenceInfo::given(&Ranking::from_one_based(&[1, 2, 3]).unwrap());
    convergence_study(&est, &IshigamiVariant, &[1000], 100, reference, 5, exec).unwrap().sizes[0].good_ranking_rate
}

fn criterion_5(exec: &PoolExecutor) -> Verdict {
    let m = rule_rate(DrawingRule::Mixture, exec);
    let s = rule_rate(DrawingRule::Skl, exec);
    let w = rule_rate(DrawingRule::Wasserstein, exec);
    let pass = m >= 0.93 && s >= 0.93 && m >= w - 0.05 && s >= w - 0.05;
    verdict(pass, format!("mixture {m:.2}, SKL {s:.2}, Wasserstein {w:.2} (100 replications, n2 = 1000)"))
}

fn criterion_6(exec: &PoolExecutor) -> Verdict {
    let reference = ReferenceInfo::given(&Ranking::from_one_based(&[1, 2, 3]).unwrap());
    let engine = exhaustive(QoiOption::R2, 1000, 0);
    let r = budget_comparison(&three_laws(), &engine, &IshigamiVariant, 1026, 50, reference, 6, exec).unwrap();
    let (s, d) = (r.single.good_ranking_rate, r.double.good_ranking_rate);
    verdict(
        points(s, 50) - points(d, 50) >= 15.0,
        format!("single {s:.2} vs double {d:.2} (n2 inner = {}, 50 replications)", r.n2_inner),
    )
}

fn ks_uniform(p: &mut [f64]) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max)
}

fn criterion_7(exec: &PoolExecutor) -> Verdict {
    let reps = 200;
    let mut gamma = Vec::with_capacity(reps);
    let mut perm = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut rng = stream_rng(derive_seed(7, &[r as u64]), 0);
        let x: Vec<f64> = (0..100).map(|_| open_unit(&mut rng)).collect();
        let y: Vec<f64> = (0..100).map(|_| norm_ppf(open_unit(&mut rng))).collect();
        let s = SampleSet::new(vec![x], y).unwrap();
        let fl = FirstLevel::new(&s, &[KernelSpec::standardized()], &KernelSpec::standardized()).unwrap();
        gamma.push(fl.gamma_tests(None).unwrap()[0].pvalue);
        perm.push(fl.permutation_tests(None, 500, derive_seed(7, &[r as u64, 1]), exec).unwrap()[0].pvalue);
    }
    let critical = 1.628 / (reps as f64).sqrt();
    let (dg, dp) = (ks_uniform(&mut gamma), ks_uniform(&mut perm));

    // GSA1 p-values from the shared single-loop sample (n2 = 1000) under each of the 27 laws,
    // with classical tests on direct samples under the same laws for comparison
    let mut shared = [0.0f64; 3];
    for qoi in [QoiOption::GammaPvalues, QoiOption::PermutationPvalues { b: 300 }] {
        let res = single_loop_gsa2(&three_laws(), SampleSource::Model(&IshigamiVariant), &exhaustive(qoi, 1000, 7), exec)
            .unwrap();
        for q in &res.qois {
            if let QuantityOfInterest::GammaPvalues(p) | QuantityOfInterest::PermutationPvalues(p) = q {
                for k in 0..3 {
                    shared[k] = shared[k].max(p[k]);
                }
            }
        }
    }
    let draws = sample_draws(&three_laws(), 27, DrawSampling::Exhaustive, 0).unwrap();
    let mut direct = [0.0f64; 3];
    for (t, d) in draws.iter().enumerate() {
        let law = ProductDensity::new(d.densities.clone());
        let cols = sample_product(&law, 1000, derive_seed(7, &[1000, t as u64])).unwrap();
        let y = evaluate(&IshigamiVariant, &cols, exec);
        let s = SampleSet::new(cols, y).unwrap();
        let fl = FirstLevel::new(&s, &[KernelSpec::standardized()], &KernelSpec::standardized()).unwrap();
        let perm = fl.permutation_tests(None, 300, t as u64, exec).unwrap();
        for (k, p) in fl.gamma_tests(None).unwrap().iter().chain(&perm).enumerate() {
            direct[k % 3] = direct[k % 3].max(p.pvalue);
        }
    }
    let f = |v: &[f64]| v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ");
    verdict(
        dg < critical && dp < critical && shared.iter().all(|&p| p < 0.05),
        format!(
            "KS distance gamma {dg:.3}, permutation {dp:.3} (1% critical {critical:.3}); \
             largest GSA1 p-value per input over 27 laws: shared sample [{}], direct samples [{}]",
            f(&shared),
            f(&direct)
        ),
    )
}

fn psd_ok(g: &GramMatrix) -> bool {
    let n = g.n();
    let sym = (0..n).all(|i| (0..n).all(|j| g.get(i, j) == g.get(j, i)));
    let eig = DMatrix::from_row_slice(n, n, g.entries()).symmetric_eigen().eigenvalues;
    let top = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let low = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    sym && g.has_unit_diagonal() && low >= -1e-8 * top
}

fn criterion_8() -> Verdict {
    let mut rng = stream_rng(8, 0);
    let mut bad = 0;
    let scheme = QuadratureSpec { nodes: 64, tolerance: 1e-9 };
    let base = KernelSpec::gaussian(1.0).unwrap();
    for i in 0..1000 {
        let g = match i % 3 {
            0 => {
                let n = rng.random_range(2..40);
                random_gram(&mut rng, n)
            }
            1 => {
                let d = rng.random_range(2..7);
                let ranks: Vec<Ranking> = (0..rng.random_range(2..30))
                    .map(|_| {
                        let mut p: Vec<usize> = (0..d).collect();
                        for j in (1..d).rev() {
                            p.swap(j, rng.random_range(0..=j));
                        }
                        Ranking::new(p).unwrap()
                    })
                    .collect();
                mallows_gram(&ranks, Some(rng.random_range(0.05..5.0))).unwrap()
            }
            _ => {
                let laws: Vec<UnivariateDensity> = (0..rng.random_range(2..9))
                    .map(|_| match rng.random_range(0..3) {
                        0 => UnivariateDensity::uniform(0.0, 1.0).unwrap(),
                        1 => UnivariateDensity::triangular(0.0, 1.0, rng.random_range(0.0..1.0)).unwrap(),
                        _ => UnivariateDensity::truncated_normal(0.0, 1.0, rng.random_range(0.1..0.9), rng.random_range(0.05..0.5))
                            .unwrap(),
                    })
                    .collect();
                distribution_gram(&laws, &base, Some(rng.random_range(0.5..500.0)), &scheme).unwrap()
            }
        };
        bad += usize::from(!psd_ok(&g));
    }

    let r = |v: &[usize]| Ranking::from_one_based(v).unwrap();
    let mut closed = Vec::new();
    closed.push((discordant_pairs(&r(&[1, 2, 3]), &r(&[3, 2, 1])).unwrap() as f64, 3.0));
    closed.push((mallows_bandwidth(&[r(&[1, 2, 3]), r(&[3, 2, 1])]).unwrap(), 1.0 / 3.0));
    closed.push((mallows_bandwidth(&[r(&[1, 2]), r(&[1, 2]), r(&[2, 1])]).unwrap(), 1.5));
    closed.push((mallows_kernel(&r(&[1, 2, 3]), &r(&[3, 2, 1]), 0.5).unwrap(), (-1.5f64).exp()));
    let (u, t) = (UnivariateDensity::uniform(0.0, 1.0).unwrap(), UnivariateDensity::triangular(0.0, 1.0, 0.4).unwrap());
    let quad = QuadratureSpec::default();
    closed.push((mmd_squared(&t, &t, &base, &quad).unwrap(), 0.0));
    let m = mmd_squared(&u, &t, &base, &quad).unwrap();
    closed.push((mmd_squared(&t, &u, &base, &quad).unwrap(), m));
    closed.push((distribution_kernel(&u, &t, &base, 5.0, &quad).unwrap(), (-5.0 * m).exp()));
    closed.push((distribution_kernel(&u, &u, &base, 5.0, &quad).unwrap(), 1.0));
    let worst = closed.iter().map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    verdict(
        bad == 0 && worst <= 1e-9,
        format!("{bad} of 1000 random Grams violate an invariant; worst closed-form error {worst:.1e}"),
    )
}

#[test]
fn acceptance() {
    let exec = exec();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("trace-form estimators equal direct sums", Box::new(criterion_1)),
        ("unit weights reproduce classical estimators", Box::new(criterion_2)),
        ("first-level good-ranking rates", Box::new(|| criterion_3(&exec))),
        ("second-level indices of the three-law study", Box::new(|| criterion_4(&exec))),
        ("drawing-rule good-ranking rates", Box::new(|| criterion_5(&exec))),
        ("single loop beats double loop at equal budget", Box::new(|| criterion_6(&exec))),
        ("test calibration and GSA1 p-values below 0.05", Box::new(|| criterion_7(&exec))),
        ("kernel invariants and closed forms", Box::new(criterion_8)),
    ];
    // ACCEPTANCE_ONLY=3,7 restricts the run to the listed criteria
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|c| c.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let start = Instant::now();
        let v = f();
        println!(
            "criterion {}: {} - {name}: {} [{:.0} s]",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
