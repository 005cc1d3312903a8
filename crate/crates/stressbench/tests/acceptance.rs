//! Acceptance suite: every reported number and qualitative claim the library
//! is expected to reproduce, one test per criterion, with the tolerance
//! pinned in the assertion. Each test prints a `criterion NN ... PASS` line
//! (visible with `--nocapture`).

use eigengrad::{
    angular_residual, backward_eig, backward_pi_deflation, covariance, eig_sym, finite_diff_grad,
    gradient_bound, ktilde_clip, ktilde_taylor, per_eigenvector_term_norms, BackwardMethod,
    BreakConfig, DataMatrix, EigenDecomp, FdConfig, GradSeed, SymMatrix, ZcaState,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stressbench::{run_eigengap, run_equivalence, run_explosion, run_speed};
use stressbench::{Experiment, ExperimentSpec, MethodChoice};

fn normal_data(rng: &mut ChaCha8Rng, d: usize, n: usize) -> DataMatrix {
    DataMatrix::new(DMatrix::from_fn(d, n, |_, _| rng.sample(StandardNormal))).unwrap()
}

fn pass(n: u32, name: &str, detail: String) {
    println!("criterion {n:02} ({name}): PASS - {detail}");
}

/// The 3x3 spectrum (0.02, 0.01, 0.01) at degree 9 reproduces the published
/// magnitudes to +-0.005.
#[test]
fn acceptance_01_taylor_ktilde_worked_example() {
    let values = DVector::from_vec(vec![0.02, 0.01, 0.01]);
    let k = ktilde_taylor(&values, 9, 0.01).unwrap();
    let expect = [
        [0.0, 99.90, 99.90],
        [99.90, 0.0, 1000.0],
        [99.90, 1000.0, 0.0],
    ];
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let err = (k.entries()[(i, j)].abs() - expect[i][j]).abs();
            worst = worst.max(err);
            assert!(
                err <= 0.005,
                "entry ({i},{j}): |{}| vs {}",
                k.entries()[(i, j)],
                expect[i][j]
            );
        }
    }
    pass(1, "Taylor K-matrix worked example", format!("max misfit {worst:.2e} <= 0.005"));
}

/// Angular-residual extremes: -5.71 at (0.5, 0.5), -0.06 at (0.01, 0.01),
/// -44.99 near the triple tie.
#[test]
fn acceptance_02_angular_residual_extremes() {
    let half = angular_residual(0.5, 0.5, 9);
    assert!((half + 5.71).abs() <= 0.01, "rho(0.5, 0.5) = {half}");
    let tiny = angular_residual(0.01, 0.01, 9);
    assert!((tiny + 0.06).abs() <= 0.01, "rho(0.01, 0.01) = {tiny}");
    let q3 = 1.0 - 1e-6;
    let worst = angular_residual(q3 + 1e-10, q3, 9);
    assert!((worst + 44.99).abs() <= 0.05, "rho near triple tie = {worst}");
    pass(
        2,
        "angular residual extremes",
        format!("{half:.3}, {tiny:.3}, {worst:.3} degrees"),
    );
}

/// Clipping bends the tied column by 45 degrees where the Taylor version
/// stays within 5.71.
#[test]
fn acceptance_03_clipping_direction_error() {
    let values = DVector::from_vec(vec![0.02, 0.01, 0.01]);
    let true_angle = f64::INFINITY.atan2(100.0);

    let clip = ktilde_clip(&values, 100.0);
    let clip_angle = clip.entries()[(1, 2)].atan2(clip.entries()[(0, 2)]);
    let clip_err = (true_angle - clip_angle).to_degrees();
    assert!((clip_err - 45.0).abs() <= 0.1, "clip error {clip_err}");

    let taylor = ktilde_taylor(&values, 9, 0.01).unwrap();
    let taylor_angle = taylor.entries()[(1, 2)].atan2(taylor.entries()[(0, 2)]);
    let taylor_err = (true_angle - taylor_angle).to_degrees();
    assert!(taylor_err.abs() <= 5.71, "taylor error {taylor_err}");
    pass(
        3,
        "clipping direction error",
        format!("clip {clip_err:.2} deg vs taylor {taylor_err:.2} deg"),
    );
}

/// Every per-eigenvector Taylor term stays under n(K+1)/eps across 1000
/// random spectra with exact ties, dimension 64, unit seeds.
#[test]
fn acceptance_04_gradient_bound() {
    let d = 64;
    let (degree, epsilon) = (9, 0.01);
    let cap = gradient_bound(d, degree, epsilon, 1.0);
    assert_eq!(cap, 64.0 * 10.0 / 0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut lam: Vec<f64> = Vec::with_capacity(d);
        for i in 0..d {
            if i > 0 && rng.random::<f64>() < 0.3 {
                lam.push(lam[i - 1]);
            } else {
                lam.push(epsilon + (10.0 - epsilon) * rng.random::<f64>());
            }
        }
        lam[d - 2] = epsilon;
        lam[d - 1] = epsilon;
        lam.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let values = DVector::from_vec(lam);
        let decomp = EigenDecomp::from_parts(DMatrix::identity(d, d), values.clone()).unwrap();
        let mut gv = DMatrix::zeros(d, d);
        for c in 0..d {
            let col: DVector<f64> =
                DVector::from_fn(d, |_, _| rng.sample(StandardNormal)).normalize();
            gv.set_column(c, &col);
        }
        let seed = GradSeed::new(gv, DVector::zeros(d)).unwrap();
        let k = ktilde_taylor(&values, degree, epsilon).unwrap();
        for norm in per_eigenvector_term_norms(&decomp, &seed, &k).unwrap() {
            worst = worst.max(norm);
            assert!(norm <= cap, "term norm {norm} exceeds bound {cap}");
        }
    }
    pass(4, "Taylor gradient bound", format!("max term norm {worst:.1} <= {cap}"));
}

/// Dominant-eigenvector gradients from the Taylor and deflation routes agree
/// to 1e-10 relative over 300 random PSD matrices and K in {1, 5, 9}.
#[test]
fn acceptance_05_taylor_pi_equivalence() {
    let mut worst: f64 = 0.0;
    for degree in [1usize, 5, 9] {
        let mut spec = ExperimentSpec::new(Experiment::Equivalence);
        spec.dims = vec![4, 8, 16];
        spec.trials = 100;
        spec.taylor_degree = degree;
        spec.seed = 50 + degree as u64;
        let rows = run_equivalence(&spec).unwrap();
        for row in rows.iter().filter(|r| r.rank == 1) {
            worst = worst.max(row.taylor_pi_gap);
            assert!(
                row.taylor_pi_gap <= 1e-10,
                "K={degree} d={} trial {}: gap {}",
                row.dim,
                row.trial,
                row.taylor_pi_gap
            );
        }
    }
    pass(5, "Taylor-PI equivalence", format!("max dominant gap {worst:.2e} <= 1e-10"));
}

/// Analytic backward against central finite differences on well-separated
/// 5x5 spectra, three losses, relative error 1e-5.
#[test]
fn acceptance_06_finite_difference_agreement() {
    let d = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let method = BackwardMethod::analytic(0.01).unwrap();
    let mut accepted = 0;
    let mut worst: f64 = 0.0;
    while accepted < 50 {
        let x = normal_data(&mut rng, d, 2 * d);
        let m = covariance(&x, 0.01).unwrap();
        let decomp = eig_sym(&m).unwrap();
        let min_gap = (1..d)
            .map(|i| decomp.values()[i - 1] - decomp.values()[i])
            .fold(f64::INFINITY, f64::min);
        if min_gap < 1e-2 {
            continue;
        }
        accepted += 1;

        type Loss = (
            &'static str,
            fn(&SymMatrix) -> eigengrad::Result<f64>,
            fn(&EigenDecomp) -> GradSeed,
        );
        let losses: [Loss; 3] = [
            ("trace", |m| Ok(m.entries().trace()), |dec| {
                GradSeed::new(
                    DMatrix::zeros(dec.dim(), dec.dim()),
                    DVector::from_element(dec.dim(), 1.0),
                )
                .unwrap()
            }),
            (
                "eigvec frobenius",
                |m| Ok(eig_sym(m)?.vectors().norm_squared()),
                |dec| {
                    GradSeed::new(2.0 * dec.vectors(), DVector::zeros(dec.dim())).unwrap()
                },
            ),
            (
                "eigenvalue power",
                |m| Ok(eig_sym(m)?.values().norm_squared()),
                |dec| {
                    GradSeed::new(
                        DMatrix::zeros(dec.dim(), dec.dim()),
                        2.0 * dec.values(),
                    )
                    .unwrap()
                },
            ),
        ];
        for (name, loss, seed_of) in losses {
            let fd = finite_diff_grad(loss, &m, &FdConfig::default()).unwrap();
            let seed = seed_of(&decomp);
            let grad = backward_eig(&decomp, &seed, &method).unwrap().matrix;
            let sym = 0.5 * (&grad + grad.transpose());
            let rel = (&fd - &sym).norm() / sym.norm().max(1.0);
            worst = worst.max(rel);
            assert!(rel <= 1e-5, "{name}: relative error {rel}");
        }
    }
    pass(6, "finite-difference agreement", format!("worst relative error {worst:.2e}"));
}

/// Whitened training batches have identity covariance to 1e-6 per entry for
/// d up to 64.
#[test]
fn acceptance_07_zca_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for d in [4usize, 8, 16, 32, 64] {
        let n = 4 * d;
        let x = normal_data(&mut rng, d, n);
        let mut state = ZcaState::new(d, 0.1, 1e-9).unwrap();
        let (out, _) = state.forward_train(&x, &BackwardMethod::default()).unwrap();
        let gram = out.as_matrix() * out.as_matrix().transpose();
        let err = (&gram - DMatrix::identity(d, d)).amax();
        worst = worst.max(err);
        assert!(err <= 1e-6, "d={d}: covariance off identity by {err}");
    }
    pass(7, "ZCA whitening correctness", format!("max deviation {worst:.2e} <= 1e-6"));
}

/// Tied spectra break the analytic rule every time and the bounded rules
/// never, over 1000 trials at d=32.
#[test]
fn acceptance_08_explosion_rates() {
    let mut spec = ExperimentSpec::new(Experiment::Explosion);
    spec.dims = vec![32];
    spec.trials = 1000;
    spec.methods = vec![MethodChoice::Analytic, MethodChoice::Taylor, MethodChoice::Clip];
    let rows = run_explosion(&spec).unwrap();
    assert_eq!(rows[0].method, "analytic");
    assert_eq!(rows[0].failure_rate, 1.0, "analytic rate {}", rows[0].failure_rate);
    assert_eq!(rows[1].method, "taylor");
    assert_eq!(rows[1].failure_rate, 0.0, "taylor rate {}", rows[1].failure_rate);
    assert_eq!(rows[2].method, "clip");
    assert_eq!(rows[2].failure_rate, 0.0, "clip rate {}", rows[2].failure_rate);
    pass(
        8,
        "explosion rates",
        format!(
            "analytic {}, taylor {}, clip {} over {} trials",
            rows[0].failure_rate, rows[1].failure_rate, rows[2].failure_rate, spec.trials
        ),
    );
}

/// Near-tie probability exceeds 0.1% at d=150 / threshold 2^-10 and is
/// non-decreasing in the dimension within one-sigma binomial noise.
#[test]
fn acceptance_09_eigengap_point_check() {
    let mut spec = ExperimentSpec::new(Experiment::Eigengap);
    spec.dims = vec![6, 50, 150, 300];
    spec.thresholds = vec![2.0_f64.powi(-10)];
    spec.trials = 10_000;
    let rows = run_eigengap(&spec).unwrap();
    let at_150 = rows.iter().find(|r| r.dim == 150).unwrap();
    assert!(
        at_150.probability > 0.001,
        "p(150) = {} not above 0.001",
        at_150.probability
    );
    for pair in rows.windows(2) {
        let slack = pair[0].ci_halfwidth + pair[1].ci_halfwidth;
        assert!(
            pair[1].probability >= pair[0].probability - slack,
            "p({}) = {} vs p({}) = {}",
            pair[0].dim,
            pair[0].probability,
            pair[1].dim,
            pair[1].probability
        );
    }
    let profile: Vec<String> = rows.iter().map(|r| format!("p({})={}", r.dim, r.probability)).collect();
    pass(9, "eigen-gap point check", profile.join(", "));
}

/// Median Taylor backward time is at or below the deflation route at
/// d in {16, 32, 64}.
#[test]
fn acceptance_10_backward_speed_ordering() {
    let mut spec = ExperimentSpec::new(Experiment::Speed);
    spec.dims = vec![16, 32, 64];
    spec.trials = 1000;
    let rows = run_speed(&spec).unwrap();
    let mut detail = Vec::new();
    for d in [16usize, 32, 64] {
        let taylor = rows
            .iter()
            .find(|r| r.dim == d && r.method == "taylor")
            .unwrap()
            .median_backward_seconds;
        let pi = rows
            .iter()
            .find(|r| r.dim == d && r.method == "pi")
            .unwrap()
            .median_backward_seconds;
        assert!(
            taylor <= pi,
            "d={d}: taylor {taylor:.3e}s slower than deflation {pi:.3e}s"
        );
        detail.push(format!("d={d}: {taylor:.1e}s vs {pi:.1e}s"));
    }
    pass(10, "backward speed ordering", detail.join("; "));
}

/// The Rayleigh estimates of the deflation loop drift more at rank d/2 than
/// at rank 1 (median over 500 trials, d=16, batches with a depleted tail).
#[test]
fn acceptance_11_deflation_roundoff() {
    let d = 16;
    let trials = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut first = Vec::with_capacity(trials);
    let mut mid = Vec::with_capacity(trials);
    for _ in 0..trials {
        let x = normal_data(&mut rng, d, d / 2);
        let m = covariance(&x, 0.01).unwrap();
        let decomp = eig_sym(&m).unwrap();
        let seed = GradSeed::new(DMatrix::zeros(d, d), DVector::zeros(d)).unwrap();
        let pi = backward_pi_deflation(&m, &decomp, &seed, 10, &BreakConfig::disabled()).unwrap();
        let dev =
            |i: usize| ((pi.report.rayleigh[i] - decomp.values()[i]) / decomp.values()[i]).abs();
        first.push(dev(0));
        mid.push(dev(d / 2 - 1));
    }
    first.sort_by(|a, b| a.partial_cmp(b).unwrap());
    mid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (m1, m8) = (first[trials / 2], mid[trials / 2]);
    assert!(
        m8 > m1,
        "median deviation at rank {} ({m8:.3e}) vs rank 1 ({m1:.3e})",
        d / 2
    );
    pass(
        11,
        "deflation round-off accumulation",
        format!("median reldev rank 8 {m8:.2e} > rank 1 {m1:.2e}"),
    );
}

/// A diagonal shift of 0.01 moves every eigenvalue by exactly that and no
/// eigenvector by more than 1e-8, over 100 random 8x8 matrices.
#[test]
fn acceptance_12_epsilon_invariance() {
    let d = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_vec: f64 = 0.0;
    let mut worst_val: f64 = 0.0;
    for _ in 0..100 {
        let x = normal_data(&mut rng, d, 2 * d);
        let m = covariance(&x, 0.0).unwrap();
        let base = eig_sym(&m).unwrap();
        let shifted = eig_sym(&m.shifted(0.01).unwrap()).unwrap();
        for i in 0..d {
            let val_err = (shifted.values()[i] - base.values()[i] - 0.01).abs();
            worst_val = worst_val.max(val_err);
            assert!(val_err <= 1e-9, "eigenvalue {i} shifted by 0.01 +- {val_err}");
            let a: DVector<f64> = base.vectors().column(i).into_owned();
            let b: DVector<f64> = shifted.vectors().column(i).into_owned();
            let vec_err = ((&a - &b).norm()).min((&a + &b).norm());
            worst_vec = worst_vec.max(vec_err);
            assert!(vec_err <= 1e-8, "eigenvector {i} moved by {vec_err}");
        }
    }
    pass(
        12,
        "epsilon-shift invariance",
        format!("max eigenvalue misfit {worst_val:.2e}, max eigenvector drift {worst_vec:.2e}"),
    );
}
