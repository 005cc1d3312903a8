use eigengrad::*;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() {
    let d = 8;
    let n = 16;
    for t in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(t);
        let mut raw = DMatrix::from_fn(d, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        for j in 0..n {
            raw[(1, j)] = raw[(0, j)];
            raw[(3, j)] = raw[(2, j)];
        }
        let x = DataMatrix::new(raw).unwrap();
        let m = covariance(&x, 0.01).unwrap();
        let decomp = eig_sym(&m).unwrap();
        let clamped = decomp.clamped(0.01);
        let v = clamped.values();
        let gap = v[d - 2] - v[d - 1];
        let raw_small: Vec<f64> = (0..3).map(|k| decomp.values()[d - 1 - k] - 0.01).collect();
        println!(
            "trial {t}: clamped tail=({:.17e}, {:.17e}) gap={:.3e} raw-eps={:?}",
            v[d - 2], v[d - 1], gap, raw_small
        );
    }
}
