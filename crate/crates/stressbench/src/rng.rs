//! Counter-based per-trial random streams.

use eigengrad::DataMatrix;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream for one (cell, trial) pair of an experiment grid. The stream id is
/// derived by a counter split from the master seed, so trial t sees the same
/// stream no matter how work is scheduled across threads.
pub fn trial_rng(seed: u64, cell: u32, trial: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((cell as u64) << 32) | trial as u64);
    rng
}

pub fn standard_normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn standard_normal_data(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DataMatrix {
    DataMatrix::new(standard_normal(rng, rows, cols)).expect("normal draws are finite")
}

/// Entries uniform on [0, 1): pixel-scale data. Random covariance matrices of
/// such data reproduce the reported near-tie probabilities; unit-variance
/// draws spread the spectrum ~12x wider and almost never produce gaps below
/// 2^-10.
pub fn uniform_unit_data(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DataMatrix {
    DataMatrix::new(DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>()))
        .expect("uniform draws are finite")
}

/// Random batch whose centered covariance has two exactly repeated
/// eigenvalue pairs in the bulk of the spectrum.
///
/// Built as X = Q·S·W: W holds orthonormal zero-mean rows (QR of centered
/// Gaussian columns), S scales two row pairs identically, Q is a random
/// rotation. The covariance is then Q·S²·Qᵀ with eigenvalues s², tied by
/// construction — and, unlike duplicated feature rows, the tied directions
/// carry data, so upstream gradients couple to them. Needs `rows >= 4`.
pub fn tied_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DataMatrix {
    assert!(rows >= 4, "tied batches need at least 4 feature rows");
    assert!(cols > rows, "tied batches need more samples than features");
    let mut columns = standard_normal(rng, cols, rows);
    for c in 0..rows {
        let mean: f64 = (0..cols).map(|r| columns[(r, c)]).sum::<f64>() / cols as f64;
        for r in 0..cols {
            columns[(r, c)] -= mean;
        }
    }
    let w = columns.qr().q().transpose();

    let mut scales: Vec<f64> = (0..rows).map(|i| (rows - i) as f64).collect();
    scales[1] = scales[0];
    scales[3] = scales[2];

    let mut scaled = w;
    for i in 0..rows {
        let s = scales[i].sqrt();
        for j in 0..cols {
            scaled[(i, j)] *= s;
        }
    }
    let rotation = standard_normal(rng, rows, rows).qr().q();
    DataMatrix::new(rotation * scaled).expect("rotated draws are finite")
}
