//! Fixtures shared by the benchmarks.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relocnet::pose::{PoseVector, Quaternion};

/// Uniform `[0, 1)` image of shape `(h, w, c)`.
pub fn random_image(h: usize, w: usize, c: usize, seed: u64) -> Array3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array3::from_shape_simple_fn((h, w, c), || rng.random::<f64>())
}

/// A pose target with a unit quaternion.
pub fn target_pose(seed: u64) -> PoseVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = [0.0; 7];
    for x in &mut v {
        *x = rng.random_range(-1.0..1.0);
    }
    let n = v[3..].iter().map(|x| x * x).sum::<f64>().sqrt();
    PoseVector::from_parts([v[0], v[1], v[2]], Quaternion::new(v[3] / n, v[4] / n, v[5] / n, v[6] / n))
}
