//! Builds a Mahalanobis class-conditional transition matrix for three
//! Gaussian blobs, two close together and one far away.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use robust_trees::noise::{corrupt, mahalanobis_matrix};
use robust_trees::FeatureMatrix;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let centers = [(0.0, 0.0), (2.5, 0.0), (20.0, 5.0)];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (class, &(cx, cy)) in centers.iter().enumerate() {
        for _ in 0..300 {
            rows.push([cx + normal.sample(&mut rng), cy + normal.sample(&mut rng)]);
            labels.push(class);
        }
    }
    let x = FeatureMatrix::from_rows(&rows).unwrap();
    let m = mahalanobis_matrix(&x, &labels, 3, None).unwrap();
    print!("transition matrix (row = clean class):\n{}", m.to_csv());
    println!("diagonal: {:?}", m.diagonal());

    let noisy = corrupt(&labels, &m, 9).unwrap();
    let mut confusion = [[0usize; 3]; 3];
    for (&y, &z) in labels.iter().zip(&noisy) {
        confusion[y][z] += 1;
    }
    println!("observed confusion counts: {confusion:?}");
}
