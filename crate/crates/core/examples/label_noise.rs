//! Applies uniform and binary class-conditional noise and reports flip rates.

use robust_trees::noise::{binary_cc_matrix, corrupt, uniform_matrix};

fn main() {
    let labels: Vec<usize> = (0..30_000).map(|i| i % 3).collect();
    for eta in [0.1, 0.3, 0.5] {
        let m = uniform_matrix(3, eta).unwrap();
        let noisy = corrupt(&labels, &m, 42).unwrap();
        let flipped = labels.iter().zip(&noisy).filter(|(a, b)| a != b).count();
        println!("uniform eta={eta}: flipped {:.4} of labels", flipped as f64 / labels.len() as f64);
    }

    let binary: Vec<usize> = (0..20_000).map(|i| i % 2).collect();
    let m = binary_cc_matrix(0.1, 0.35).unwrap();
    print!("\nbinary class-conditional matrix:\n{}", m.to_csv());
    let noisy = corrupt(&binary, &m, 5).unwrap();
    for class in 0..2 {
        let (total, flipped) = binary
            .iter()
            .zip(&noisy)
            .filter(|(y, _)| **y == class)
            .fold((0, 0), |(t, f), (y, z)| (t + 1, f + usize::from(y != z)));
        println!("class {class}: flip rate {:.4}", flipped as f64 / total as f64);
    }
}
