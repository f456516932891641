//! Compares the Hoeffding lower bound on majority preservation with a Monte
//! Carlo estimate under uniform noise.

use robust_trees::noise::{hoeffding_bound, majority_preservation_mc};

fn main() {
    let p = [0.5, 0.3, 0.2];
    println!("{:>5} {:>6} {:>10} {:>10}", "eta", "n", "bound", "simulated");
    for eta in [0.1, 0.3, 0.5] {
        for n in [10u64, 50, 200, 1000] {
            let bound = hoeffding_bound(&p, eta, n).unwrap();
            let mc = majority_preservation_mc(&p, eta, n, 10_000, n ^ 0x5eed).unwrap();
            println!("{eta:>5} {n:>6} {bound:>10.4} {:>10.4}", mc.frequency);
        }
    }
}
