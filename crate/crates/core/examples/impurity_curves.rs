//! Prints binary impurity curves for every criterion and checks a few points
//! against the brute-force risk minimizer.

use robust_trees::impurity::{impurity, ClassHistogram, Criterion};
use robust_trees::oracle::{brute_force_impurity, GridSpec, OracleLoss};

fn main() {
    let criteria = [
        Criterion::Gini,
        Criterion::Entropy,
        Criterion::Misclassification,
        Criterion::Mae,
        Criterion::Gce { q: 0.5 },
        Criterion::Ne { lambda: 1.0 },
        Criterion::Ne { lambda: 0.25 },
        Criterion::Ne { lambda: 0.0 },
    ];
    let n = 20u64;

    print!("{:>5}", "p1");
    for c in &criteria {
        print!(" {:>16}", c.to_string());
    }
    println!();
    for k in 0..=n {
        let hist = ClassHistogram::new(vec![n - k, k]).unwrap();
        print!("{:>5.2}", k as f64 / n as f64);
        for c in &criteria {
            print!(" {:>16.6}", impurity(c, &hist, n).unwrap().value);
        }
        println!();
    }

    println!("\nclosed form vs brute force on (7, 3):");
    let hist = ClassHistogram::new(vec![7, 3]).unwrap();
    for c in &criteria {
        let Some(loss) = OracleLoss::for_criterion(c) else { continue };
        let closed = impurity(c, &hist, 10).unwrap().value;
        let brute = brute_force_impurity(loss, &hist, 10, &GridSpec::default()).unwrap().value;
        println!("  {:<20} {closed:.8} {brute:.8}", c.to_string());
    }
}
