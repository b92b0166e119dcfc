//! Monte Carlo estimate of the squared gap between the averaged predictor and
//! a single domain's head, compared with its closed form 1/12.

use d3g::theory::{averaging_oracle, AVERAGING_TARGET};

fn main() {
    for n in [10_000, 100_000, 1_000_000] {
        let e = averaging_oracle(n, 0);
        let z = (e.mean - AVERAGING_TARGET) / e.stderr;
        println!("n={n:>8} estimate {:.6} +- {:.6} target {:.6} z {:+.2}", e.mean, e.stderr, AVERAGING_TARGET, z);
    }
}
