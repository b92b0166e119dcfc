//! Excess risk of the threshold estimator as the number of training domains
//! grows, against the uniform average of all heads.

use d3g::theory::{scaling_experiment, select_c0, uniform_scaling, ScalingConfig};

fn main() -> d3g::Result<()> {
    let base = ScalingConfig::default();
    let c0 = select_c0(&base, &[0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0], &[1000])?;
    let cfg = ScalingConfig { c0, ..base };
    println!("c0 = {c0}");
    let threshold = scaling_experiment(&cfg)?;
    let uniform = uniform_scaling(&cfg)?;
    println!("{:>5} {:>8} {:>12} {:>10} {:>12}", "N_tr", "B", "threshold", "stderr", "uniform");
    for (t, u) in threshold.iter().zip(&uniform) {
        println!(
            "{:>5} {:>8.4} {:>12.6} {:>10.6} {:>12.6}",
            t.n_tr, t.bandwidth, t.mean_excess_risk, t.stderr, u.mean_excess_risk
        );
    }
    Ok(())
}
