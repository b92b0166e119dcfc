//! Effect of the consistency loss with fixed relations: trains with lambda 0
//! and 0.5 and prints the loss trajectories and test accuracy.

use d3g::cli::run_seed;
use d3g::cli::Method;
use d3g::data::gen_dg15;
use d3g::model::TrainConfig;

fn main() -> d3g::Result<()> {
    let ds = gen_dg15(0);
    for lambda in [0.0, 0.5] {
        let cfg = TrainConfig {
            beta: 1.0,
            lambda,
            ..TrainConfig::default()
        };
        let (run, _) = run_seed(&ds, Method::D3g, &cfg)?;
        println!("lambda {lambda}: test accuracy {:.4}", run.test.as_ref().map_or(f64::NAN, |m| m.mean));
        for h in run.history.iter().step_by(5) {
            println!("  epoch {:>2} pred {:.4} rel {:.4} total {:.4}", h.epoch, h.loss_pred, h.loss_rel, h.loss_total);
        }
    }
    Ok(())
}
