//! Finite-difference check of the full training objective, including the
//! consistency loss gradient through the relation network.

use d3g::data::{gen_dg15_with, Dg15Config, Example, Split};
use d3g::model::{MultiHeadModel, TrainConfig};
use d3g::numerics::{assign, flatten, grad_check};

fn main() -> d3g::Result<()> {
    let ds = gen_dg15_with(0, &Dg15Config { per_class: 2, ..Dg15Config::default() })?;
    let cfg = TrainConfig {
        hidden_width: 6,
        relation_width: 5,
        beta: 0.4,
        ..TrainConfig::default()
    };
    let model = MultiHeadModel::init(&ds, &cfg)?;
    let batch: Vec<&Example> = ds.examples_in(Split::Train).step_by(2).collect();
    for lambda in [0.0, 0.5, 1.0] {
        let (_, grads) = model.objective(&batch, ds.meta_table(), lambda)?;
        let report = grad_check(
            |p| {
                let mut probe = model.clone();
                assign(&mut probe, p);
                probe.objective(&batch, ds.meta_table(), lambda).map_or(f64::NAN, |o| o.0.total)
            },
            &flatten(&model),
            &flatten(&grads),
        );
        println!("lambda {lambda}: {report:?} passes(1e-5) = {}", report.passes(1e-5));
    }
    Ok(())
}
