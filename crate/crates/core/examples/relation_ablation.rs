//! Relation ablation on DG-15: no relations, fixed only, learned only, and
//! the fused combination.

use d3g::cli::{ablation, select_lr, Method, LR_GRID};
use d3g::data::gen_dg15;
use d3g::model::TrainConfig;

fn main() -> d3g::Result<()> {
    let ds = gen_dg15(0);
    let seeds = [0, 1, 2];
    let lr = select_lr(&ds, Method::D3g, &TrainConfig::default(), &seeds, &LR_GRID)?.lr;
    println!("lr {lr:e}");
    let rows = ablation(&ds, &TrainConfig { lr, ..TrainConfig::default() }, &seeds)?;
    println!("{:<14} {:>5} {:>8} {:>8}", "variant", "beta", "mean", "std");
    for r in rows.iter().filter(|r| r.group == "relations") {
        println!("{:<14} {:>5.2} {:>8.4} {:>8.4}", r.variant, r.beta, r.test.mean, r.test.std);
    }
    Ok(())
}
