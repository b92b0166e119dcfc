//! Regression on a grid of spatial domains with adjacency relations.

use d3g::cli::{run_seed, Method};
use d3g::data::{gen_spatial_regression, GridConfig};
use d3g::model::{FixedKind, TrainConfig};

fn main() -> d3g::Result<()> {
    let (ds, _) = gen_spatial_regression(0, &GridConfig::default())?;
    println!(
        "{} domains, {} examples, {} adjacency edges",
        ds.meta_table().len(),
        ds.examples().len(),
        ds.adjacency().map_or(0, |a| a.edges().len())
    );
    let cfg = TrainConfig {
        lr: 1e-3,
        fixed: FixedKind::Adjacency,
        ..TrainConfig::default()
    };
    for method in [Method::D3g, Method::Erm] {
        let (run, _) = run_seed(&ds, method, &cfg)?;
        let test = run.test.expect("test split present");
        println!("{:<4} test mse {:.4} worst {:.4}", method.as_str(), test.mean, test.worst);
    }
    Ok(())
}
