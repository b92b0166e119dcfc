//! Building a dataset in code, saving it in the on-disk layout, loading it
//! back and training on it.

use std::collections::BTreeMap;

use d3g::cli::{load_dir, run_seed, Method, TaskArg};
use d3g::data::{write_dataset, DomainDataset, DomainId, Example, Split, TaskKind};
use d3g::model::TrainConfig;
use d3g::numerics::{stream, Purpose};
use rand::Rng;

fn main() -> d3g::Result<()> {
    // Eight domains on a line; the regression slope drifts with the meta value.
    let mut rng = stream(0, Purpose::Data, 0);
    let mut examples = Vec::new();
    let mut meta = BTreeMap::new();
    let mut splits = BTreeMap::new();
    for d in 0..8u32 {
        let m = d as f64 / 7.0;
        meta.insert(DomainId(d), vec![m]);
        let split = match d {
            3 => Split::Valid,
            5 => Split::Test,
            _ => Split::Train,
        };
        splits.insert(DomainId(d), split);
        for _ in 0..60 {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y = (1.0 + 2.0 * m) * x + rng.random_range(-0.05..0.05);
            examples.push(Example { domain: DomainId(d), x: vec![x], y });
        }
    }
    let ds = DomainDataset::new(TaskKind::Regression, examples, meta, splits)?;
    let dir = std::env::temp_dir().join("d3g-custom-dataset");
    write_dataset(&ds, &dir)?;
    let loaded = load_dir(&dir, TaskArg::Regression)?;
    assert_eq!(loaded.examples().len(), ds.examples().len());

    let cfg = TrainConfig {
        lr: 1e-2,
        ..TrainConfig::default()
    };
    for method in [Method::D3g, Method::Erm] {
        let (run, _) = run_seed(&loaded, method, &cfg)?;
        println!("{:<4} test mse {:.5}", method.as_str(), run.test.expect("test domain").mean);
    }
    Ok(())
}
