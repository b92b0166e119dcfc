//! Fixed, learned and fused relation matrices of a trained model on DG-15,
//! written as CSV into a temporary directory.

use d3g::data::{gen_dg15, DomainId};
use d3g::model::{train, MultiHeadModel, TrainConfig};
use d3g::relations::write_relation_matrix;

fn main() -> d3g::Result<()> {
    let ds = gen_dg15(0);
    let cfg = TrainConfig::default();
    let model = train(MultiHeadModel::init(&ds, &cfg)?, &ds, &cfg)?.model;
    let ids: Vec<DomainId> = ds.meta_table().keys().copied().collect();
    let m = model.relations(ds.meta_table(), &ids)?;
    println!("symmetric: {}", m.is_symmetric());
    let dir = std::env::temp_dir().join("d3g-export-example");
    std::fs::create_dir_all(&dir).map_err(|e| d3g::Error::io(&dir, e))?;
    for (name, mat) in [("fixed", m.fixed()), ("learned", m.learned()), ("fused", m.fused())] {
        let path = dir.join(format!("{name}.csv"));
        write_relation_matrix(&path, &ids, mat)?;
        println!("{name:<8} -> {}", path.display());
    }
    println!("fused row of domain 0:");
    for (j, v) in m.fused()[0].iter().enumerate() {
        print!(" {}:{v:.2}", ids[j].0);
    }
    println!();
    Ok(())
}
