//! Relation-reweighted fine-tuning of an ERM model, one copy per test domain,
//! compared with the plain ERM model and D3G.

use d3g::cli::{run_seed, Method};
use d3g::data::gen_dg15;
use d3g::model::TrainConfig;

fn main() -> d3g::Result<()> {
    let ds = gen_dg15(0);
    let cfg = TrainConfig::default();
    for method in [Method::Erm, Method::Rwft, Method::D3g] {
        let (run, _) = run_seed(&ds, method, &cfg)?;
        let test = run.test.expect("test split present");
        println!("{:<5} mean {:.4} worst {:.4}", method.as_str(), test.mean, test.worst);
        for d in &test.per_domain {
            print!(" {}:{:.2}", d.domain.0, d.value);
        }
        println!();
    }
    Ok(())
}
