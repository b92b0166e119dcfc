//! D3G versus ERM on DG-15 over three seeds, each with its learning rate
//! chosen on the validation domains.
//!
//! `cargo run --release --example dg15_headline`

use d3g::cli::{run_seeds, select_lr, summarize_runs, Method, LR_GRID};
use d3g::data::gen_dg15;
use d3g::model::TrainConfig;

fn main() -> d3g::Result<()> {
    let ds = gen_dg15(0);
    let seeds = [0, 1, 2];
    for method in [Method::D3g, Method::Erm] {
        let sel = select_lr(&ds, method, &TrainConfig::default(), &seeds, &LR_GRID)?;
        println!("{} lr {:e} (valid by lr: {:?})", method.as_str(), sel.lr, sel.candidates);
        let cfg = TrainConfig { lr: sel.lr, ..TrainConfig::default() };
        let runs: Vec<_> = run_seeds(&ds, method, &cfg, &seeds)?.into_iter().map(|(r, _)| r).collect();
        for r in &runs {
            let test = r.test.as_ref().expect("DG-15 has test domains");
            println!("{:<4} seed {} test {:.4} worst {:.4}", r.method, r.seed, test.mean, test.worst);
        }
        for a in summarize_runs(&runs) {
            println!("  {:<18} {:.4} +- {:.4}", a.label, a.mean, a.std);
        }
    }
    Ok(())
}
