//! The command layer end to end: generate a dataset file, train from it,
//! then re-score the saved checkpoints from their manifest.

use netload::cli::{cmd_evaluate, cmd_generate, cmd_train, manifest_file, DATASET_FILE};
use netload::config::RunConfig;

fn main() -> netload::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| netload::Error::io(std::env::temp_dir(), e))?;
    let out = dir.path().display().to_string();
    let cfg = RunConfig::default().apply_text(&format!(
        "paths.out = {out}\nsynth.n_years = 1\ntrain.epochs = 5\nrun.model = lstm\n"
    ))?;
    cmd_generate(&cfg)?;

    let cfg = cfg.apply_pairs(&[("paths.data".into(), format!("{out}/{DATASET_FILE}"))])?;
    let (trained, files) = cmd_train(&cfg)?;
    for f in &files {
        println!("wrote {}", f.file_name().unwrap().to_string_lossy());
    }
    let manifest = cfg.paths.out.join(manifest_file(&cfg.method_spec()));
    let (evaluated, _) = cmd_evaluate(&cfg, &manifest)?;
    println!("trained:   MAPE {:.4}%  R2 {:.5}", trained.metrics.mape, trained.metrics.r2);
    println!("evaluated: MAPE {:.4}%  R2 {:.5}", evaluated.metrics.mape, evaluated.metrics.r2);
    assert_eq!(trained.trace, evaluated.trace);
    Ok(())
}
