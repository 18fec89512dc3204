//! Saves a model with metadata and loads it back bit-for-bit.

use netload::models::{checkpoint, init_params, ModelKind, ModelSizes};
use serde_json::json;

fn main() -> netload::Result<()> {
    let sizes = ModelSizes {
        features: 9,
        look_back: 24,
        hidden: [16, 16],
        outputs: 1,
    };
    let model = init_params(ModelKind::Lstm, sizes, 5)?;
    let dir = tempfile::tempdir().map_err(|e| netload::Error::io(std::env::temp_dir(), e))?;
    let path = dir.path().join("lstm.ckpt");
    checkpoint::save(&path, &model, json!({ "note": "untrained" }))?;
    let (back, header) = checkpoint::load(&path)?;
    assert_eq!(back, model);
    let bytes = std::fs::metadata(&path).map_err(|e| netload::Error::io(&path, e))?.len();
    println!("{} checkpoint, {bytes} bytes, metadata {}", header.kind, header.metadata);
    for t in &header.tensors {
        println!("  {:<8} {}x{}", t.name, t.rows, t.cols);
    }
    Ok(())
}
