//! Parses a run config, applies command-line style overrides and prints the
//! resolved file that commands write next to their outputs.

use netload::config::RunConfig;

const TEXT: &str = "\
# LSTM indirect, two-hour horizon
seed = 7
run.model = lstm
run.method = indirect
window.look_ahead = 2
train.epochs = 30
synth.n_years = 2
";

fn main() -> netload::Result<()> {
    let cfg = RunConfig::default()
        .apply_text(TEXT)?
        .apply_pairs(&[("model.lstm_hidden".into(), "32, 32".into())])?;
    let spec = cfg.method_spec();
    println!("{} hidden {:?}, seeds {}..={}", spec.label(), spec.hidden, spec.submodel_seed(0), spec.submodel_seed(2));
    for target in spec.targets() {
        let names: Vec<&str> = spec.features(target).iter().map(|s| s.name()).collect();
        println!("  {target}: {}", names.join(", "));
    }
    print!("{}", cfg.to_text());
    Ok(())
}
