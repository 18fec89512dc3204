//! Backpropagation against central finite differences for both
//! architectures, with and without dropout.

use netload::models::{gradient_check, init_params, DropoutSpec, ModelKind, ModelSizes};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> netload::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in [ModelKind::Fcnn, ModelKind::Lstm] {
        for dropout in [None, Some(DropoutSpec::new(0.2, 9)?)] {
            let sizes = ModelSizes {
                features: 3,
                look_back: 4,
                hidden: [4, 3],
                outputs: 1,
            };
            let mut model = init_params(kind, sizes, 11)?;
            for b in model.params_mut().into_iter().filter(|p| p.rows() == 1) {
                b.data_mut().iter_mut().for_each(|v| *v += rng.gen_range(0.05..0.3));
            }
            let data: Vec<Vec<f64>> = (0..2).map(|_| (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let windows: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
            let check = gradient_check(&model, &windows, &[0.3, -0.2], dropout.as_ref(), 1e-5)?;
            println!(
                "{kind} dropout {:<5} {} entries, max relative error {:.2e} in {}",
                dropout.is_some(),
                check.entries,
                check.max_rel_error,
                check.worst_param
            );
        }
    }
    Ok(())
}
