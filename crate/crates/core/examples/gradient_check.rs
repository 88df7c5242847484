//! Compares backpropagated gradients of both models with central finite
//! differences on a handful of random inputs.

use osaas_core::dataset::FeatureTensor;
use osaas_core::nn::{Classifier, CnnArch, CnnModel, MlpModel, Tensor2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn worst_error<M: Classifier>(model: &mut M, inputs: &[&M::Input], labels: &[usize]) -> anyhow::Result<f64> {
    let h = 1e-5;
    let (_, analytic) = model.loss_and_gradients(inputs, labels)?;
    let mut worst: f64 = 0.0;
    for (g, group) in analytic.iter().enumerate() {
        for (i, a) in group.iter().enumerate() {
            let orig = model.params()[g][i];
            model.params_mut()[g][i] = orig + h;
            let plus = model.loss_and_gradients(inputs, labels)?.0;
            model.params_mut()[g][i] = orig - h;
            let minus = model.loss_and_gradients(inputs, labels)?.0;
            model.params_mut()[g][i] = orig;
            let fd = (plus - minus) / (2.0 * h);
            worst = worst.max((a - fd).abs() / (fd.abs() + 1e-8));
        }
    }
    Ok(worst)
}

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let arch = CnnArch { hidden: 10, ..CnnArch::default() };
    let mut cnn = CnnModel::new(arch, 2)?;
    let mut tensor = |r: usize, c: usize| Tensor2::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let xs = (0..4)
        .map(|label| {
            Ok(FeatureTensor {
                wavelength: tensor(arch.wavelength_len, arch.wavelength_channels)?,
                component: tensor(arch.component_len, arch.component_channels)?,
                label,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let refs: Vec<&FeatureTensor> = xs.iter().collect();
    println!(
        "CNN ({} params): worst relative error {:.2e}",
        cnn.parameter_count(),
        worst_error(&mut cnn, &refs, &[0, 1, 2, 3])?
    );

    let mut mlp = MlpModel::new(12, &[8, 8, 8, 8], 4, 3);
    let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let refs: Vec<&Vec<f64>> = xs.iter().collect();
    println!(
        "MLP ({} params): worst relative error {:.2e}",
        mlp.parameter_count(),
        worst_error(&mut mlp, &refs, &[3, 2, 1, 0])?
    );
    Ok(())
}
