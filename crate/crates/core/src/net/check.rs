use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Model, NetworkConfig};
use crate::nn::gradcheck::{
    check_group_with, random_tensor, sample_indices, Fault, GradReport, STEP,
};
use crate::nn::Exec;
use crate::Result;

/// End-to-end finite-difference check of [`Model::backward`] in 64-bit
/// precision. The loss is `sum(r * predictions)` for a fixed random `r`;
/// dropout masks are replayed from the same seed on every evaluation.
///
/// The step is [`STEP`] scaled by the RMS of the group's values (clamped to
/// `[0.05, 1]`), so unit-scale tensors use `1e-5` and small weights are not
/// pushed across PReLU kinks or max-pool switches.
///
/// Convolution biases that feed batch norm directly have an exact zero
/// gradient, which leaves only finite-difference noise to compare. Each
/// group's error scale is therefore floored at `1e-4` times the largest
/// analytic gradient anywhere in the network.
pub fn check_network(
    config: &NetworkConfig,
    seed: u64,
    batch: usize,
    per_group: usize,
    fault: Fault,
) -> Result<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::<f64>::build(config.clone(), seed)?;
    model.exec = Exec::Serial;
    perturb_affine(&mut model, &mut rng);
    let x = random_tensor(&[batch, 1, config.input_length], &mut rng);
    let r = random_tensor(&[batch], &mut rng).into_data();
    let mask_seed = seed ^ 0x5eed;

    let (_, cache) = model.forward_train(&x, &mut ChaCha8Rng::seed_from_u64(mask_seed))?;
    let grads = model.backward(&cache, &r)?;
    let names = model.trainable_groups();
    let network_scale = grads
        .groups
        .iter()
        .flat_map(|g| g.data())
        .fold(0.0f64, |a, b| a.max(b.abs()));
    let floor = (1e-4 * network_scale).max(1e-6);

    let mut report = GradReport::default();
    for (g, (name, _, len)) in names.iter().enumerate() {
        let analytic = grads.groups[g].data().to_vec();
        let indices = sample_indices(*len, per_group, &mut rng);
        let values = model.trainable_groups_mut()[g].1.data().to_vec();
        let rms = (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt();
        let step = STEP * rms.clamp(0.05, 1.0);
        let check = check_group_with(
            name.clone(),
            &analytic,
            &indices,
            fault,
            step,
            floor,
            |i, d| {
                let original = model.trainable_groups_mut()[g].1.data()[i];
                model.trainable_groups_mut()[g].1.data_mut()[i] = original + d;
                let (pred, _) = model
                    .forward_train(&x, &mut ChaCha8Rng::seed_from_u64(mask_seed))
                    .expect("forward on a validated model");
                model.trainable_groups_mut()[g].1.data_mut()[i] = original;
                pred.iter().zip(&r).map(|(p, r)| p * r).sum()
            },
        );
        report.push(check);
    }
    Ok(report)
}

// Fresh models have gamma = 1, beta = 0 and equal slopes everywhere, which
// would leave some gradient paths untested by symmetry.
fn perturb_affine(model: &mut Model<f64>, rng: &mut ChaCha8Rng) {
    use super::GroupKind;
    use rand::Rng;
    for (kind, t) in model.trainable_groups_mut() {
        let jitter = match kind {
            GroupKind::BnScale | GroupKind::BnShift | GroupKind::Slope | GroupKind::Bias => 0.2,
            _ => continue,
        };
        for v in t.data_mut() {
            *v += rng.gen_range(-jitter..jitter);
        }
    }
}
