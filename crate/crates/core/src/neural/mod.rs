//! Multilayer perceptrons that map a feature vector to a distribution over
//! ballots, with masked losses, backpropagation, Adam and early stopping.

pub mod loss;
pub mod mlp;
pub mod train;

pub use loss::{masked_loss, LossKind};
pub use mlp::{argmax_first, default_size_grid, softmax_in_place, Activation, Dense, Gradients, HiddenLayers, Mlp, NetConfig};
pub use train::{train, Adam, AdamConfig, LogEntry, TrainConfig, Trained, TrainingLog, ValidationSet};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elections::{fixtures, UtilityProfile};
    use crate::information::{FeatureOptions, InfoType};
    use crate::oracle::{make_instance, InstanceMeta, LabelMask, LabeledInstance, Labeling};
    use crate::samplers::{ProbModel, RandomStream};
    use crate::voting::MethodId;
    use crate::Error;

    fn random_batch(stream: &mut RandomStream, count: usize, dim: usize, classes: usize) -> (Vec<f64>, Vec<LabelMask>) {
        let inputs = (0..count * dim).map(|_| 2.0 * stream.uniform() - 1.0).collect();
        let masks = (0..count)
            .map(|_| {
                let mut mask = LabelMask::empty(classes);
                mask.set(stream.below(classes));
                for k in 0..classes {
                    if stream.uniform() < 0.3 {
                        mask.set(k);
                    }
                }
                mask
            })
            .collect();
        (inputs, masks)
    }

    fn max_relative_error(hidden: &[usize], kind: LossKind, seed: u64) -> f64 {
        let (dim, classes) = (7, 6);
        let mut net: Mlp<f64> = Mlp::new(NetConfig::new(dim, hidden, classes, seed)).unwrap();
        let mut stream = RandomStream::new(seed ^ 0xfeed);
        let (inputs, masks) = random_batch(&mut stream, 20, dim, classes);
        let masks: Vec<&LabelMask> = masks.iter().collect();
        let (_, grads) = net.loss_and_gradients(&inputs, &masks, kind).unwrap();
        let analytic = grads.flat();
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for (i, &a) in analytic.iter().enumerate() {
            let original = *net.param_mut(i);
            *net.param_mut(i) = original + eps;
            let up = net.loss(&inputs, &masks, kind).unwrap();
            *net.param_mut(i) = original - eps;
            let down = net.loss(&inputs, &masks, kind).unwrap();
            *net.param_mut(i) = original;
            let numeric = (up - down) / (2.0 * eps);
            let scale = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / scale);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for hidden in [&[8][..], &[8, 8], &[8, 8, 8]] {
            for kind in [LossKind::MaskedMse, LossKind::MaskedBce] {
                let err = max_relative_error(hidden, kind, 11);
                assert!(err < 1e-4, "{hidden:?} {kind}: {err}");
            }
        }
    }

    #[test]
    fn all_bits_mask_gives_zero_gradient() {
        let net: Mlp<f64> = Mlp::new(NetConfig::new(5, &[8, 8], 6, 2)).unwrap();
        let mut stream = RandomStream::new(4);
        let (inputs, _) = random_batch(&mut stream, 10, 5, 6);
        let full = LabelMask::full(6);
        let masks = vec![&full; 10];
        let (loss, grads) = net.loss_and_gradients(&inputs, &masks, LossKind::MaskedMse).unwrap();
        assert!(loss.abs() < 1e-14);
        assert!(grads.flat().iter().all(|g| g.abs() < 1e-14));
    }

    #[test]
    fn duplicated_batch_has_the_same_gradient() {
        let net: Mlp<f64> = Mlp::new(NetConfig::new(5, &[16], 6, 3)).unwrap();
        let mut stream = RandomStream::new(5);
        let (inputs, masks) = random_batch(&mut stream, 8, 5, 6);
        let single: Vec<&LabelMask> = masks.iter().collect();
        let doubled_inputs: Vec<f64> = inputs.iter().chain(&inputs).copied().collect();
        let doubled: Vec<&LabelMask> = single.iter().chain(&single).copied().collect();
        let (l1, g1) = net.loss_and_gradients(&inputs, &single, LossKind::MaskedMse).unwrap();
        let (l2, g2) = net.loss_and_gradients(&doubled_inputs, &doubled, LossKind::MaskedMse).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.flat().iter().zip(g2.flat()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn shapes_and_initialization() {
        let config = NetConfig::new(12, &[128], 6, 9);
        assert_eq!(config.param_count(), 2438);
        let a: Mlp<f64> = Mlp::new(config.clone()).unwrap();
        let b: Mlp<f64> = Mlp::new(config.clone()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.flat_params().len(), 2438);
        let bound = 1.0 / 12f64.sqrt();
        assert!(a.layers()[0].weights.iter().all(|w| w.abs() <= bound));
        assert_ne!(a, Mlp::new(NetConfig { init_seed: 10, ..config }).unwrap());
        assert!(Mlp::<f64>::new(NetConfig::new(3, &[4, 4, 4, 4], 6, 0)).is_err());
        assert!(Mlp::<f64>::new(NetConfig::new(3, &[0], 6, 0)).is_err());
    }

    #[test]
    fn forward_contract() {
        let zero: Mlp<f64> = Mlp::zeros(NetConfig::new(4, &[8], 6, 0)).unwrap();
        let dist = zero.forward(&[0.3, -1.0, 2.0, 0.5]).unwrap();
        assert!(dist.iter().all(|p| (p - 1.0 / 6.0).abs() < 1e-15));
        assert_eq!(zero.forward(&[1.0, 2.0]), Err(Error::DimensionMismatch { expected: 4, found: 2 }));

        let mut net: Mlp<f32> = Mlp::new(NetConfig::new(4, &[8, 8], 6, 1)).unwrap();
        let x = [0.3, -1.0, 2.0, 0.5];
        let before = net.forward(&x).unwrap();
        assert!((before.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        assert!(before.iter().all(|&p| p > 0.0));
        let last = net.layers().len() - 1;
        let bias_start = net.flat_params().len() - 6;
        for k in 0..6 {
            *net.param_mut(bias_start + k) += 3.5;
        }
        assert_eq!(net.layers()[last].bias.len(), 6);
        let after = net.forward(&x).unwrap();
        for (p, q) in before.iter().zip(&after) {
            assert!((p - q).abs() < 1e-6);
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax_first(&[0.1, 0.7, 0.2, 0.0, 0.0, 0.0]), 1);
        assert_eq!(argmax_first(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax_first(&[0.5f32, 0.5]), 0);
    }

    #[test]
    fn size_grid_and_hidden_strings() {
        let grid = default_size_grid();
        assert_eq!(grid.len(), 26);
        assert_eq!(grid[0], HiddenLayers(vec![4]));
        assert_eq!(grid[9], HiddenLayers(vec![2048]));
        assert_eq!(grid[25], HiddenLayers(vec![512, 512, 512]));
        assert_eq!("128x128".parse::<HiddenLayers>().unwrap(), HiddenLayers(vec![128, 128]));
        assert_eq!(HiddenLayers(vec![64, 32]).to_string(), "64x32");
        assert!("12x?".parse::<HiddenLayers>().is_err());
    }

    fn tie4_instances(count: usize) -> Vec<LabeledInstance<f64>> {
        let u = fixtures::tie4_utilities();
        let inst = make_instance(MethodId::Borda, &u, 0, InfoType::MajorityMatrix, Labeling::Optimizing, FeatureOptions::default()).unwrap();
        vec![inst; count]
    }

    fn flat_validation() -> ValidationSet<f64> {
        let elections = vec![fixtures::unanimous_utilities(5); 8];
        ValidationSet::build(MethodId::Borda, InfoType::MajorityMatrix, FeatureOptions::default(), &elections).unwrap()
    }

    #[test]
    fn flat_validation_curve_stops_at_first_permitted_step() {
        let data = tie4_instances(16);
        let net = Mlp::new(NetConfig::new(12, &[8], 6, 0)).unwrap();
        let config = TrainConfig { batch_size: 4, ..TrainConfig::default() };
        let out = train(net, &data, &flat_validation(), &config, &mut RandomStream::new(1)).unwrap();
        assert_eq!(out.log.iterations, 220);
        let iterations: Vec<usize> = out.log.entries.iter().map(|e| e.iteration).collect();
        assert_eq!(iterations, (1..=11).map(|k| 20 * k).collect::<Vec<_>>());
        assert!(out.log.entries.iter().all(|e| e.validation_profitability == 0.0));

        let longer = TrainConfig { min_iterations: 300, ..config };
        let net = Mlp::new(NetConfig::new(12, &[8], 6, 0)).unwrap();
        let out = train(net, &data, &flat_validation(), &longer, &mut RandomStream::new(1)).unwrap();
        assert_eq!(out.log.iterations, 300);
    }

    #[test]
    fn overfits_a_repeated_instance() {
        let data = tie4_instances(32);
        let target = data[0].labels.ones().collect::<Vec<_>>();
        assert_eq!(target, vec![1]);
        let net = Mlp::new(NetConfig::new(12, &[16], 6, 3)).unwrap();
        let config = TrainConfig { batch_size: 8, ..TrainConfig::default() };
        let out = train(net, &data, &flat_validation(), &config, &mut RandomStream::new(2)).unwrap();
        assert_eq!(out.net.argmax(&data[0].features).unwrap(), 1);
    }

    #[test]
    fn single_batch_loss_drops_tenfold() {
        let mut stream = RandomStream::new(8);
        let sampler = ProbModel::Uniform.sampler(11, 3).unwrap();
        let data: Vec<LabeledInstance<f64>> = (0..64)
            .map(|_| {
                let u: UtilityProfile<f64> = sampler.sample(&mut stream);
                make_instance(MethodId::Borda, &u, 0, InfoType::MarginMatrix, Labeling::Optimizing, FeatureOptions::default()).unwrap()
            })
            .collect();
        let inputs: Vec<f64> = data.iter().flat_map(|d| d.features.iter().copied()).collect();
        let masks: Vec<&LabelMask> = data.iter().map(|d| &d.labels).collect();
        let mut net = Mlp::new(NetConfig::new(12, &[128, 128], 6, 1)).unwrap();
        let mut adam = Adam::new(net.param_count(), 6e-3, AdamConfig::default());
        let initial = net.loss(&inputs, &masks, LossKind::MaskedMse).unwrap();
        for _ in 0..500 {
            let (_, grads) = net.loss_and_gradients(&inputs, &masks, LossKind::MaskedMse).unwrap();
            adam.step(&mut net, &grads);
        }
        let last = net.loss(&inputs, &masks, LossKind::MaskedMse).unwrap();
        assert!(last * 10.0 < initial, "{initial} -> {last}");
    }

    #[test]
    fn training_is_deterministic() {
        let mut stream = RandomStream::new(21);
        let sampler = ProbModel::Uniform.sampler(5, 3).unwrap();
        let elections: Vec<UtilityProfile<f64>> = (0..300).map(|_| sampler.sample(&mut stream)).collect();
        let (train_set, val) = elections.split_at(200);
        let data: Vec<_> = train_set
            .iter()
            .map(|u| make_instance(MethodId::Plurality, u, 0, InfoType::PluralityScores, Labeling::Satisficing, FeatureOptions::default()).unwrap())
            .collect();
        let validation = ValidationSet::build(MethodId::Plurality, InfoType::PluralityScores, FeatureOptions::default(), val).unwrap();
        let config = TrainConfig { batch_size: 32, min_iterations: 40, patience: 2, ..TrainConfig::default() };
        let run = || {
            let net = Mlp::<f64>::new(NetConfig::new(6, &[16, 16], 6, 5)).unwrap();
            train(net, &data, &validation, &config, &mut RandomStream::new(77)).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.net, b.net);
        assert_eq!(a.log, b.log);
        assert!(a.log.entries.windows(2).all(|w| w[0].iteration < w[1].iteration));
    }

    #[test]
    fn training_rejects_bad_input() {
        let net = Mlp::<f64>::new(NetConfig::new(12, &[8], 6, 0)).unwrap();
        let validation = flat_validation();
        let config = TrainConfig::default();
        assert!(train(net.clone(), &[], &validation, &config, &mut RandomStream::new(0)).is_err());
        let bad = LabeledInstance {
            features: vec![0.0; 5],
            labels: LabelMask::full(6),
            meta: InstanceMeta { method: MethodId::Borda, info: InfoType::MajorityMatrix, n: 4, m: 3 },
        };
        assert!(train(net.clone(), &[bad], &validation, &config, &mut RandomStream::new(0)).is_err());
        let zero_batch = TrainConfig { batch_size: 0, ..config };
        assert!(train(net, &tie4_instances(2), &validation, &zero_batch, &mut RandomStream::new(0)).is_err());
    }
}
