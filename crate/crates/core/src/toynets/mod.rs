//! Tiny convolutional classifiers and segmenters with hand-derived backprop.
//!
//! Both network kinds share the same trunk (3x3 same-padded convolutions with
//! ReLU), so trunk parameters transplant between them. Arithmetic is `f64`
//! throughout; checkpoints store `f32`.

mod arch;
mod checkpoint;
mod gradcheck;
mod nets;

pub use arch::{NetArch, NetKind, ParamLayout, Segment, TrunkArch, MAX_CONV_LAYERS, MAX_WIDTH};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use gradcheck::{
    check_params_with, finite_diff_check, finite_diff_check_input, probe_upstream, relative_error, GradCheckReport,
};
pub use nets::{
    backward_params, grad_input, transplant_backbone, ClassifierNet, ForwardCache, GradRequest, Gradients, Net,
    Network, SegmenterNet, TransplantMode,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagery::Image;
    use crate::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, c: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::new(w, h, c, (0..w * h * c).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    /// Straightforward re-implementation of the forward pass from the layer
    /// equations, on nested arrays indexed `[y][x][c]`.
    fn oracle_forward(net: &Net, image: &Image) -> Vec<f64> {
        let (h, w) = (image.height(), image.width());
        let p = |name: &str| &net.params()[net.layout().get(name).unwrap().range()];
        let mut act: Vec<Vec<Vec<f64>>> = (0..h)
            .map(|y| (0..w).map(|x| image.pixel(x, y).to_vec()).collect())
            .collect();
        for (l, &cout) in net.arch().trunk.widths.iter().enumerate() {
            let cin = act[0][0].len();
            let weight = p(&format!("conv{l}.weight"));
            let bias = p(&format!("conv{l}.bias"));
            let wt = |ky: usize, kx: usize, i: usize, o: usize| weight[((ky * 3 + kx) * cin + i) * cout + o];
            let mut next = vec![vec![vec![0.0; cout]; w]; h];
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    for o in 0..cout {
                        let mut z = bias[o];
                        for dy in -1i64..=1 {
                            for dx in -1i64..=1 {
                                let (yy, xx) = (y + dy, x + dx);
                                if yy < 0 || xx < 0 || yy >= h as i64 || xx >= w as i64 {
                                    continue;
                                }
                                for (i, a) in act[yy as usize][xx as usize].iter().enumerate() {
                                    z += wt((dy + 1) as usize, (dx + 1) as usize, i, o) * a;
                                }
                            }
                        }
                        next[y as usize][x as usize][o] = z.max(0.0);
                    }
                }
            }
            act = next;
        }
        let c = act[0][0].len();
        let k = net.arch().num_classes;
        match net.arch().kind {
            NetKind::Classifier => {
                let pooled: Vec<f64> = (0..c)
                    .map(|ch| act.iter().flatten().map(|px| px[ch]).sum::<f64>() / (h * w) as f64)
                    .collect();
                let (fw, fb) = (p("fc.weight"), p("fc.bias"));
                (0..k)
                    .map(|cls| fb[cls] + (0..c).map(|ch| fw[cls * c + ch] * pooled[ch]).sum::<f64>())
                    .collect()
            }
            NetKind::Segmenter => {
                let (hw, hb) = (p("head.weight"), p("head.bias"));
                act.iter()
                    .flatten()
                    .flat_map(|px| {
                        (0..=k).map(move |cls| hb[cls] + (0..c).map(|ch| hw[ch * (k + 1) + cls] * px[ch]).sum::<f64>())
                    })
                    .collect()
            }
        }
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let trunk = TrunkArch::new(3, [8, 8]);
        let a = ClassifierNet::init(trunk.clone(), 4, 1).unwrap();
        assert_eq!(a, ClassifierNet::init(trunk.clone(), 4, 1).unwrap());
        assert_ne!(a, ClassifierNet::init(trunk, 4, 2).unwrap());
    }

    #[test]
    fn zero_classes_is_config_error() {
        let err = ClassifierNet::init(TrunkArch::new(3, [8]), 0, 1).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let cls = ClassifierNet::from_net(Net::zeros(NetArch::classifier(TrunkArch::new(3, [4]), 3)).unwrap()).unwrap();
        assert!(cls
            .forward(&random_image(5, 5, 3, 0))
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let seg = SegmenterNet::from_net(Net::zeros(NetArch::segmenter(TrunkArch::new(3, [4]), 3)).unwrap()).unwrap();
        assert!(seg
            .forward(&random_image(5, 5, 3, 0))
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn classifier_matches_oracle_and_is_pure() {
        for seed in 0..5 {
            let net = ClassifierNet::init(TrunkArch::new(3, [6, 5, 4]), 4, seed).unwrap();
            let img = random_image(8, 8, 3, seed + 100);
            let logits = net.forward(&img).unwrap();
            assert_eq!(logits, net.forward(&img).unwrap());
            assert_close(&logits, &oracle_forward(net.net(), &img), 1e-12);
        }
    }

    #[test]
    fn segmenter_matches_oracle_and_keeps_shape() {
        for size in [8, 16, 32] {
            let net = SegmenterNet::init(TrunkArch::new(1, [4, 4]), 3, size as u64).unwrap();
            let img = random_image(size, size, 1, 7);
            let out = net.forward(&img).unwrap();
            assert_eq!(out.len(), size * size * 4);
            assert_eq!(net.predict_mask(&img).unwrap().len(), size * size);
            if size == 8 {
                assert_close(&out, &oracle_forward(net.net(), &img), 1e-12);
            }
        }
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let net = ClassifierNet::init(TrunkArch::new(3, [4]), 2, 0).unwrap();
        assert!(matches!(net.forward(&random_image(4, 4, 1, 0)), Err(Error::Shape(_))));
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        for seed in 0..4 {
            let net = ClassifierNet::init(TrunkArch::new(3, [5, 4]), 3, seed).unwrap();
            let report = finite_diff_check_input(&net, &random_image(6, 6, 3, seed), 1e-4).unwrap();
            assert!(report.probe_count > 50, "{report:?}");
            assert!(report.max_rel_error <= 1e-3, "{report:?}");
        }
    }

    #[test]
    fn grad_input_of_one_logit_matches_finite_differences() {
        let net = ClassifierNet::init(TrunkArch::new(1, [4, 4]), 3, 9).unwrap();
        let img = random_image(6, 6, 1, 1);
        let grad = grad_input(&net, &img, 2).unwrap();
        let h = 1e-4;
        for j in 0..img.data().len() {
            let mut plus = img.data().to_vec();
            let mut minus = img.data().to_vec();
            plus[j] += h;
            minus[j] -= h;
            let (lp, cp) = net.net().forward_raw(&plus, 6, 6).unwrap();
            let (lm, cm) = net.net().forward_raw(&minus, 6, 6).unwrap();
            if cp.activation_pattern() != cm.activation_pattern() {
                continue;
            }
            let numeric = (lp[2] - lm[2]) / (2.0 * h);
            assert!(
                relative_error(grad[j], numeric) <= 1e-3,
                "{j}: {} vs {numeric}",
                grad[j]
            );
        }
    }

    #[test]
    fn dead_first_layer_gives_zero_input_gradient() {
        let mut net = ClassifierNet::init(TrunkArch::new(3, [4, 4]), 2, 3).unwrap();
        let range = net.net().layout().get("conv0.weight").unwrap().range();
        net.params_mut()[range].iter_mut().for_each(|p| *p = 0.0);
        assert!(grad_input(&net, &random_image(6, 6, 3, 0), 1)
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn doubling_class_row_doubles_gradient() {
        let net = ClassifierNet::init(TrunkArch::new(3, [4]), 3, 5).unwrap();
        let img = random_image(6, 6, 3, 2);
        let mut doubled = net.clone();
        let seg = net.net().layout().get("fc.weight").unwrap().clone();
        let c = seg.shape[1];
        for p in &mut doubled.params_mut()[seg.offset + c..seg.offset + 2 * c] {
            *p *= 2.0;
        }
        let a = grad_input(&net, &img, 1).unwrap();
        let b = grad_input(&doubled, &img, 1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(2.0 * x, *y);
        }
        assert!(matches!(grad_input(&net, &img, 3), Err(Error::ClassOutOfRange { .. })));
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        for seed in 0..3 {
            let cls = ClassifierNet::init(TrunkArch::new(3, [5, 4]), 3, seed).unwrap();
            let r = finite_diff_check(&cls, &random_image(6, 6, 3, seed), 1e-4).unwrap();
            assert!(r.max_rel_error <= 1e-3 && r.probe_count > 100, "{r:?}");
            let seg = SegmenterNet::init(TrunkArch::new(3, [5, 4]), 3, seed).unwrap();
            let r = finite_diff_check(&seg, &random_image(6, 6, 3, seed), 1e-4).unwrap();
            assert!(r.max_rel_error <= 1e-3 && r.probe_count > 100, "{r:?}");
        }
    }

    #[test]
    fn sign_flip_mutation_is_detected() {
        let net = SegmenterNet::init(TrunkArch::new(3, [4]), 2, 1).unwrap();
        let img = random_image(6, 6, 3, 4);
        let report = check_params_with(&net, &img, 1e-4, |n, i, u| {
            Ok(backward_params(n, i, u)?.into_iter().map(|g| -g).collect())
        })
        .unwrap();
        assert!(report.max_rel_error >= 0.5, "{report:?}");
        assert!(matches!(finite_diff_check(&net, &img, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let net = SegmenterNet::init(TrunkArch::new(3, [4]), 2, 8).unwrap();
        let img = random_image(5, 5, 3, 8);
        let n = 5 * 5 * 3;
        assert!(backward_params(&net, &img, &vec![0.0; n])
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
        let ones = backward_params(&net, &img, &vec![1.0; n]).unwrap();
        let mut sum = vec![0.0; ones.len()];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            for (s, g) in sum.iter_mut().zip(backward_params(&net, &img, &e).unwrap()) {
                *s += g;
            }
        }
        assert_close(&ones, &sum, 1e-10);
        assert!(matches!(backward_params(&net, &img, &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn transplant_modes() {
        let trunk = TrunkArch::new(3, [4, 4]);
        let cls = ClassifierNet::init(trunk.clone(), 3, 1).unwrap();
        let fresh = SegmenterNet::init(trunk.clone(), 3, 2).unwrap();
        let trunk_len = fresh.net().layout().trunk_len;

        let backbone = transplant_backbone(&cls, &fresh, TransplantMode::BackboneOnly).unwrap();
        assert_eq!(&backbone.params()[..trunk_len], cls.net().trunk_params());
        assert_eq!(&backbone.params()[trunk_len..], &fresh.params()[trunk_len..]);

        let pre = SegmenterNet::init(trunk.clone(), 3, 3).unwrap();
        let full = transplant_backbone(&pre, &fresh, TransplantMode::Full).unwrap();
        assert_eq!(full, pre);
        let partial = transplant_backbone(&pre, &fresh, TransplantMode::BackboneOnly).unwrap();
        let differing: Vec<_> = (0..full.params().len())
            .filter(|&i| full.params()[i] != partial.params()[i])
            .collect();
        assert!(differing.iter().all(|&i| i >= trunk_len) && !differing.is_empty());

        assert!(transplant_backbone(&cls, &fresh, TransplantMode::Full).is_err());
        let other = ClassifierNet::init(TrunkArch::new(3, [4, 5]), 3, 1).unwrap();
        assert!(matches!(
            transplant_backbone(&other, &fresh, TransplantMode::BackboneOnly),
            Err(Error::Architecture(_))
        ));
    }
}
