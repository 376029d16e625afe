use std::collections::HashMap;

use dihedral_kge::dataset::Triple;
use dihedral_kge::group::{DihedralElement, DihedralGroup};
use dihedral_kge::mat2::Mat2;
use dihedral_kge::model::{distance_identity_residual, score, score_gradient, Model};
use dihedral_kge::param::{gumbel_backward, gumbel_soft_blocks, sample_gumbel, ste_image, Realization};
use dihedral_kge::real::neg_log_sigmoid;
use dihedral_kge::trainer::{batch_objective, Batch, Objective};
use dihedral_kge::Mode;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn dense(blocks: &[Mat2<f64>]) -> Vec<Vec<f64>> {
    let n = 2 * blocks.len();
    let mut m = vec![vec![0.0; n]; n];
    for (l, b) in blocks.iter().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                m[2 * l + i][2 * l + j] = b[i][j];
            }
        }
    }
    m
}

fn hard_blocks(order: u16, ks: &[usize]) -> Vec<Mat2<f64>> {
    ks.iter()
        .map(|&k| DihedralElement::from_enumeration(order, k).unwrap().matrix())
        .collect()
}

fn arb_case() -> impl Strategy<Value = (Vec<f64>, Vec<Mat2<f64>>, Vec<f64>)> {
    (prop_oneof![Just(4u16), Just(6), Just(8)], 1usize..20).prop_flat_map(|(k, l)| {
        (
            proptest::collection::vec(-3.0..3.0f64, 2 * l),
            proptest::collection::vec(0..2 * k as usize, l),
            proptest::collection::vec(-3.0..3.0f64, 2 * l),
        )
            .prop_map(move |(h, ks, t)| (h, hard_blocks(k, &ks), t))
    })
}

proptest! {
    #[test]
    fn score_equals_dense_bilinear_form((h, blocks, t) in arb_case()) {
        let m = dense(&blocks);
        let oracle: f64 = (0..h.len())
            .map(|i| (0..t.len()).map(|j| h[i] * m[i][j] * t[j]).sum::<f64>())
            .sum();
        prop_assert!((score(&h, &blocks, &t).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn score_is_translation_distance_identity((h, blocks, t) in arb_case()) {
        prop_assert!(distance_identity_residual(&h, &blocks, &t).unwrap().abs() < 1e-9);
    }

    #[test]
    fn relations_preserve_norms((h, blocks, t) in arb_case()) {
        let m = dense(&blocks);
        let rt: Vec<f64> = m.iter().map(|row| row.iter().zip(&t).map(|(a, b)| a * b).sum()).collect();
        let n1: f64 = rt.iter().map(|v| v * v).sum();
        let n2: f64 = t.iter().map(|v| v * v).sum();
        prop_assert!((n1 - n2).abs() < 1e-9 * n2.max(1.0));
        let _ = h;
    }

    #[test]
    fn softmax_rows_sum_to_one(
        logits in proptest::collection::vec(-20.0..20.0f64, 8 * 5),
        tau in 0.05..5.0f64,
    ) {
        let g = DihedralGroup::new(4).unwrap();
        let soft = gumbel_soft_blocks(&g, &logits, &[], tau).unwrap();
        for row in soft.probs.chunks(8) {
            let s: f64 = row.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&c| c >= 0.0));
        }
    }
}

#[test]
fn binarized_images_have_full_group_size() {
    assert_eq!(ste_image(4).unwrap().len(), 8);
    assert_eq!(ste_image(6).unwrap().len(), 12);
}

/// `-log σ(φ(h, B(s), t))` as a function of the logits with fixed noise.
fn gumbel_loss(g: &DihedralGroup, logits: &[f64], noise: &[f64], tau: f64, h: &[f64], t: &[f64]) -> f64 {
    let soft = gumbel_soft_blocks(g, logits, noise, tau).unwrap();
    neg_log_sigmoid(score(h, &soft.blocks, t).unwrap())
}

#[test]
fn gumbel_logit_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for order in [4u16, 6] {
        let g = DihedralGroup::new(order).unwrap();
        let l = 3;
        let n = l * g.len();
        for tau in [3.0, 1.0, 0.5] {
            let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let noise: Vec<f64> = sample_gumbel(&mut rng, n);
            let h: Vec<f64> = (0..2 * l).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..2 * l).map(|_| rng.random_range(-1.0..1.0)).collect();

            let soft = gumbel_soft_blocks(&g, &logits, &noise, tau).unwrap();
            let phi = score(&h, &soft.blocks, &t).unwrap();
            // d(-log σ(φ))/dφ = -(1 - σ(φ))
            let dphi = -1.0 / (1.0 + phi.exp());
            let block_grads: Vec<Mat2<f64>> = score_gradient(&h, &soft.blocks, &t)
                .unwrap()
                .blocks
                .iter()
                .map(|b| b.map(|row| row.map(|v| v * dphi)))
                .collect();
            let analytic = gumbel_backward(&g, &soft, &block_grads, tau);

            let eps = 1e-6;
            for i in 0..n {
                let mut up = logits.clone();
                up[i] += eps;
                let mut down = logits.clone();
                down[i] -= eps;
                let numeric = (gumbel_loss(&g, &up, &noise, tau, &h, &t)
                    - gumbel_loss(&g, &down, &noise, tau, &h, &t))
                    / (2.0 * eps);
                if numeric.abs() < 1e-9 && analytic[i].abs() < 1e-9 {
                    continue;
                }
                assert!(
                    rel_err(analytic[i], numeric) < 1e-4,
                    "K={order} tau={tau} i={i}: {} vs {numeric}",
                    analytic[i]
                );
            }
        }
    }
}

struct Fixture {
    model: Model<f64>,
    batch: Batch,
    noise: HashMap<u32, Vec<f64>>,
    tau: f64,
}

impl Fixture {
    fn new(mode: Mode, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = Model::<f64>::random(mode, 4, 6, 5, 2, &mut rng).unwrap();
        let positives = vec![Triple::new(0, 0, 1), Triple::new(2, 1, 3), Triple::new(1, 0, 1)];
        let negatives = vec![
            vec![Triple::new(4, 0, 1), Triple::new(0, 0, 2)],
            vec![Triple::new(3, 1, 2), Triple::new(2, 1, 0)],
            vec![Triple::new(1, 0, 4), Triple::new(3, 0, 1)],
        ];
        let width = model.relations.params_per_relation();
        let noise = (0..2u32)
            .map(|r| {
                let q = match mode {
                    Mode::Gumbel => sample_gumbel(&mut rng, width),
                    Mode::Ste => Vec::new(),
                };
                (r, q)
            })
            .collect();
        Self {
            model,
            batch: Batch { positives, negatives },
            noise,
            tau: 0.8,
        }
    }

    fn realized(&self, model: &Model<f64>) -> HashMap<u32, Realization<f64>> {
        self.noise
            .iter()
            .map(|(&r, q)| (r, model.relations.realize_train(r as usize, q, self.tau).unwrap()))
            .collect()
    }

    fn loss(&self, model: &Model<f64>, objective: Objective) -> f64 {
        batch_objective(model, &self.batch, &self.realized(model), objective)
            .unwrap()
            .loss
    }
}

#[test]
fn entity_gradients_match_finite_differences() {
    for (mode, component_reg) in [(Mode::Ste, false), (Mode::Gumbel, true), (Mode::Ste, true)] {
        let fx = Fixture::new(mode, 5);
        let objective = Objective {
            l2_lambda: 0.3,
            component_reg,
        };
        let grads = batch_objective(&fx.model, &fx.batch, &fx.realized(&fx.model), objective).unwrap();
        let eps = 1e-6;
        for e in 0..5u32 {
            let analytic = grads.entity_grad(e).expect("every entity is touched");
            for i in 0..fx.model.dim() {
                let mut up = fx.model.clone();
                up.entities.row_mut(e as usize)[i] += eps;
                let mut down = fx.model.clone();
                down.entities.row_mut(e as usize)[i] -= eps;
                let numeric = (fx.loss(&up, objective) - fx.loss(&down, objective)) / (2.0 * eps);
                assert!(
                    rel_err(analytic[i], numeric) < 1e-5,
                    "{mode} reg={component_reg} e={e} i={i}: {} vs {numeric}",
                    analytic[i]
                );
            }
        }
    }
}

#[test]
fn gumbel_relation_gradients_match_finite_differences() {
    let fx = Fixture::new(Mode::Gumbel, 6);
    let objective = Objective {
        l2_lambda: 0.1,
        component_reg: true,
    };
    let realized = fx.realized(&fx.model);
    let grads = batch_objective(&fx.model, &fx.batch, &realized, objective).unwrap();
    let eps = 1e-6;
    for (&r, block_grads) in &grads.relation_grads {
        let analytic = fx
            .model
            .relations
            .backward(r as usize, &realized[&r], block_grads, fx.tau)
            .unwrap();
        for (i, &a) in analytic.iter().enumerate() {
            let mut up = fx.model.clone();
            up.relations.relation_mut(r as usize)[i] += eps;
            let mut down = fx.model.clone();
            down.relations.relation_mut(r as usize)[i] -= eps;
            let numeric = (fx.loss(&up, objective) - fx.loss(&down, objective)) / (2.0 * eps);
            if a.abs() < 1e-9 && numeric.abs() < 1e-9 {
                continue;
            }
            assert!(rel_err(a, numeric) < 1e-4, "r={r} i={i}: {a} vs {numeric}");
        }
    }
}

#[test]
fn regularization_touches_entities_only() {
    let mut fx = Fixture::new(Mode::Ste, 7);
    for v in fx.model.entities.as_mut_slice() {
        *v = 0.0;
    }
    let n = fx.batch.labeled().count() as f64;
    for lambda in [0.0, 0.5, 10.0] {
        let objective = Objective {
            l2_lambda: lambda,
            component_reg: false,
        };
        // zero embeddings: every score is 0 and the penalty vanishes
        let loss = fx.loss(&fx.model, objective);
        assert!((loss - n * std::f64::consts::LN_2).abs() < 1e-12, "{loss}");
    }
    // relation gradients do not depend on λ
    let fx = Fixture::new(Mode::Gumbel, 8);
    let realized = fx.realized(&fx.model);
    let g = |lambda| {
        batch_objective(
            &fx.model,
            &fx.batch,
            &realized,
            Objective {
                l2_lambda: lambda,
                component_reg: false,
            },
        )
        .unwrap()
        .relation_grads
    };
    assert_eq!(g(0.0), g(5.0));
}
