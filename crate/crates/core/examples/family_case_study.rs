//! Trains D4-Gumbel on a generated FAMILY graph and prints the case-study
//! products. Defaults match the acceptance configuration.
//!
//! Usage: `family_case_study [epochs] [learning_rate] [tau_decay] [seed] [l2_lambda] [neg_ratio] [batch_size]`.
//! Set `FAMILY_SKEW=1` for skew negative sampling on parent/child and
//! `FAMILY_NO_COMPONENT_REG=1` to drop the component regularizer.

use std::time::Instant;

use dihedral_kge::analysis::{component_histogram, composition_product, inversion_product, HardRelations};
use dihedral_kge::dataset::{generate_family, FamilySpec};
use dihedral_kge::trainer::{train_with, TrainConfig};
use dihedral_kge::Mode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_owned());
    let (store, _) = generate_family(&FamilySpec::default())?;
    let config = TrainConfig {
        k: 4,
        dim: 400,
        mode: Mode::Gumbel,
        epochs: arg(0, "150").parse()?,
        learning_rate: arg(1, "0.5").parse()?,
        tau_decay: arg(2, "0.02").parse()?,
        seed: arg(3, "0").parse()?,
        l2_lambda: arg(4, "0.1").parse()?,
        neg_ratio: arg(5, "6").parse()?,
        batch_size: arg(6, "512").parse()?,
        component_reg: std::env::var_os("FAMILY_NO_COMPONENT_REG").is_none(),
        skew_relations: if std::env::var_os("FAMILY_SKEW").is_some() {
            vec!["parent".into(), "child".into()]
        } else {
            Vec::new()
        },
        eval_every: 25,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let outcome = train_with::<f32>(&store, &config, |s| {
        if let Some(mrr) = s.valid_mrr {
            eprintln!("epoch {} loss {:.4} tau {:.3} valid MRR {mrr:.4}", s.epoch, s.mean_loss, s.tau);
        }
    })?;
    println!("trained in {:.1?}", start.elapsed());
    let rels = HardRelations::from_model(&outcome.model, store.relations().names())?;
    for (a, b) in [("parent", "child"), ("parent_in_law", "child_in_law"), ("spouse", "spouse"), ("sibling", "sibling")] {
        println!("inversion {a}·{b}: {:.3}", inversion_product(&rels, a, b)?.fraction_plus_one);
    }
    let c = composition_product(&rels, "parent", "spouse", "parent_in_law")?;
    println!("composition correct {:.3} swapped {:.3}", c.correct.fraction_plus_one, c.swapped.fraction_plus_one);
    for r in rels.names() {
        let h = component_histogram(&rels, r)?;
        println!("{r}: {:?} skew {:.3}", h.counts, h.skew_fraction());
    }
    Ok(())
}
