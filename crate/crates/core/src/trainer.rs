//! Minibatch training: negative sampling, logistic loss with entity-only L2,
//! the optional per-component margin regularizer, AdaGrad and the
//! temperature schedule.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Triple, TripleStore};
use crate::error::{Error, Result};
use crate::eval::{self, EvalOptions};
use crate::mat2::{self, Mat2};
use crate::model::{component_scores, score_unchecked, Model};
use crate::optim::AdaGrad;
use crate::param::{self, Mode, Realization};
use crate::real::{neg_log_sigmoid, sigmoid, Real};

/// RNG stream ids derived from the one configured seed.
const STREAM_INIT: u64 = 0;
const STREAM_SAMPLING: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_VALIDATION: u64 = 3;

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// All training hyperparameters. Field names double as config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Group order `K`.
    pub k: u16,
    /// Embedding width `2L`.
    pub dim: usize,
    pub mode: Mode,
    pub learning_rate: f64,
    /// L2 coefficient on entity embeddings only.
    pub l2_lambda: f64,
    pub batch_size: usize,
    /// Negatives per positive.
    pub neg_ratio: usize,
    pub epochs: usize,
    pub tau0: f64,
    pub tau_floor: f64,
    /// Per-epoch exponential decay rate of the temperature.
    pub tau_decay: f64,
    pub seed: u64,
    /// Relations that get head/tail-swapped negatives.
    pub skew_relations: Vec<String>,
    pub skew_prob: f64,
    /// Adds the per-component logistic margin term to the loss.
    pub component_reg: bool,
    /// Validation period in epochs; 0 disables validation.
    pub eval_every: usize,
    /// Maximum number of validation triples scored per check.
    pub eval_cap: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 4,
            dim: 200,
            mode: Mode::Ste,
            learning_rate: 0.05,
            l2_lambda: 0.01,
            batch_size: 1024,
            neg_ratio: 6,
            epochs: 100,
            tau0: 3.0,
            tau_floor: 0.5,
            tau_decay: 0.001,
            seed: 0,
            skew_relations: Vec::new(),
            skew_prob: 0.5,
            component_reg: false,
            eval_every: 10,
            eval_cap: 2000,
        }
    }
}

impl TrainConfig {
    /// Names accepted in config files and as `--key value` overrides.
    pub const KEYS: [&'static str; 17] = [
        "k",
        "dim",
        "mode",
        "learning_rate",
        "l2_lambda",
        "batch_size",
        "neg_ratio",
        "epochs",
        "tau0",
        "tau_floor",
        "tau_decay",
        "seed",
        "skew_relations",
        "skew_prob",
        "component_reg",
        "eval_every",
        "eval_cap",
    ];

    pub fn validate(&self) -> Result<()> {
        crate::group::validate_order(self.k)?;
        param::values_per_block(self.mode, self.k)?;
        let bad = |msg: String| Err(Error::Domain(msg));
        if self.dim == 0 || self.dim % 2 != 0 {
            return bad(format!("dim must be a positive even number, got {}", self.dim));
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.l2_lambda >= 0.0) {
            return bad(format!("l2_lambda must be non-negative, got {}", self.l2_lambda));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.neg_ratio == 0 {
            return bad("neg_ratio must be at least 1".into());
        }
        if !(self.tau0 > 0.0 && self.tau_floor > 0.0 && self.tau_decay >= 0.0) {
            return bad("tau0 and tau_floor must be positive, tau_decay non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.skew_prob) {
            return bad(format!("skew_prob must be in [0, 1], got {}", self.skew_prob));
        }
        Ok(())
    }

    /// `τ = max(τ_floor, τ₀ exp(-decay · epoch))`.
    pub fn temperature(&self, epoch: usize) -> f64 {
        temperature(epoch, self.tau0, self.tau_floor, self.tau_decay)
    }
}

pub fn temperature(epoch: usize, tau0: f64, floor: f64, decay: f64) -> f64 {
    floor.max(tau0 * (-decay * epoch as f64).exp())
}

/// Positives with their sampled negatives; `negatives[i]` belong to `positives[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Batch {
    pub positives: Vec<Triple>,
    pub negatives: Vec<Vec<Triple>>,
}

impl Batch {
    /// Every triple with its label `y ∈ {+1, -1}`.
    pub fn labeled(&self) -> impl Iterator<Item = (Triple, i8)> + '_ {
        self.positives
            .iter()
            .zip(&self.negatives)
            .flat_map(|(p, negs)| std::iter::once((*p, 1)).chain(negs.iter().map(|n| (*n, -1))))
    }
}

/// Corrupts head or tail (uniform side, uniform entity) `neg_ratio` times.
/// When `swap_prob > 0`, the first negative is replaced by `(t, r, h)` with
/// that probability. Negatives are not filtered against known triples.
pub fn sample_negatives<R: Rng + ?Sized>(
    positive: &Triple,
    num_entities: usize,
    neg_ratio: usize,
    swap_prob: f64,
    rng: &mut R,
) -> Vec<Triple> {
    let swap = swap_prob > 0.0 && rng.random_bool(swap_prob);
    (0..neg_ratio)
        .map(|i| {
            if i == 0 && swap {
                return Triple::new(positive.tail, positive.relation, positive.head);
            }
            let corrupt_head = rng.random_bool(0.5);
            let e = rng.random_range(0..num_entities) as u32;
            if corrupt_head {
                Triple::new(e, positive.relation, positive.tail)
            } else {
                Triple::new(positive.head, positive.relation, e)
            }
        })
        .collect()
}

/// `-log σ(y φ)`.
pub fn logistic_loss<T: Real>(score: T, label: i8) -> T {
    if label >= 0 {
        neg_log_sigmoid(score)
    } else {
        neg_log_sigmoid(-score)
    }
}

/// `Σ_l -log σ(margin_l)`.
pub fn component_margin_loss<T: Real>(margins: &[T]) -> T {
    margins.iter().map(|&m| neg_log_sigmoid(m)).sum()
}

/// Per-component regularizer over paired positives and negatives using the
/// given relation blocks. Every negative must share its positive's relation.
pub fn component_regularizer<T: Real>(
    model: &Model<T>,
    blocks: &[Vec<Mat2<T>>],
    positives: &[Triple],
    negatives: &[Triple],
) -> Result<T> {
    if positives.len() != negatives.len() {
        return Err(Error::domain(format!(
            "component regularizer needs paired triples, got {} positives and {} negatives",
            positives.len(),
            negatives.len()
        )));
    }
    let e = &model.entities;
    let mut total = T::zero();
    for (p, n) in positives.iter().zip(negatives) {
        if p.relation != n.relation {
            return Err(Error::domain(format!("negative {n:?} is not paired with {p:?}")));
        }
        let b = &blocks[p.relation as usize];
        let sp = component_scores(e.row(p.head as usize), b, e.row(p.tail as usize))?;
        let sn = component_scores(e.row(n.head as usize), b, e.row(n.tail as usize))?;
        let margins: Vec<T> = sp.iter().zip(&sn).map(|(&a, &b)| a - b).collect();
        total += component_margin_loss(&margins);
    }
    Ok(total)
}

/// Loss configuration shared by the objective and its gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub l2_lambda: f64,
    pub component_reg: bool,
}

/// Loss and sparse gradients of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradients<T> {
    pub loss: f64,
    /// Touched entities in first-appearance order.
    pub entity_ids: Vec<u32>,
    /// Row gradients, `entity_ids.len() × dim`.
    pub entity_grads: Vec<T>,
    /// Gradients w.r.t. the realized blocks of each touched relation.
    pub relation_grads: BTreeMap<u32, Vec<Mat2<T>>>,
}

impl<T: Real> BatchGradients<T> {
    pub fn entity_grad(&self, entity: u32) -> Option<&[T]> {
        let dim = self.entity_grads.len() / self.entity_ids.len().max(1);
        self.entity_ids
            .iter()
            .position(|&e| e == entity)
            .map(|i| &self.entity_grads[i * dim..(i + 1) * dim])
    }
}

struct GroupGrad<T> {
    loss: T,
    rows: Vec<(u32, Vec<T>)>,
    relation: u32,
    blocks: Vec<Mat2<T>>,
}

fn add_scaled<T: Real>(dst: &mut [T], coef: T, blocks: &[Mat2<T>], v: &[T], transpose: bool) {
    for (l, b) in blocks.iter().enumerate() {
        let x = [v[2 * l], v[2 * l + 1]];
        let y = if transpose { mat2::apply_transpose(b, x) } else { mat2::apply(b, x) };
        dst[2 * l] += coef * y[0];
        dst[2 * l + 1] += coef * y[1];
    }
}

fn add_outer<T: Real>(dst: &mut [Mat2<T>], coef: T, h: &[T], t: &[T]) {
    for (l, g) in dst.iter_mut().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] += coef * h[2 * l + i] * t[2 * l + j];
            }
        }
    }
}

fn group_gradient<T: Real>(
    model: &Model<T>,
    positive: &Triple,
    negatives: &[Triple],
    blocks: &[Mat2<T>],
    component_reg: bool,
) -> GroupGrad<T> {
    let e = &model.entities;
    let dim = e.dim();
    let num_blocks = blocks.len();
    let (h, t) = (e.row(positive.head as usize), e.row(positive.tail as usize));
    let mut loss = T::zero();
    let mut block_grads = vec![mat2::zero::<T>(); num_blocks];
    let mut dh = vec![T::zero(); dim];
    let mut dt = vec![T::zero(); dim];
    let mut rows = Vec::with_capacity(2 + 2 * negatives.len());

    let phi = score_unchecked(h, blocks, t);
    loss += neg_log_sigmoid(phi);
    let coef = -sigmoid(-phi);
    add_scaled(&mut dh, coef, blocks, t, false);
    add_scaled(&mut dt, coef, blocks, h, true);
    add_outer(&mut block_grads, coef, h, t);

    let pos_components = if component_reg {
        component_scores(h, blocks, t).expect("dimensions checked by model")
    } else {
        Vec::new()
    };

    for n in negatives {
        let (hn, tn) = (e.row(n.head as usize), e.row(n.tail as usize));
        let mut dhn = vec![T::zero(); dim];
        let mut dtn = vec![T::zero(); dim];
        let phi_n = score_unchecked(hn, blocks, tn);
        loss += neg_log_sigmoid(-phi_n);
        let coef = sigmoid(phi_n);
        add_scaled(&mut dhn, coef, blocks, tn, false);
        add_scaled(&mut dtn, coef, blocks, hn, true);
        add_outer(&mut block_grads, coef, hn, tn);

        if component_reg {
            for (l, b) in blocks.iter().enumerate() {
                let pair = |v: &[T]| [v[2 * l], v[2 * l + 1]];
                let neg_component = mat2::bilinear(pair(hn), b, pair(tn));
                let margin = pos_components[l] - neg_component;
                loss += neg_log_sigmoid(margin);
                let c = -sigmoid(-margin);
                let bt = mat2::apply(b, pair(t));
                let bth = mat2::apply_transpose(b, pair(h));
                let btn = mat2::apply(b, pair(tn));
                let bthn = mat2::apply_transpose(b, pair(hn));
                for i in 0..2 {
                    dh[2 * l + i] += c * bt[i];
                    dt[2 * l + i] += c * bth[i];
                    dhn[2 * l + i] -= c * btn[i];
                    dtn[2 * l + i] -= c * bthn[i];
                    for j in 0..2 {
                        block_grads[l][i][j] +=
                            c * (h[2 * l + i] * t[2 * l + j] - hn[2 * l + i] * tn[2 * l + j]);
                    }
                }
            }
        }
        rows.push((n.head, dhn));
        rows.push((n.tail, dtn));
    }
    rows.insert(0, (positive.tail, dt));
    rows.insert(0, (positive.head, dh));
    GroupGrad {
        loss,
        rows,
        relation: positive.relation,
        blocks: block_grads,
    }
}

/// Loss and gradients of a batch given the realized relation blocks.
///
/// `realized` maps every relation id present in the batch to its training-time
/// realization. The result is independent of the number of worker threads.
pub fn batch_objective<T: Real>(
    model: &Model<T>,
    batch: &Batch,
    realized: &HashMap<u32, Realization<T>>,
    objective: Objective,
) -> Result<BatchGradients<T>> {
    if batch.positives.len() != batch.negatives.len() {
        return Err(Error::domain("every positive needs its list of negatives"));
    }
    for (p, negs) in batch.positives.iter().zip(&batch.negatives) {
        if !realized.contains_key(&p.relation) {
            return Err(Error::domain(format!("relation {} was not realized", p.relation)));
        }
        if negs.iter().any(|n| n.relation != p.relation) {
            return Err(Error::domain("negatives must keep their positive's relation"));
        }
    }
    let groups: Vec<GroupGrad<T>> = batch
        .positives
        .par_iter()
        .zip(batch.negatives.par_iter())
        .map(|(p, negs)| {
            group_gradient(model, p, negs, realized[&p.relation].blocks(), objective.component_reg)
        })
        .collect();

    let dim = model.dim();
    let mut loss = 0.0f64;
    let mut slots: HashMap<u32, usize> = HashMap::new();
    let mut entity_ids = Vec::new();
    let mut entity_grads: Vec<T> = Vec::new();
    let mut relation_grads: BTreeMap<u32, Vec<Mat2<T>>> = BTreeMap::new();
    for g in groups {
        loss += g.loss.as_f64();
        for (id, row) in g.rows {
            let slot = *slots.entry(id).or_insert_with(|| {
                entity_ids.push(id);
                entity_grads.extend(std::iter::repeat_n(T::zero(), dim));
                entity_ids.len() - 1
            });
            for (acc, v) in entity_grads[slot * dim..(slot + 1) * dim].iter_mut().zip(row) {
                *acc += v;
            }
        }
        let rel = relation_grads
            .entry(g.relation)
            .or_insert_with(|| vec![mat2::zero(); g.blocks.len()]);
        for (acc, b) in rel.iter_mut().zip(&g.blocks) {
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += b[i][j];
                }
            }
        }
    }
    if objective.l2_lambda > 0.0 {
        let lambda = T::lit(objective.l2_lambda);
        let two_lambda = T::lit(2.0 * objective.l2_lambda);
        for (slot, &id) in entity_ids.iter().enumerate() {
            let row = model.entities.row(id as usize);
            let norm2: T = row.iter().map(|&v| v * v).sum();
            loss += (lambda * norm2).as_f64();
            for (acc, &v) in entity_grads[slot * dim..(slot + 1) * dim].iter_mut().zip(row) {
                *acc += two_lambda * v;
            }
        }
    }
    Ok(BatchGradients {
        loss,
        entity_ids,
        entity_grads,
        relation_grads,
    })
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Summed objective over the epoch.
    pub loss: f64,
    /// Objective per positive triple.
    pub mean_loss: f64,
    pub tau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_mrr: Option<f64>,
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: Model<T>,
    /// Model with the best validation MRR (the final model when no
    /// validation was run).
    pub best: Model<T>,
    pub best_epoch: Option<usize>,
    pub best_valid_mrr: Option<f64>,
    pub log: Vec<EpochStats>,
}

/// Stateful trainer over one triple store.
pub struct Trainer<'a, T> {
    store: &'a TripleStore,
    config: TrainConfig,
    model: Model<T>,
    entity_opt: AdaGrad,
    relation_opt: AdaGrad,
    sample_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    skew: Vec<bool>,
    order: Vec<usize>,
    valid_sample: Vec<Triple>,
    epoch: usize,
}

impl<'a, T: Real> Trainer<'a, T> {
    pub fn new(store: &'a TripleStore, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if store.num_entities() == 0 || store.num_relations() == 0 {
            return Err(Error::domain("cannot train on an empty knowledge graph"));
        }
        let mut init_rng = seeded_rng(config.seed, STREAM_INIT);
        let model = Model::random(
            config.mode,
            config.k,
            config.dim,
            store.num_entities(),
            store.num_relations(),
            &mut init_rng,
        )?;
        let mut skew = vec![false; store.num_relations()];
        for name in &config.skew_relations {
            skew[store.relation_id(name)? as usize] = true;
        }
        let mut valid: Vec<Triple> = store.valid().to_vec();
        valid.shuffle(&mut seeded_rng(config.seed, STREAM_VALIDATION));
        valid.truncate(config.eval_cap);
        let entity_opt = AdaGrad::new(config.learning_rate, store.num_entities(), config.dim);
        let relation_opt = AdaGrad::new(
            config.learning_rate,
            store.num_relations(),
            model.relations.params_per_relation(),
        );
        Ok(Self {
            store,
            sample_rng: seeded_rng(config.seed, STREAM_SAMPLING),
            noise_rng: seeded_rng(config.seed, STREAM_NOISE),
            model,
            entity_opt,
            relation_opt,
            skew,
            order: (0..store.train().len()).collect(),
            valid_sample: valid,
            epoch: 0,
            config,
        })
    }

    pub fn model(&self) -> &Model<T> {
        &self.model
    }

    pub fn into_model(self) -> Model<T> {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    fn objective(&self) -> Objective {
        Objective {
            l2_lambda: self.config.l2_lambda,
            component_reg: self.config.component_reg,
        }
    }

    /// Samples negatives for a slice of positives from the sampling stream.
    pub fn make_batch(&mut self, positives: &[Triple]) -> Batch {
        let n = self.store.num_entities();
        let negatives = positives
            .iter()
            .map(|p| {
                let swap = if self.skew[p.relation as usize] { self.config.skew_prob } else { 0.0 };
                sample_negatives(p, n, self.config.neg_ratio, swap, &mut self.sample_rng)
            })
            .collect();
        Batch {
            positives: positives.to_vec(),
            negatives,
        }
    }

    /// Forward, backward and update on one batch; returns the batch loss.
    pub fn step(&mut self, batch: &Batch, tau: f64) -> Result<f64> {
        let mut relations: Vec<u32> = batch.positives.iter().map(|p| p.relation).collect();
        relations.sort_unstable();
        relations.dedup();
        let tau_t = T::lit(tau);
        let noise_len = self.model.relations.params_per_relation();
        let mut realized = HashMap::with_capacity(relations.len());
        for &r in &relations {
            let noise: Vec<T> = match self.config.mode {
                Mode::Gumbel => param::sample_gumbel(&mut self.noise_rng, noise_len),
                Mode::Ste => Vec::new(),
            };
            realized.insert(r, self.model.relations.realize_train(r as usize, &noise, tau_t)?);
        }
        let grads = batch_objective(&self.model, batch, &realized, self.objective())?;
        if !grads.loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss {} at epoch {} (lr {}, tau {tau})",
                grads.loss, self.epoch, self.config.learning_rate
            )));
        }
        let dim = self.model.dim();
        for (slot, &id) in grads.entity_ids.iter().enumerate() {
            self.entity_opt.step_row(
                self.model.entities.as_mut_slice(),
                id as usize,
                &grads.entity_grads[slot * dim..(slot + 1) * dim],
            );
        }
        for (&r, block_grads) in &grads.relation_grads {
            let g = self
                .model
                .relations
                .backward(r as usize, &realized[&r], block_grads, tau_t)?;
            self.relation_opt
                .step_row(self.model.relations.values_mut(), r as usize, &g);
        }
        Ok(grads.loss)
    }

    /// Runs one epoch over the shuffled training split.
    pub fn run_epoch(&mut self) -> Result<EpochStats> {
        let tau = self.config.temperature(self.epoch);
        self.order.shuffle(&mut self.sample_rng);
        let order = std::mem::take(&mut self.order);
        let mut total = 0.0;
        for chunk in order.chunks(self.config.batch_size) {
            let positives: Vec<Triple> = chunk.iter().map(|&i| self.store.train()[i]).collect();
            let batch = self.make_batch(&positives);
            total += self.step(&batch, tau)?;
        }
        self.order = order;
        let stats = EpochStats {
            epoch: self.epoch,
            loss: total,
            mean_loss: total / self.order.len().max(1) as f64,
            tau,
            valid_mrr: None,
        };
        self.epoch += 1;
        Ok(stats)
    }

    /// Filtered MRR of the current (hard) model on the capped validation sample.
    pub fn validation_mrr(&self) -> Result<Option<f64>> {
        if self.valid_sample.is_empty() {
            return Ok(None);
        }
        let report = eval::evaluate_triples(
            &self.model,
            self.store,
            &self.valid_sample,
            &EvalOptions::default(),
        )?;
        Ok(Some(report.mrr))
    }
}

/// Trains for `config.epochs` epochs, validating every `eval_every` epochs
/// and after the last one. `on_epoch` sees every log line as it is produced.
pub fn train_with<T: Real>(
    store: &TripleStore,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome<T>> {
    let mut trainer = Trainer::<T>::new(store, config.clone())?;
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, Model<T>)> = None;
    for epoch in 0..config.epochs {
        let mut stats = trainer.run_epoch()?;
        let last = epoch + 1 == config.epochs;
        let due = config.eval_every > 0 && ((epoch + 1) % config.eval_every == 0 || last);
        if due {
            stats.valid_mrr = trainer.validation_mrr()?;
            if let Some(mrr) = stats.valid_mrr {
                if best.as_ref().is_none_or(|(_, b, _)| mrr > *b) {
                    best = Some((epoch, mrr, trainer.model().clone()));
                }
            }
        }
        log::debug!("epoch {epoch}: loss {:.6} tau {:.4}", stats.loss, stats.tau);
        on_epoch(&stats);
        log.push(stats);
    }
    let model = trainer.into_model();
    let (best_epoch, best_valid_mrr, best) = match best {
        Some((e, m, b)) => (Some(e), Some(m), b),
        None => (None, None, model.clone()),
    };
    Ok(TrainOutcome {
        model,
        best,
        best_epoch,
        best_valid_mrr,
        log,
    })
}

pub fn train<T: Real>(store: &TripleStore, config: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_with(store, config, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::NamedTriple;

    fn toy_store() -> TripleStore {
        let n = |h: &str, r: &str, t: &str| -> NamedTriple { (h.into(), r.into(), t.into()) };
        TripleStore::from_named(
            &[n("a", "r", "b"), n("b", "r", "c"), n("c", "s", "a"), n("a", "s", "c")],
            &[n("a", "r", "c")],
            &[n("b", "s", "a")],
        )
    }

    #[test]
    fn temperature_schedule() {
        let c = TrainConfig::default();
        assert_eq!(c.temperature(0), 3.0);
        assert!((c.temperature(1000) - 3.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((c.temperature(1000) - 1.1036).abs() < 1e-4);
        assert_eq!(c.temperature(1_000_000), 0.5);
    }

    #[test]
    fn logistic_loss_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!((logistic_loss(0.0f64, 1) - ln2).abs() < 1e-15);
        assert!((logistic_loss(0.0f64, -1) - ln2).abs() < 1e-15);
        assert!((logistic_loss(5.0f64, 1) - 0.006715).abs() < 1e-6);
        assert!(logistic_loss(1e4f32, -1).is_finite());
    }

    #[test]
    fn component_margin_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!((component_margin_loss(&[0.0f64; 3]) - 3.0 * ln2).abs() < 1e-15);
        assert_eq!(component_margin_loss(&[f64::INFINITY; 2]), 0.0);
        let two = component_margin_loss(&[0.0f64, 5.0]);
        assert!((two - (ln2 + (1.0f64 + (-5.0f64).exp()).ln())).abs() < 1e-15);
    }

    #[test]
    fn component_regularizer_requires_pairs() {
        let store = toy_store();
        let mut rng = seeded_rng(0, 0);
        let model = Model::<f64>::random(Mode::Gumbel, 4, 4, 3, 2, &mut rng).unwrap();
        let blocks = model.eval_blocks(None).unwrap();
        let p = store.train()[0];
        assert!(component_regularizer(&model, &blocks, &[p], &[]).is_err());
        let same = component_regularizer(&model, &blocks, &[p], &[p]).unwrap();
        assert!((same - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn negatives_corrupt_one_side() {
        let mut rng = seeded_rng(1, 1);
        let p = Triple::new(0, 0, 1);
        for _ in 0..200 {
            let negs = sample_negatives(&p, 5, 6, 0.0, &mut rng);
            assert_eq!(negs.len(), 6);
            for n in negs {
                assert_eq!(n.relation, 0);
                assert!(n.head == p.head || n.tail == p.tail);
            }
        }
    }

    #[test]
    fn swap_frequency() {
        let mut rng = seeded_rng(2, 1);
        let p = Triple::new(0, 0, 1);
        let trials = 10_000;
        let swapped = (0..trials)
            .filter(|_| {
                let negs = sample_negatives(&p, 1000, 2, 0.5, &mut rng);
                negs[0] == Triple::new(1, 0, 0)
            })
            .count();
        let freq = swapped as f64 / trials as f64;
        // chance collisions of an ordinary corruption with the swap are ~1e-6
        assert!((freq - 0.5).abs() < 0.02, "swap frequency {freq}");
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { k: 5, ..Default::default() },
            TrainConfig { k: 8, mode: Mode::Ste, ..Default::default() },
            TrainConfig { dim: 3, ..Default::default() },
            TrainConfig { neg_ratio: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { skew_prob: 1.5, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        let json = serde_json::to_value(TrainConfig::default()).unwrap();
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), TrainConfig::KEYS.len());
        for k in TrainConfig::KEYS {
            assert!(json.get(k).is_some(), "{k}");
        }
    }

    #[test]
    fn unknown_skew_relation_is_rejected() {
        let store = toy_store();
        let config = TrainConfig {
            skew_relations: vec!["nope".into()],
            ..Default::default()
        };
        assert!(matches!(
            Trainer::<f32>::new(&store, config),
            Err(Error::UnknownRelation(_))
        ));
    }

    #[test]
    fn zero_epochs_keep_initialization() {
        let store = toy_store();
        let config = TrainConfig { epochs: 0, dim: 4, ..Default::default() };
        let outcome = train::<f32>(&store, &config).unwrap();
        let init = Trainer::<f32>::new(&store, config).unwrap().into_model();
        assert_eq!(outcome.model, init);
        assert_eq!(outcome.best, init);
        assert!(outcome.log.is_empty());
    }
}
