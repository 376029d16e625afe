//! Filtered link-prediction metrics: MRR and HITS@{1, 3, 10}.
//!
//! Every triple yields a tail query `(h, r, ?)` and a head query `(?, r, t)`.
//! Other known answers (from any split) are removed before ranking, and ties
//! are resolved with the mid-rank rule
//! `rank = 1 + #{score > s*} + ⌊#{score = s*, e ≠ answer} / 2⌋`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Side, Split, Triple, TripleStore};
use crate::error::{Error, Result};
use crate::model::{score_all_heads, score_all_tails, Model};
use crate::real::Real;

pub const HITS_AT: [usize; 3] = [1, 3, 10];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Score Gumbel relations with the noise-free softmax at this temperature
    /// instead of the argmax element.
    pub soft_tau: Option<f64>,
    /// Remove other known answers before ranking.
    pub filtered: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            soft_tau: None,
            filtered: true,
        }
    }
}

/// Mid-rank of `scores[answer]` among all entities not listed in `excluded`.
/// `excluded` must not contain `answer`.
pub fn rank<T: Real>(scores: &[T], answer: usize, excluded: &[u32]) -> usize {
    let target = scores[answer];
    let (mut greater, mut equal) = (0usize, 0usize);
    for &s in scores {
        if s > target {
            greater += 1;
        } else if s == target {
            equal += 1;
        }
    }
    // the answer itself
    equal -= 1;
    for &e in excluded {
        let s = scores[e as usize];
        if s > target {
            greater -= 1;
        } else if s == target {
            equal -= 1;
        }
    }
    1 + greater + equal / 2
}

/// Aggregated metrics over a set of queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub queries: usize,
    pub mrr: f64,
    pub hits_at: BTreeMap<usize, f64>,
}

impl Metrics {
    pub fn from_ranks(ranks: &[usize]) -> Self {
        let n = ranks.len();
        let denom = n.max(1) as f64;
        let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / denom;
        let hits_at = HITS_AT
            .iter()
            .map(|&k| (k, ranks.iter().filter(|&&r| r <= k).count() as f64 / denom))
            .collect();
        Self {
            queries: n,
            mrr,
            hits_at,
        }
    }

    pub fn hits(&self, k: usize) -> f64 {
        self.hits_at.get(&k).copied().unwrap_or(f64::NAN)
    }
}

/// Rank of one query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRank {
    pub triple: Triple,
    pub side: Side,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub triples: usize,
    pub queries: usize,
    pub mrr: f64,
    pub hits_at: BTreeMap<usize, f64>,
    pub per_relation: BTreeMap<String, Metrics>,
}

impl EvalReport {
    pub fn from_ranks(store: &TripleStore, ranks: &[QueryRank]) -> Self {
        let all: Vec<usize> = ranks.iter().map(|q| q.rank).collect();
        let overall = Metrics::from_ranks(&all);
        let mut grouped: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for q in ranks {
            let name = store
                .relations()
                .name(q.triple.relation)
                .unwrap_or("?")
                .to_owned();
            grouped.entry(name).or_default().push(q.rank);
        }
        Self {
            triples: ranks.len() / 2,
            queries: ranks.len(),
            mrr: overall.mrr,
            hits_at: overall.hits_at,
            per_relation: grouped
                .into_iter()
                .map(|(k, v)| (k, Metrics::from_ranks(&v)))
                .collect(),
        }
    }

    pub fn hits(&self, k: usize) -> f64 {
        self.hits_at.get(&k).copied().unwrap_or(f64::NAN)
    }

    /// `relation,queries,mrr,hits@1,hits@3,hits@10` table.
    pub fn per_relation_csv(&self) -> String {
        let mut out = String::from("relation,queries,mrr,hits@1,hits@3,hits@10\n");
        for (name, m) in &self.per_relation {
            let _ = writeln!(
                out,
                "{name},{},{:.6},{:.6},{:.6},{:.6}",
                m.queries,
                m.mrr,
                m.hits(1),
                m.hits(3),
                m.hits(10)
            );
        }
        out
    }
}

/// Ranks of the head and tail queries of every triple, in input order.
pub fn rank_triples<T: Real>(
    model: &Model<T>,
    store: &TripleStore,
    triples: &[Triple],
    options: &EvalOptions,
) -> Result<Vec<QueryRank>> {
    if model.num_entities() != store.num_entities() || model.num_relations() != store.num_relations() {
        return Err(Error::DictionaryMismatch(format!(
            "model has {} entities / {} relations, dataset has {} / {}",
            model.num_entities(),
            model.num_relations(),
            store.num_entities(),
            store.num_relations()
        )));
    }
    let blocks = model.eval_blocks(options.soft_tau.map(T::lit))?;
    let per_triple: Vec<Result<[QueryRank; 2]>> = triples
        .par_iter()
        .map(|tr| {
            let b = &blocks[tr.relation as usize];
            let h = model.entities.row(tr.head as usize);
            let t = model.entities.row(tr.tail as usize);
            let tails = score_all_tails(h, b, &model.entities)?;
            let heads = score_all_heads(b, t, &model.entities)?;
            let excluded = |side| {
                if options.filtered {
                    store.filtered_candidates(tr, side)
                } else {
                    Vec::new()
                }
            };
            Ok([
                QueryRank {
                    triple: *tr,
                    side: Side::Head,
                    rank: rank(&heads, tr.head as usize, &excluded(Side::Head)),
                },
                QueryRank {
                    triple: *tr,
                    side: Side::Tail,
                    rank: rank(&tails, tr.tail as usize, &excluded(Side::Tail)),
                },
            ])
        })
        .collect();
    let mut ranks = Vec::with_capacity(2 * triples.len());
    for pair in per_triple {
        ranks.extend(pair?);
    }
    Ok(ranks)
}

pub fn evaluate_triples<T: Real>(
    model: &Model<T>,
    store: &TripleStore,
    triples: &[Triple],
    options: &EvalOptions,
) -> Result<EvalReport> {
    let ranks = rank_triples(model, store, triples, options)?;
    Ok(EvalReport::from_ranks(store, &ranks))
}

/// Metrics over one split of `store`.
pub fn evaluate<T: Real>(
    split: Split,
    model: &Model<T>,
    store: &TripleStore,
    options: &EvalOptions,
) -> Result<EvalReport> {
    evaluate_triples(model, store, store.split(split), options)
}
