//! Case-study tooling on discretized relations: inversion and composition
//! products, their diagonal histograms, and per-relation component counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{BlockDiagonalRelation, DihedralElement, Kind, Symmetry};
use crate::model::Model;
use crate::real::Real;

/// Named hard relations, as produced by argmax / sign discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct HardRelations {
    order: u16,
    names: Vec<String>,
    relations: Vec<BlockDiagonalRelation>,
}

/// JSON form of [`HardRelations`]: blocks are `(kind, m)` pairs with kind
/// `0` = rotation and `1` = reflection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationExport {
    pub k: u16,
    pub num_blocks: usize,
    pub relations: Vec<NamedBlocks>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBlocks {
    pub name: String,
    pub blocks: Vec<(u8, u16)>,
}

impl HardRelations {
    pub fn new(names: Vec<String>, relations: Vec<BlockDiagonalRelation>) -> Result<Self> {
        if names.len() != relations.len() {
            return Err(Error::domain("one name per relation required"));
        }
        let order = relations.first().map(|r| r.order()).unwrap_or(4);
        let width = relations.first().map(|r| r.num_blocks()).unwrap_or(0);
        if relations.iter().any(|r| r.order() != order || r.num_blocks() != width) {
            return Err(Error::domain("all relations must share K and L"));
        }
        Ok(Self {
            order,
            names,
            relations,
        })
    }

    pub fn from_model<T: Real>(model: &Model<T>, names: &[String]) -> Result<Self> {
        if names.len() != model.num_relations() {
            return Err(Error::domain(format!(
                "{} relation names for {} relations",
                names.len(),
                model.num_relations()
            )));
        }
        let relations = (0..model.num_relations())
            .map(|r| model.hard_relation(r))
            .collect::<Result<_>>()?;
        Self::new(names.to_vec(), relations)
    }

    pub fn order(&self) -> u16 {
        self.order
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> Result<&BlockDiagonalRelation> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.relations[i])
            .ok_or_else(|| Error::UnknownRelation(name.to_owned()))
    }

    pub fn to_export(&self) -> RelationExport {
        RelationExport {
            k: self.order,
            num_blocks: self.relations.first().map_or(0, |r| r.num_blocks()),
            relations: self
                .names
                .iter()
                .zip(&self.relations)
                .map(|(name, r)| NamedBlocks {
                    name: name.clone(),
                    blocks: r.blocks().iter().map(|b| (b.kind().tag(), b.index())).collect(),
                })
                .collect(),
        }
    }

    pub fn from_export(export: &RelationExport) -> Result<Self> {
        let mut names = Vec::with_capacity(export.relations.len());
        let mut relations = Vec::with_capacity(export.relations.len());
        for r in &export.relations {
            if r.blocks.len() != export.num_blocks {
                return Err(Error::domain(format!(
                    "relation `{}` has {} blocks, expected {}",
                    r.name,
                    r.blocks.len(),
                    export.num_blocks
                )));
            }
            let blocks = r
                .blocks
                .iter()
                .map(|&(kind, m)| DihedralElement::new(export.k, Kind::from_tag(kind)?, m))
                .collect::<Result<_>>()?;
            names.push(r.name.clone());
            relations.push(BlockDiagonalRelation::new(blocks)?);
        }
        Self::new(names, relations)
    }
}

/// Diagonal entries of a relation product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalHistogram {
    pub relations: Vec<String>,
    /// Human-readable product, e.g. `parent·spouse·parent_in_law⁻¹`.
    pub label: String,
    /// `2L` diagonal values in block order.
    pub diagonal: Vec<f64>,
    /// Distinct diagonal values and their counts, ascending.
    pub value_counts: Vec<(f64, usize)>,
    pub fraction_plus_one: f64,
}

const VALUE_TOL: f64 = 1e-9;

pub fn diagonal_histogram(relations: Vec<String>, label: String, product: &BlockDiagonalRelation) -> DiagonalHistogram {
    let diagonal = product.diagonal();
    let mut value_counts: Vec<(f64, usize)> = Vec::new();
    let mut sorted = diagonal.clone();
    sorted.sort_by(f64::total_cmp);
    for v in sorted {
        match value_counts.last_mut() {
            Some((last, count)) if (v - *last).abs() < VALUE_TOL => *count += 1,
            _ => value_counts.push((v, 1)),
        }
    }
    let ones = diagonal.iter().filter(|&&v| (v - 1.0).abs() < VALUE_TOL).count();
    DiagonalHistogram {
        relations,
        label,
        fraction_plus_one: ones as f64 / diagonal.len().max(1) as f64,
        diagonal,
        value_counts,
    }
}

/// `R₁·R₂` for a presumed inverse pair.
pub fn inversion_product(rels: &HardRelations, r1: &str, r2: &str) -> Result<DiagonalHistogram> {
    let product = rels.get(r1)?.product(rels.get(r2)?)?;
    Ok(diagonal_histogram(
        vec![r1.to_owned(), r2.to_owned()],
        format!("{r1}·{r2}"),
        &product,
    ))
}

/// `R₁·R₂·R₃⁻¹` and the order-swapped `R₂·R₁·R₃⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    pub correct: DiagonalHistogram,
    pub swapped: DiagonalHistogram,
}

pub fn composition_product(
    rels: &HardRelations,
    r1: &str,
    r2: &str,
    r3: &str,
) -> Result<CompositionReport> {
    let (a, b, c) = (rels.get(r1)?, rels.get(r2)?, rels.get(r3)?);
    let c_inv = c.inverse();
    let names = vec![r1.to_owned(), r2.to_owned(), r3.to_owned()];
    let correct = a.product(b)?.product(&c_inv)?;
    let swapped = b.product(a)?.product(&c_inv)?;
    Ok(CompositionReport {
        correct: diagonal_histogram(names.clone(), format!("{r1}·{r2}·{r3}⁻¹"), &correct),
        swapped: diagonal_histogram(names, format!("{r2}·{r1}·{r3}⁻¹"), &swapped),
    })
}

/// Counts of each enumerated group element over a relation's blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentHistogram {
    pub relation: String,
    /// Element labels in enumeration order (`O_K^(m)` then `F_K^(m)`).
    pub labels: Vec<String>,
    pub counts: Vec<usize>,
    pub symmetric: usize,
    pub skew_symmetric: usize,
    pub neither: usize,
}

impl ComponentHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn skew_fraction(&self) -> f64 {
        self.skew_symmetric as f64 / self.total().max(1) as f64
    }

    pub fn symmetric_fraction(&self) -> f64 {
        self.symmetric as f64 / self.total().max(1) as f64
    }
}

pub fn component_histogram(rels: &HardRelations, r: &str) -> Result<ComponentHistogram> {
    let relation = rels.get(r)?;
    let width = 2 * rels.order() as usize;
    let mut counts = vec![0; width];
    let (mut symmetric, mut skew_symmetric, mut neither) = (0, 0, 0);
    for b in relation.blocks() {
        counts[b.enumeration_index()] += 1;
        match b.classify() {
            Symmetry::Symmetric => symmetric += 1,
            Symmetry::SkewSymmetric => skew_symmetric += 1,
            Symmetry::Neither => neither += 1,
        }
    }
    let labels = (0..width)
        .map(|k| DihedralElement::from_enumeration(rels.order(), k).map(|e| e.to_string()))
        .collect::<Result<_>>()?;
    Ok(ComponentHistogram {
        relation: r.to_owned(),
        labels,
        counts,
        symmetric,
        skew_symmetric,
        neither,
    })
}

/// One row per diagonal entry: `relation_pair,block_index,position,value`.
pub fn diagonal_csv(histograms: &[DiagonalHistogram]) -> String {
    let mut out = String::from("relation_pair,block_index,position,value\n");
    for h in histograms {
        for (i, v) in h.diagonal.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", h.label, i / 2, i % 2, v);
        }
    }
    out
}

pub fn component_csv(histograms: &[ComponentHistogram]) -> String {
    let mut out = String::from("relation,component,count\n");
    for h in histograms {
        for (label, count) in h.labels.iter().zip(&h.counts) {
            let _ = writeln!(out, "{},{label},{count}", h.relation);
        }
    }
    out
}

/// Parses one comma-separated relation tuple per line (blank lines and `#`
/// comments skipped). Each tuple must have `arity` names known to `rels`.
pub fn parse_tuples(text: &str, arity: usize, rels: &HardRelations) -> Result<Vec<Vec<String>>> {
    let mut tuples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: "<tuples>".into(),
            line: i + 1,
            message,
        };
        let names: Vec<String> = line.split(',').map(|s| s.trim().to_owned()).collect();
        if names.len() != arity {
            return Err(parse_err(format!(
                "expected {arity} comma-separated relation names, found {}",
                names.len()
            )));
        }
        for n in &names {
            if rels.get(n).is_err() {
                return Err(parse_err(format!("unknown relation `{n}`")));
            }
        }
        tuples.push(names);
    }
    Ok(tuples)
}

/// Summary used by the CLI's JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSummary {
    pub label: String,
    pub fraction_plus_one: f64,
    pub value_counts: BTreeMap<String, usize>,
}

impl From<&DiagonalHistogram> for ProductSummary {
    fn from(h: &DiagonalHistogram) -> Self {
        Self {
            label: h.label.clone(),
            fraction_plus_one: h.fraction_plus_one,
            value_counts: h
                .value_counts
                .iter()
                .map(|(v, c)| (format!("{v:.6}"), *c))
                .collect(),
        }
    }
}
