//! Entity embeddings and the blockwise bilinear score `φ(h, r, t) = hᵀ R t`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dataset::Triple;
use crate::error::{Error, Result};
use crate::group::BlockDiagonalRelation;
use crate::mat2::{self, Mat2};
use crate::param::{Mode, RelationParams};
use crate::real::Real;

/// Dense `|E| × 2L` table of entity vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityTable<T> {
    dim: usize,
    rows: Vec<T>,
}

impl<T: Real> EntityTable<T> {
    pub fn from_rows(dim: usize, rows: Vec<T>) -> Result<Self> {
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::domain(format!(
                "embedding width must be a positive even number, got {dim}"
            )));
        }
        if rows.len() % dim != 0 {
            return Err(Error::domain(format!(
                "{} values do not form rows of width {dim}",
                rows.len()
            )));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("entity embeddings must be finite"));
        }
        Ok(Self { dim, rows })
    }

    pub fn zeros(num_entities: usize, dim: usize) -> Result<Self> {
        Self::from_rows(dim, vec![T::zero(); num_entities * dim])
    }

    /// Rows drawn i.i.d. from `N(0, (1/√dim)²)`.
    pub fn random<R: Rng + ?Sized>(num_entities: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt())
            .map_err(|e| Error::domain(e.to_string()))?;
        let rows = (0..num_entities * dim)
            .map(|_| T::lit(normal.sample(rng)))
            .collect();
        Self::from_rows(dim, rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_blocks(&self) -> usize {
        self.dim / 2
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, e: usize) -> &[T] {
        &self.rows[e * self.dim..(e + 1) * self.dim]
    }

    pub fn row_mut(&mut self, e: usize) -> &mut [T] {
        &mut self.rows[e * self.dim..(e + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.rows
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.rows
    }
}

#[inline]
fn pair<T: Copy>(v: &[T], l: usize) -> [T; 2] {
    [v[2 * l], v[2 * l + 1]]
}

fn check_dims<T>(h: &[T], blocks: &[Mat2<T>], t: &[T]) -> Result<()> {
    if h.len() != 2 * blocks.len() || t.len() != 2 * blocks.len() {
        return Err(Error::domain(format!(
            "dimension mismatch: h has {}, t has {}, relation has {} blocks",
            h.len(),
            t.len(),
            blocks.len()
        )));
    }
    Ok(())
}

/// `Σ_l h^(l)ᵀ R^(l) t^(l)`; never forms the dense matrix.
pub fn score<T: Real>(h: &[T], blocks: &[Mat2<T>], t: &[T]) -> Result<T> {
    check_dims(h, blocks, t)?;
    Ok(score_unchecked(h, blocks, t))
}

#[inline]
pub(crate) fn score_unchecked<T: Real>(h: &[T], blocks: &[Mat2<T>], t: &[T]) -> T {
    blocks
        .iter()
        .enumerate()
        .map(|(l, b)| mat2::bilinear(pair(h, l), b, pair(t, l)))
        .sum()
}

/// Per-block terms `h^(l)ᵀ R^(l) t^(l)`.
pub fn component_scores<T: Real>(h: &[T], blocks: &[Mat2<T>], t: &[T]) -> Result<Vec<T>> {
    check_dims(h, blocks, t)?;
    Ok(blocks
        .iter()
        .enumerate()
        .map(|(l, b)| mat2::bilinear(pair(h, l), b, pair(t, l)))
        .collect())
}

/// `Rᵀ h`, blockwise.
pub fn transpose_apply<T: Real>(blocks: &[Mat2<T>], h: &[T]) -> Vec<T> {
    blocks
        .iter()
        .enumerate()
        .flat_map(|(l, b)| mat2::apply_transpose(b, pair(h, l)))
        .collect()
}

/// `R t`, blockwise.
pub fn apply<T: Real>(blocks: &[Mat2<T>], t: &[T]) -> Vec<T> {
    blocks
        .iter()
        .enumerate()
        .flat_map(|(l, b)| mat2::apply(b, pair(t, l)))
        .collect()
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Scores of `(h, r, e)` for every entity `e`.
pub fn score_all_tails<T: Real>(
    h: &[T],
    blocks: &[Mat2<T>],
    entities: &EntityTable<T>,
) -> Result<Vec<T>> {
    if h.len() != entities.dim() || 2 * blocks.len() != entities.dim() {
        return Err(Error::domain("dimension mismatch between query and entity table"));
    }
    let query = transpose_apply(blocks, h);
    Ok(entities
        .as_slice()
        .chunks_exact(entities.dim())
        .map(|row| dot(&query, row))
        .collect())
}

/// Scores of `(e, r, t)` for every entity `e`.
pub fn score_all_heads<T: Real>(
    blocks: &[Mat2<T>],
    t: &[T],
    entities: &EntityTable<T>,
) -> Result<Vec<T>> {
    if t.len() != entities.dim() || 2 * blocks.len() != entities.dim() {
        return Err(Error::domain("dimension mismatch between query and entity table"));
    }
    let query = apply(blocks, t);
    Ok(entities
        .as_slice()
        .chunks_exact(entities.dim())
        .map(|row| dot(row, &query))
        .collect())
}

/// `hᵀRt + ½(‖Rᵀh − t‖² − hᵀh − tᵀt)`, which vanishes for orthogonal `R`.
pub fn distance_identity_residual<T: Real>(h: &[T], blocks: &[Mat2<T>], t: &[T]) -> Result<T> {
    let phi = score(h, blocks, t)?;
    let rh = transpose_apply(blocks, h);
    let dist: T = rh.iter().zip(t).map(|(&a, &b)| (a - b) * (a - b)).sum();
    let half = T::lit(0.5);
    Ok(phi + half * (dist - dot(h, h) - dot(t, t)))
}

/// Gradients of `φ` w.r.t. `h`, `t` and each block.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGradient<T> {
    pub head: Vec<T>,
    pub tail: Vec<T>,
    pub blocks: Vec<Mat2<T>>,
}

/// `∂φ/∂h = R t`, `∂φ/∂t = Rᵀ h`, `∂φ/∂R^(l) = h^(l) t^(l)ᵀ`.
pub fn score_gradient<T: Real>(h: &[T], blocks: &[Mat2<T>], t: &[T]) -> Result<ScoreGradient<T>> {
    check_dims(h, blocks, t)?;
    let block_grads = blocks
        .iter()
        .enumerate()
        .map(|(l, _)| {
            let (hl, tl) = (pair(h, l), pair(t, l));
            [[hl[0] * tl[0], hl[0] * tl[1]], [hl[1] * tl[0], hl[1] * tl[1]]]
        })
        .collect();
    Ok(ScoreGradient {
        head: apply(blocks, t),
        tail: transpose_apply(blocks, h),
        blocks: block_grads,
    })
}

/// Scores for a list of triples.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBatch<T> {
    pub triples: Vec<Triple>,
    pub scores: Vec<T>,
}

/// Entity table plus relation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub entities: EntityTable<T>,
    pub relations: RelationParams<T>,
}

impl<T: Real> Model<T> {
    pub fn new(entities: EntityTable<T>, relations: RelationParams<T>) -> Result<Self> {
        if entities.num_blocks() != relations.num_blocks() {
            return Err(Error::domain(format!(
                "entity width {} does not match {} relation blocks",
                entities.dim(),
                relations.num_blocks()
            )));
        }
        Ok(Self {
            entities,
            relations,
        })
    }

    pub fn random<R: Rng + ?Sized>(
        mode: Mode,
        order: u16,
        dim: usize,
        num_entities: usize,
        num_relations: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let entities = EntityTable::random(num_entities, dim, rng)?;
        let relations = RelationParams::random(mode, order, dim / 2, num_relations, rng)?;
        Self::new(entities, relations)
    }

    pub fn dim(&self) -> usize {
        self.entities.dim()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.num_relations()
    }

    pub fn hard_relation(&self, r: usize) -> Result<BlockDiagonalRelation> {
        self.relations.hard(r)
    }

    /// Evaluation blocks for every relation (see [`RelationParams::eval_blocks`]).
    pub fn eval_blocks(&self, soft_tau: Option<T>) -> Result<Vec<Vec<Mat2<T>>>> {
        (0..self.num_relations())
            .map(|r| self.relations.eval_blocks(r, soft_tau))
            .collect()
    }

    /// Scores with hard relations.
    pub fn score_batch(&self, triples: &[Triple]) -> Result<ScoreBatch<T>> {
        let blocks = self.eval_blocks(None)?;
        for tr in triples {
            if tr.head as usize >= self.num_entities()
                || tr.tail as usize >= self.num_entities()
                || tr.relation as usize >= self.num_relations()
            {
                return Err(Error::domain(format!("triple {tr:?} out of range for model")));
            }
        }
        let scores = triples
            .par_iter()
            .map(|tr| {
                score_unchecked(
                    self.entities.row(tr.head as usize),
                    &blocks[tr.relation as usize],
                    self.entities.row(tr.tail as usize),
                )
            })
            .collect();
        Ok(ScoreBatch {
            triples: triples.to_vec(),
            scores,
        })
    }
}
