//! Trainable parametrizations of block-diagonal dihedral relations.
//!
//! Two modes are supported:
//!
//! - **Gumbel**: each block holds `2K` logits `s`; training uses the soft
//!   block `Σ_k c_k D_k` with `c = softmax((s + q) / τ)` and Gumbel noise `q`.
//!   Evaluation takes the argmax element.
//! - **STE**: for `K ∈ {4, 6}` each block holds real scalars whose signs give
//!   the binary variables `x, y, (z), α`. The block is
//!   `[[λ, -αγ], [γ, αλ]]` with `λ, γ` polynomial in the binaries, and the
//!   gradient passes through `sign` unchanged.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::distr::{Distribution, Open01, Uniform};
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{BlockDiagonalRelation, DihedralElement, DihedralGroup, Kind};
use crate::mat2::{self, Mat2};
use crate::real::Real;

/// Standard deviation of the Gumbel logit initialisation.
pub const LOGIT_INIT_STD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Gumbel,
    Ste,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Gumbel => "gumbel",
            Mode::Ste => "ste",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gumbel" => Ok(Mode::Gumbel),
            "ste" => Ok(Mode::Ste),
            other => Err(Error::domain(format!(
                "unknown parametrization mode `{other}` (expected gumbel or ste)"
            ))),
        }
    }
}

/// Number of raw parameters per block.
pub fn values_per_block(mode: Mode, order: u16) -> Result<usize> {
    crate::group::validate_order(order)?;
    match mode {
        Mode::Gumbel => Ok(2 * order as usize),
        Mode::Ste => ste_width(order),
    }
}

/// Binarization with `sign(0) = +1`.
pub fn sign<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        -T::one()
    }
}

/// Draws `n` i.i.d. standard Gumbel samples `-ln(-ln u)`, `u ~ U(0, 1)`.
pub fn sample_gumbel<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| {
            let u: f64 = Open01.sample(rng);
            T::lit(-(-u.ln()).ln())
        })
        .collect()
}

/// Soft Gumbel realization of one relation: assignment probabilities and blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftBlocks<T> {
    /// `L × 2K` probabilities, block-major.
    pub probs: Vec<T>,
    pub blocks: Vec<Mat2<T>>,
}

/// Softmax of `(s + q) / τ` per block and the resulting convex combination of
/// group matrices. `noise` may be empty, meaning `q = 0`.
pub fn gumbel_soft_blocks<T: Real>(
    group: &DihedralGroup,
    logits: &[T],
    noise: &[T],
    tau: T,
) -> Result<SoftBlocks<T>> {
    if !(tau > T::zero()) {
        return Err(Error::domain(format!("temperature must be positive, got {tau}")));
    }
    let width = group.len();
    if logits.is_empty() || logits.len() % width != 0 {
        return Err(Error::domain(format!(
            "logit vector of length {} is not a multiple of 2K = {width}",
            logits.len()
        )));
    }
    if !noise.is_empty() && noise.len() != logits.len() {
        return Err(Error::domain(format!(
            "noise length {} does not match logits length {}",
            noise.len(),
            logits.len()
        )));
    }
    let matrices: Vec<Mat2<T>> = group.matrices().iter().map(mat2::cast).collect();
    let mut probs = Vec::with_capacity(logits.len());
    let mut blocks = Vec::with_capacity(logits.len() / width);
    for (b, s) in logits.chunks_exact(width).enumerate() {
        let z: Vec<T> = s
            .iter()
            .enumerate()
            .map(|(k, &sk)| {
                let q = if noise.is_empty() { T::zero() } else { noise[b * width + k] };
                (sk + q) / tau
            })
            .collect();
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
        let total: T = exps.iter().copied().sum();
        let mut block = mat2::zero();
        for (k, e) in exps.iter().enumerate() {
            let c = *e / total;
            probs.push(c);
            for i in 0..2 {
                for j in 0..2 {
                    block[i][j] += c * matrices[k][i][j];
                }
            }
        }
        blocks.push(block);
    }
    Ok(SoftBlocks { probs, blocks })
}

/// Gradient of a loss w.r.t. the logits given its gradient w.r.t. the soft
/// blocks (noise held fixed).
pub fn gumbel_backward<T: Real>(
    group: &DihedralGroup,
    soft: &SoftBlocks<T>,
    grad_blocks: &[Mat2<T>],
    tau: T,
) -> Vec<T> {
    let width = group.len();
    let matrices: Vec<Mat2<T>> = group.matrices().iter().map(mat2::cast).collect();
    let mut grads = Vec::with_capacity(soft.probs.len());
    for (c, g_block) in soft.probs.chunks_exact(width).zip(grad_blocks) {
        let g: Vec<T> = matrices.iter().map(|d| mat2::inner(g_block, d)).collect();
        let mean: T = c.iter().zip(&g).map(|(&ck, &gk)| ck * gk).sum();
        grads.extend(c.iter().zip(&g).map(|(&ck, &gk)| ck * (gk - mean) / tau));
    }
    grads
}

/// Argmax element per block, no noise; ties go to the lowest index.
pub fn gumbel_hard_blocks<T: Real>(order: u16, logits: &[T]) -> Result<BlockDiagonalRelation> {
    let width = values_per_block(Mode::Gumbel, order)?;
    if logits.is_empty() || logits.len() % width != 0 {
        return Err(Error::domain(format!(
            "logit vector of length {} is not a multiple of 2K = {width}",
            logits.len()
        )));
    }
    let blocks = logits
        .chunks_exact(width)
        .map(|s| {
            let mut best = 0;
            for k in 1..width {
                if s[k] > s[best] {
                    best = k;
                }
            }
            DihedralElement::from_enumeration(order, best)
        })
        .collect::<Result<_>>()?;
    BlockDiagonalRelation::new(blocks)
}

/// Raw values per STE block: `[x, y, α]` for `K = 4`, `[x, y, z, α]` for `K = 6`.
pub fn ste_width(order: u16) -> Result<usize> {
    match order {
        4 => Ok(3),
        6 => Ok(4),
        other => Err(Error::domain(format!(
            "binary STE parametrization supports K in {{4, 6}}, got {other}"
        ))),
    }
}

/// Binarized `(x, y, z, α)` of one block; `z` is `+1` for `K = 4`.
fn ste_binaries<T: Real>(order: u16, raw: &[T]) -> (T, T, T, T) {
    match order {
        4 => (sign(raw[0]), sign(raw[1]), T::one(), sign(raw[2])),
        _ => (sign(raw[0]), sign(raw[1]), sign(raw[2]), sign(raw[3])),
    }
}

/// `(λ, γ)` from binaries.
fn ste_cos_sin<T: Real>(order: u16, x: T, y: T, z: T) -> (T, T) {
    let one = T::one();
    match order {
        4 => ((x + y) / T::lit(2.0), (x - y) / T::lit(2.0)),
        _ => {
            let four = T::lit(4.0);
            let root3 = T::lit(3f64.sqrt());
            (y * (T::lit(3.0) - x) / four, z * (x + one) * root3 / four)
        }
    }
}

/// Forward pass: realized blocks from the signs of the raw values.
pub fn ste_blocks<T: Real>(order: u16, values: &[T]) -> Result<Vec<Mat2<T>>> {
    let width = ste_width(order)?;
    check_len(values.len(), width)?;
    Ok(values
        .chunks_exact(width)
        .map(|raw| {
            let (x, y, z, alpha) = ste_binaries(order, raw);
            let (lambda, gamma) = ste_cos_sin(order, x, y, z);
            [[lambda, -alpha * gamma], [gamma, alpha * lambda]]
        })
        .collect())
}

/// Backward pass with the identity straight-through estimator: the gradient
/// w.r.t. each raw value equals the gradient w.r.t. its binarized value.
pub fn ste_backward<T: Real>(order: u16, values: &[T], grad_blocks: &[Mat2<T>]) -> Result<Vec<T>> {
    let width = ste_width(order)?;
    check_len(values.len(), width)?;
    if grad_blocks.len() * width != values.len() {
        return Err(Error::domain("gradient block count does not match parameters"));
    }
    let mut grads = Vec::with_capacity(values.len());
    for (raw, g) in values.chunks_exact(width).zip(grad_blocks) {
        let (x, y, z, alpha) = ste_binaries(order, raw);
        let (lambda, gamma) = ste_cos_sin(order, x, y, z);
        let d_lambda = g[0][0] + alpha * g[1][1];
        let d_gamma = g[1][0] - alpha * g[0][1];
        let d_alpha = -gamma * g[0][1] + lambda * g[1][1];
        match order {
            4 => {
                let half = T::lit(0.5);
                grads.push(half * (d_lambda + d_gamma));
                grads.push(half * (d_lambda - d_gamma));
            }
            _ => {
                let four = T::lit(4.0);
                let root3 = T::lit(3f64.sqrt());
                grads.push(-y / four * d_lambda + z * root3 / four * d_gamma);
                grads.push((T::lit(3.0) - x) / four * d_lambda);
                grads.push((x + T::one()) * root3 / four * d_gamma);
            }
        }
        grads.push(d_alpha);
    }
    Ok(grads)
}

fn ste_element(order: u16, x: f64, y: f64, z: f64, alpha: f64) -> Result<DihedralElement> {
    let (lambda, gamma) = ste_cos_sin(order, x, y, z);
    let step = 2.0 * std::f64::consts::PI / order as f64;
    let m = ((gamma.atan2(lambda) / step).round() as i64).rem_euclid(order as i64) as u16;
    let kind = if alpha > 0.0 { Kind::Rotation } else { Kind::Reflection };
    DihedralElement::new(order, kind, m)
}

/// Group elements realized by the current signs.
pub fn ste_hard_blocks<T: Real>(order: u16, values: &[T]) -> Result<BlockDiagonalRelation> {
    let width = ste_width(order)?;
    check_len(values.len(), width)?;
    let blocks = values
        .chunks_exact(width)
        .map(|raw| {
            let (x, y, z, alpha) = ste_binaries(order, raw);
            ste_element(order, x.as_f64(), y.as_f64(), z.as_f64(), alpha.as_f64())
        })
        .collect::<Result<_>>()?;
    BlockDiagonalRelation::new(blocks)
}

/// All distinct group elements reachable by some binary assignment.
pub fn ste_image(order: u16) -> Result<BTreeSet<DihedralElement>> {
    let width = ste_width(order)?;
    let mut image = BTreeSet::new();
    for bits in 0u32..(1 << width) {
        let raw: Vec<f64> = (0..width)
            .map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        image.extend(ste_hard_blocks(order, &raw)?.blocks().iter().copied());
    }
    Ok(image)
}

fn check_len(len: usize, width: usize) -> Result<()> {
    if len == 0 || len % width != 0 {
        return Err(Error::domain(format!(
            "parameter vector of length {len} is not a multiple of block width {width}"
        )));
    }
    Ok(())
}

/// Training-time realization of one relation, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub enum Realization<T> {
    Soft(SoftBlocks<T>),
    Binary(Vec<Mat2<T>>),
}

impl<T: Real> Realization<T> {
    pub fn blocks(&self) -> &[Mat2<T>] {
        match self {
            Realization::Soft(s) => &s.blocks,
            Realization::Binary(b) => b,
        }
    }
}

/// Raw parameters of every relation, stored contiguously in relation order.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationParams<T> {
    mode: Mode,
    group: DihedralGroup,
    num_blocks: usize,
    num_relations: usize,
    values: Vec<T>,
}

impl<T: Real> RelationParams<T> {
    pub fn from_values(
        mode: Mode,
        order: u16,
        num_blocks: usize,
        num_relations: usize,
        values: Vec<T>,
    ) -> Result<Self> {
        let width = values_per_block(mode, order)?;
        if num_blocks == 0 {
            return Err(Error::domain("relations need at least one block"));
        }
        if values.len() != width * num_blocks * num_relations {
            return Err(Error::domain(format!(
                "expected {} relation parameters, got {}",
                width * num_blocks * num_relations,
                values.len()
            )));
        }
        Ok(Self {
            mode,
            group: DihedralGroup::new(order)?,
            num_blocks,
            num_relations,
            values,
        })
    }

    /// Gumbel logits ~ N(0, 0.5²); STE reals ~ U(-1, 1) without 0.
    pub fn random<R: Rng + ?Sized>(
        mode: Mode,
        order: u16,
        num_blocks: usize,
        num_relations: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let n = values_per_block(mode, order)? * num_blocks * num_relations;
        let values = match mode {
            Mode::Gumbel => {
                let normal = Normal::new(0.0, LOGIT_INIT_STD).expect("valid normal");
                (0..n).map(|_| T::lit(normal.sample(rng))).collect()
            }
            Mode::Ste => {
                let uniform = Uniform::new(-1.0f64, 1.0).expect("valid range");
                (0..n)
                    .map(|_| loop {
                        let v = uniform.sample(rng);
                        if v != 0.0 {
                            break T::lit(v);
                        }
                    })
                    .collect()
            }
        };
        Self::from_values(mode, order, num_blocks, num_relations, values)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn order(&self) -> u16 {
        self.group.order()
    }

    pub fn group(&self) -> &DihedralGroup {
        &self.group
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Raw parameters per relation (`2LK` for Gumbel).
    pub fn params_per_relation(&self) -> usize {
        self.values.len() / self.num_relations.max(1)
    }

    pub fn relation(&self, r: usize) -> &[T] {
        let n = self.params_per_relation();
        &self.values[r * n..(r + 1) * n]
    }

    pub fn relation_mut(&mut self, r: usize) -> &mut [T] {
        let n = self.params_per_relation();
        &mut self.values[r * n..(r + 1) * n]
    }

    /// Discretized relation (argmax for Gumbel, signs for STE).
    pub fn hard(&self, r: usize) -> Result<BlockDiagonalRelation> {
        match self.mode {
            Mode::Gumbel => gumbel_hard_blocks(self.order(), self.relation(r)),
            Mode::Ste => ste_hard_blocks(self.order(), self.relation(r)),
        }
    }

    /// Training forward pass. `noise` is only used in Gumbel mode.
    pub fn realize_train(&self, r: usize, noise: &[T], tau: T) -> Result<Realization<T>> {
        match self.mode {
            Mode::Gumbel => {
                gumbel_soft_blocks(&self.group, self.relation(r), noise, tau).map(Realization::Soft)
            }
            Mode::Ste => ste_blocks(self.order(), self.relation(r)).map(Realization::Binary),
        }
    }

    pub fn backward(
        &self,
        r: usize,
        realization: &Realization<T>,
        grad_blocks: &[Mat2<T>],
        tau: T,
    ) -> Result<Vec<T>> {
        match realization {
            Realization::Soft(soft) => Ok(gumbel_backward(&self.group, soft, grad_blocks, tau)),
            Realization::Binary(_) => ste_backward(self.order(), self.relation(r), grad_blocks),
        }
    }

    /// Blocks used for scoring at evaluation time: hard by default, or the
    /// noise-free softmax at `soft_tau` for Gumbel relations.
    pub fn eval_blocks(&self, r: usize, soft_tau: Option<T>) -> Result<Vec<Mat2<T>>> {
        match (self.mode, soft_tau) {
            (Mode::Gumbel, Some(tau)) => {
                Ok(gumbel_soft_blocks(&self.group, self.relation(r), &[], tau)?.blocks)
            }
            _ => Ok(self.hard(r)?.block_matrices().iter().map(mat2::cast).collect()),
        }
    }
}
