//! Symbolic algebra of the dihedral group `D_K`.
//!
//! Elements are stored as `(kind, m)` and composed with index arithmetic
//! modulo `K`; floating point matrices are only produced on demand. With
//! `S = diag(1, -1)` every reflection is `F(m) = O(m)·S`, and `S·O(m) = O(-m)·S`,
//! which gives the composition table
//!
//! ```text
//! O(a)·O(b) = O(a + b)      O(a)·F(b) = F(a + b)
//! F(a)·O(b) = F(a - b)      F(a)·F(b) = O(a - b)
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::{self, Mat2};

/// Rotation or reflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Rotation,
    Reflection,
}

impl Kind {
    /// Wire tag used in checkpoints and relation exports.
    pub fn tag(self) -> u8 {
        match self {
            Kind::Rotation => 0,
            Kind::Reflection => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Kind::Rotation),
            1 => Ok(Kind::Reflection),
            other => Err(Error::domain(format!("invalid element kind tag {other}"))),
        }
    }
}

/// Coarse shape of an element matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Symmetric,
    SkewSymmetric,
    Neither,
}

/// Checks that `order` is an even integer of at least 4.
pub fn validate_order(order: u16) -> Result<()> {
    if order < 4 || order % 2 != 0 {
        return Err(Error::domain(format!(
            "group order K must be an even integer >= 4, got {order}"
        )));
    }
    Ok(())
}

/// One element of `D_K`: `O_K^(m)` or `F_K^(m)` with `m` in `[0, K)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DihedralElement {
    order: u16,
    kind: Kind,
    index: u16,
}

impl DihedralElement {
    pub fn new(order: u16, kind: Kind, index: u16) -> Result<Self> {
        validate_order(order)?;
        if index >= order {
            return Err(Error::domain(format!(
                "element index {index} out of range [0, {order})"
            )));
        }
        Ok(Self { order, kind, index })
    }

    pub fn rotation(order: u16, index: u16) -> Result<Self> {
        Self::new(order, Kind::Rotation, index)
    }

    pub fn reflection(order: u16, index: u16) -> Result<Self> {
        Self::new(order, Kind::Reflection, index)
    }

    pub fn identity(order: u16) -> Result<Self> {
        Self::rotation(order, 0)
    }

    /// Element number `k` of the fixed enumeration: `k < K` are rotations
    /// `O(k)`, `K <= k < 2K` are reflections `F(k - K)`.
    pub fn from_enumeration(order: u16, k: usize) -> Result<Self> {
        validate_order(order)?;
        let n = order as usize;
        match k {
            k if k < n => Self::rotation(order, k as u16),
            k if k < 2 * n => Self::reflection(order, (k - n) as u16),
            _ => Err(Error::domain(format!(
                "enumeration index {k} out of range [0, {})",
                2 * n
            ))),
        }
    }

    pub fn enumeration_index(&self) -> usize {
        match self.kind {
            Kind::Rotation => self.index as usize,
            Kind::Reflection => self.order as usize + self.index as usize,
        }
    }

    pub fn order(&self) -> u16 {
        self.order
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn index(&self) -> u16 {
        self.index
    }

    pub fn is_identity(&self) -> bool {
        self.kind == Kind::Rotation && self.index == 0
    }

    /// Group product `self · other`, matching the matrix product.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.order != other.order {
            return Err(Error::domain(format!(
                "cannot compose elements of D_{} and D_{}",
                self.order, other.order
            )));
        }
        let k = self.order as u32;
        let (a, b) = (self.index as u32, other.index as u32);
        let sum = (a + b) % k;
        let diff = (a + k - b) % k;
        let (kind, index) = match (self.kind, other.kind) {
            (Kind::Rotation, Kind::Rotation) => (Kind::Rotation, sum),
            (Kind::Rotation, Kind::Reflection) => (Kind::Reflection, sum),
            (Kind::Reflection, Kind::Rotation) => (Kind::Reflection, diff),
            (Kind::Reflection, Kind::Reflection) => (Kind::Rotation, diff),
        };
        Ok(Self {
            order: self.order,
            kind,
            index: index as u16,
        })
    }

    pub fn inverse(&self) -> Self {
        match self.kind {
            Kind::Rotation => Self {
                index: (self.order - self.index) % self.order,
                ..*self
            },
            Kind::Reflection => *self,
        }
    }

    /// The 2×2 orthogonal representation, using exact constants where the
    /// angle is a multiple of 30° or 45°.
    pub fn matrix(&self) -> Mat2<f64> {
        let (c, s) = exact_cos_sin(self.order, self.index);
        match self.kind {
            Kind::Rotation => [[c, -s], [s, c]],
            Kind::Reflection => [[c, s], [s, -c]],
        }
    }

    pub fn classify(&self) -> Symmetry {
        let k = self.order;
        match self.kind {
            Kind::Reflection => Symmetry::Symmetric,
            Kind::Rotation if self.index == 0 || self.index == k / 2 => Symmetry::Symmetric,
            Kind::Rotation if k % 4 == 0 && (self.index == k / 4 || self.index == 3 * k / 4) => {
                Symmetry::SkewSymmetric
            }
            Kind::Rotation => Symmetry::Neither,
        }
    }
}

impl fmt::Display for DihedralElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = match self.kind {
            Kind::Rotation => 'O',
            Kind::Reflection => 'F',
        };
        write!(f, "{letter}_{}^({})", self.order, self.index)
    }
}

/// Free-function form of [`DihedralElement::matrix`].
pub fn element_matrix(e: &DihedralElement) -> Mat2<f64> {
    e.matrix()
}

/// `(cos 2πm/K, sin 2πm/K)` with exact values on the 30° and 45° lattices.
fn exact_cos_sin(order: u16, index: u16) -> (f64, f64) {
    const HALF: f64 = 0.5;
    let r3 = 3f64.sqrt() * 0.5;
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    // angle in units of 15°: q = 24 m / K
    let scaled = 24 * index as u32;
    let k = order as u32;
    if scaled % k == 0 {
        let q = (scaled / k) as usize;
        if q % 2 == 0 {
            let cos30 = [1.0, r3, HALF, 0.0, -HALF, -r3, -1.0, -r3, -HALF, 0.0, HALF, r3];
            let step = q / 2;
            // sin θ = cos(θ - 90°)
            return (cos30[step], cos30[(step + 9) % 12]);
        }
        if q % 3 == 0 {
            let cos45 = [1.0, r2, 0.0, -r2, -1.0, -r2, 0.0, r2];
            let step = q / 3;
            return (cos45[step], cos45[(step + 6) % 8]);
        }
    }
    let theta = 2.0 * std::f64::consts::PI * index as f64 / order as f64;
    (theta.cos(), theta.sin())
}

/// All `2K` elements of `D_K` with their realized matrices, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct DihedralGroup {
    order: u16,
    elements: Vec<DihedralElement>,
    matrices: Vec<Mat2<f64>>,
}

impl DihedralGroup {
    pub fn new(order: u16) -> Result<Self> {
        validate_order(order)?;
        let elements: Vec<_> = (0..2 * order as usize)
            .map(|k| DihedralElement::from_enumeration(order, k))
            .collect::<Result<_>>()?;
        let matrices = elements.iter().map(DihedralElement::matrix).collect();
        Ok(Self {
            order,
            elements,
            matrices,
        })
    }

    pub fn order(&self) -> u16 {
        self.order
    }

    /// Number of elements, `2K`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[DihedralElement] {
        &self.elements
    }

    pub fn matrices(&self) -> &[Mat2<f64>] {
        &self.matrices
    }

    pub fn matrix(&self, k: usize) -> &Mat2<f64> {
        &self.matrices[k]
    }
}

/// Block-diagonal relation `diag[R^(1), ..., R^(L)]` with every block in `D_K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockDiagonalRelation {
    order: u16,
    blocks: Vec<DihedralElement>,
}

impl BlockDiagonalRelation {
    pub fn new(blocks: Vec<DihedralElement>) -> Result<Self> {
        let order = blocks
            .first()
            .map(DihedralElement::order)
            .ok_or_else(|| Error::domain("a relation needs at least one block"))?;
        if let Some(bad) = blocks.iter().find(|b| b.order() != order) {
            return Err(Error::domain(format!(
                "mixed group orders in one relation: D_{order} and D_{}",
                bad.order()
            )));
        }
        Ok(Self { order, blocks })
    }

    pub fn identity(order: u16, num_blocks: usize) -> Result<Self> {
        Self::new(vec![DihedralElement::identity(order)?; num_blocks])
    }

    pub fn order(&self) -> u16 {
        self.order
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[DihedralElement] {
        &self.blocks
    }

    /// Blockwise product `self · other`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.order != other.order || self.blocks.len() != other.blocks.len() {
            return Err(Error::domain(format!(
                "shape mismatch: D_{} x {} blocks vs D_{} x {} blocks",
                self.order,
                self.blocks.len(),
                other.order,
                other.blocks.len()
            )));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.compose(b))
            .collect::<Result<_>>()?;
        Ok(Self {
            order: self.order,
            blocks,
        })
    }

    pub fn inverse(&self) -> Self {
        Self {
            order: self.order,
            blocks: self.blocks.iter().map(DihedralElement::inverse).collect(),
        }
    }

    pub fn block_matrices(&self) -> Vec<Mat2<f64>> {
        self.blocks.iter().map(DihedralElement::matrix).collect()
    }

    /// Dense `2L × 2L` matrix, row-major. Only meant for checks and small `L`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = 2 * self.blocks.len();
        let mut dense = vec![vec![0.0; n]; n];
        for (l, block) in self.blocks.iter().enumerate() {
            let m = block.matrix();
            for i in 0..2 {
                for j in 0..2 {
                    dense[2 * l + i][2 * l + j] = m[i][j];
                }
            }
        }
        dense
    }

    /// Diagonal entries of the realized matrix, `2L` values.
    pub fn diagonal(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| {
                let m = b.matrix();
                [m[0][0], m[1][1]]
            })
            .collect()
    }

    /// Largest entry of `|R Rᵀ - I|` over all blocks.
    pub fn orthogonality_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let m = b.matrix();
                mat2::max_abs_diff(&mat2::mul(&m, &mat2::transpose(&m)), &mat2::identity())
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot(k: u16, m: u16) -> DihedralElement {
        DihedralElement::rotation(k, m).unwrap()
    }

    fn refl(k: u16, m: u16) -> DihedralElement {
        DihedralElement::reflection(k, m).unwrap()
    }

    #[test]
    fn element_matrix_examples() {
        assert_eq!(rot(4, 1).matrix(), [[0.0, -1.0], [1.0, 0.0]]);
        assert_eq!(rot(4, 0).matrix(), [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(refl(4, 0).matrix(), [[1.0, 0.0], [0.0, -1.0]]);
    }

    #[test]
    fn exact_constants_match_trig() {
        for k in [4u16, 6, 8, 10, 12, 24] {
            for m in 0..k {
                let (c, s) = exact_cos_sin(k, m);
                let theta = 2.0 * std::f64::consts::PI * m as f64 / k as f64;
                assert!((c - theta.cos()).abs() < 1e-15, "cos K={k} m={m}");
                assert!((s - theta.sin()).abs() < 1e-15, "sin K={k} m={m}");
            }
        }
        assert_eq!(rot(6, 1).matrix()[0][0], 0.5);
        assert_eq!(rot(6, 3).matrix(), [[-1.0, 0.0], [0.0, -1.0]]);
    }

    #[test]
    fn invalid_elements_are_rejected() {
        assert!(DihedralElement::rotation(4, 4).is_err());
        assert!(DihedralElement::reflection(6, 7).is_err());
        assert!(DihedralElement::rotation(5, 0).is_err());
        assert!(DihedralElement::rotation(2, 0).is_err());
        assert!(DihedralElement::from_enumeration(4, 8).is_err());
        assert!(Kind::from_tag(2).is_err());
    }

    #[test]
    fn compose_examples() {
        assert_eq!(rot(4, 1).compose(&rot(4, 1)).unwrap(), rot(4, 2));
        for m in 0..4 {
            assert_eq!(refl(4, m).compose(&refl(4, m)).unwrap(), rot(4, 0));
        }
        let fo = refl(4, 1).compose(&rot(4, 1)).unwrap();
        let of = rot(4, 1).compose(&refl(4, 1)).unwrap();
        assert_ne!(fo, of);
        // brute-force matrix products
        let fo_dense = mat2::mul(&refl(4, 1).matrix(), &rot(4, 1).matrix());
        let of_dense = mat2::mul(&rot(4, 1).matrix(), &refl(4, 1).matrix());
        assert!(mat2::max_abs_diff(&fo.matrix(), &fo_dense) < 1e-12);
        assert!(mat2::max_abs_diff(&of.matrix(), &of_dense) < 1e-12);
        assert!(mat2::max_abs_diff(&fo_dense, &of_dense) > 0.5);
    }

    #[test]
    fn compose_rejects_mixed_orders() {
        assert!(rot(4, 1).compose(&rot(6, 1)).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(rot(4, 1).inverse(), rot(4, 3));
        assert_eq!(refl(6, 2).inverse(), refl(6, 2));
        assert_eq!(rot(4, 0).inverse(), rot(4, 0));
    }

    #[test]
    fn compose_matches_matrix_product_exhaustively() {
        for k in [4u16, 6, 8, 10] {
            let g = DihedralGroup::new(k).unwrap();
            for a in g.elements() {
                for b in g.elements() {
                    let sym = a.compose(b).unwrap().matrix();
                    let dense = mat2::mul(&a.matrix(), &b.matrix());
                    assert!(mat2::max_abs_diff(&sym, &dense) < 1e-12, "{a} * {b}");
                }
            }
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(rot(4, 1).classify(), Symmetry::SkewSymmetric);
        assert_eq!(refl(6, 2).classify(), Symmetry::Symmetric);
        assert_eq!(rot(6, 1).classify(), Symmetry::Neither);
        assert_eq!(rot(6, 3).classify(), Symmetry::Symmetric);
        assert_eq!(rot(8, 6).classify(), Symmetry::SkewSymmetric);
    }

    #[test]
    fn enumeration_round_trip() {
        let g = DihedralGroup::new(6).unwrap();
        assert_eq!(g.len(), 12);
        for (k, e) in g.elements().iter().enumerate() {
            assert_eq!(e.enumeration_index(), k);
        }
        assert_eq!(g.elements()[6], refl(6, 0));
    }

    #[test]
    fn block_product_identity_and_inverse() {
        let a = BlockDiagonalRelation::new(vec![rot(4, 1), refl(4, 3), rot(4, 2)]).unwrap();
        let id = BlockDiagonalRelation::identity(4, 3).unwrap();
        assert_eq!(id.product(&a).unwrap(), a);
        assert_eq!(a.product(&a.inverse()).unwrap(), id);
        let short = BlockDiagonalRelation::identity(4, 2).unwrap();
        assert!(a.product(&short).is_err());
        assert!(BlockDiagonalRelation::new(vec![rot(4, 0), rot(6, 0)]).is_err());
        assert!(BlockDiagonalRelation::new(vec![]).is_err());
    }

    #[test]
    fn diagonal_of_dense_matches() {
        let a = BlockDiagonalRelation::new(vec![rot(6, 1), refl(6, 4)]).unwrap();
        let dense = a.to_dense();
        let diag: Vec<f64> = (0..4).map(|i| dense[i][i]).collect();
        assert_eq!(diag, a.diagonal());
        assert!(a.orthogonality_error() < 1e-15);
    }
}
