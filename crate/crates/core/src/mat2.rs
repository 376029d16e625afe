//! Minimal 2×2 matrix helpers. Matrices are row-major `[[a, b], [c, d]]`.

use crate::real::Real;

pub type Mat2<T> = [[T; 2]; 2];

pub fn zero<T: Real>() -> Mat2<T> {
    [[T::zero(); 2]; 2]
}

pub fn identity<T: Real>() -> Mat2<T> {
    [[T::one(), T::zero()], [T::zero(), T::one()]]
}

pub fn mul<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

pub fn transpose<T: Real>(a: &Mat2<T>) -> Mat2<T> {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// `a · v`
pub fn apply<T: Real>(a: &Mat2<T>, v: [T; 2]) -> [T; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

/// `aᵀ · v`
pub fn apply_transpose<T: Real>(a: &Mat2<T>, v: [T; 2]) -> [T; 2] {
    [
        a[0][0] * v[0] + a[1][0] * v[1],
        a[0][1] * v[0] + a[1][1] * v[1],
    ]
}

/// `uᵀ · a · v`
pub fn bilinear<T: Real>(u: [T; 2], a: &Mat2<T>, v: [T; 2]) -> T {
    let av = apply(a, v);
    u[0] * av[0] + u[1] * av[1]
}

/// Frobenius inner product `Σ a_ij b_ij`.
pub fn inner<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> T {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

pub fn max_abs_diff<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> T {
    let mut m = T::zero();
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

pub fn cast<T: Real>(a: &Mat2<f64>) -> Mat2<T> {
    [
        [T::lit(a[0][0]), T::lit(a[0][1])],
        [T::lit(a[1][0]), T::lit(a[1][1])],
    ]
}
