//! Real coordinates of Hermitian matrices and the real symmetric embedding.
//!
//! An `n×n` Hermitian matrix has `n²` real coordinates: the `n` diagonal
//! entries first, then for every pair `a < b` (row-major) the real and
//! imaginary part of entry `(a, b)`. The matching basis is `e_a e_aᵀ`,
//! `e_a e_bᵀ + e_b e_aᵀ` and `i(e_a e_bᵀ − e_b e_aᵀ)`.

use nalgebra::{DMatrix, DVector};

use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    Diag(usize),
    Re(usize, usize),
    Im(usize, usize),
}

/// Coordinate layout of `n×n` Hermitian matrices.
pub fn coords(n: usize) -> Vec<Coord> {
    let mut out: Vec<Coord> = (0..n).map(Coord::Diag).collect();
    for a in 0..n {
        for b in a + 1..n {
            out.push(Coord::Re(a, b));
            out.push(Coord::Im(a, b));
        }
    }
    out
}

pub fn to_coords(h: &DMatrix<C64>) -> DVector<f64> {
    let n = h.nrows();
    DVector::from_iterator(
        n * n,
        coords(n).into_iter().map(|c| match c {
            Coord::Diag(a) => h[(a, a)].re,
            Coord::Re(a, b) => h[(a, b)].re,
            Coord::Im(a, b) => h[(a, b)].im,
        }),
    )
}

pub fn from_coords(n: usize, z: &[f64]) -> DMatrix<C64> {
    let mut h = DMatrix::zeros(n, n);
    for (c, &v) in coords(n).into_iter().zip(z) {
        match c {
            Coord::Diag(a) => h[(a, a)] += C64::new(v, 0.0),
            Coord::Re(a, b) => {
                h[(a, b)] += C64::new(v, 0.0);
                h[(b, a)] += C64::new(v, 0.0);
            }
            Coord::Im(a, b) => {
                h[(a, b)] += C64::new(0.0, v);
                h[(b, a)] += C64::new(0.0, -v);
            }
        }
    }
    h
}

/// `Q E Qᴴ` for the basis element `E` of coordinate `c`.
pub fn sandwich_basis(q: &DMatrix<C64>, c: Coord) -> DMatrix<C64> {
    match c {
        Coord::Diag(a) => {
            let qa = q.column(a);
            qa * qa.adjoint()
        }
        Coord::Re(a, b) => {
            let m = q.column(a) * q.column(b).adjoint();
            &m + m.adjoint()
        }
        Coord::Im(a, b) => {
            let m = q.column(a) * q.column(b).adjoint();
            (&m - m.adjoint()) * C64::new(0.0, 1.0)
        }
    }
}

/// `tr(E K)` for the basis element `E` of `c` and Hermitian `K`.
pub fn trace_with(k: &DMatrix<C64>, c: Coord) -> f64 {
    match c {
        Coord::Diag(a) => k[(a, a)].re,
        Coord::Re(a, b) => 2.0 * k[(b, a)].re,
        Coord::Im(a, b) => {
            // tr(i(e_a e_bᵀ − e_b e_aᵀ) K) = i (K_ba − K_ab) = −2 Im K_ba
            -2.0 * k[(b, a)].im
        }
    }
}

/// `[[Re H, −Im H], [Im H, Re H]]`.
pub fn embed(h: &DMatrix<C64>) -> DMatrix<f64> {
    let n = h.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let z = h[(r, c)];
            out[(r, c)] = z.re;
            out[(r + n, c + n)] = z.re;
            out[(r, c + n)] = -z.im;
            out[(r + n, c)] = z.im;
        }
    }
    out
}

/// Inverse of [`embed`], averaging the redundant blocks.
pub fn extract(s: &DMatrix<f64>) -> DMatrix<C64> {
    let n = s.nrows() / 2;
    DMatrix::from_fn(n, n, |r, c| {
        C64::new(
            0.5 * (s[(r, c)] + s[(r + n, c + n)]),
            0.5 * (s[(r + n, c)] - s[(r, c + n)]),
        )
    })
}

/// Nonzero entries of `embed(E)` for the basis element of `c` (both triangles).
pub fn embedded_basis_entries(n: usize, c: Coord) -> Vec<(usize, usize, f64)> {
    match c {
        Coord::Diag(a) => vec![(a, a, 1.0), (a + n, a + n, 1.0)],
        Coord::Re(a, b) => vec![(a, b, 1.0), (b, a, 1.0), (a + n, b + n, 1.0), (b + n, a + n, 1.0)],
        Coord::Im(a, b) => vec![(a, b + n, -1.0), (b, a + n, 1.0), (a + n, b, 1.0), (b + n, a, -1.0)],
    }
}

/// `(X + Xᴴ)/2`.
pub fn hermitian_part(x: &DMatrix<C64>) -> DMatrix<C64> {
    (x + x.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(x: &DMatrix<C64>) -> (DVector<f64>, DMatrix<C64>) {
    let n = x.nrows();
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(x));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}
