//! Small dense helpers for the 4x4 complex matrices used throughout.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix4 = Matrix4<Complex64>;
pub type CVector4 = nalgebra::Vector4<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Index pairs of the two parity sectors in the computational ordering.
/// Every Hamiltonian of the model is block diagonal with respect to them.
pub(crate) const SECTORS: [[usize; 2]; 2] = [[0, 3], [1, 2]];

pub fn max_abs(m: &CMatrix4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |(U^dagger U - 1)_ij|`
pub fn unitarity_defect(u: &CMatrix4) -> f64 {
    max_abs(&(u.adjoint() * u - CMatrix4::identity()))
}

pub fn hermiticity_defect(m: &CMatrix4) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn commutator(a: &CMatrix4, b: &CMatrix4) -> CMatrix4 {
    a * b - b * a
}

fn is_sector_block_diagonal(g: &CMatrix4) -> bool {
    let scale = max_abs(g).max(f64::MIN_POSITIVE);
    (0..4).all(|r| {
        (0..4).all(|c| {
            let same = SECTORS.iter().any(|s| s.contains(&r) && s.contains(&c));
            same || g[(r, c)].norm() <= f64::EPSILON * scale
        })
    })
}

/// `exp(-i G)` for a 2x2 Hermitian `G`, written as `m 1 + x sx + y sy + z sz`.
fn expm_neg_i_hermitian2(g: &Matrix2<Complex64>) -> Matrix2<Complex64> {
    let mean = 0.5 * (g[(0, 0)].re + g[(1, 1)].re);
    let z = 0.5 * (g[(0, 0)].re - g[(1, 1)].re);
    let x = g[(0, 1)].re;
    let y = -g[(0, 1)].im;
    let r = (x * x + y * y + z * z).sqrt();
    let (s, c) = r.sin_cos();
    let sinc = if r == 0.0 { 1.0 } else { s / r };
    let phase = Complex64::from_polar(1.0, -mean);
    let k = -I * sinc;
    let n = Matrix2::new(
        Complex64::new(z, 0.0),
        Complex64::new(x, -y),
        Complex64::new(x, y),
        Complex64::new(-z, 0.0),
    );
    (Matrix2::identity() * Complex64::new(c, 0.0) + n * k) * phase
}

/// `exp(-i G)` for Hermitian `G`.
///
/// Generators built from the model Hamiltonian are block diagonal over the
/// parity sectors and take the closed-form SU(2) route; anything else falls
/// back to a full Hermitian eigendecomposition.
pub fn expm_neg_i_hermitian(g: &CMatrix4) -> CMatrix4 {
    if !is_sector_block_diagonal(g) {
        return expm_neg_i_hermitian_eig(g);
    }
    let mut out = CMatrix4::zeros();
    for s in SECTORS {
        let block = Matrix2::new(
            g[(s[0], s[0])],
            g[(s[0], s[1])],
            g[(s[1], s[0])],
            g[(s[1], s[1])],
        );
        let e = expm_neg_i_hermitian2(&block);
        for (a, &ra) in s.iter().enumerate() {
            for (b, &cb) in s.iter().enumerate() {
                out[(ra, cb)] = e[(a, b)];
            }
        }
    }
    out
}

pub(crate) fn expm_neg_i_hermitian_eig(g: &CMatrix4) -> CMatrix4 {
    let eig = SymmetricEigen::new(*g);
    let phases = CMatrix4::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e)));
    eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

pub fn trace(m: &CMatrix4) -> Complex64 {
    m.diagonal().sum()
}
