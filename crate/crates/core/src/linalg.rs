//! Dense complex linear algebra shared by every module.
//!
//! Matrices are `ndarray` arrays of `Complex64`; products go through BLAS and
//! Hermitian eigensolves through LAPACK.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Eigh, EigValsh, Inverse, SVD, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = Array2<C64>;
pub type CVector = Array1<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    Array2::from_diag(&Array1::from_elem(n, c(1.0, 0.0)))
}

pub fn from_real_diag(d: &Array1<f64>) -> CMatrix {
    Array2::from_diag(&d.mapv(|x| c(x, 0.0)))
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diag().sum()
}

/// Tr(A B) without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    debug_assert_eq!(a.dim(), b.dim());
    let mut acc = c(0.0, 0.0);
    for (row, col) in a.axis_iter(Axis(0)).zip(b.axis_iter(Axis(1))) {
        acc += row.iter().zip(col.iter()).map(|(x, y)| x * y).sum::<C64>();
    }
    acc
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMatrix::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == c(0.0, 0.0) {
                continue;
            }
            let mut block = out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
            block.zip_mut_with(b, |o, &x| *o = aij * x);
        }
    }
    out
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let mut out = CVector::zeros(a.len() * b.len());
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i * b.len() + j] = x * y;
        }
    }
    out
}

pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    let mut out = CMatrix::zeros((a.len(), b.len()));
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[[i, j]] = x * y.conj();
        }
    }
    out
}

pub fn max_abs_diff(a: ArrayView2<C64>, b: ArrayView2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest elementwise deviation of `m` from its conjugate transpose.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + &dagger(m)).mapv(|z| z * 0.5)
}

pub fn eigh(m: &CMatrix) -> Result<(Array1<f64>, CMatrix)> {
    Ok(m.eigh(UPLO::Lower)?)
}

pub fn eigvalsh(m: &CMatrix) -> Result<Array1<f64>> {
    Ok(m.eigvalsh(UPLO::Lower)?)
}

pub fn real_eigh(m: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    Ok(m.eigh(UPLO::Lower)?)
}

pub fn singular_values(m: &CMatrix) -> Result<Array1<f64>> {
    let (_, s, _) = m.svd(false, false)?;
    Ok(s)
}

/// Principal square root of a positive semidefinite Hermitian matrix; small
/// negative eigenvalues from round-off are treated as zero.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let (vals, vecs) = eigh(m)?;
    let roots = vals.mapv(|x| c(x.max(0.0).sqrt(), 0.0));
    let scaled = &vecs * &roots.view().insert_axis(Axis(0));
    Ok(scaled.dot(&dagger(&vecs)))
}

/// `U diag(d) U†` for a unitary `U`.
pub fn conjugate_diag(u: &CMatrix, d: &CVector) -> CMatrix {
    let scaled = u * &d.view().insert_axis(Axis(0));
    scaled.dot(&dagger(u))
}

fn one_norm(m: &CMatrix) -> f64 {
    m.axis_iter(Axis(1))
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
// Backward-error thresholds on the 1-norm for each Padé degree.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

fn scale(m: &CMatrix, s: f64) -> CMatrix {
    m.mapv(|z| z * s)
}

fn pade_low(a: &CMatrix, coeffs: &[f64]) -> Result<CMatrix> {
    let n = a.nrows();
    let a2 = a.dot(a);
    let mut powers = vec![identity(n)];
    for k in 1..coeffs.len() / 2 {
        let next = powers[k - 1].dot(&a2);
        powers.push(next);
    }
    let mut u_inner = CMatrix::zeros((n, n));
    let mut v = CMatrix::zeros((n, n));
    for (k, p) in powers.iter().enumerate() {
        u_inner.scaled_add(c(coeffs[2 * k + 1], 0.0), p);
        v.scaled_add(c(coeffs[2 * k], 0.0), p);
    }
    let u = a.dot(&u_inner);
    pade_solve(&u, &v)
}

fn pade13(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    let b = PADE13;
    let id = identity(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let u_hi = &scale(&a6, b[13]) + &scale(&a4, b[11]) + &scale(&a2, b[9]);
    let u_lo = &scale(&a6, b[7]) + &scale(&a4, b[5]) + &scale(&a2, b[3]) + &scale(&id, b[1]);
    let u = a.dot(&(&a6.dot(&u_hi) + &u_lo));
    let v_hi = &scale(&a6, b[12]) + &scale(&a4, b[10]) + &scale(&a2, b[8]);
    let v_lo = &scale(&a6, b[6]) + &scale(&a4, b[4]) + &scale(&a2, b[2]) + &scale(&id, b[0]);
    let v = &a6.dot(&v_hi) + &v_lo;
    pade_solve(&u, &v)
}

fn pade_solve(u: &CMatrix, v: &CMatrix) -> Result<CMatrix> {
    let denom = v - u;
    let numer = v + u;
    Ok(denom.inv()?.dot(&numer))
}

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant (degree 3 through 13, chosen from the 1-norm).
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            left: a.nrows(),
            right: a.ncols(),
        });
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::InvalidParameter("expm of non-finite matrix".into()));
    }
    for (degree, theta) in THETA {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(a, coeffs);
        }
    }
    let squarings = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let scaled = scale(a, 0.5f64.powi(squarings));
    let mut r = pade13(&scaled)?;
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_y() -> CMatrix {
        ndarray::array![[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]
    }

    #[test]
    fn expm_rotation_matches_closed_form() {
        // exp(-i θ Y) = cos θ 𝕀 − i sin θ Y, across all Padé branches.
        for &theta in &[1e-3, 0.1, 0.5, 1.5, 4.0, 30.0] {
            let gen = pauli_y().mapv(|z| z * c(0.0, -theta));
            let got = expm(&gen).unwrap();
            let want = &identity(2).mapv(|z| z * theta.cos())
                + &pauli_y().mapv(|z| z * c(0.0, -theta.sin()));
            assert!(max_abs_diff(got.view(), want.view()) < 1e-12, "θ={theta}");
        }
    }

    #[test]
    fn expm_of_nilpotent_is_truncated_series() {
        let mut n = CMatrix::zeros((3, 3));
        n[[0, 1]] = c(2.0, 0.0);
        n[[1, 2]] = c(0.0, 3.0);
        let got = expm(&n).unwrap();
        let want = &(&identity(3) + &n) + &n.dot(&n).mapv(|z| z * 0.5);
        assert!(max_abs_diff(got.view(), want.view()) < 1e-13);
    }

    #[test]
    fn kron_places_blocks() {
        let a = ndarray::array![[c(1.0, 0.0), c(2.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]];
        let b = identity(2);
        let k = kron(&a, &b);
        assert_eq!(k[[0, 2]], c(2.0, 0.0));
        assert_eq!(k[[1, 3]], c(2.0, 0.0));
        assert_eq!(k[[3, 3]], c(0.0, 1.0));
        assert_eq!(k[[0, 3]], c(0.0, 0.0));
    }

    #[test]
    fn trace_product_agrees_with_dense_product() {
        let a = ndarray::array![[c(1.0, 0.5), c(2.0, 0.0)], [c(-1.0, 0.0), c(0.0, 1.0)]];
        let b = ndarray::array![[c(0.3, 0.0), c(0.0, 2.0)], [c(1.0, 1.0), c(4.0, 0.0)]];
        let want = trace(&a.dot(&b));
        assert!((trace_product(&a, &b) - want).norm() < 1e-14);
    }
}
