//! Thin dense complex linear algebra layer over faer: products in the four
//! operator flavours and the self-adjoint eigendecomposition.
//!
//! All matrices are row-major `Vec<Complex64>` of square dimension.

use crate::error::{CoreError, Result};
use faer::c64;
use faer::prelude::*;
use num_complex::Complex64;

/// Operand flavour for products.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavour {
    /// as is
    N,
    /// transpose
    T,
    /// conjugate transpose
    H,
    /// entrywise conjugate
    C,
}

fn par() -> faer::Par {
    faer::Par::rayon(0)
}

/// out = a(fa) * b(fb), both m x m row-major.
pub fn mm(a: &[Complex64], fa: Flavour, b: &[Complex64], fb: Flavour, m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); m * m];
    mm_into(&mut out, a, fa, b, fb, m, Complex64::new(1.0, 0.0), false);
    out
}

/// out (+)= alpha * a(fa) * b(fb).
pub fn mm_into(
    out: &mut [Complex64],
    a: &[Complex64],
    fa: Flavour,
    b: &[Complex64],
    fb: Flavour,
    m: usize,
    alpha: Complex64,
    accumulate: bool,
) {
    // materialize entrywise conjugates; transposition stays a stride trick
    let conj_buf_a: Vec<c64>;
    let conj_buf_b: Vec<c64>;
    let av = match fa {
        Flavour::C | Flavour::H => {
            conj_buf_a = a.iter().map(|v| v.conj()).collect();
            MatRef::from_row_major_slice(&conj_buf_a, m, m)
        }
        _ => MatRef::from_row_major_slice(a, m, m),
    };
    let bv = match fb {
        Flavour::C | Flavour::H => {
            conj_buf_b = b.iter().map(|v| v.conj()).collect();
            MatRef::from_row_major_slice(&conj_buf_b, m, m)
        }
        _ => MatRef::from_row_major_slice(b, m, m),
    };
    let av = match fa {
        Flavour::T | Flavour::H => av.transpose(),
        _ => av,
    };
    let bv = match fb {
        Flavour::T | Flavour::H => bv.transpose(),
        _ => bv,
    };
    let acc = if accumulate { faer::Accum::Add } else { faer::Accum::Replace };
    let outv = MatMut::from_row_major_slice_mut(out, m, m);
    faer::linalg::matmul::matmul(outv, acc, av, bv, alpha, par());
}

/// Eigendecomposition of a Hermitian matrix; returns ascending eigenvalues
/// and the row-major matrix whose columns are the eigenvectors.
pub fn eigh(h: &[Complex64], m: usize) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let hv = Mat::from_fn(m, m, |i, j| h[i * m + j]);
    let evd = hv
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| CoreError::Numeric(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let vals: Vec<f64> = (0..m).map(|i| s[i].re).collect();
    let mut vecs = vec![Complex64::default(); m * m];
    for i in 0..m {
        for j in 0..m {
            vecs[i * m + j] = u[(i, j)];
        }
    }
    Ok((vals, vecs))
}

/// u * diag(d) * u^H for real diagonal d.
pub fn from_eigen(u: &[Complex64], d: &[f64], m: usize) -> Vec<Complex64> {
    let mut ud = vec![Complex64::default(); m * m];
    for i in 0..m {
        for j in 0..m {
            ud[i * m + j] = u[i * m + j] * d[j];
        }
    }
    mm(&ud, Flavour::N, u, Flavour::H, m)
}

pub fn frobenius(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// max |a - a^H| entry, relative to max |a| entry.
pub fn hermitian_defect(a: &[Complex64], m: usize) -> f64 {
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            num = num.max((a[i * m + j] - a[j * m + i].conj()).norm());
            den = den.max(a[i * m + j].norm());
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// max |a - a^T| entry, relative to max |a| entry.
pub fn symmetric_defect(a: &[Complex64], m: usize) -> f64 {
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            num = num.max((a[i * m + j] - a[j * m + i]).norm());
            den = den.max(a[i * m + j].norm());
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn transpose(a: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); m * m];
    for i in 0..m {
        for j in 0..m {
            out[j * m + i] = a[i * m + j];
        }
    }
    out
}

pub fn adjoint(a: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); m * m];
    for i in 0..m {
        for j in 0..m {
            out[j * m + i] = a[i * m + j].conj();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_flavours_agree_with_reference() {
        let m = 3;
        let a: Vec<Complex64> = (0..9).map(|i| Complex64::new(i as f64, (i * i) as f64 * 0.1)).collect();
        let b: Vec<Complex64> = (0..9).map(|i| Complex64::new(1.0 - i as f64 * 0.2, i as f64 * 0.3)).collect();
        let naive = |x: &[Complex64], y: &[Complex64]| {
            let mut out = vec![Complex64::default(); 9];
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        out[i * 3 + j] += x[i * 3 + k] * y[k * 3 + j];
                    }
                }
            }
            out
        };
        let check = |got: Vec<Complex64>, want: Vec<Complex64>| {
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).norm() < 1e-12);
            }
        };
        check(mm(&a, Flavour::N, &b, Flavour::N, m), naive(&a, &b));
        check(mm(&a, Flavour::T, &b, Flavour::N, m), naive(&transpose(&a, m), &b));
        check(mm(&a, Flavour::H, &b, Flavour::N, m), naive(&adjoint(&a, m), &b));
        let ac: Vec<Complex64> = a.iter().map(|v| v.conj()).collect();
        check(mm(&a, Flavour::C, &b, Flavour::N, m), naive(&ac, &b));
        check(mm(&a, Flavour::N, &b, Flavour::H, m), naive(&a, &adjoint(&b, m)));
    }

    #[test]
    fn eigh_reconstructs() {
        let m = 16;
        let mut h = vec![Complex64::default(); m * m];
        for i in 0..m {
            for j in 0..m {
                let v = Complex64::new(
                    1.0 / (1.0 + (i as f64 - j as f64).abs()),
                    0.05 * (i as f64 - j as f64),
                );
                h[i * m + j] = v;
            }
        }
        // hermitize
        let hh: Vec<Complex64> = (0..m * m)
            .map(|k| {
                let (i, j) = (k / m, k % m);
                (h[i * m + j] + h[j * m + i].conj()) * 0.5
            })
            .collect();
        let (d, u) = eigh(&hh, m).unwrap();
        let recon = from_eigen(&u, &d, m);
        for (a, b) in recon.iter().zip(&hh) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
