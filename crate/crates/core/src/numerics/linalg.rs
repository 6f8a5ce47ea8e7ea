//! Dense complex linear solves.

use super::{Complex, PrecisionContext};
use crate::error::{Error, Result};

/// Solve `a x = b` by Gaussian elimination with complete pivoting.
/// Fails with `SingularSystem` when a pivot drops below `eps * max|a|`.
pub fn solve_linear(mut a: Vec<Vec<Complex>>, mut b: Vec<Complex>, ctx: &PrecisionContext) -> Result<Vec<Complex>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParameters("matrix shape mismatch".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = a.iter().flatten().map(|x| x.abs().to_f64()).fold(0.0, f64::max);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut best = (k, k);
        let mut bmag = a[k][k].abs();
        for i in k..n {
            for j in k..n {
                let m = a[i][j].abs();
                if m > bmag {
                    bmag = m;
                    best = (i, j);
                }
            }
        }
        if bmag.to_f64() <= ctx.eps() * scale || bmag.is_zero() {
            return Err(Error::SingularSystem { bits: ctx.bits() });
        }
        a.swap(k, best.0);
        b.swap(k, best.0);
        if best.1 != k {
            for row in a.iter_mut() {
                row.swap(k, best.1);
            }
            perm.swap(k, best.1);
        }
        let piv = a[k][k].clone();
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let f = &a[i][k] / &piv;
            for j in k..n {
                let t = &f * &a[k][j];
                a[i][j] -= t;
            }
            let t = &f * &b[k];
            b[i] -= t;
        }
    }
    let mut y = vec![ctx.zero(); n];
    for k in (0..n).rev() {
        let mut s = b[k].clone();
        for j in k + 1..n {
            s -= &a[k][j] * &y[j];
        }
        y[k] = &s / &a[k][k];
    }
    let mut x = vec![ctx.zero(); n];
    for k in 0..n {
        x[perm[k]] = y[k].clone();
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_system() {
        let ctx = PrecisionContext::new(128).unwrap();
        let a = vec![
            vec![ctx.complex(0.0, 0.0), ctx.complex(2.0, 1.0)],
            vec![ctx.complex(1.0, 0.0), ctx.complex(3.0, 0.0)],
        ];
        let b = vec![ctx.complex(2.0, 1.0), ctx.complex(4.0, 0.0)];
        let x = solve_linear(a, b, &ctx).unwrap();
        assert!((&x[0] - &ctx.complex(1.0, 0.0)).abs() < 1e-35);
        assert!((&x[1] - &ctx.complex(1.0, 0.0)).abs() < 1e-35);
    }

    #[test]
    fn singular_detected() {
        let ctx = PrecisionContext::new(128).unwrap();
        let a = vec![vec![ctx.one(), ctx.one()], vec![ctx.one(), ctx.one()]];
        let b = vec![ctx.one(), ctx.zero()];
        assert!(matches!(solve_linear(a, b, &ctx), Err(Error::SingularSystem { .. })));
    }
}
