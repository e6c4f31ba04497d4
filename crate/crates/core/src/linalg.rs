//! Small dense helpers for k×k matrices stored row-major.

use crate::real::Real;

/// Inverts the `n×n` matrix `a` into `inv` by Gauss-Jordan elimination with
/// partial pivoting. Returns `ln|det a|`, or `None` when `a` is singular.
pub fn invert<T: Real>(a: &[T], n: usize, inv: &mut [T]) -> Option<T> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(inv.len(), n * n);
    let mut work: Vec<T> = a.to_vec();
    for (i, v) in inv.iter_mut().enumerate() {
        *v = if i / n == i % n { T::one() } else { T::zero() };
    }
    let mut log_det = T::zero();
    for col in 0..n {
        let (pivot, pmax) = (col..n)
            .map(|r| (r, work[r * n + col].abs()))
            .fold((col, T::zero()), |acc, c| if c.1 > acc.1 { c } else { acc });
        if pmax <= T::epsilon() * T::lit(1e-3) || !pmax.is_finite() {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                work.swap(pivot * n + c, col * n + c);
                inv.swap(pivot * n + c, col * n + c);
            }
        }
        let p = work[col * n + col];
        log_det = log_det + p.abs().ln();
        for c in 0..n {
            work[col * n + c] = work[col * n + c] / p;
            inv[col * n + c] = inv[col * n + c] / p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = work[r * n + col];
            if f == T::zero() {
                continue;
            }
            for c in 0..n {
                work[r * n + c] = work[r * n + c] - f * work[col * n + c];
                inv[r * n + c] = inv[r * n + c] - f * inv[col * n + c];
            }
        }
    }
    Some(log_det)
}

/// `out = m · v` for an `rows×cols` row-major matrix.
#[inline]
pub fn mat_vec<T: Real>(m: &[T], rows: usize, cols: usize, v: &[T], out: &mut [T]) {
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        out[r] = row
            .iter()
            .zip(v)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Solves the square system `a x = b` (row-major `a`) in place of `b`.
pub fn solve<T: Real>(a: &[T], n: usize, b: &[T]) -> Option<Vec<T>> {
    let mut inv = vec![T::zero(); n * n];
    invert(a, n, &mut inv)?;
    let mut x = vec![T::zero(); n];
    mat_vec(&inv, n, n, b, &mut x);
    Some(x)
}
