//! Dense solve for the small normal-equation systems used by SH fitting.

use crate::real::Real;

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `tol` relative to the largest
/// diagonal entry.
pub(crate) fn solve<T: Real, const N: usize>(mut a: [[T; N]; N], mut b: [T; N], tol: T) -> Option<[T; N]> {
    let scale = (0..N).map(|i| a[i][i].abs()).fold(T::zero(), T::max);
    if scale <= T::zero() {
        return None;
    }
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() <= tol * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for k in col..N {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [T::zero(); N];
    for row in (0..N).rev() {
        let mut s = b[row];
        for k in row + 1..N {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_permuted_system() {
        let a = [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        let x = [1.0, -2.0, 0.5];
        let b = [0, 1, 2].map(|i| (0..3).map(|k| a[i][k] * x[k]).sum::<f64>());
        let got = solve(a, b, 1e-12).unwrap();
        for k in 0..3 {
            assert!((got[k] - x[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_none() {
        let a = [[1.0, 2.0], [2.0, 4.0]];
        assert!(solve(a, [1.0, 2.0], 1e-12).is_none());
    }
}
