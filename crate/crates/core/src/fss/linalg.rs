//! Small dense least-squares solver (Householder QR) generic over the float
//! type.

use num_traits::Float;

/// Solves `min || W (A c - y) ||` for `c`, where `A` is `rows x cols` in
/// row-major order and `W = diag(weights)`. Returns `None` when `A` is
/// rank-deficient to working precision.
pub fn weighted_lstsq<T: Float>(a: &[T], y: &[T], weights: &[T], cols: usize) -> Option<Vec<T>> {
    let rows = y.len();
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(weights.len(), rows);
    if rows < cols || cols == 0 {
        return None;
    }
    // column-major working copy of W A and W y
    let mut m: Vec<T> = vec![T::zero(); rows * cols];
    let mut b: Vec<T> = y.iter().zip(weights).map(|(&v, &w)| v * w).collect();
    for r in 0..rows {
        for c in 0..cols {
            m[c * rows + r] = a[r * cols + c] * weights[r];
        }
    }
    let mut scale = T::zero();
    let mut diag = vec![T::zero(); cols];
    for k in 0..cols {
        let col = &mut m[k * rows..(k + 1) * rows];
        let norm = col[k..].iter().fold(T::zero(), |s, &v| s.hypot(v));
        scale = scale.max(norm);
        if norm == T::zero() {
            return None;
        }
        let alpha = if col[k] > T::zero() { -norm } else { norm };
        diag[k] = alpha;
        col[k] = col[k] - alpha;
        let vnorm2 = col[k..].iter().fold(T::zero(), |s, &v| s + v * v);
        if vnorm2 == T::zero() {
            continue;
        }
        let v: Vec<T> = col[k..].to_vec();
        for j in k + 1..cols {
            let cj = &mut m[j * rows..(j + 1) * rows];
            let dot = v.iter().zip(&cj[k..]).fold(T::zero(), |s, (&a, &b)| s + a * b);
            let f = (dot + dot) / vnorm2;
            for (x, &vi) in cj[k..].iter_mut().zip(&v) {
                *x = *x - f * vi;
            }
        }
        let dot = v.iter().zip(&b[k..]).fold(T::zero(), |s, (&a, &b)| s + a * b);
        let f = (dot + dot) / vnorm2;
        for (x, &vi) in b[k..].iter_mut().zip(&v) {
            *x = *x - f * vi;
        }
    }
    let tiny = scale * T::epsilon() * T::from(rows.max(cols)).expect("small integer");
    if diag.iter().any(|d| d.abs() <= tiny) {
        return None;
    }
    let mut c = vec![T::zero(); cols];
    for k in (0..cols).rev() {
        let mut s = b[k];
        for j in k + 1..cols {
            s = s - m[j * rows + k] * c[j];
        }
        c[k] = s / diag[k];
    }
    Some(c)
}

/// Unweighted ordinary least squares.
pub fn lstsq<T: Float>(a: &[T], y: &[T], cols: usize) -> Option<Vec<T>> {
    weighted_lstsq(a, y, &vec![T::one(); y.len()], cols)
}

/// Straight-line fit `y = a + b x`; returns `(a, b)`.
pub fn line_fit<T: Float>(x: &[T], y: &[T]) -> Option<(T, T)> {
    let design: Vec<T> = x.iter().flat_map(|&v| [T::one(), v]).collect();
    lstsq(&design, y, 2).map(|c| (c[0], c[1]))
}

pub fn polyval<T: Float>(coeffs: &[T], x: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (a, b) = line_fit(&x, &y).unwrap();
        assert_relative_eq!(a, 2.0, epsilon = 1e-12);
        assert_relative_eq!(b, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn overdetermined_matches_normal_equations() {
        // y = 1 + x with one outlier; OLS slope and intercept by hand
        let x = [0.0f64, 1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 3.0, 8.0];
        let (a, b) = line_fit(&x, &y).unwrap();
        // sxx = 5, sxy = 11, mean x = 1.5, mean y = 3.5
        assert_relative_eq!(b, 2.2, epsilon = 1e-12);
        assert_relative_eq!(a, 3.5 - 2.2 * 1.5, epsilon = 1e-12);
    }

    #[test]
    fn weights_and_f32() {
        let x = [0.0f32, 1.0, 2.0];
        let y = [0.0f32, 1.0, 10.0];
        let design: Vec<f32> = x.iter().flat_map(|&v| [1.0, v]).collect();
        // huge weight on the first two points pins the line through them
        let c = weighted_lstsq(&design, &y, &[1e4, 1e4, 1e-4], 2).unwrap();
        assert!((c[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rank_deficient() {
        let design = [1.0, 2.0, 2.0, 4.0, 3.0, 6.0];
        assert!(lstsq(&design, &[1.0, 2.0, 3.0], 2).is_none());
        assert!(lstsq(&[0.0f64, 0.0], &[1.0, 2.0], 1).is_none());
    }

    #[test]
    fn polyval_horner() {
        assert_eq!(polyval(&[1.0, 2.0, 3.0], 2.0), 17.0);
    }
}
