//! Distance kernels shared by clustering, neighbor ranking, drift and
//! classification.
//!
//! All reductions run in ascending coordinate order so that a pair
//! evaluated as `(u, v)` or `(v, u)` yields the same bits.

#[inline]
pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `1 - u·v`. Only meaningful for unit vectors, where it lies in `[0, 2]`.
#[inline]
pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    1.0 - dot(u, v)
}

#[inline]
pub fn manhattan(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum()
}

#[inline]
pub fn squared_euclidean(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter()
        .zip(v)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

#[inline]
pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_distance_of_unit_vectors_is_bounded() {
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0];
        let neg = [-1.0, 0.0, 0.0];
        assert_eq!(cosine_distance(&e1, &e1), 0.0);
        assert_eq!(cosine_distance(&e1, &e2), 1.0);
        assert_eq!(cosine_distance(&e1, &neg), 2.0);
    }

    #[test]
    fn pair_order_does_not_change_bits() {
        let u = [0.1, -0.7, 0.3, 0.25];
        let v = [0.9, 0.05, -0.4, 0.11];
        assert_eq!(dot(&u, &v).to_bits(), dot(&v, &u).to_bits());
        assert_eq!(manhattan(&u, &v).to_bits(), manhattan(&v, &u).to_bits());
        assert_eq!(squared_euclidean(&u, &v).to_bits(), squared_euclidean(&v, &u).to_bits());
    }

    #[test]
    fn manhattan_sums_absolute_differences() {
        assert_eq!(manhattan(&[1.0, 2.0, 3.0], &[0.0, 4.0, 3.5]), 3.5);
    }
}
