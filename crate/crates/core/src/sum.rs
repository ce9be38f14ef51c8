//! Fixed-order reductions. Results depend only on the input order, never on how
//! work was scheduled.

use num_complex::Complex64;

const LEAF: usize = 8;

/// Pairwise summation with a fixed split: the rounding pattern is a pure function of the length.
pub fn pairwise(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise(&xs[..mid]) + pairwise(&xs[mid..])
}

pub fn pairwise_complex(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_complex(&xs[..mid]) + pairwise_complex(&xs[mid..])
}

/// Column-wise pairwise sum of equally long rows.
pub fn pairwise_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    match rows.len() {
        0 => Vec::new(),
        1 => rows[0].clone(),
        len => {
            let (lo, hi) = rows.split_at(len / 2);
            let mut a = pairwise_rows(lo);
            let b = pairwise_rows(hi);
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise(&xs), 499_500.0);
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        assert_eq!(pairwise_rows(&rows), vec![9.0, 12.0]);
    }
}
