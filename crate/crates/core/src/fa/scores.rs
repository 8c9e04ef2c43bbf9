use nalgebra::DMatrix;

use super::{sym_eigen, CorrelationMatrix};
use crate::error::{Error, Result};

const MAX_CONDITION: f64 = 1e12;
const RIDGE: f64 = 1e-8;

/// Regression factor scores `z sigma^{-1} lambda`, with a small ridge on
/// `sigma` when it is ill conditioned.
pub fn scores(z: &DMatrix<f64>, sigma: &CorrelationMatrix, lambda: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = sigma.dim();
    if z.ncols() != p || lambda.nrows() != p {
        return Err(Error::Contract(format!(
            "score dimensions: data has {} columns, loadings {} rows, correlation {p}",
            z.ncols(),
            lambda.nrows()
        )));
    }
    let (vals, _) = sym_eigen(&sigma.sigma);
    let (max, min) = (vals[0], vals[p - 1]);
    let mut s = sigma.sigma.clone();
    if min.is_nan() || min <= 0.0 || max / min > MAX_CONDITION {
        for i in 0..p {
            s[(i, i)] += RIDGE;
        }
    }
    let weights = match s.clone().cholesky() {
        Some(ch) => ch.solve(lambda),
        None => s
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Input(format!("correlation matrix not invertible: {e}")))?
            * lambda,
    };
    Ok(z * weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fa::{correlation, extract, FaOptions};

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn one_factor_data() -> (Vec<Vec<f64>>, Vec<f64>) {
        let a = [0.9, -0.4, 0.7, 0.2, 1.5];
        let g: Vec<f64> = (0..40).map(|i| ((i * 37 % 17) as f64 - 8.0) / 3.0).collect();
        (g.iter().map(|&gn| a.iter().map(|&ak| ak * gn).collect()).collect(), g)
    }

    #[test]
    fn noiseless_single_factor_scores_track_g() {
        let (rows, g) = one_factor_data();
        let c = correlation(&rows).unwrap();
        let m = extract(&c, &FaOptions { n_factors: Some(1), ..FaOptions::default() }).unwrap();
        let z = c.standardize(&rows).unwrap();
        let s = scores(&z, &c, &m.lambda).unwrap();
        let r = pearson(s.column(0).as_slice(), &g);
        assert!((r.abs() - 1.0).abs() < 1e-9, "r = {r}");
    }

    #[test]
    fn zero_row_and_duplicate_rows() {
        let (mut rows, _) = one_factor_data();
        rows.push(rows[3].clone());
        let c = correlation(&rows).unwrap();
        let m = extract(&c, &FaOptions { n_factors: Some(1), ..FaOptions::default() }).unwrap();
        let mut z = c.standardize(&rows).unwrap();
        let n = z.nrows();
        let s = scores(&z, &c, &m.lambda).unwrap();
        assert_eq!(s.row(3), s.row(n - 1));
        z.row_mut(0).fill(0.0);
        let s = scores(&z, &c, &m.lambda).unwrap();
        assert!(s.row(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let (rows, _) = one_factor_data();
        let c = correlation(&rows).unwrap();
        let z = DMatrix::zeros(3, 2);
        assert!(matches!(scores(&z, &c, &DMatrix::zeros(5, 1)), Err(Error::Contract(_))));
    }
}
