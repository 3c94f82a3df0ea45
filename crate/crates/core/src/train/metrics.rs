use crate::{Error, Result};

/// Pairwise (cascade) summation; the result does not depend on how callers
/// chunked the work, only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "pearson of {} and {} values",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Invalid("pearson needs at least two pairs".into()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let da: Vec<f64> = a.iter().map(|x| x - ma).collect();
    let db: Vec<f64> = b.iter().map(|y| y - mb).collect();
    let saa = pairwise_sum(&da.iter().map(|x| x * x).collect::<Vec<_>>());
    let sbb = pairwise_sum(&db.iter().map(|y| y * y).collect::<Vec<_>>());
    if saa == 0.0 {
        return Err(Error::ZeroVariance("first pearson argument is constant"));
    }
    if sbb == 0.0 {
        return Err(Error::ZeroVariance("second pearson argument is constant"));
    }
    let sab = pairwise_sum(&da.iter().zip(&db).map(|(x, y)| x * y).collect::<Vec<_>>());
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "rmse of {} and {} values",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Invalid("rmse of no values".into()));
    }
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    Ok(mean(&sq).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // textbook two-pass formula with naive sums
    fn oracle_pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn pearson_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(pearson(&a, &a).unwrap(), 1.0);
        assert_eq!(pearson(&a, &[-1.0, -2.0, -3.0]).unwrap(), -1.0);
        let r = pearson(&a, &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - (27.0f64 / 28.0).sqrt()).abs() < 1e-12);
        assert!((r - oracle_pearson(&a, &[1.0, 2.0, 4.0])).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::ZeroVariance(_))
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0], &[3.0, 3.0]),
            Err(Error::ZeroVariance(_))
        ));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!((rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(
            a in proptest::collection::vec(-10.0f64..10.0, 3..40),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x * x + i as f64).collect();
            prop_assume!(pearson(&a, &b).is_ok());
            let r = pearson(&a, &b).unwrap();
            let moved: Vec<f64> = a.iter().map(|x| scale * x + shift).collect();
            prop_assert!((pearson(&moved, &b).unwrap() - r).abs() < 1e-9);
            let neg: Vec<f64> = a.iter().map(|x| -x).collect();
            prop_assert!((pearson(&neg, &b).unwrap() + r).abs() < 1e-9);
            prop_assert!((r - oracle_pearson(&a, &b)).abs() < 1e-9);
        }
    }
}
