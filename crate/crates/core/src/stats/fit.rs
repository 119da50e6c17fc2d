use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// y = a + b·log x
    LogLinear,
    /// log y = a + b·log x
    LogLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub slope: f64,
    pub intercept: f64,
    pub correlation: f64,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares in the transformed coordinates of `model`.
// negated comparisons so NaN is rejected too
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn fit(model: FitModel, points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(
            "fit needs at least 3 points".into(),
        ));
    }
    if points.iter().any(|&(x, _)| !(x > 0.0)) {
        return Err(Error::InvalidParameter("abscissae must be positive".into()));
    }
    if model == FitModel::LogLog && points.iter().any(|&(_, y)| !(y > 0.0)) {
        return Err(Error::InvalidParameter(
            "log-log fit needs positive ordinates".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|p| match model {
            FitModel::LogLinear => p.1,
            FitModel::LogLog => p.1.ln(),
        })
        .collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= f64::EPSILON * n {
        return Err(Error::InvalidParameter("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let correlation = if syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    };
    let residuals = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    Ok(FitResult {
        model,
        slope,
        intercept,
        correlation,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_log_linear_data() {
        let pts: Vec<_> = [2.0f64, 5.0, 11.0, 40.0]
            .iter()
            .map(|&x| (x, 2.0 + 3.0 * x.ln()))
            .collect();
        let f = fit(FitModel::LogLinear, &pts).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!((f.intercept - 2.0).abs() < 1e-12);
        assert!((f.correlation - 1.0).abs() < 1e-12);
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn exact_on_power_law() {
        let pts: Vec<_> = [1e3f64, 1e4, 1e5, 1e6]
            .iter()
            .map(|&x| (x, x.powf(0.25)))
            .collect();
        let f = fit(FitModel::LogLog, &pts).unwrap();
        assert!((f.slope - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(fit(FitModel::LogLinear, &[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit(FitModel::LogLinear, &[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(fit(FitModel::LogLinear, &[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).is_err());
        assert!(fit(FitModel::LogLog, &[(1.0, 0.0), (2.0, 2.0), (3.0, 3.0)]).is_err());
    }
}
