use super::Parameters;
use crate::{Error, Result};

/// Worst coordinate found by [`gradient_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Compares `analytic` against central differences of `loss` around `params`
/// for every scalar. The relative error per coordinate is
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn gradient_check<P, F>(
    params: &P,
    analytic: &P,
    eps: f64,
    mut loss: F,
) -> Result<GradCheckReport>
where
    P: Parameters + Clone,
    F: FnMut(&P) -> Result<f64>,
{
    let analytic_tensors = analytic.tensors();
    let shapes: Vec<(String, usize)> = params
        .tensors()
        .iter()
        .map(|t| (t.name.clone(), t.data.len()))
        .collect();
    if analytic_tensors.len() != shapes.len()
        || analytic_tensors
            .iter()
            .zip(&shapes)
            .any(|(a, s)| a.data.len() != s.1)
    {
        return Err(Error::Dimension(
            "analytic gradient does not match parameters".into(),
        ));
    }

    let mut probe = params.clone();
    let mut eval = |p: &P| -> Result<f64> {
        let value = loss(p)?;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFinite(format!("loss evaluated to {value}")))
        }
    };
    eval(params)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        tensor: String::new(),
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    for (t, (name, len)) in shapes.iter().enumerate() {
        for i in 0..*len {
            let original = probe.tensors_mut()[t][i];
            probe.tensors_mut()[t][i] = original + eps;
            let plus = eval(&probe)?;
            probe.tensors_mut()[t][i] = original - eps;
            let minus = eval(&probe)?;
            probe.tensors_mut()[t][i] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic_tensors[t].data[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.coordinates += 1;
            if rel > report.max_rel_error || report.tensor.is_empty() {
                report = GradCheckReport {
                    max_rel_error: rel,
                    tensor: name.clone(),
                    index: i,
                    analytic: a,
                    numeric,
                    coordinates: report.coordinates,
                };
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let params = vec![0.3, -1.2, 2.5];
        let coeffs = [1.0, 4.0, 0.5];
        let analytic: Vec<f64> = params
            .iter()
            .zip(coeffs)
            .map(|(p, c)| 2.0 * c * p)
            .collect();
        let report = gradient_check(&params, &analytic, 1e-5, |p| {
            Ok(p.iter().zip(coeffs).map(|(p, c)| c * p * p).sum())
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
        assert_eq!(report.coordinates, 3);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let params = vec![1.0, 2.0];
        let wrong = vec![2.0, 3.0];
        let report =
            gradient_check(&params, &wrong, 1e-5, |p| Ok(p.iter().map(|v| v * v).sum())).unwrap();
        assert!(report.max_rel_error > 0.2);
        assert_eq!(report.index, 1);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let params = vec![1.0];
        let err = gradient_check(&params, &vec![0.0], 1e-5, |_| Ok(f64::NAN)).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }
}
