//! Triplet margin loss over Euclidean distances and its analytic gradient.

use super::EmbedError;

/// Distances below this are treated as zero; the loss is not differentiable
/// there and the subgradient contribution is taken as zero.
pub const DISTANCE_EPS: f64 = 1e-12;

fn check_dims(a: &[f64], p: &[f64], n: &[f64]) -> Result<(), EmbedError> {
    for other in [p, n] {
        if other.len() != a.len() {
            return Err(EmbedError::DimensionMismatch {
                expected: a.len(),
                found: other.len(),
            });
        }
    }
    Ok(())
}

pub(crate) fn euclidean(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `max(‖a − p‖ − ‖a − n‖ + margin, 0)`.
pub fn triplet_loss(a: &[f64], p: &[f64], n: &[f64], margin: f64) -> Result<f64, EmbedError> {
    check_dims(a, p, n)?;
    Ok((euclidean(a, p) - euclidean(a, n) + margin).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletGradients {
    pub loss: f64,
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

/// Loss together with its gradient w.r.t. each of the three vectors.
///
/// On the flat region (loss = 0) all gradients are zero.
pub fn triplet_loss_gradients(
    a: &[f64],
    p: &[f64],
    n: &[f64],
    margin: f64,
) -> Result<TripletGradients, EmbedError> {
    check_dims(a, p, n)?;
    let d = a.len();
    let d_ap = euclidean(a, p);
    let d_an = euclidean(a, n);
    let loss = (d_ap - d_an + margin).max(0.0);

    let mut grad_p = vec![0.0; d];
    let mut grad_n = vec![0.0; d];
    if loss > 0.0 {
        if d_ap >= DISTANCE_EPS {
            for i in 0..d {
                grad_p[i] = -(a[i] - p[i]) / d_ap;
            }
        }
        if d_an >= DISTANCE_EPS {
            for i in 0..d {
                grad_n[i] = (a[i] - n[i]) / d_an;
            }
        }
    }
    let grad_a = grad_p.iter().zip(&grad_n).map(|(gp, gn)| -gp - gn).collect();
    Ok(TripletGradients {
        loss,
        anchor: grad_a,
        positive: grad_p,
        negative: grad_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn satisfied_margin_is_zero() {
        let loss = triplet_loss(&[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], 0.1).unwrap();
        assert_eq!(loss, 0.0);
        let g = triplet_loss_gradients(&[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], 0.1).unwrap();
        assert!(g.anchor.iter().chain(&g.positive).chain(&g.negative).all(|v| *v == 0.0));
    }

    #[test]
    fn direct_formula() {
        let loss = triplet_loss(&[0.0, 0.0], &[1.0, 0.0], &[0.5, 0.0], 0.1).unwrap();
        assert!((loss - 0.6).abs() < 1e-12);
        let loss = triplet_loss(&[0.0, 0.0], &[0.3, 0.0], &[0.0, 0.0], 0.1).unwrap();
        assert!((loss - 0.4).abs() < 1e-12);
    }

    #[test]
    fn coincident_anchor_positive() {
        let g = triplet_loss_gradients(&[1.0, 1.0], &[1.0, 1.0], &[1.05, 1.0], 0.1).unwrap();
        assert!(g.loss > 0.0);
        assert_eq!(g.positive, vec![0.0, 0.0]);
        assert!((g.negative[0] - -1.0).abs() < 1e-12);
        assert_eq!(g.anchor[0], -g.negative[0]);
    }

    #[test]
    fn dimension_mismatch() {
        let err = triplet_loss(&[0.0], &[0.0, 1.0], &[0.0], 0.1).unwrap_err();
        assert!(matches!(err, EmbedError::DimensionMismatch { expected: 1, found: 2 }));
        assert!(triplet_loss_gradients(&[0.0], &[0.0], &[0.0, 1.0], 0.1).is_err());
    }
}
