use crate::linalg::Vector;

/// Scalar training objective with its gradient.
pub trait Loss {
    type Target: ?Sized;
    /// Returns the loss value and `∂loss/∂output`.
    fn eval(&self, output: &[f64], target: &Self::Target) -> (f64, Vector);
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vector {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SoftmaxCrossEntropy;

impl Loss for SoftmaxCrossEntropy {
    type Target = usize;

    fn eval(&self, output: &[f64], label: &usize) -> (f64, Vector) {
        assert!(*label < output.len(), "label {label} out of range");
        let m = output.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + output.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let mut grad = softmax(output);
        grad[*label] -= 1.0;
        (lse - output[*label], grad)
    }
}

/// `½‖y − t‖²`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SquaredError;

impl Loss for SquaredError {
    type Target = [f64];

    fn eval(&self, output: &[f64], target: &[f64]) -> (f64, Vector) {
        assert_eq!(output.len(), target.len());
        let grad: Vector = output.iter().zip(target).map(|(y, t)| y - t).collect();
        (0.5 * grad.norm_sq(), grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_uniform_logits() {
        let (l, g) = SoftmaxCrossEntropy.eval(&[0.0; 4], &2);
        assert!((l - 4f64.ln()).abs() < 1e-15);
        assert!((g[2] + 0.75).abs() < 1e-15 && (g[0] - 0.25).abs() < 1e-15);
        let (l, _) = SoftmaxCrossEntropy.eval(&[1000.0, 0.0], &0);
        assert!(l.is_finite() && l < 1e-12);
    }

    #[test]
    fn cross_entropy_gradient_fd() {
        let z = [0.3, -1.2, 2.0];
        let (_, g) = SoftmaxCrossEntropy.eval(&z, &1);
        let h = 1e-6;
        for k in 0..3 {
            let mut zp = z;
            let mut zm = z;
            zp[k] += h;
            zm[k] -= h;
            let fd = (SoftmaxCrossEntropy.eval(&zp, &1).0 - SoftmaxCrossEntropy.eval(&zm, &1).0) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8);
        }
    }
}
