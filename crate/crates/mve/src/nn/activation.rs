use serde::{Deserialize, Serialize};

/// Element-wise activation of a dense layer.
///
/// All three derivatives are recoverable from the post-activation value, so
/// the backward pass never needs the pre-activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    /// Exponential linear unit with alpha = 1: `z` for `z > 0`, `e^z - 1` otherwise.
    Elu,
    /// Identity.
    Linear,
    /// `e^z`. Used as the final transform of a variance head so the output is
    /// strictly positive and the head effectively learns a log-variance.
    Exp,
}

impl Activation {
    #[inline]
    pub fn forward(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp() - 1.0
                }
            }
            Activation::Linear => z,
            Activation::Exp => z.exp(),
        }
    }

    /// Derivative expressed through the output value `y = forward(z)`.
    #[inline]
    pub fn grad_from_output(self, y: f64) -> f64 {
        match self {
            // For z <= 0, y = e^z - 1, so dy/dz = e^z = y + 1.
            Activation::Elu => {
                if y > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Activation::Linear => 1.0,
            Activation::Exp => y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Elu => "elu",
            Activation::Linear => "linear",
            Activation::Exp => "exp",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn elu_bounds_and_continuity() {
        assert_abs_diff_eq!(Activation::Elu.forward(0.0), 0.0);
        assert_abs_diff_eq!(Activation::Elu.forward(2.0), 2.0);
        assert_abs_diff_eq!(Activation::Elu.forward(-2.0), (-2.0_f64).exp() - 1.0);
        // ELU output stays above -1 (saturating to exactly -1.0 in f64 once
        // exp(z) drops below machine epsilon).
        for z in [-5.0, -0.1, 0.0, 0.1, 5.0] {
            assert!(Activation::Elu.forward(z) > -1.0);
        }
        assert!(Activation::Elu.forward(-50.0) >= -1.0);
        // C1 at the origin.
        assert_abs_diff_eq!(Activation::Elu.grad_from_output(0.0), 1.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for act in [Activation::Elu, Activation::Linear, Activation::Exp] {
            for z in [-1.3, -0.2, 0.4, 2.0] {
                let numeric = (act.forward(z + h) - act.forward(z - h)) / (2.0 * h);
                let analytic = act.grad_from_output(act.forward(z));
                assert_abs_diff_eq!(analytic, numeric, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn exp_output_positive() {
        for z in [-30.0, 0.0, 3.0] {
            assert!(Activation::Exp.forward(z) > 0.0);
        }
    }
}
