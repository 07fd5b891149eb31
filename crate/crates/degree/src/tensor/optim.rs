//! SGD with classical momentum.

use super::{ConvGrads, ConvParams, Scalar};
use crate::error::{Error, Result};

/// Classical momentum update for one parameter group:
///
/// v <- momentum * v - lr * g
/// p <- p + v
///
/// With momentum 0 this is plain gradient descent. A non-finite gradient
/// aborts the step before touching any state, so the parameters and
/// velocities remain exactly as they were.
pub fn sgd_momentum_step<S: Scalar>(
    params: &mut ConvParams<S>,
    grads: &ConvGrads<S>,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if !(lr > 0.0) {
        return Err(Error::InvalidConfig(format!("learning rate must be > 0, got {lr}")));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::InvalidConfig(format!(
            "momentum must be in [0, 1), got {momentum}"
        )));
    }
    if grads.weights.shape() != params.weights.shape() || grads.bias.len() != params.bias.len() {
        return Err(Error::shape(
            "sgd_momentum_step",
            params.weights.shape(),
            grads.weights.shape(),
        ));
    }
    if let Some(index) = grads.non_finite_index() {
        return Err(Error::NonFinite {
            context: "gradient passed to sgd_momentum_step".into(),
            index,
        });
    }

    let mu = S::from_f64(momentum);
    let step = S::from_f64(lr);
    for ((p, v), &g) in params
        .weights
        .data_mut()
        .iter_mut()
        .zip(params.w_velocity.data_mut())
        .zip(grads.weights.data())
    {
        *v = mu * *v - step * g;
        *p += *v;
    }
    for ((p, v), &g) in params
        .bias
        .iter_mut()
        .zip(params.b_velocity.iter_mut())
        .zip(grads.bias.iter())
    {
        *v = mu * *v - step * g;
        *p += *v;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn one_param_group(g: f64) -> (ConvParams<f64>, ConvGrads<f64>) {
        let params = ConvParams::<f64>::zeroed(1, 1, 1).unwrap();
        let mut grads = ConvGrads::zeroed_like(&params);
        grads.weights.data_mut()[0] = g;
        (params, grads)
    }

    #[test]
    fn zero_momentum_is_plain_gradient_descent() {
        let (mut p, g) = one_param_group(2.0);
        p.weights.data_mut()[0] = 1.0;
        sgd_momentum_step(&mut p, &g, 0.25, 0.0).unwrap();
        assert_eq!(p.weights.data()[0], 1.0 - 0.25 * 2.0);
    }

    #[test]
    fn two_steps_hand_computed() {
        // p=0, v=0, g=1, lr=0.1, momentum=0.9:
        // step 1: v=-0.1,  p=-0.1
        // step 2: v=0.9*(-0.1)-0.1=-0.19, p=-0.29
        let (mut p, g) = one_param_group(1.0);
        sgd_momentum_step(&mut p, &g, 0.1, 0.9).unwrap();
        assert!((p.weights.data()[0] - (-0.1)).abs() < 1e-15);
        sgd_momentum_step(&mut p, &g, 0.1, 0.9).unwrap();
        assert!((p.w_velocity.data()[0] - (-0.19)).abs() < 1e-15);
        assert!((p.weights.data()[0] - (-0.29)).abs() < 1e-15);
    }

    #[test]
    fn accepts_reference_training_configuration() {
        let (mut p, g) = one_param_group(0.5);
        assert!(sgd_momentum_step(&mut p, &g, 0.0001, 0.9).is_ok());
    }

    #[test]
    fn non_finite_gradient_aborts_without_touching_state() {
        let (mut p, mut g) = one_param_group(1.0);
        p.weights.data_mut()[0] = 3.0;
        p.w_velocity.data_mut()[0] = -0.5;
        g.weights.data_mut()[0] = f64::NAN;
        let err = sgd_momentum_step(&mut p, &g, 0.1, 0.9).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert_eq!(p.weights.data()[0], 3.0);
        assert_eq!(p.w_velocity.data()[0], -0.5);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let (mut p, g) = one_param_group(1.0);
        assert!(sgd_momentum_step(&mut p, &g, 0.0, 0.9).is_err());
        assert!(sgd_momentum_step(&mut p, &g, 0.1, 1.0).is_err());
        assert!(sgd_momentum_step(&mut p, &g, 0.1, -0.1).is_err());
    }

    #[test]
    fn velocity_shapes_mirror_parameters() {
        let p = ConvParams::<f32>::zeroed(4, 3, 3).unwrap();
        assert_eq!(p.w_velocity.shape(), p.weights.shape());
        assert_eq!(p.b_velocity.len(), p.bias.len());
        let wrong = {
            let q = ConvParams::<f32>::zeroed(4, 2, 3).unwrap();
            ConvGrads::zeroed_like(&q)
        };
        let mut p = p;
        assert!(sgd_momentum_step(&mut p, &wrong, 0.1, 0.0).is_err());
    }
}
