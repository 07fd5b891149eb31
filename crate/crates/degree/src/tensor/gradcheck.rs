//! Central finite-difference gradient checker (64-bit only).

use crate::error::{Error, Result};

/// Outcome of a finite-difference sweep.
#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// Compare an analytic gradient against central differences of the scalar
/// objective `f` evaluated at `theta`. Each coordinate is perturbed by
/// ± `epsilon` and restored; the relative error denominator is
/// max(|analytic|, |numeric|, 1e-8). `skip` excludes coordinates (e.g. a
/// band around a rectifier kink where the derivative is not defined).
pub fn finite_difference_check_masked(
    theta: &mut [f64],
    analytic: &[f64],
    epsilon: f64,
    mut f: impl FnMut(&[f64]) -> f64,
    skip: impl Fn(usize) -> bool,
) -> Result<GradCheck> {
    if !(1e-6..=1e-4).contains(&epsilon) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference epsilon must lie in [1e-6, 1e-4], got {epsilon}"
        )));
    }
    if theta.len() != analytic.len() {
        return Err(Error::shape(
            "finite_difference_check",
            format!("{} analytic entries", theta.len()),
            format!("{}", analytic.len()),
        ));
    }
    let mut report = GradCheck {
        max_rel_err: 0.0,
        worst_index: 0,
        checked: 0,
    };
    for i in 0..theta.len() {
        if skip(i) {
            continue;
        }
        let saved = theta[i];
        theta[i] = saved + epsilon;
        let plus = f(theta);
        theta[i] = saved - epsilon;
        let minus = f(theta);
        theta[i] = saved;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        let rel = (numeric - analytic[i]).abs() / denom;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_index = i;
        }
        report.checked += 1;
    }
    Ok(report)
}

/// [`finite_difference_check_masked`] over every coordinate.
pub fn finite_difference_check(
    theta: &mut [f64],
    analytic: &[f64],
    epsilon: f64,
    f: impl FnMut(&[f64]) -> f64,
) -> Result<GradCheck> {
    finite_difference_check_masked(theta, analytic, epsilon, f, |_| false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{
        add, conv2d_backward, conv2d_forward, relu_backward, relu_forward, ConvParams, Shape,
        Tensor,
    };
    use rand::{Rng, SeedableRng};

    #[test]
    fn linear_map_is_exact() {
        // Objective sum(a + b) w.r.t. a: gradient is all-ones and central
        // differences are exact for linear maps.
        let shape = Shape::new(1, 2, 3, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let b = Tensor::<f64>::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0));
        let mut theta: Vec<f64> = (0..shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let analytic = vec![1.0; shape.len()];
        let report = finite_difference_check(&mut theta, &analytic, 1e-5, |t| {
            let a = Tensor::new(shape, t.to_vec()).unwrap();
            add(&a, &b).unwrap().data().iter().sum()
        })
        .unwrap();
        assert!(report.max_rel_err < 1e-10, "{}", report.max_rel_err);
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let in_shape = Shape::new(2, 3, 5, 5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let input = Tensor::<f64>::from_fn(in_shape, |_, _, _, _| rng.random_range(-1.0..1.0));
        let mut params = ConvParams::<f64>::zeroed(3, 3, 3).unwrap();
        for v in params.weights.data_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
        for v in params.bias.iter_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
        // Weighted sum objective so grad_out is a generic tensor, not ones.
        let out_shape = Shape::new(2, 3, 5, 5).unwrap();
        let weights_obj =
            Tensor::<f64>::from_fn(out_shape, |_, _, _, _| rng.random_range(-1.0..1.0));

        let (gi, gw, gb) = conv2d_backward(&input, &params, &weights_obj).unwrap();

        // d/d input
        let mut theta = input.data().to_vec();
        let report = finite_difference_check(&mut theta, gi.data(), 1e-5, |t| {
            let x = Tensor::new(in_shape, t.to_vec()).unwrap();
            conv2d_forward(&x, &params, 1)
                .unwrap()
                .data()
                .iter()
                .zip(weights_obj.data())
                .map(|(a, b)| a * b)
                .sum()
        })
        .unwrap();
        assert!(report.max_rel_err < 1e-6, "input: {}", report.max_rel_err);

        // d/d weights and bias, checked through one flattened vector.
        let wlen = params.weights.shape().len();
        let mut theta: Vec<f64> = params
            .weights
            .data()
            .iter()
            .chain(params.bias.iter())
            .copied()
            .collect();
        let analytic: Vec<f64> = gw.data().iter().chain(gb.iter()).copied().collect();
        let report = finite_difference_check(&mut theta, &analytic, 1e-5, |t| {
            let mut p = params.clone();
            p.weights.data_mut().copy_from_slice(&t[..wlen]);
            p.bias.copy_from_slice(&t[wlen..]);
            conv2d_forward(&input, &p, 1)
                .unwrap()
                .data()
                .iter()
                .zip(weights_obj.data())
                .map(|(a, b)| a * b)
                .sum()
        })
        .unwrap();
        assert!(report.max_rel_err < 1e-6, "params: {}", report.max_rel_err);
    }

    #[test]
    fn relu_matches_away_from_the_kink() {
        let shape = Shape::new(1, 1, 4, 4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let input = Tensor::<f64>::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0));
        let grad_out = Tensor::<f64>::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0));
        let gi = relu_backward(&input, &grad_out).unwrap();
        let mut theta = input.data().to_vec();
        let kink_band: Vec<bool> = theta.iter().map(|v| v.abs() < 1e-3).collect();
        let report = finite_difference_check_masked(
            &mut theta,
            gi.data(),
            1e-5,
            |t| {
                let x = Tensor::new(shape, t.to_vec()).unwrap();
                relu_forward(&x)
                    .data()
                    .iter()
                    .zip(grad_out.data())
                    .map(|(a, b)| a * b)
                    .sum()
            },
            |i| kink_band[i],
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-6, "{}", report.max_rel_err);
        assert!(report.checked > 0);
    }

    #[test]
    fn epsilon_outside_band_rejected() {
        let mut theta = vec![0.0];
        let analytic = vec![0.0];
        assert!(finite_difference_check(&mut theta, &analytic, 1e-3, |_| 0.0).is_err());
        assert!(finite_difference_check(&mut theta, &analytic, 1e-7, |_| 0.0).is_err());
    }
}
