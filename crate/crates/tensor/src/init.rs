use crate::{Real, Result, Rng, Tensor, TensorError};

/// Glorot/Xavier uniform: i.i.d. on `[-b, b]` with `b = sqrt(6 / (fan_in + fan_out))`.
/// The result has shape `fan_in x fan_out`.
pub fn xavier_uniform<F: Real>(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Tensor<F>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(TensorError::Invalid("xavier fans must be >= 1".into()));
    }
    let bound = xavier_bound(fan_in, fan_out);
    Ok(uniform(&[fan_in, fan_out], -bound, bound, rng))
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn uniform<F: Real>(shape: &[usize], lo: f64, hi: f64, rng: &mut Rng) -> Tensor<F> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| F::from_f64(rng.uniform_range(lo, hi))).collect();
    Tensor::from_vec_unchecked(shape, data).expect("size matches shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_for_300_by_300() {
        assert!((xavier_bound(300, 300) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn samples_within_bound() {
        let mut rng = Rng::new(11);
        let t: Tensor<f32> = xavier_uniform(50, 30, &mut rng).unwrap();
        let b = xavier_bound(50, 30) as f32;
        assert_eq!(t.shape(), &[50, 30]);
        assert!(t.data().iter().all(|v| v.abs() <= b));
    }

    #[test]
    fn zero_fan_rejected() {
        assert!(xavier_uniform::<f32>(0, 3, &mut Rng::new(0)).is_err());
    }
}
