use super::{Matrix, Rng};
use crate::error::{Error, Result};

/// Xavier/Glorot uniform weights with shape `fan_out x fan_in`: entries drawn
/// i.i.d. from `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_init(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Matrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::invalid(format!(
            "xavier_init needs positive fans, got fan_in={fan_in} fan_out={fan_out}"
        )));
    }
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.uniform_range(-bound, bound))
        .collect();
    Matrix::from_vec(fan_out, fan_in, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_within_bound() {
        let mut rng = Rng::new(3);
        let m = xavier_init(4, 6, &mut rng).unwrap();
        assert_eq!((m.rows(), m.cols()), (6, 4));
        // sqrt(6 / 10)
        let a = 0.7745966692414834;
        assert!(m.data().iter().all(|v| v.abs() <= a));

        for seed in 0..50 {
            let m = xavier_init(1, 1, &mut Rng::new(seed)).unwrap();
            assert!(m.get(0, 0).abs() <= 3f64.sqrt());
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = xavier_init(5, 7, &mut Rng::new(11)).unwrap();
        let b = xavier_init(5, 7, &mut Rng::new(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_fan_rejected() {
        assert!(matches!(
            xavier_init(0, 3, &mut Rng::new(0)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(xavier_init(3, 0, &mut Rng::new(0)).is_err());
    }
}
