use super::AnalysisError;
use crate::linalg::vector;

/// `KL(N(v, I) ‖ N(θ, I)) = ‖v − θ‖²/2`
pub fn kl_gaussian_mean(v: &[f64], theta: &[f64]) -> Result<f64, AnalysisError> {
    if v.len() != theta.len() {
        return Err(AnalysisError::Dimension {
            expected: v.len(),
            found: theta.len(),
        });
    }
    Ok(0.5 * vector::norm_sq(&vector::sub(v, theta)))
}

/// `Σ p·ln(p/q)` summed over consecutive distributions of `alphabet` entries
/// each, with `0·ln 0 = 0`. Returns `+∞` when `q` vanishes where `p` does not.
pub fn kl_categorical(p: &[f64], q: &[f64], alphabet: usize) -> Result<f64, AnalysisError> {
    if p.len() != q.len() {
        return Err(AnalysisError::Dimension {
            expected: p.len(),
            found: q.len(),
        });
    }
    if alphabet == 0 || !p.len().is_multiple_of(alphabet) {
        return Err(AnalysisError::Invalid("length is not a multiple of the alphabet size"));
    }
    let mut total = 0.0;
    for (pp, qq) in p.chunks(alphabet).zip(q.chunks(alphabet)) {
        for d in [pp, qq] {
            if d.iter().any(|x| !(*x >= 0.0)) {
                return Err(AnalysisError::Invalid("negative or non-finite probability"));
            }
            if libm::fabs(d.iter().sum::<f64>() - 1.0) > 1e-9 {
                return Err(AnalysisError::Invalid("distribution does not sum to 1"));
            }
        }
        for (a, b) in pp.iter().zip(qq) {
            if *a == 0.0 {
                continue;
            }
            if *b == 0.0 {
                return Ok(f64::INFINITY);
            }
            total += a * libm::log(a / b);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::TestRng;

    #[test]
    fn gaussian_examples() {
        assert_eq!(kl_gaussian_mean(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(kl_gaussian_mean(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 12.5);
        assert!(kl_gaussian_mean(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gaussian_matches_monte_carlo() {
        // E_{x~N(v,I)}[log p(x) − log q(x)] = E[⟨x − θ, x − θ⟩ − ⟨x − v, x − v⟩]/2
        let mut rng = TestRng::new(17);
        let v = rng.vector(3);
        let theta = rng.vector(3);
        let n = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let z = rng.vector(3);
            let x: alloc::vec::Vec<f64> = v.iter().zip(&z).map(|(a, b)| a + b).collect();
            let s = 0.5 * (vector::norm_sq(&vector::sub(&x, &theta)) - vector::norm_sq(&z));
            sum += s;
            sq += s * s;
        }
        let mean = sum / n as f64;
        let sd = libm::sqrt((sq / n as f64 - mean * mean) / n as f64);
        let exact = kl_gaussian_mean(&v, &theta).unwrap();
        assert!((mean - exact).abs() < 3.0 * sd, "{mean} vs {exact} (sd {sd})");
    }

    #[test]
    fn categorical_examples() {
        assert_eq!(kl_categorical(&[0.25; 4], &[0.25; 4], 4).unwrap(), 0.0);
        let v = kl_categorical(&[1.0, 0.0], &[0.5, 0.5], 2).unwrap();
        assert!((v - core::f64::consts::LN_2).abs() < 1e-15);
        let v = kl_categorical(&[0.75, 0.25], &[0.5, 0.5], 2).unwrap();
        assert!((v - 0.130812).abs() < 1e-6);
        assert_eq!(kl_categorical(&[0.5, 0.5], &[1.0, 0.0], 2).unwrap(), f64::INFINITY);
        // positions add
        let two = kl_categorical(&[1.0, 0.0, 0.75, 0.25], &[0.5, 0.5, 0.5, 0.5], 2).unwrap();
        assert!((two - core::f64::consts::LN_2 - 0.75 * libm::log(1.5) - 0.25 * libm::log(0.5)).abs() < 1e-15);
    }

    #[test]
    fn categorical_rejects_bad_input() {
        assert!(kl_categorical(&[1.2, -0.2], &[0.5, 0.5], 2).is_err());
        assert!(kl_categorical(&[0.6, 0.6], &[0.5, 0.5], 2).is_err());
        assert!(kl_categorical(&[0.5, 0.5], &[0.5, 0.5, 0.0], 2).is_err());
        assert!(kl_categorical(&[0.5, 0.5, 1.0], &[0.5, 0.5, 1.0], 2).is_err());
    }
}
