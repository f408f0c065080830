use crate::{Error, Result};

/// Weighted least-squares nondecreasing fit (pool adjacent violators).
pub fn pava_isotonic(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::Domain(format!("weights must be positive, got {w}")));
    }
    // blocks of (weighted mean, total weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, c2) = blocks[blocks.len() - 1];
            let (m1, w1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((m1 * w1 + m2 * w2) / w, w, c1 + c2);
        }
    }
    Ok(blocks
        .into_iter()
        .flat_map(|(m, _, c)| std::iter::repeat_n(m, c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_input_unchanged() {
        assert_eq!(
            pava_isotonic(&[0.1, 0.2, 0.3], &[1.0, 1.0, 1.0]).unwrap(),
            vec![0.1, 0.2, 0.3]
        );
    }

    #[test]
    fn pools_a_violating_pair() {
        let fit = pava_isotonic(&[0.3, 0.1], &[1.0, 1.0]).unwrap();
        assert!((fit[0] - 0.2).abs() < 1e-15 && (fit[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(pava_isotonic(&[0.1], &[1.0, 2.0]).is_err());
        assert!(pava_isotonic(&[0.1, 0.2], &[1.0, 0.0]).is_err());
    }

    /// Brute force over a monotone grid: the PAVA fit must not be beaten by any
    /// nondecreasing vector whose entries lie on a 0.005 grid.
    #[test]
    fn matches_grid_search() {
        let v = [0.2, 0.4, 0.1];
        let w = [1.0, 1.0, 2.0];
        let fit = pava_isotonic(&v, &w).unwrap();
        let sse = |f: &[f64]| -> f64 {
            f.iter()
                .zip(&v)
                .zip(&w)
                .map(|((a, b), w)| w * (a - b) * (a - b))
                .sum()
        };
        let mut best = f64::INFINITY;
        let mut best_fit = [0.0; 3];
        let steps = 100;
        for i in 0..=steps {
            for j in i..=steps {
                for k in j..=steps {
                    let f = [
                        0.5 * i as f64 / steps as f64,
                        0.5 * j as f64 / steps as f64,
                        0.5 * k as f64 / steps as f64,
                    ];
                    let s = sse(&f);
                    if s < best {
                        best = s;
                        best_fit = f;
                    }
                }
            }
        }
        assert!(sse(&fit) <= best + 1e-12);
        for (a, b) in fit.iter().zip(best_fit) {
            assert!((a - b).abs() <= 0.005 + 1e-12);
        }
        // (0.2*1 + 0.4*1 + 0.1*2)/4 = 0.2 for all three
        assert!(fit.iter().all(|x| (x - 0.2).abs() < 1e-15));
    }
}
