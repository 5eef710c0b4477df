//! Symmetric quadrature on the reference triangle `{x, y ≥ 0, x + y ≤ 1}` and
//! Gauss–Legendre rules on `[0, 1]`.

use crate::element::FeError;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub degree: usize,
    pub points: Vec<[f64; 2]>,
    /// Weights sum to the reference area 1/2.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut([f64; 2]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

// (barycentric orbit generator, weight) pairs; weights normalized to sum 1.
// Orbit kinds: centroid, (a, a, 1-2a) with 3 points, (a, b, 1-a-b) with 6 points.
enum Orbit {
    Centroid(f64),
    S21(f64, f64),
    S111(f64, f64, f64),
}

fn expand(degree: usize, orbits: &[Orbit]) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for orbit in orbits {
        match *orbit {
            Orbit::Centroid(w) => {
                points.push([1.0 / 3.0, 1.0 / 3.0]);
                weights.push(w);
            }
            Orbit::S21(a, w) => {
                let b = 1.0 - 2.0 * a;
                for p in [[a, a], [b, a], [a, b]] {
                    points.push(p);
                    weights.push(w);
                }
            }
            Orbit::S111(a, b, w) => {
                let c = 1.0 - a - b;
                for p in [[a, b], [b, a], [b, c], [c, b], [a, c], [c, a]] {
                    points.push(p);
                    weights.push(w);
                }
            }
        }
    }
    for w in &mut weights {
        *w *= 0.5;
    }
    QuadratureRule { degree, points, weights }
}

/// Rule exact for polynomials of total degree `degree` (1 to 6), all weights positive.
pub fn quadrature(degree: usize) -> Result<QuadratureRule, FeError> {
    use Orbit::*;
    let rule = match degree {
        1 => expand(1, &[Centroid(1.0)]),
        2 => expand(2, &[S21(1.0 / 6.0, 1.0 / 3.0)]),
        // the 4-point degree-3 rule has a negative weight; use the 6-point one
        3 | 4 => expand(
            degree,
            &[
                S21(0.445_948_490_915_965, 0.223_381_589_678_011),
                S21(0.091_576_213_509_771, 0.109_951_743_655_322),
            ],
        ),
        5 => expand(
            5,
            &[
                Centroid(0.225),
                S21(0.470_142_064_105_115, 0.132_394_152_788_506),
                S21(0.101_286_507_323_456, 0.125_939_180_544_827),
            ],
        ),
        6 => expand(
            6,
            &[
                S21(0.249_286_745_170_910, 0.116_786_275_726_379),
                S21(0.063_089_014_491_502, 0.050_844_906_370_207),
                S111(0.310_352_451_033_784, 0.053_145_049_844_817, 0.082_851_075_618_374),
            ],
        ),
        _ => return Err(FeError::UnsupportedDegree(degree)),
    };
    Ok(rule)
}

/// Gauss–Legendre points and weights on `[0, 1]` with `n` points (1 to 4).
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>), FeError> {
    let (x, w): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        _ => return Err(FeError::UnsupportedDegree(2 * n - 1)),
    };
    Ok((x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect()))
}
