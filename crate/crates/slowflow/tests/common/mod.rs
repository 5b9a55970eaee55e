//! Helpers shared by the integration test targets.

use nalgebra::DVector;
use slowflow::Polynomial;

/// SplitMix64; fixed seeds keep the randomized suites reproducible.
pub struct Rng(pub u64);

impl Rng {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + (hi - lo) * u
    }

    pub fn index(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

pub fn poly(text: &str) -> Polynomial {
    text.parse().expect("valid potential text")
}

pub fn vec2(x: f64, y: f64) -> DVector<f64> {
    DVector::from_row_slice(&[x, y])
}

/// Random polynomial of the given dimension with exponent rows drawn from
/// the provided degrees.
pub fn random_poly(rng: &mut Rng, dim: usize, degrees: &[u32], n_terms: usize) -> Polynomial {
    let mut text = String::new();
    for _ in 0..n_terms {
        let d = degrees[rng.index(degrees.len())];
        let mut exps = vec![0u32; dim];
        for _ in 0..d {
            exps[rng.index(dim)] += 1;
        }
        let coeff = rng.uniform(-1.5, 1.5);
        text.push_str(&coeff.to_string());
        for e in exps {
            text.push(' ');
            text.push_str(&e.to_string());
        }
        text.push('\n');
    }
    text.parse().expect("random polynomial")
}
