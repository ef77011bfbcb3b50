#![allow(dead_code)]

use csifb::channelgen::{default_profiles, generate_environment, SystemConfig};
use csifb::harness::EnvironmentData;
use csifb::numkit::ComplexMatrix;
use csifb::precoder::PrecodingMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| random_complex(rng))
}

/// Random matrix with unit-norm rows wrapped as precoders.
pub fn random_precoding(rng: &mut impl Rng, k: usize, n_t: usize) -> PrecodingMatrix {
    let rows: Vec<Vec<Complex64>> = (0..k)
        .map(|_| {
            let v: Vec<Complex64> = (0..n_t).map(|_| random_complex(rng)).collect();
            let n = csifb::numkit::norm(&v);
            v.into_iter().map(|z| z / n).collect()
        })
        .collect();
    PrecodingMatrix::new(ComplexMatrix::from_rows(&rows).unwrap(), vec![1.0; k]).unwrap()
}

/// Default environments with `count` samples each, generated in process.
pub fn default_envs(count: usize) -> Vec<EnvironmentData> {
    let config = SystemConfig::default();
    default_profiles()
        .iter()
        .map(|p| EnvironmentData {
            env_id: p.env_id,
            samples: generate_environment(&config, p, count).unwrap(),
        })
        .collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
