mod common;

use csifb::channelgen::SystemConfig;
use csifb::codec::{
    bin_center, decode, dequantize, encode, pack_codeword, quantize, quantize_index, unpack_codeword, CodecModel,
    CodewordLayout,
};
use csifb::harness::sgcs;
use csifb::numkit::{cyclic_shift, hermitian_eig, ComplexMatrix};
use csifb::standardizer::{
    build_benchmark, decode_control, destandardize, encode_control, inverse_sparse_transform, optimal_shift,
    sparse_transform, standardize, ControlInfo,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use common::{random_matrix, random_precoding, rng};

fn config_for(k: usize, n_h: usize, n_v: usize) -> SystemConfig {
    SystemConfig {
        n_h,
        n_v,
        k_subbands: k,
        ..SystemConfig::default()
    }
}

proptest! {
    #[test]
    fn shifts_compose_and_invert(seed: u64, rows in 1usize..14, cols in 1usize..33,
                                 a in -40i64..40, b in -40i64..40, c in -40i64..40, d in -40i64..40) {
        let m = random_matrix(&mut rng(seed), rows, cols);
        let twice = cyclic_shift(&cyclic_shift(&m, a, b), c, d);
        prop_assert_eq!(&twice, &cyclic_shift(&m, a + c, b + d));
        prop_assert_eq!(&cyclic_shift(&cyclic_shift(&m, a, b), -a, -b), &m);
        let f = m.frobenius_norm();
        prop_assert!((cyclic_shift(&m, a, b).frobenius_norm() - f).abs() <= 1e-14 * f);
    }

    #[test]
    fn sparse_transform_is_unitary(seed: u64, k in 1usize..14, n_t in 1usize..33) {
        let w = random_matrix(&mut rng(seed), k, n_t);
        let s = sparse_transform(&w).unwrap();
        let scale = w.frobenius_norm();
        prop_assert!((s.frobenius_norm() - scale).abs() <= 1e-10 * scale);
        prop_assert!(inverse_sparse_transform(&s).unwrap().max_abs_diff(&w).unwrap() <= 1e-10);
        prop_assert!(sparse_transform(&inverse_sparse_transform(&w).unwrap()).unwrap().max_abs_diff(&w).unwrap() <= 1e-10);
    }

    #[test]
    fn standardization_is_lossless(seed: u64, k in 1usize..14, n_h in 1usize..9, n_v in 1usize..5) {
        let config = config_for(k, n_h, n_v);
        let bench = build_benchmark(&config).unwrap();
        let w = random_precoding(&mut rng(seed), k, config.n_t());
        let (std, ctrl) = standardize(w.matrix(), &bench).unwrap();
        prop_assert!(ctrl.m_star < k && ctrl.n_star < config.n_t());
        let back = destandardize(&std, ctrl).unwrap();
        prop_assert!(back.max_abs_diff(w.matrix()).unwrap() <= 1e-10);
    }

    #[test]
    fn hermitian_eig_reconstructs(seed: u64, n in 1usize..13) {
        let a = random_matrix(&mut rng(seed), n, n);
        let m = a.gram();
        let eig = hermitian_eig(&m, 1e-9).unwrap();
        let v = &eig.eigenvectors;
        let lam = ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j { Complex64::new(eig.all_eigenvalues[i], 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        let rebuilt = v.matmul(&lam).unwrap().matmul(&v.adjoint()).unwrap();
        let scale = m.frobenius_norm().max(1.0);
        prop_assert!(rebuilt.max_abs_diff(&m).unwrap() <= 1e-10 * scale);
        prop_assert!(v.adjoint().matmul(v).unwrap().max_abs_diff(&ComplexMatrix::identity(n)).unwrap() <= 1e-10);
        prop_assert!(eig.all_eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(eig.eigenspace_dim() >= 1);
    }

    #[test]
    fn quantizer_error_bound_and_idempotence(z in prop::collection::vec(-1.0f64..1.0, 1..64),
                                             bits in 1u8..=16, alpha in 0.01f64..10.0) {
        let z: Vec<f64> = z.iter().map(|x| x * alpha).collect();
        let q = quantize(&z, bits, alpha).unwrap();
        prop_assert_eq!(q.len(), z.len() * bits as usize);
        let d = dequantize(&q, bits, alpha, z.len()).unwrap();
        let bound = alpha / f64::from(1u32 << bits);
        for (x, y) in z.iter().zip(&d) {
            prop_assert!((x - y).abs() <= bound * (1.0 + 1e-12));
        }
        prop_assert_eq!(quantize(&d, bits, alpha).unwrap(), q);
    }

    #[test]
    fn quantizer_clips_out_of_range(x in 1.0f64..100.0, bits in 1u8..=16) {
        let top = (1u32 << bits) - 1;
        prop_assert_eq!(quantize_index(x, bits, 1.0), top);
        prop_assert_eq!(quantize_index(-x, bits, 1.0), 0);
        prop_assert!(bin_center(top, bits, 1.0) < 1.0);
    }

    #[test]
    fn codeword_roundtrip(ctrl in prop::collection::vec(any::<bool>(), 0..20),
                          payload in prop::collection::vec(any::<bool>(), 0..200)) {
        let layout = CodewordLayout { control_bits: ctrl.len(), payload_bits: payload.len() };
        let cw = pack_codeword(ctrl.clone(), payload.clone());
        prop_assert_eq!(cw.b_total, ctrl.len() + payload.len());
        let bytes = cw.to_bytes();
        prop_assert_eq!(bytes.len(), cw.b_total.div_ceil(8));
        // byte-level oracle: MSB-first concatenation, zero padded
        let mut oracle = vec![0u8; bytes.len()];
        for (i, &b) in ctrl.iter().chain(&payload).enumerate() {
            if b {
                oracle[i / 8] |= 0x80 >> (i % 8);
            }
        }
        prop_assert_eq!(&bytes, &oracle);
        let (c, p) = unpack_codeword(&bytes, layout).unwrap();
        prop_assert_eq!(c, ctrl);
        prop_assert_eq!(p, payload);
    }

    #[test]
    fn sgcs_bounds_and_scale_invariance(seed: u64, n in 1usize..40) {
        let mut r = rng(seed);
        let w = random_matrix(&mut r, 1, n).into_vec();
        let w_hat = random_matrix(&mut r, 1, n).into_vec();
        let a = Complex64::from_polar(r.random_range(0.1..10.0), r.random_range(0.0..6.3));
        let b = Complex64::from_polar(r.random_range(0.1..10.0), r.random_range(0.0..6.3));
        let base = sgcs(&w, &w_hat).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&base));
        let aw: Vec<_> = w.iter().map(|z| a * z).collect();
        let bw: Vec<_> = w_hat.iter().map(|z| b * z).collect();
        prop_assert!((sgcs(&aw, &bw).unwrap() - base).abs() <= 1e-12);
    }

    #[test]
    fn optimal_shift_matches_exhaustive(seed: u64, n in 1usize..40) {
        let mut r = rng(seed);
        let p: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let mut best = (f64::NEG_INFINITY, 0);
        for m in 0..n {
            let score: f64 = (0..n).map(|i| p[(i + n - m) % n] * b[i]).sum();
            if score > best.0 {
                best = (score, m);
            }
        }
        prop_assert_eq!(optimal_shift(&p, &b).unwrap(), best.1);
    }

    #[test]
    fn linear_codec_encode_inverts_decode(seed: u64, l in 1usize..12) {
        let (k, n_t) = (3, 4);
        let dim = 2 * k * n_t;
        let mut r = rng(seed);
        // orthonormal columns by Gram-Schmidt on random vectors
        let mut cols: Vec<Vec<f64>> = Vec::new();
        while cols.len() < l {
            let mut v: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
            for c in &cols {
                let d: f64 = v.iter().zip(c).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= d * y);
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 {
                cols.push(v.into_iter().map(|x| x / n).collect());
            }
        }
        let basis: Vec<f64> = (0..dim).flat_map(|row| cols.iter().map(move |c| c[row])).collect();
        let model = CodecModel::linear_subspace(k, n_t, l, basis, 8, 1.0).unwrap();
        let z: Vec<f64> = (0..l).map(|_| r.random_range(-2.0..2.0)).collect();
        let back = encode(&model, &decode(&model, &z).unwrap()).unwrap();
        for (a, b) in z.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }
}

#[test]
fn control_codes_are_a_bijection() {
    let config = SystemConfig::default();
    let mut seen = std::collections::HashSet::new();
    for m in 0..config.k_subbands {
        for n in 0..config.n_t() {
            let ctrl = ControlInfo { m_star: m, n_star: n };
            let bits = encode_control(ctrl, &config).unwrap();
            assert_eq!(bits.len(), 9);
            assert!(seen.insert(bits.clone()));
            assert_eq!(decode_control(&bits, &config).unwrap(), ctrl);
        }
    }
}
