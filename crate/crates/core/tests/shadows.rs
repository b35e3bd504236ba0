mod common;

use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use shadowda_core::qsim::{exact_two_site_paulis, NoiseSpec, Pauli, StateVector};
use shadowda_core::rng;
use shadowda_core::shadows::*;
use shadowda_core::C64;

fn one_shot(n: usize, bases: Vec<u8>, outcomes: Vec<u8>) -> ShadowRecord {
    ShadowRecord::new(n, bases, outcomes, Provenance::default()).unwrap()
}

#[test]
fn zero_state_z_basis_always_zero() {
    let s = StateVector::basis(4, 0);
    let r = sample_shadow(&s, 2000, NoiseSpec::clean(), &mut rng::from_seed(1));
    for (b, o) in r.bases.iter().zip(&r.outcomes) {
        if *b == 2 {
            assert_eq!(*o, 0);
        }
    }
}

#[test]
fn plus_state_x_basis_always_zero() {
    let s = product_plus(1);
    let r = sample_shadow(&s, 3000, NoiseSpec::clean(), &mut rng::from_seed(2));
    let xs: Vec<u8> = r.bases.iter().zip(&r.outcomes).filter(|(b, _)| **b == 0).map(|(_, o)| *o).collect();
    assert!(xs.len() > 800);
    assert!(xs.iter().all(|&o| o == 0));
}

#[test]
fn readout_flip_rate() {
    let s = StateVector::basis(1, 0);
    let noise = NoiseSpec::new(0.0, 0.01).unwrap();
    let r = sample_shadow(&s, 300_000, noise, &mut rng::from_seed(3));
    let z: Vec<u8> = r.bases.iter().zip(&r.outcomes).filter(|(b, _)| **b == 2).map(|(_, o)| *o).collect();
    let freq = z.iter().map(|&o| o as f64).sum::<f64>() / z.len() as f64;
    assert!((freq - 0.01).abs() < 0.003, "flip frequency {freq}");
}

#[test]
fn outcome_distribution_follows_born_rule() {
    // Two qubits, all nine basis pairs: empirical outcome frequencies against
    // |⟨s_a s_b|ψ⟩|² from hand-written snapshot kets.
    let psi = random_state(2, 11);
    let r = sample_shadow(&psi, 400_000, NoiseSpec::clean(), &mut rng::from_seed(4));
    let mut counts = [[0usize; 4]; 9];
    for t in 0..r.shots {
        let (b, o) = r.shot(t);
        counts[(b[0] * 3 + b[1]) as usize][(o[0] + 2 * o[1]) as usize] += 1;
    }
    for b0 in 0..3u8 {
        for b1 in 0..3u8 {
            let row = &counts[(b0 * 3 + b1) as usize];
            let total: usize = row.iter().sum();
            for o in 0..4u8 {
                let (k0, k1) = (snapshot_ket(b0, o & 1), snapshot_ket(b1, o >> 1));
                let mut amp = C64::new(0.0, 0.0);
                for idx in 0..4 {
                    amp += (k0[idx & 1] * k1[idx >> 1]).conj() * psi.amplitudes[idx];
                }
                let p = amp.norm_sqr();
                let f = row[o as usize] as f64 / total as f64;
                let se = (p * (1.0 - p) / total as f64).sqrt().max(1e-4);
                assert!((f - p).abs() < 5.0 * se, "bases ({b0},{b1}) outcome {o}: {f} vs {p}");
            }
        }
    }
}

#[test]
fn estimate_empty_support_is_one() {
    let r = one_shot(2, vec![0, 1], vec![1, 0]);
    assert_eq!(estimate_pauli(&r, &[]).unwrap(), 1.0);
}

#[test]
fn single_shot_factor_matches_stabilizer_oracle() {
    // 3⟨s|P|s⟩ for all 6 snapshot states and all three Paulis.
    for code in 0..3u8 {
        for o in 0..2u8 {
            let k = snapshot_ket(code, o);
            let v = nalgebra::DVector::from_column_slice(&k);
            for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                let expect = (v.adjoint() * pauli2(p) * &v)[(0, 0)].re * 3.0;
                let r = one_shot(1, vec![code], vec![o]);
                let got = estimate_pauli(&r, &[(0, p)]).unwrap();
                if p.basis_code() == Some(code) {
                    assert!((got - expect).abs() < 1e-12);
                } else {
                    assert_eq!(got, 0.0);
                }
            }
        }
    }
    let r = one_shot(1, vec![0], vec![0]);
    assert_eq!(estimate_pauli(&r, &[(0, Pauli::X)]).unwrap(), 3.0);
}

#[test]
fn estimate_rejects_repeated_site() {
    let r = one_shot(2, vec![0, 0], vec![0, 0]);
    assert!(estimate_pauli(&r, &[(0, Pauli::X), (0, Pauli::Z)]).is_err());
    assert!(estimate_pauli(&r, &[(2, Pauli::X)]).is_err());
}

#[test]
fn ghz_zz_estimate() {
    let t = 100_000;
    let r = sample_shadow(&ghz(3), t, NoiseSpec::clean(), &mut rng::from_seed(5));
    let v = estimate_pauli(&r, &[(0, Pauli::Z), (1, Pauli::Z)]).unwrap();
    assert!((v - 1.0).abs() < 0.05, "{v}");
}

/// Per-shot estimator values, for standard errors.
fn shot_values(r: &ShadowRecord, support: &[(usize, Pauli)]) -> Vec<f64> {
    (0..r.shots)
        .map(|t| {
            let (b, o) = r.shot(t);
            support
                .iter()
                .map(|&(i, p)| if p.basis_code() == Some(b[i]) { 3.0 * (1.0 - 2.0 * o[i] as f64) } else { 0.0 })
                .product()
        })
        .collect()
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn unbiased_on_random_four_qubit_state() {
    let t = 200_000;
    let psi = random_state(4, 21);
    let r = sample_shadow(&psi, t, NoiseSpec::clean(), &mut rng::from_seed(6));
    let tol = 4.0 * 9.0 / (t as f64).sqrt();
    let pairs = canonical_pairs();
    let exact = exact_two_site_paulis(&psi, &[(0, 1)], &pairs);
    for (a, &(p, q)) in pairs.iter().enumerate() {
        let dense = dense_expectation(&psi, &dense_string(4, &[(0, p), (1, q)])).re;
        assert!((dense - exact[a]).abs() < 1e-10);
        let mut support = vec![];
        if p != Pauli::I {
            support.push((0, p));
        }
        if q != Pauli::I {
            support.push((1, q));
        }
        let est = estimate_pauli(&r, &support).unwrap();
        assert!((est - exact[a]).abs() < tol, "pair {a}: {est} vs {}", exact[a]);
    }
}

#[test]
fn depolarizing_shrinks_weight_two_paulis() {
    let p = 0.1;
    let psi = ghz(3);
    let r = sample_shadow(&psi, 200_000, NoiseSpec::new(p, 0.0).unwrap(), &mut rng::from_seed(7));
    for (support, clean) in [(vec![(0, Pauli::Z), (1, Pauli::Z)], 1.0), (vec![(0, Pauli::X), (2, Pauli::Z)], 0.0)] {
        let (m, se) = mean_se(&shot_values(&r, &support));
        let want = (1.0 - p) * (1.0 - p) * clean;
        assert!((m - want).abs() < 4.0 * se, "{m} vs {want} (se {se})");
        assert!((m - estimate_pauli(&r, &support).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn single_shot_two_site_values_in_range() {
    let psi = random_state(5, 31);
    let r = sample_shadow(&psi, 50, NoiseSpec::default(), &mut rng::from_seed(8));
    for t in 0..r.shots {
        let (b, o) = r.shot(t);
        let single = one_shot(5, b.to_vec(), o.to_vec());
        let f = feature_map_phi1k(&single, 2).unwrap();
        let pairs = canonical_pairs();
        for i in 0..f.spatial {
            for c in 0..f.channels {
                let (p, q) = pairs[c % 15];
                let v = f.at(i, c);
                if p != Pauli::I && q != Pauli::I {
                    assert!([-9.0, 0.0, 9.0].contains(&v), "{v}");
                } else {
                    assert!([-3.0, 0.0, 3.0].contains(&v), "{v}");
                }
            }
        }
    }
}

#[test]
fn feature_shapes() {
    let r = sample_shadow(&StateVector::basis(15, 0), 3, NoiseSpec::clean(), &mut rng::from_seed(9));
    let f1 = feature_map_phi1k(&r, 1).unwrap();
    assert_eq!((f1.spatial, f1.channels), (14, 15));
    let f4 = feature_map_phi1k(&r, 4).unwrap();
    assert_eq!((f4.spatial, f4.channels), (11, 60));
    assert!(feature_map_phi1k(&r, 15).is_err());
    assert!(feature_map_phi1k(&r, 0).is_err());
}

#[test]
fn canonical_order() {
    let p = canonical_pairs();
    assert_eq!(p[0], (Pauli::I, Pauli::X));
    assert_eq!(p[3], (Pauli::X, Pauli::I));
    assert_eq!(p[4], (Pauli::X, Pauli::X));
    assert_eq!(p[14], (Pauli::Z, Pauli::Z));
}

#[test]
fn exact_features_on_all_zero_state() {
    let f = feature_map_exact(&StateVector::basis(6, 0), 2).unwrap();
    let pairs = canonical_pairs();
    for i in 0..f.spatial {
        for c in 0..f.channels {
            let (p, q) = pairs[c % 15];
            let has_xy = [p, q].iter().any(|l| matches!(l, Pauli::X | Pauli::Y));
            assert_eq!(f.at(i, c), if has_xy { 0.0 } else { 1.0 });
        }
    }
}

#[test]
fn shadow_features_agree_with_estimator() {
    let psi = random_state(5, 41);
    let r = sample_shadow(&psi, 300, NoiseSpec::default(), &mut rng::from_seed(10));
    let f = feature_map_phi1k(&r, 2).unwrap();
    let pairs = canonical_pairs();
    for i in 0..f.spatial {
        for m in 1..=2 {
            for (a, &(p, q)) in pairs.iter().enumerate() {
                let mut support = vec![];
                if p != Pauli::I {
                    support.push((i, p));
                }
                if q != Pauli::I {
                    support.push((i + m, q));
                }
                let est = estimate_pauli(&r, &support).unwrap();
                assert!((f.at(i, 15 * (m - 1) + a) - est).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn trace_table_matches_matrix_algebra() {
    let t = trace_table();
    for a in 0..6u8 {
        for b in 0..6u8 {
            let m = snapshot_operator(a / 2, a % 2) * snapshot_operator(b / 2, b % 2);
            let tr = m.trace();
            assert!(tr.im.abs() < 1e-12);
            assert!((tr.re - t[a as usize][b as usize]).abs() < 1e-12);
        }
    }
    assert_eq!(t[0][0], 5.0);
    assert_eq!(t[0][1], -4.0);
    assert_eq!(t[0][2], 0.5);
}

/// Direct double loop over shot pairs with dense 2×2 traces.
fn brute_kernel(a: &ShadowRecord, b: &ShadowRecord, tau: f64, gamma: f64, mode: IndexMode) -> f64 {
    let n = a.n;
    let mut inner = 0.0;
    for l in 0..a.shots {
        for lp in 0..b.shots {
            let (ba, oa) = a.shot(l);
            let (bb, ob) = b.shot(lp);
            let mut s = 0.0;
            for j in 0..n {
                for jp in 0..n {
                    if mode == IndexMode::Matched && j != jp {
                        continue;
                    }
                    s += (snapshot_operator(ba[j], oa[j]) * snapshot_operator(bb[jp], ob[jp])).trace().re;
                }
            }
            inner += (gamma * s / n as f64).exp();
        }
    }
    (tau * inner / (a.shots * b.shots) as f64).exp()
}

#[test]
fn kernel_matches_brute_force() {
    let ra = sample_shadow(&random_state(3, 1), 12, NoiseSpec::clean(), &mut rng::from_seed(12));
    let rb = sample_shadow(&random_state(3, 2), 9, NoiseSpec::clean(), &mut rng::from_seed(13));
    for mode in [IndexMode::Matched, IndexMode::DoubleSum] {
        for (tau, gamma) in [(0.1, 0.1), (1.0, 1.0), (3.0, 0.01)] {
            let k = shadow_kernel(&ra, &rb, tau, gamma, mode).unwrap();
            let o = brute_kernel(&ra, &rb, tau, gamma, mode);
            assert!((k - o).abs() < 1e-10 * o, "{mode:?}: {k} vs {o}");
        }
    }
}

#[test]
fn kernel_tau_zero_is_one() {
    let r = sample_shadow(&ghz(3), 20, NoiseSpec::clean(), &mut rng::from_seed(14));
    assert_eq!(shadow_kernel(&r, &r, 0.0, 1.0, IndexMode::Matched).unwrap(), 1.0);
    let other = sample_shadow(&ghz(4), 20, NoiseSpec::clean(), &mut rng::from_seed(14));
    assert!(shadow_kernel(&r, &other, 1.0, 1.0, IndexMode::Matched).is_err());
}

fn records(states: &[StateVector], shots: usize, seed: u64) -> Vec<ShadowRecord> {
    states
        .iter()
        .enumerate()
        .map(|(i, s)| sample_shadow(s, shots, NoiseSpec::clean(), &mut rng::stream(seed, 0, i as u64)))
        .collect()
}

#[test]
fn matched_gram_symmetric_psd() {
    let states: Vec<_> = (0..10).map(|i| random_state(4, 100 + i)).collect();
    let recs = records(&states, 40, 15);
    for (tau, gamma) in [(0.01, 0.01), (1.0, 1.0), (3.0, 0.1)] {
        let g = gram_matrix(&recs, tau, gamma, IndexMode::Matched).unwrap();
        let m = DMatrix::from_row_slice(10, 10, &g.entries);
        assert!((&m - m.transpose()).abs().max() < 1e-12);
        let maxdiag = (0..10).map(|i| m[(i, i)]).fold(0.0, f64::max);
        let min = SymmetricEigen::new(m).eigenvalues.min();
        assert!(min >= -1e-8 * maxdiag, "min eigenvalue {min}");
    }
}

#[test]
fn gram_single_record_and_permutation() {
    let states: Vec<_> = (0..4).map(|i| random_state(3, 200 + i)).collect();
    let recs = records(&states, 30, 16);
    let g1 = gram_matrix(&recs[..1], 1.0, 0.1, IndexMode::Matched).unwrap();
    assert_eq!(g1.size, 1);
    assert_eq!(g1.entries[0], shadow_kernel(&recs[0], &recs[0], 1.0, 0.1, IndexMode::Matched).unwrap());
    let g = gram_matrix(&recs, 1.0, 0.1, IndexMode::Matched).unwrap();
    let perm = [2, 0, 3, 1];
    let shuffled: Vec<_> = perm.iter().map(|&i| recs[i].clone()).collect();
    let gp = gram_matrix(&shuffled, 1.0, 0.1, IndexMode::Matched).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(gp.at(i, j), g.at(perm[i], perm[j]));
        }
    }
}

#[test]
fn gram_separates_ghz_from_product() {
    let mut states: Vec<_> = (0..5).map(|_| ghz(4)).collect();
    states.extend((0..5).map(|_| StateVector::basis(4, 0)));
    let recs = records(&states, 500, 17);
    let g = gram_matrix(&recs, 1.0, 1.0, IndexMode::Matched).unwrap();
    let (mut within, mut cross) = (vec![], vec![]);
    for i in 0..10 {
        for j in 0..10 {
            if i != j {
                if (i < 5) == (j < 5) {
                    within.push(g.at(i, j));
                } else {
                    cross.push(g.at(i, j));
                }
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&within) > mean(&cross), "{} vs {}", mean(&within), mean(&cross));
}

#[test]
fn codec_rejects_garbage() {
    assert_eq!(decode_binary(b"NOPE"), Err(CodecError::BadMagic));
    let r = sample_shadow(&ghz(3), 5, NoiseSpec::clean(), &mut rng::from_seed(18));
    let bytes = encode_binary(&r);
    assert_eq!(decode_binary(&bytes[..bytes.len() - 1]), Err(CodecError::Truncated));
    let mut extra = bytes.clone();
    extra.push(0);
    assert_eq!(decode_binary(&extra), Err(CodecError::Trailing));
}

proptest! {
    #[test]
    fn binary_round_trip(n in 1usize..12, shots in 0usize..20, seed in any::<u64>(), id in any::<u64>(), p in 0.0f64..1.0) {
        let mut g = rng::from_seed(seed);
        use rand::Rng;
        let bases: Vec<u8> = (0..n * shots).map(|_| g.random_range(0..3u8)).collect();
        let outcomes: Vec<u8> = (0..n * shots).map(|_| g.random_range(0..2u8)).collect();
        let prov = Provenance { state_id: id, p_depol: p, p_flip: p / 3.0, seed };
        let r = ShadowRecord::new(n, bases, outcomes, prov).unwrap();
        let back = decode_binary(&encode_binary(&r)).unwrap();
        prop_assert_eq!(&back, &r);
        prop_assert_eq!(encode_binary(&back), encode_binary(&r));
    }

    #[test]
    fn kernel_symmetric(seed in any::<u64>(), tau in 0.0f64..3.0, gamma in 0.0f64..1.0) {
        let a = sample_shadow(&random_state(3, seed), 15, NoiseSpec::default(), &mut rng::from_seed(seed));
        let b = sample_shadow(&random_state(3, seed ^ 1), 11, NoiseSpec::default(), &mut rng::from_seed(seed ^ 2));
        for mode in [IndexMode::Matched, IndexMode::DoubleSum] {
            let kab = shadow_kernel(&a, &b, tau, gamma, mode).unwrap();
            let kba = shadow_kernel(&b, &a, tau, gamma, mode).unwrap();
            prop_assert_eq!(kab.to_bits(), kba.to_bits());
        }
    }
}
