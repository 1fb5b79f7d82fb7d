//! End-to-end encode → flows → decode against a direct matrix product.

// rows of several parallel arrays are indexed together
#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thermoflow_core::compiler::{
    decode_matvec, encode_groups, encode_matvec, parallel_group_products, signed_matvec,
    split_signed, EncodingSettings, GroupSpec,
};
use thermoflow_core::physics::stationary_flows;
use thermoflow_core::random;

fn matvec(p: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    p.iter()
        .map(|row| row.iter().zip(b).map(|(a, x)| a * x).sum())
        .collect()
}

fn random_instance(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..=16);
    let n = rng.gen_range(1..=16);
    let p = random::stochastic_matrix(&mut rng, m, n);
    let b = random::uniform_vector(&mut rng, n, 1e-6, 10.0);
    (p, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decoded_product_lies_within_bound(seed in any::<u64>()) {
        let (p, b) = random_instance(seed);
        let program = encode_matvec(&p, &b, &EncodingSettings::default()).unwrap();
        let flows = stationary_flows(&program.config).unwrap();
        let decoded = decode_matvec(&program, &flows).unwrap();
        let want = matvec(&p, &b);
        for i in 0..p.len() {
            let err = (decoded.values[i] - want[i]).abs();
            prop_assert!(err <= decoded.error_bound[i], "row {i}: {err} > {}", decoded.error_bound[i]);
        }
    }

    #[test]
    fn halving_drain_ratio_never_loosens_the_bound(seed in any::<u64>()) {
        let (p, b) = random_instance(seed);
        let run = |eps: f64| {
            let settings = EncodingSettings { drain_ratio: eps, ..Default::default() };
            let program = encode_matvec(&p, &b, &settings).unwrap();
            let flows = stationary_flows(&program.config).unwrap();
            decode_matvec(&program, &flows).unwrap()
        };
        let want = matvec(&p, &b);
        let coarse = run(1e-3);
        let fine = run(5e-4);
        for i in 0..p.len() {
            prop_assert!(fine.error_bound[i] <= coarse.error_bound[i]);
            let e_coarse = (coarse.values[i] - want[i]).abs();
            let e_fine = (fine.values[i] - want[i]).abs();
            prop_assert!(e_fine <= e_coarse * (1.0 + 1e-9) + 1e-13 * want[i].abs());
        }
    }

    #[test]
    fn modes_of_a_group_stay_within_tolerance(seed in any::<u64>()) {
        let (p, b) = random_instance(seed);
        let settings = EncodingSettings::default();
        let program = encode_matvec(&p, &b, &settings).unwrap();
        let group = program.primary_group();
        let base = program.bath_occupancies(group.base_frequency).unwrap();
        for &m in &group.modes {
            let occ = program.bath_occupancies(program.config.frequency(m)).unwrap();
            for (o, r) in occ.iter().zip(&base) {
                prop_assert!((o - r).abs() <= settings.group_tol * r);
            }
        }
    }

    #[test]
    fn signed_split_recombines(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let a: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let mut row: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                row[0] += 4.5; // no all-zero rows
                row
            })
            .collect();
        let b = random::uniform_vector(&mut rng, n, 1e-3, 10.0);
        let (plus, minus) = split_signed(&a);
        for i in 0..m {
            for j in 0..n {
                prop_assert_eq!(plus[i][j] - minus[i][j], a[i][j]);
                prop_assert!(plus[i][j] >= 0.0 && minus[i][j] >= 0.0);
            }
        }
        let decoded = signed_matvec(&a, &b, &EncodingSettings::default()).unwrap();
        for (i, want) in matvec(&a, &b).iter().enumerate() {
            prop_assert!((decoded.values[i] - want).abs() <= decoded.error_bound[i]);
        }
    }
}

#[test]
fn worked_example() {
    let p = vec![vec![0.5, 0.5], vec![0.2, 0.8]];
    let program = encode_matvec(&p, &[1.0, 2.0], &EncodingSettings::default()).unwrap();
    assert_eq!(program.config.mode_count(), 2);
    assert_eq!(program.config.reservoir_count(), 3);
    let flows = stationary_flows(&program.config).unwrap();
    let decoded = decode_matvec(&program, &flows).unwrap();
    for ((v, want), bound) in decoded
        .values
        .iter()
        .zip([1.5, 1.8])
        .zip(&decoded.error_bound)
    {
        assert!((v - want).abs() <= *bound);
        assert!(*bound <= 5e-3 * 2.0);
    }
}

#[test]
fn second_group_multiplies_the_dependent_vector() {
    let b = [1.0, 2.0];
    let specs = [
        GroupSpec {
            matrix: vec![vec![0.5, 0.5]],
            base_frequency: 1.0,
        },
        GroupSpec {
            matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            base_frequency: 2.0,
        },
    ];
    let program = encode_groups(&specs, &b, &EncodingSettings::default()).unwrap();
    let flows = stationary_flows(&program.config).unwrap();
    let products = parallel_group_products(&program, &flows).unwrap();
    assert_eq!(products.len(), 2);
    // n(2ω, T) = n² / (2n + 1) for n = n(ω, T)
    let dependent: Vec<f64> = b.iter().map(|n| n * n / (2.0 * n + 1.0)).collect();
    for (got, want) in products[1].input.iter().zip(&dependent) {
        assert!((got - want).abs() <= 1e-12 * want);
    }
    for (i, want) in dependent.iter().enumerate() {
        let r = &products[1].result;
        assert!((r.values[i] - want).abs() <= r.error_bound[i]);
    }
}
