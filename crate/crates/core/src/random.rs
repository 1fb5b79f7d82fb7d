//! Random problem and device generators for validation sweeps.

use rand::Rng;

use crate::physics::{inverse_temperature, DeviceConfig, Mode, Reservoir, T_FLOOR};

/// Random row-stochastic m×n matrix with a few exact zeros sprinkled in.
pub fn stochastic_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| loop {
            let row: Vec<f64> = (0..cols)
                .map(|_| {
                    if rng.gen_bool(0.1) {
                        0.0
                    } else {
                        rng.gen::<f64>()
                    }
                })
                .collect();
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                break row.iter().map(|x| x / total).collect();
            }
        })
        .collect()
}

/// Uniform vector in [lo, hi]^n.
pub fn uniform_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..=hi)).collect()
}

/// Random device with 1..=max_modes modes and 1..=max_baths baths.
///
/// Frequencies span [0.1, 10]; bath occupancies are log-uniform on
/// [1e-4, 1e2]; the drain sits either at the temperature floor or at a
/// low but finite temperature; roughly one coupling in ten is zero.
pub fn device_config<R: Rng + ?Sized>(
    rng: &mut R,
    max_modes: usize,
    max_baths: usize,
) -> DeviceConfig {
    let k = rng.gen_range(1..=max_modes);
    let n = rng.gen_range(1..=max_baths);
    let modes: Vec<Mode> = (0..k)
        .map(|i| Mode::new(10f64.powf(rng.gen_range(-1.0..=1.0)), i as u32))
        .collect();
    let reference = modes[0].frequency;
    let drain_t = if rng.gen_bool(0.5) {
        T_FLOOR
    } else {
        inverse_temperature(reference, 10f64.powf(rng.gen_range(-6.0..=-2.0)))
            .expect("positive occupancy")
    };
    let mut reservoirs = vec![Reservoir::drain(drain_t)];
    for _ in 0..n {
        let occupancy = 10f64.powf(rng.gen_range(-4.0..=2.0));
        reservoirs.push(Reservoir::bath(
            inverse_temperature(reference, occupancy).expect("positive occupancy"),
        ));
    }
    let couplings = (0..k)
        .map(|_| loop {
            let row: Vec<f64> = (0..=n)
                .map(|_| {
                    if rng.gen_bool(0.1) {
                        0.0
                    } else {
                        10f64.powf(rng.gen_range(-3.0..=1.0))
                    }
                })
                .collect();
            if row.iter().any(|g| *g > 0.0) {
                break row;
            }
        })
        .collect();
    DeviceConfig::new(modes, reservoirs, couplings).expect("generator produces valid configs")
}
