use proptest::prelude::*;
use rover_locate::ga::{
    derive_seed, multi_start, multi_start_with, run_ga, run_ga_with, Encoding, GaConfig, Genome,
};
use rover_locate::model::{rssi_2d, Channel};
use rover_locate::pipeline::MeasuredPair;

fn small_config(seed: u64) -> GaConfig {
    GaConfig {
        population_size: 30,
        generations: 40,
        restarts: 1,
        rng_seed: seed,
        ..GaConfig::default()
    }
}

fn rover2() -> (f64, MeasuredPair) {
    let phi = std::f64::consts::FRAC_PI_4;
    (
        phi,
        MeasuredPair {
            r_aa: rssi_2d(Channel::AA, 10000.0, 10000.0, phi).unwrap(),
            r_bb: rssi_2d(Channel::BB, 10000.0, 10000.0, phi).unwrap(),
        },
    )
}

#[test]
fn same_seed_same_output() {
    let (phi, m) = rover2();
    let cfg = GaConfig {
        restarts: 4,
        ..small_config(77)
    };
    let a = multi_start(&cfg, phi, &m).unwrap();
    let b = multi_start(&cfg, phi, &m).unwrap();
    assert_eq!(a, b);
    let c = multi_start(&cfg.with_seed(78), phi, &m).unwrap();
    assert_ne!(a.best.best_genome, c.best.best_genome);
}

#[test]
fn single_restart_is_plain_run() {
    let (phi, m) = rover2();
    let cfg = small_config(5);
    let ms = multi_start(&cfg, phi, &m).unwrap();
    let single = run_ga(&cfg.with_seed(derive_seed(5, 0)), phi, &m).unwrap();
    assert_eq!(ms.best, single);
    assert_eq!(ms.best_restart, 0);
}

#[test]
fn best_of_k_is_monotone() {
    let (phi, m) = rover2();
    let mut previous = f64::INFINITY;
    let mut prefix = Vec::new();
    for k in 1..=8 {
        let cfg = GaConfig {
            restarts: k,
            ..small_config(123)
        };
        let r = multi_start(&cfg, phi, &m).unwrap();
        assert!(r.best.best_fitness <= previous);
        assert!(r.restart_fitnesses.iter().all(|&f| r.best.best_fitness <= f));
        // restarts share the seed stream prefix
        assert_eq!(&r.restart_fitnesses[..prefix.len()], &prefix[..]);
        prefix = r.restart_fitnesses.clone();
        previous = r.best.best_fitness;
    }
}

#[test]
fn ties_go_to_lowest_restart() {
    let cfg = GaConfig {
        restarts: 6,
        ..small_config(1)
    };
    let r = multi_start_with(&cfg, |_, _| 1.0).unwrap();
    assert_eq!(r.best_restart, 0);
}

#[test]
fn converges_to_range_ring() {
    let (phi, m) = rover2();
    let cfg = GaConfig {
        population_size: 60,
        generations: 120,
        restarts: 4,
        rng_seed: 9,
        ..GaConfig::default()
    };
    let r = multi_start(&cfg, phi, &m).unwrap();
    let range = r.best.best.0.hypot(r.best.best.1);
    assert!((range - 10000f64.hypot(10000.0)).abs() / 10000f64.hypot(10000.0) < 0.02);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn elitism_never_worsens_best(seed in any::<u64>()) {
        let (phi, m) = rover2();
        let run = run_ga(&small_config(seed), phi, &m).unwrap();
        prop_assert_eq!(run.trace.len(), 41);
        prop_assert!(run.trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(*run.trace.last().unwrap(), run.best_fitness);
    }

    #[test]
    fn decode_stays_in_bounds(bits in any::<u64>(), b in 1u32..=32, lo in -1e6..1e6f64, width in 1e-3..1e6f64) {
        let enc = Encoding::new(b, vec![(lo, lo + width), (lo, lo + width)]).unwrap();
        let g = Genome::new(bits, 2 * b);
        for v in enc.decode(&g) {
            prop_assert!(v >= lo && v <= lo + width);
        }
    }

    #[test]
    fn decode_is_injective_per_variable(a in 0u64..(1 << 24), c in 0u64..(1 << 24)) {
        prop_assume!(a != c);
        let enc = Encoding::new(24, vec![(0.0, 100_000.0)]).unwrap();
        prop_assert_ne!(enc.decode(&Genome::new(a, 24)), enc.decode(&Genome::new(c, 24)));
    }
}

#[test]
fn zero_generations_returns_initial_best() {
    let cfg = GaConfig {
        generations: 0,
        ..small_config(3)
    };
    let run = run_ga_with(&cfg, |x, y| x * y).unwrap();
    assert_eq!(run.trace, vec![run.best_fitness]);
}
