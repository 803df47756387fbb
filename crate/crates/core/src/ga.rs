//! Bit-string genetic algorithm used to seed the Newton refinement.
//!
//! Candidates are `(x, y)` pairs packed into one fixed-width bit string, each
//! variable decoded with a plain binary-to-decimal map over its bounds.
//! Selection is roulette-wheel over window-scaled fitness (smaller is better),
//! recombination is single-point crossover, mutation flips bits independently
//! and the best individual of each generation survives unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rssi_2d, Channel};
use crate::pipeline::MeasuredPair;

/// Largest supported width of a single encoded variable.
pub const MAX_BITS_PER_VAR: u32 = 32;

/// Default scaling window used by [`select_roulette`].
pub const DEFAULT_WINDOW_EPSILON: f64 = 0.01;

/// A fixed-width bit string. Position 0 is the leftmost (most significant) bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Genome {
    bits: u64,
    len: u32,
}

impl Genome {
    pub fn new(bits: u64, len: u32) -> Self {
        assert!((1..=64).contains(&len), "genome length must be in 1..=64");
        Genome {
            bits: bits & mask(len),
            len,
        }
    }

    pub fn random<R: Rng + ?Sized>(len: u32, rng: &mut R) -> Self {
        Genome::new(rng.random::<u64>(), len)
    }

    /// Parses a string of `0`/`1` characters.
    pub fn from_bit_str(s: &str) -> Option<Self> {
        let len = u32::try_from(s.len()).ok()?;
        if !(1..=64).contains(&len) {
            return None;
        }
        let mut bits = 0u64;
        for c in s.chars() {
            bits = (bits << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return None,
                };
        }
        Some(Genome { bits, len })
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn bit(&self, pos: u32) -> bool {
        assert!(pos < self.len);
        (self.bits >> (self.len - 1 - pos)) & 1 == 1
    }

    pub fn flip(&mut self, pos: u32) {
        assert!(pos < self.len);
        self.bits ^= 1 << (self.len - 1 - pos);
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }
}

impl std::fmt::Display for Genome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:0width$b}", self.bits, width = self.len as usize)
    }
}

fn mask(len: u32) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// Maps genomes of `vars * bits_per_var` bits onto a bounded box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub bits_per_var: u32,
    pub bounds: Vec<(f64, f64)>,
}

impl Encoding {
    pub fn new(bits_per_var: u32, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if !(1..=MAX_BITS_PER_VAR).contains(&bits_per_var) {
            return Err(Error::config(format!(
                "bits_per_var must be in 1..={MAX_BITS_PER_VAR}, got {bits_per_var}"
            )));
        }
        if bounds.is_empty() || bounds.len() as u32 * bits_per_var > 64 {
            return Err(Error::config(format!(
                "{} variables of {bits_per_var} bits do not fit a 64-bit genome",
                bounds.len()
            )));
        }
        for &(lo, hi) in &bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(format!("invalid bounds [{lo}, {hi}]")));
            }
        }
        Ok(Encoding {
            bits_per_var,
            bounds,
        })
    }

    pub fn genome_len(&self) -> u32 {
        self.bits_per_var * self.bounds.len() as u32
    }

    /// Decodes every variable: `lo + int(bits) * (hi - lo) / (2^b - 1)`.
    pub fn decode(&self, genome: &Genome) -> Vec<f64> {
        (0..self.bounds.len()).map(|v| self.decode_var(genome, v)).collect()
    }

    pub fn decode_var(&self, genome: &Genome, var: usize) -> f64 {
        debug_assert_eq!(genome.len(), self.genome_len());
        let b = self.bits_per_var;
        let shift = (self.bounds.len() - 1 - var) as u32 * b;
        let raw = (genome.bits >> shift) & mask(b);
        let (lo, hi) = self.bounds[var];
        let top = mask(b) as f64;
        // Pin the top code to `hi` exactly so rounding never leaves the box.
        if raw == mask(b) {
            hi
        } else {
            (lo + raw as f64 * ((hi - lo) / top)).min(hi)
        }
    }

    pub fn decode_xy(&self, genome: &Genome) -> (f64, f64) {
        (self.decode_var(genome, 0), self.decode_var(genome, 1))
    }
}

/// Tunables of the genetic search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-bit flip probability.
    pub mutation_rate: f64,
    /// Independent restarts (`n * n` in the grid notation).
    pub restarts: usize,
    pub bounds: [(f64, f64); 2],
    pub bits_per_var: u32,
    pub rng_seed: u64,
    #[serde(default = "default_window")]
    pub window_epsilon: f64,
}

fn default_window() -> f64 {
    DEFAULT_WINDOW_EPSILON
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 100,
            generations: 200,
            crossover_rate: 0.9,
            mutation_rate: 0.01,
            restarts: 100,
            bounds: [(0.0, 100_000.0), (0.0, 100_000.0)],
            bits_per_var: 24,
            rng_seed: 0,
            window_epsilon: DEFAULT_WINDOW_EPSILON,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::config("population_size must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::config("crossover_rate must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::config("mutation_rate must lie in [0, 1]"));
        }
        if self.restarts == 0 {
            return Err(Error::config("restarts must be at least 1"));
        }
        if !(self.window_epsilon.is_finite() && self.window_epsilon >= 0.0) {
            return Err(Error::config("window_epsilon must be finite and non-negative"));
        }
        self.encoding().map(|_| ())
    }

    pub fn encoding(&self) -> Result<Encoding> {
        Encoding::new(self.bits_per_var, self.bounds.to_vec())
    }

    /// Same configuration with a different seed.
    pub fn with_seed(&self, rng_seed: u64) -> Self {
        GaConfig {
            rng_seed,
            ..self.clone()
        }
    }
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed for `index` from `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Squared residual of the AA and BB channels at `candidate`.
pub fn fitness(candidate: (f64, f64), phi: f64, measured: &MeasuredPair) -> Result<f64> {
    let (x, y) = candidate;
    let aa = measured.r_aa - rssi_2d(Channel::AA, x, y, phi)?;
    let bb = measured.r_bb - rssi_2d(Channel::BB, x, y, phi)?;
    Ok(aa * aa + bb * bb)
}

/// Cumulative selection weights for one generation.
#[derive(Debug, Clone)]
pub struct RouletteWheel {
    cumulative: Vec<f64>,
}

impl RouletteWheel {
    /// Builds the wheel from raw fitness (lower is better) using the window
    /// `s_i = (f_max - f_i) + eps * (f_max - f_min)`.
    pub fn new(fitnesses: &[f64], window_epsilon: f64) -> Self {
        assert!(!fitnesses.is_empty(), "roulette wheel needs a population");
        let (f_min, f_max) = fitnesses
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &f| {
                (lo.min(f), hi.max(f))
            });
        let span = f_max - f_min;
        let mut acc = 0.0;
        let cumulative = if span > 0.0 && span.is_finite() {
            fitnesses
                .iter()
                .map(|&f| {
                    acc += (f_max - f) + window_epsilon * span;
                    acc
                })
                .collect()
        } else {
            fitnesses
                .iter()
                .map(|_| {
                    acc += 1.0;
                    acc
                })
                .collect()
        };
        RouletteWheel { cumulative }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total();
        let mut prev = 0.0;
        self.cumulative
            .iter()
            .map(|&c| {
                let p = (c - prev) / total;
                prev = c;
                p
            })
            .collect()
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * self.total();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Draws one parent index with window-scaled roulette selection.
pub fn select_roulette<R: Rng + ?Sized>(fitnesses: &[f64], window_epsilon: f64, rng: &mut R) -> usize {
    RouletteWheel::new(fitnesses, window_epsilon).sample(rng)
}

/// Swaps the suffixes of two genomes from position `cut` on.
pub fn crossover_at(a: &Genome, b: &Genome, cut: u32) -> (Genome, Genome) {
    assert_eq!(a.len, b.len, "crossover needs equal-length genomes");
    assert!(cut <= a.len);
    let suffix = mask(a.len - cut);
    let child_a = Genome::new((a.bits & !suffix) | (b.bits & suffix), a.len);
    let child_b = Genome::new((b.bits & !suffix) | (a.bits & suffix), a.len);
    (child_a, child_b)
}

/// Single-point crossover applied with probability `crossover_rate`.
pub fn crossover_single_point<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    crossover_rate: f64,
    rng: &mut R,
) -> (Genome, Genome) {
    assert_eq!(a.len, b.len, "crossover needs equal-length genomes");
    if a.len < 2 || !rng.random_bool(crossover_rate) {
        return (*a, *b);
    }
    let cut = rng.random_range(1..a.len);
    crossover_at(a, b, cut)
}

/// Flips each bit independently with probability `mutation_rate`.
pub fn mutate<R: Rng + ?Sized>(genome: &Genome, mutation_rate: f64, rng: &mut R) -> Genome {
    let mut out = *genome;
    if mutation_rate <= 0.0 {
        return out;
    }
    for pos in 0..out.len {
        if rng.random_bool(mutation_rate) {
            out.flip(pos);
        }
    }
    out
}

/// Outcome of one GA run.
#[derive(Debug, Clone, PartialEq)]
pub struct GaRun {
    pub best: (f64, f64),
    pub best_genome: Genome,
    pub best_fitness: f64,
    /// Best fitness of the initial population followed by one entry per generation.
    pub trace: Vec<f64>,
}

/// Runs the GA against an arbitrary objective over `(x, y)`.
///
/// Objective values that are not finite are treated as the worst finite value
/// of the generation for selection purposes.
pub fn run_ga_with<F>(config: &GaConfig, objective: F) -> Result<GaRun>
where
    F: Fn(f64, f64) -> f64,
{
    config.validate()?;
    let encoding = config.encoding()?;
    let len = encoding.genome_len();
    let n = config.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let evaluate = |pop: &[Genome]| -> Vec<f64> {
        pop.iter()
            .map(|g| {
                let (x, y) = encoding.decode_xy(g);
                objective(x, y)
            })
            .collect()
    };

    let mut population: Vec<Genome> = (0..n).map(|_| Genome::random(len, &mut rng)).collect();
    let mut fits = evaluate(&population);
    let mut best = argmin(&fits);
    let mut trace = Vec::with_capacity(config.generations + 1);
    trace.push(fits[best]);

    for _ in 0..config.generations {
        let wheel = RouletteWheel::new(&selection_view(&fits), config.window_epsilon);
        let mut next = Vec::with_capacity(n);
        next.push(population[best]);
        while next.len() < n {
            let a = &population[wheel.sample(&mut rng)];
            let b = &population[wheel.sample(&mut rng)];
            let (c1, c2) = crossover_single_point(a, b, config.crossover_rate, &mut rng);
            next.push(mutate(&c1, config.mutation_rate, &mut rng));
            if next.len() < n {
                next.push(mutate(&c2, config.mutation_rate, &mut rng));
            }
        }
        population = next;
        fits = evaluate(&population);
        best = argmin(&fits);
        trace.push(fits[best]);
    }

    let best_genome = population[best];
    Ok(GaRun {
        best: encoding.decode_xy(&best_genome),
        best_genome,
        best_fitness: fits[best],
        trace,
    })
}

fn selection_view(fits: &[f64]) -> Vec<f64> {
    let worst = fits
        .iter()
        .copied()
        .filter(|f| f.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let fill = if worst.is_finite() { worst } else { 0.0 };
    fits.iter()
        .map(|&f| if f.is_finite() { f } else { fill })
        .collect()
}

/// Index of the smallest value; NaN sorts last, ties go to the lowest index.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] || (values[best].is_nan() && !v.is_nan()) {
            best = i;
        }
    }
    best
}

fn rssi_objective(phi: f64, measured: &MeasuredPair) -> impl Fn(f64, f64) -> f64 + '_ {
    move |x, y| fitness((x, y), phi, measured).unwrap_or(f64::INFINITY)
}

/// One GA run minimizing the RSSI residual for a fixed bearing.
pub fn run_ga(config: &GaConfig, phi: f64, measured: &MeasuredPair) -> Result<GaRun> {
    run_ga_with(config, rssi_objective(phi, measured))
}

/// Best result over `config.restarts` independent runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStartResult {
    pub best: GaRun,
    pub best_restart: usize,
    /// Best fitness of every restart, by restart index.
    pub restart_fitnesses: Vec<f64>,
}

/// Runs `config.restarts` independent GAs, restart `k` seeded with
/// `derive_seed(config.rng_seed, k)`, and keeps the overall best.
///
/// Restarts run in parallel; ties go to the lowest restart index so the
/// result does not depend on scheduling.
pub fn multi_start_with<F>(config: &GaConfig, objective: F) -> Result<MultiStartResult>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    config.validate()?;
    let runs: Vec<GaRun> = (0..config.restarts)
        .into_par_iter()
        .map(|k| run_ga_with(&config.with_seed(derive_seed(config.rng_seed, k as u64)), &objective))
        .collect::<Result<_>>()?;
    let restart_fitnesses: Vec<f64> = runs.iter().map(|r| r.best_fitness).collect();
    let best_restart = argmin(&restart_fitnesses);
    Ok(MultiStartResult {
        best: runs.into_iter().nth(best_restart).unwrap(),
        best_restart,
        restart_fitnesses,
    })
}

pub fn multi_start(config: &GaConfig, phi: f64, measured: &MeasuredPair) -> Result<MultiStartResult> {
    multi_start_with(config, rssi_objective(phi, measured))
}
