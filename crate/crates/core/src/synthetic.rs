//! Seeded dataset generators.
//!
//! [`cars`] and [`agro`] produce stand-ins for the two demonstration
//! datasets with the same schemas and sizes; the values are generated, not
//! measured. The generic generators are used by tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dataset::{Dataset, FeatureVector};

pub const CARS_ATTRIBUTES: [&str; 8] = [
    "MPG",
    "CYLINDERS",
    "DISPLACEMENT",
    "ACCELERATION",
    "HORSEPOWER",
    "WEIGHT",
    "YEAR",
    "ORIGIN",
];

pub const AGRO_ATTRIBUTES: [&str; 9] = [
    "PRECIPITATION",
    "TMAX",
    "TMIN",
    "NDVI",
    "WRSI",
    "TAVG",
    "ETP",
    "ETR",
    "ETM",
];

pub const AGRO_REGIONS: [&str; 5] = ["Araraquara", "Araras", "Jaboticabal", "Jau", "Ribeirao Preto"];
pub const AGRO_MONTHS: usize = 82;

const CARS_SEED: u64 = 1983;
const AGRO_SEED: u64 = 2007;

fn noise(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * sd
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (v * f).round() / f
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, options: &[(T, f64)]) -> T {
    let total: f64 = options.iter().map(|o| o.1).sum();
    let mut u = rng.random::<f64>() * total;
    for &(v, w) in options {
        if u < w {
            return v;
        }
        u -= w;
    }
    options[options.len() - 1].0
}

/// 406 cars with 8 attributes, CODs 1..=406, ordered by model year.
/// The first ten rows are 1970 American eight-cylinder cars.
pub fn cars() -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(CARS_SEED);
    let n = 406;
    let rows = (0..n)
        .map(|i| {
            let year = 70 + (i * 13 / n) as i32;
            let age = (year - 70) as f64;
            let origin = if i < 10 {
                1
            } else {
                pick(&mut rng, &[(1, 0.62), (2, 0.20), (3, 0.18)])
            };
            let cylinders: i32 = if i < 10 {
                8
            } else if origin == 1 {
                let p8 = (0.5 - 0.03 * age).max(0.1);
                pick(&mut rng, &[(8, p8), (6, 0.25), (4, 0.75 - p8)])
            } else if origin == 2 {
                pick(&mut rng, &[(4, 0.85), (6, 0.1), (3, 0.05)])
            } else {
                pick(&mut rng, &[(4, 0.85), (6, 0.1), (5, 0.05)])
            };
            let per_cylinder = if origin == 1 { 40.0 } else { 27.0 } + noise(&mut rng, 3.5);
            let displacement = (cylinders as f64 * per_cylinder).round().max(68.0);
            let horsepower = if origin == 1 {
                0.38 * displacement + 28.0 + noise(&mut rng, 10.0)
            } else {
                0.5 * displacement + 22.0 + noise(&mut rng, 8.0)
            }
            .round()
            .max(46.0);
            let weight = (1300.0 + 7.5 * displacement + noise(&mut rng, 200.0))
                .round()
                .max(1600.0);
            let acceleration = round_to((24.0 - 0.06 * horsepower + noise(&mut rng, 1.2)).clamp(8.0, 25.0), 1);
            let mpg = round_to(
                (56.0 - 0.011 * weight + 0.4 * age + noise(&mut rng, 2.0)).clamp(9.0, 47.0),
                1,
            );
            FeatureVector::new(
                i as i64 + 1,
                vec![
                    mpg,
                    cylinders as f64,
                    displacement,
                    acceleration,
                    horsepower,
                    weight,
                    year as f64,
                    origin as f64,
                ],
            )
        })
        .collect();
    Dataset::from_rows(CARS_ATTRIBUTES.iter().map(|s| s.to_string()).collect(), rows)
        .expect("generated cars table is valid")
}

/// 5 regions x 82 monthly records with 9 agrometeorological attributes.
/// Region `r` (0-based, in [`AGRO_REGIONS`] order) and month `m` (1-based)
/// get COD `100 * r + m`.
pub fn agro() -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(AGRO_SEED);
    let offsets = [0.5, -0.3, 0.4, 0.2, 0.8];
    let mut rows = Vec::with_capacity(AGRO_REGIONS.len() * AGRO_MONTHS);
    for (r, offset) in offsets.iter().enumerate() {
        for m in 1..=AGRO_MONTHS {
            let phase = std::f64::consts::TAU * (m - 1) as f64 / 12.0;
            let tavg = 22.0 + offset + 3.0 * phase.cos() + noise(&mut rng, 0.6);
            let tmax = tavg + 6.0 + noise(&mut rng, 0.8);
            let tmin = tavg - 7.0 + noise(&mut rng, 0.8);
            let precipitation = (120.0 + 100.0 * phase.cos() + noise(&mut rng, 30.0)).max(0.0);
            let ndvi = (0.45 + 0.25 * (phase - 1.0).sin() + noise(&mut rng, 0.04)).clamp(0.1, 0.9);
            let wrsi = (60.0 + 0.2 * precipitation + noise(&mut rng, 5.0)).clamp(0.0, 100.0);
            let etp = 3.5 + 0.25 * (tavg - 22.0) + 1.2 * phase.cos() + noise(&mut rng, 0.2);
            let etr = etp * (0.5 + 0.5 * wrsi / 100.0);
            let etm = etp * (0.6 + 0.6 * ndvi);
            let values = [precipitation, tmax, tmin, ndvi, wrsi, tavg, etp, etr, etm]
                .iter()
                .map(|v| round_to(*v, 3))
                .collect();
            rows.push(FeatureVector::new((100 * r + m) as i64, values));
        }
    }
    Dataset::from_rows(AGRO_ATTRIBUTES.iter().map(|s| s.to_string()).collect(), rows)
        .expect("generated agro table is valid")
}

fn named(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("x{i}")).collect()
}

/// Uniform values in `[0, scale)`, CODs `1..=n`.
pub fn uniform(n: usize, dim: usize, scale: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| {
            let v = (0..dim).map(|_| rng.random::<f64>() * scale).collect();
            FeatureVector::new(i as i64 + 1, v)
        })
        .collect();
    Dataset::from_rows(named(dim), rows).expect("valid")
}

/// Integer-valued rows on a small grid, so that many distances tie.
pub fn grid(n: usize, dim: usize, levels: u32, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| {
            let v = (0..dim).map(|_| rng.random_range(0..levels) as f64).collect();
            FeatureVector::new(i as i64 + 1, v)
        })
        .collect();
    Dataset::from_rows(named(dim), rows).expect("valid")
}

/// Gaussian blobs around uniformly placed centres in `[0, 100)^dim`.
pub fn gaussian_clusters(n: usize, dim: usize, clusters: usize, spread: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..dim).map(|_| rng.random::<f64>() * 100.0).collect())
        .collect();
    let normal = Normal::new(0.0, spread).expect("finite spread");
    let rows = (0..n)
        .map(|i| {
            let c = &centres[i % clusters];
            let v = c.iter().map(|m| m + normal.sample(&mut rng)).collect();
            FeatureVector::new(i as i64 + 1, v)
        })
        .collect();
    Dataset::from_rows(named(dim), rows).expect("valid")
}
