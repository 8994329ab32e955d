//! Synthetic listing generator used as the benchmark dataset.
//!
//! Each neighborhood has a base price per square meter and a gross sale
//! yield. A rent listing's monthly price is
//!
//! ```text
//! rent = size * (4 + 0.03 * pba^2)
//!      + 60 * exterior + 12 * floor + 250 * lift
//!      + 60 * good + 180 * new_development - 120 * renew
//!      + 4000 * bathrooms / size + 80 * duplex - 40 * flat
//!      + 90 * parking + 2 * photos
//! ```
//!
//! times a log-normal factor with sigma 0.08, so the noise grows with the
//! rent level. `pba` is the listing's price per square meter, drawn around
//! its neighborhood's base with 20% dispersion, which makes it informative
//! beyond location. Missing values are injected after the rent is computed:
//! exterior 5%, floor 8%, lift 10%, parking 60%. With `outlier_fraction`
//! set, that share of rent listings is replaced by prices near 30,000.
//!
//! Sale prices are `12 * size * pba / yield` with the neighborhood's yield
//! between 3% and 7%, times a log-normal factor with sigma 0.1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{Listing, Operation, PropertyType, Status};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_rent: usize,
    pub n_sale: usize,
    pub seed: u64,
    /// Share of rent listings replaced by extreme prices.
    pub outlier_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_rent: 5000,
            n_sale: 2000,
            seed: 2019,
            outlier_fraction: 0.0,
        }
    }
}

struct Hood {
    name: &'static str,
    lat: f64,
    lon: f64,
    pba: f64,
    gross_yield: f64,
}

const fn hood(name: &'static str, lat: f64, lon: f64, pba: f64, gross_yield: f64) -> Hood {
    Hood {
        name,
        lat,
        lon,
        pba,
        gross_yield,
    }
}

const HOODS: [Hood; 16] = [
    hood("Acacias", 40.4023, -3.7060, 15.0, 0.052),
    hood("Adelfas", 40.4012, -3.6720, 14.0, 0.048),
    hood("Prosperidad", 40.4440, -3.6740, 17.5, 0.036),
    hood("Recoletos", 40.4250, -3.6860, 24.0, 0.031),
    hood("Sol", 40.4168, -3.7038, 22.0, 0.045),
    hood("Chamberi", 40.4340, -3.7040, 20.0, 0.038),
    hood("Lavapies", 40.4087, -3.7010, 17.0, 0.058),
    hood("Arguelles", 40.4300, -3.7160, 18.5, 0.040),
    hood("Vallecas", 40.3820, -3.6570, 11.0, 0.066),
    hood("Usera", 40.3880, -3.7070, 11.5, 0.069),
    hood("Carabanchel", 40.3840, -3.7300, 11.0, 0.062),
    hood("Tetuan", 40.4600, -3.6990, 15.5, 0.050),
    hood("Hortaleza", 40.4720, -3.6410, 13.5, 0.042),
    hood("Moncloa", 40.4350, -3.7190, 17.0, 0.037),
    hood("Retiro", 40.4110, -3.6760, 19.0, 0.035),
    hood("Delicias", 40.3990, -3.6920, 14.5, 0.055),
];

fn weighted<T: Copy>(rng: &mut ChaCha8Rng, items: &[(T, f64)]) -> T {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for &(item, w) in items {
        if u < w {
            return item;
        }
        u -= w;
    }
    items[items.len() - 1].0
}

fn maybe<T>(rng: &mut ChaCha8Rng, missing: f64, v: T) -> Option<T> {
    if rng.random::<f64>() < missing {
        None
    } else {
        Some(v)
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Noise-free rent for a complete listing with the given price per area.
pub fn expected_rent(l: &Listing, pba: f64) -> f64 {
    let new_dev = l.status == Status::NewDevelopment || l.new_development == Some(true);
    l.size * (4.0 + 0.03 * pba * pba)
        + 60.0 * flag(l.exterior == Some(true))
        + 12.0 * f64::from(l.floor.unwrap_or(0))
        + 250.0 * flag(l.lift == Some(true))
        + 60.0 * flag(l.status == Status::Good && !new_dev)
        + 180.0 * flag(new_dev)
        - 120.0 * flag(l.status == Status::Renew && !new_dev)
        + 4000.0 * f64::from(l.bathrooms) / l.size
        + 80.0 * flag(l.property_type == PropertyType::Duplex)
        - 40.0 * flag(l.property_type == PropertyType::Flat)
        + 90.0 * flag(l.parking == Some(true))
        + 2.0 * f64::from(l.photos)
}

fn base_listing(rng: &mut ChaCha8Rng, id: String, op: Operation) -> (Listing, f64, &'static Hood) {
    let h = &HOODS[rng.random_range(0..HOODS.len())];
    let size = LogNormal::new(80f64.ln(), 0.4)
        .unwrap()
        .sample(rng)
        .clamp(25.0, 400.0)
        .round();
    let pba = (h.pba * LogNormal::new(0.0, 0.2).unwrap().sample(rng) * 100.0).round() / 100.0;
    let property_type = weighted(
        rng,
        &[
            (PropertyType::Flat, 0.72),
            (PropertyType::Duplex, 0.06),
            (PropertyType::Penthouse, 0.07),
            (PropertyType::Chalet, 0.05),
            (PropertyType::Other, 0.10),
        ],
    );
    let status = weighted(
        rng,
        &[
            (Status::Good, 0.70),
            (Status::Renew, 0.15),
            (Status::NewDevelopment, 0.05),
            (Status::Unknown, 0.10),
        ],
    );
    let bathrooms = (1 + (size / 70.0) as u32 + u32::from(rng.random::<f64>() < 0.3)).min(5);
    let jitter = Normal::new(0.0, 0.01).unwrap();
    let l = Listing {
        id,
        operation: op,
        price: 1.0,
        size,
        exterior: Some(rng.random::<f64>() < 0.8),
        floor: Some(rng.random_range(0..=9)),
        lift: Some(rng.random::<f64>() < 0.7),
        parking: Some(rng.random::<f64>() < 0.3),
        new_development: Some(status == Status::NewDevelopment),
        photos: rng.random_range(5..=40),
        property_type,
        status,
        bathrooms,
        rooms: (size / 30.0).round().max(1.0) as u32,
        price_by_area: Some(pba),
        latitude: h.lat + jitter.sample(rng),
        longitude: h.lon + jitter.sample(rng),
        neighborhood: h.name.to_string(),
    };
    (l, pba, h)
}

fn inject_missing(rng: &mut ChaCha8Rng, l: &mut Listing) {
    l.exterior = l.exterior.and_then(|v| maybe(rng, 0.05, v));
    l.floor = l.floor.and_then(|v| maybe(rng, 0.08, v));
    l.lift = l.lift.and_then(|v| maybe(rng, 0.10, v));
    l.parking = l.parking.and_then(|v| maybe(rng, 0.60, v));
}

/// Rent listings `r00000..` followed by sale listings `s00000..`.
pub fn generate(cfg: &SynthConfig) -> Vec<Listing> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rent_noise = LogNormal::new(0.0, 0.08).unwrap();
    let sale_noise = LogNormal::new(0.0, 0.10).unwrap();
    let mut out = Vec::with_capacity(cfg.n_rent + cfg.n_sale);
    for i in 0..cfg.n_rent {
        let (mut l, pba, _) = base_listing(&mut rng, format!("r{i:05}"), Operation::Rent);
        l.price = (expected_rent(&l, pba).max(150.0) * rent_noise.sample(&mut rng)).round();
        if rng.random::<f64>() < cfg.outlier_fraction {
            l.price = (30_000.0 * rng.random_range(0.8..1.2f64)).round();
        }
        inject_missing(&mut rng, &mut l);
        out.push(l);
    }
    for i in 0..cfg.n_sale {
        let (mut l, pba, h) = base_listing(&mut rng, format!("s{i:05}"), Operation::Sale);
        let price = 12.0 * l.size * pba / h.gross_yield * sale_noise.sample(&mut rng);
        l.price = (price / 100.0).round() * 100.0;
        inject_missing(&mut rng, &mut l);
        out.push(l);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic_and_valid() {
        let cfg = SynthConfig {
            n_rent: 200,
            n_sale: 50,
            seed: 1,
            outlier_fraction: 0.0,
        };
        let a = generate(&cfg);
        assert_eq!(a, generate(&cfg));
        assert_eq!(a.len(), 250);
        for l in &a {
            l.clone().validate().unwrap();
        }
        assert_eq!(a.iter().filter(|l| l.operation == Operation::Sale).count(), 50);
    }

    #[test]
    fn outliers_are_injected() {
        let cfg = SynthConfig {
            n_rent: 1000,
            n_sale: 0,
            seed: 3,
            outlier_fraction: 0.01,
        };
        let n = generate(&cfg).iter().filter(|l| l.price >= 24_000.0).count();
        assert!((3..=25).contains(&n), "{n}");
    }
}
