//! Random listing generators shared by the integration tests.

#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rentyield::{Listing, Operation, PropertyType, Status};

pub const HOODS: [&str; 6] = ["Acacias", "Adelfas", "Prosperidad", "Chamartín", "Leganés", "Sol"];

/// A listing with every optional field drawn at random.
pub fn random_listing(rng: &mut ChaCha8Rng, id: String) -> Listing {
    let operation = if rng.random::<bool>() { Operation::Rent } else { Operation::Sale };
    let size = rng.random_range(20.0..220.0f64).round();
    let price = match operation {
        Operation::Rent => rng.random_range(400.0..4000.0f64),
        Operation::Sale => rng.random_range(60_000.0..900_000.0f64),
    };
    let mut l = Listing::new(id, operation, (price * 100.0).round() / 100.0, size, HOODS[rng.random_range(0..HOODS.len())]).unwrap();
    let opt = |rng: &mut ChaCha8Rng| rng.random::<f64>() < 0.85;
    l.exterior = opt(rng).then(|| rng.random());
    l.floor = opt(rng).then(|| rng.random_range(-1..12));
    l.lift = opt(rng).then(|| rng.random());
    l.parking = opt(rng).then(|| rng.random());
    l.new_development = opt(rng).then(|| rng.random());
    l.photos = rng.random_range(0..50);
    l.property_type = [PropertyType::Flat, PropertyType::Duplex, PropertyType::Chalet, PropertyType::Penthouse, PropertyType::Other][rng.random_range(0..5)];
    l.status = [Status::Good, Status::Renew, Status::NewDevelopment, Status::Unknown][rng.random_range(0..4)];
    l.bathrooms = rng.random_range(0..5);
    l.rooms = rng.random_range(0..7);
    l.price_by_area = opt(rng).then(|| (rng.random_range(5.0..35.0f64) * 100.0).round() / 100.0);
    l.latitude = 40.3 + rng.random::<f64>() * 0.2;
    l.longitude = -3.8 + rng.random::<f64>() * 0.2;
    l
}

pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize) -> Vec<Listing> {
    (0..n).map(|i| random_listing(rng, format!("id{i:05}"))).collect()
}

fn arb_name() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("Acacias".to_string()),
        Just("Chamartín".to_string()),
        Just("Peña Grande".to_string()),
        "[A-Za-z][A-Za-z ]{0,12}",
    ]
}

prop_compose! {
    pub fn arb_listing()(
        id in "[a-z0-9]{1,8}",
        rent in any::<bool>(),
        price in 1.0..1_000_000.0f64,
        size in 1.0..500.0f64,
        exterior in proptest::option::of(any::<bool>()),
        floor in proptest::option::of(-2..40i32),
        lift in proptest::option::of(any::<bool>()),
        parking in proptest::option::of(any::<bool>()),
        new_development in proptest::option::of(any::<bool>()),
        photos in 0..100u32,
        ptype in 0..5usize,
        status in 0..4usize,
        bathrooms in 0..6u32,
        rooms in 0..9u32,
        pba in proptest::option::of(0.0..60.0f64),
        lat in -90.0..90.0f64,
        lon in -180.0..180.0f64,
        hood in arb_name(),
    ) -> Listing {
        Listing {
            id,
            operation: if rent { Operation::Rent } else { Operation::Sale },
            price,
            size,
            exterior,
            floor,
            lift,
            parking,
            new_development,
            photos,
            property_type: [PropertyType::Flat, PropertyType::Duplex, PropertyType::Chalet, PropertyType::Penthouse, PropertyType::Other][ptype],
            status: [Status::Good, Status::Renew, Status::NewDevelopment, Status::Unknown][status],
            bathrooms,
            rooms,
            price_by_area: pba,
            latitude: lat,
            longitude: lon,
            neighborhood: hood,
        }
    }
}
