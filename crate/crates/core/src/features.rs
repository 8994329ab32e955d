//! Encoding of listings into dense feature rows for each [`ModelSpec`].
//!
//! Booleans become 0/1, status and property type become one-hot dummies
//! (baselines: status `unknown`; property types other than duplex and flat),
//! and bathrooms enter as bathrooms per square meter. A listing flagged as
//! a new development counts toward the new-development status dummy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Listing, ModelSpec, Operation, PropertyType, Status};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("listing lacks feature `{0}` required by the model spec")]
    MissingFeature(&'static str),
    #[error("no listing carries every feature required by {0}")]
    NoUsableRows(ModelSpec),
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn need<T>(v: Option<T>, name: &'static str) -> Result<T, EncodeError> {
    v.ok_or(EncodeError::MissingFeature(name))
}

/// Feature vector (no intercept) in the order of `spec.feature_names()`.
pub fn encode_listing(l: &Listing, spec: ModelSpec) -> Result<Vec<f64>, EncodeError> {
    let mut row = Vec::with_capacity(spec.n_features());
    row.push(l.size);
    row.push(flag(need(l.exterior, "exterior")?));
    row.push(f64::from(need(l.floor, "floor")?));
    if spec >= ModelSpec::Spec2 {
        row.push(flag(need(l.lift, "lift")?));
    }
    if spec >= ModelSpec::Spec3 {
        row.push(need(l.price_by_area, "priceByArea")?);
    }
    if spec >= ModelSpec::Spec4 {
        let new_dev = l.status == Status::NewDevelopment || l.new_development == Some(true);
        row.push(flag(l.status == Status::Good && !new_dev));
        row.push(flag(new_dev));
        row.push(flag(l.status == Status::Renew && !new_dev));
        row.push(f64::from(l.bathrooms) / l.size);
        row.push(flag(l.property_type == PropertyType::Duplex));
        row.push(flag(l.property_type == PropertyType::Flat));
        row.push(flag(need(l.parking, "parking")?));
        row.push(f64::from(l.photos));
    }
    debug_assert_eq!(row.len(), spec.n_features());
    Ok(row)
}

/// Encoded training rows: rent listings carrying every required feature,
/// in canonical order (ascending listing id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedRows {
    pub spec: ModelSpec,
    pub ids: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    /// Rent listings dropped for missing features.
    pub dropped: usize,
}

impl EncodedRows {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.spec.n_features()
    }

    /// Rows at the given positions, preserving their order.
    pub fn subset(&self, rows: &[usize]) -> EncodedRows {
        EncodedRows {
            spec: self.spec,
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            target: rows.iter().map(|&i| self.target[i]).collect(),
            dropped: 0,
        }
    }
}

/// Encodes the rent listings with listwise deletion of incomplete rows.
pub fn encode(listings: &[Listing], spec: ModelSpec) -> Result<EncodedRows, EncodeError> {
    let mut rows: Vec<(&Listing, Vec<f64>)> = Vec::new();
    let mut dropped = 0;
    for l in listings.iter().filter(|l| l.operation == Operation::Rent) {
        match encode_listing(l, spec) {
            Ok(row) => rows.push((l, row)),
            Err(_) => dropped += 1,
        }
    }
    if rows.is_empty() {
        return Err(EncodeError::NoUsableRows(spec));
    }
    rows.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    let mut out = EncodedRows {
        spec,
        ids: Vec::with_capacity(rows.len()),
        features: Vec::with_capacity(rows.len()),
        target: Vec::with_capacity(rows.len()),
        dropped,
    };
    for (l, row) in rows {
        out.ids.push(l.id.clone());
        out.features.push(row);
        out.target.push(l.price);
    }
    Ok(out)
}
