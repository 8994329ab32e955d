//! Mortgage arithmetic and the neighborhood × size yield index.
//!
//! The monthly payment finances the property price plus transaction costs,
//! minus the down payment:
//!
//! ```text
//! L = (1 + c)·P − d·P
//! M = L · r(1 + r)^n / ((1 + r)^n − 1)      (r > 0)
//! M = L / n                                  (r = 0)
//! ```
//!
//! The yield index of a cell is the mean monthly rent divided by the mean
//! monthly mortgage of the sale listings in the same neighborhood and size
//! bucket. A value of 1 means rent exactly covers the modeled mortgage.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::domain::{FinancingTerms, Listing, MortgageTerms, Operation, SizeBucket, YieldCell};
use crate::text::normalize_name;

#[derive(Debug, Error)]
pub enum FinanceError {
    #[error("payment {payment:.4} does not exceed the first month's interest {interest:.4}; the loan never amortizes")]
    NonRepayable { payment: f64, interest: f64 },
    #[error("neighborhoods missing from the boundary file: {}", .0.join(", "))]
    UnknownNeighborhood(Vec<String>),
    #[error("boundary file is not a GeoJSON FeatureCollection: {0}")]
    InvalidBoundaries(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Amount borrowed: price plus transaction costs, minus the down payment.
pub fn principal(t: &MortgageTerms) -> f64 {
    (1.0 + t.transaction_cost_rate) * t.price - t.down_payment_fraction * t.price
}

/// Price including transaction costs.
pub fn total_cost(t: &MortgageTerms) -> f64 {
    (1.0 + t.transaction_cost_rate) * t.price
}

pub fn monthly_mortgage(t: &MortgageTerms) -> f64 {
    let loan = principal(t);
    let n = f64::from(t.months);
    let r = t.monthly_rate;
    if r == 0.0 {
        return loan / n;
    }
    // (1+r)^n - 1 via expm1/ln_1p stays accurate for tiny r.
    let growth_minus_one = (n * r.ln_1p()).exp_m1();
    loan * r * (growth_minus_one + 1.0) / growth_minus_one
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmortizationRow {
    pub month: u32,
    pub opening_balance: f64,
    pub interest: f64,
    pub principal_repaid: f64,
    pub closing_balance: f64,
}

/// Month-by-month simulation of the loan under a fixed payment.
pub fn amortization_schedule(
    t: &MortgageTerms,
    payment: f64,
) -> Result<Vec<AmortizationRow>, FinanceError> {
    let mut balance = principal(t);
    let first_interest = balance * t.monthly_rate;
    if t.monthly_rate > 0.0 && payment <= first_interest {
        return Err(FinanceError::NonRepayable {
            payment,
            interest: first_interest,
        });
    }
    let mut rows = Vec::with_capacity(t.months as usize);
    for month in 1..=t.months {
        let interest = balance * t.monthly_rate;
        let closing = balance + interest - payment;
        rows.push(AmortizationRow {
            month,
            opening_balance: balance,
            interest,
            principal_repaid: payment - interest,
            closing_balance: closing,
        });
        balance = closing;
    }
    Ok(rows)
}

pub fn size_bucket_of(size: f64) -> Option<SizeBucket> {
    SizeBucket::of(size)
}

#[derive(Default)]
struct CellAcc {
    rent_sum: f64,
    n_rent: usize,
    mortgage_sum: f64,
    n_sale: usize,
}

/// Display name for a normalized key: the most frequent raw spelling,
/// ties broken lexicographically.
fn pick_display(spellings: &BTreeMap<String, usize>) -> String {
    spellings
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(s, _)| s.trim().to_string())
        .unwrap_or_default()
}

/// Yield cells for every (neighborhood, bucket) with at least one listing,
/// ordered by normalized neighborhood then bucket.
pub fn compute_yield_index(listings: &[Listing], financing: &FinancingTerms) -> Vec<YieldCell> {
    let mut cells: BTreeMap<(String, SizeBucket), CellAcc> = BTreeMap::new();
    let mut spellings: HashMap<String, BTreeMap<String, usize>> = HashMap::new();

    for l in listings {
        let Some(bucket) = size_bucket_of(l.size) else {
            continue;
        };
        let key = normalize_name(&l.neighborhood);
        *spellings
            .entry(key.clone())
            .or_default()
            .entry(l.neighborhood.clone())
            .or_default() += 1;
        let acc = cells.entry((key, bucket)).or_default();
        match l.operation {
            Operation::Rent => {
                acc.rent_sum += l.price;
                acc.n_rent += 1;
            }
            Operation::Sale => {
                // Listing prices are validated > 0, so the terms are valid
                // whenever the financing terms are.
                let terms = MortgageTerms {
                    price: l.price,
                    transaction_cost_rate: financing.transaction_cost_rate,
                    down_payment_fraction: financing.down_payment_fraction,
                    monthly_rate: financing.monthly_rate,
                    months: financing.months,
                };
                acc.mortgage_sum += monthly_mortgage(&terms);
                acc.n_sale += 1;
            }
        }
    }

    cells
        .into_iter()
        .map(|((key, bucket), acc)| {
            let mean_rent = (acc.n_rent > 0).then(|| acc.rent_sum / acc.n_rent as f64);
            let mean_mortgage = (acc.n_sale > 0).then(|| acc.mortgage_sum / acc.n_sale as f64);
            let index = match (mean_rent, mean_mortgage) {
                (Some(rent), Some(m)) => Some(rent / m),
                _ => None,
            };
            YieldCell {
                neighborhood: pick_display(&spellings[&key]),
                bucket,
                mean_rent,
                mean_mortgage,
                index,
                n_rent: acc.n_rent,
                n_sale: acc.n_sale,
            }
        })
        .collect()
}

/// Unweighted mean of the available bucket indices per neighborhood, keyed
/// by the cells' display names. Neighborhoods with no index are omitted.
pub fn neighborhood_average(cells: &[YieldCell]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for cell in cells {
        if let Some(ix) = cell.index {
            let e = acc.entry(cell.neighborhood.clone()).or_insert((0.0, 0));
            e.0 += ix;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(name, (sum, n))| (name, sum / n as f64))
        .collect()
}

/// CSV with header `neighborhood,bucket,index,n_rent,n_sale`; the index is
/// printed with three decimals and left empty when absent.
pub fn export_csv(cells: &[YieldCell]) -> Result<Vec<u8>, FinanceError> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["neighborhood", "bucket", "index", "n_rent", "n_sale"])?;
    for c in cells {
        let index = c.index.map(|v| format!("{v:.3}")).unwrap_or_default();
        w.write_record([
            c.neighborhood.as_str(),
            c.bucket.label(),
            index.as_str(),
            &c.n_rent.to_string(),
            &c.n_sale.to_string(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| FinanceError::Csv(csv::Error::from(e.into_error())))
}

fn feature_name(feature: &Value) -> Option<&str> {
    let props = feature.get("properties")?;
    ["neighborhood", "name", "NOMBRE"]
        .iter()
        .find_map(|k| props.get(*k).and_then(Value::as_str))
}

/// Copies every boundary feature and attaches `index_<bucket>` and
/// `index_avg` properties (null where absent). Boundary features are matched
/// on their `neighborhood` (or `name`) property after normalization.
pub fn export_geojson(cells: &[YieldCell], boundaries: &Value) -> Result<Value, FinanceError> {
    let features = boundaries
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| FinanceError::InvalidBoundaries("missing `features` array".into()))?;

    let known: HashMap<String, ()> = features
        .iter()
        .filter_map(feature_name)
        .map(|n| (normalize_name(n), ()))
        .collect();

    let mut missing: Vec<String> = cells
        .iter()
        .filter(|c| !known.contains_key(&normalize_name(&c.neighborhood)))
        .map(|c| c.neighborhood.clone())
        .collect();
    missing.dedup();
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(FinanceError::UnknownNeighborhood(missing));
    }

    let averages: HashMap<String, f64> = neighborhood_average(cells)
        .into_iter()
        .map(|(name, avg)| (normalize_name(&name), avg))
        .collect();
    let mut by_cell: HashMap<(String, SizeBucket), Option<f64>> = HashMap::new();
    for c in cells {
        by_cell.insert((normalize_name(&c.neighborhood), c.bucket), c.index);
    }

    let mut out_features = Vec::with_capacity(features.len());
    for feature in features {
        let mut feature = feature.clone();
        let key = feature_name(&feature).map(normalize_name);
        let obj = feature
            .as_object_mut()
            .ok_or_else(|| FinanceError::InvalidBoundaries("feature is not an object".into()))?;
        let props = obj
            .entry("properties")
            .or_insert_with(|| Value::Object(Map::new()));
        if props.is_null() {
            *props = Value::Object(Map::new());
        }
        let props = props
            .as_object_mut()
            .ok_or_else(|| FinanceError::InvalidBoundaries("properties is not an object".into()))?;
        for bucket in SizeBucket::ALL {
            let value = key
                .as_ref()
                .and_then(|k| by_cell.get(&(k.clone(), bucket)).copied().flatten());
            props.insert(format!("index_{}", bucket.label()), json_number(value));
        }
        let avg = key.as_ref().and_then(|k| averages.get(k).copied());
        props.insert("index_avg".into(), json_number(avg));
        out_features.push(feature);
    }

    let mut out = boundaries.clone();
    out["features"] = Value::Array(out_features);
    Ok(out)
}

fn json_number(v: Option<f64>) -> Value {
    v.and_then(serde_json::Number::from_f64)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}
