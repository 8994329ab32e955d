//! Canonical types shared by every stage of the pipeline.
//!
//! Constructors validate their invariants; anything that enters the system
//! from outside (vendor payloads, dataset files, HTTP bodies) goes through
//! [`Listing::validate`] before it is used.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> DomainError {
    DomainError::InvalidField {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Rent,
    Sale,
}

impl Operation {
    pub fn as_str(self) -> &'static str {
        match self {
            Operation::Rent => "rent",
            Operation::Sale => "sale",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Operation {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rent" => Ok(Operation::Rent),
            "sale" => Ok(Operation::Sale),
            other => Err(invalid("operation", format!("unknown operation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyType {
    Chalet,
    Duplex,
    Flat,
    Penthouse,
    Other,
}

impl PropertyType {
    /// Case-insensitive vendor mapping; unrecognised kinds become `Other`.
    pub fn from_vendor(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().as_str() {
            "chalet" => PropertyType::Chalet,
            "duplex" => PropertyType::Duplex,
            "flat" => PropertyType::Flat,
            "penthouse" => PropertyType::Penthouse,
            _ => PropertyType::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PropertyType::Chalet => "chalet",
            PropertyType::Duplex => "duplex",
            PropertyType::Flat => "flat",
            PropertyType::Penthouse => "penthouse",
            PropertyType::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "good")]
    Good,
    #[serde(rename = "newdevelopment")]
    NewDevelopment,
    #[serde(rename = "renew")]
    Renew,
    #[serde(rename = "unknown")]
    Unknown,
}

impl Status {
    /// Case-insensitive vendor mapping; unrecognised states become `Unknown`.
    pub fn from_vendor(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().as_str() {
            "good" => Status::Good,
            "newdevelopment" => Status::NewDevelopment,
            "renew" => Status::Renew,
            _ => Status::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Good => "good",
            Status::NewDevelopment => "newdevelopment",
            Status::Renew => "renew",
            Status::Unknown => "unknown",
        }
    }
}

/// One normalized property record.
///
/// `price` is the monthly rent for `Operation::Rent` and the asking price for
/// `Operation::Sale`, both in euros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Listing {
    pub id: String,
    pub operation: Operation,
    pub price: f64,
    pub size: f64,
    pub exterior: Option<bool>,
    pub floor: Option<i32>,
    pub lift: Option<bool>,
    pub parking: Option<bool>,
    #[serde(rename = "newDevelopment")]
    pub new_development: Option<bool>,
    pub photos: u32,
    #[serde(rename = "propertyType")]
    pub property_type: PropertyType,
    pub status: Status,
    pub bathrooms: u32,
    pub rooms: u32,
    #[serde(rename = "priceByArea")]
    pub price_by_area: Option<f64>,
    pub latitude: f64,
    pub longitude: f64,
    pub neighborhood: String,
}

impl Listing {
    /// Minimal listing with every optional feature absent.
    pub fn new(
        id: impl Into<String>,
        operation: Operation,
        price: f64,
        size: f64,
        neighborhood: impl Into<String>,
    ) -> Result<Self, DomainError> {
        Listing {
            id: id.into(),
            operation,
            price,
            size,
            exterior: None,
            floor: None,
            lift: None,
            parking: None,
            new_development: None,
            photos: 0,
            property_type: PropertyType::Other,
            status: Status::Unknown,
            bathrooms: 0,
            rooms: 0,
            price_by_area: None,
            latitude: 0.0,
            longitude: 0.0,
            neighborhood: neighborhood.into(),
        }
        .validate()
    }

    pub fn validate(self) -> Result<Self, DomainError> {
        if self.id.is_empty() {
            return Err(invalid("id", "must not be empty"));
        }
        if !(self.price.is_finite() && self.price > 0.0) {
            return Err(invalid("price", format!("must be > 0, got {}", self.price)));
        }
        if !(self.size.is_finite() && self.size > 0.0) {
            return Err(invalid("size", format!("must be > 0, got {}", self.size)));
        }
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(invalid("latitude", format!("{} outside [-90, 90]", self.latitude)));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(invalid(
                "longitude",
                format!("{} outside [-180, 180]", self.longitude),
            ));
        }
        if let Some(pba) = self.price_by_area {
            if !(pba.is_finite() && pba >= 0.0) {
                return Err(invalid("priceByArea", format!("must be >= 0, got {pba}")));
            }
        }
        Ok(self)
    }

    /// Key used for deduplication and canonical row ordering.
    pub fn key(&self) -> (&str, Operation) {
        (&self.id, self.operation)
    }
}

/// Financing parameters of the mortgage formula for a single property.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MortgageTerms {
    pub price: f64,
    pub transaction_cost_rate: f64,
    pub down_payment_fraction: f64,
    pub monthly_rate: f64,
    pub months: u32,
}

impl MortgageTerms {
    pub fn new(
        price: f64,
        transaction_cost_rate: f64,
        down_payment_fraction: f64,
        monthly_rate: f64,
        months: u32,
    ) -> Result<Self, DomainError> {
        FinancingTerms::new(
            transaction_cost_rate,
            down_payment_fraction,
            monthly_rate,
            months,
        )?
        .for_price(price)
    }

    pub fn financing(&self) -> FinancingTerms {
        FinancingTerms {
            transaction_cost_rate: self.transaction_cost_rate,
            down_payment_fraction: self.down_payment_fraction,
            monthly_rate: self.monthly_rate,
            months: self.months,
        }
    }
}

/// Mortgage terms without the property price; applied to every sale listing
/// when building the yield index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinancingTerms {
    pub transaction_cost_rate: f64,
    pub down_payment_fraction: f64,
    pub monthly_rate: f64,
    pub months: u32,
}

impl Default for FinancingTerms {
    /// 30% down, 6.7% transaction costs, 0.16% per month (about 2% a year)
    /// over 30 years.
    fn default() -> Self {
        FinancingTerms {
            transaction_cost_rate: 0.067,
            down_payment_fraction: 0.30,
            monthly_rate: 0.0016,
            months: 360,
        }
    }
}

impl FinancingTerms {
    pub fn new(
        transaction_cost_rate: f64,
        down_payment_fraction: f64,
        monthly_rate: f64,
        months: u32,
    ) -> Result<Self, DomainError> {
        if !(0.0..1.0).contains(&transaction_cost_rate) {
            return Err(invalid(
                "transaction_cost_rate",
                format!("must lie in [0, 1), got {transaction_cost_rate}"),
            ));
        }
        if !(0.0..1.0).contains(&down_payment_fraction) {
            return Err(invalid(
                "down_payment_fraction",
                format!("must lie in [0, 1), got {down_payment_fraction}"),
            ));
        }
        if !(monthly_rate.is_finite() && monthly_rate >= 0.0) {
            return Err(invalid(
                "monthly_rate",
                format!("must be >= 0, got {monthly_rate}"),
            ));
        }
        if months == 0 {
            return Err(invalid("months", "must be >= 1"));
        }
        Ok(FinancingTerms {
            transaction_cost_rate,
            down_payment_fraction,
            monthly_rate,
            months,
        })
    }

    pub fn for_price(&self, price: f64) -> Result<MortgageTerms, DomainError> {
        if !(price.is_finite() && price > 0.0) {
            return Err(invalid("price", format!("must be > 0, got {price}")));
        }
        let checked = FinancingTerms::new(
            self.transaction_cost_rate,
            self.down_payment_fraction,
            self.monthly_rate,
            self.months,
        )?;
        Ok(MortgageTerms {
            price,
            transaction_cost_rate: checked.transaction_cost_rate,
            down_payment_fraction: checked.down_payment_fraction,
            monthly_rate: checked.monthly_rate,
            months: checked.months,
        })
    }
}

/// Square-meter size interval used by the yield index. Bounds are half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SizeBucket {
    #[serde(rename = "30_60")]
    B30To60,
    #[serde(rename = "60_90")]
    B60To90,
    #[serde(rename = "90_120")]
    B90To120,
    #[serde(rename = "120_150")]
    B120To150,
    #[serde(rename = "150_plus")]
    B150Plus,
}

impl SizeBucket {
    pub const ALL: [SizeBucket; 5] = [
        SizeBucket::B30To60,
        SizeBucket::B60To90,
        SizeBucket::B90To120,
        SizeBucket::B120To150,
        SizeBucket::B150Plus,
    ];

    /// `[lo, hi)` in square meters; the last bucket is unbounded.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            SizeBucket::B30To60 => (30.0, 60.0),
            SizeBucket::B60To90 => (60.0, 90.0),
            SizeBucket::B90To120 => (90.0, 120.0),
            SizeBucket::B120To150 => (120.0, 150.0),
            SizeBucket::B150Plus => (150.0, f64::INFINITY),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SizeBucket::B30To60 => "30_60",
            SizeBucket::B60To90 => "60_90",
            SizeBucket::B90To120 => "90_120",
            SizeBucket::B120To150 => "120_150",
            SizeBucket::B150Plus => "150_plus",
        }
    }

    pub fn of(size: f64) -> Option<SizeBucket> {
        SizeBucket::ALL.into_iter().find(|b| {
            let (lo, hi) = b.bounds();
            size >= lo && size < hi
        })
    }
}

impl fmt::Display for SizeBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SizeBucket {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SizeBucket::ALL
            .into_iter()
            .find(|b| b.label() == s)
            .ok_or_else(|| invalid("bucket", format!("unknown size bucket `{s}`")))
    }
}

/// Aggregate for one neighborhood and size bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldCell {
    pub neighborhood: String,
    pub bucket: SizeBucket,
    pub mean_rent: Option<f64>,
    pub mean_mortgage: Option<f64>,
    /// `mean_rent / mean_mortgage`; absent unless both sides have samples.
    pub index: Option<f64>,
    pub n_rent: usize,
    pub n_sale: usize,
}

/// Nested feature subsets for the rent models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelSpec {
    Spec1,
    Spec2,
    Spec3,
    Spec4,
}

impl ModelSpec {
    pub const ALL: [ModelSpec; 4] = [
        ModelSpec::Spec1,
        ModelSpec::Spec2,
        ModelSpec::Spec3,
        ModelSpec::Spec4,
    ];

    pub fn number(self) -> u8 {
        match self {
            ModelSpec::Spec1 => 1,
            ModelSpec::Spec2 => 2,
            ModelSpec::Spec3 => 3,
            ModelSpec::Spec4 => 4,
        }
    }

    pub fn from_number(n: u8) -> Result<Self, DomainError> {
        match n {
            1 => Ok(ModelSpec::Spec1),
            2 => Ok(ModelSpec::Spec2),
            3 => Ok(ModelSpec::Spec3),
            4 => Ok(ModelSpec::Spec4),
            _ => Err(invalid("spec", format!("expected 1..=4, got {n}"))),
        }
    }

    /// Column names of the encoded feature vector, intercept excluded.
    pub fn feature_names(self) -> &'static [&'static str] {
        const ALL: [&str; 13] = [
            "size",
            "exterior",
            "floor",
            "lift",
            "price_by_area",
            "status_good",
            "status_newdevelopment",
            "status_renew",
            "bathrooms_per_sqm",
            "type_duplex",
            "type_flat",
            "parking",
            "photos",
        ];
        match self {
            ModelSpec::Spec1 => &ALL[..3],
            ModelSpec::Spec2 => &ALL[..4],
            ModelSpec::Spec3 => &ALL[..5],
            ModelSpec::Spec4 => &ALL[..],
        }
    }

    pub fn n_features(self) -> usize {
        self.feature_names().len()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "spec{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Polynomial { degree: u32, gamma: f64, coef0: f64 },
    Radial { gamma: f64 },
    Sigmoid { gamma: f64, coef0: f64 },
}

impl KernelSpec {
    pub fn polynomial(degree: u32, gamma: f64, coef0: f64) -> Result<Self, DomainError> {
        if degree == 0 {
            return Err(invalid("degree", "must be >= 1"));
        }
        Ok(KernelSpec::Polynomial {
            degree,
            gamma,
            coef0,
        })
    }

    pub fn radial(gamma: f64) -> Result<Self, DomainError> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", format!("radial gamma must be > 0, got {gamma}")));
        }
        Ok(KernelSpec::Radial { gamma })
    }

    pub fn validate(self) -> Result<Self, DomainError> {
        match self {
            KernelSpec::Polynomial { degree, gamma, coef0 } => {
                KernelSpec::polynomial(degree, gamma, coef0)
            }
            KernelSpec::Radial { gamma } => KernelSpec::radial(gamma),
            other => Ok(other),
        }
    }

    /// Kernel with the conventional defaults for `p` features:
    /// gamma = 1/p, degree 3, coef0 0.
    pub fn default_for(name: &str, p: usize) -> Result<Self, DomainError> {
        let gamma = 1.0 / p.max(1) as f64;
        match name.to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelSpec::Linear),
            "polynomial" | "poly" => KernelSpec::polynomial(3, gamma, 0.0),
            "radial" | "rbf" => KernelSpec::radial(gamma),
            "sigmoid" => Ok(KernelSpec::Sigmoid { gamma, coef0: 0.0 }),
            other => Err(invalid("kernel", format!("unknown kernel `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Polynomial { .. } => "polynomial",
            KernelSpec::Radial { .. } => "radial",
            KernelSpec::Sigmoid { .. } => "sigmoid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    pub kernel: KernelSpec,
    pub cost: f64,
    /// Tube half-width; `None` means 0.1 times the standard deviation of
    /// the training targets.
    pub epsilon: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Number of kernel rows kept in the solver's LRU cache.
    pub cache_rows: usize,
    /// Center and scale each feature before fitting.
    pub standardize: bool,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            kernel: KernelSpec::Linear,
            cost: 1.0,
            epsilon: None,
            tolerance: 1e-3,
            max_iterations: 10_000_000,
            cache_rows: 2048,
            standardize: false,
        }
    }
}

impl SvrConfig {
    pub fn validate(self) -> Result<Self, DomainError> {
        self.kernel.validate()?;
        if !(self.cost.is_finite() && self.cost > 0.0) {
            return Err(invalid("cost", format!("must be > 0, got {}", self.cost)));
        }
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(invalid("epsilon", format!("must be >= 0, got {eps}")));
            }
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "must be >= 1"));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means ceil(p / 3).
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            mtry: None,
            min_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn default_mtry(p: usize) -> usize {
        p.div_ceil(3).max(1)
    }

    /// Candidate-feature count for `p` features, validated against `1 <= m <= p`.
    pub fn resolve_mtry(&self, p: usize) -> Result<usize, DomainError> {
        let m = self.mtry.unwrap_or_else(|| Self::default_mtry(p));
        if m == 0 || m > p {
            return Err(invalid("mtry", format!("must lie in 1..={p}, got {m}")));
        }
        Ok(m)
    }

    pub fn validate(self, p: usize) -> Result<Self, DomainError> {
        if self.n_trees == 0 {
            return Err(invalid("n_trees", "must be >= 1"));
        }
        if self.min_leaf == 0 {
            return Err(invalid("min_leaf", "must be >= 1"));
        }
        self.resolve_mtry(p)?;
        Ok(self)
    }
}
