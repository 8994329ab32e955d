//! Listing acquisition: query construction, payload fetching (fixtures or a
//! live endpoint), payload cleaning, record parsing, deduplication,
//! summary statistics and JSONL persistence.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::domain::{DomainError, Listing, Operation, PropertyType, Status};
use crate::text::{fold_accent, is_spanish_accented, normalize_name};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid base url `{0}`")]
    InvalidBaseUrl(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("authorization rejected by the listing service (status {0})")]
    Auth(u16),
    #[error("rate limited by the listing service after {0} attempts")]
    RateLimited(u32),
    #[error("fixture file `{}` not found", .0.display())]
    FixtureMissing(PathBuf),
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("payload contains no listings")]
    EmptyElementList,
    #[error("missing required field `{0}`")]
    MissingRequiredField(&'static str),
    #[error("field `{0}` is not numeric")]
    NonNumericField(&'static str),
    #[error(transparent)]
    Invalid(#[from] DomainError),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema violation on line {line}: {message}")]
    SchemaViolation { line: usize, message: String },
}

pub const DEFAULT_CENTER: (f64, f64) = (40.4167, -3.70325);
pub const DEFAULT_RADIUS_KM: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyKind {
    Homes,
    Offices,
    Premises,
    Garages,
    Bedrooms,
}

impl PropertyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PropertyKind::Homes => "homes",
            PropertyKind::Offices => "offices",
            PropertyKind::Premises => "premises",
            PropertyKind::Garages => "garages",
            PropertyKind::Bedrooms => "bedrooms",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub operation: Operation,
    pub center_lat: f64,
    pub center_lon: f64,
    pub radius_km: f64,
    pub property_kind: PropertyKind,
    pub page: u32,
    pub page_size: u32,
}

impl SearchQuery {
    /// Madrid city centre, 60 km radius, first page of homes.
    pub fn new(operation: Operation) -> Self {
        SearchQuery {
            operation,
            center_lat: DEFAULT_CENTER.0,
            center_lon: DEFAULT_CENTER.1,
            radius_km: DEFAULT_RADIUS_KM,
            property_kind: PropertyKind::Homes,
            page: 1,
            page_size: 50,
        }
    }

    pub fn with_page(&self, page: u32) -> Self {
        SearchQuery {
            page,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |field, reason: String| DomainError::InvalidField { field, reason };
        if !(self.radius_km.is_finite() && self.radius_km > 0.0) {
            return Err(bad("radius_km", format!("must be > 0, got {}", self.radius_km)));
        }
        if !(-90.0..=90.0).contains(&self.center_lat) {
            return Err(bad("center_lat", format!("{} outside [-90, 90]", self.center_lat)));
        }
        if !(-180.0..=180.0).contains(&self.center_lon) {
            return Err(bad("center_lon", format!("{} outside [-180, 180]", self.center_lon)));
        }
        if self.page == 0 {
            return Err(bad("page", "must be >= 1".into()));
        }
        if self.page_size == 0 {
            return Err(bad("page_size", "must be >= 1".into()));
        }
        Ok(())
    }

    /// Fixture file name for this query: `{operation}_p{page}.json`.
    pub fn fixture_name(&self) -> String {
        format!("{}_p{}.json", self.operation.as_str(), self.page)
    }
}

/// Search URL with `operation, center, distance, numPage, maxItems,
/// propertyType` query parameters. The center is `lat,lon` with five
/// decimals and the distance is in meters.
pub fn build_query_url(q: &SearchQuery, base_url: &str) -> Result<String, IngestError> {
    let mut url =
        url::Url::parse(base_url).map_err(|_| IngestError::InvalidBaseUrl(base_url.into()))?;
    if url.cannot_be_a_base() || !matches!(url.scheme(), "http" | "https") {
        return Err(IngestError::InvalidBaseUrl(base_url.into()));
    }
    q.validate()?;
    let distance_m = ((q.radius_km * 1000.0).round() as u64).max(1);
    let query = format!(
        "operation={}&center={:.5},{:.5}&distance={}&numPage={}&maxItems={}&propertyType={}",
        q.operation.as_str(),
        q.center_lat,
        q.center_lon,
        distance_m,
        q.page,
        q.page_size,
        q.property_kind.as_str(),
    );
    url.set_query(Some(&query));
    Ok(url.into())
}

#[derive(Debug, Clone)]
pub struct RawPayload {
    pub body: Vec<u8>,
    pub fetched_at: SystemTime,
    pub query: SearchQuery,
}

/// Minimum spacing between live requests, shared across threads.
#[derive(Debug)]
pub struct RateLimiter {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        let min_interval = if requests_per_second > 0.0 {
            Duration::from_secs_f64(1.0 / requests_per_second)
        } else {
            Duration::ZERO
        };
        RateLimiter {
            min_interval,
            last: Mutex::new(None),
        }
    }

    pub fn acquire(&self) {
        let mut last = self.last.lock().expect("rate limiter poisoned");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

impl Default for RateLimiter {
    fn default() -> Self {
        RateLimiter::new(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct LiveSource {
    pub base_url: String,
    pub token: String,
    pub limiter: Arc<RateLimiter>,
    pub max_retries: u32,
    pub initial_backoff: Duration,
}

impl LiveSource {
    pub fn new(base_url: impl Into<String>, token: impl Into<String>) -> Self {
        LiveSource {
            base_url: base_url.into(),
            token: token.into(),
            limiter: Arc::new(RateLimiter::default()),
            max_retries: 5,
            initial_backoff: Duration::from_secs(1),
        }
    }

    /// Reads `YF_API_BASE` and `YF_API_TOKEN`; `None` unless both are set.
    pub fn from_env() -> Option<Self> {
        let base = std::env::var("YF_API_BASE").ok()?;
        let token = std::env::var("YF_API_TOKEN").ok()?;
        Some(LiveSource::new(base, token))
    }
}

#[derive(Debug, Clone)]
pub enum PayloadSource {
    Fixture(PathBuf),
    Live(LiveSource),
}

pub fn fetch_page(q: &SearchQuery, source: &PayloadSource) -> Result<RawPayload, IngestError> {
    let body = match source {
        PayloadSource::Fixture(dir) => {
            let path = dir.join(q.fixture_name());
            match fs::read(&path) {
                Ok(b) => b,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    return Err(IngestError::FixtureMissing(path))
                }
                Err(e) => return Err(e.into()),
            }
        }
        PayloadSource::Live(live) => fetch_live(q, live)?,
    };
    Ok(RawPayload {
        body,
        fetched_at: SystemTime::now(),
        query: q.clone(),
    })
}

fn fetch_live(q: &SearchQuery, live: &LiveSource) -> Result<Vec<u8>, IngestError> {
    let url = build_query_url(q, &live.base_url)?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    let mut backoff = live.initial_backoff;
    for attempt in 1..=live.max_retries.max(1) {
        live.limiter.acquire();
        let mut resp = agent
            .get(&url)
            .header("Authorization", &format!("Bearer {}", live.token))
            .call()
            .map_err(|e| IngestError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => {
                return resp
                    .body_mut()
                    .read_to_vec()
                    .map_err(|e| IngestError::Network(e.to_string()))
            }
            401 | 403 => return Err(IngestError::Auth(status)),
            429 => {
                if attempt < live.max_retries {
                    thread::sleep(backoff);
                    backoff *= 2;
                }
            }
            other => return Err(IngestError::Network(format!("unexpected status {other}"))),
        }
    }
    Err(IngestError::RateLimited(live.max_retries.max(1)))
}

fn decode_body(body: &[u8]) -> String {
    match std::str::from_utf8(body) {
        Ok(s) => s.to_string(),
        // Latin-1 maps each byte to the code point of the same value.
        Err(_) => body.iter().map(|&b| char::from(b)).collect(),
    }
}

fn hex4(chars: &[char]) -> Option<u32> {
    if chars.len() < 4 {
        return None;
    }
    let s: String = chars[..4].iter().collect();
    if s.chars().all(|c| c.is_ascii_hexdigit()) {
        u32::from_str_radix(&s, 16).ok()
    } else {
        None
    }
}

/// Replacement for an escaped code point, or `None` to keep the escape as-is
/// (quotes, backslashes, control characters and surrogates would otherwise
/// corrupt the JSON text).
fn unescape_code_point(cp: u32) -> Option<char> {
    let c = char::from_u32(cp)?;
    if is_spanish_accented(c) {
        return Some(fold_accent(c));
    }
    if c == '"' || c == '\\' || (c as u32) < 0x20 {
        return None;
    }
    Some(c)
}

/// Replaces `\uXXXX` escapes and bare `u00XX` sequences. Spanish accented
/// letters collapse to their base letter; other code points become literal.
fn replace_unicode_escapes(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\\' && i + 1 < chars.len() {
            if chars[i + 1] == 'u' {
                if let Some(cp) = hex4(&chars[i + 2..]) {
                    if let Some(rep) = unescape_code_point(cp) {
                        out.push(rep);
                    } else {
                        out.extend(&chars[i..i + 6]);
                    }
                    i += 6;
                    continue;
                }
            }
            // Any other escape pair passes through untouched.
            out.push(c);
            out.push(chars[i + 1]);
            i += 2;
            continue;
        }
        // Bare form: only the Latin-1 block (`u00XX`) so ordinary words
        // containing `u` plus hex-looking letters are left alone.
        if c == 'u' && chars.get(i + 1) == Some(&'0') && chars.get(i + 2) == Some(&'0') {
            if let Some(cp) = hex4(&chars[i + 1..]) {
                if let Some(rep) = unescape_code_point(cp) {
                    out.push(rep);
                    i += 5;
                    continue;
                }
            }
        }
        out.push(c);
        i += 1;
    }
    out
}

/// Drops tabs, newlines and carriage returns everywhere and blanks outside
/// string literals.
fn strip_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    for c in text.chars() {
        if matches!(c, '\t' | '\n' | '\r') {
            continue;
        }
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            c if c.is_whitespace() => {}
            c => out.push(c),
        }
    }
    out
}

fn check_balance(text: &str) -> Result<(), IngestError> {
    let mut stack = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for (pos, c) in text.char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' | '[' => stack.push(c),
            '}' | ']' => {
                let open = if c == '}' { '{' } else { '[' };
                if stack.pop() != Some(open) {
                    return Err(IngestError::MalformedPayload(format!(
                        "unexpected `{c}` at offset {pos}"
                    )));
                }
            }
            _ => {}
        }
    }
    if in_string {
        return Err(IngestError::MalformedPayload("unterminated string".into()));
    }
    if !stack.is_empty() {
        return Err(IngestError::MalformedPayload(format!(
            "{} unclosed bracket(s)",
            stack.len()
        )));
    }
    Ok(())
}

/// Byte offset just past the `[` that opens the listing array.
fn element_list_start(text: &str) -> Option<usize> {
    if text.starts_with('[') {
        return Some(1);
    }
    let key = "\"elementList\":[";
    text.find(key).map(|p| p + key.len())
}

/// Splits the listing array into one brace-balanced substring per object.
fn split_elements(text: &str, start: usize) -> Result<Vec<String>, IngestError> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut obj_start = None;
    let mut in_string = false;
    let mut escaped = false;
    for (off, c) in text[start..].char_indices() {
        let pos = start + off;
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' | '[' => {
                if depth == 0 && c == '{' {
                    obj_start = Some(pos);
                }
                depth += 1;
            }
            '}' | ']' => {
                if depth == 0 {
                    // Closing bracket of the element list itself.
                    return Ok(out);
                }
                depth -= 1;
                if depth == 0 && c == '}' {
                    let s = obj_start.take().expect("object start recorded");
                    out.push(text[s..=pos].to_string());
                }
            }
            _ => {}
        }
    }
    Err(IngestError::MalformedPayload("element list is not closed".into()))
}

/// Cleans a raw payload and returns one JSON object string per listing, in
/// payload order.
pub fn clean_payload(raw: &RawPayload) -> Result<Vec<String>, IngestError> {
    clean_text(&decode_body(&raw.body))
}

pub fn clean_text(text: &str) -> Result<Vec<String>, IngestError> {
    let text = replace_unicode_escapes(text);
    let text = strip_whitespace(&text);
    check_balance(&text)?;
    let start = element_list_start(&text).ok_or(IngestError::EmptyElementList)?;
    let records = split_elements(&text, start)?;
    if records.is_empty() {
        return Err(IngestError::EmptyElementList);
    }
    Ok(records)
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    obj.get(key).filter(|v| !v.is_null())
}

fn number(obj: &Map<String, Value>, key: &str, name: &'static str) -> Result<Option<f64>, IngestError> {
    match field(obj, key) {
        None => Ok(None),
        Some(Value::Number(n)) => n.as_f64().map(Some).ok_or(IngestError::NonNumericField(name)),
        Some(Value::String(s)) => s
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Some)
            .ok_or(IngestError::NonNumericField(name)),
        Some(_) => Err(IngestError::NonNumericField(name)),
    }
}

fn required(obj: &Map<String, Value>, key: &str, name: &'static str) -> Result<f64, IngestError> {
    number(obj, key, name)?.ok_or(IngestError::MissingRequiredField(name))
}

fn count(obj: &Map<String, Value>, key: &str, name: &'static str) -> Result<u32, IngestError> {
    match number(obj, key, name)? {
        None => Ok(0),
        Some(v) if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) => Ok(v as u32),
        Some(_) => Err(IngestError::NonNumericField(name)),
    }
}

fn boolean(v: Option<&Value>) -> Option<bool> {
    match v? {
        Value::Bool(b) => Some(*b),
        Value::Number(n) => n.as_f64().map(|x| x != 0.0),
        Value::String(s) => match s.to_ascii_lowercase().as_str() {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

/// Vendor floor codes: `bj` (ground) and `en` (mezzanine) map to 0,
/// `ss`/`st` (basements) to -1; anything else must be an integer.
fn floor(obj: &Map<String, Value>) -> Result<Option<i32>, IngestError> {
    let v = match field(obj, "floor") {
        None => return Ok(None),
        Some(v) => v,
    };
    let as_int = |x: f64| {
        if x.fract() == 0.0 && x.abs() < 1000.0 {
            Ok(Some(x as i32))
        } else {
            Err(IngestError::NonNumericField("floor"))
        }
    };
    match v {
        Value::Number(n) => as_int(n.as_f64().unwrap_or(f64::NAN)),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "bj" | "en" => Ok(Some(0)),
            "ss" | "st" => Ok(Some(-1)),
            "" => Ok(None),
            other => other
                .parse::<f64>()
                .map_err(|_| IngestError::NonNumericField("floor"))
                .and_then(as_int),
        },
        _ => Err(IngestError::NonNumericField("floor")),
    }
}

/// Maps one cleaned vendor object to a [`Listing`]. Unknown keys are
/// ignored; enum strings fall back to `Other`/`Unknown`.
pub fn parse_record(record: &str) -> Result<Listing, IngestError> {
    let value: Value = serde_json::from_str(record)
        .map_err(|e| IngestError::MalformedPayload(format!("record is not valid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| IngestError::MalformedPayload("record is not an object".into()))?;

    let id = match field(obj, "propertyCode") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err(IngestError::MissingRequiredField("id")),
    };
    let operation = match field(obj, "operation") {
        Some(Value::String(s)) => s.parse::<Operation>()?,
        _ => return Err(IngestError::MissingRequiredField("operation")),
    };
    let price = required(obj, "price", "price")?;
    let size = required(obj, "size", "size")?;
    let latitude = required(obj, "latitude", "latitude")?;
    let longitude = required(obj, "longitude", "longitude")?;

    let parking = match field(obj, "parkingSpace") {
        Some(Value::Object(p)) => boolean(p.get("hasParkingSpace")),
        Some(other) => boolean(Some(other)),
        None => None,
    };
    let neighborhood = ["neighborhood", "district"]
        .iter()
        .find_map(|k| field(obj, k).and_then(Value::as_str))
        .unwrap_or("")
        .to_string();

    let listing = Listing {
        id,
        operation,
        price,
        size,
        exterior: boolean(field(obj, "exterior")),
        floor: floor(obj)?,
        lift: boolean(field(obj, "hasLift")),
        parking,
        new_development: boolean(field(obj, "newDevelopment")),
        photos: count(obj, "numPhotos", "photos")?,
        property_type: field(obj, "propertyType")
            .and_then(Value::as_str)
            .map(PropertyType::from_vendor)
            .unwrap_or(PropertyType::Other),
        status: field(obj, "status")
            .and_then(Value::as_str)
            .map(Status::from_vendor)
            .unwrap_or(Status::Unknown),
        bathrooms: count(obj, "bathrooms", "bathrooms")?,
        rooms: count(obj, "rooms", "rooms")?,
        price_by_area: number(obj, "priceByArea", "priceByArea")?,
        latitude,
        longitude,
        neighborhood,
    };
    Ok(listing.validate()?)
}

/// Inverse of [`parse_record`]: renders a listing in the vendor's key layout.
pub fn to_vendor_record(l: &Listing) -> String {
    let mut obj = Map::new();
    obj.insert("propertyCode".into(), json!(l.id));
    obj.insert("operation".into(), json!(l.operation.as_str()));
    obj.insert("price".into(), json!(l.price));
    obj.insert("size".into(), json!(l.size));
    if let Some(v) = l.exterior {
        obj.insert("exterior".into(), json!(v));
    }
    if let Some(v) = l.floor {
        obj.insert("floor".into(), json!(v.to_string()));
    }
    if let Some(v) = l.lift {
        obj.insert("hasLift".into(), json!(v));
    }
    if let Some(v) = l.parking {
        obj.insert("parkingSpace".into(), json!({ "hasParkingSpace": v }));
    }
    if let Some(v) = l.new_development {
        obj.insert("newDevelopment".into(), json!(v));
    }
    obj.insert("numPhotos".into(), json!(l.photos));
    obj.insert("propertyType".into(), json!(l.property_type.as_str()));
    obj.insert("status".into(), json!(l.status.as_str()));
    obj.insert("bathrooms".into(), json!(l.bathrooms));
    obj.insert("rooms".into(), json!(l.rooms));
    if let Some(v) = l.price_by_area {
        obj.insert("priceByArea".into(), json!(v));
    }
    obj.insert("latitude".into(), json!(l.latitude));
    obj.insert("longitude".into(), json!(l.longitude));
    obj.insert("neighborhood".into(), json!(l.neighborhood));
    Value::Object(obj).to_string()
}

/// Keeps the last occurrence of each `(id, operation)`; the survivors keep
/// their relative order. Returns the number of dropped duplicates.
pub fn dedupe(listings: Vec<Listing>) -> (Vec<Listing>, usize) {
    let mut last: HashMap<(String, Operation), usize> = HashMap::new();
    for (i, l) in listings.iter().enumerate() {
        last.insert((l.id.clone(), l.operation), i);
    }
    let keep: HashSet<usize> = last.into_values().collect();
    let removed = listings.len() - keep.len();
    let kept = listings
        .into_iter()
        .enumerate()
        .filter_map(|(i, l)| keep.contains(&i).then_some(l))
        .collect();
    (kept, removed)
}

/// Fills missing `price_by_area` with the neighborhood's mean rent per
/// square meter (over rent listings). Returns how many were filled.
pub fn impute_price_by_area(listings: &mut [Listing]) -> usize {
    let mut sums: HashMap<String, (f64, usize)> = HashMap::new();
    for l in listings.iter().filter(|l| l.operation == Operation::Rent) {
        let e = sums.entry(normalize_name(&l.neighborhood)).or_insert((0.0, 0));
        e.0 += l.price / l.size;
        e.1 += 1;
    }
    let mut filled = 0;
    for l in listings.iter_mut().filter(|l| l.price_by_area.is_none()) {
        if let Some(&(sum, n)) = sums.get(&normalize_name(&l.neighborhood)) {
            l.price_by_area = Some(sum / n as f64);
            filled += 1;
        }
    }
    filled
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsOptions {
    pub rent_price_bin: f64,
    pub sale_price_bin: f64,
    pub size_bin: f64,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions {
            rent_price_bin: 250.0,
            sale_price_bin: 100_000.0,
            size_bin: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Left edge of the first bin.
    pub origin: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationStats {
    pub count: usize,
    pub price: Summary,
    pub size: Summary,
    pub price_histogram: Histogram,
    pub size_histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: usize,
    pub by_operation: BTreeMap<Operation, OperationStats>,
}

fn summarize(values: &[f64]) -> Summary {
    // Welford's running update.
    let (mut mean, mut m2) = (0.0, 0.0);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (k, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
        min = min.min(x);
        max = max.max(x);
    }
    Summary {
        mean,
        std: (m2 / values.len() as f64).max(0.0).sqrt(),
        min,
        max,
    }
}

fn histogram(values: &[f64], width: f64, min: f64, max: f64) -> Histogram {
    let width = if width > 0.0 && width.is_finite() { width } else { 1.0 };
    let origin = (min / width).floor() * width;
    let bins = ((max - origin) / width).floor() as usize + 1;
    let mut counts = vec![0; bins];
    for &x in values {
        let b = (((x - origin) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    Histogram {
        bin_width: width,
        origin,
        counts,
    }
}

pub fn dataset_stats(listings: &[Listing], opts: &StatsOptions) -> Result<DatasetStats, IngestError> {
    if listings.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    let mut by_operation = BTreeMap::new();
    for op in [Operation::Rent, Operation::Sale] {
        let (prices, sizes): (Vec<f64>, Vec<f64>) = listings
            .iter()
            .filter(|l| l.operation == op)
            .map(|l| (l.price, l.size))
            .unzip();
        if prices.is_empty() {
            continue;
        }
        let price = summarize(&prices);
        let size = summarize(&sizes);
        let price_bin = match op {
            Operation::Rent => opts.rent_price_bin,
            Operation::Sale => opts.sale_price_bin,
        };
        by_operation.insert(
            op,
            OperationStats {
                count: prices.len(),
                price_histogram: histogram(&prices, price_bin, price.min, price.max),
                size_histogram: histogram(&sizes, opts.size_bin, size.min, size.max),
                price,
                size,
            },
        );
    }
    Ok(DatasetStats {
        total: listings.len(),
        by_operation,
    })
}

/// Writes one canonical JSON record per line.
pub fn store_dataset(path: &Path, listings: &[Listing]) -> Result<(), IngestError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_jsonl(&mut w, listings)?;
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<W: Write>(w: &mut W, listings: &[Listing]) -> Result<(), IngestError> {
    for l in listings {
        let line = serde_json::to_string(l).map_err(std::io::Error::other)?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Vec<Listing>, IngestError> {
    read_jsonl(BufReader::new(fs::File::open(path)?))
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<Listing>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let violation = |message: String| IngestError::SchemaViolation {
            line: i + 1,
            message,
        };
        let listing: Listing = serde_json::from_str(&line).map_err(|e| violation(e.to_string()))?;
        out.push(listing.validate().map_err(|e| violation(e.to_string()))?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub listings: Vec<Listing>,
    pub pages_read: usize,
    pub records_parsed: usize,
    pub duplicates_removed: usize,
}

/// Fetches pages `1..=max_pages` for each query and parses every record.
/// In fixture mode a missing page after the first ends that operation's
/// sequence.
pub fn ingest(
    queries: &[SearchQuery],
    source: &PayloadSource,
    max_pages: u32,
) -> Result<IngestOutcome, IngestError> {
    let mut listings = Vec::new();
    let mut pages_read = 0;
    for q in queries {
        for page in 1..=max_pages {
            let raw = match fetch_page(&q.with_page(page), source) {
                Ok(raw) => raw,
                Err(IngestError::FixtureMissing(_)) if page > 1 => break,
                Err(e) => return Err(e),
            };
            pages_read += 1;
            for record in clean_payload(&raw)? {
                listings.push(parse_record(&record)?);
            }
        }
    }
    let records_parsed = listings.len();
    let (listings, duplicates_removed) = dedupe(listings);
    Ok(IngestOutcome {
        listings,
        pages_read,
        records_parsed,
        duplicates_removed,
    })
}

/// Seconds since the Unix epoch, for logging fetch times.
pub fn unix_seconds(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}
