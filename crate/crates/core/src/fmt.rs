//! Fixed-precision float output shared by the JSON and CSV writers.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

/// Formats `x` with 17 significant digits, enough to round-trip any f64.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// f64 that serializes through serde_json with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig17(pub f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::Error;
        if !self.0.is_finite() {
            return Err(S::Error::custom(format!("cannot serialize non-finite value {}", self.0)));
        }
        let raw = RawValue::from_string(sig17(self.0)).map_err(S::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Sig17 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        f64::deserialize(deserializer).map(Sig17)
    }
}

pub(crate) fn wrap(v: impl IntoIterator<Item = f64>) -> Vec<Sig17> {
    v.into_iter().map(Sig17).collect()
}

pub(crate) fn unwrap(v: &[Sig17]) -> Vec<f64> {
    v.iter().map(|s| s.0).collect()
}
