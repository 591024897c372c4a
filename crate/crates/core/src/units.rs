//! Serde adapters so configuration files carry human units.

/// A [`SimDuration`](crate::engine::SimDuration) written as fractional microseconds.
pub mod us {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::engine::SimDuration;

    pub fn serialize<S: Serializer>(d: &SimDuration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_us())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SimDuration, D::Error> {
        let v = f64::deserialize(d)?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(serde::de::Error::custom(format!(
                "duration must be a non-negative number of microseconds, got {v}"
            )));
        }
        Ok(SimDuration::from_us_f64(v))
    }
}
