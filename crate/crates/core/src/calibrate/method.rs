use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Fixed fraction of depth used in place of the peak divergence layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerFraction {
    Quarter,
    Half,
    ThreeQuarters,
}

impl LayerFraction {
    pub fn value(self) -> f64 {
        match self {
            LayerFraction::Quarter => 0.25,
            LayerFraction::Half => 0.5,
            LayerFraction::ThreeQuarters => 0.75,
        }
    }

    /// `max(2, round(frac * L))`, a 1-based layer index.
    pub fn layer(self, layer_count: usize) -> usize {
        let l = (self.value() * layer_count as f64).round() as usize;
        l.clamp(2, layer_count.max(2))
    }

    fn label(self) -> &'static str {
        match self {
            LayerFraction::Quarter => "1/4",
            LayerFraction::Half => "1/2",
            LayerFraction::ThreeQuarters => "3/4",
        }
    }
}

/// Per-sample objective selector for [`crate::optimize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Dual loss on every sample.
    DualAlign,
    /// Confidence loss restricted to agreement samples.
    Daca,
    ConfOnly,
    ProcessOnly,
    /// Confidence loss on agreement samples, process loss elsewhere.
    SimpleStratify,
    /// Dual loss with the divergence layer pinned to a fraction of depth.
    FixedLayer(LayerFraction),
    /// Supervised cross-entropy against gold labels.
    TsOracle,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::DualAlign,
        Method::Daca,
        Method::ConfOnly,
        Method::ProcessOnly,
        Method::SimpleStratify,
        Method::FixedLayer(LayerFraction::Quarter),
        Method::FixedLayer(LayerFraction::Half),
        Method::FixedLayer(LayerFraction::ThreeQuarters),
        Method::TsOracle,
    ];

    pub fn is_supervised(self) -> bool {
        matches!(self, Method::TsOracle)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::DualAlign => f.write_str("dual-align"),
            Method::Daca => f.write_str("daca"),
            Method::ConfOnly => f.write_str("conf-only"),
            Method::ProcessOnly => f.write_str("process-only"),
            Method::SimpleStratify => f.write_str("simple-stratify"),
            Method::FixedLayer(frac) => write!(f, "fixed-layer:{}", frac.label()),
            Method::TsOracle => f.write_str("ts-oracle"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let m = match s {
            "dual-align" => Method::DualAlign,
            "daca" => Method::Daca,
            "conf-only" => Method::ConfOnly,
            "process-only" => Method::ProcessOnly,
            "simple-stratify" => Method::SimpleStratify,
            "ts-oracle" => Method::TsOracle,
            _ => {
                let frac = s
                    .strip_prefix("fixed-layer:")
                    .or_else(|| s.strip_prefix("fixed-layer-"))
                    .ok_or_else(|| Error::UnknownMethod(s.to_string()))?;
                let frac = match frac {
                    "1/4" | "0.25" => LayerFraction::Quarter,
                    "1/2" | "0.5" => LayerFraction::Half,
                    "3/4" | "0.75" => LayerFraction::ThreeQuarters,
                    _ => return Err(Error::UnknownMethod(s.to_string())),
                };
                Method::FixedLayer(frac)
            }
        };
        Ok(m)
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
