use std::collections::BTreeMap;
use std::fmt::Display;

use serde::{Deserialize, Serialize};

use crate::spectral::FourierState;

/// How a verdict's measured value is compared with its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
}

impl Comparison {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
            Comparison::Below => value < threshold,
            Comparison::Above => value > threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
            Comparison::Below => "<",
            Comparison::Above => ">",
        }
    }
}

impl std::fmt::Display for Comparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    /// Parameter key under which the threshold is echoed.
    pub threshold_key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: &str, x_label: &str, y_label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            points,
        }
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: BTreeMap<String, String>,
    pub series: Vec<Series>,
    pub scalars: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub provenance: Provenance,
    /// Snapshots written next to the report; not part of the JSON.
    #[serde(skip)]
    pub states: Vec<(String, FourierState)>,
}

impl ExperimentReport {
    pub fn new(name: &str, parameters: BTreeMap<String, String>, seed: Option<u64>) -> Self {
        Self {
            name: name.into(),
            parameters,
            series: Vec::new(),
            scalars: BTreeMap::new(),
            verdicts: Vec::new(),
            provenance: Provenance {
                seed,
                version: env!("CARGO_PKG_VERSION").into(),
            },
            states: Vec::new(),
        }
    }

    pub fn scalar(&mut self, name: &str, value: f64) {
        self.scalars.insert(name.into(), value);
    }

    pub fn push_series(&mut self, series: Series) {
        self.series.push(series);
    }

    /// Records a verdict; the threshold is read back from the echoed parameters.
    pub fn verdict(&mut self, name: &str, value: f64, comparison: Comparison, threshold_key: &str) -> bool {
        self.verdict_noted(name, value, comparison, threshold_key, None)
    }

    pub fn verdict_noted(
        &mut self,
        name: &str,
        value: f64,
        comparison: Comparison,
        threshold_key: &str,
        note: Option<&str>,
    ) -> bool {
        let threshold = self
            .parameters
            .get(threshold_key)
            .and_then(|v| v.parse::<f64>().ok())
            .unwrap_or_else(|| panic!("threshold `{threshold_key}` is not an echoed numeric parameter"));
        let passed = value.is_finite() && comparison.holds(value, threshold);
        self.verdicts.push(Verdict {
            name: name.into(),
            passed,
            value,
            comparison,
            threshold,
            threshold_key: threshold_key.into(),
            note: note.map(str::to_owned),
        });
        passed
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn find_verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn find_series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Ordered parameter echo; values use their shortest round-trip text.
#[derive(Default)]
pub struct Params(BTreeMap<String, String>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, key: &str, value: impl Display) -> Self {
        self.0.insert(key.into(), value.to_string());
        self
    }

    pub fn set_list<T: Display>(self, key: &str, values: &[T]) -> Self {
        let text = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        self.set(key, text)
    }

    pub fn finish(self) -> BTreeMap<String, String> {
        self.0
    }
}
