//! JSON formats for instances and estimation results.

use crate::error::{Error, Result};
use crate::estimator::EstimationResult;
use crate::geometry::{BoxDensity, Hyperrectangle, Instance, SampleSet, WeightedBox};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub point: Vec<f64>,
    /// Defaults to `1/n` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// On-disk instance description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub dimension: usize,
    pub boxes: Vec<BoxSpec>,
    pub samples: Vec<SampleSpec>,
    pub metadata: Metadata,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("instance JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    /// Validates and builds the instance.
    pub fn to_instance(&self) -> Result<Instance> {
        let mut boxes = Vec::with_capacity(self.boxes.len());
        for b in &self.boxes {
            boxes.push(WeightedBox {
                region: Hyperrectangle::new(b.lo.clone(), b.hi.clone())?,
                weight: b.weight,
            });
        }
        let density = BoxDensity::new(self.dimension, boxes)?;
        let n = self.samples.len().max(1) as f64;
        let points = self.samples.iter().map(|s| s.point.clone()).collect();
        let demands = self
            .samples
            .iter()
            .map(|s| s.demand.unwrap_or(1.0 / n))
            .collect();
        Instance::new(density, SampleSet::new(points, demands)?)
    }

    /// Writes demands only when they are not uniform.
    pub fn from_instance(instance: &Instance, metadata: Metadata) -> Self {
        let uniform = instance.samples.is_uniform();
        Self {
            dimension: instance.dim(),
            boxes: instance
                .density
                .boxes()
                .iter()
                .map(|b| BoxSpec {
                    lo: b.region.lo().to_vec(),
                    hi: b.region.hi().to_vec(),
                    weight: b.weight,
                })
                .collect(),
            samples: instance
                .samples
                .points()
                .iter()
                .zip(instance.samples.demands())
                .map(|(p, &d)| SampleSpec {
                    point: p.clone(),
                    demand: (!uniform).then_some(d),
                })
                .collect(),
            metadata,
        }
    }
}

/// Serialized estimation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultJson {
    pub sigma_hat: f64,
    pub mu_hat: Vec<f64>,
    pub rho: f64,
    pub dual_energy: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub guarantee_holds: bool,
    pub iterations: u64,
}

impl From<&EstimationResult> for ResultJson {
    fn from(r: &EstimationResult) -> Self {
        Self {
            sigma_hat: r.sigma_hat,
            mu_hat: r.mu_hat.clone(),
            rho: r.rho,
            dual_energy: r.dual_energy,
            epsilon: r.epsilon,
            eta: r.eta,
            guarantee_holds: r.guarantee_holds,
            iterations: r.iterations(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: &str = r#"{
  "dimension": 1,
  "boxes": [{"lo": [-1.0], "hi": [1.0], "weight": 0.5}],
  "samples": [{"point": [-1.0]}, {"point": [1.0]}],
  "metadata": {"name": "a"}
}"#;

    #[test]
    fn default_demands_are_uniform() {
        let inst = InstanceFile::from_json(A).unwrap().to_instance().unwrap();
        assert_eq!(inst.samples.demands(), &[0.5, 0.5]);
    }

    #[test]
    fn round_trip_is_stable() {
        let f = InstanceFile::from_json(A).unwrap();
        let text = f.to_json();
        assert_eq!(InstanceFile::from_json(&text).unwrap(), f);
        assert_eq!(InstanceFile::from_json(&text).unwrap().to_json(), text);
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = A.replace("\"weight\"", "\"mass\"");
        assert!(InstanceFile::from_json(&bad).is_err());
    }

    #[test]
    fn overlapping_boxes_named() {
        let bad = r#"{"dimension":1,"boxes":[{"lo":[0],"hi":[1],"weight":0.5},{"lo":[0.5],"hi":[1.5],"weight":0.5}],
            "samples":[{"point":[0]}],"metadata":{"name":"x"}}"#;
        let err = InstanceFile::from_json(bad).unwrap().to_instance().unwrap_err();
        assert_eq!(err, Error::OverlappingBoxes { first: 0, second: 1 });
    }
}
