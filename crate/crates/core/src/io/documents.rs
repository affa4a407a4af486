//! Versioned JSON documents for trained models and segmentation datasets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FORMAT_VERSION;
use crate::error::{invalid, Result};
use crate::model::StrongModel;
use crate::tasks::crf::SegInstance;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    #[serde(flatten)]
    model: StrongModel,
}

#[derive(Serialize, Deserialize)]
struct SegDocument {
    format_version: u32,
    instances: Vec<SegInstance>,
}

fn check_version(text: &str) -> Result<()> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(FORMAT_VERSION) => Ok(()),
        Some(v) => invalid(format!("unsupported format_version {v}")),
        None => invalid("missing format_version"),
    }
}

pub fn model_to_string(model: &StrongModel) -> Result<String> {
    model.validate()?;
    let doc = ModelDocument {
        format_version: FORMAT_VERSION,
        model: model.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub fn model_from_str(text: &str) -> Result<StrongModel> {
    check_version(text)?;
    let doc: ModelDocument = serde_json::from_str(text)?;
    doc.model.validate()?;
    Ok(doc.model)
}

pub fn save_model(model: &StrongModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_string(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<StrongModel> {
    model_from_str(&std::fs::read_to_string(path)?)
}

pub fn seg_to_string(instances: &[SegInstance]) -> Result<String> {
    for inst in instances {
        inst.validate()?;
    }
    let doc = SegDocument {
        format_version: FORMAT_VERSION,
        instances: instances.to_vec(),
    };
    Ok(serde_json::to_string(&doc)? + "\n")
}

pub fn seg_from_str(text: &str) -> Result<Vec<SegInstance>> {
    check_version(text)?;
    let doc: SegDocument = serde_json::from_str(text)?;
    for inst in &doc.instances {
        inst.validate()?;
    }
    Ok(doc.instances)
}

pub fn save_seg(instances: &[SegInstance], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, seg_to_string(instances)?)?;
    Ok(())
}

pub fn load_seg(path: impl AsRef<Path>) -> Result<Vec<SegInstance>> {
    seg_from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{TaskDescriptor, TrainParams, WeakColumn};
    use crate::tasks::crf::synth_instance;
    use crate::tasks::multiclass::Taxonomy;
    use crate::weak::{OutputRange, Stump, WeakLearner};

    fn stump(threshold: f64) -> WeakLearner {
        WeakLearner::Stump(Stump {
            feature: 1,
            threshold,
            polarity: -1,
            output_range: OutputRange::PmOne,
        })
    }

    #[test]
    fn model_round_trip_is_a_fixpoint() {
        let tax = Taxonomy::parse("1 ROOT 0\n2 1 1\n3 1 1\n").unwrap();
        let mut model = StrongModel::empty(TaskDescriptor::Tree { taxonomy: tax }, TrainParams::default());
        model.columns.push(WeakColumn::slot(stump(0.1 + 0.2), 2));
        model.columns.push(WeakColumn::slot(stump(f64::NEG_INFINITY), 1));
        model.weights = vec![0.123456789012345, 1e-300];
        let text = model_to_string(&model).unwrap();
        let back = model_from_str(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(model_to_string(&back).unwrap(), text);
    }

    #[test]
    fn unknown_version_rejected() {
        let model = StrongModel::empty(TaskDescriptor::Binary, TrainParams::default());
        let text = model_to_string(&model)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(model_from_str(&text).is_err());
        assert!(model_from_str("{}").is_err());
    }

    #[test]
    fn invalid_model_rejected() {
        let mut model = StrongModel::empty(TaskDescriptor::Binary, TrainParams::default());
        model.columns.push(WeakColumn::plain(stump(0.0)));
        model.weights = vec![-1.0];
        assert!(model_to_string(&model).is_err());
    }

    #[test]
    fn seg_round_trip() {
        let insts = vec![
            synth_instance(3, 2, 0.5, 1).unwrap(),
            synth_instance(2, 2, 0.5, 2).unwrap(),
        ];
        let text = seg_to_string(&insts).unwrap();
        let back = seg_from_str(&text).unwrap();
        assert_eq!(back, insts);
        assert_eq!(seg_to_string(&back).unwrap(), text);
    }
}
