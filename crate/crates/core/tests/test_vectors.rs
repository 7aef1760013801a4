//! Cross-checks against the numpy fixtures in `test_vectors/`.

use std::path::PathBuf;

use serde_json::Value;

use penh::features::{FeatureVector, FEATURE_DIM};
use penh::model::{infer, infer_batch, ModelState, ModelWeights};
use penh::records::{read_records, records_to_bytes};
use penh::spectral::NB_BANDS;
use penh::targets::{gain_loss, gain_loss_grad, strength_loss, strength_loss_grad, LossConfig};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../test_vectors")
}

fn json(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir().join(name)).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn losses_match_fixture() {
    let v = json("losses.json");
    let cfg = LossConfig {
        gamma: v["gamma"].as_f64().unwrap(),
        c4: v["c4"].as_f64().unwrap(),
    };
    let cases = v["cases"].as_array().unwrap();
    assert!(cases.len() >= 20);
    for c in cases {
        let (g, gh, r, rh) = (floats(&c["g"]), floats(&c["g_hat"]), floats(&c["r"]), floats(&c["r_hat"]));
        assert!(close(gain_loss(&g, &gh, &cfg), c["gain_loss"].as_f64().unwrap(), 1e-6));
        assert!(close(strength_loss(&r, &rh, &cfg), c["strength_loss"].as_f64().unwrap(), 1e-6));
        for (a, b) in gain_loss_grad(&g, &gh, &cfg).iter().zip(floats(&c["gain_grad"])) {
            assert!(close(*a, b, 1e-6), "{a} vs {b}");
        }
        for (a, b) in strength_loss_grad(&r, &rh, &cfg).iter().zip(floats(&c["strength_grad"])) {
            assert!(close(*a, b, 1e-6), "{a} vs {b}");
        }
    }
}

#[test]
fn tiny_model_matches_reference_inference() {
    let bytes = std::fs::read(dir().join("tiny_model.pnwt")).unwrap();
    let m = ModelWeights::from_bytes(&bytes).unwrap();
    assert_eq!(m.to_bytes(), bytes);
    let v = json("tiny_model_io.json");
    assert_eq!(m.total_weights() as u64, v["weights"].as_u64().unwrap());
    let feats: Vec<FeatureVector> = v["features"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            let mut fv = FeatureVector { values: [0.0; FEATURE_DIM] };
            fv.values.copy_from_slice(&floats(f));
            fv
        })
        .collect();
    let expected = v["outputs"].as_array().unwrap();
    let mut st = ModelState::new(&m);
    let mut worst: f64 = 0.0;
    for (f, e) in feats.iter().zip(expected) {
        let o = infer(&m, &mut st, f).unwrap();
        for (a, b) in o.gains.iter().zip(floats(&e["gains"])) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in o.strengths.iter().zip(floats(&e["strengths"])) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 1e-5, "max deviation {worst}");
    let mut st2 = ModelState::new(&m);
    let batched = infer_batch(&m, &mut st2, &feats).unwrap();
    let mut st3 = ModelState::new(&m);
    for (f, b) in feats.iter().zip(&batched) {
        assert_eq!(&infer(&m, &mut st3, f).unwrap(), b);
    }
}

#[test]
fn record_fixture_layout() {
    let bytes = std::fs::read(dir().join("records.pnft")).unwrap();
    let recs = read_records(&bytes).unwrap();
    let rows = json("records.json");
    let rows = rows["rows"].as_array().unwrap();
    assert_eq!(recs.len(), rows.len());
    for (r, row) in recs.iter().zip(rows) {
        let row = floats(row);
        assert!(r.features.iter().zip(&row[..FEATURE_DIM]).all(|(a, b)| f64::from(*a) == *b));
        assert!(r.gains.iter().zip(&row[FEATURE_DIM..]).all(|(a, b)| f64::from(*a) == *b));
        assert!(r.strengths.iter().zip(&row[FEATURE_DIM + NB_BANDS..]).all(|(a, b)| f64::from(*a) == *b));
        assert_eq!(r.attenuated, row[FEATURE_DIM + 2 * NB_BANDS] == 1.0);
    }
    assert_eq!(records_to_bytes(&recs), bytes);
}
