use chronicity_wasm::{rule_sweep, slide, survival};
use serde_json::Value;

#[test]
fn slide_pixels_and_scores() {
    let (pixels, summary) = slide(600, 500, 10, 3, 1, 0.3, 0.4, 2).unwrap();
    assert_eq!(pixels.len(), 600 * 500 * 4);
    let v: Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["features"]["n_glom_total"], 10);
    assert_eq!(v["conventional"]["proportions"]["p_gs"], 0.3);
    assert_eq!(v["conventional"]["sub_scores"]["gs"], 2);
    assert!(slide(50, 50, 40, 0, 0, 0.0, 0.0, 1).is_err());
}

#[test]
fn conventional_sweep_steps() {
    let v: Value = serde_json::from_str(&rule_sweep("conventional", 100).unwrap()).unwrap();
    let gs: Vec<u64> = v["gs"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert_eq!(gs.len(), 101);
    assert_eq!((gs[0], gs[10], gs[25], gs[50], gs[51], gs[100]), (0, 1, 2, 2, 3, 3));
    assert!(gs.windows(2).all(|w| w[0] <= w[1]));
    assert!(rule_sweep("{not json", 10).is_err());
}

#[test]
fn custom_rule_json() {
    let table = r#"[{"upto":0.0,"score":0},{"upto":0.5,"score":1},{"upto":1.0,"score":2}]"#;
    let rule = format!(r#"{{"name":"two","breakpoints":{{"gs":{table},"fc":{table},"if":{table},"ta":{table}}}}}"#);
    let v: Value = serde_json::from_str(&rule_sweep(&rule, 4).unwrap()).unwrap();
    assert_eq!(v["rule"], "two");
    assert_eq!(v["ta"], serde_json::json!([0, 1, 1, 2, 2]));
}

#[test]
fn survival_groups_separate() {
    let v: Value = serde_json::from_str(&survival(600, 3.0, 0.05, 4).unwrap()).unwrap();
    assert_eq!(v["curves"].as_array().unwrap().len(), 2);
    assert!(v["logrank_p"].as_f64().unwrap() < 1e-6);
    let hr = v["hazard_ratio"].as_f64().unwrap();
    assert!(hr > 2.0 && hr < 4.5, "{hr}");
    assert!(survival(100, 0.0, 0.1, 1).is_err());
}
