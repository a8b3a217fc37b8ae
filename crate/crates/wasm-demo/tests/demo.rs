use scalar_attitude_demo::{convergence, excitation, sweep};
use serde_json::Value;

fn call(f: fn(&str) -> Result<String, String>, params: &str) -> Value {
    serde_json::from_str(&f(params).unwrap()).unwrap()
}

#[test]
fn convergence_with_strong_gain_settles() {
    let out = call(convergence, r#"{"config":"six","q":5.0,"duration":30}"#);
    assert!(
        out["final_theta_deg"].as_f64().unwrap() < 0.5,
        "{}",
        out["final_theta_deg"]
    );
    let t = out["t"].as_array().unwrap();
    assert!(t.len() <= 600);
    assert_eq!(t.len(), out["theta_deg"].as_array().unwrap().len());
}

#[test]
fn convergence_rejects_bad_parameters() {
    assert!(convergence(r#"{"duration":0}"#).is_err());
    assert!(convergence(r#"{"config":"seven"}"#).is_err());
    assert!(convergence("not json").is_err());
}

#[test]
fn sweep_separates_static_from_tumbling() {
    let verdicts = |traj: &str| {
        let out = call(
            sweep,
            &format!(r#"{{"trajectory":"{traj}","config":"two","stride":2}}"#),
        );
        out["conditions"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["condition"] == "attitude_gramian")
            .unwrap()["passed"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_bool().unwrap())
            .collect::<Vec<_>>()
    };
    assert!(verdicts("static").iter().all(|p| !p));
    assert!(verdicts("pe_tumble").iter().all(|p| *p));
}

#[test]
fn excitation_classes() {
    let class = |wobble: f64| {
        call(
            excitation,
            &format!(r#"{{"wobble":{wobble},"frequency_hz":1.0}}"#),
        )["class"]
            .as_str()
            .unwrap()
            .to_string()
    };
    assert_eq!(class(0.0), "none");
    assert_eq!(class(0.8), "strong");
}
