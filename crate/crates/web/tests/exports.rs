use serde_json::Value;
use wayward_web::{recover_toy_reward, reduce_random, simulate_toy};

fn parse(text: String) -> Value {
    serde_json::from_str(&text).unwrap()
}

#[test]
fn simulate_toy_returns_one_frame_per_tick() {
    let out = parse(simulate_toy(0.5, 20, 3));
    assert_eq!(out["network"]["nodes"].as_array().unwrap().len(), 8);
    let frames = out["frames"].as_array().unwrap();
    assert!(!frames.is_empty() && frames.len() <= 21);
    assert_eq!(frames[0].as_array().unwrap().len(), 6);
    assert_eq!(parse(simulate_toy(0.5, 20, 3)), out);
}

#[test]
fn full_fixation_never_deviates() {
    let total = |fixation: f64| -> u64 {
        (0..20).map(|seed| parse(simulate_toy(fixation, 200, seed))["deviations"].as_u64().unwrap()).sum()
    };
    assert_eq!(total(1.0), 0);
    assert!(total(0.0) > 0);
}

#[test]
fn simulate_toy_rejects_bad_fixation() {
    assert!(parse(simulate_toy(1.5, 10, 0))["error"].as_str().unwrap().contains("fixation"));
}

#[test]
fn recover_toy_reward_covers_every_node() {
    let out = parse(recover_toy_reward(0.1, 0.5, 4));
    assert_eq!(out["rewards"].as_array().unwrap().len(), 8);
    let agreement = out["agreement"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&agreement));
    assert!(out["rewards"].as_array().unwrap().iter().all(|r| r["reward"].as_f64().unwrap().abs() <= 1.0 + 1e-9));
}

#[test]
fn reduce_random_shrinks_subdivided_networks() {
    let out = parse(reduce_random(30, 5, 9));
    let original = out["original"]["nodes"].as_array().unwrap().len();
    let reduced = out["reduced"]["nodes"].as_array().unwrap().len();
    assert_eq!(original - reduced, out["removed"].as_u64().unwrap() as usize);
    assert!(reduced < original);
    assert!(parse(reduce_random(1, 0, 0))["error"].is_string());
}
