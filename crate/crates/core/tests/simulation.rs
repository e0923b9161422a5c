use std::f64::consts::PI;

use serde_json::json;

use torsilimit::model::ShaftAssembly;
use torsilimit::shaft::{
    max_step, simulate_linear, simulate_nonlinear, LinearShaftModel, OperatingPoint, SimOptions,
};

/// Two heavily damped masses so transients die within a couple of seconds.
fn damped_pair() -> LinearShaftModel {
    let shaft = ShaftAssembly::from_json(
        &json!({
            "name": "pair",
            "masses": [
                {"label": "T", "H": 2.0, "D_self": 4.0, "has_Tm": true, "is_gen": false},
                {"label": "GEN", "H": 1.0, "D_self": 2.0, "has_Tm": false, "is_gen": true}
            ],
            "sections": [{"K": 30.0, "R": 0.2, "D_mutual": 0.5}],
            "pole_count": 2, "mva": 500.0, "f_sync_hz": 60.0
        })
        .to_string(),
    )
    .unwrap();
    let op = OperatingPoint::from_power(1.0, 1.0, 0.5, 0.8).unwrap();
    LinearShaftModel::new(&shaft, op).unwrap()
}

fn opts(model: &LinearShaftModel, t_end: f64) -> SimOptions {
    SimOptions::new(max_step(model), t_end)
}

#[test]
fn steady_sine_matches_frequency_response() {
    let model = damped_pair();
    for f_hz in [3.0, 12.0, 25.0] {
        let w = 2.0 * PI * f_hz;
        let amp = 0.01;
        let traj = simulate_linear(&model, &|t| amp * (w * t).sin(), &opts(&model, 12.0)).unwrap();
        let tail = traj.time.iter().position(|t| *t >= 8.0).unwrap();
        let s = &traj.stress[0][tail..];
        let (hi, lo) = s.iter().fold((f64::MIN, f64::MAX), |(h, l), v| (h.max(*v), l.min(*v)));
        let got = (hi - lo) / 2.0;
        let want = amp * model.response_at(w).stress_gain[0];
        assert!((got - want).abs() <= 0.01 * want, "{f_hz} Hz: {got} vs {want}");
    }
}

#[test]
fn linear_response_superposes() {
    let model = damped_pair();
    let o = opts(&model, 3.0);
    let u1 = |t: f64| 0.02 * (2.0 * PI * 7.0 * t).sin();
    let u2 = |t: f64| if t > 0.5 { 0.05 } else { 0.0 };
    let a = simulate_linear(&model, &u1, &o).unwrap();
    let b = simulate_linear(&model, &u2, &o).unwrap();
    let ab = simulate_linear(&model, &|t| u1(t) + u2(t), &o).unwrap();
    let mean = model.mean_stress[0];
    for k in 0..ab.len() {
        let want = a.stress[0][k] + b.stress[0][k] - mean;
        assert!((ab.stress[0][k] - want).abs() < 1e-9 * (1.0 + mean.abs()));
    }
}

#[test]
fn nonlinear_tracks_linear_for_small_forcing() {
    let model = damped_pair();
    let o = opts(&model, 4.0);
    let u = |t: f64| 1e-3 * (2.0 * PI * 10.0 * t).sin();
    let lin = simulate_linear(&model, &u, &o).unwrap();
    let non = simulate_nonlinear(&model, &u, &o).unwrap();
    let mean = model.mean_stress[0];
    let peak = lin.stress[0].iter().map(|s| (s - mean).abs()).fold(0.0, f64::max);
    let err = lin.stress[0]
        .iter()
        .zip(&non.stress[0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(peak > 0.0);
    assert!(err <= 0.02 * peak, "err {err} vs peak {peak}");
}

#[test]
fn quiescent_run_stays_at_the_mean() {
    let model = damped_pair();
    let traj = simulate_nonlinear(&model, &|_| 0.0, &opts(&model, 1.0)).unwrap();
    let mean = model.mean_stress[0];
    assert!(traj.stress[0].iter().all(|s| (s - mean).abs() < 1e-9 * mean.abs().max(1.0)));
    assert!(traj.freq_dev_hz.iter().all(|f| f.abs() < 1e-12));
}
