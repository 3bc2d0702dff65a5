use nalgebra::Vector3;
use polycurve::scenario::{generate_scenario, sample_times, NoiseSpec};
use polycurve::simulate::simulate;
use polycurve::spec::{articulation_tension, ExperimentSpec, ScenarioKind};
use polycurve_core::actuation::ActuationUnitSim;
use polycurve_core::plant::ElasticaPlant;
use polycurve_core::{TensionVector, Wrench};

fn quick(kind: ScenarioKind, theta: f64, delta: f64) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(kind, theta, delta);
    spec.duration_s = 0.5;
    spec.rate_hz = 20.0;
    spec
}

#[test]
fn zero_noise_channels_equal_truth() {
    let mut spec = quick(ScenarioKind::FreeArticulation, 45.0, 135.0);
    spec.noise = NoiseSpec::zero();
    spec.tip_force_n = [0.02, 0.0, 0.01];
    let sim = simulate(&spec).unwrap();
    for (s, t) in sim.log.samples.iter().zip(&sim.log.truth) {
        assert_eq!(s.tip, t.tip);
        assert_eq!(s.tension, t.tension);
        assert_eq!(s.wrench, t.wrench);
    }
}

#[test]
fn timestamps_are_monotone_and_evenly_spaced() {
    let sim = simulate(&quick(ScenarioKind::Chirp, 30.0, 0.0)).unwrap_err();
    // 20 Hz cannot carry a 10 Hz sweep.
    assert!(sim.to_string().contains("rate_hz"), "{sim}");
    let mut spec = quick(ScenarioKind::Chirp, 30.0, 0.0);
    spec.rate_hz = 200.0;
    let sim = simulate(&spec).unwrap();
    let t: Vec<f64> = sim.log.samples.iter().map(|s| s.t).collect();
    assert_eq!(t.len(), 101);
    for w in t.windows(2) {
        assert!(((w[1] - w[0]) - 1.0 / 200.0).abs() < 1e-12);
    }
    assert_eq!(sample_times(1.0, 4.0).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn pulling_one_cable_and_releasing_its_opposite_is_monotone() {
    // delta = 0 puts cable 1 inside the bend; cable 3 sits opposite.
    let mut spec = quick(ScenarioKind::FreeArticulation, 40.0, 0.0);
    spec.noise = NoiseSpec::zero();
    let plant = spec.plant().unwrap();
    let params = spec.params();
    let log = generate_scenario(
        &plant,
        &|t| {
            let a = (t / 0.5).min(1.0);
            let mut tau = articulation_tension(&params, 0.7 * a, 0.0, 0.5).as_slice().to_vec();
            tau[2] = 0.5 * (1.0 - a);
            TensionVector::new(tau).unwrap()
        },
        &|_| Wrench::zero(),
        &spec.noise,
        0.5,
        20.0,
        &ActuationUnitSim::default(),
        0,
    )
    .unwrap();
    for w in log.truth.windows(2) {
        assert!(w[1].tension[0] >= w[0].tension[0]);
        assert!(w[1].tension[2] <= w[0].tension[2]);
        assert!(w[1].tip.position.x >= w[0].tip.position.x - 1e-12);
    }
    assert!(log.truth.last().unwrap().tip.position.x > 10.0);
}

#[test]
fn staircase_has_distinct_plateaus() {
    let mut spec = quick(ScenarioKind::TipContact, 48.0, 135.0);
    spec.noise = NoiseSpec::zero();
    spec.rate_hz = 10.0;
    let sim = simulate(&spec).unwrap();
    let plateaus = &sim.sidecar.plateaus;
    assert_eq!(plateaus.len(), 5);
    let axis = sim.sidecar.contact.unwrap().normal;
    let mut levels: Vec<f64> = Vec::new();
    for p in plateaus {
        let inside: Vec<f64> = sim
            .log
            .truth
            .iter()
            .filter(|s| s.t >= p.t_start - 1e-12 && s.t < p.t_end - 1e-12)
            .map(|s| s.wrench.force.dot(&axis))
            .collect();
        assert!(!inside.is_empty());
        assert!(inside.iter().all(|f| (f - inside[0]).abs() < 1e-12));
        levels.push(inside[0]);
    }
    for w in levels.windows(2) {
        assert!(w[1] > w[0] * 1.2, "{levels:?}");
    }
    assert!(levels[0] > 0.0);
}

#[test]
fn recorded_tensions_balance_the_plant() {
    let mut spec = quick(ScenarioKind::TipContact, 48.0, 135.0);
    spec.rate_hz = 10.0;
    let sim = simulate(&spec).unwrap();
    let plant = spec.plant().unwrap().with_contact(sim.sidecar.contact.unwrap());
    for t in &sim.log.truth {
        let tau = TensionVector::new(t.tension.clone()).unwrap();
        let g = plant.gradient(&t.joint_angles, &tau, &t.applied).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-8, "t = {}: {norm:e}", t.t);
    }
}

#[test]
fn noise_has_the_requested_spread() {
    let plant = ElasticaPlant::default();
    let noise = NoiseSpec::default();
    let log = generate_scenario(
        &plant,
        &|_| TensionVector::new(vec![1.0, 0.5, 0.5, 0.5]).unwrap(),
        &|_| Wrench::zero(),
        &noise,
        2.0,
        1000.0,
        &ActuationUnitSim::default(),
        9,
    )
    .unwrap();
    let n = log.samples.len() as f64;
    let spread = |f: &dyn Fn(usize) -> f64| {
        let mean = (0..log.samples.len()).map(f).sum::<f64>() / n;
        ((0..log.samples.len()).map(|k| (f(k) - mean).powi(2)).sum::<f64>() / n).sqrt()
    };
    let px = spread(&|k| log.samples[k].tip.position.x - log.truth[k].tip.position.x);
    let t1 = spread(&|k| log.samples[k].tension[0] - log.truth[k].tension[0]);
    assert!((px / noise.position_mm - 1.0).abs() < 0.1, "{px}");
    assert!((t1 / noise.tension_n - 1.0).abs() < 0.1, "{t1}");
    assert_eq!(log.saturated_readings, 0);
}

#[test]
fn oversized_tension_saturates_the_cell() {
    let plant = ElasticaPlant::default();
    let log = generate_scenario(
        &plant,
        &|_| TensionVector::new(vec![3.0, 0.0, 0.0, 0.0]).unwrap(),
        &|_| Wrench::from_force(Vector3::zeros()),
        &NoiseSpec::zero(),
        0.0,
        10.0,
        &ActuationUnitSim { torque_range: 20.0, ..ActuationUnitSim::default() },
        0,
    )
    .unwrap();
    assert_eq!(log.saturated_readings, 1);
    assert_eq!(log.samples[0].tension[0], 2.0);
    assert_eq!(log.truth[0].tension[0], 3.0);
}
