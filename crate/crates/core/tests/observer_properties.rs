use nalgebra::DMatrix;
use scalar_attitude::measurement::{preset_config, MeasurementConfig, Preset};
use scalar_attitude::observer::{
    riccati_step, run, Estimator, Gains, ObserverState, RunHistory, DEFAULT_P0,
};
use scalar_attitude::sim::{generate, preset_trajectory, PresetTrajectory, SyntheticRun};
use scalar_attitude::so3::{angular_distance, exp_so3, Rotation, Vec3};

fn cfg(preset: Preset) -> MeasurementConfig {
    preset_config(
        preset,
        &Rotation::identity(),
        &Vec3::new(0.5, 0.0, 0.75f64.sqrt()),
    )
    .unwrap()
}

fn tumble(duration: f64, rate: f64, d: Vec3, preset: Preset) -> SyntheticRun {
    let mut spec = preset_trajectory(PresetTrajectory::PeTumble);
    spec.duration = duration;
    spec.rate = rate;
    spec.d_true = d;
    generate(&spec, &cfg(preset)).unwrap()
}

fn biased_init(r: Rotation, d: Vec3) -> ObserverState {
    ObserverState::biased(r, d, DMatrix::identity(6, 6) * DEFAULT_P0, 0.0).unwrap()
}

#[test]
fn started_at_truth_stays_at_truth() {
    let sim = tumble(20.0, 286.0, Vec3::zeros(), Preset::Two);
    let init = ObserverState::unbiased(
        Rotation::identity(),
        DMatrix::identity(3, 3) * DEFAULT_P0,
        0.0,
    )
    .unwrap();
    let gains = Gains::defaults(2, false);
    let hist = run(
        Estimator::RiccatiUnbiased,
        init,
        &sim.inputs(),
        &sim.config,
        &gains,
    )
    .unwrap();
    let worst = hist
        .states
        .iter()
        .zip(sim.truth.rotations())
        .map(|(s, r)| angular_distance(&s.rhat, r))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
}

fn final_estimate(rate: f64) -> Rotation {
    let sim = tumble(10.0, rate, Vec3::zeros(), Preset::Six);
    let gains = Gains::scaled(6, 5.0, 0.005, true).unwrap();
    let init = biased_init(exp_so3(&Vec3::new(0.3, -0.2, 0.4)), Vec3::zeros());
    run(Estimator::Riccati, init, &sim.inputs(), &sim.config, &gains)
        .unwrap()
        .last()
        .rhat
}

#[test]
fn integrator_is_first_order() {
    let reference = final_estimate(50.0 * 100.0);
    let coarse = angular_distance(&final_estimate(50.0), &reference);
    let fine = angular_distance(&final_estimate(100.0), &reference);
    let ratio = coarse / fine;
    assert!((1.5..=2.5).contains(&ratio), "{coarse} / {fine} = {ratio}");
}

#[test]
fn rotation_stays_orthonormal() {
    let sim = tumble(
        100_000.0 / 286.0,
        286.0,
        Vec3::new(0.02, -0.01, 0.03),
        Preset::Two,
    );
    let inputs = sim.inputs();
    for interval in [0u64, 1000] {
        let mut gains = Gains::defaults(2, true);
        gains.projection_interval = interval;
        let mut state = biased_init(exp_so3(&Vec3::new(0.5, 0.5, 0.5)), Vec3::zeros());
        let mut worst = 0.0f64;
        for input in &inputs {
            state = riccati_step(&state, input, &sim.config, &gains)
                .unwrap()
                .state;
            let e = state.rhat.orthogonality_error();
            worst = worst.max(e);
            if interval > 0 && state.steps.is_multiple_of(interval) {
                assert!(e <= 1e-12, "after projection: {e}");
            }
        }
        assert_eq!(state.steps, 100_000);
        assert!(worst <= 1e-6, "interval {interval}: {worst}");
    }
}

#[test]
fn unbiased_and_biased_agree_without_bias() {
    let sim = tumble(10.0, 286.0, Vec3::zeros(), Preset::Four);
    let r0 = exp_so3(&Vec3::new(0.2, 0.1, -0.3));
    let mut p6 = DMatrix::identity(6, 6) * DEFAULT_P0;
    p6.view_mut((3, 3), (3, 3)).fill_with_identity();
    p6.view_mut((3, 3), (3, 3)).scale_mut(1e-9);
    let mut v6 = DMatrix::identity(6, 6) * 0.005;
    v6.view_mut((3, 3), (3, 3)).scale_mut(1e-9);
    let biased_gains = Gains::new(
        scalar_attitude::observer::GainMatrix::scaled_identity(4, 0.05),
        scalar_attitude::observer::GainMatrix::constant(v6, "V").unwrap(),
    );
    let b = run(
        Estimator::Riccati,
        ObserverState::biased(r0, Vec3::zeros(), p6, 0.0).unwrap(),
        &sim.inputs(),
        &sim.config,
        &biased_gains,
    )
    .unwrap();
    let u = run(
        Estimator::RiccatiUnbiased,
        ObserverState::unbiased(r0, DMatrix::identity(3, 3) * DEFAULT_P0, 0.0).unwrap(),
        &sim.inputs(),
        &sim.config,
        &Gains::defaults(4, false),
    )
    .unwrap();
    let worst = b
        .states
        .iter()
        .zip(&u.states)
        .map(|(x, y)| angular_distance(&x.rhat, &y.rhat))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-3, "{worst}");
}

fn min_eigenvalue(h: &RunHistory) -> f64 {
    h.states
        .iter()
        .map(|s| s.p.clone().symmetric_eigenvalues().min())
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn unbiased_p_stays_spd_on_excited_run() {
    let sim = tumble(60.0, 286.0, Vec3::zeros(), Preset::Two);
    let init = ObserverState::unbiased(
        exp_so3(&Vec3::new(0.5, -0.5, 0.2)),
        DMatrix::identity(3, 3) * DEFAULT_P0,
        0.0,
    )
    .unwrap();
    let h = run(
        Estimator::RiccatiUnbiased,
        init,
        &sim.inputs(),
        &sim.config,
        &Gains::defaults(2, false),
    )
    .unwrap();
    assert!(h
        .states
        .iter()
        .all(|s| s.p.shape() == (3, 3) && (&s.p - s.p.transpose()).amax() <= 1e-10));
    assert!(min_eigenvalue(&h) > 0.0);
}

#[test]
fn converged_run_decays_after_transient() {
    let d = Vec3::new(0.02, -0.01, 0.03);
    let sim = tumble(60.0, 286.0, d, Preset::Six);
    let gains = Gains::scaled(6, 5.0, 0.005, true).unwrap();
    let init = biased_init(exp_so3(&Vec3::new(0.4, 0.3, -0.2)), Vec3::zeros());
    let h = run(Estimator::Riccati, init, &sim.inputs(), &sim.config, &gains).unwrap();
    let theta: Vec<f64> = h
        .states
        .iter()
        .zip(sim.truth.rotations())
        .map(|(s, r)| angular_distance(&s.rhat, r))
        .collect();
    // the decay is oscillatory; its envelope, taken as 10 s block maxima, must shrink
    let blocks: Vec<f64> = theta[286 * 10..]
        .chunks(286 * 10)
        .map(|c| c.iter().copied().fold(0.0, f64::max))
        .collect();
    assert!(blocks.windows(2).all(|w| w[1] < w[0]), "{blocks:?}");
    assert!((h.last().dhat - d).norm() < 1e-3);
}

#[test]
fn replay_is_deterministic() {
    let sim = tumble(5.0, 286.0, Vec3::new(0.01, 0.0, 0.0), Preset::Three);
    let gains = Gains::defaults(3, true);
    let go = || {
        run(
            Estimator::Riccati,
            biased_init(Rotation::identity(), Vec3::zeros()),
            &sim.inputs(),
            &sim.config,
            &gains,
        )
        .unwrap()
        .states
    };
    assert_eq!(go(), go());
    let empty = run(
        Estimator::Riccati,
        biased_init(Rotation::identity(), Vec3::zeros()),
        &[],
        &sim.config,
        &gains,
    )
    .unwrap();
    assert_eq!(empty.states.len(), 1);
}
