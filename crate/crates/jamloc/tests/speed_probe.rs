use jamloc::models::AutoencoderSpec;
use jamloc::training::{run_pretrain, PhaseConfig, ScheduleSpec, TrainingState};
use ndarray::Array3;
use std::time::Instant;

#[test]
#[ignore]
fn speed_probe() {
    let data = Array3::<f64>::from_shape_fn((256, 3, 100), |(i, c, t)| {
        ((i * 7 + c * 3 + t) as f64 * 0.01).sin()
    });
    let mut state = TrainingState::new(0, AutoencoderSpec::default()).unwrap();
    let mut cfg = PhaseConfig::pretrain_default().with_epochs(2);
    cfg.lr_schedule = ScheduleSpec::constant(1e-3, 2);
    cfg.batch_size = 64;
    let t0 = Instant::now();
    run_pretrain(&mut state, &data, None, &cfg).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("2 epochs x 256 samples (bs 64): {dt:.2}s => {:.1} samples/s fwd+bwd", 512.0 / dt);
}
