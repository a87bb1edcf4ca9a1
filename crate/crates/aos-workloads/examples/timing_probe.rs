// timing probe (not committed)
use aos_workloads::lstm::*;
fn main() {
    let t0 = std::time::Instant::now();
    let ds = generate_synthetic_series(2000, 0).unwrap();
    let windows = make_windows(&ds, 6, 0.8).unwrap();
    let mut model = LstmModel::init(2, 64, 0);
    let mut adam = AdamState::new(&model);
    let config = TrainConfig { epochs: 100, batch_size: 64, learning_rate: 1e-3, seed: 0 };
    let out = train(&mut model, &mut adam, &windows, &config).unwrap();
    let first = out.history.first().unwrap();
    let last = out.history.last().unwrap();
    println!("total {:.2}s  first train_mse {:.6}  last train_mse {:.6}  val {:.6}",
        t0.elapsed().as_secs_f64(), first.train_mse, last.train_mse, last.val_mse);
}
