use cgnn::contrastive::{ContrastiveConfig, EmbeddingBank};
use cgnn::dataset::{generate_sbm, SbmConfig};
use cgnn::encoder::Arch;
use cgnn::trainer::{train, train_with_observer, IterationStats, TrainConfig, TrainObserver};
use cgnn::Result;

fn config(iterations: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        contrastive: ContrastiveConfig { k: 128, ..ContrastiveConfig::default() },
        iterations,
        seed,
        ..TrainConfig::default()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn loss_decreases_over_300_iterations() {
    let ds = generate_sbm(&SbmConfig::default()).unwrap();
    let report = train(&config(300, 0), &ds).unwrap();
    let c = &report.loss_curve;
    assert_eq!(c.len(), 300);
    assert!(mean(&c[290..]) < mean(&c[..10]), "{} vs {}", mean(&c[290..]), mean(&c[..10]));
}

#[test]
fn no_nan_across_seeds() {
    let ds = generate_sbm(&SbmConfig::default()).unwrap();
    for seed in 0..10 {
        for arch in [Arch::Gcn, Arch::Sage] {
            let cfg = TrainConfig { arch, ..config(20, seed) };
            let report = train(&cfg, &ds).unwrap();
            assert!(report.loss_curve.iter().chain(&report.mi_bound_curve).all(|v| v.is_finite()));
            assert!(report.params().tensors().all(|t| t.all_finite()));
        }
    }
}

struct UnitBank(usize);

impl TrainObserver for UnitBank {
    fn on_iteration(&mut self, _: &IterationStats, bank: &EmbeddingBank) -> Result<()> {
        for m in [bank.view1(), bank.view2()] {
            for r in 0..m.rows() {
                let norm: f64 = m.row(r).iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-5, "row {r} norm {norm}");
            }
        }
        self.0 += 1;
        Ok(())
    }
}

#[test]
fn bank_rows_stay_unit_norm() {
    let ds = generate_sbm(&SbmConfig::default()).unwrap();
    let mut obs = UnitBank(0);
    train_with_observer(&config(15, 3), &ds, &mut obs).unwrap();
    assert_eq!(obs.0, 15);
}

#[test]
fn sage_also_reduces_loss() {
    let ds = generate_sbm(&SbmConfig::default()).unwrap();
    let report = train(&TrainConfig { arch: Arch::Sage, ..config(150, 1) }, &ds).unwrap();
    let c = &report.loss_curve;
    assert!(mean(&c[140..]) < mean(&c[..10]));
}
