//! The CGNN training loop: two DropEdge views per iteration, shared encoder,
//! NCE loss against a memory bank of the previous iteration's embeddings.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Exec, Matrix, Tape};
use crate::contrastive::{
    mi_lower_bound, nce_loss_on_tape, sample_negative_table, softmax_loss_from_logits, ContrastiveConfig,
    EmbeddingBank, NORM_EPS,
};
use crate::dataset::Dataset;
use crate::encoder::{encode_on_tape, Arch, Dims, EncoderParams, Propagation};
use crate::error::{Error, Result};
use crate::graph::drop_edges;
use crate::optim::Adam;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub contrastive: ContrastiveConfig,
    pub lr: f64,
    pub iterations: usize,
    pub arch: Arch,
    pub seed: u64,
    /// Call the observer's `on_eval` every this many iterations; 0 disables.
    pub eval_every: usize,
    /// Sequential kernels with bitwise-reproducible results. When false the
    /// kernels run on a thread pool sized by `CGNN_THREADS`.
    pub deterministic: bool,
    /// Width of both the hidden layer and the output embedding.
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            contrastive: ContrastiveConfig::default(),
            lr: 0.001,
            iterations: 5000,
            arch: Arch::Gcn,
            seed: 0,
            eval_every: 0,
            deterministic: true,
            hidden_dim: 128,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::arg(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.iterations == 0 {
            return Err(Error::arg("iterations must be at least 1"));
        }
        if self.hidden_dim == 0 {
            return Err(Error::arg("hidden_dim must be positive"));
        }
        self.contrastive.validate(num_nodes)
    }

    pub fn dims(&self, input: usize) -> Dims {
        Dims::new(input, self.hidden_dim, self.hidden_dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    /// `L₁-NCE + L₂-NCE`.
    pub loss: f64,
    /// `ln K − (L₁ + L₂)/2` with the softmax loss over the same negatives.
    pub mi_bound: f64,
    /// Positive-pair part of L₁-NCE: `−mean_i log p(c=1 | z¹_i, z²_i)`.
    pub positive_term: f64,
}

/// Hooks into the training loop. Both methods default to no-ops.
pub trait TrainObserver {
    fn on_iteration(&mut self, _stats: &IterationStats, _bank: &EmbeddingBank) -> Result<()> {
        Ok(())
    }

    /// Called every `eval_every` iterations with the current parameters.
    fn on_eval(&mut self, _iteration: usize, _params: &EncoderParams) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub loss_curve: Vec<f64>,
    pub mi_bound_curve: Vec<f64>,
    /// Seconds.
    pub wall_time: f64,
    #[serde(skip)]
    pub final_params: Option<EncoderParams>,
}

impl TrainReport {
    pub fn params(&self) -> &EncoderParams {
        self.final_params.as_ref().expect("report produced by train")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// `iteration,loss,mi_bound` rows, iterations counted from 0.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("iteration,loss,mi_bound\n");
        for (i, (l, m)) in self.loss_curve.iter().zip(&self.mi_bound_curve).enumerate() {
            out.push_str(&format!("{i},{l},{m}\n"));
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrainReport> {
    train_with_observer(config, dataset, &mut ())
}

pub fn train_with_observer(
    config: &TrainConfig,
    dataset: &Dataset,
    observer: &mut dyn TrainObserver,
) -> Result<TrainReport> {
    dataset.validate()?;
    let n = dataset.num_nodes();
    config.validate(n)?;
    let cc = config.contrastive;
    let exec = if config.deterministic {
        Exec::Sequential
    } else {
        Exec::fast_from_env()
    };

    let start = Instant::now();
    let mut params = EncoderParams::init(config.arch, config.dims(dataset.num_features()), config.seed)?;
    let mut adam = Adam::new(config.lr, params.tensors());
    let mut bank = EmbeddingBank::new(n, config.hidden_dim);
    let mut loss_curve = Vec::with_capacity(config.iterations);
    let mut mi_bound_curve = Vec::with_capacity(config.iterations);

    for t in 0..config.iterations {
        let view1 = drop_edges(&dataset.graph, cc.rho, &mut stream_rng(config.seed, Stream::DropEdge, &[t as u64, 0]))?;
        let view2 = drop_edges(&dataset.graph, cc.rho, &mut stream_rng(config.seed, Stream::DropEdge, &[t as u64, 1]))?;

        let mut tape = Tape::<f32>::with_exec(exec.clone());
        let vars = params.register(&mut tape, true);
        let x = tape.constant(dataset.features.clone());
        let z1 = encode_on_tape(&mut tape, &vars, &Propagation::for_view(config.arch, &view1), x)?;
        let z2 = encode_on_tape(&mut tape, &vars, &Propagation::for_view(config.arch, &view2), x)?;
        let z1 = tape.l2_normalize_rows(z1, NORM_EPS as f32);
        let z2 = tape.l2_normalize_rows(z2, NORM_EPS as f32);

        if !bank.is_initialized() {
            bank.update(tape.value(z1), tape.value(z2))?;
        }
        let table = sample_negative_table(n, cc.k, config.seed, t as u64)?;
        let m1 = tape.constant(bank.view1().clone());
        let m2 = tape.constant(bank.view2().clone());
        let terms = nce_loss_on_tape(&mut tape, z1, z2, m1, m2, &table, cc.tau, n)?;

        let loss = tape.value(terms.total).item() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: t, value: loss });
        }
        let soft1 = softmax_loss_from_logits(
            tape.value(terms.first.positive_logits),
            tape.value(terms.first.negative_logits),
        )?;
        let soft2 = softmax_loss_from_logits(
            tape.value(terms.second.positive_logits),
            tape.value(terms.second.negative_logits),
        )?;
        let stats = IterationStats {
            iteration: t,
            loss,
            mi_bound: mi_lower_bound(0.5 * (soft1 + soft2), cc.k),
            positive_term: tape.value(terms.first.positive).item() as f64,
        };

        let mut grads = tape.backward(terms.total)?;
        let grads: Vec<Matrix<f32>> = vars
            .all()
            .map(|v| grads.take(v).ok_or_else(|| Error::State("parameter received no gradient".into())))
            .collect::<Result<_>>()?;
        adam.step(params.tensors_mut(), &grads)?;
        bank.update(tape.value(z1), tape.value(z2))?;

        loss_curve.push(loss);
        mi_bound_curve.push(stats.mi_bound);
        log::debug!("iteration {t}: loss {loss:.6} mi_bound {:.6}", stats.mi_bound);
        observer.on_iteration(&stats, &bank)?;
        if config.eval_every > 0 && (t + 1) % config.eval_every == 0 {
            observer.on_eval(t, &params)?;
        }
    }

    Ok(TrainReport {
        loss_curve,
        mi_bound_curve,
        wall_time: start.elapsed().as_secs_f64(),
        final_params: Some(params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_sbm, SbmConfig};

    fn small() -> Dataset {
        generate_sbm(&SbmConfig {
            nodes_per_block: 20,
            ..SbmConfig::default()
        })
        .unwrap()
    }

    fn quick(iterations: usize) -> TrainConfig {
        TrainConfig {
            contrastive: ContrastiveConfig { k: 16, ..ContrastiveConfig::default() },
            iterations,
            hidden_dim: 16,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn single_iteration_initializes_bank() {
        struct Seen(bool, usize);
        impl TrainObserver for Seen {
            fn on_iteration(&mut self, _: &IterationStats, bank: &EmbeddingBank) -> Result<()> {
                self.0 = bank.is_initialized();
                self.1 += 1;
                Ok(())
            }
        }
        let mut seen = Seen(false, 0);
        let report = train_with_observer(&quick(1), &small(), &mut seen).unwrap();
        assert_eq!(report.loss_curve.len(), 1);
        assert_eq!(report.mi_bound_curve.len(), 1);
        assert!(seen.0);
        assert_eq!(seen.1, 1);
    }

    #[test]
    fn deterministic_runs_are_bitwise_equal() {
        let d = small();
        let a = train(&quick(5), &d).unwrap();
        let b = train(&quick(5), &d).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn eval_hook_cadence() {
        struct Evals(Vec<usize>);
        impl TrainObserver for Evals {
            fn on_eval(&mut self, t: usize, _: &EncoderParams) -> Result<()> {
                self.0.push(t);
                Ok(())
            }
        }
        let mut evals = Evals(vec![]);
        let cfg = TrainConfig { eval_every: 2, ..quick(5) };
        train_with_observer(&cfg, &small(), &mut evals).unwrap();
        assert_eq!(evals.0, vec![1, 3]);
    }

    #[test]
    fn invalid_config_rejected() {
        let d = small();
        assert!(train(&TrainConfig { lr: 0.0, ..quick(1) }, &d).is_err());
        assert!(train(&TrainConfig { iterations: 0, ..quick(1) }, &d).is_err());
        let big_k = TrainConfig { contrastive: ContrastiveConfig { k: 60, ..ContrastiveConfig::default() }, ..quick(1) };
        assert!(train(&big_k, &d).is_err());
    }

    #[test]
    fn rho_zero_positive_term_closed_form() {
        struct Check(f64, usize);
        impl TrainObserver for Check {
            fn on_iteration(&mut self, s: &IterationStats, _: &EmbeddingBank) -> Result<()> {
                assert!((s.positive_term - self.0).abs() < 1e-4, "{} vs {}", s.positive_term, self.0);
                self.1 += 1;
                Ok(())
            }
        }
        let cfg = TrainConfig {
            contrastive: ContrastiveConfig { rho: 0.0, k: 16, tau: 0.1 },
            ..quick(4)
        };
        let e = 10f64.exp();
        let want = -(e / (e + 16.0 / 60.0)).ln();
        let mut check = Check(want, 0);
        train_with_observer(&cfg, &small(), &mut check).unwrap();
        assert_eq!(check.1, 4);
    }

    #[test]
    fn report_serializes() {
        let report = train(&quick(2), &small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        report.write_json(&dir.path().join("r.json")).unwrap();
        report.write_csv(&dir.path().join("r.csv")).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
        assert_eq!(json["loss_curve"].as_array().unwrap().len(), 2);
    }
}
