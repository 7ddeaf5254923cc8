use crate::dataset::{Symptom, NUM_SYMPTOMS};
use crate::error::{Error, Result};
use crate::models::{
    HeadInit, LossBreakdown, ModelKind, ModelSpec, OutputGrads, SegmentInput, CONV1_KERNEL, CONV2_KERNEL,
    CONV_CHANNELS,
};
use crate::nn::ops::{dropout, silu, silu_backward, softmax2, Dropout};
use crate::nn::{Checkpoint, Conv1d, Dense, LayerParams, Matrix, NamedTensor, OptimizerConfig, Parameterized};
use crate::seed::derive_seed;

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum Trunk {
    Single { dense: Dense },
    Fusion { branches: Vec<Dense>, merge: Dense },
    Cnn { conv1: Conv1d, conv2: Conv1d, dense: Dense },
}

#[derive(Debug, Clone)]
struct ConvCache {
    cols1: Matrix,
    len1: usize,
    pre1: Matrix,
    drop1: Dropout,
    cols2: Matrix,
    pre2: Matrix,
    drop2: Dropout,
}

#[derive(Debug, Clone)]
enum TrunkCache {
    Single {
        x: Matrix,
        pre: Matrix,
    },
    Fusion {
        xs: Vec<Matrix>,
        pres: Vec<Matrix>,
        concat: Matrix,
        pre: Matrix,
    },
    Cnn {
        convs: Vec<ConvCache>,
        pooled: Matrix,
        pre: Matrix,
        drop: Dropout,
    },
}

#[derive(Debug, Clone)]
struct Cache {
    trunk: TrunkCache,
    hidden: Matrix,
}

/// Head outputs for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Raw logits per classification head, batch x 2.
    pub logits: Vec<(Symptom, Matrix)>,
    /// Softmax of `logits`.
    pub probs: Vec<(Symptom, Matrix)>,
    /// Normalized severity per example.
    pub severity: Option<Vec<f64>>,
}

impl ForwardOutput {
    pub fn batch_size(&self) -> usize {
        self.logits
            .first()
            .map(|(_, m)| m.rows())
            .or_else(|| self.severity.as_ref().map(Vec::len))
            .unwrap_or(0)
    }

    pub fn segments(&self) -> Vec<SegmentOutput> {
        (0..self.batch_size())
            .map(|i| {
                let mut present = [None; NUM_SYMPTOMS];
                for (s, p) in &self.probs {
                    present[s.index()] = Some(p.get(i, 1));
                }
                SegmentOutput {
                    present,
                    severity: self.severity.as_ref().map(|v| v[i]),
                }
            })
            .collect()
    }
}

/// One segment's outputs: probability of "present" per available head, plus the
/// normalized severity estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentOutput {
    pub present: [Option<f64>; NUM_SYMPTOMS],
    pub severity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    trunk: Trunk,
    heads: Vec<(Symptom, Dense)>,
    severity: Option<Dense>,
    dropout_seed: u64,
    dropout_calls: u64,
    cache: Option<Cache>,
}

/// Builds a freshly initialised model. Each layer draws its weights from a seed
/// derived from `seed` and the layer name, so a head has the same initial weights
/// whether it sits in a single-task or a multi-task model.
pub fn build_model(spec: &ModelSpec, seed: u64) -> Result<Model> {
    spec.validate()?;
    let h = spec.hidden_width;
    let init = |name: &str, i: usize, o: usize| Dense::glorot(i, o, derive_seed(seed, name));
    let trunk = match spec.kind {
        ModelKind::SingleStream => Trunk::Single {
            dense: init("trunk.dense", spec.streams[0].dim, h),
        },
        ModelKind::Fusion => Trunk::Fusion {
            branches: spec
                .streams
                .iter()
                .map(|s| init(&format!("trunk.branch.{}", s.name), s.dim, h))
                .collect(),
            merge: init("trunk.merge", h * spec.streams.len(), h),
        },
        ModelKind::CnnBaseline => Trunk::Cnn {
            conv1: Conv1d::glorot(spec.streams[0].dim, CONV_CHANNELS, CONV1_KERNEL, derive_seed(seed, "trunk.conv1")),
            conv2: Conv1d::glorot(CONV_CHANNELS, CONV_CHANNELS, CONV2_KERNEL, derive_seed(seed, "trunk.conv2")),
            dense: init("trunk.dense", CONV_CHANNELS, h),
        },
    };
    let head = |name: &str, out: usize| match spec.head_init {
        HeadInit::Glorot => init(name, h, out),
        HeadInit::Zero => Dense::new(LayerParams::zeroed(h, out, out)),
    };
    let heads = spec
        .classification_heads()
        .into_iter()
        .map(|s| (s, head(&format!("head.{}", s.abbr()), 2)))
        .collect();
    let severity = spec.has_severity_head().then(|| head("head.severity", 1));
    Ok(Model {
        spec: spec.clone(),
        trunk,
        heads,
        severity,
        dropout_seed: derive_seed(seed, "dropout"),
        dropout_calls: 0,
        cache: None,
    })
}

fn pooled_batch(inputs: &[&SegmentInput], spec: &ModelSpec) -> Result<Vec<Matrix>> {
    let mut per_stream: Vec<Vec<f64>> = spec
        .streams
        .iter()
        .map(|s| Vec::with_capacity(s.dim * inputs.len()))
        .collect();
    for input in inputs {
        let SegmentInput::Pooled(vectors) = input else {
            return Err(Error::shape("expected pooled stream vectors"));
        };
        if vectors.len() != spec.streams.len() {
            return Err(Error::shape(format!(
                "input has {} streams, model has {}",
                vectors.len(),
                spec.streams.len()
            )));
        }
        for ((buf, v), s) in per_stream.iter_mut().zip(vectors).zip(&spec.streams) {
            if v.len() != s.dim {
                return Err(Error::shape(format!(
                    "stream `{}` has dim {}, expected {}",
                    s.name,
                    v.len(),
                    s.dim
                )));
            }
            buf.extend_from_slice(v);
        }
    }
    per_stream
        .into_iter()
        .zip(&spec.streams)
        .map(|(buf, s)| Matrix::from_vec(inputs.len(), s.dim, buf))
        .collect()
}

fn dense_silu(layer: &Dense, x: &Matrix) -> Result<(Matrix, Matrix)> {
    let pre = layer.apply(x)?;
    let out = silu(&pre);
    Ok((pre, out))
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn heads(&self) -> impl Iterator<Item = Symptom> + '_ {
        self.heads.iter().map(|(s, _)| *s)
    }

    pub fn num_params(&self) -> usize {
        self.layers().iter().map(|(_, p)| p.num_params()).sum()
    }

    /// Restarts the dropout mask stream from a new seed.
    pub fn reseed_dropout(&mut self, seed: u64) {
        self.dropout_seed = seed;
        self.dropout_calls = 0;
    }

    fn next_dropout_seed(&mut self) -> u64 {
        self.dropout_calls += 1;
        derive_seed(self.dropout_seed, &self.dropout_calls.to_string())
    }

    fn run(&self, inputs: &[&SegmentInput], training: bool, drop_seed: u64) -> Result<(Cache, ForwardOutput)> {
        if inputs.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let (trunk, hidden) = match &self.trunk {
            Trunk::Single { dense } => {
                let x = pooled_batch(inputs, &self.spec)?.pop().expect("one stream");
                let (pre, out) = dense_silu(dense, &x)?;
                (TrunkCache::Single { x, pre }, out)
            }
            Trunk::Fusion { branches, merge } => {
                let xs = pooled_batch(inputs, &self.spec)?;
                let mut pres = Vec::with_capacity(xs.len());
                let mut outs = Vec::with_capacity(xs.len());
                for (layer, x) in branches.iter().zip(&xs) {
                    let (pre, out) = dense_silu(layer, x)?;
                    pres.push(pre);
                    outs.push(out);
                }
                let concat = Matrix::hconcat(&outs)?;
                let (pre, out) = dense_silu(merge, &concat)?;
                (TrunkCache::Fusion { xs, pres, concat, pre }, out)
            }
            Trunk::Cnn { conv1, conv2, dense } => {
                let conv_rate = self.spec.conv_dropout;
                let mut convs = Vec::with_capacity(inputs.len());
                let mut pooled = Matrix::zeros(inputs.len(), CONV_CHANNELS);
                for (b, input) in inputs.iter().enumerate() {
                    let SegmentInput::Sequence(x) = input else {
                        return Err(Error::shape("CNN expects a channels x time sequence"));
                    };
                    let ex_seed = derive_seed(drop_seed, &b.to_string());
                    let cols1 = conv1.im2col(x)?;
                    let pre1 = conv1.apply_cols(&cols1)?;
                    let drop1 = dropout(&silu(&pre1), conv_rate, training, derive_seed(ex_seed, "conv1"))?;
                    let cols2 = conv2.im2col(&drop1.output)?;
                    let pre2 = conv2.apply_cols(&cols2)?;
                    let drop2 = dropout(&silu(&pre2), conv_rate, training, derive_seed(ex_seed, "conv2"))?;
                    pooled.row_mut(b).copy_from_slice(&drop2.output.row_means());
                    convs.push(ConvCache {
                        cols1,
                        len1: x.cols(),
                        pre1,
                        drop1,
                        cols2,
                        pre2,
                        drop2,
                    });
                }
                let (pre, out) = dense_silu(dense, &pooled)?;
                let drop = dropout(&out, self.spec.dense_dropout, training, derive_seed(drop_seed, "dense"))?;
                let hidden = drop.output.clone();
                (
                    TrunkCache::Cnn {
                        convs,
                        pooled,
                        pre,
                        drop,
                    },
                    hidden,
                )
            }
        };
        let mut logits = Vec::with_capacity(self.heads.len());
        let mut probs = Vec::with_capacity(self.heads.len());
        for (s, head) in &self.heads {
            let z = head.apply(&hidden)?;
            probs.push((*s, softmax2(&z)?));
            logits.push((*s, z));
        }
        let severity = match &self.severity {
            Some(head) => Some(head.apply(&hidden)?.into_vec()),
            None => None,
        };
        Ok((Cache { trunk, hidden }, ForwardOutput { logits, probs, severity }))
    }

    /// Forward pass that keeps activations for [`Model::backward`]. In training mode
    /// the CNN applies dropout; the pooled-input models have none.
    pub fn forward(&mut self, inputs: &[&SegmentInput], training: bool) -> Result<ForwardOutput> {
        let seed = if training { self.next_dropout_seed() } else { 0 };
        let (cache, out) = self.run(inputs, training, seed)?;
        self.cache = Some(cache);
        Ok(out)
    }

    /// Inference with frozen parameters.
    pub fn infer(&self, inputs: &[&SegmentInput]) -> Result<ForwardOutput> {
        self.run(inputs, false, 0).map(|(_, out)| out)
    }

    /// Backpropagates the given head gradients. Heads without a gradient entry are
    /// left untouched, so their parameters are not updated by the next step.
    pub fn backward(&mut self, grads: &OutputGrads) -> Result<()> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::invalid("backward before forward"))?;
        let result = self.backward_cached(&cache, grads);
        self.cache = Some(cache);
        result
    }

    fn backward_cached(&mut self, cache: &Cache, grads: &OutputGrads) -> Result<()> {
        let hidden = &cache.hidden;
        let mut d_hidden = Matrix::zeros(hidden.rows(), hidden.cols());
        let mut touched = false;
        for (s, g) in &grads.logits {
            let head = self
                .heads
                .iter_mut()
                .find(|(h, _)| h == s)
                .map(|(_, d)| d)
                .ok_or_else(|| Error::invalid(format!("model has no {} head", s.abbr())))?;
            d_hidden.add_assign(&head.backward_from(hidden, g)?)?;
            touched = true;
        }
        if let Some(g) = &grads.severity {
            let head = self
                .severity
                .as_mut()
                .ok_or_else(|| Error::invalid("model has no severity head"))?;
            let up = Matrix::from_vec(g.len(), 1, g.clone())?;
            d_hidden.add_assign(&head.backward_from(hidden, &up)?)?;
            touched = true;
        }
        if !touched {
            return Ok(());
        }

        match (&mut self.trunk, &cache.trunk) {
            (Trunk::Single { dense }, TrunkCache::Single { x, pre }) => {
                let d_pre = silu_backward(pre, &d_hidden)?;
                dense.backward_from(x, &d_pre)?;
            }
            (Trunk::Fusion { branches, merge }, TrunkCache::Fusion { xs, pres, concat, pre }) => {
                let d_pre = silu_backward(pre, &d_hidden)?;
                let d_concat = merge.backward_from(concat, &d_pre)?;
                let widths = vec![self.spec.hidden_width; branches.len()];
                for (((layer, x), p), d) in branches.iter_mut().zip(xs).zip(pres).zip(d_concat.hsplit(&widths)?) {
                    let d_p = silu_backward(p, &d)?;
                    layer.backward_from(x, &d_p)?;
                }
            }
            (
                Trunk::Cnn { conv1, conv2, dense },
                TrunkCache::Cnn {
                    convs,
                    pooled,
                    pre,
                    drop,
                },
            ) => {
                let d_act = drop.backward(&d_hidden)?;
                let d_pre = silu_backward(pre, &d_act)?;
                let d_pooled = dense.backward_from(pooled, &d_pre)?;
                for (b, c) in convs.iter().enumerate() {
                    let t2 = c.pre2.cols();
                    let mut d_out2 = Matrix::zeros(c.pre2.rows(), t2);
                    for (ch, &g) in d_pooled.row(b).iter().enumerate() {
                        d_out2.row_mut(ch).fill(g / t2 as f64);
                    }
                    let d2 = silu_backward(&c.pre2, &c.drop2.backward(&d_out2)?)?;
                    let d_out1 = conv2.backward_cols(&c.cols2, c.pre1.cols(), &d2)?;
                    let d1 = silu_backward(&c.pre1, &c.drop1.backward(&d_out1)?)?;
                    conv1.backward_cols(&c.cols1, c.len1, &d1)?;
                }
            }
            _ => return Err(Error::invalid("activation cache does not match the model")),
        }
        Ok(())
    }

    fn layers(&self) -> Vec<(String, &LayerParams)> {
        let mut out = Vec::new();
        match &self.trunk {
            Trunk::Single { dense } => out.push(("trunk.dense".to_string(), &dense.params)),
            Trunk::Fusion { branches, merge } => {
                for (s, b) in self.spec.streams.iter().zip(branches) {
                    out.push((format!("trunk.branch.{}", s.name), &b.params));
                }
                out.push(("trunk.merge".into(), &merge.params));
            }
            Trunk::Cnn { conv1, conv2, dense } => {
                out.push(("trunk.conv1".into(), &conv1.params));
                out.push(("trunk.conv2".into(), &conv2.params));
                out.push(("trunk.dense".into(), &dense.params));
            }
        }
        for (s, h) in &self.heads {
            out.push((format!("head.{}", s.abbr()), &h.params));
        }
        if let Some(h) = &self.severity {
            out.push(("head.severity".into(), &h.params));
        }
        out
    }

    fn layers_mut(&mut self) -> Vec<&mut LayerParams> {
        let mut out = Vec::new();
        match &mut self.trunk {
            Trunk::Single { dense } => out.push(&mut dense.params),
            Trunk::Fusion { branches, merge } => {
                out.extend(branches.iter_mut().map(|b| &mut b.params));
                out.push(&mut merge.params);
            }
            Trunk::Cnn { conv1, conv2, dense } => {
                out.push(&mut conv1.params);
                out.push(&mut conv2.params);
                out.push(&mut dense.params);
            }
        }
        out.extend(self.heads.iter_mut().map(|(_, h)| &mut h.params));
        if let Some(h) = &mut self.severity {
            out.push(&mut h.params);
        }
        out
    }

    /// Parameters of one named layer, e.g. `head.ASad`.
    pub fn layer(&self, name: &str) -> Option<&LayerParams> {
        self.layers().into_iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn zero_grad(&mut self) {
        for p in self.layers_mut() {
            p.zero_grad();
        }
    }

    /// Adam update on every layer that received gradients since the last step.
    /// Returns how many layers were updated.
    pub fn step(&mut self, cfg: &OptimizerConfig) -> Result<usize> {
        let mut n = 0;
        for p in self.layers_mut() {
            if p.has_fresh_gradients() {
                p.adam_step(cfg)?;
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn to_checkpoint(&self, optimizer: &OptimizerConfig) -> Checkpoint {
        let mut tensors = Vec::new();
        for (name, p) in self.layers() {
            tensors.push(NamedTensor {
                name: format!("{name}.weight"),
                shape: vec![p.weights.rows(), p.weights.cols()],
                values: p.weights.as_slice().iter().map(|&v| v as f32).collect(),
            });
            tensors.push(NamedTensor {
                name: format!("{name}.bias"),
                shape: vec![p.bias.len()],
                values: p.bias.iter().map(|&v| v as f32).collect(),
            });
        }
        Checkpoint {
            optimizer: *optimizer,
            tensors,
        }
    }

    /// Rebuilds a model for `spec` with the checkpoint's weights.
    pub fn from_checkpoint(spec: &ModelSpec, ckpt: &Checkpoint) -> Result<Model> {
        let mut model = build_model(spec, 0)?;
        let names: Vec<String> = model.layers().into_iter().map(|(n, _)| n).collect();
        for (name, p) in names.iter().zip(model.layers_mut()) {
            let get = |suffix: &str| {
                ckpt.tensor(&format!("{name}.{suffix}"))
                    .ok_or_else(|| Error::Format {
                        offset: 0,
                        message: format!("checkpoint lacks tensor `{name}.{suffix}`"),
                    })
            };
            let w = get("weight")?;
            let b = get("bias")?;
            if w.shape != [p.weights.rows(), p.weights.cols()] || b.shape != [p.bias.len()] {
                return Err(Error::shape(format!("checkpoint tensor `{name}` has the wrong shape")));
            }
            let weights = Matrix::from_vec(w.shape[0], w.shape[1], w.values.iter().map(|&v| f64::from(v)).collect())?;
            *p = LayerParams::from_values(weights, b.values.iter().map(|&v| f64::from(v)).collect());
        }
        Ok(model)
    }

    /// Loss over a batch with optional backward pass; used by gradient checks.
    pub fn loss_and_grads(
        &mut self,
        inputs: &[&SegmentInput],
        targets: &[crate::models::SegmentTarget],
        regression_weight: f64,
        with_backward: bool,
    ) -> Result<LossBreakdown> {
        if with_backward {
            self.zero_grad();
        }
        let out = if with_backward {
            self.forward(inputs, false)?
        } else {
            self.infer(inputs)?
        };
        let (loss, grads) = crate::models::multitask_loss(&out, targets, regression_weight, None)?;
        if with_backward {
            self.backward(&grads)?;
        }
        Ok(loss)
    }
}

impl Parameterized for Model {
    fn layer_names(&self) -> Vec<String> {
        self.layers().into_iter().map(|(n, _)| n).collect()
    }

    fn layer_mut(&mut self, index: usize) -> &mut LayerParams {
        self.layers_mut().swap_remove(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::BinaryLabels;
    use crate::models::{HeadMode, SegmentTarget, StreamSpec, Task};
    use crate::nn::grad_check;
    use crate::seed::rng_from;
    use rand::Rng;

    fn pooled(dims: &[usize], seed: u64) -> SegmentInput {
        let mut rng = rng_from(seed);
        SegmentInput::Pooled(
            dims.iter()
                .map(|&d| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
    }

    fn targets(n: usize) -> Vec<SegmentTarget> {
        (0..n)
            .map(|i| {
                let mut present = [false; NUM_SYMPTOMS];
                for (s, p) in present.iter_mut().enumerate() {
                    *p = (i + s) % 3 == 0;
                }
                SegmentTarget {
                    labels: BinaryLabels { present },
                    severity: Some(0.1 * i as f64),
                }
            })
            .collect()
    }

    #[test]
    fn parameter_counts() {
        for spec in [
            ModelSpec::single_stream("hubert", 768, HeadMode::MultiTask),
            ModelSpec::single_stream("hubert", 768, HeadMode::SingleTask(Task::Severity)),
            ModelSpec::fusion(&[("a", 768), ("b", 512), ("c", 2048)], HeadMode::MultiTask),
            ModelSpec::cnn("spectro", 80, HeadMode::SingleTask(Task::Symptom(Symptom::Lassitude))),
        ] {
            let m = build_model(&spec, 1).unwrap();
            assert_eq!(m.num_params(), spec.expected_param_count());
        }
        let cnn = build_model(&ModelSpec::cnn("spectro", 80, HeadMode::MultiTask), 1).unwrap();
        let conv1 = cnn.layer("trunk.conv1").unwrap();
        assert_eq!(conv1.weights.shape(), (100, 80 * 3));
        let fusion = build_model(&ModelSpec::fusion(&[("a", 768), ("b", 512), ("c", 2048)], HeadMode::MultiTask), 1).unwrap();
        assert_eq!(fusion.layer("trunk.merge").unwrap().weights.shape(), (300, 100));
    }

    #[test]
    fn output_arity_and_zero_heads() {
        let mut spec = ModelSpec::single_stream("x", 6, HeadMode::MultiTask);
        spec.head_init = HeadInit::Zero;
        let m = build_model(&spec, 3).unwrap();
        let inputs = [pooled(&[6], 1), pooled(&[6], 2)];
        let refs: Vec<&SegmentInput> = inputs.iter().collect();
        let out = m.infer(&refs).unwrap();
        assert_eq!(out.probs.len(), 10);
        assert_eq!(out.severity.as_ref().unwrap().len(), 2);
        for (_, p) in &out.probs {
            for r in 0..2 {
                assert_eq!(p.row(r), &[0.5, 0.5]);
            }
        }
    }

    #[test]
    fn dim_mismatch_is_an_error() {
        let m = build_model(&ModelSpec::single_stream("x", 6, HeadMode::MultiTask), 3).unwrap();
        let bad = pooled(&[5], 1);
        assert!(matches!(m.infer(&[&bad]), Err(Error::Shape(_))));
    }

    #[test]
    fn fusion_gradients() {
        let spec = ModelSpec::fusion(&[("a", 4), ("b", 3)], HeadMode::MultiTask);
        let mut m = build_model(&spec, 9).unwrap();
        let inputs: Vec<SegmentInput> = (0..4).map(|i| pooled(&[4, 3], i)).collect();
        let refs: Vec<&SegmentInput> = inputs.iter().collect();
        let t = targets(4);
        let report = grad_check(&mut m, |m, bw| Ok(m.loss_and_grads(&refs, &t, 1.0, bw)?.total), 1e-5).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn cnn_forward_shapes_and_dropout_modes() {
        let spec = ModelSpec::new(
            ModelKind::CnnBaseline,
            vec![StreamSpec::new("spectro", 3)],
            HeadMode::SingleTask(Task::Severity),
        );
        let mut m = build_model(&spec, 2).unwrap();
        let x = SegmentInput::Sequence(Matrix::from_vec(3, 9, (0..27).map(|v| v as f64 / 27.0).collect()).unwrap());
        let a = m.infer(&[&x]).unwrap();
        assert_eq!(a, m.forward(&[&x], false).unwrap());
        let c = m.forward(&[&x], true).unwrap();
        assert_ne!(a.severity, c.severity);
        let short = SegmentInput::Sequence(Matrix::zeros(3, 6));
        assert!(m.infer(&[&short]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let spec = ModelSpec::fusion(&[("a", 4), ("b", 3)], HeadMode::MultiTask);
        let m = build_model(&spec, 9).unwrap();
        let ckpt = m.to_checkpoint(&OptimizerConfig::default());
        let back = Model::from_checkpoint(&spec, &ckpt).unwrap();
        let x = pooled(&[4, 3], 0);
        let (a, b) = (m.infer(&[&x]).unwrap(), back.infer(&[&x]).unwrap());
        for ((_, pa), (_, pb)) in a.probs.iter().zip(&b.probs) {
            assert!((pa.get(0, 1) - pb.get(0, 1)).abs() < 1e-5);
        }
        let other = ModelSpec::single_stream("a", 4, HeadMode::MultiTask);
        assert!(Model::from_checkpoint(&other, &ckpt).is_err());
    }
}
