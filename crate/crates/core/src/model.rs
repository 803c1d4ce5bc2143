//! Embedding network, projection head, cosine classifier and the base-session
//! training loop.
//!
//! The backbone and the projection head are multilayer perceptrons with a
//! rectifier between layers and an affine output. Everything except the
//! backbone is dropped after base training; see [`ModelParams::into_backbone`].

use serde::{Deserialize, Serialize};

use crate::augment::{
    check_base_labels, draw_mixed, two_view, AugmentedLabelSpace, ViewTransformSpec,
};
use crate::error::{Error, Result};
use crate::loss::{batch_loss_grad, LossConfig};
use crate::math::Rng;
use crate::sample::{class_count, group_by_label, Payload, Sample};

/// Affine layer `y = W x + b`, `W` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform fan-in initialization, `U(-1/sqrt(inputs), 1/sqrt(inputs))`.
    pub fn init(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = || rng.uniform(-bound, bound).expect("bound > 0");
        let weights = (0..inputs * outputs).map(|_| draw()).collect();
        let bias = (0..outputs).map(|_| draw()).collect();
        Self {
            inputs,
            outputs,
            weights,
            bias,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Activations kept for the backward pass: `inputs[l]` is the input of layer
/// `l`, `pre[l]` its affine output.
struct MlpTrace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl MlpTrace {
    fn output(&self) -> &[f64] {
        self.pre.last().expect("mlp has layers")
    }
}

fn check_input(layers: &[Dense], x: &[f64], what: &str) -> Result<()> {
    let want = layers.first().map(|l| l.inputs).unwrap_or(x.len());
    if x.len() != want {
        return Err(Error::ShapeMismatch(format!(
            "{what} expects {want} inputs, got {}",
            x.len()
        )));
    }
    Ok(())
}

fn mlp_forward(layers: &[Dense], x: &[f64]) -> MlpTrace {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut cur = x.to_vec();
    for (l, layer) in layers.iter().enumerate() {
        let z = layer.forward(&cur);
        inputs.push(cur);
        cur = z.clone();
        if l + 1 < layers.len() {
            relu(&mut cur);
        }
        pre.push(z);
    }
    MlpTrace { inputs, pre }
}

fn mlp_eval(layers: &[Dense], x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for (l, layer) in layers.iter().enumerate() {
        cur = layer.forward(&cur);
        if l + 1 < layers.len() {
            relu(&mut cur);
        }
    }
    cur
}

/// Accumulates parameter gradients into `grads`; returns the gradient with
/// respect to the MLP input.
fn mlp_backward(layers: &[Dense], trace: &MlpTrace, d_out: &[f64], grads: &mut [Dense]) -> Vec<f64> {
    let mut d = d_out.to_vec();
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let input = &trace.inputs[l];
        let g = &mut grads[l];
        for (o, &dz) in d.iter().enumerate() {
            if dz == 0.0 {
                continue;
            }
            g.bias[o] += dz;
            let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (w, &x) in row.iter_mut().zip(input) {
                *w += dz * x;
            }
        }
        let mut d_in = vec![0.0; layer.inputs];
        for (o, &dz) in d.iter().enumerate() {
            if dz == 0.0 {
                continue;
            }
            let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (di, &w) in d_in.iter_mut().zip(row) {
                *di += dz * w;
            }
        }
        if l > 0 {
            for (di, &z) in d_in.iter_mut().zip(&trace.pre[l - 1]) {
                if z <= 0.0 {
                    *di = 0.0;
                }
            }
        }
        d = d_in;
    }
    d
}

/// Feature extractor. This is the only part of a trained model that is kept
/// for prototype construction and classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    pub layers: Vec<Dense>,
}

impl Backbone {
    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.inputs).unwrap_or(0)
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn extract_feature(&self, x: &Payload) -> Result<Vec<f64>> {
        check_input(&self.layers, x.values(), "backbone")?;
        Ok(mlp_eval(&self.layers, x.values()))
    }
}

/// Two affine layers with a rectifier in between.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    pub hidden: Dense,
    pub output: Dense,
}

impl ProjectionHead {
    fn layers(&self) -> [Dense; 2] {
        [self.hidden.clone(), self.output.clone()]
    }

    pub fn project(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.hidden.inputs {
            return Err(Error::ShapeMismatch(format!(
                "projection expects {} inputs, got {}",
                self.hidden.inputs,
                f.len()
            )));
        }
        let mut h = self.hidden.forward(f);
        relu(&mut h);
        Ok(self.output.forward(&h))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub backbone: Backbone,
    pub projection: Option<ProjectionHead>,
    /// One row per training label, including synthetic pair labels.
    pub classifier: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionConfig {
    pub hidden: usize,
    pub output: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// Widths of the hidden backbone layers.
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub projection: Option<ProjectionConfig>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let zero = self.input_dim == 0
            || self.embedding_dim == 0
            || self.hidden.contains(&0)
            || self
                .projection
                .as_ref()
                .is_some_and(|p| p.hidden == 0 || p.output == 0);
        if zero {
            return Err(Error::InvalidTrainConfig("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.projection.as_ref().map_or(self.embedding_dim, |p| p.output)
    }
}

impl ModelParams {
    pub fn init(cfg: &ModelConfig, labels: usize, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let mut widths = vec![cfg.input_dim];
        widths.extend(&cfg.hidden);
        widths.push(cfg.embedding_dim);
        let layers = widths
            .windows(2)
            .map(|w| Dense::init(w[0], w[1], rng))
            .collect();
        let projection = cfg.projection.as_ref().map(|p| ProjectionHead {
            hidden: Dense::init(cfg.embedding_dim, p.hidden, rng),
            output: Dense::init(p.hidden, p.output, rng),
        });
        let dim = cfg.head_dim();
        let bound = 1.0 / (dim as f64).sqrt();
        let classifier = (0..labels)
            .map(|_| (0..dim).map(|_| rng.uniform(-bound, bound).expect("bound > 0")).collect())
            .collect();
        Ok(Self {
            backbone: Backbone { layers },
            projection,
            classifier,
        })
    }

    /// Same shapes, all zeros. Used for gradients and momentum buffers.
    pub fn zeros_like(&self) -> Self {
        let zero = |d: &Dense| Dense::zeros(d.inputs, d.outputs);
        Self {
            backbone: Backbone {
                layers: self.backbone.layers.iter().map(zero).collect(),
            },
            projection: self.projection.as_ref().map(|p| ProjectionHead {
                hidden: zero(&p.hidden),
                output: zero(&p.output),
            }),
            classifier: self.classifier.iter().map(|r| vec![0.0; r.len()]).collect(),
        }
    }

    pub fn extract_feature(&self, x: &Payload) -> Result<Vec<f64>> {
        self.backbone.extract_feature(x)
    }

    pub fn project(&self, f: &[f64]) -> Result<Vec<f64>> {
        match &self.projection {
            Some(head) => head.project(f),
            None => Err(Error::ShapeMismatch("model has no projection head".into())),
        }
    }

    /// Drops the projection head and classifier.
    pub fn into_backbone(self) -> Backbone {
        self.backbone
    }

    /// Every parameter tensor in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for d in &self.backbone.layers {
            out.push(&d.weights);
            out.push(&d.bias);
        }
        if let Some(p) = &self.projection {
            out.extend([&p.hidden.weights[..], &p.hidden.bias[..], &p.output.weights[..], &p.output.bias[..]]);
        }
        out.extend(self.classifier.iter().map(|r| &r[..]));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for d in &mut self.backbone.layers {
            out.push(&mut d.weights);
            out.push(&mut d.bias);
        }
        if let Some(p) = &mut self.projection {
            out.push(&mut p.hidden.weights);
            out.push(&mut p.hidden.bias);
            out.push(&mut p.output.weights);
            out.push(&mut p.output.bias);
        }
        out.extend(self.classifier.iter_mut().map(|r| &mut r[..]));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
    }

    fn head_forward(&self, f: &[f64]) -> Option<MlpTrace> {
        self.projection.as_ref().map(|p| mlp_forward(&p.layers(), f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub loss: LossConfig,
    /// Synthesize pair-mixed classes during training.
    pub class_aug: bool,
    pub mix_fraction: f64,
    /// Average the loss over two augmented views of each input.
    pub two_view: bool,
    pub views: ViewTransformSpec,
    pub model: ModelConfig,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTrainConfig(m));
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.mix_fraction) {
            return bad(format!("mix_fraction must lie in [0, 1], got {}", self.mix_fraction));
        }
        self.loss.validate()?;
        self.views.validate()?;
        self.model.validate()
    }
}

/// Loss of a batch and its exact gradient for every parameter.
///
/// Each sample gets two views (identical when `two_view` is off); the loss is
/// the mean of the two per-view batch losses, computed on projected features
/// when the model has a projection head.
pub fn forward_loss(
    params: &ModelParams,
    batch: &[Sample],
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let labels = params.classifier.len();
    if let Some(s) = batch.iter().find(|s| s.label >= labels) {
        return Err(Error::BadTarget {
            target: s.label,
            classes: labels,
        });
    }
    let views: Vec<Vec<Payload>> = if cfg.two_view {
        let mut a = Vec::with_capacity(batch.len());
        let mut b = Vec::with_capacity(batch.len());
        for s in batch {
            let (x, y) = two_view(&s.payload, &cfg.views, rng)?;
            a.push(x);
            b.push(y);
        }
        vec![a, b]
    } else {
        vec![batch.iter().map(|s| s.payload.clone()).collect()]
    };
    let targets: Vec<usize> = batch.iter().map(|s| s.label).collect();
    let weight = 1.0 / views.len() as f64;

    let mut grads = params.zeros_like();
    let mut total = 0.0;
    for view in &views {
        let mut traces = Vec::with_capacity(view.len());
        let mut heads = Vec::with_capacity(view.len());
        let mut outputs = Vec::with_capacity(view.len());
        for x in view {
            check_input(&params.backbone.layers, x.values(), "backbone")?;
            let t = mlp_forward(&params.backbone.layers, x.values());
            let h = params.head_forward(t.output());
            outputs.push(match &h {
                Some(h) => h.output().to_vec(),
                None => t.output().to_vec(),
            });
            traces.push(t);
            heads.push(h);
        }
        let g = batch_loss_grad(&outputs, &targets, &params.classifier, &cfg.loss)?;
        total += weight * g.loss;
        for (row, d) in grads.classifier.iter_mut().zip(&g.d_weights) {
            for (a, b) in row.iter_mut().zip(d) {
                *a += weight * b;
            }
        }
        for ((t, h), d_out) in traces.iter().zip(&heads).zip(&g.d_features) {
            let d_out: Vec<f64> = d_out.iter().map(|v| v * weight).collect();
            let d_feat = match (h, &params.projection, &mut grads.projection) {
                (Some(h), Some(p), Some(gp)) => {
                    let mut pg = [gp.hidden.clone(), gp.output.clone()];
                    let d = mlp_backward(&p.layers(), h, &d_out, &mut pg);
                    let [gh, go] = pg;
                    gp.hidden = gh;
                    gp.output = go;
                    d
                }
                _ => d_out,
            };
            mlp_backward(&params.backbone.layers, t, &d_feat, &mut grads.backbone.layers);
        }
    }
    Ok((total, grads))
}

/// `v <- momentum * v + g; p <- p - lr * v`.
pub fn sgd_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    velocity: &mut ModelParams,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(velocity) {
        return Err(Error::ShapeMismatch("parameter, gradient and velocity shapes differ".into()));
    }
    let g = grads.tensors();
    for ((p, v), g) in params.tensors_mut().into_iter().zip(velocity.tensors_mut()).zip(g) {
        for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
            *v = momentum * *v + g;
            *p -= lr * *v;
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    /// Mean step loss of every epoch, in order.
    pub epoch_losses: Vec<f64>,
}

/// Trains on base-session data with labels `0..C`.
pub fn train_base(data: &[Sample], cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    let classes = class_count(data);
    let groups = group_by_label(data);
    let present = groups.iter().filter(|g| !g.is_empty()).count();
    if present < 2 {
        return Err(Error::InsufficientClasses {
            needed: 2,
            found: present,
        });
    }
    if present != classes {
        let missing = groups.iter().position(|g| g.is_empty()).unwrap_or(0);
        return Err(Error::NonContiguousLabels { missing });
    }
    let space = AugmentedLabelSpace::new(classes);
    check_base_labels(data, &space)?;
    let labels = if cfg.class_aug { space.total() } else { classes };

    let root = Rng::new(cfg.seed);
    let mut params = ModelParams::init(&cfg.model, labels, &mut root.fork(0))?;
    let mut velocity = params.zeros_like();
    let mut rng = root.fork(1);

    let n_mix = if cfg.class_aug {
        (cfg.mix_fraction * cfg.batch_size as f64).floor() as usize
    } else {
        0
    };
    let n_real = cfg.batch_size - n_mix;
    let steps = data.len().div_ceil(if n_real > 0 { n_real } else { cfg.batch_size });

    let mut next_id = 0u64;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        rng.shuffle(&mut order);
        let mut epoch_total = 0.0;
        for step in 0..steps {
            let mut batch: Vec<Sample> = if n_real > 0 {
                let end = ((step + 1) * n_real).min(order.len());
                order[step * n_real..end].iter().map(|&i| data[i].clone()).collect()
            } else {
                Vec::new()
            };
            batch.extend(draw_mixed(data, &groups, &space, n_mix, &mut next_id, &mut rng)?);
            let (loss, grads) = forward_loss(&params, &batch, cfg, &mut rng)?;
            sgd_step(&mut params, &grads, &mut velocity, cfg.learning_rate, cfg.momentum)?;
            epoch_total += loss;
        }
        epoch_losses.push(epoch_total / steps as f64);
    }
    Ok(TrainedModel {
        params,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{cosine_similarity, norm};

    fn toy_config() -> TrainConfig {
        TrainConfig {
            epochs: 1,
            batch_size: 4,
            learning_rate: 0.05,
            momentum: 0.9,
            loss: LossConfig::default(),
            class_aug: false,
            mix_fraction: 0.5,
            two_view: true,
            views: ViewTransformSpec::default(),
            model: ModelConfig {
                input_dim: 4,
                hidden: vec![6],
                embedding_dim: 5,
                projection: Some(ProjectionConfig { hidden: 8, output: 4 }),
            },
            seed: 1,
        }
    }

    fn toy_batch(rng: &mut Rng, n: usize, classes: usize, dim: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| Sample::vector(i as u64, i % classes, (0..dim).map(|_| rng.normal()).collect()))
            .collect()
    }

    #[test]
    fn feature_shapes_and_determinism() {
        let cfg = toy_config();
        let p = ModelParams::init(&cfg.model, 3, &mut Rng::new(0)).unwrap();
        let x = Payload::Vector(vec![0.1, 0.2, -0.3, 0.4]);
        let f = p.extract_feature(&x).unwrap();
        assert_eq!(f.len(), 5);
        assert_eq!(f, p.extract_feature(&x).unwrap());
        assert_eq!(p.project(&f).unwrap().len(), 4);
        assert!(matches!(
            p.extract_feature(&Payload::Vector(vec![1.0])),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(p.project(&[1.0]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn zero_linear_extractor_gives_zero_feature() {
        let b = Backbone { layers: vec![Dense::zeros(3, 2)] };
        assert_eq!(b.extract_feature(&Payload::Vector(vec![1.0, 2.0, 3.0])).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn rectifier_blocks_negative_hidden_units() {
        let mut hidden = Dense::zeros(2, 3);
        hidden.bias = vec![-1.0, -2.0, -0.5];
        let mut output = Dense::init(3, 2, &mut Rng::new(3));
        output.bias = vec![0.25, -0.75];
        let head = ProjectionHead { hidden, output };
        assert_eq!(head.project(&[5.0, -5.0]).unwrap(), vec![0.25, -0.75]);
    }

    /// Reference loss for finite differences: the same two views, evaluated
    /// with no backward pass.
    fn loss_only(params: &ModelParams, batch: &[Sample], cfg: &TrainConfig, seed: u64) -> f64 {
        forward_loss(params, batch, cfg, &mut Rng::new(seed)).unwrap().0
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = toy_config();
        let mut rng = Rng::new(21);
        let params = ModelParams::init(&cfg.model, 3, &mut rng).unwrap();
        assert!(params.parameter_count() <= 500);
        let batch = toy_batch(&mut rng, 4, 3, 4);
        let (_, grads) = forward_loss(&params, &batch, &cfg, &mut Rng::new(99)).unwrap();

        let h = 1e-5;
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        let count = params.tensors().len();
        for t in 0..count {
            let len = params.tensors()[t].len();
            for k in 0..len {
                let mut up = params.clone();
                up.tensors_mut()[t][k] += h;
                let mut dn = params.clone();
                dn.tensors_mut()[t][k] -= h;
                numeric.push((loss_only(&up, &batch, &cfg, 99) - loss_only(&dn, &batch, &cfg, 99)) / (2.0 * h));
                analytic.push(grads.tensors()[t][k]);
            }
        }
        let err = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let rel = err / norm(&analytic).max(norm(&numeric));
        assert!(rel < 1e-4, "relative gradient error {rel}");
    }

    #[test]
    fn disabled_views_reduce_to_single_batch_loss() {
        let mut cfg = toy_config();
        cfg.views = ViewTransformSpec::Identity;
        let mut rng = Rng::new(2);
        let params = ModelParams::init(&cfg.model, 3, &mut rng).unwrap();
        let batch = toy_batch(&mut rng, 5, 3, 4);
        let (two, _) = forward_loss(&params, &batch, &cfg, &mut Rng::new(0)).unwrap();
        let feats: Vec<Vec<f64>> = batch
            .iter()
            .map(|s| params.project(&params.extract_feature(&s.payload).unwrap()).unwrap())
            .collect();
        let targets: Vec<usize> = batch.iter().map(|s| s.label).collect();
        let single = crate::loss::batch_loss(&feats, &targets, &params.classifier, &cfg.loss).unwrap();
        assert!((two - single).abs() < 1e-12);
        cfg.two_view = false;
        let (one, _) = forward_loss(&params, &batch, &cfg, &mut Rng::new(0)).unwrap();
        assert!((one - single).abs() < 1e-12);
    }

    #[test]
    fn single_class_without_margin_has_no_signal() {
        let mut cfg = toy_config();
        cfg.loss.margin = 0.0;
        let mut rng = Rng::new(4);
        let params = ModelParams::init(&cfg.model, 1, &mut rng).unwrap();
        let batch = toy_batch(&mut rng, 4, 1, 4);
        let (loss, grads) = forward_loss(&params, &batch, &cfg, &mut rng).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.tensors().iter().all(|t| t.iter().all(|&g| g == 0.0)));
    }

    #[test]
    fn forward_loss_errors() {
        let cfg = toy_config();
        let params = ModelParams::init(&cfg.model, 2, &mut Rng::new(0)).unwrap();
        assert_eq!(forward_loss(&params, &[], &cfg, &mut Rng::new(0)).unwrap_err(), Error::EmptyBatch);
        let bad = vec![Sample::vector(0, 2, vec![0.0; 4])];
        assert!(matches!(
            forward_loss(&params, &bad, &cfg, &mut Rng::new(0)),
            Err(Error::BadTarget { .. })
        ));
    }

    fn constant_grads(params: &ModelParams, value: f64) -> ModelParams {
        let mut g = params.zeros_like();
        for t in g.tensors_mut() {
            t.fill(value);
        }
        g
    }

    #[test]
    fn sgd_examples() {
        let cfg = toy_config();
        let start = ModelParams::init(&cfg.model, 2, &mut Rng::new(0)).unwrap();

        let mut p = start.clone();
        let mut v = p.zeros_like();
        sgd_step(&mut p, &start.zeros_like(), &mut v, 0.1, 0.9).unwrap();
        assert_eq!(p, start);

        let g = constant_grads(&start, 0.5);
        let mut p = start.clone();
        let mut v = p.zeros_like();
        sgd_step(&mut p, &g, &mut v, 0.1, 0.0).unwrap();
        for (a, b) in p.tensors().iter().zip(start.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - (y - 0.05)).abs() < 1e-15);
            }
        }

        let (lr, mu) = (0.1, 0.9);
        let mut p = start.clone();
        let mut v = p.zeros_like();
        sgd_step(&mut p, &g, &mut v, lr, mu).unwrap();
        sgd_step(&mut p, &g, &mut v, lr, mu).unwrap();
        for (a, b) in p.tensors().iter().zip(start.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y + lr * 0.5 * (2.0 + mu)).abs() < 1e-12);
            }
        }

        let other = ModelParams::init(&cfg.model, 3, &mut Rng::new(0)).unwrap();
        let mut p = start.clone();
        let mut v = p.zeros_like();
        assert!(matches!(
            sgd_step(&mut p, &other, &mut v, lr, mu),
            Err(Error::ShapeMismatch(_))
        ));
    }

    fn two_blobs(n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|i| {
                let label = i % 2;
                let c = if label == 0 { [2.0, 0.0] } else { [-2.0, 0.5] };
                Sample::vector(i as u64, label, vec![c[0] + 0.3 * rng.normal(), c[1] + 0.3 * rng.normal()])
            })
            .collect()
    }

    fn blob_config() -> TrainConfig {
        TrainConfig {
            epochs: 8,
            batch_size: 32,
            learning_rate: 0.02,
            momentum: 0.9,
            class_aug: true,
            model: ModelConfig {
                input_dim: 2,
                hidden: vec![16],
                embedding_dim: 8,
                projection: Some(ProjectionConfig { hidden: 16, output: 8 }),
            },
            ..toy_config()
        }
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let data = two_blobs(200, 5);
        let cfg = blob_config();
        let a = train_base(&data, &cfg).unwrap();
        assert_eq!(a.epoch_losses.len(), cfg.epochs);
        assert!(a.epoch_losses.last().unwrap() < a.epoch_losses.first().unwrap());
        // 2 classes + 1 synthetic pair label
        assert_eq!(a.params.classifier.len(), 3);
        let b = train_base(&data, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }

    #[test]
    fn training_needs_two_classes() {
        let data: Vec<Sample> = two_blobs(20, 1).into_iter().filter(|s| s.label == 0).collect();
        assert!(matches!(
            train_base(&data, &blob_config()),
            Err(Error::InsufficientClasses { .. })
        ));
    }

    #[test]
    fn trained_features_cluster_by_class() {
        let mut rng = Rng::new(77);
        let classes = 10;
        let dim = 16;
        let centers: Vec<Vec<f64>> = (0..classes).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
        let data: Vec<Sample> = (0..classes * 30)
            .map(|i| {
                let c = i % classes;
                Sample::vector(i as u64, c, centers[c].iter().map(|v| v + 0.4 * rng.normal()).collect())
            })
            .collect();
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 32,
            model: ModelConfig {
                input_dim: dim,
                hidden: vec![32],
                embedding_dim: 16,
                projection: Some(ProjectionConfig { hidden: 32, output: 16 }),
            },
            ..blob_config()
        };
        let trained = train_base(&data, &cfg).unwrap();
        let backbone = trained.params.into_backbone();
        let feats: Vec<Vec<f64>> = data.iter().map(|s| backbone.extract_feature(&s.payload).unwrap()).collect();
        let (mut intra, mut ni, mut inter, mut ne) = (0.0, 0, 0.0, 0);
        for i in 0..data.len() {
            for j in i + 1..data.len() {
                let c = cosine_similarity(&feats[i], &feats[j]).unwrap();
                if data[i].label == data[j].label {
                    intra += c;
                    ni += 1;
                } else {
                    inter += c;
                    ne += 1;
                }
            }
        }
        assert!(intra / ni as f64 > inter / ne as f64);
    }
}
