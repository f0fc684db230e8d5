//! Densely connected backbone with a pixel-wise map head and a binary head.
//!
//! ```text
//! input [N,3,H,W]
//!   stem:        conv7x7/2 -> norm -> relu -> maxpool3x3/2
//!   block1:      L1 dense layers (norm-relu-conv1x1-norm-relu-conv3x3, concatenated)
//!   transition1: norm -> conv1x1 (compression) -> avgpool2x2/2
//!   block2:      L2 dense layers
//!   transition2: norm -> conv1x1 (compression) -> avgpool2x2/2
//!   pixel head:  conv1x1 -> sigmoid            => map    [N,1,H/16,W/16]
//!   binary head: flatten(map) -> affine -> sigmoid => binary [N,1]
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::graph::{bce_mean, check_lambda};
use crate::autodiff::{BatchStats, Graph, NormMode, PoolKind, RunningStats, Scalar, Tensor, Var};
use crate::error::{shape_err, Error, Result};

/// Total spatial stride of the backbone.
pub const BACKBONE_STRIDE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// (height, width) in pixels.
    pub input_size: (usize, usize),
    pub stem_channels: usize,
    pub growth_rate: usize,
    pub block_layers: (usize, usize),
    pub compression: f64,
    pub bottleneck_factor: usize,
    /// Weight of the pixel-wise loss in the combined objective.
    pub lambda: f64,
    pub norm_eps: f64,
    pub norm_momentum: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ModelConfig {
    /// Full-size configuration: 224×224 input, 14×14×384 backbone output.
    pub fn full() -> Self {
        Self {
            input_size: (224, 224),
            stem_channels: 96,
            growth_rate: 48,
            block_layers: (6, 12),
            compression: 0.5,
            bottleneck_factor: 4,
            lambda: 0.5,
            norm_eps: 1e-5,
            norm_momentum: 0.1,
        }
    }

    /// Same topology at 64×64 with narrow layers, trainable on one CPU core.
    pub fn desk() -> Self {
        Self {
            input_size: (64, 64),
            stem_channels: 16,
            growth_rate: 8,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.input_size;
        if h == 0 || w == 0 || h % BACKBONE_STRIDE != 0 || w % BACKBONE_STRIDE != 0 {
            return Err(Error::Config(format!(
                "input size {h}x{w} must be a positive multiple of {BACKBONE_STRIDE}"
            )));
        }
        if self.stem_channels == 0 || self.growth_rate == 0 || self.bottleneck_factor == 0 {
            return Err(Error::Config(
                "stem channels, growth rate and bottleneck factor must be positive".into(),
            ));
        }
        if !(self.compression > 0.0 && self.compression <= 1.0) {
            return Err(Error::Config(format!(
                "compression must lie in (0, 1], got {}",
                self.compression
            )));
        }
        check_lambda(self.lambda).map_err(|e| Error::Config(e.to_string()))?;
        if self.norm_eps <= 0.0 || !(0.0..=1.0).contains(&self.norm_momentum) {
            return Err(Error::Config("norm eps must be > 0 and momentum in [0, 1]".into()));
        }
        let plan = self.channel_plan();
        if plan.transition_out.contains(&0) {
            return Err(Error::Config("compression leaves a transition with no channels".into()));
        }
        Ok(())
    }

    pub fn channel_plan(&self) -> ChannelPlan {
        let compress = |c: usize| (c as f64 * self.compression).floor() as usize;
        let b1_in = self.stem_channels;
        let b1_out = b1_in + self.block_layers.0 * self.growth_rate;
        let t1 = compress(b1_out);
        let b2_out = t1 + self.block_layers.1 * self.growth_rate;
        let t2 = compress(b2_out);
        ChannelPlan {
            block_in: [b1_in, t1],
            block_out: [b1_out, b2_out],
            transition_out: [t1, t2],
        }
    }

    pub fn backbone_channels(&self) -> usize {
        self.channel_plan().transition_out[1]
    }

    /// Spatial size of the pixel-wise map.
    pub fn map_size(&self) -> (usize, usize) {
        (
            self.input_size.0 / BACKBONE_STRIDE,
            self.input_size.1 / BACKBONE_STRIDE,
        )
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("input_height", self.input_size.0.to_string()),
            ("input_width", self.input_size.1.to_string()),
            ("stem_channels", self.stem_channels.to_string()),
            ("growth_rate", self.growth_rate.to_string()),
            ("block1_layers", self.block_layers.0.to_string()),
            ("block2_layers", self.block_layers.1.to_string()),
            ("compression", format!("{:?}", self.compression)),
            ("bottleneck_factor", self.bottleneck_factor.to_string()),
            ("lambda", format!("{:?}", self.lambda)),
            ("norm_eps", format!("{:?}", self.norm_eps)),
            ("norm_momentum", format!("{:?}", self.norm_momentum)),
        ]
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = Self::desk();
        for (key, value) in pairs {
            let bad = || Error::Config(format!("invalid value {value:?} for {key}"));
            let int = || value.parse::<usize>().map_err(|_| bad());
            let real = || value.parse::<f64>().map_err(|_| bad());
            match key {
                "input_height" => cfg.input_size.0 = int()?,
                "input_width" => cfg.input_size.1 = int()?,
                "stem_channels" => cfg.stem_channels = int()?,
                "growth_rate" => cfg.growth_rate = int()?,
                "block1_layers" => cfg.block_layers.0 = int()?,
                "block2_layers" => cfg.block_layers.1 = int()?,
                "compression" => cfg.compression = real()?,
                "bottleneck_factor" => cfg.bottleneck_factor = int()?,
                "lambda" => cfg.lambda = real()?,
                "norm_eps" => cfg.norm_eps = real()?,
                "norm_momentum" => cfg.norm_momentum = real()?,
                other => return Err(Error::Config(format!("unknown model key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Channel counts entering and leaving each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelPlan {
    pub block_in: [usize; 2],
    pub block_out: [usize; 2],
    pub transition_out: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub tensor: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormState<T> {
    pub name: String,
    pub stats: RunningStats<T>,
}

#[derive(Debug, Clone, Copy)]
struct NormRef {
    gamma: usize,
    beta: usize,
    stats: usize,
}

#[derive(Debug, Clone, Copy)]
struct ConvRef {
    weight: usize,
    bias: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct DenseLayerRef {
    norm1: NormRef,
    conv1: ConvRef,
    norm2: NormRef,
    conv2: ConvRef,
}

#[derive(Debug, Clone, Copy)]
struct TransitionRef {
    norm: NormRef,
    conv: ConvRef,
}

#[derive(Debug, Clone)]
struct Layout {
    stem_conv: ConvRef,
    stem_norm: NormRef,
    blocks: [Vec<DenseLayerRef>; 2],
    transitions: [TransitionRef; 2],
    pixel_head: ConvRef,
    binary_weight: usize,
    binary_bias: usize,
}

/// The assembled network: trainable parameters, normalization statistics and
/// the layout tying them together.
#[derive(Debug, Clone)]
pub struct Model<T> {
    config: ModelConfig,
    params: Vec<Param<T>>,
    norms: Vec<NormState<T>>,
    layout: Layout,
    mode: Mode,
}

struct Builder<T> {
    rng: ChaCha8Rng,
    params: Vec<Param<T>>,
    norms: Vec<NormState<T>>,
}

impl<T: Scalar> Builder<T> {
    fn push(&mut self, name: String, tensor: Tensor<T>) -> usize {
        self.params.push(Param { name, tensor });
        self.params.len() - 1
    }

    fn normal(&mut self, name: String, shape: &[usize], std: f64) -> usize {
        let dist = Normal::new(0.0, std).expect("finite std");
        let n: usize = shape.iter().product();
        let data: Vec<T> = (0..n).map(|_| T::of(dist.sample(&mut self.rng))).collect();
        let tensor = Tensor::new(shape, data).expect("positive extents");
        self.push(name, tensor)
    }

    fn conv(&mut self, prefix: &str, out: usize, inp: usize, k: usize, bias: bool) -> ConvRef {
        let fan_in = (inp * k * k) as f64;
        let weight = self.normal(format!("{prefix}.weight"), &[out, inp, k, k], (2.0 / fan_in).sqrt());
        let bias = bias.then(|| self.push(format!("{prefix}.bias"), Tensor::zeros(&[out])));
        ConvRef { weight, bias }
    }

    fn norm(&mut self, prefix: &str, channels: usize) -> NormRef {
        let gamma = self.push(format!("{prefix}.gamma"), Tensor::full(&[channels], T::one()));
        let beta = self.push(format!("{prefix}.beta"), Tensor::zeros(&[channels]));
        self.norms.push(NormState {
            name: prefix.to_string(),
            stats: RunningStats::new(channels),
        });
        NormRef {
            gamma,
            beta,
            stats: self.norms.len() - 1,
        }
    }
}

/// Options for an inspection forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardOptions {
    pub mode: Mode,
    /// Replace the output of dense layer `(block, layer)` (0-based) with zeros.
    pub ablate: Option<(usize, usize)>,
}

/// Everything recorded by one forward pass.
#[derive(Debug)]
pub struct ForwardPass<T> {
    pub graph: Graph<T>,
    /// Pixel-wise probability map `[N, 1, H/16, W/16]`.
    pub map: Var,
    /// Binary probability `[N, 1]`.
    pub binary: Var,
    /// Backbone output `[N, C, H/16, W/16]`.
    pub features: Var,
    /// Input of every dense layer, indexed `[block][layer]`.
    pub dense_inputs: [Vec<Var>; 2],
    param_vars: Vec<Var>,
}

#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub combined: Var,
    pub pixel: Var,
    pub binary: Var,
}

impl<T: Scalar> ForwardPass<T> {
    /// Pixel-wise, binary and combined losses for per-sample labels
    /// (1 = bonafide, 0 = attack).
    pub fn losses(&mut self, labels: &[T], lambda: f64) -> Result<LossTerms> {
        let pixel = self.graph.pixelwise_bce(self.map, labels)?;
        let binary = self.graph.binary_bce(self.binary, labels)?;
        let combined = self.graph.combined_loss(pixel, binary, lambda)?;
        Ok(LossTerms {
            combined,
            pixel,
            binary,
        })
    }

    pub fn scalar(&self, v: Var) -> T {
        self.graph.value(v).data()[0]
    }

    pub fn backward(&mut self, loss: Var) -> Result<()> {
        self.graph.backward(loss)
    }

    /// Parameter gradients in model parameter order; `None` for parameters the
    /// last sweep did not reach.
    pub fn take_param_grads(&mut self) -> Vec<Option<Vec<T>>> {
        let vars = self.param_vars.clone();
        vars.into_iter().map(|v| self.graph.take_grad(v)).collect()
    }

    /// Mean of each sample's map: the frame-level score, higher = bonafide.
    pub fn frame_scores(&self) -> Vec<T> {
        let map = self.graph.value(self.map);
        let per = map.numel() / map.shape()[0];
        map.data().chunks(per).map(frame_score).collect()
    }
}

impl<T: Scalar> Model<T> {
    /// Builds the network with seeded He-style initialization.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let plan = config.channel_plan();
        let mut b = Builder {
            rng: ChaCha8Rng::seed_from_u64(seed),
            params: Vec::new(),
            norms: Vec::new(),
        };
        let stem_conv = b.conv("stem.conv", config.stem_channels, 3, 7, false);
        let stem_norm = b.norm("stem.norm", config.stem_channels);
        let bottleneck = config.bottleneck_factor * config.growth_rate;
        let layer_counts = [config.block_layers.0, config.block_layers.1];
        let mut blocks: [Vec<DenseLayerRef>; 2] = [Vec::new(), Vec::new()];
        let mut transitions = Vec::new();
        for bi in 0..2 {
            let mut channels = plan.block_in[bi];
            for li in 0..layer_counts[bi] {
                let p = format!("block{}.layer{}", bi + 1, li + 1);
                let norm1 = b.norm(&format!("{p}.norm1"), channels);
                let conv1 = b.conv(&format!("{p}.conv1"), bottleneck, channels, 1, false);
                let norm2 = b.norm(&format!("{p}.norm2"), bottleneck);
                let conv2 = b.conv(&format!("{p}.conv2"), config.growth_rate, bottleneck, 3, false);
                blocks[bi].push(DenseLayerRef {
                    norm1,
                    conv1,
                    norm2,
                    conv2,
                });
                channels += config.growth_rate;
            }
            let p = format!("transition{}", bi + 1);
            let norm = b.norm(&format!("{p}.norm"), channels);
            let conv = b.conv(&format!("{p}.conv"), plan.transition_out[bi], channels, 1, false);
            transitions.push(TransitionRef { norm, conv });
        }
        let pixel_head = b.conv("pixel_head", 1, plan.transition_out[1], 1, true);
        let (mh, mw) = config.map_size();
        let fan_in = mh * mw;
        let binary_weight = b.normal(
            "binary_head.weight".into(),
            &[fan_in, 1],
            (1.0 / fan_in as f64).sqrt(),
        );
        let binary_bias = b.push("binary_head.bias".into(), Tensor::zeros(&[1]));
        let layout = Layout {
            stem_conv,
            stem_norm,
            blocks,
            transitions: [transitions[0], transitions[1]],
            pixel_head,
            binary_weight,
            binary_bias,
        };
        Ok(Self {
            config,
            params: b.params,
            norms: b.norms,
            layout,
            mode: Mode::Train,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn norms(&self) -> &[NormState<T>] {
        &self.norms
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    /// All persistent arrays: trainable parameters followed by normalization
    /// statistics (`<norm>.running_mean`, `<norm>.running_var`).
    pub fn named_arrays(&self) -> Vec<(String, Tensor<T>)> {
        let mut out: Vec<(String, Tensor<T>)> = self
            .params
            .iter()
            .map(|p| (p.name.clone(), p.tensor.clone()))
            .collect();
        for n in &self.norms {
            let c = n.stats.mean.len();
            out.push((
                format!("{}.running_mean", n.name),
                Tensor::new(&[c], n.stats.mean.clone()).expect("channels > 0"),
            ));
            out.push((
                format!("{}.running_var", n.name),
                Tensor::new(&[c], n.stats.var.clone()).expect("channels > 0"),
            ));
        }
        out
    }

    /// Overwrites every persistent array from `arrays`; names and shapes must
    /// match this model exactly.
    pub fn load_named_arrays(&mut self, arrays: &[(String, Tensor<T>)]) -> Result<()> {
        let expected = self.named_arrays();
        if expected.len() != arrays.len() {
            return Err(shape_err!(
                "model has {} arrays but {} were supplied",
                expected.len(),
                arrays.len()
            ));
        }
        for ((name, tensor), (got_name, got)) in expected.iter().zip(arrays) {
            if name != got_name || tensor.shape() != got.shape() {
                return Err(shape_err!(
                    "array mismatch: expected {name} {:?}, found {got_name} {:?}",
                    tensor.shape(),
                    got.shape()
                ));
            }
        }
        let np = self.params.len();
        for (p, (_, t)) in self.params.iter_mut().zip(arrays) {
            p.tensor = t.clone();
            p.tensor.set_requires_grad(false);
        }
        for (i, n) in self.norms.iter_mut().enumerate() {
            n.stats.mean = arrays[np + 2 * i].1.data().to_vec();
            n.stats.var = arrays[np + 2 * i + 1].1.data().to_vec();
        }
        Ok(())
    }

    /// Forward pass in the model's current mode. In train mode the
    /// normalization statistics are updated.
    pub fn forward(&mut self, batch: &Tensor<T>) -> Result<ForwardPass<T>> {
        let opts = ForwardOptions {
            mode: self.mode,
            ablate: None,
        };
        let (pass, stats) = self.run(batch, opts)?;
        if self.mode == Mode::Train {
            let momentum = self.config.norm_momentum;
            for (i, s) in stats {
                self.norms[i].stats.update(&s, momentum);
            }
        }
        Ok(pass)
    }

    /// Forward pass that never mutates the model, for frozen-model scoring
    /// and inspection.
    pub fn forward_with(&self, batch: &Tensor<T>, opts: ForwardOptions) -> Result<ForwardPass<T>> {
        self.run(batch, opts).map(|(pass, _)| pass)
    }

    /// Frame-level scores of a batch in eval mode.
    pub fn score(&self, batch: &Tensor<T>) -> Result<Vec<T>> {
        let opts = ForwardOptions {
            mode: Mode::Eval,
            ablate: None,
        };
        Ok(self.forward_with(batch, opts)?.frame_scores())
    }

    fn run(
        &self,
        batch: &Tensor<T>,
        opts: ForwardOptions,
    ) -> Result<(ForwardPass<T>, Vec<(usize, BatchStats<T>)>)> {
        let [n, c, h, w] = batch.dims4()?;
        if c != 3 || (h, w) != self.config.input_size {
            return Err(shape_err!(
                "model expects [N, 3, {}, {}] input, got {:?}",
                self.config.input_size.0,
                self.config.input_size.1,
                batch.shape()
            ));
        }
        let mut ctx = Ctx {
            graph: Graph::new(),
            param_vars: Vec::with_capacity(self.params.len()),
            batch_stats: Vec::new(),
            norms: &self.norms,
            mode: opts.mode,
            eps: self.config.norm_eps,
        };
        let track = opts.mode == Mode::Train;
        for p in &self.params {
            let mut t = p.tensor.clone();
            t.set_requires_grad(track);
            ctx.param_vars.push(ctx.graph.leaf(t));
        }
        let l = &self.layout;
        let x = ctx.graph.constant(batch.clone());
        let x = ctx.conv(x, l.stem_conv, 2, 3)?;
        let x = ctx.norm(x, l.stem_norm)?;
        let x = ctx.graph.relu(x);
        let mut x = ctx.graph.pool2d(x, PoolKind::Max, 3, 2, 1)?;

        let mut dense_inputs: [Vec<Var>; 2] = [Vec::new(), Vec::new()];
        for bi in 0..2 {
            for (li, layer) in l.blocks[bi].iter().enumerate() {
                dense_inputs[bi].push(x);
                let y = ctx.norm(x, layer.norm1)?;
                let y = ctx.graph.relu(y);
                let y = ctx.conv(y, layer.conv1, 1, 0)?;
                let y = ctx.norm(y, layer.norm2)?;
                let y = ctx.graph.relu(y);
                let mut y = ctx.conv(y, layer.conv2, 1, 1)?;
                if opts.ablate == Some((bi, li)) {
                    let shape = ctx.graph.value(y).shape().to_vec();
                    y = ctx.graph.constant(Tensor::zeros(&shape));
                }
                x = ctx.graph.concat_channels(&[x, y])?;
            }
            let t = l.transitions[bi];
            let y = ctx.norm(x, t.norm)?;
            let y = ctx.conv(y, t.conv, 1, 0)?;
            x = ctx.graph.pool2d(y, PoolKind::Avg, 2, 2, 0)?;
        }
        let features = x;
        let logits = ctx.conv(features, l.pixel_head, 1, 0)?;
        let map = ctx.graph.sigmoid(logits);
        let flat = ctx.graph.flatten(map)?;
        let wv = ctx.param_vars[l.binary_weight];
        let bv = ctx.param_vars[l.binary_bias];
        let logit = ctx.graph.affine(flat, wv, bv)?;
        let binary = ctx.graph.sigmoid(logit);
        debug_assert_eq!(ctx.graph.value(map).shape()[0], n);

        let pass = ForwardPass {
            graph: ctx.graph,
            map,
            binary,
            features,
            dense_inputs,
            param_vars: ctx.param_vars,
        };
        Ok((pass, ctx.batch_stats))
    }
}

struct Ctx<'m, T> {
    graph: Graph<T>,
    param_vars: Vec<Var>,
    batch_stats: Vec<(usize, BatchStats<T>)>,
    norms: &'m [NormState<T>],
    mode: Mode,
    eps: f64,
}

impl<T: Scalar> Ctx<'_, T> {
    fn conv(&mut self, x: Var, c: ConvRef, stride: usize, padding: usize) -> Result<Var> {
        let w = self.param_vars[c.weight];
        let b = c.bias.map(|i| self.param_vars[i]);
        self.graph.conv2d(x, w, b, stride, padding)
    }

    fn norm(&mut self, x: Var, n: NormRef) -> Result<Var> {
        let (g, b) = (self.param_vars[n.gamma], self.param_vars[n.beta]);
        match self.mode {
            Mode::Train => {
                let (y, stats) = self.graph.batchnorm2d_train(x, g, b, self.eps)?;
                self.batch_stats.push((n.stats, stats));
                Ok(y)
            }
            Mode::Eval => {
                self.graph
                    .batchnorm2d_eval(x, g, b, &self.norms[n.stats].stats, self.eps)
            }
        }
    }
}

impl From<Mode> for NormMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Train => NormMode::Train,
            Mode::Eval => NormMode::Eval,
        }
    }
}

/// Mean BCE of a predicted map against a single frame label `y`.
pub fn pixelwise_bce<T: Scalar>(map: &[T], y: T) -> T {
    let targets = vec![y; map.len()];
    bce_mean(map, &targets)
}

/// BCE of one predicted probability against label `y`.
pub fn binary_bce<T: Scalar>(p: T, y: T) -> T {
    bce_mean(&[p], &[y])
}

/// `λ·pixel + (1−λ)·binary`.
pub fn combined_loss<T: Scalar>(pixel: T, binary: T, lambda: f64) -> Result<T> {
    check_lambda(lambda)?;
    Ok(T::of(lambda) * pixel + (T::one() - T::of(lambda)) * binary)
}

/// Mean of a predicted map.
pub fn frame_score<T: Scalar>(map: &[T]) -> T {
    map.iter().copied().sum::<T>() / T::of(map.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            input_size: (32, 32),
            stem_channels: 4,
            growth_rate: 2,
            block_layers: (2, 3),
            bottleneck_factor: 2,
            ..ModelConfig::desk()
        }
    }

    #[test]
    fn full_config_channels() {
        let cfg = ModelConfig::full();
        assert_eq!(cfg.backbone_channels(), 384);
        assert_eq!(cfg.map_size(), (14, 14));
    }

    #[test]
    fn desk_config_channels() {
        let plan = ModelConfig::desk().channel_plan();
        assert_eq!(plan.block_out, [64, 128]);
        assert_eq!(plan.transition_out, [32, 64]);
        assert_eq!(ModelConfig::desk().map_size(), (4, 4));
    }

    #[test]
    fn rejects_indivisible_input() {
        let cfg = ModelConfig {
            input_size: (60, 64),
            ..ModelConfig::desk()
        };
        assert!(Model::<f32>::new(cfg, 0).is_err());
    }

    #[test]
    fn parameter_names_are_unique() {
        let m = Model::<f32>::new(ModelConfig::desk(), 1).unwrap();
        let names: Vec<String> = m.named_arrays().into_iter().map(|(n, _)| n).collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len());
        for expected in [
            "stem.conv.weight",
            "block1.layer1.conv1.weight",
            "block2.layer12.norm2.running_var",
            "transition2.conv.weight",
            "pixel_head.bias",
            "binary_head.weight",
        ] {
            assert!(names.iter().any(|n| n == expected), "missing {expected}");
        }
    }

    #[test]
    fn forward_shapes_and_ranges() {
        let mut m = Model::<f32>::new(tiny(), 3).unwrap();
        let x = Tensor::full(&[2, 3, 32, 32], 0.5f32);
        let pass = m.forward(&x).unwrap();
        assert_eq!(pass.graph.value(pass.map).shape(), &[2, 1, 2, 2]);
        assert_eq!(pass.graph.value(pass.binary).shape(), &[2, 1]);
        let bad = Tensor::full(&[1, 3, 16, 16], 0.5f32);
        assert!(m.forward(&bad).is_err());
    }

    #[test]
    fn load_rejects_foreign_arrays() {
        let mut a = Model::<f32>::new(tiny(), 1).unwrap();
        let b = Model::<f32>::new(ModelConfig::desk(), 1).unwrap();
        assert!(a.load_named_arrays(&b.named_arrays()).is_err());
        let own = a.named_arrays();
        a.load_named_arrays(&own).unwrap();
    }

    #[test]
    fn loss_helpers() {
        assert_eq!(pixelwise_bce(&[1.0f64; 4], 1.0).abs() < 1e-6, true);
        assert!((pixelwise_bce(&[0.5f64; 4], 1.0) - 2f64.ln()).abs() < 1e-12);
        assert!((binary_bce(0.9f64, 0.0) + 0.1f64.ln()).abs() < 1e-12);
        assert_eq!(combined_loss(0.2f64, 0.4, 1.0).unwrap(), 0.2);
        assert_eq!(combined_loss(0.2f64, 0.4, 0.0).unwrap(), 0.4);
        assert!(combined_loss(0.2f64, 0.4, -0.1).is_err());
        assert_eq!(frame_score(&[0.5f64; 16]), 0.5);
    }

    #[test]
    fn config_pairs_roundtrip() {
        let cfg = ModelConfig::full();
        let pairs = cfg.to_pairs();
        let back = ModelConfig::from_pairs(pairs.iter().map(|(k, v)| (*k, v.as_str()))).unwrap();
        assert_eq!(back, cfg);
        assert!(ModelConfig::from_pairs([("bogus", "1")]).is_err());
    }
}
