use super::kernels::{col2im, gemm_nn, gemm_nt, gemm_tn, im2col, out_extent, Window};
use super::tensor::{Scalar, Tensor};
use crate::error::{arg_err, shape_err, Error, Result};

/// Handle to a tensor recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    Train,
    Eval,
}

/// Exponential moving averages of per-channel batch statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Scalar> RunningStats<T> {
    /// Mean 0, variance 1: the state used by eval mode before any update.
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
        }
    }

    pub fn update(&mut self, batch: &BatchStats<T>, momentum: f64) {
        let m = T::of(momentum);
        let keep = T::one() - m;
        for c in 0..self.mean.len() {
            self.mean[c] = keep * self.mean[c] + m * batch.mean[c];
            self.var[c] = keep * self.var[c] + m * batch.unbiased_var[c];
        }
    }
}

/// Per-channel statistics of one training batch.
#[derive(Debug, Clone)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub unbiased_var: Vec<T>,
}

/// Probability clamp applied before taking logarithms in the BCE losses.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        geom: Window,
    },
    BatchNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        mean: Vec<T>,
        inv_std: Vec<T>,
        train: bool,
    },
    MaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    AvgPool {
        input: Var,
        geom: Window,
    },
    Relu {
        input: Var,
    },
    Sigmoid {
        input: Var,
    },
    Concat {
        inputs: Vec<Var>,
    },
    Reshape {
        input: Var,
    },
    Affine {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Sum {
        input: Var,
    },
    Bce {
        input: Var,
        targets: Vec<T>,
    },
    WeightedSum {
        a: Var,
        b: Var,
        wa: T,
        wb: T,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Record of executed primitives in execution order.
///
/// Each op appends one node whose inputs are earlier nodes, so the node list is
/// always a valid topological order and `backward` simply walks it in reverse.
#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The branch taken at every non-smooth op: relu masks and max-pool
    /// winners, in recording order. Two passes of the same op sequence with
    /// equal patterns lie on the same smooth piece of the function.
    pub fn branch_pattern(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu { input } => out.extend(
                    self.nodes[input.0]
                        .value
                        .data()
                        .iter()
                        .map(|&x| usize::from(x > T::zero())),
                ),
                Op::MaxPool { argmax, .. } => out.extend_from_slice(argmax),
                _ => {}
            }
        }
        out
    }

    /// Registers an input tensor. Gradients are tracked iff the tensor has
    /// `requires_grad` set.
    pub fn leaf(&mut self, tensor: Tensor<T>) -> Var {
        self.push(tensor, Op::Leaf)
    }

    /// Registers a tensor that never receives a gradient.
    pub fn constant(&mut self, mut tensor: Tensor<T>) -> Var {
        tensor.set_requires_grad(false);
        self.push(tensor, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].value.grad()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Vec<T>> {
        self.nodes[v.0].value.take_grad()
    }

    fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, shape: &[usize], data: Vec<T>, inputs: &[Var], op: Op<T>) -> Var {
        let mut value = Tensor::new(shape, data).expect("op produced consistent shape");
        value.set_requires_grad(inputs.iter().any(|&v| self.requires_grad(v)));
        self.push(value, op)
    }

    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let [n, c, h, w] = self.value(input).dims4()?;
        let [f, wc, kh, kw] = self.value(weight).dims4()?;
        if stride == 0 {
            return Err(arg_err!("conv2d stride must be positive"));
        }
        if wc != c {
            return Err(shape_err!(
                "conv2d weight expects {wc} input channels but input has {c}"
            ));
        }
        if let Some(b) = bias {
            if self.value(b).shape() != [f] {
                return Err(shape_err!(
                    "conv2d bias shape {:?} does not match {f} filters",
                    self.value(b).shape()
                ));
            }
        }
        let (Some(out_h), Some(out_w)) = (
            out_extent(h, kh, stride, padding),
            out_extent(w, kw, stride, padding),
        ) else {
            return Err(shape_err!(
                "conv2d kernel {kh}x{kw} exceeds padded input {}x{}",
                h + 2 * padding,
                w + 2 * padding
            ));
        };
        let geom = Window {
            channels: c,
            height: h,
            width: w,
            kh,
            kw,
            stride,
            padding,
            out_h,
            out_w,
        };
        let (rows, cols) = (geom.rows(), geom.cols());
        let x = self.value(input).data();
        let wt = self.value(weight).data();
        let mut out = vec![T::zero(); n * f * cols];
        let mut col = vec![T::zero(); if geom.is_pointwise() { 0 } else { rows * cols }];
        for s in 0..n {
            let image = &x[s * c * h * w..(s + 1) * c * h * w];
            let patches: &[T] = if geom.is_pointwise() {
                image
            } else {
                im2col(image, &geom, &mut col);
                &col
            };
            gemm_nn(f, cols, rows, wt, patches, &mut out[s * f * cols..(s + 1) * f * cols]);
        }
        if let Some(b) = bias {
            let bv = self.value(b).data();
            for s in 0..n {
                for (fi, &bf) in bv.iter().enumerate() {
                    let base = (s * f + fi) * cols;
                    out[base..base + cols].iter_mut().for_each(|o| *o += bf);
                }
            }
        }
        let mut inputs = vec![input, weight];
        inputs.extend(bias);
        Ok(self.push_op(
            &[n, f, out_h, out_w],
            out,
            &inputs,
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
            },
        ))
    }

    fn check_norm_params(&self, input: Var, gamma: Var, beta: Var) -> Result<[usize; 4]> {
        let dims = self.value(input).dims4()?;
        let c = dims[1];
        if self.value(gamma).shape() != [c] || self.value(beta).shape() != [c] {
            return Err(shape_err!(
                "batchnorm parameters must have shape [{c}], got {:?} and {:?}",
                self.value(gamma).shape(),
                self.value(beta).shape()
            ));
        }
        Ok(dims)
    }

    /// Batch normalization with per-channel batch statistics. Returns the
    /// statistics so the caller can fold them into its running averages.
    pub fn batchnorm2d_train(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    ) -> Result<(Var, BatchStats<T>)> {
        if eps <= 0.0 {
            return Err(arg_err!("batchnorm eps must be positive"));
        }
        let [n, c, h, w] = self.check_norm_params(input, gamma, beta)?;
        let hw = h * w;
        let count = n * hw;
        let x = self.value(input).data();
        let mut mean = vec![T::zero(); c];
        let mut var = vec![T::zero(); c];
        for ch in 0..c {
            let mut sum = T::zero();
            for s in 0..n {
                let base = (s * c + ch) * hw;
                sum += x[base..base + hw].iter().copied().sum::<T>();
            }
            let mu = sum / T::of(count as f64);
            let mut sq = T::zero();
            for s in 0..n {
                let base = (s * c + ch) * hw;
                for &v in &x[base..base + hw] {
                    sq += (v - mu) * (v - mu);
                }
            }
            mean[ch] = mu;
            var[ch] = sq / T::of(count as f64);
        }
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + T::of(eps)).sqrt()).collect();
        let out = self.normalize(input, gamma, beta, &mean, &inv_std, [n, c, h, w]);
        let unbiased_var = if count > 1 {
            let scale = T::of(count as f64 / (count - 1) as f64);
            var.iter().map(|&v| v * scale).collect()
        } else {
            var.clone()
        };
        let stats = BatchStats {
            mean: mean.clone(),
            unbiased_var,
        };
        let v = self.push_op(
            &[n, c, h, w],
            out,
            &[input, gamma, beta],
            Op::BatchNorm {
                input,
                gamma,
                beta,
                mean,
                inv_std,
                train: true,
            },
        );
        Ok((v, stats))
    }

    /// Batch normalization with frozen running statistics.
    pub fn batchnorm2d_eval(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        stats: &RunningStats<T>,
        eps: f64,
    ) -> Result<Var> {
        if eps <= 0.0 {
            return Err(arg_err!("batchnorm eps must be positive"));
        }
        let dims = self.check_norm_params(input, gamma, beta)?;
        if stats.mean.len() != dims[1] || stats.var.len() != dims[1] {
            return Err(shape_err!("running statistics do not match {} channels", dims[1]));
        }
        let mean = stats.mean.clone();
        let inv_std: Vec<T> = stats
            .var
            .iter()
            .map(|&v| T::one() / (v + T::of(eps)).sqrt())
            .collect();
        let out = self.normalize(input, gamma, beta, &mean, &inv_std, dims);
        Ok(self.push_op(
            &dims,
            out,
            &[input, gamma, beta],
            Op::BatchNorm {
                input,
                gamma,
                beta,
                mean,
                inv_std,
                train: false,
            },
        ))
    }

    /// Batch normalization that also maintains `stats`: train mode normalizes
    /// with batch statistics and updates the moving averages, eval mode
    /// normalizes with `stats` as they are.
    #[allow(clippy::too_many_arguments)]
    pub fn batchnorm2d(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        stats: &mut RunningStats<T>,
        mode: NormMode,
        eps: f64,
        momentum: f64,
    ) -> Result<Var> {
        match mode {
            NormMode::Train => {
                let (v, batch) = self.batchnorm2d_train(input, gamma, beta, eps)?;
                stats.update(&batch, momentum);
                Ok(v)
            }
            NormMode::Eval => self.batchnorm2d_eval(input, gamma, beta, stats, eps),
        }
    }

    fn normalize(
        &self,
        input: Var,
        gamma: Var,
        beta: Var,
        mean: &[T],
        inv_std: &[T],
        [n, c, h, w]: [usize; 4],
    ) -> Vec<T> {
        let hw = h * w;
        let x = self.value(input).data();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut out = vec![T::zero(); x.len()];
        for s in 0..n {
            for ch in 0..c {
                let base = (s * c + ch) * hw;
                let scale = g[ch] * inv_std[ch];
                for i in base..base + hw {
                    out[i] = (x[i] - mean[ch]) * scale + b[ch];
                }
            }
        }
        out
    }

    pub fn pool2d(
        &mut self,
        input: Var,
        kind: PoolKind,
        k: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let [n, c, h, w] = self.value(input).dims4()?;
        if k == 0 || stride == 0 {
            return Err(arg_err!("pool window and stride must be positive"));
        }
        if padding >= k {
            return Err(arg_err!("pool padding {padding} must be smaller than window {k}"));
        }
        let (Some(out_h), Some(out_w)) = (
            out_extent(h, k, stride, padding),
            out_extent(w, k, stride, padding),
        ) else {
            return Err(shape_err!(
                "pool window {k} exceeds padded input {}x{}",
                h + 2 * padding,
                w + 2 * padding
            ));
        };
        let geom = Window {
            channels: 1,
            height: h,
            width: w,
            kh: k,
            kw: k,
            stride,
            padding,
            out_h,
            out_w,
        };
        let x = self.value(input).data();
        let planes = n * c;
        let mut out = vec![T::zero(); planes * out_h * out_w];
        let mut argmax = Vec::new();
        if kind == PoolKind::Max {
            argmax.resize(out.len(), 0);
        }
        let inv_area = T::one() / T::of((k * k) as f64);
        for p in 0..planes {
            let plane = &x[p * h * w..(p + 1) * h * w];
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let o = (p * out_h + oy) * out_w + ox;
                    let mut best = T::neg_infinity();
                    let mut best_at = 0;
                    let mut sum = T::zero();
                    for ky in 0..k {
                        let y = (oy * stride + ky) as isize - padding as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let xx = (ox * stride + kx) as isize - padding as isize;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let idx = y as usize * w + xx as usize;
                            let v = plane[idx];
                            sum += v;
                            // strict comparison keeps the first maximum in scan order
                            if v > best {
                                best = v;
                                best_at = p * h * w + idx;
                            }
                        }
                    }
                    match kind {
                        PoolKind::Max => {
                            out[o] = best;
                            argmax[o] = best_at;
                        }
                        PoolKind::Avg => out[o] = sum * inv_area,
                    }
                }
            }
        }
        let op = match kind {
            PoolKind::Max => Op::MaxPool { input, argmax },
            PoolKind::Avg => Op::AvgPool { input, geom },
        };
        Ok(self.push_op(&[n, c, out_h, out_w], out, &[input], op))
    }

    pub fn activation(&mut self, input: Var, kind: Activation) -> Var {
        match kind {
            Activation::Relu => self.relu(input),
            Activation::Sigmoid => self.sigmoid(input),
        }
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let shape = x.shape().to_vec();
        let out = x.data().iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
        self.push_op(&shape, out, &[input], Op::Relu { input })
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let shape = x.shape().to_vec();
        let out = x.data().iter().map(|&v| sigmoid(v)).collect();
        self.push_op(&shape, out, &[input], Op::Sigmoid { input })
    }

    pub fn concat_channels(&mut self, inputs: &[Var]) -> Result<Var> {
        let Some(&first) = inputs.first() else {
            return Err(arg_err!("concat needs at least one input"));
        };
        let [n, _, h, w] = self.value(first).dims4()?;
        let mut total = 0;
        for &v in inputs {
            let [vn, vc, vh, vw] = self.value(v).dims4()?;
            if (vn, vh, vw) != (n, h, w) {
                return Err(shape_err!(
                    "concat inputs disagree: [{n}, _, {h}, {w}] vs [{vn}, _, {vh}, {vw}]"
                ));
            }
            total += vc;
        }
        let hw = h * w;
        let mut out = Vec::with_capacity(n * total * hw);
        for s in 0..n {
            for &v in inputs {
                let t = self.value(v);
                let c = t.shape()[1];
                out.extend_from_slice(&t.data()[s * c * hw..(s + 1) * c * hw]);
            }
        }
        Ok(self.push_op(
            &[n, total, h, w],
            out,
            inputs,
            Op::Concat {
                inputs: inputs.to_vec(),
            },
        ))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let x = self.value(input);
        let numel: usize = shape.iter().product();
        if numel != x.numel() {
            return Err(shape_err!(
                "cannot reshape {:?} into {shape:?}",
                x.shape()
            ));
        }
        let out = x.data().to_vec();
        Ok(self.push_op(shape, out, &[input], Op::Reshape { input }))
    }

    /// Flattens everything after the batch dimension.
    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let shape = self.value(input).shape();
        let n = shape[0];
        let rest = shape[1..].iter().product::<usize>();
        self.reshape(input, &[n, rest])
    }

    /// `input[N,D] · weight[D,M] + bias[M]`
    pub fn affine(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (xs, ws, bs) = (
            self.value(input).shape(),
            self.value(weight).shape(),
            self.value(bias).shape(),
        );
        let ([n, d], [wd, m]) = (xs, ws) else {
            return Err(shape_err!("affine expects 2-D input and weight, got {xs:?} and {ws:?}"));
        };
        let (n, d, m) = (*n, *d, *m);
        if *wd != d {
            return Err(shape_err!("affine inner dimensions disagree: {d} vs {wd}"));
        }
        if bs != [m] {
            return Err(shape_err!("affine bias shape {bs:?} does not match [{m}]"));
        }
        let mut out = vec![T::zero(); n * m];
        gemm_nn(n, m, d, self.value(input).data(), self.value(weight).data(), &mut out);
        let b = self.value(bias).data();
        for row in out.chunks_mut(m) {
            row.iter_mut().zip(b).for_each(|(o, &bv)| *o += bv);
        }
        Ok(self.push_op(&[n, m], out, &[input, weight, bias], Op::Affine { input, weight, bias }))
    }

    /// Elementwise product of two same-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err!("mul shapes differ: {:?} vs {:?}", ta.shape(), tb.shape()));
        }
        let shape = ta.shape().to_vec();
        let out = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x * y).collect();
        Ok(self.push_op(&shape, out, &[a, b], Op::Mul { a, b }))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let s = self.value(input).sum();
        self.push_op(&[1], vec![s], &[input], Op::Sum { input })
    }

    /// Mean binary cross-entropy of probabilities `input` against per-element
    /// `targets`; probabilities are clamped to `[1e-7, 1 - 1e-7]`.
    pub fn bce(&mut self, input: Var, targets: Vec<T>) -> Result<Var> {
        let p = self.value(input);
        if targets.len() != p.numel() {
            return Err(shape_err!(
                "bce got {} targets for {} predictions",
                targets.len(),
                p.numel()
            ));
        }
        let loss = bce_mean(p.data(), &targets);
        Ok(self.push_op(&[1], vec![loss], &[input], Op::Bce { input, targets }))
    }

    /// Pixel-wise BCE for a `[N, 1, h, w]` map: every cell of sample `i` is
    /// supervised with `labels[i]`, averaged over all cells.
    pub fn pixelwise_bce(&mut self, map: Var, labels: &[T]) -> Result<Var> {
        let shape = self.value(map).shape();
        if shape.first() != Some(&labels.len()) {
            return Err(shape_err!(
                "pixel-wise bce got {} labels for map of shape {shape:?}",
                labels.len()
            ));
        }
        let per_sample = shape[1..].iter().product::<usize>();
        let targets = labels
            .iter()
            .flat_map(|&y| std::iter::repeat_n(y, per_sample))
            .collect();
        self.bce(map, targets)
    }

    /// Binary-output BCE for a `[N, 1]` prediction, averaged over the batch.
    pub fn binary_bce(&mut self, pred: Var, labels: &[T]) -> Result<Var> {
        if self.value(pred).shape() != [labels.len(), 1] {
            return Err(shape_err!(
                "binary bce expects shape [{}, 1], got {:?}",
                labels.len(),
                self.value(pred).shape()
            ));
        }
        self.bce(pred, labels.to_vec())
    }

    /// `λ·pixel + (1−λ)·binary` for scalar losses.
    pub fn combined_loss(&mut self, pixel: Var, binary: Var, lambda: f64) -> Result<Var> {
        check_lambda(lambda)?;
        self.weighted_sum(pixel, binary, T::of(lambda), T::one() - T::of(lambda))
    }

    fn weighted_sum(&mut self, a: Var, b: Var, wa: T, wb: T) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.numel() != 1 || tb.numel() != 1 {
            return Err(shape_err!("weighted sum expects scalars"));
        }
        let v = wa * ta.data()[0] + wb * tb.data()[0];
        Ok(self.push_op(&[1], vec![v], &[a, b], Op::WeightedSum { a, b, wa, wb }))
    }

    /// Reverse sweep from a scalar `loss`. Gradients from any earlier sweep are
    /// discarded first, so every call reflects this sweep alone.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(shape_err!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            ));
        }
        for node in &mut self.nodes {
            node.value.set_grad(None);
        }
        if !self.requires_grad(loss) {
            return Ok(());
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads)?;
            self.nodes[i].value.set_grad(Some(g));
        }
        Ok(())
    }

    fn backprop_node(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) -> Result<()> {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
            } => self.conv2d_backward(*input, *weight, *bias, geom, g, grads),
            Op::BatchNorm {
                input,
                gamma,
                beta,
                mean,
                inv_std,
                train,
            } => {
                let [n, c, h, w] = self.value(*input).dims4()?;
                let hw = h * w;
                let count = T::of((n * hw) as f64);
                let x = self.value(*input).data();
                let gm = self.value(*gamma).data();
                let mut sum_dy = vec![T::zero(); c];
                let mut sum_dy_xhat = vec![T::zero(); c];
                for s in 0..n {
                    for ch in 0..c {
                        let base = (s * c + ch) * hw;
                        for j in base..base + hw {
                            let xhat = (x[j] - mean[ch]) * inv_std[ch];
                            sum_dy[ch] += g[j];
                            sum_dy_xhat[ch] += g[j] * xhat;
                        }
                    }
                }
                if let Some(dx) = self.slot(*input, grads) {
                    for s in 0..n {
                        for ch in 0..c {
                            let base = (s * c + ch) * hw;
                            let scale = gm[ch] * inv_std[ch];
                            for j in base..base + hw {
                                if *train {
                                    let xhat = (x[j] - mean[ch]) * inv_std[ch];
                                    dx[j] += scale / count
                                        * (count * g[j] - sum_dy[ch] - xhat * sum_dy_xhat[ch]);
                                } else {
                                    dx[j] += scale * g[j];
                                }
                            }
                        }
                    }
                }
                if let Some(dg) = self.slot(*gamma, grads) {
                    dg.iter_mut().zip(&sum_dy_xhat).for_each(|(d, &v)| *d += v);
                }
                if let Some(db) = self.slot(*beta, grads) {
                    db.iter_mut().zip(&sum_dy).for_each(|(d, &v)| *d += v);
                }
            }
            Op::MaxPool { input, argmax } => {
                if let Some(dx) = self.slot(*input, grads) {
                    for (o, &src) in argmax.iter().enumerate() {
                        dx[src] += g[o];
                    }
                }
            }
            Op::AvgPool { input, geom } => {
                let [n, c, h, w] = self.value(*input).dims4()?;
                if let Some(dx) = self.slot(*input, grads) {
                    let inv_area = T::one() / T::of((geom.kh * geom.kw) as f64);
                    let (oh, ow) = (geom.out_h, geom.out_w);
                    for p in 0..n * c {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let go = g[(p * oh + oy) * ow + ox] * inv_area;
                                for ky in 0..geom.kh {
                                    let y = (oy * geom.stride + ky) as isize - geom.padding as isize;
                                    if y < 0 || y >= h as isize {
                                        continue;
                                    }
                                    for kx in 0..geom.kw {
                                        let xx =
                                            (ox * geom.stride + kx) as isize - geom.padding as isize;
                                        if xx >= 0 && xx < w as isize {
                                            dx[p * h * w + y as usize * w + xx as usize] += go;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Op::Relu { input } => {
                let x = self.value(*input).data();
                if let Some(dx) = self.slot(*input, grads) {
                    for j in 0..g.len() {
                        if x[j] > T::zero() {
                            dx[j] += g[j];
                        }
                    }
                }
            }
            Op::Sigmoid { input } => {
                let p = node.value.data();
                if let Some(dx) = self.slot(*input, grads) {
                    for j in 0..g.len() {
                        dx[j] += g[j] * p[j] * (T::one() - p[j]);
                    }
                }
            }
            Op::Concat { inputs } => {
                let [n, total, h, w] = node.value.dims4()?;
                let hw = h * w;
                let mut offset = 0;
                for &v in inputs {
                    let c = self.value(v).shape()[1];
                    if let Some(dx) = self.slot(v, grads) {
                        for s in 0..n {
                            let src = &g[(s * total + offset) * hw..(s * total + offset + c) * hw];
                            dx[s * c * hw..(s + 1) * c * hw]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(d, &gv)| *d += gv);
                        }
                    }
                    offset += c;
                }
            }
            Op::Reshape { input } => {
                if let Some(dx) = self.slot(*input, grads) {
                    dx.iter_mut().zip(g).for_each(|(d, &gv)| *d += gv);
                }
            }
            Op::Affine {
                input,
                weight,
                bias,
            } => {
                let (n, d) = {
                    let s = self.value(*input).shape();
                    (s[0], s[1])
                };
                let m = self.value(*weight).shape()[1];
                let x = self.value(*input).data();
                let wt = self.value(*weight).data();
                if let Some(dx) = self.slot(*input, grads) {
                    gemm_nt(n, d, m, g, wt, dx);
                }
                if let Some(dw) = self.slot(*weight, grads) {
                    gemm_tn(d, m, n, x, g, dw);
                }
                if let Some(db) = self.slot(*bias, grads) {
                    for row in g.chunks(m) {
                        db.iter_mut().zip(row).for_each(|(d, &gv)| *d += gv);
                    }
                }
            }
            Op::Mul { a, b } => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                if let Some(da) = self.slot(*a, grads) {
                    for j in 0..g.len() {
                        da[j] += g[j] * vb[j];
                    }
                }
                if let Some(db) = self.slot(*b, grads) {
                    for j in 0..g.len() {
                        db[j] += g[j] * va[j];
                    }
                }
            }
            Op::Sum { input } => {
                if let Some(dx) = self.slot(*input, grads) {
                    dx.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Bce { input, targets } => {
                let p = self.value(*input).data();
                let lo = T::of(PROB_CLAMP);
                let hi = T::one() - lo;
                let scale = g[0] / T::of(p.len() as f64);
                if let Some(dx) = self.slot(*input, grads) {
                    for j in 0..p.len() {
                        // clamped predictions have zero derivative
                        if p[j] >= lo && p[j] <= hi {
                            let y = targets[j];
                            dx[j] += scale * ((T::one() - y) / (T::one() - p[j]) - y / p[j]);
                        }
                    }
                }
            }
            Op::WeightedSum { a, b, wa, wb } => {
                if let Some(da) = self.slot(*a, grads) {
                    da[0] += *wa * g[0];
                }
                if let Some(db) = self.slot(*b, grads) {
                    db[0] += *wb * g[0];
                }
            }
        }
        Ok(())
    }

    fn conv2d_backward(
        &self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        geom: &Window,
        g: &[T],
        grads: &mut [Option<Vec<T>>],
    ) {
        let n = self.value(input).shape()[0];
        let f = self.value(weight).shape()[0];
        let (rows, cols) = (geom.rows(), geom.cols());
        let image_len = geom.channels * geom.height * geom.width;
        let x = self.value(input).data();
        let wt = self.value(weight).data();

        if let Some(b) = bias {
            if let Some(db) = self.slot(b, grads) {
                for s in 0..n {
                    for (fi, d) in db.iter_mut().enumerate() {
                        let base = (s * f + fi) * cols;
                        *d += g[base..base + cols].iter().copied().sum::<T>();
                    }
                }
            }
        }
        if self.requires_grad(weight) {
            let mut col = vec![T::zero(); if geom.is_pointwise() { 0 } else { rows * cols }];
            let dw = self.slot(weight, grads).expect("weight requires grad");
            for s in 0..n {
                let image = &x[s * image_len..(s + 1) * image_len];
                let patches: &[T] = if geom.is_pointwise() {
                    image
                } else {
                    im2col(image, geom, &mut col);
                    &col
                };
                gemm_nt(f, rows, cols, &g[s * f * cols..(s + 1) * f * cols], patches, dw);
            }
        }
        if let Some(dx) = self.slot(input, grads) {
            let mut dcol = vec![T::zero(); if geom.is_pointwise() { 0 } else { rows * cols }];
            for s in 0..n {
                let gs = &g[s * f * cols..(s + 1) * f * cols];
                let dxs = &mut dx[s * image_len..(s + 1) * image_len];
                if geom.is_pointwise() {
                    gemm_tn(rows, cols, f, wt, gs, dxs);
                } else {
                    dcol.fill(T::zero());
                    gemm_tn(rows, cols, f, wt, gs, &mut dcol);
                    col2im(&dcol, geom, dxs);
                }
            }
        }
    }

    /// Gradient accumulator for `v`, allocated on first use; `None` when `v`
    /// does not take part in differentiation.
    fn slot<'g>(&self, v: Var, grads: &'g mut [Option<Vec<T>>]) -> Option<&'g mut Vec<T>> {
        if !self.requires_grad(v) {
            return None;
        }
        let numel = self.value(v).numel();
        Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); numel]))
    }
}

/// Logistic function kept strictly inside (0, 1) even where the floating
/// point result would round to an endpoint.
pub fn sigmoid<T: Scalar>(x: T) -> T {
    let p = if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    };
    let below_one = T::one() - T::epsilon() / T::of(2.0);
    p.max(T::min_positive_value()).min(below_one)
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "loss weight lambda must lie in [0, 1], got {lambda}"
        )));
    }
    Ok(())
}

pub(crate) fn bce_mean<T: Scalar>(p: &[T], targets: &[T]) -> T {
    let lo = T::of(PROB_CLAMP);
    let hi = T::one() - lo;
    let total: T = p
        .iter()
        .zip(targets)
        .map(|(&pi, &y)| {
            let pc = pi.max(lo).min(hi);
            -(y * pc.ln() + (T::one() - y) * (T::one() - pc).ln())
        })
        .sum();
    total / T::of(p.len() as f64)
}
