use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::arch::{NetArch, NetKind, ParamLayout, TrunkArch};
use crate::imagery::Image;
use crate::{Error, Result};

/// Flat parameters plus the architecture that gives them meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    arch: NetArch,
    layout: ParamLayout,
    params: Vec<f64>,
}

/// Intermediate values kept by a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    height: usize,
    width: usize,
    /// `acts[0]` is the input, `acts[i + 1]` the ReLU output of conv layer `i`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    pooled: Vec<f64>,
}

impl ForwardCache {
    /// Sign pattern of every ReLU; equal patterns mean the same linear region.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.pre.iter().flatten().map(|&v| v > 0.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradRequest {
    pub params: bool,
    pub input: bool,
}

impl GradRequest {
    pub const PARAMS: Self = Self {
        params: true,
        input: false,
    };
    pub const INPUT: Self = Self {
        params: false,
        input: true,
    };
    pub const BOTH: Self = Self {
        params: true,
        input: true,
    };
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    pub params: Option<Vec<f64>>,
    /// Same layout as the image data (row-major, channel-interleaved).
    pub input: Option<Vec<f64>>,
}

impl Net {
    pub fn from_params(arch: NetArch, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        if params.len() != layout.total {
            return Err(Error::Architecture(format!(
                "architecture needs {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("non-finite parameter".into()));
        }
        Ok(Self { arch, layout, params })
    }

    pub fn zeros(arch: NetArch) -> Result<Self> {
        arch.validate()?;
        let total = arch.layout().total;
        Self::from_params(arch, vec![0.0; total])
    }

    /// Fan-in scaled Gaussian weights, zero biases.
    pub fn init(arch: NetArch, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for segment in net.layout.segments.clone() {
            let fan_in = match segment.name.as_str() {
                n if n.ends_with(".bias") => continue,
                n if n.starts_with("conv") => 9 * segment.shape[2],
                "fc.weight" => segment.shape[1],
                _ => segment.shape[0],
            };
            let gain = if segment.name.starts_with("conv") { 2.0 } else { 1.0 };
            let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("positive std");
            for p in &mut net.params[segment.range()] {
                *p = normal.sample(&mut rng);
            }
        }
        Ok(net)
    }

    pub fn arch(&self) -> &NetArch {
        &self.arch
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn trunk_params(&self) -> &[f64] {
        &self.params[..self.layout.trunk_len]
    }

    fn segment(&self, name: &str) -> &[f64] {
        let seg = self.layout.get(name).expect("layout segment");
        &self.params[seg.range()]
    }

    /// Rounds every parameter to the nearest 32-bit float, as stored in checkpoints.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            *p = f64::from(*p as f32);
        }
    }

    fn check_input(&self, len: usize, height: usize, width: usize) -> Result<()> {
        let expected = height * width * self.arch.trunk.in_channels;
        if height == 0 || width == 0 || len != expected {
            return Err(Error::Shape(format!(
                "net expects {height}x{width}x{} input ({expected} values), got {len}",
                self.arch.trunk.in_channels
            )));
        }
        Ok(())
    }

    pub fn output_len(&self, height: usize, width: usize) -> usize {
        match self.arch.kind {
            NetKind::Classifier => self.arch.num_classes,
            NetKind::Segmenter => height * width * (self.arch.num_classes + 1),
        }
    }

    /// Forward pass on raw row-major channel-interleaved values (not range-checked).
    pub fn forward_raw(&self, input: &[f64], height: usize, width: usize) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(input.len(), height, width)?;
        let trunk = &self.arch.trunk;
        let mut acts = Vec::with_capacity(trunk.widths.len() + 1);
        let mut pre = Vec::with_capacity(trunk.widths.len());
        acts.push(input.to_vec());
        for (i, (cin, cout)) in trunk.layer_channels().enumerate() {
            let z = conv3x3_forward(
                acts.last().expect("input pushed"),
                height,
                width,
                cin,
                self.segment(&format!("conv{i}.weight")),
                self.segment(&format!("conv{i}.bias")),
                cout,
            );
            acts.push(z.iter().map(|&v| relu(v)).collect());
            pre.push(z);
        }
        let features = acts.last().expect("trunk output");
        let channels = trunk.out_channels();
        let pixels = height * width;
        let (output, pooled) = match self.arch.kind {
            NetKind::Classifier => {
                let mut pooled = vec![0.0; channels];
                for px in features.chunks_exact(channels) {
                    for (acc, &v) in pooled.iter_mut().zip(px) {
                        *acc += v;
                    }
                }
                for v in &mut pooled {
                    *v /= pixels as f64;
                }
                let weight = self.segment("fc.weight");
                let bias = self.segment("fc.bias");
                let logits = bias
                    .iter()
                    .zip(weight.chunks_exact(channels))
                    .map(|(&b, row)| b + dot(row, &pooled))
                    .collect();
                (logits, pooled)
            }
            NetKind::Segmenter => {
                let outs = self.arch.num_classes + 1;
                let weight = self.segment("head.weight");
                let bias = self.segment("head.bias");
                let mut logits = Vec::with_capacity(pixels * outs);
                for px in features.chunks_exact(channels) {
                    let start = logits.len();
                    logits.extend_from_slice(bias);
                    let out = &mut logits[start..];
                    for (&f, row) in px.iter().zip(weight.chunks_exact(outs)) {
                        if f != 0.0 {
                            for (o, &w) in out.iter_mut().zip(row) {
                                *o += f * w;
                            }
                        }
                    }
                }
                (logits, Vec::new())
            }
        };
        Ok((
            output,
            ForwardCache {
                height,
                width,
                acts,
                pre,
                pooled,
            },
        ))
    }

    /// Reverse-mode gradient of `<upstream, output>` for the cached forward pass.
    pub fn backward_raw(&self, cache: &ForwardCache, upstream: &[f64], want: GradRequest) -> Result<Gradients> {
        let (height, width) = (cache.height, cache.width);
        let expected = self.output_len(height, width);
        if upstream.len() != expected {
            return Err(Error::Shape(format!(
                "upstream gradient has {} values, output has {expected}",
                upstream.len()
            )));
        }
        let trunk = &self.arch.trunk;
        let channels = trunk.out_channels();
        let pixels = height * width;
        let mut dparams = want.params.then(|| vec![0.0; self.layout.total]);

        // Gradient with respect to the trunk output.
        let mut dact = vec![0.0; pixels * channels];
        match self.arch.kind {
            NetKind::Classifier => {
                let weight = self.segment("fc.weight");
                let mut dpooled = vec![0.0; channels];
                for (&u, row) in upstream.iter().zip(weight.chunks_exact(channels)) {
                    for (d, &w) in dpooled.iter_mut().zip(row) {
                        *d += u * w;
                    }
                }
                if let Some(dp) = dparams.as_mut() {
                    let seg = self.layout.get("fc.weight").expect("fc.weight");
                    for (row, &u) in dp[seg.range()].chunks_exact_mut(channels).zip(upstream) {
                        for (d, &g) in row.iter_mut().zip(&cache.pooled) {
                            *d += u * g;
                        }
                    }
                    let seg = self.layout.get("fc.bias").expect("fc.bias");
                    for (d, &u) in dp[seg.range()].iter_mut().zip(upstream) {
                        *d += u;
                    }
                }
                let scale = 1.0 / pixels as f64;
                for px in dact.chunks_exact_mut(channels) {
                    for (d, &g) in px.iter_mut().zip(&dpooled) {
                        *d = g * scale;
                    }
                }
            }
            NetKind::Segmenter => {
                let outs = self.arch.num_classes + 1;
                let weight = self.segment("head.weight");
                let features = cache.acts.last().expect("trunk output");
                let wrange = self.layout.get("head.weight").expect("head.weight").range();
                let brange = self.layout.get("head.bias").expect("head.bias").range();
                for ((dpx, up), fpx) in dact
                    .chunks_exact_mut(channels)
                    .zip(upstream.chunks_exact(outs))
                    .zip(features.chunks_exact(channels))
                {
                    for (d, row) in dpx.iter_mut().zip(weight.chunks_exact(outs)) {
                        *d = dot(row, up);
                    }
                    if let Some(dp) = dparams.as_mut() {
                        for (&f, drow) in fpx.iter().zip(dp[wrange.clone()].chunks_exact_mut(outs)) {
                            if f != 0.0 {
                                for (d, &u) in drow.iter_mut().zip(up) {
                                    *d += f * u;
                                }
                            }
                        }
                        for (d, &u) in dp[brange.clone()].iter_mut().zip(up) {
                            *d += u;
                        }
                    }
                }
            }
        }

        let layers: Vec<_> = trunk.layer_channels().collect();
        let mut dinput = None;
        for (i, &(cin, cout)) in layers.iter().enumerate().rev() {
            let dpre: Vec<f64> = dact
                .iter()
                .zip(&cache.pre[i])
                .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
                .collect();
            let need_input = i > 0 || want.input;
            let mut dprev = need_input.then(|| vec![0.0; pixels * cin]);
            let (dweight, dbias) = match dparams.as_mut() {
                Some(dp) => {
                    let wseg = self.layout.get(&format!("conv{i}.weight")).expect("conv weight");
                    let bseg = self.layout.get(&format!("conv{i}.bias")).expect("conv bias");
                    // Weights precede biases within a layer.
                    let (head, tail) = dp.split_at_mut(bseg.offset);
                    (Some(&mut head[wseg.range()]), Some(&mut tail[..cout]))
                }
                None => (None, None),
            };
            conv3x3_backward(
                ConvShape {
                    height,
                    width,
                    cin,
                    cout,
                },
                &cache.acts[i],
                self.segment(&format!("conv{i}.weight")),
                &dpre,
                dweight,
                dbias,
                dprev.as_deref_mut(),
            );
            match dprev {
                Some(d) if i > 0 => dact = d,
                other => dinput = other,
            }
        }
        Ok(Gradients {
            params: dparams,
            input: dinput,
        })
    }

    fn check_image(&self, image: &Image) -> Result<()> {
        if image.channels() != self.arch.trunk.in_channels {
            return Err(Error::Shape(format!(
                "net expects {}-channel images, got {}",
                self.arch.trunk.in_channels,
                image.channels()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, image: &Image) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_image(image)?;
        self.forward_raw(image.data(), image.height(), image.width())
    }

    pub fn backward(&self, image: &Image, upstream: &[f64], want: GradRequest) -> Result<Gradients> {
        let (_, cache) = self.forward(image)?;
        self.backward_raw(&cache, upstream, want)
    }
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy)]
struct ConvShape {
    height: usize,
    width: usize,
    cin: usize,
    cout: usize,
}

/// Valid 3x3 taps around `(y, x)` as `(tap index, input pixel index)`.
fn taps(y: usize, x: usize, height: usize, width: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..3usize).flat_map(move |ky| {
        (0..3usize).filter_map(move |kx| {
            let yy = (y + ky).checked_sub(1)?;
            let xx = (x + kx).checked_sub(1)?;
            (yy < height && xx < width).then_some((ky * 3 + kx, yy * width + xx))
        })
    })
}

fn conv3x3_forward(
    input: &[f64],
    height: usize,
    width: usize,
    cin: usize,
    weight: &[f64],
    bias: &[f64],
    cout: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; height * width * cout];
    for y in 0..height {
        for x in 0..width {
            let o = (y * width + x) * cout;
            let acc = &mut out[o..o + cout];
            acc.copy_from_slice(bias);
            for (tap, p) in taps(y, x, height, width) {
                let px = &input[p * cin..(p + 1) * cin];
                let wtap = &weight[tap * cin * cout..(tap + 1) * cin * cout];
                for (&v, wrow) in px.iter().zip(wtap.chunks_exact(cout)) {
                    if v != 0.0 {
                        for (a, &w) in acc.iter_mut().zip(wrow) {
                            *a += v * w;
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv3x3_backward(
    shape: ConvShape,
    input: &[f64],
    weight: &[f64],
    dpre: &[f64],
    mut dweight: Option<&mut [f64]>,
    mut dbias: Option<&mut [f64]>,
    mut dinput: Option<&mut [f64]>,
) {
    let ConvShape {
        height,
        width,
        cin,
        cout,
    } = shape;
    for y in 0..height {
        for x in 0..width {
            let o = (y * width + x) * cout;
            let g = &dpre[o..o + cout];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            if let Some(db) = dbias.as_deref_mut() {
                for (d, &v) in db.iter_mut().zip(g) {
                    *d += v;
                }
            }
            for (tap, p) in taps(y, x, height, width) {
                let base = tap * cin * cout;
                if let Some(dw) = dweight.as_deref_mut() {
                    let px = &input[p * cin..(p + 1) * cin];
                    for (&v, drow) in px.iter().zip(dw[base..base + cin * cout].chunks_exact_mut(cout)) {
                        if v != 0.0 {
                            for (d, &gv) in drow.iter_mut().zip(g) {
                                *d += v * gv;
                            }
                        }
                    }
                }
                if let Some(di) = dinput.as_deref_mut() {
                    let wtap = &weight[base..base + cin * cout];
                    for (d, wrow) in di[p * cin..(p + 1) * cin].iter_mut().zip(wtap.chunks_exact(cout)) {
                        *d += dot(wrow, g);
                    }
                }
            }
        }
    }
}

/// Common surface of both network kinds.
pub trait Network: Clone + Send + Sync {
    fn net(&self) -> &Net;
    fn net_mut(&mut self) -> &mut Net;

    fn arch(&self) -> &NetArch {
        self.net().arch()
    }

    fn params(&self) -> &[f64] {
        self.net().params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.net_mut().params_mut()
    }

    fn num_classes(&self) -> usize {
        self.arch().num_classes
    }
}

/// Image classifier: conv trunk, global average pool, affine logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierNet(Net);

/// Per-pixel segmenter over `K + 1` classes; index `K` is background.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterNet(Net);

impl Network for ClassifierNet {
    fn net(&self) -> &Net {
        &self.0
    }
    fn net_mut(&mut self) -> &mut Net {
        &mut self.0
    }
}

impl Network for SegmenterNet {
    fn net(&self) -> &Net {
        &self.0
    }
    fn net_mut(&mut self) -> &mut Net {
        &mut self.0
    }
}

impl ClassifierNet {
    pub fn init(trunk: TrunkArch, num_classes: usize, seed: u64) -> Result<Self> {
        Net::init(NetArch::classifier(trunk, num_classes), seed).map(Self)
    }

    pub fn from_net(net: Net) -> Result<Self> {
        match net.arch().kind {
            NetKind::Classifier => Ok(Self(net)),
            NetKind::Segmenter => Err(Error::Architecture("expected a classifier, got a segmenter".into())),
        }
    }

    /// Class logits for one image.
    pub fn forward(&self, image: &Image) -> Result<Vec<f64>> {
        Ok(self.0.forward(image)?.0)
    }

    /// Index of the largest logit, ties broken toward the smaller index.
    pub fn predict(&self, image: &Image) -> Result<usize> {
        Ok(argmax(&self.forward(image)?))
    }
}

impl SegmenterNet {
    pub fn init(trunk: TrunkArch, num_classes: usize, seed: u64) -> Result<Self> {
        Net::init(NetArch::segmenter(trunk, num_classes), seed).map(Self)
    }

    pub fn from_net(net: Net) -> Result<Self> {
        match net.arch().kind {
            NetKind::Segmenter => Ok(Self(net)),
            NetKind::Classifier => Err(Error::Architecture("expected a segmenter, got a classifier".into())),
        }
    }

    /// Per-pixel logits, `height * width * (K + 1)` values in pixel-major order.
    pub fn forward(&self, image: &Image) -> Result<Vec<f64>> {
        Ok(self.0.forward(image)?.0)
    }

    /// Per-pixel argmax labels over all `K + 1` classes.
    pub fn predict_mask(&self, image: &Image) -> Result<Vec<u8>> {
        let outs = self.num_classes() + 1;
        Ok(self
            .forward(image)?
            .chunks_exact(outs)
            .map(|px| argmax(px) as u8)
            .collect())
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Exact gradient of `logit[class_id]` with respect to every input value.
pub fn grad_input(net: &ClassifierNet, image: &Image, class_id: usize) -> Result<Vec<f64>> {
    let k = net.num_classes();
    if class_id >= k {
        return Err(Error::ClassOutOfRange {
            class_id,
            num_classes: k,
        });
    }
    let mut upstream = vec![0.0; k];
    upstream[class_id] = 1.0;
    let grads = net.net().backward(image, &upstream, GradRequest::INPUT)?;
    Ok(grads.input.expect("input gradient requested"))
}

/// Exact gradient of `<upstream, output>` with respect to every parameter.
pub fn backward_params<N: Network>(net: &N, image: &Image, upstream: &[f64]) -> Result<Vec<f64>> {
    let grads = net.net().backward(image, upstream, GradRequest::PARAMS)?;
    Ok(grads.params.expect("parameter gradient requested"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransplantMode {
    /// Copy trunk parameters only; the head keeps its own initialization.
    BackboneOnly,
    /// Copy every parameter; the source must be a segmenter of the same shape.
    Full,
}

/// Copies trunk (and optionally head) parameters from `src` into a copy of `dst`.
pub fn transplant_backbone<N: Network>(src: &N, dst: &SegmenterNet, mode: TransplantMode) -> Result<SegmenterNet> {
    let (sa, da) = (src.arch(), dst.arch());
    if sa.trunk != da.trunk {
        return Err(Error::Architecture(format!(
            "trunk {:?} cannot be copied into trunk {:?}",
            sa.trunk, da.trunk
        )));
    }
    let mut out = dst.clone();
    let trunk_len = dst.net().layout().trunk_len;
    match mode {
        TransplantMode::BackboneOnly => {
            out.params_mut()[..trunk_len].copy_from_slice(src.net().trunk_params());
        }
        TransplantMode::Full => {
            if sa.kind != NetKind::Segmenter || sa.num_classes != da.num_classes {
                return Err(Error::Architecture(
                    "full transplant needs a segmenter source with the same class count".into(),
                ));
            }
            out.params_mut().copy_from_slice(src.params());
        }
    }
    Ok(out)
}
