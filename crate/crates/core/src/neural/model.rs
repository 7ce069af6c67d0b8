use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{GruMerge, SeldnetConfig};
use super::layers::{self, BatchNormCache, GruCache, Shape4};
use crate::dsp::sequence::Sequence;
use crate::dsp::targets::{DoaFormat, TargetTensor};
use crate::error::{Result, SeldError};
use crate::scene::direction::CartesianDoa;

pub const BN_MOMENTUM: f64 = 0.99;

/// A named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    /// False for batch-norm running statistics.
    pub trainable: bool,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvIdx {
    w: usize,
    b: usize,
    gamma: usize,
    beta: usize,
    mean: usize,
    var: usize,
}

#[derive(Debug, Clone, Copy)]
struct GruIdx {
    w: usize,
    u: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct DenseIdx {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    specs: Vec<TensorSpec>,
    conv: Vec<ConvIdx>,
    gru: Vec<[GruIdx; 2]>,
    sed_fc: DenseIdx,
    doa_fc: DenseIdx,
    sed_out: DenseIdx,
    doa_out: DenseIdx,
    total: usize,
}

impl Layout {
    fn new(c: &SeldnetConfig) -> Self {
        let mut specs: Vec<TensorSpec> = Vec::new();
        let mut total = 0;
        let mut add = |name: String, shape: Vec<usize>, trainable: bool| {
            let spec = TensorSpec { name, shape, offset: total, trainable };
            total += spec.len();
            specs.push(spec);
            specs.len() - 1
        };
        let mut conv = Vec::new();
        let mut cin = c.planes();
        for (i, &p) in c.conv_filters.iter().enumerate() {
            conv.push(ConvIdx {
                w: add(format!("conv{i}.kernel"), vec![3, 3, cin, p], true),
                b: add(format!("conv{i}.bias"), vec![p], true),
                gamma: add(format!("bn{i}.gamma"), vec![p], true),
                beta: add(format!("bn{i}.beta"), vec![p], true),
                mean: add(format!("bn{i}.running_mean"), vec![p], false),
                var: add(format!("bn{i}.running_var"), vec![p], false),
            });
            cin = p;
        }
        let mut gru = Vec::new();
        let mut d = c.sequence_width();
        let q = c.gru_width;
        for i in 0..c.gru_layers {
            let dir = |add: &mut dyn FnMut(String, Vec<usize>, bool) -> usize, tag: &str| GruIdx {
                w: add(format!("gru{i}.{tag}.kernel"), vec![d, 3 * q], true),
                u: add(format!("gru{i}.{tag}.recurrent"), vec![q, 3 * q], true),
                b: add(format!("gru{i}.{tag}.bias"), vec![3 * q], true),
            };
            let f = dir(&mut add, "fwd");
            let b = dir(&mut add, "bwd");
            gru.push([f, b]);
            d = c.gru_output_width();
        }
        let (r, n) = (c.fc_width, c.classes);
        let mut dense = |name: &str, din: usize, dout: usize| DenseIdx {
            w: add(format!("{name}.kernel"), vec![din, dout], true),
            b: add(format!("{name}.bias"), vec![dout], true),
        };
        let sed_fc = dense("sed_fc", d, r);
        let doa_fc = dense("doa_fc", d, r);
        let sed_out = dense("sed_out", r, n);
        let doa_out = dense("doa_out", r, c.dims() * n);
        Self {
            specs,
            conv,
            gru,
            sed_fc,
            doa_fc,
            sed_out,
            doa_out,
            total,
        }
    }
}

/// Network outputs for `rows` frames: `sed[row * N + n]` and the DOA block
/// axis-major per frame, `doa[row * dims * N + axis * N + n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub rows: usize,
    pub classes: usize,
    pub format: DoaFormat,
    pub sed: Vec<f64>,
    pub doa: Vec<f64>,
}

/// Stacked sequences ready for the network.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    pub frames: usize,
    pub x: Vec<f64>,
    /// Targets with `size * frames` rows.
    pub targets: TargetTensor,
    pub mask: Vec<bool>,
}

impl Batch {
    pub fn from_sequences(seqs: &[&Sequence]) -> Result<Self> {
        let first = seqs.first().ok_or(SeldError::MissingData("empty batch".into()))?;
        let (frames, classes, format) = (first.features.frames, first.targets.classes, first.targets.format);
        let mut x = Vec::with_capacity(seqs.len() * first.features.data.len());
        let mut sed = Vec::new();
        let mut doa = Vec::new();
        let mut mask = Vec::new();
        for s in seqs {
            if s.features.frames != frames
                || s.features.bins != first.features.bins
                || s.features.planes != first.features.planes
                || s.targets.classes != classes
                || s.targets.format != format
            {
                return Err(SeldError::ShapeMismatch("sequences in a batch differ in shape".into()));
            }
            x.extend_from_slice(&s.features.data);
            sed.extend_from_slice(&s.targets.sed);
            doa.extend_from_slice(&s.targets.doa);
            mask.extend_from_slice(&s.mask);
        }
        Ok(Self {
            size: seqs.len(),
            frames,
            x,
            targets: TargetTensor {
                frames: seqs.len() * frames,
                classes,
                format,
                sed,
                doa,
            },
            mask,
        })
    }
}

struct ConvCache {
    input: Vec<f64>,
    shape: Shape4,
    bn: BatchNormCache,
    mean: Vec<f64>,
    var: Vec<f64>,
    act: Vec<f64>,
    arg: Vec<usize>,
}

struct GruLayerCache {
    din: usize,
    fwd: GruCache,
    bwd: GruCache,
}

/// Intermediate values of a training-mode forward pass.
pub struct ForwardCache {
    b: usize,
    l: usize,
    conv: Vec<ConvCache>,
    gru: Vec<GruLayerCache>,
    rec: Vec<f64>,
    sed_fc: Vec<f64>,
    doa_fc: Vec<f64>,
}

/// Gradient of the loss with respect to the network outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrad {
    pub sed: Vec<f64>,
    pub doa: Vec<f64>,
}

/// SELDnet parameters in one flat vector, described by named tensors.
#[derive(Debug, Clone)]
pub struct SeldModel {
    pub config: SeldnetConfig,
    pub values: Vec<f64>,
    layout: Layout,
}

fn glorot(rng: &mut ChaCha8Rng, out: &mut [f64], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    out.iter_mut().for_each(|v| *v = rng.gen_range(-limit..limit));
}

/// Rows of a `rows x cols` matrix (rows <= cols) made orthonormal by
/// Gram-Schmidt on Gaussian draws.
fn orthogonal(rng: &mut ChaCha8Rng, out: &mut [f64], rows: usize, cols: usize) {
    out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
    for i in 0..rows {
        for j in 0..i {
            let (a, b) = out.split_at_mut(i * cols);
            let prev = &a[j * cols..(j + 1) * cols];
            let cur = &mut b[..cols];
            let proj: f64 = prev.iter().zip(cur.iter()).map(|(p, c)| p * c).sum();
            cur.iter_mut().zip(prev).for_each(|(c, p)| *c -= proj * p);
        }
        let row = &mut out[i * cols..(i + 1) * cols];
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter_mut().for_each(|v| *v /= norm);
    }
}

impl SeldModel {
    /// Fresh model initialized from `config.seed`.
    pub fn new(config: SeldnetConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut values = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for spec in &layout.specs {
            let v = &mut values[spec.range()];
            let s = &spec.shape;
            if spec.name.ends_with("gamma") || spec.name.ends_with("running_var") {
                v.fill(1.0);
            } else if spec.name.ends_with("recurrent") {
                orthogonal(&mut rng, v, s[0], s[1]);
            } else if s.len() == 4 {
                glorot(&mut rng, v, 9 * s[2], 9 * s[3]);
            } else if spec.name.ends_with("kernel") {
                glorot(&mut rng, v, s[0], s[1]);
            }
        }
        Ok(Self { config, values, layout })
    }

    /// Model with explicit parameter values, e.g. from a checkpoint.
    pub fn with_values(config: SeldnetConfig, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if values.len() != layout.total {
            return Err(SeldError::ShapeMismatch(format!("{} parameters given, topology needs {}", values.len(), layout.total)));
        }
        Ok(Self { config, values, layout })
    }

    /// Every stored value, including batch-norm running statistics.
    pub fn count_params(&self) -> usize {
        self.values.len()
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.layout.specs
    }

    fn p(&self, idx: usize) -> &[f64] {
        &self.values[self.layout.specs[idx].range()]
    }

    /// Shape `(frames, bins, filters)` of each conv block output for one
    /// sequence.
    pub fn conv_output_shapes(&self) -> Vec<(usize, usize, usize)> {
        let mut f = self.config.bins;
        self.config
            .conv_filters
            .iter()
            .zip(&self.config.freq_pools)
            .map(|(&p, &pool)| {
                f /= pool;
                (self.config.seq_len, f, p)
            })
            .collect()
    }

    fn check_input(&self, x: &[f64], b: usize, l: usize) -> Result<()> {
        let c = &self.config;
        if x.len() != b * l * c.bins * c.planes() {
            return Err(SeldError::ShapeMismatch(format!(
                "input of {} values is not {b} x {l} x {} x {}",
                x.len(),
                c.bins,
                c.planes()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SeldError::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Inference with running batch-norm statistics. `x` is `b x l x F x 2C`.
    pub fn predict(&self, x: &[f64], b: usize, l: usize) -> Result<Prediction> {
        self.check_input(x, b, l)?;
        Ok(self.run(x, b, l, None))
    }

    /// Training-mode pass: batch statistics, with everything needed for
    /// `backward` kept in the cache.
    pub fn forward_train(&self, x: &[f64], b: usize, l: usize) -> Result<(Prediction, ForwardCache)> {
        self.check_input(x, b, l)?;
        let mut cache = ForwardCache {
            b,
            l,
            conv: Vec::new(),
            gru: Vec::new(),
            rec: Vec::new(),
            sed_fc: Vec::new(),
            doa_fc: Vec::new(),
        };
        let pred = self.run(x, b, l, Some(&mut cache));
        Ok((pred, cache))
    }

    fn run(&self, x: &[f64], b: usize, l: usize, mut cache: Option<&mut ForwardCache>) -> Prediction {
        let c = &self.config;
        let lay = &self.layout;
        let mut h = x.to_vec();
        let mut s = Shape4 { b, l, f: c.bins, c: c.planes() };
        for (i, idx) in lay.conv.iter().enumerate() {
            let cout = c.conv_filters[i];
            let y = layers::conv_forward(&h, s, self.p(idx.w), self.p(idx.b), cout);
            let (mean, var) = if cache.is_some() {
                layers::channel_stats(&y, cout)
            } else {
                (self.p(idx.mean).to_vec(), self.p(idx.var).to_vec())
            };
            let (mut act, bn) = layers::batchnorm_apply(&y, cout, &mean, &var, self.p(idx.gamma), self.p(idx.beta));
            drop(y);
            layers::relu(&mut act);
            let ys = Shape4 { c: cout, ..s };
            let (pooled, arg) = layers::maxpool_freq(&act, ys, c.freq_pools[i]);
            let next = Shape4 { f: s.f / c.freq_pools[i], c: cout, ..s };
            let input = std::mem::replace(&mut h, pooled);
            if let Some(ch) = cache.as_deref_mut() {
                ch.conv.push(ConvCache { input, shape: s, bn, mean, var, act, arg });
            }
            s = next;
        }
        let rows = b * l;
        let mut d = s.f * s.c;
        let q = c.gru_width;
        for idx in &lay.gru {
            let [fi, bi] = *idx;
            let (hf, cf) = layers::gru_forward(&h, b, l, d, self.p(fi.w), self.p(fi.u), self.p(fi.b), q, false);
            let (hb, cb) = layers::gru_forward(&h, b, l, d, self.p(bi.w), self.p(bi.u), self.p(bi.b), q, true);
            h = match c.gru_merge {
                GruMerge::Mul => hf.iter().zip(&hb).map(|(a, b)| a * b).collect(),
                GruMerge::Concat => hf.chunks_exact(q).zip(hb.chunks_exact(q)).flat_map(|(a, b)| a.iter().chain(b)).copied().collect(),
            };
            if let Some(ch) = cache.as_deref_mut() {
                ch.gru.push(GruLayerCache { din: d, fwd: cf, bwd: cb });
            }
            d = c.gru_output_width();
        }
        let (r, n) = (c.fc_width, c.classes);
        let dn = c.dims() * n;
        let sed_fc = layers::dense_forward(&h, rows, d, self.p(lay.sed_fc.w), self.p(lay.sed_fc.b), r);
        let doa_fc = layers::dense_forward(&h, rows, d, self.p(lay.doa_fc.w), self.p(lay.doa_fc.b), r);
        let mut sed = layers::dense_forward(&sed_fc, rows, r, self.p(lay.sed_out.w), self.p(lay.sed_out.b), n);
        let mut doa = layers::dense_forward(&doa_fc, rows, r, self.p(lay.doa_out.w), self.p(lay.doa_out.b), dn);
        sed.iter_mut().for_each(|v| *v = layers::sigmoid(*v));
        doa.iter_mut().for_each(|v| *v = v.tanh());
        if let Some(ch) = cache {
            ch.rec = h;
            ch.sed_fc = sed_fc;
            ch.doa_fc = doa_fc;
        }
        Prediction {
            rows,
            classes: n,
            format: c.doa_format,
            sed,
            doa,
        }
    }

    /// Gradient of the loss with respect to every value in `self.values`.
    /// Running statistics get zero gradient.
    pub fn backward(&self, cache: &ForwardCache, pred: &Prediction, grad: &OutputGrad) -> Vec<f64> {
        let c = &self.config;
        let lay = &self.layout;
        let mut g = vec![0.0; self.values.len()];
        let (b, l) = (cache.b, cache.l);
        let rows = b * l;
        let (r, n) = (c.fc_width, c.classes);
        let dn = c.dims() * n;
        let d = c.recurrent_width();

        let dz_sed: Vec<f64> = grad.sed.iter().zip(&pred.sed).map(|(g, p)| g * p * (1.0 - p)).collect();
        let dz_doa: Vec<f64> = grad.doa.iter().zip(&pred.doa).map(|(g, y)| g * (1.0 - y * y)).collect();
        let dense_back = |g: &mut Vec<f64>, idx: DenseIdx, x: &[f64], din: usize, dout: usize, dy: &[f64]| {
            let (wr, br) = (lay.specs[idx.w].range(), lay.specs[idx.b].range());
            let mut dw = g[wr.clone()].to_vec();
            let mut db = g[br.clone()].to_vec();
            let dx = layers::dense_backward(x, rows, din, &self.values[wr.clone()], dout, dy, &mut dw, &mut db);
            g[wr].copy_from_slice(&dw);
            g[br].copy_from_slice(&db);
            dx
        };
        let d_sed_fc = dense_back(&mut g, lay.sed_out, &cache.sed_fc, r, n, &dz_sed);
        let d_doa_fc = dense_back(&mut g, lay.doa_out, &cache.doa_fc, r, dn, &dz_doa);
        let mut dh = dense_back(&mut g, lay.sed_fc, &cache.rec, d, r, &d_sed_fc);
        let dh2 = dense_back(&mut g, lay.doa_fc, &cache.rec, d, r, &d_doa_fc);
        dh.iter_mut().zip(&dh2).for_each(|(a, b)| *a += b);

        let q = c.gru_width;
        for (idx, gc) in lay.gru.iter().zip(&cache.gru).rev() {
            let (dhf, dhb): (Vec<f64>, Vec<f64>) = match c.gru_merge {
                GruMerge::Mul => {
                    let hf = &gc.fwd.h;
                    let hb = &gc.bwd.h;
                    (dh.iter().zip(hb).map(|(d, b)| d * b).collect(), dh.iter().zip(hf).map(|(d, f)| d * f).collect())
                }
                GruMerge::Concat => {
                    let f = dh.chunks_exact(2 * q).flat_map(|c| c[..q].iter()).copied().collect();
                    let b = dh.chunks_exact(2 * q).flat_map(|c| c[q..].iter()).copied().collect();
                    (f, b)
                }
            };
            let mut dx = vec![0.0; rows * gc.din];
            for (dir, (gcache, dout)) in [(&gc.fwd, &dhf), (&gc.bwd, &dhb)].into_iter().enumerate() {
                let gi = idx[dir];
                let (wr, ur, br) = (lay.specs[gi.w].range(), lay.specs[gi.u].range(), lay.specs[gi.b].range());
                let mut dw = g[wr.clone()].to_vec();
                let mut du = g[ur.clone()].to_vec();
                let mut db = g[br.clone()].to_vec();
                let part = layers::gru_backward(
                    gcache,
                    b,
                    l,
                    gc.din,
                    &self.values[wr.clone()],
                    &self.values[ur.clone()],
                    q,
                    dir == 1,
                    dout,
                    &mut dw,
                    &mut du,
                    &mut db,
                );
                g[wr].copy_from_slice(&dw);
                g[ur].copy_from_slice(&du);
                g[br].copy_from_slice(&db);
                dx.iter_mut().zip(&part).for_each(|(a, p)| *a += p);
            }
            dh = dx;
        }

        for (i, (idx, cc)) in lay.conv.iter().zip(&cache.conv).enumerate().rev() {
            let cout = c.conv_filters[i];
            let mut da = layers::maxpool_backward(&cc.arg, cc.act.len(), &dh);
            layers::relu_backward(&cc.act, &mut da);
            let (gr, br) = (lay.specs[idx.gamma].range(), lay.specs[idx.beta].range());
            let mut dgamma = g[gr.clone()].to_vec();
            let mut dbeta = g[br.clone()].to_vec();
            let dy = layers::batchnorm_backward(&cc.bn, cout, self.p(idx.gamma), &da, &mut dgamma, &mut dbeta);
            g[gr].copy_from_slice(&dgamma);
            g[br].copy_from_slice(&dbeta);
            let (wr, cbr) = (lay.specs[idx.w].range(), lay.specs[idx.b].range());
            let mut dw = g[wr.clone()].to_vec();
            let mut db = g[cbr.clone()].to_vec();
            dh = layers::conv_backward(&cc.input, cc.shape, &self.values[wr.clone()], cout, &dy, &mut dw, &mut db, i > 0);
            g[wr].copy_from_slice(&dw);
            g[cbr].copy_from_slice(&db);
        }
        g
    }

    /// Moves the running batch-norm statistics toward those of a training pass.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        for (idx, cc) in self.layout.conv.clone().iter().zip(&cache.conv) {
            let mr = self.layout.specs[idx.mean].range();
            let vr = self.layout.specs[idx.var].range();
            for (v, m) in self.values[mr].iter_mut().zip(&cc.mean) {
                *v = BN_MOMENTUM * *v + (1.0 - BN_MOMENTUM) * m;
            }
            for (v, s) in self.values[vr].iter_mut().zip(&cc.var) {
                *v = BN_MOMENTUM * *v + (1.0 - BN_MOMENTUM) * s;
            }
        }
    }
}

/// Active classes per frame (probability strictly above `tau`) with their
/// DOA projected onto the unit sphere. An output with no direction (the
/// zero vector) falls back to the x axis.
pub fn threshold_predictions(pred: &Prediction, tau: f64) -> Vec<Vec<(usize, CartesianDoa)>> {
    let n = pred.classes;
    let dims = pred.format.dims();
    (0..pred.rows)
        .map(|t| {
            (0..n)
                .filter(|&k| pred.sed[t * n + k] > tau)
                .map(|k| {
                    let v: Vec<f64> = (0..dims).map(|a| pred.doa[t * dims * n + a * n + k]).collect();
                    (k, pred.format.decode(&v).unwrap_or(CartesianDoa::new(1.0, 0.0, 0.0)))
                })
                .collect()
        })
        .collect()
}
