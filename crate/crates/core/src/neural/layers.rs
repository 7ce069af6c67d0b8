//! Layer kernels with explicit backward passes. Activations are row-major
//! `B x L x F x C` (conv stack) or `B x L x D` (sequence stack).

use super::linalg::{gemm, gemm_into, View};

/// Shape of a conv-stack activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape4 {
    pub b: usize,
    pub l: usize,
    pub f: usize,
    pub c: usize,
}

impl Shape4 {
    pub fn len(&self) -> usize {
        self.b * self.l * self.f * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn im2col(x: &[f64], l: usize, f: usize, cin: usize, cols: &mut [f64]) {
    let w = 9 * cin;
    for li in 0..l {
        for fi in 0..f {
            let row = &mut cols[(li * f + fi) * w..(li * f + fi + 1) * w];
            for dl in 0..3 {
                for df in 0..3 {
                    let dst = &mut row[(dl * 3 + df) * cin..(dl * 3 + df + 1) * cin];
                    let (sl, sf) = (li + dl, fi + df);
                    if sl == 0 || sl > l || sf == 0 || sf > f {
                        dst.fill(0.0);
                    } else {
                        let src = ((sl - 1) * f + sf - 1) * cin;
                        dst.copy_from_slice(&x[src..src + cin]);
                    }
                }
            }
        }
    }
}

fn col2im_add(cols: &[f64], l: usize, f: usize, cin: usize, dx: &mut [f64]) {
    let w = 9 * cin;
    for li in 0..l {
        for fi in 0..f {
            let row = &cols[(li * f + fi) * w..(li * f + fi + 1) * w];
            for dl in 0..3 {
                for df in 0..3 {
                    let (sl, sf) = (li + dl, fi + df);
                    if sl == 0 || sl > l || sf == 0 || sf > f {
                        continue;
                    }
                    let src = &row[(dl * 3 + df) * cin..(dl * 3 + df + 1) * cin];
                    let dst = ((sl - 1) * f + sf - 1) * cin;
                    for (d, s) in dx[dst..dst + cin].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// 3 x 3 'same' convolution over (time, frequency). `w` is `9 cin x cout`
/// with row `(dl * 3 + df) * cin + ci`.
pub fn conv_forward(x: &[f64], s: Shape4, w: &[f64], bias: &[f64], cout: usize) -> Vec<f64> {
    let per = s.l * s.f;
    let mut y = vec![0.0; s.b * per * cout];
    let mut cols = vec![0.0; per * 9 * s.c];
    for bi in 0..s.b {
        im2col(&x[bi * per * s.c..(bi + 1) * per * s.c], s.l, s.f, s.c, &mut cols);
        let yb = &mut y[bi * per * cout..(bi + 1) * per * cout];
        for row in yb.chunks_exact_mut(cout) {
            row.copy_from_slice(bias);
        }
        gemm(View::new(&cols, per, 9 * s.c), View::new(w, 9 * s.c, cout), 1.0, yb);
    }
    y
}

/// Accumulates into `dw` and `db`; returns `dx`, or an empty vector when
/// `need_dx` is false.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward(x: &[f64], s: Shape4, w: &[f64], cout: usize, dy: &[f64], dw: &mut [f64], db: &mut [f64], need_dx: bool) -> Vec<f64> {
    let per = s.l * s.f;
    let k = 9 * s.c;
    let mut dx = vec![0.0; if need_dx { x.len() } else { 0 }];
    let mut cols = vec![0.0; per * k];
    let mut dcols = vec![0.0; if need_dx { per * k } else { 0 }];
    for bi in 0..s.b {
        im2col(&x[bi * per * s.c..(bi + 1) * per * s.c], s.l, s.f, s.c, &mut cols);
        let dyb = &dy[bi * per * cout..(bi + 1) * per * cout];
        gemm(View::new(&cols, per, k).t(), View::new(dyb, per, cout), 1.0, dw);
        for row in dyb.chunks_exact(cout) {
            for (d, g) in db.iter_mut().zip(row) {
                *d += g;
            }
        }
        if !need_dx {
            continue;
        }
        gemm(View::new(dyb, per, cout), View::new(w, k, cout).t(), 0.0, &mut dcols);
        col2im_add(&dcols, s.l, s.f, s.c, &mut dx[bi * per * s.c..(bi + 1) * per * s.c]);
    }
    dx
}

pub const BN_EPSILON: f64 = 1e-3;

pub struct BatchNormCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
}

/// Per-channel batch statistics of `x` (last axis has `c` channels).
pub fn channel_stats(x: &[f64], c: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (x.len() / c) as f64;
    let mut mean = vec![0.0; c];
    for row in x.chunks_exact(c) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; c];
    for row in x.chunks_exact(c) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

/// Normalizes with the given statistics, then scales and shifts.
pub fn batchnorm_apply(x: &[f64], c: usize, mean: &[f64], var: &[f64], gamma: &[f64], beta: &[f64]) -> (Vec<f64>, BatchNormCache) {
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();
    let mut xhat = vec![0.0; x.len()];
    let mut y = vec![0.0; x.len()];
    for ((xr, hr), yr) in x.chunks_exact(c).zip(xhat.chunks_exact_mut(c)).zip(y.chunks_exact_mut(c)) {
        for k in 0..c {
            let h = (xr[k] - mean[k]) * inv_std[k];
            hr[k] = h;
            yr[k] = gamma[k] * h + beta[k];
        }
    }
    (y, BatchNormCache { xhat, inv_std })
}

/// Backward through training-mode batch normalization.
pub fn batchnorm_backward(cache: &BatchNormCache, c: usize, gamma: &[f64], dy: &[f64], dgamma: &mut [f64], dbeta: &mut [f64]) -> Vec<f64> {
    let n = (dy.len() / c) as f64;
    let mut sum_dh = vec![0.0; c];
    let mut sum_dh_h = vec![0.0; c];
    for (dr, hr) in dy.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
        for k in 0..c {
            dgamma[k] += dr[k] * hr[k];
            dbeta[k] += dr[k];
            let dh = dr[k] * gamma[k];
            sum_dh[k] += dh;
            sum_dh_h[k] += dh * hr[k];
        }
    }
    let mut dx = vec![0.0; dy.len()];
    for ((xr, dr), hr) in dx.chunks_exact_mut(c).zip(dy.chunks_exact(c)).zip(cache.xhat.chunks_exact(c)) {
        for k in 0..c {
            let dh = dr[k] * gamma[k];
            xr[k] = cache.inv_std[k] / n * (n * dh - sum_dh[k] - hr[k] * sum_dh_h[k]);
        }
    }
    dx
}

pub fn relu(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Zeroes gradients where the ReLU output was not positive.
pub fn relu_backward(y: &[f64], dy: &mut [f64]) {
    for (d, &v) in dy.iter_mut().zip(y) {
        if v <= 0.0 {
            *d = 0.0;
        }
    }
}

/// Max over non-overlapping groups of `p` frequency bins. Returns the output
/// and, per output element, the flat input index of the winner.
pub fn maxpool_freq(x: &[f64], s: Shape4, p: usize) -> (Vec<f64>, Vec<usize>) {
    let fo = s.f / p;
    let mut y = vec![0.0; s.b * s.l * fo * s.c];
    let mut arg = vec![0usize; y.len()];
    for bl in 0..s.b * s.l {
        for fi in 0..fo {
            for ch in 0..s.c {
                let o = (bl * fo + fi) * s.c + ch;
                let mut best = f64::NEG_INFINITY;
                let mut bi = 0;
                for q in 0..p {
                    let i = (bl * s.f + fi * p + q) * s.c + ch;
                    if x[i] > best {
                        best = x[i];
                        bi = i;
                    }
                }
                y[o] = best;
                arg[o] = bi;
            }
        }
    }
    (y, arg)
}

pub fn maxpool_backward(arg: &[usize], in_len: usize, dy: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; in_len];
    for (&i, &g) in arg.iter().zip(dy) {
        dx[i] += g;
    }
    dx
}

/// `y = x w + b` over `rows` rows.
pub fn dense_forward(x: &[f64], rows: usize, din: usize, w: &[f64], b: &[f64], dout: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(rows * dout);
    for _ in 0..rows {
        y.extend_from_slice(b);
    }
    gemm(View::new(x, rows, din), View::new(w, din, dout), 1.0, &mut y);
    y
}

pub fn dense_backward(x: &[f64], rows: usize, din: usize, w: &[f64], dout: usize, dy: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
    gemm(View::new(x, rows, din).t(), View::new(dy, rows, dout), 1.0, dw);
    for row in dy.chunks_exact(dout) {
        for (d, g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    let mut dx = vec![0.0; rows * din];
    gemm(View::new(dy, rows, dout), View::new(w, din, dout).t(), 0.0, &mut dx);
    dx
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Cached per-step gate values of one GRU direction.
pub struct GruCache {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub hh: Vec<f64>,
    pub h: Vec<f64>,
}

/// One GRU direction over `x` (`b x l x d`). Weights `w` (`d x 3q`),
/// recurrent `u` (`q x 3q`), bias (`3q`), gate blocks ordered update, reset,
/// candidate. Output `b x l x q`; `reverse` runs from the last frame.
pub fn gru_forward(x: &[f64], b: usize, l: usize, d: usize, w: &[f64], u: &[f64], bias: &[f64], q: usize, reverse: bool) -> (Vec<f64>, GruCache) {
    let g = 3 * q;
    let xw = dense_forward(x, b * l, d, w, bias, g);
    let mut z = vec![0.0; b * l * q];
    let mut r = vec![0.0; b * l * q];
    let mut hh = vec![0.0; b * l * q];
    let mut h = vec![0.0; b * l * q];
    let mut h_prev = vec![0.0; b * q];
    let mut hu = vec![0.0; b * 2 * q];
    let mut rh = vec![0.0; b * q];
    let mut cand = vec![0.0; b * q];
    for step in 0..l {
        let t = if reverse { l - 1 - step } else { step };
        gemm(View::new(&h_prev, b, q), View::columns(u, q, g, 0, 2 * q), 0.0, &mut hu);
        for bi in 0..b {
            let base = (bi * l + t) * q;
            let xr = &xw[(bi * l + t) * g..(bi * l + t + 1) * g];
            for k in 0..q {
                let zz = sigmoid(xr[k] + hu[bi * 2 * q + k]);
                let rr = sigmoid(xr[q + k] + hu[bi * 2 * q + q + k]);
                z[base + k] = zz;
                r[base + k] = rr;
                rh[bi * q + k] = rr * h_prev[bi * q + k];
            }
        }
        gemm(View::new(&rh, b, q), View::columns(u, q, g, 2 * q, q), 0.0, &mut cand);
        for bi in 0..b {
            let base = (bi * l + t) * q;
            let xr = &xw[(bi * l + t) * g..(bi * l + t + 1) * g];
            for k in 0..q {
                let c = (xr[2 * q + k] + cand[bi * q + k]).tanh();
                hh[base + k] = c;
                let zz = z[base + k];
                let nh = zz * h_prev[bi * q + k] + (1.0 - zz) * c;
                h[base + k] = nh;
                h_prev[bi * q + k] = nh;
            }
        }
    }
    let out = h.clone();
    (
        out,
        GruCache {
            x: x.to_vec(),
            z,
            r,
            hh,
            h,
        },
    )
}

/// Backward through one GRU direction; accumulates weight gradients and
/// returns `dx`.
#[allow(clippy::too_many_arguments)]
pub fn gru_backward(
    c: &GruCache,
    b: usize,
    l: usize,
    d: usize,
    w: &[f64],
    u: &[f64],
    q: usize,
    reverse: bool,
    dout: &[f64],
    dw: &mut [f64],
    du: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let g = 3 * q;
    let mut dxw = vec![0.0; b * l * g];
    let mut carry = vec![0.0; b * q];
    let mut h_prev = vec![0.0; b * q];
    let mut rh = vec![0.0; b * q];
    let mut da_h = vec![0.0; b * q];
    let mut da_zr = vec![0.0; b * 2 * q];
    let mut drh = vec![0.0; b * q];
    let mut dprev = vec![0.0; b * q];
    for step in (0..l).rev() {
        let t = if reverse { l - 1 - step } else { step };
        let has_prev = step > 0;
        let tp = if reverse { t + 1 } else { t.wrapping_sub(1) };
        for bi in 0..b {
            for k in 0..q {
                h_prev[bi * q + k] = if has_prev { c.h[(bi * l + tp) * q + k] } else { 0.0 };
            }
        }
        for bi in 0..b {
            let base = (bi * l + t) * q;
            for k in 0..q {
                let dh = dout[base + k] + carry[bi * q + k];
                let (zz, cc, hp) = (c.z[base + k], c.hh[base + k], h_prev[bi * q + k]);
                da_h[bi * q + k] = dh * (1.0 - zz) * (1.0 - cc * cc);
                da_zr[bi * 2 * q + k] = dh * (hp - cc) * zz * (1.0 - zz);
                dprev[bi * q + k] = dh * zz;
                rh[bi * q + k] = c.r[base + k] * hp;
            }
        }
        // candidate path through r * h_prev
        gemm_into(View::new(&rh, b, q).t(), View::new(&da_h, b, q), 1.0, &mut du[2 * q..], g);
        gemm(View::new(&da_h, b, q), View::columns(u, q, g, 2 * q, q).t(), 0.0, &mut drh);
        for bi in 0..b {
            let base = (bi * l + t) * q;
            for k in 0..q {
                let rr = c.r[base + k];
                let hp = h_prev[bi * q + k];
                da_zr[bi * 2 * q + q + k] = drh[bi * q + k] * hp * rr * (1.0 - rr);
                dprev[bi * q + k] += drh[bi * q + k] * rr;
            }
            let row = &mut dxw[(bi * l + t) * g..(bi * l + t + 1) * g];
            row[..2 * q].copy_from_slice(&da_zr[bi * 2 * q..(bi + 1) * 2 * q]);
            row[2 * q..].copy_from_slice(&da_h[bi * q..(bi + 1) * q]);
        }
        gemm_into(View::new(&h_prev, b, q).t(), View::new(&da_zr, b, 2 * q), 1.0, du, g);
        gemm(View::new(&da_zr, b, 2 * q), View::columns(u, q, g, 0, 2 * q).t(), 1.0, &mut dprev);
        std::mem::swap(&mut carry, &mut dprev);
    }
    dense_backward(&c.x, b * l, d, w, g, &dxw, dw, dbias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Central-difference check of `grad` against `f` at `x`.
    fn check(f: &dyn Fn(&[f64]) -> f64, x: &[f64], grad: &[f64]) {
        let h = 1e-6;
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            let v = xp[i];
            xp[i] = v + h;
            let fp = f(&xp);
            xp[i] = v - h;
            let fm = f(&xp);
            xp[i] = v;
            let num = (fp - fm) / (2.0 * h);
            let err = (num - grad[i]).abs() / num.abs().max(grad[i].abs()).max(1e-2);
            assert!(err <= 1e-4, "index {i}: numeric {num} analytic {}", grad[i]);
        }
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn conv_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = Shape4 { b: 2, l: 3, f: 4, c: 2 };
        let cout = 3;
        let x = rand_vec(s.len(), &mut rng);
        let w = rand_vec(9 * s.c * cout, &mut rng);
        let bias = rand_vec(cout, &mut rng);
        let up = rand_vec(s.b * s.l * s.f * cout, &mut rng);
        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; cout];
        let dx = conv_backward(&x, s, &w, cout, &up, &mut dw, &mut db, true);
        check(&|x| dot(&conv_forward(x, s, &w, &bias, cout), &up), &x, &dx);
        check(&|w| dot(&conv_forward(&x, s, w, &bias, cout), &up), &w, &dw);
        check(&|b| dot(&conv_forward(&x, s, &w, b, cout), &up), &bias, &db);
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = Shape4 { b: 1, l: 4, f: 5, c: 2 };
        let x = rand_vec(s.len(), &mut rng);
        let w = rand_vec(9 * 2 * 3, &mut rng);
        let y = conv_forward(&x, s, &w, &[0.0; 3], 3);
        for l in 0..4isize {
            for f in 0..5isize {
                for co in 0..3 {
                    let mut acc = 0.0;
                    for dl in -1..=1isize {
                        for df in -1..=1isize {
                            let (sl, sf) = (l + dl, f + df);
                            if !(0..4).contains(&sl) || !(0..5).contains(&sf) {
                                continue;
                            }
                            for ci in 0..2 {
                                let wi = (((dl + 1) * 3 + df + 1) as usize * 2 + ci) * 3 + co;
                                acc += x[((sl * 5 + sf) as usize) * 2 + ci] * w[wi];
                            }
                        }
                    }
                    assert!((acc - y[((l * 5 + f) as usize) * 3 + co]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_kernels_give_relu_of_shift() {
        let s = Shape4 { b: 1, l: 2, f: 4, c: 1 };
        let y = conv_forward(&[0.7; 8], s, &[0.0; 9 * 2], &[0.0; 2], 2);
        let (mean, var) = channel_stats(&y, 2);
        let (mut z, _) = batchnorm_apply(&y, 2, &mean, &var, &[1.0, 1.0], &[0.3, -0.2]);
        relu(&mut z);
        for row in z.chunks_exact(2) {
            assert_eq!(row, [0.3, 0.0]);
        }
    }

    #[test]
    fn batchnorm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = 3;
        let x = rand_vec(8 * c, &mut rng);
        let gamma = rand_vec(c, &mut rng);
        let beta = rand_vec(c, &mut rng);
        let up = rand_vec(x.len(), &mut rng);
        let fwd = |x: &[f64], g: &[f64], b: &[f64]| {
            let (m, v) = channel_stats(x, c);
            batchnorm_apply(x, c, &m, &v, g, b)
        };
        let (_, cache) = fwd(&x, &gamma, &beta);
        let mut dg = vec![0.0; c];
        let mut db = vec![0.0; c];
        let dx = batchnorm_backward(&cache, c, &gamma, &up, &mut dg, &mut db);
        check(&|x| dot(&fwd(x, &gamma, &beta).0, &up), &x, &dx);
        check(&|g| dot(&fwd(&x, g, &beta).0, &up), &gamma, &dg);
        check(&|b| dot(&fwd(&x, &gamma, b).0, &up), &beta, &db);
    }

    #[test]
    fn pooling_and_relu_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = Shape4 { b: 2, l: 2, f: 6, c: 2 };
        let x = rand_vec(s.len(), &mut rng);
        let up = rand_vec(s.len() / 3, &mut rng);
        let (_, arg) = maxpool_freq(&x, s, 3);
        let dx = maxpool_backward(&arg, x.len(), &up);
        check(&|x| dot(&maxpool_freq(x, s, 3).0, &up), &x, &dx);
        let up2 = rand_vec(s.len(), &mut rng);
        let mut y = x.clone();
        relu(&mut y);
        let mut d = up2.clone();
        relu_backward(&y, &mut d);
        check(
            &|x| {
                let mut y = x.to_vec();
                relu(&mut y);
                dot(&y, &up2)
            },
            &x,
            &d,
        );
    }

    #[test]
    fn dense_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (rows, din, dout) = (5, 4, 3);
        let x = rand_vec(rows * din, &mut rng);
        let w = rand_vec(din * dout, &mut rng);
        let b = rand_vec(dout, &mut rng);
        let up = rand_vec(rows * dout, &mut rng);
        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; dout];
        let dx = dense_backward(&x, rows, din, &w, dout, &up, &mut dw, &mut db);
        check(&|x| dot(&dense_forward(x, rows, din, &w, &b, dout), &up), &x, &dx);
        check(&|w| dot(&dense_forward(&x, rows, din, w, &b, dout), &up), &w, &dw);
        check(&|bb| dot(&dense_forward(&x, rows, din, &w, bb, dout), &up), &b, &db);
    }

    #[test]
    fn gru_gradients_both_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (b, l, d, q) = (2, 4, 3, 2);
        let x = rand_vec(b * l * d, &mut rng);
        let w = rand_vec(d * 3 * q, &mut rng);
        let u = rand_vec(q * 3 * q, &mut rng);
        let bias = rand_vec(3 * q, &mut rng);
        let up = rand_vec(b * l * q, &mut rng);
        for reverse in [false, true] {
            let (_, cache) = gru_forward(&x, b, l, d, &w, &u, &bias, q, reverse);
            let mut dw = vec![0.0; w.len()];
            let mut du = vec![0.0; u.len()];
            let mut db = vec![0.0; bias.len()];
            let dx = gru_backward(&cache, b, l, d, &w, &u, q, reverse, &up, &mut dw, &mut du, &mut db);
            let f = |x: &[f64], w: &[f64], u: &[f64], bias: &[f64]| dot(&gru_forward(x, b, l, d, w, u, bias, q, reverse).0, &up);
            check(&|x| f(x, &w, &u, &bias), &x, &dx);
            check(&|w| f(&x, w, &u, &bias), &w, &dw);
            check(&|u| f(&x, &w, u, &bias), &u, &du);
            check(&|bb| f(&x, &w, &u, bb), &bias, &db);
        }
    }

    #[test]
    fn gru_zero_input_zero_output() {
        let (y, _) = gru_forward(&[0.0; 12], 1, 4, 3, &[0.3; 18], &[0.2; 12], &[0.0; 6], 2, false);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reversing_input_swaps_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (l, d, q) = (5, 2, 3);
        let x = rand_vec(l * d, &mut rng);
        let w = rand_vec(d * 3 * q, &mut rng);
        let u = rand_vec(q * 3 * q, &mut rng);
        let bias = rand_vec(3 * q, &mut rng);
        let xr: Vec<f64> = x.chunks_exact(d).rev().flatten().copied().collect();
        let (fwd, _) = gru_forward(&x, 1, l, d, &w, &u, &bias, q, false);
        let (bwd_rev, _) = gru_forward(&xr, 1, l, d, &w, &u, &bias, q, true);
        let bwd_rev_flipped: Vec<f64> = bwd_rev.chunks_exact(q).rev().flatten().copied().collect();
        assert_eq!(fwd, bwd_rev_flipped);
    }
}
