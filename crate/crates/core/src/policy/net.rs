//! Permutation-invariant set network with a hand-written backward pass.
//!
//! Rows are first put in a canonical order (lexicographic by value), so every
//! floating-point reduction runs in the same order whatever order the rows
//! arrived in. The forward pass is
//!
//! ```text
//! h_i = tanh(We x_i + be)
//! z_i = h_i + tanh(Wo attn(h)_i + bo)     (or z_i = h_i without attention)
//! g   = [mean_i z_i ; z_self]
//! y   = W2 tanh(W1 g + b1) + b2
//! ```
//!
//! where `attn` is multi-head scaled dot-product self-attention over rows.

use std::cmp::Ordering;
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub input: usize,
    pub embed: usize,
    /// Attention heads; 0 falls back to plain mean pooling.
    pub heads: usize,
    pub hidden: usize,
    pub output: usize,
    /// Column holding the self indicator, used to pick the self row.
    pub indicator: Option<usize>,
}

impl NetShape {
    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.embed == 0 || self.hidden == 0 || self.output == 0 {
            return Err(Error::invalid("network dimensions must be positive"));
        }
        if self.heads > 0 && self.embed % self.heads != 0 {
            return Err(Error::invalid(format!(
                "embedding width {} is not divisible by {} heads",
                self.embed, self.heads
            )));
        }
        if let Some(c) = self.indicator {
            if c >= self.input {
                return Err(Error::invalid("indicator column out of range"));
            }
        }
        Ok(())
    }

    fn layout(&self) -> Layout {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let (d, h) = (self.embed, self.hidden);
        let we = take(d * self.input);
        let be = take(d);
        let (wq, wk, wv, wo, bo) = if self.heads > 0 {
            (take(d * d), take(d * d), take(d * d), take(d * d), take(d))
        } else {
            (0..0, 0..0, 0..0, 0..0, 0..0)
        };
        let w1 = take(h * 2 * d);
        let b1 = take(h);
        let w2 = take(self.output * h);
        let b2 = take(self.output);
        Layout {
            we,
            be,
            wq,
            wk,
            wv,
            wo,
            bo,
            w1,
            b1,
            w2,
            b2,
            total: at,
        }
    }

    pub fn n_params(&self) -> usize {
        self.layout().total
    }
}

#[derive(Debug, Clone)]
struct Layout {
    we: Range<usize>,
    be: Range<usize>,
    wq: Range<usize>,
    wk: Range<usize>,
    wv: Range<usize>,
    wo: Range<usize>,
    bo: Range<usize>,
    w1: Range<usize>,
    b1: Range<usize>,
    w2: Range<usize>,
    b2: Range<usize>,
    total: usize,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    rows: usize,
    x: Vec<f64>,
    h: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    p: Vec<f64>,
    c: Vec<f64>,
    o: Vec<f64>,
    self_row: Option<usize>,
    g: Vec<f64>,
    u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetNet {
    shape: NetShape,
    params: Vec<f64>,
    layout_total: usize,
}

// y[r] += sum_c w[r*cols + c] * x[c]
fn matvec_add(w: &[f64], cols: usize, x: &[f64], y: &mut [f64]) {
    for (r, yr) in y.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        *yr += acc;
    }
}

// x_grad[c] += sum_r w[r*cols + c] * dy[r];  w_grad[r*cols + c] += dy[r] * x[c]
fn matvec_back(w: &[f64], cols: usize, x: &[f64], dy: &[f64], w_grad: &mut [f64], x_grad: Option<&mut [f64]>) {
    for (r, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let gw = &mut w_grad[r * cols..(r + 1) * cols];
        for (g, xv) in gw.iter_mut().zip(x) {
            *g += d * xv;
        }
    }
    if let Some(xg) = x_grad {
        for (r, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &w[r * cols..(r + 1) * cols];
            for (g, wv) in xg.iter_mut().zip(row) {
                *g += d * wv;
            }
        }
    }
}

fn row_order(data: &[f64], width: usize) -> Vec<usize> {
    let rows = data.len() / width;
    let mut idx: Vec<usize> = (0..rows).collect();
    idx.sort_by(|&a, &b| {
        let ra = &data[a * width..(a + 1) * width];
        let rb = &data[b * width..(b + 1) * width];
        ra.iter()
            .zip(rb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    idx
}

impl SetNet {
    /// Glorot-uniform weights, zero biases; the output layer is scaled by `output_scale`.
    pub fn new<R: Rng + ?Sized>(shape: NetShape, output_scale: f64, rng: &mut R) -> Result<Self> {
        shape.validate()?;
        let lay = shape.layout();
        let mut params = vec![0.0; lay.total];
        let (d, h) = (shape.embed, shape.hidden);
        let mut fill = |range: &Range<usize>, fan_in: usize, fan_out: usize, scale: f64| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt() * scale;
            for p in &mut params[range.clone()] {
                *p = rng.gen_range(-a..=a);
            }
        };
        fill(&lay.we, shape.input, d, 1.0);
        for r in [&lay.wq, &lay.wk, &lay.wv, &lay.wo] {
            if !r.is_empty() {
                fill(r, d, d, 1.0);
            }
        }
        fill(&lay.w1, 2 * d, h, 1.0);
        fill(&lay.w2, h, shape.output, output_scale);
        Ok(SetNet {
            shape,
            params,
            layout_total: lay.total,
        })
    }

    pub fn from_params(shape: NetShape, params: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        let total = shape.n_params();
        if params.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                actual: params.len(),
            });
        }
        Ok(SetNet {
            shape,
            params,
            layout_total: total,
        })
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.layout_total
    }

    pub fn forward(&self, data: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_tape(data)?.0)
    }

    /// Forward pass over a row-major `rows x input` matrix.
    pub fn forward_tape(&self, data: &[f64]) -> Result<(Vec<f64>, Tape)> {
        let s = &self.shape;
        let w = s.input;
        if data.is_empty() || data.len() % w != 0 {
            return Err(Error::DimensionMismatch {
                expected: w,
                actual: data.len(),
            });
        }
        let lay = s.layout();
        let p = &self.params;
        let rows = data.len() / w;
        let d = s.embed;

        let order = row_order(data, w);
        let mut x = Vec::with_capacity(data.len());
        for &r in &order {
            x.extend_from_slice(&data[r * w..(r + 1) * w]);
        }
        let self_row = s.indicator.and_then(|c| (0..rows).find(|&r| x[r * w + c] == 1.0));

        let mut h = vec![0.0; rows * d];
        for r in 0..rows {
            let hr = &mut h[r * d..(r + 1) * d];
            hr.copy_from_slice(&p[lay.be.clone()]);
            matvec_add(&p[lay.we.clone()], w, &x[r * w..(r + 1) * w], hr);
            for v in hr.iter_mut() {
                *v = v.tanh();
            }
        }

        let (mut q, mut k, mut v, mut pr, mut c, mut o) = (vec![], vec![], vec![], vec![], vec![], vec![]);
        let mut z = h.clone();
        if s.heads > 0 {
            q = vec![0.0; rows * d];
            k = vec![0.0; rows * d];
            v = vec![0.0; rows * d];
            for r in 0..rows {
                let hr = &h[r * d..(r + 1) * d];
                matvec_add(&p[lay.wq.clone()], d, hr, &mut q[r * d..(r + 1) * d]);
                matvec_add(&p[lay.wk.clone()], d, hr, &mut k[r * d..(r + 1) * d]);
                matvec_add(&p[lay.wv.clone()], d, hr, &mut v[r * d..(r + 1) * d]);
            }
            let dh = d / s.heads;
            let scale = 1.0 / (dh as f64).sqrt();
            pr = vec![0.0; s.heads * rows * rows];
            c = vec![0.0; rows * d];
            for hd in 0..s.heads {
                let cols = hd * dh..(hd + 1) * dh;
                for i in 0..rows {
                    let pi = &mut pr[(hd * rows + i) * rows..(hd * rows + i + 1) * rows];
                    let qi = &q[i * d + cols.start..i * d + cols.end];
                    for (j, pij) in pi.iter_mut().enumerate() {
                        let kj = &k[j * d + cols.start..j * d + cols.end];
                        *pij = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
                    }
                    let mx = pi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut tot = 0.0;
                    for pij in pi.iter_mut() {
                        *pij = (*pij - mx).exp();
                        tot += *pij;
                    }
                    for pij in pi.iter_mut() {
                        *pij /= tot;
                    }
                    for (j, &pij) in pi.iter().enumerate() {
                        for cc in cols.clone() {
                            c[i * d + cc] += pij * v[j * d + cc];
                        }
                    }
                }
            }
            o = vec![0.0; rows * d];
            for r in 0..rows {
                let or = &mut o[r * d..(r + 1) * d];
                or.copy_from_slice(&p[lay.bo.clone()]);
                matvec_add(&p[lay.wo.clone()], d, &c[r * d..(r + 1) * d], or);
                for (val, zz) in or.iter_mut().zip(&mut z[r * d..(r + 1) * d]) {
                    *val = val.tanh();
                    *zz += *val;
                }
            }
        }

        let mut g = vec![0.0; 2 * d];
        for r in 0..rows {
            for j in 0..d {
                g[j] += z[r * d + j];
            }
        }
        for gj in g[..d].iter_mut() {
            *gj /= rows as f64;
        }
        if let Some(sr) = self_row {
            g[d..].copy_from_slice(&z[sr * d..(sr + 1) * d]);
        }

        let mut u = p[lay.b1.clone()].to_vec();
        matvec_add(&p[lay.w1.clone()], 2 * d, &g, &mut u);
        for val in u.iter_mut() {
            *val = val.tanh();
        }
        let mut y = p[lay.b2.clone()].to_vec();
        matvec_add(&p[lay.w2.clone()], s.hidden, &u, &mut y);

        Ok((
            y,
            Tape {
                rows,
                x,
                h,
                q,
                k,
                v,
                p: pr,
                c,
                o,
                self_row,
                g,
                u,
            },
        ))
    }

    /// Accumulates `d(dy . y)/d(params)` into `grad`.
    pub fn backward(&self, tape: &Tape, dy: &[f64], grad: &mut [f64]) {
        let s = &self.shape;
        let lay = s.layout();
        let p = &self.params;
        let (rows, d, w) = (tape.rows, s.embed, s.input);
        debug_assert_eq!(dy.len(), s.output);
        debug_assert_eq!(grad.len(), lay.total);

        for (gb, &v) in grad[lay.b2.clone()].iter_mut().zip(dy) {
            *gb += v;
        }
        let mut du = vec![0.0; s.hidden];
        matvec_back(&p[lay.w2.clone()], s.hidden, &tape.u, dy, &mut grad[lay.w2.clone()], Some(&mut du));
        for (v, &uu) in du.iter_mut().zip(&tape.u) {
            *v *= 1.0 - uu * uu;
        }
        for (gb, &v) in grad[lay.b1.clone()].iter_mut().zip(&du) {
            *gb += v;
        }
        let mut dg = vec![0.0; 2 * d];
        matvec_back(&p[lay.w1.clone()], 2 * d, &tape.g, &du, &mut grad[lay.w1.clone()], Some(&mut dg));

        let mut dz = vec![0.0; rows * d];
        for r in 0..rows {
            for j in 0..d {
                dz[r * d + j] = dg[j] / rows as f64;
            }
        }
        if let Some(sr) = tape.self_row {
            for j in 0..d {
                dz[sr * d + j] += dg[d + j];
            }
        }

        let mut dh = dz.clone();
        if s.heads > 0 {
            let mut dc = vec![0.0; rows * d];
            for r in 0..rows {
                let dpre: Vec<f64> = dz[r * d..(r + 1) * d]
                    .iter()
                    .zip(&tape.o[r * d..(r + 1) * d])
                    .map(|(g, o)| g * (1.0 - o * o))
                    .collect();
                for (gb, &v) in grad[lay.bo.clone()].iter_mut().zip(&dpre) {
                    *gb += v;
                }
                matvec_back(
                    &p[lay.wo.clone()],
                    d,
                    &tape.c[r * d..(r + 1) * d],
                    &dpre,
                    &mut grad[lay.wo.clone()],
                    Some(&mut dc[r * d..(r + 1) * d]),
                );
            }
            let dhd = d / s.heads;
            let scale = 1.0 / (dhd as f64).sqrt();
            let mut dq = vec![0.0; rows * d];
            let mut dk = vec![0.0; rows * d];
            let mut dv = vec![0.0; rows * d];
            let mut dp = vec![0.0; rows];
            for hd in 0..s.heads {
                let cols = hd * dhd..(hd + 1) * dhd;
                for i in 0..rows {
                    let pi = &tape.p[(hd * rows + i) * rows..(hd * rows + i + 1) * rows];
                    let dci = &dc[i * d + cols.start..i * d + cols.end];
                    for j in 0..rows {
                        let vj = &tape.v[j * d + cols.start..j * d + cols.end];
                        dp[j] = dci.iter().zip(vj).map(|(a, b)| a * b).sum();
                        for (t, cc) in cols.clone().enumerate() {
                            dv[j * d + cc] += pi[j] * dci[t];
                        }
                    }
                    let dot: f64 = pi.iter().zip(&dp).map(|(a, b)| a * b).sum();
                    for j in 0..rows {
                        let ds = pi[j] * (dp[j] - dot) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        for cc in cols.clone() {
                            dq[i * d + cc] += ds * tape.k[j * d + cc];
                            dk[j * d + cc] += ds * tape.q[i * d + cc];
                        }
                    }
                }
            }
            for r in 0..rows {
                let hr = &tape.h[r * d..(r + 1) * d];
                let dhr = &mut dh[r * d..(r + 1) * d];
                matvec_back(&p[lay.wq.clone()], d, hr, &dq[r * d..(r + 1) * d], &mut grad[lay.wq.clone()], Some(&mut *dhr));
                matvec_back(&p[lay.wk.clone()], d, hr, &dk[r * d..(r + 1) * d], &mut grad[lay.wk.clone()], Some(&mut *dhr));
                matvec_back(&p[lay.wv.clone()], d, hr, &dv[r * d..(r + 1) * d], &mut grad[lay.wv.clone()], Some(dhr));
            }
        }

        for r in 0..rows {
            let da: Vec<f64> = dh[r * d..(r + 1) * d]
                .iter()
                .zip(&tape.h[r * d..(r + 1) * d])
                .map(|(g, h)| g * (1.0 - h * h))
                .collect();
            for (gb, &v) in grad[lay.be.clone()].iter_mut().zip(&da) {
                *gb += v;
            }
            matvec_back(&p[lay.we.clone()], w, &tape.x[r * w..(r + 1) * w], &da, &mut grad[lay.we.clone()], None);
        }
    }
}
