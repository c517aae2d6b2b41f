//! Batched truncated-Taylor propagation through the MLP.
//!
//! Every point carries a value channel plus `d/dx`, `d²/dx²`, `d³/dx³` (up to
//! the requested order) and optionally `d/dt`. Channels are stacked as row
//! blocks of one `(channels * batch) x width` matrix so each affine layer is a
//! single GEMM; `tanh` is pushed through the jets with Faà di Bruno. The
//! reverse pass differentiates the whole jet computation with respect to the
//! weights, so a loss on input derivatives gets exact parameter gradients.

use alloc::vec;
use alloc::vec::Vec;

use super::arch::MlpArchitecture;
use super::real::{gemm, Real, Strided};
use crate::embed::SpatialEncoding;

/// Which derivative channels to propagate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Channels {
    x_order: usize,
    time: bool,
}

impl Channels {
    pub const VALUE: Channels = Channels { x_order: 0, time: false };

    pub fn new(x_order: usize, time: bool) -> Self {
        assert!(x_order <= 3, "x derivatives are propagated up to third order");
        Self { x_order, time }
    }

    pub fn x_order(&self) -> usize {
        self.x_order
    }

    pub fn has_time(&self) -> bool {
        self.time
    }

    pub fn count(&self) -> usize {
        1 + self.x_order + self.time as usize
    }

    /// Channel holding the `k`-th x derivative (0 is the value).
    pub fn x(&self, k: usize) -> usize {
        debug_assert!(k <= self.x_order);
        k
    }

    pub fn t(&self) -> usize {
        debug_assert!(self.time);
        1 + self.x_order
    }

    pub fn union(self, other: Channels) -> Channels {
        Channels {
            x_order: self.x_order.max(other.x_order),
            time: self.time || other.time,
        }
    }
}

/// Reusable buffers for one batched jet pass and its reverse pass.
///
/// Holds the per-layer inputs, pre-activations and `tanh` values of the last
/// forward call; buffers are recycled across calls.
pub(crate) struct JetWorkspace<R> {
    channels: Channels,
    batch: usize,
    out_width: usize,
    inputs: Vec<Vec<R>>,
    pre: Vec<Vec<R>>,
    act: Vec<Vec<R>>,
    /// Output jets in `f64`, `(channels * batch) x out_width`.
    out: Vec<f64>,
    g: Vec<R>,
    gh: Vec<R>,
    wgrad: Vec<R>,
}

impl<R: Real> Default for JetWorkspace<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Real> JetWorkspace<R> {
    pub fn new() -> Self {
        Self {
            channels: Channels::VALUE,
            batch: 0,
            out_width: 0,
            inputs: Vec::new(),
            pre: Vec::new(),
            act: Vec::new(),
            out: Vec::new(),
            g: Vec::new(),
            gh: Vec::new(),
            wgrad: Vec::new(),
        }
    }

    pub fn outputs(&self) -> &[f64] {
        &self.out
    }

    /// Channel `c` of output `o` at point `p`.
    #[inline]
    pub fn get(&self, c: usize, p: usize, o: usize) -> f64 {
        self.out[(c * self.batch + p) * self.out_width + o]
    }

    fn prepare(&mut self, arch: &MlpArchitecture, channels: Channels, batch: usize) {
        let depth = arch.depth();
        self.channels = channels;
        self.batch = batch;
        self.out_width = arch.output_width();
        self.inputs.resize_with(depth, Vec::new);
        self.pre.resize_with(depth, Vec::new);
        self.act.resize_with(depth.saturating_sub(1), Vec::new);
    }

    /// Seeds `(t, enc(x))` jets and runs the forward pass.
    pub fn evaluate(
        &mut self,
        arch: &MlpArchitecture,
        params: &[R],
        encoding: &SpatialEncoding,
        points: &[(f64, f64)],
        channels: Channels,
    ) {
        self.prepare(arch, channels, points.len());
        let mut input = core::mem::take(&mut self.inputs[0]);
        seed_inputs_into(points, encoding, channels, &mut input);
        self.inputs[0] = input;
        self.run_forward(arch, params);
    }

    /// Forward pass over raw stacked inputs `(channels * batch) x input_width`.
    pub fn forward_raw(&mut self, arch: &MlpArchitecture, params: &[R], input: &[R], channels: Channels, batch: usize) {
        self.prepare(arch, channels, batch);
        self.inputs[0].clear();
        self.inputs[0].extend_from_slice(input);
        self.run_forward(arch, params);
    }

    fn run_forward(&mut self, arch: &MlpArchitecture, params: &[R]) {
        debug_assert_eq!(params.len(), arch.param_count());
        let channels = self.channels;
        let batch = self.batch;
        let rows = channels.count() * batch;
        debug_assert_eq!(self.inputs[0].len(), rows * arch.input_width());
        let depth = arch.depth();
        for (l, slot) in arch.layer_slots().enumerate() {
            let a = &mut self.pre[l];
            a.resize(rows * slot.fan_out, R::ZERO);
            gemm(
                rows,
                slot.fan_in,
                slot.fan_out,
                R::ONE,
                Strided::row_major(&self.inputs[l], slot.fan_in),
                Strided::transposed(&params[slot.weight..slot.bias], slot.fan_in),
                R::ZERO,
                a,
            );
            let bias = &params[slot.bias..slot.bias + slot.fan_out];
            for row in a[..batch * slot.fan_out].chunks_exact_mut(slot.fan_out) {
                for (v, &b) in row.iter_mut().zip(bias) {
                    *v += b;
                }
            }
            if l + 1 == depth {
                self.out.clear();
                self.out.extend(a.iter().map(|v| v.to_f64()));
                break;
            }
            let mut next = core::mem::take(&mut self.inputs[l + 1]);
            next.resize(rows * slot.fan_out, R::ZERO);
            let s = &mut self.act[l];
            s.resize(batch * slot.fan_out, R::ZERO);
            tanh_forward(&self.pre[l], channels, batch, slot.fan_out, &mut next, s);
            self.inputs[l + 1] = next;
        }
    }

    /// Adds the gradient of `sum_{c,p,o} g_out[c,p,o] * out[c,p,o]` with
    /// respect to the parameters into `grad`.
    pub fn backward(&mut self, arch: &MlpArchitecture, params: &[R], g_out: &[f64], grad: &mut [f64]) {
        let channels = self.channels;
        let batch = self.batch;
        let rows = channels.count() * batch;
        assert_eq!(g_out.len(), rows * self.out_width);
        assert_eq!(grad.len(), arch.param_count());

        let slots: Vec<_> = arch.layer_slots().collect();
        self.g.clear();
        self.g.extend(g_out.iter().map(|&v| R::from_f64(v)));
        for l in (0..slots.len()).rev() {
            let slot = slots[l];
            self.wgrad.resize(slot.fan_out * slot.fan_in, R::ZERO);
            gemm(
                slot.fan_out,
                rows,
                slot.fan_in,
                R::ONE,
                Strided::transposed(&self.g, slot.fan_out),
                Strided::row_major(&self.inputs[l], slot.fan_in),
                R::ZERO,
                &mut self.wgrad,
            );
            for (dst, &src) in grad[slot.weight..slot.bias].iter_mut().zip(&self.wgrad) {
                *dst += src.to_f64();
            }
            let bgrad = &mut grad[slot.bias..slot.bias + slot.fan_out];
            for row in self.g[..batch * slot.fan_out].chunks_exact(slot.fan_out) {
                for (dst, &src) in bgrad.iter_mut().zip(row) {
                    *dst += src.to_f64();
                }
            }
            if l == 0 {
                break;
            }
            self.gh.resize(rows * slot.fan_in, R::ZERO);
            gemm(
                rows,
                slot.fan_out,
                slot.fan_in,
                R::ONE,
                Strided::row_major(&self.g, slot.fan_out),
                Strided::row_major(&params[slot.weight..slot.bias], slot.fan_in),
                R::ZERO,
                &mut self.gh,
            );
            self.g.resize(rows * slot.fan_in, R::ZERO);
            tanh_backward(&self.gh, &self.pre[l - 1], &self.act[l - 1], channels, batch, slot.fan_in, &mut self.g);
        }
    }
}

/// Stacked network inputs `(t, enc(x))` with their x/t jets.
pub(crate) fn seed_inputs_into<R: Real>(
    points: &[(f64, f64)],
    encoding: &SpatialEncoding,
    channels: Channels,
    data: &mut Vec<R>,
) {
    let batch = points.len();
    let width = encoding.network_input_width();
    data.clear();
    data.resize(channels.count() * batch * width, R::ZERO);
    let mut scratch = vec![0.0; encoding.width()];
    for (p, &(t, x)) in points.iter().enumerate() {
        for k in 0..=channels.x_order() {
            let row = &mut data[(channels.x(k) * batch + p) * width..][..width];
            row[0] = R::from_f64(if k == 0 { t } else { 0.0 });
            encoding.derivative_into(x, k, &mut scratch);
            for (dst, &src) in row[1..].iter_mut().zip(&scratch) {
                *dst = R::from_f64(src);
            }
        }
        if channels.has_time() {
            data[(channels.t() * batch + p) * width] = R::ONE;
        }
    }
}

pub(crate) fn convert_params<R: Real>(params: &[f64]) -> Vec<R> {
    params.iter().map(|&v| R::from_f64(v)).collect()
}

#[inline]
fn tanh_derivs<R: Real>(s: R) -> (R, R, R) {
    let two = R::from_f64(2.0);
    let six = R::from_f64(6.0);
    let s1 = R::ONE - s * s;
    let s2 = -(two * s * s1);
    let s3 = s1 * (six * s * s - two);
    (s1, s2, s3)
}

fn tanh_forward<R: Real>(a: &[R], ch: Channels, batch: usize, width: usize, h: &mut [R], s_all: &mut [R]) {
    let block = batch * width;
    let three = R::from_f64(3.0);
    let ox = [0, block, 2 * block, 3 * block];
    let ot = ch.time.then(|| ch.t() * block);
    for i in 0..block {
        let s = a[i].tanh();
        s_all[i] = s;
        h[i] = s;
        let (s1, s2, s3) = tanh_derivs(s);
        if ch.x_order >= 1 {
            let ax = a[ox[1] + i];
            h[ox[1] + i] = s1 * ax;
            if ch.x_order >= 2 {
                let axx = a[ox[2] + i];
                h[ox[2] + i] = s2 * ax * ax + s1 * axx;
                if ch.x_order >= 3 {
                    let axxx = a[ox[3] + i];
                    h[ox[3] + i] = s3 * ax * ax * ax + three * s2 * ax * axx + s1 * axxx;
                }
            }
        }
        if let Some(ot) = ot {
            h[ot + i] = s1 * a[ot + i];
        }
    }
}

fn tanh_backward<R: Real>(gh: &[R], a: &[R], s_all: &[R], ch: Channels, batch: usize, width: usize, ga: &mut [R]) {
    let block = batch * width;
    let two = R::from_f64(2.0);
    let three = R::from_f64(3.0);
    let six = R::from_f64(6.0);
    let twelve = R::from_f64(12.0);
    let ox = [0, block, 2 * block, 3 * block];
    let ot = ch.time.then(|| ch.t() * block);
    for i in 0..block {
        let s = s_all[i];
        let (s1, s2, s3) = tanh_derivs(s);
        let mut gv = gh[i] * s1;
        if ch.x_order >= 1 {
            let ax = a[ox[1] + i];
            let ghx = gh[ox[1] + i];
            gv += ghx * s2 * ax;
            let mut gax = ghx * s1;
            if ch.x_order >= 2 {
                let axx = a[ox[2] + i];
                let ghxx = gh[ox[2] + i];
                gv += ghxx * (s3 * ax * ax + s2 * axx);
                gax += ghxx * two * s2 * ax;
                let mut gaxx = ghxx * s1;
                if ch.x_order >= 3 {
                    let axxx = a[ox[3] + i];
                    let ghxxx = gh[ox[3] + i];
                    let s4 = s2 * (six * s * s - two) + twelve * s * s1 * s1;
                    gv += ghxxx * (s4 * ax * ax * ax + three * s3 * ax * axx + s2 * axxx);
                    gax += ghxxx * (three * s3 * ax * ax + three * s2 * axx);
                    gaxx += ghxxx * three * s2 * ax;
                    ga[ox[3] + i] = ghxxx * s1;
                }
                ga[ox[2] + i] = gaxx;
            }
            ga[ox[1] + i] = gax;
        }
        if let Some(ot) = ot {
            let ght = gh[ot + i];
            gv += ght * s2 * a[ot + i];
            ga[ot + i] = ght * s1;
        }
        ga[i] = gv;
    }
}
