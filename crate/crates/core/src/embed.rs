//! Fourier feature encoding of the spatial coordinate.
//!
//! The network sees `(t, v(x))` with
//! `v(x) = (1, cos(wx), sin(wx), ..., cos(mwx), sin(mwx))` and `w = 2π / period`,
//! so every network output is exactly periodic in `x` with the domain period.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::math;
use crate::{Error, Result};

/// Hard periodic constraint through `m` Fourier harmonics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicEmbedding {
    harmonics: usize,
    period: f64,
}

impl PeriodicEmbedding {
    pub fn new(harmonics: usize, period: f64) -> Result<Self> {
        if harmonics == 0 {
            return Err(Error::InvalidArgument("embedding needs at least one harmonic".into()));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidArgument("embedding period must be positive".into()));
        }
        Ok(Self { harmonics, period })
    }

    pub fn harmonics(&self) -> usize {
        self.harmonics
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// `2m + 1`.
    pub fn width(&self) -> usize {
        2 * self.harmonics + 1
    }

    /// Writes the `order`-th x-derivative of every feature into `out`.
    ///
    /// `d^n/dx^n cos(a x) = a^n cos(a x + nπ/2)` and likewise for `sin`.
    pub fn derivative_into(&self, x: f64, order: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.width());
        out[0] = if order == 0 { 1.0 } else { 0.0 };
        let omega = self.omega();
        let shift = order as f64 * FRAC_PI_2;
        for k in 1..=self.harmonics {
            let freq = k as f64 * omega;
            let scale = math::powi(freq, order as i32);
            let (s, c) = if order == 0 {
                (math::sin(freq * x), math::cos(freq * x))
            } else {
                (math::sin(freq * x + shift), math::cos(freq * x + shift))
            };
            out[2 * k - 1] = scale * c;
            out[2 * k] = scale * s;
        }
    }
}

/// `(1, cos(wx), sin(wx), ..., cos(mwx), sin(mwx))`.
pub fn fourier_embed(emb: &PeriodicEmbedding, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; emb.width()];
    emb.derivative_into(x, 0, &mut out);
    out
}

/// How the spatial coordinate is presented to the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialEncoding {
    /// Raw `x`; no boundary condition is imposed.
    Identity,
    Periodic(PeriodicEmbedding),
}

impl SpatialEncoding {
    /// Width of the encoded spatial features (the network input width is one more, for `t`).
    pub fn width(&self) -> usize {
        match self {
            SpatialEncoding::Identity => 1,
            SpatialEncoding::Periodic(e) => e.width(),
        }
    }

    pub fn network_input_width(&self) -> usize {
        1 + self.width()
    }

    pub fn derivative_into(&self, x: f64, order: usize, out: &mut [f64]) {
        match self {
            SpatialEncoding::Identity => {
                out[0] = match order {
                    0 => x,
                    1 => 1.0,
                    _ => 0.0,
                }
            }
            SpatialEncoding::Periodic(e) => e.derivative_into(x, order, out),
        }
    }
}
