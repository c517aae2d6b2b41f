//! Dense tanh networks: evaluation, input derivatives, parameter gradients, Adam.

mod adam;
mod arch;
pub(crate) mod jet;
pub(crate) mod real;

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

pub use adam::{adam_step, AdamState};
pub use arch::{init_params, MlpArchitecture, ParameterVector};
pub use jet::Channels;
pub use real::Real;

use crate::embed::SpatialEncoding;
use crate::{Error, Result};

/// Arithmetic used inside the network kernels. Parameters, optimizer state and
/// losses stay in `f64` either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F64,
    F32,
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f64" | "float64" => Ok(Precision::F64),
            "f32" | "float32" => Ok(Precision::F32),
            other => Err(Error::InvalidArgument(alloc::format!("unknown precision `{other}`"))),
        }
    }
}

/// Plain forward pass over raw input vectors.
pub fn forward_batch<I: AsRef<[f64]>>(
    params: &ParameterVector,
    arch: &MlpArchitecture,
    inputs: &[I],
) -> Result<Vec<Vec<f64>>> {
    params.check(arch)?;
    let width = arch.input_width();
    let mut flat = Vec::with_capacity(inputs.len() * width);
    for row in inputs {
        let row = row.as_ref();
        if row.len() != width {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: width,
                found: row.len(),
            });
        }
        flat.extend_from_slice(row);
    }
    let mut ws = jet::JetWorkspace::<f64>::new();
    ws.forward_raw(arch, params.as_slice(), &flat, Channels::VALUE, inputs.len());
    Ok(ws.outputs().chunks_exact(arch.output_width()).map(<[f64]>::to_vec).collect())
}

/// Solution value or one of its derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DerivativeLabel {
    U,
    Ut,
    Ux,
    Uxx,
    Uxxx,
    /// Second network output (chemical potential for Cahn-Hilliard).
    Mu,
    MuXx,
}

impl DerivativeLabel {
    pub const ALL: [DerivativeLabel; 7] = [
        DerivativeLabel::U,
        DerivativeLabel::Ut,
        DerivativeLabel::Ux,
        DerivativeLabel::Uxx,
        DerivativeLabel::Uxxx,
        DerivativeLabel::Mu,
        DerivativeLabel::MuXx,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DerivativeLabel::U => "u",
            DerivativeLabel::Ut => "u_t",
            DerivativeLabel::Ux => "u_x",
            DerivativeLabel::Uxx => "u_xx",
            DerivativeLabel::Uxxx => "u_xxx",
            DerivativeLabel::Mu => "mu",
            DerivativeLabel::MuXx => "mu_xx",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    fn x_order(self) -> usize {
        match self {
            DerivativeLabel::U | DerivativeLabel::Ut | DerivativeLabel::Mu => 0,
            DerivativeLabel::Ux => 1,
            DerivativeLabel::Uxx | DerivativeLabel::MuXx => 2,
            DerivativeLabel::Uxxx => 3,
        }
    }

    /// (output index, channel) in a jet pass with `channels`.
    pub(crate) fn location(self, channels: Channels) -> (usize, usize) {
        match self {
            DerivativeLabel::U => (0, 0),
            DerivativeLabel::Ut => (0, channels.t()),
            DerivativeLabel::Ux => (0, channels.x(1)),
            DerivativeLabel::Uxx => (0, channels.x(2)),
            DerivativeLabel::Uxxx => (0, channels.x(3)),
            DerivativeLabel::Mu => (1, 0),
            DerivativeLabel::MuXx => (1, channels.x(2)),
        }
    }
}

impl FromStr for DerivativeLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DerivativeLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownDerivative(s.to_string()))
    }
}

/// A set of derivative labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct DerivativeRequest(u8);

impl DerivativeRequest {
    pub fn new(labels: &[DerivativeLabel]) -> Self {
        Self(labels.iter().fold(0, |acc, l| acc | l.bit()))
    }

    pub fn parse<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let labels = labels
            .iter()
            .map(|s| s.as_ref().parse())
            .collect::<Result<Vec<DerivativeLabel>>>()?;
        Ok(Self::new(&labels))
    }

    pub fn contains(&self, label: DerivativeLabel) -> bool {
        self.0 & label.bit() != 0
    }

    pub fn labels(&self) -> impl Iterator<Item = DerivativeLabel> + '_ {
        DerivativeLabel::ALL.into_iter().filter(|l| self.contains(*l))
    }

    pub fn channels(&self) -> Channels {
        let x_order = self.labels().map(DerivativeLabel::x_order).max().unwrap_or(0);
        Channels::new(x_order, self.contains(DerivativeLabel::Ut))
    }

    pub fn needs_second_output(&self) -> bool {
        self.contains(DerivativeLabel::Mu) || self.contains(DerivativeLabel::MuXx)
    }
}

/// Per-point values and derivatives; unrequested entries stay `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DerivativeBundle {
    pub u: Option<f64>,
    pub u_t: Option<f64>,
    pub u_x: Option<f64>,
    pub u_xx: Option<f64>,
    pub u_xxx: Option<f64>,
    pub mu: Option<f64>,
    pub mu_xx: Option<f64>,
}

impl DerivativeBundle {
    pub fn get(&self, label: DerivativeLabel) -> Option<f64> {
        match label {
            DerivativeLabel::U => self.u,
            DerivativeLabel::Ut => self.u_t,
            DerivativeLabel::Ux => self.u_x,
            DerivativeLabel::Uxx => self.u_xx,
            DerivativeLabel::Uxxx => self.u_xxx,
            DerivativeLabel::Mu => self.mu,
            DerivativeLabel::MuXx => self.mu_xx,
        }
    }

    pub fn set(&mut self, label: DerivativeLabel, value: f64) {
        let slot = match label {
            DerivativeLabel::U => &mut self.u,
            DerivativeLabel::Ut => &mut self.u_t,
            DerivativeLabel::Ux => &mut self.u_x,
            DerivativeLabel::Uxx => &mut self.u_xx,
            DerivativeLabel::Uxxx => &mut self.u_xxx,
            DerivativeLabel::Mu => &mut self.mu,
            DerivativeLabel::MuXx => &mut self.mu_xx,
        };
        *slot = Some(value);
    }

    pub fn require(&self, label: DerivativeLabel) -> Result<f64> {
        self.get(label).ok_or(Error::MissingDerivative(label))
    }
}

/// Exact derivatives of `(t, x) -> net(t, enc(x))` at each point.
pub fn input_derivatives(
    params: &ParameterVector,
    arch: &MlpArchitecture,
    points: &[(f64, f64)],
    request: DerivativeRequest,
    encoding: &SpatialEncoding,
) -> Result<Vec<DerivativeBundle>> {
    params.check(arch)?;
    if arch.input_width() != encoding.network_input_width() {
        return Err(Error::DimensionMismatch {
            context: "network input vs spatial encoding",
            expected: encoding.network_input_width(),
            found: arch.input_width(),
        });
    }
    if request.needs_second_output() && arch.output_width() < 2 {
        let label = if request.contains(DerivativeLabel::Mu) {
            DerivativeLabel::Mu
        } else {
            DerivativeLabel::MuXx
        };
        return Err(Error::UnsupportedDerivative(label));
    }
    let channels = request.channels();
    let mut eval = jet::JetWorkspace::<f64>::new();
    eval.evaluate(arch, params.as_slice(), encoding, points, channels);
    let mut bundles = vec![DerivativeBundle::default(); points.len()];
    for (p, bundle) in bundles.iter_mut().enumerate() {
        for label in request.labels() {
            let (o, c) = label.location(channels);
            let v = eval.get(c, p, o);
            if !v.is_finite() {
                return Err(Error::NonFinite("input derivatives"));
            }
            bundle.set(label, v);
        }
    }
    Ok(bundles)
}

/// A scalar loss of the parameter vector with a reverse-mode gradient.
pub trait Objective {
    fn param_count(&self) -> usize;

    /// Loss value and, when `grad` is given, its gradient accumulated into it
    /// (the slice is zeroed by the caller).
    fn evaluate(&self, params: &[f64], grad: Option<&mut [f64]>) -> Result<f64>;
}

/// Reverse-mode gradient of `loss` at `params`. A non-finite loss value is an error.
pub fn loss_gradient<O: Objective + ?Sized>(loss: &O, params: &[f64]) -> Result<Vec<f64>> {
    if params.len() != loss.param_count() {
        return Err(Error::DimensionMismatch {
            context: "objective parameters",
            expected: loss.param_count(),
            found: params.len(),
        });
    }
    let mut grad = vec![0.0; params.len()];
    let value = loss.evaluate(params, Some(&mut grad))?;
    if !value.is_finite() {
        return Err(Error::NonFinite("loss value"));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("loss gradient"));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests;
