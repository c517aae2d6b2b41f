use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;
use crate::{Error, Result};

/// Layer widths of a dense tanh network: input, hidden..., output.
///
/// Hidden layers use `tanh`; the output layer is affine.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MlpArchitecture {
    widths: Vec<usize>,
}

impl MlpArchitecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "need at least an input and an output width, got {} entries",
                widths.len()
            )));
        }
        if let Some(pos) = widths.iter().position(|&w| w == 0) {
            return Err(Error::InvalidArchitecture(format!("layer {pos} has zero width")));
        }
        Ok(Self { widths })
    }

    /// Input width, `hidden` layers of width `hidden_width`, then `outputs`.
    pub fn uniform(input: usize, hidden_layers: usize, hidden_width: usize, outputs: usize) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden_layers + 2);
        widths.push(input);
        widths.extend(core::iter::repeat_n(hidden_width, hidden_layers));
        widths.push(outputs);
        Self::new(widths)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Number of affine maps.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    /// `sum_l (w_{l-1} * w_l + w_l)`.
    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    /// Offsets of each layer's weight block and bias block in the flat vector.
    pub(crate) fn layer_slots(&self) -> impl Iterator<Item = LayerSlot> + '_ {
        let mut offset = 0;
        self.widths.windows(2).map(move |p| {
            let (fan_in, fan_out) = (p[0], p[1]);
            let slot = LayerSlot {
                fan_in,
                fan_out,
                weight: offset,
                bias: offset + fan_in * fan_out,
            };
            offset += fan_in * fan_out + fan_out;
            slot
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    /// `fan_out x fan_in` row-major.
    pub weight: usize,
    pub bias: usize,
}

/// All weights and biases as one flat vector, layer by layer
/// (row-major weight matrix `fan_out x fan_in`, then the bias).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    /// Rejects non-finite entries.
    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self(values))
    }

    pub fn zeros(arch: &MlpArchitecture) -> Self {
        Self(alloc::vec![0.0; arch.param_count()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn check(&self, arch: &MlpArchitecture) -> Result<()> {
        if self.0.len() != arch.param_count() {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected: arch.param_count(),
                found: self.0.len(),
            });
        }
        Ok(())
    }
}

/// Glorot-uniform weights (`±sqrt(6 / (fan_in + fan_out))`) and zero biases.
pub fn init_params(arch: &MlpArchitecture, seed: u64) -> ParameterVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = alloc::vec![0.0; arch.param_count()];
    for slot in arch.layer_slots() {
        let bound = math::sqrt(6.0 / (slot.fan_in + slot.fan_out) as f64);
        for w in &mut values[slot.weight..slot.bias] {
            *w = bound * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    ParameterVector(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn paper_scale_parameter_count() {
        let arch = MlpArchitecture::new(vec![22, 128, 128, 128, 128, 2]).unwrap();
        let expected = 22 * 128 + 128 + 3 * (128 * 128 + 128) + 128 * 2 + 2;
        assert_eq!(expected, 52738);
        assert_eq!(init_params(&arch, 7).len(), 52738);
    }

    #[test]
    fn smallest_network() {
        let arch = MlpArchitecture::new(vec![1, 1]).unwrap();
        assert_eq!(init_params(&arch, 0).len(), 2);
        assert_eq!(init_params(&arch, 0).as_slice()[1], 0.0);
    }

    #[test]
    fn rejects_short_or_zero_widths() {
        assert!(MlpArchitecture::new(vec![3]).is_err());
        assert!(MlpArchitecture::new(vec![]).is_err());
        assert!(MlpArchitecture::new(vec![3, 0, 1]).is_err());
    }

    #[test]
    fn init_is_seed_deterministic() {
        let arch = MlpArchitecture::new(vec![22, 16, 16, 2]).unwrap();
        assert_eq!(init_params(&arch, 7), init_params(&arch, 7));
        assert_ne!(init_params(&arch, 7), init_params(&arch, 8));
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let arch = MlpArchitecture::new(vec![5, 7, 3]).unwrap();
        let p = init_params(&arch, 1);
        for slot in arch.layer_slots() {
            let bound = (6.0 / (slot.fan_in + slot.fan_out) as f64).sqrt();
            assert!(p.as_slice()[slot.weight..slot.bias].iter().all(|w| w.abs() <= bound));
            assert!(p.as_slice()[slot.bias..slot.bias + slot.fan_out].iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn non_finite_parameters_rejected() {
        assert!(ParameterVector::from_vec(vec![1.0, f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn param_count_formula(widths in proptest::collection::vec(1usize..40, 2..7)) {
            let arch = MlpArchitecture::new(widths.clone()).unwrap();
            let mut expected = 0;
            for l in 1..widths.len() {
                expected += widths[l - 1] * widths[l] + widths[l];
            }
            prop_assert_eq!(arch.param_count(), expected);
            prop_assert_eq!(init_params(&arch, 3).len(), expected);
        }
    }
}
