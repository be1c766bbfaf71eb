use crate::error::{Error, Result};

/// Negative-side slope of the leaky ReLU used throughout.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    LeakyRelu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu if z < 0.0 => LEAKY_SLOPE * z,
            _ => z,
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu if z < 0.0 => LEAKY_SLOPE,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense,
    Conv2d,
}

impl LayerKind {
    pub fn tag(self) -> u8 {
        match self {
            LayerKind::Dense => 0,
            LayerKind::Conv2d => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(LayerKind::Dense),
            1 => Some(LayerKind::Conv2d),
            _ => None,
        }
    }

    /// Number of `u32` shape dims a checkpoint stores for this kind.
    pub fn weight_rank(self) -> usize {
        match self {
            LayerKind::Dense => 2,
            LayerKind::Conv2d => 4,
        }
    }
}

/// One entry of a fixed sequential architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
    },
    /// Square-kernel convolution over a `[channels, height, width]` input.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        in_height: usize,
        in_width: usize,
        activation: Activation,
    },
}

impl LayerSpec {
    pub fn dense(inputs: usize, outputs: usize, activation: Activation) -> Self {
        LayerSpec::Dense {
            inputs,
            outputs,
            activation,
        }
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Dense { .. } => LayerKind::Dense,
            LayerSpec::Conv2d { .. } => LayerKind::Conv2d,
        }
    }

    pub fn activation(&self) -> Activation {
        match *self {
            LayerSpec::Dense { activation, .. } | LayerSpec::Conv2d { activation, .. } => activation,
        }
    }

    pub fn output_hw(&self) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Conv2d {
                kernel,
                stride,
                padding,
                in_height,
                in_width,
                ..
            } => Some((
                (in_height + 2 * padding - kernel) / stride + 1,
                (in_width + 2 * padding - kernel) / stride + 1,
            )),
            LayerSpec::Dense { .. } => None,
        }
    }

    pub fn input_len(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, .. } => inputs,
            LayerSpec::Conv2d {
                in_channels,
                in_height,
                in_width,
                ..
            } => in_channels * in_height * in_width,
        }
    }

    pub fn output_len(&self) -> usize {
        match *self {
            LayerSpec::Dense { outputs, .. } => outputs,
            LayerSpec::Conv2d { out_channels, .. } => {
                let (h, w) = self.output_hw().unwrap_or((0, 0));
                out_channels * h * w
            }
        }
    }

    /// Weight tensor shape: `[out, in]` or `[out_ch, in_ch, k, k]`.
    pub fn weight_shape(&self) -> Vec<usize> {
        match *self {
            LayerSpec::Dense { inputs, outputs, .. } => vec![outputs, inputs],
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![out_channels, in_channels, kernel, kernel],
        }
    }

    pub fn bias_len(&self) -> usize {
        self.weight_shape()[0]
    }

    pub fn fan_in_out(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Dense { inputs, outputs, .. } => (inputs, outputs),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => (in_channels * kernel * kernel, out_channels * kernel * kernel),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_shape().iter().product::<usize>() + self.bias_len()
    }

    pub(crate) fn validate(&self, index: usize) -> Result<()> {
        let bad = |detail: &str| Error::Shape {
            layer: index,
            detail: detail.to_string(),
        };
        match *self {
            LayerSpec::Dense { inputs, outputs, .. } => {
                if inputs == 0 || outputs == 0 {
                    return Err(bad("dense dimensions must be positive"));
                }
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                in_height,
                in_width,
                ..
            } => {
                if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 {
                    return Err(bad("conv dimensions must be positive"));
                }
                if in_height + 2 * padding < kernel || in_width + 2 * padding < kernel {
                    return Err(bad("kernel larger than padded input"));
                }
            }
        }
        Ok(())
    }
}
