use std::fmt;

use crate::error::{NpcError, Result};
use crate::nn::dense_param_count;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvLayerSpec {
    pub kernel: (usize, usize),
    pub channels: usize,
    /// A 2x2 stride-2 max pool follows this layer.
    pub pool_after: bool,
}

/// Shape of the siamese trunk and its classifier head.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchitectureSpec {
    /// Window length `d` in frames.
    pub input_frames: usize,
    /// Feature dimension `m`.
    pub input_dim: usize,
    pub convs: Vec<ConvLayerSpec>,
    pub embedding_dim: usize,
    /// Batch-norm + leaky ReLU on the embedding inside the training graph.
    /// The exported embedding is always the dense pre-activation output.
    pub embedding_activation: bool,
    /// Two-way classifier over the L1 distance (cross-entropy training).
    pub classifier_head: bool,
}

impl Default for ArchitectureSpec {
    /// 7x7, 5x5, pool, 4x4, 3x3, pool over a 100 x 40 window, 512-d
    /// embedding. The first layer has 16 maps, the rest 32.
    fn default() -> Self {
        Self::with_channels([16, 32, 32, 32])
    }
}

/// One row of the activation shape ledger.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageShape {
    pub kind: StageKind,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageKind {
    Input,
    Conv,
    Pool,
}

impl fmt::Display for StageShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}×{}", self.channels, self.height, self.width)
    }
}

impl ArchitectureSpec {
    pub fn with_channels(ch: [usize; 4]) -> Self {
        let layer = |k: usize, c: usize, pool: bool| ConvLayerSpec {
            kernel: (k, k),
            channels: c,
            pool_after: pool,
        };
        Self {
            input_frames: 100,
            input_dim: 40,
            convs: vec![
                layer(7, ch[0], false),
                layer(5, ch[1], true),
                layer(4, ch[2], false),
                layer(3, ch[3], true),
            ],
            embedding_dim: 512,
            embedding_activation: true,
            classifier_head: true,
        }
    }

    /// Activation shapes from the input through every conv and pool.
    pub fn activation_chain(&self) -> Result<Vec<StageShape>> {
        let mut shapes = vec![StageShape {
            kind: StageKind::Input,
            channels: 1,
            height: self.input_frames,
            width: self.input_dim,
        }];
        let (mut h, mut w) = (self.input_frames, self.input_dim);
        for (i, c) in self.convs.iter().enumerate() {
            if c.channels == 0 || c.kernel.0 == 0 || c.kernel.1 == 0 {
                return Err(NpcError::InvalidConfig(format!("conv {i} has a zero extent")));
            }
            if h < c.kernel.0 || w < c.kernel.1 {
                return Err(NpcError::InvalidConfig(format!(
                    "conv {i}: {h}x{w} input smaller than {}x{} kernel",
                    c.kernel.0, c.kernel.1
                )));
            }
            h = h - c.kernel.0 + 1;
            w = w - c.kernel.1 + 1;
            shapes.push(StageShape {
                kind: StageKind::Conv,
                channels: c.channels,
                height: h,
                width: w,
            });
            if c.pool_after {
                if h % 2 != 0 || w % 2 != 0 {
                    return Err(NpcError::InvalidConfig(format!(
                        "pool after conv {i} needs even extents, got {h}x{w}"
                    )));
                }
                h /= 2;
                w /= 2;
                shapes.push(StageShape {
                    kind: StageKind::Pool,
                    channels: c.channels,
                    height: h,
                    width: w,
                });
            }
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.convs.is_empty() || self.embedding_dim == 0 {
            return Err(NpcError::InvalidConfig("architecture needs convs and an embedding".into()));
        }
        self.activation_chain().map(|_| ())
    }

    /// Terminal feature-map shape before flattening.
    pub fn terminal_maps(&self) -> Result<StageShape> {
        Ok(*self.activation_chain()?.last().expect("chain starts with the input"))
    }

    pub fn flatten_len(&self) -> Result<usize> {
        let t = self.terminal_maps()?;
        Ok(t.channels * t.height * t.width)
    }

    /// `"94×34 → 90×30 → ..."` over the conv and pool stages.
    pub fn chain_string(&self) -> Result<String> {
        Ok(self
            .activation_chain()?
            .iter()
            .skip(1)
            .map(|s| format!("{}×{}", s.height, s.width))
            .collect::<Vec<_>>()
            .join(" → "))
    }

    /// Trainable parameters: conv kernels and biases, batch-norm scales and
    /// shifts, the embedding layer and the classifier head. Running
    /// statistics are state, not parameters.
    pub fn param_count(&self) -> Result<usize> {
        let mut c_in = 1;
        let mut total = 0;
        for c in &self.convs {
            total += c.channels * c_in * c.kernel.0 * c.kernel.1 + c.channels;
            total += 2 * c.channels;
            c_in = c.channels;
        }
        total += dense_param_count(self.flatten_len()?, self.embedding_dim);
        if self.embedding_activation {
            total += 2 * self.embedding_dim;
        }
        if self.classifier_head {
            total += dense_param_count(self.embedding_dim, 2);
        }
        Ok(total)
    }

    /// Compact numeric encoding stored in checkpoints.
    pub(crate) fn encode(&self) -> Vec<f32> {
        let mut v = vec![
            self.input_frames as f32,
            self.input_dim as f32,
            self.embedding_dim as f32,
            self.embedding_activation as u8 as f32,
            self.classifier_head as u8 as f32,
            self.convs.len() as f32,
        ];
        for c in &self.convs {
            v.extend([
                c.kernel.0 as f32,
                c.kernel.1 as f32,
                c.channels as f32,
                c.pool_after as u8 as f32,
            ]);
        }
        v
    }

    pub(crate) fn decode(v: &[f32]) -> Result<Self> {
        let bad = || NpcError::CorruptFile("malformed architecture record".into());
        let u = |x: f32| -> Result<usize> {
            if x >= 0.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(bad())
            }
        };
        if v.len() < 6 {
            return Err(bad());
        }
        let n = u(v[5])?;
        if v.len() != 6 + 4 * n {
            return Err(bad());
        }
        let convs = v[6..]
            .chunks(4)
            .map(|c| {
                Ok(ConvLayerSpec {
                    kernel: (u(c[0])?, u(c[1])?),
                    channels: u(c[2])?,
                    pool_after: c[3] != 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = Self {
            input_frames: u(v[0])?,
            input_dim: u(v[1])?,
            embedding_dim: u(v[2])?,
            embedding_activation: v[3] != 0.0,
            classifier_head: v[4] != 0.0,
            convs,
        };
        spec.validate()?;
        Ok(spec)
    }
}
