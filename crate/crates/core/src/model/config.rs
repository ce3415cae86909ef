use serde::{Deserialize, Serialize};

use crate::error::{Result, VadError};

fn default_input_side() -> usize {
    32
}

/// Architecture hyperparameters. Field names follow the usual table
/// columns: conv kernel and width for both convolutions, dense width and
/// LSTM width (per direction).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub conv1_kernel: [usize; 2],
    pub conv1_width: usize,
    pub conv2_kernel: [usize; 2],
    pub conv2_width: usize,
    pub dense_width: usize,
    pub lstm_width: usize,
    pub bidirectional: bool,
    #[serde(default)]
    pub dropout_rate: f32,
    #[serde(default = "default_input_side")]
    pub input_height: usize,
    #[serde(default = "default_input_side")]
    pub input_width: usize,
}

/// Spatial sizes after each stage, for a valid config.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShapes {
    pub conv1: [usize; 3],
    pub pool1: [usize; 3],
    pub conv2: [usize; 3],
    pub pool2: [usize; 3],
    pub flat: usize,
}

impl ModelConfig {
    /// 5×5/32, 3×3/128, dense 64, BiLSTM 128.
    pub fn best() -> Self {
        Self {
            conv1_kernel: [5, 5],
            conv1_width: 32,
            conv2_kernel: [3, 3],
            conv2_width: 128,
            dense_width: 64,
            lstm_width: 128,
            bidirectional: true,
            dropout_rate: 0.0,
            input_height: 32,
            input_width: 32,
        }
    }

    /// 5×5/32, 3×3/32, dense 64, BiLSTM 32.
    pub fn small() -> Self {
        Self {
            conv2_width: 32,
            lstm_width: 32,
            ..Self::best()
        }
    }

    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    /// Valid convolutions and 2×2 pools from the input size.
    pub fn shapes(&self) -> Result<LayerShapes> {
        let widths = [
            ("conv1_width", self.conv1_width),
            ("conv2_width", self.conv2_width),
            ("dense_width", self.dense_width),
            ("lstm_width", self.lstm_width),
            ("conv1 kernel height", self.conv1_kernel[0]),
            ("conv1 kernel width", self.conv1_kernel[1]),
            ("conv2 kernel height", self.conv2_kernel[0]),
            ("conv2 kernel width", self.conv2_kernel[1]),
        ];
        for (name, v) in widths {
            if v == 0 {
                return Err(VadError::config(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(VadError::config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        let stage = |name: &str, h: usize, w: usize, k: [usize; 2]| -> Result<(usize, usize)> {
            if k[0] > h || k[1] > w {
                return Err(VadError::config(format!(
                    "{name} kernel {}×{} does not fit the {h}×{w} feature map",
                    k[0], k[1]
                )));
            }
            let (ch, cw) = (h - k[0] + 1, w - k[1] + 1);
            if ch < 2 || cw < 2 {
                return Err(VadError::config(format!(
                    "{name} output {ch}×{cw} vanishes under 2×2 pooling"
                )));
            }
            Ok((ch, cw))
        };
        let (c1h, c1w) = stage(
            "conv1",
            self.input_height,
            self.input_width,
            self.conv1_kernel,
        )?;
        let (p1h, p1w) = (c1h / 2, c1w / 2);
        let (c2h, c2w) = stage("conv2", p1h, p1w, self.conv2_kernel)?;
        let (p2h, p2w) = (c2h / 2, c2w / 2);
        Ok(LayerShapes {
            conv1: [c1h, c1w, self.conv1_width],
            pool1: [p1h, p1w, self.conv1_width],
            conv2: [c2h, c2w, self.conv2_width],
            pool2: [p2h, p2w, self.conv2_width],
            flat: p2h * p2w * self.conv2_width,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    /// Parameter count per layer, in file order.
    pub fn layer_breakdown(&self) -> Result<Vec<(&'static str, usize)>> {
        let s = self.shapes()?;
        let [k1h, k1w] = self.conv1_kernel;
        let [k2h, k2w] = self.conv2_kernel;
        let (c1, c2, d, l) = (
            self.conv1_width,
            self.conv2_width,
            self.dense_width,
            self.lstm_width,
        );
        let lstm = 4 * (d * l + l * l + l);
        let mut layers = vec![
            ("conv1", k1h * k1w * c1 + c1),
            ("conv2", k2h * k2w * c1 * c2 + c2),
            ("dense", s.flat * d + d),
            ("lstm_fwd", lstm),
        ];
        if self.bidirectional {
            layers.push(("lstm_bwd", lstm));
        }
        layers.push(("output", self.directions() * l * 2 + 2));
        Ok(layers)
    }
}

/// Closed-form number of trainable scalars.
pub fn count_params(config: &ModelConfig) -> Result<usize> {
    Ok(config.layer_breakdown()?.iter().map(|(_, n)| n).sum())
}
