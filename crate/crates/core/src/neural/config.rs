use serde::{Deserialize, Serialize};

use crate::dsp::targets::DoaFormat;
use crate::error::{invalid, Result};

/// How the two directions of a bidirectional GRU layer are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GruMerge {
    /// Element-wise product; the layer outputs `Q` values per frame.
    #[default]
    Mul,
    /// Forward then backward state; `2Q` values per frame.
    Concat,
}

/// Topology and optimizer settings of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeldnetConfig {
    /// Filters per conv block.
    pub conv_filters: Vec<usize>,
    /// Frequency max-pool factor per conv block.
    pub freq_pools: Vec<usize>,
    pub gru_layers: usize,
    pub gru_width: usize,
    pub gru_merge: GruMerge,
    pub fc_width: usize,
    pub classes: usize,
    pub channels: usize,
    pub bins: usize,
    pub seq_len: usize,
    pub doa_format: DoaFormat,
    pub w_doa: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for SeldnetConfig {
    /// Tuned FOA network: 11 classes, 512-point frames, 512-frame sequences.
    fn default() -> Self {
        Self {
            conv_filters: vec![64; 3],
            freq_pools: vec![8, 8, 2],
            gru_layers: 2,
            gru_width: 128,
            gru_merge: GruMerge::Mul,
            fc_width: 128,
            classes: 11,
            channels: 4,
            bins: 256,
            seq_len: 512,
            doa_format: DoaFormat::Cartesian,
            w_doa: 50.0,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl SeldnetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.conv_filters.len() != self.freq_pools.len() {
            return Err(invalid("one pooling factor is needed per conv block"));
        }
        if self.conv_filters.contains(&0) || self.freq_pools.contains(&0) {
            return Err(invalid("conv filters and pooling factors must be positive"));
        }
        let pool: usize = self.freq_pools.iter().product();
        if self.bins == 0 || self.bins % pool != 0 {
            return Err(invalid(format!("pooling product {pool} does not divide {} bins", self.bins)));
        }
        if self.gru_width == 0 || self.fc_width == 0 || self.classes == 0 || self.channels == 0 || self.seq_len == 0 {
            return Err(invalid("widths, classes, channels and sequence length must be positive"));
        }
        if !(self.w_doa >= 0.0 && self.learning_rate > 0.0 && self.epsilon > 0.0) {
            return Err(invalid("loss weight, learning rate and epsilon must be non-negative"));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(invalid("Adam moment coefficients must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn planes(&self) -> usize {
        2 * self.channels
    }

    pub fn dims(&self) -> usize {
        self.doa_format.dims()
    }

    /// Width of the per-frame feature vector fed to the first GRU layer.
    pub fn sequence_width(&self) -> usize {
        let pool: usize = self.freq_pools.iter().product();
        match self.conv_filters.last() {
            Some(&p) => p * self.bins / pool,
            None => self.bins * self.planes(),
        }
    }

    pub fn gru_output_width(&self) -> usize {
        match self.gru_merge {
            GruMerge::Mul => self.gru_width,
            GruMerge::Concat => 2 * self.gru_width,
        }
    }

    /// Width of the recurrent stack output (the input itself if there is no GRU).
    pub fn recurrent_width(&self) -> usize {
        if self.gru_layers == 0 {
            self.sequence_width()
        } else {
            self.gru_output_width()
        }
    }
}
