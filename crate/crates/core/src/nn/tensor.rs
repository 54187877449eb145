use crate::error::{Error, Result};

/// A `steps × channels` matrix of `f64`, stored row-major (one row per timestep).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTensor {
    steps: usize,
    channels: usize,
    data: Vec<f64>,
}

impl TimeSeriesTensor {
    pub fn new(steps: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if steps == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "tensor must have at least one step and one channel, got {steps}x{channels}"
            )));
        }
        if data.len() != steps * channels {
            return Err(Error::Shape(format!(
                "expected {} values for {steps}x{channels}, got {}",
                steps * channels,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite value at step {}, channel {}",
                pos / channels,
                pos % channels
            )));
        }
        Ok(Self {
            steps,
            channels,
            data,
        })
    }

    pub fn zeros(steps: usize, channels: usize) -> Self {
        assert!(steps > 0 && channels > 0, "empty tensor");
        Self {
            steps,
            channels,
            data: vec![0.0; steps * channels],
        }
    }

    /// Builds a tensor from rows, one per timestep.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let channels = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * channels);
        for (t, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != channels {
                return Err(Error::Shape(format!(
                    "row {t} has {} channels, expected {channels}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), channels, data)
    }

    /// Single-step tensor holding a vector.
    pub fn from_vector(v: Vec<f64>) -> Result<Self> {
        let n = v.len();
        Self::new(1, n, v)
    }

    // Internal constructor for kernels that already guarantee the invariants.
    pub(crate) fn from_raw(steps: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), steps * channels);
        Self {
            steps,
            channels,
            data,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.steps, self.channels)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.data[t * self.channels + c]
    }

    /// The last timestep as a vector.
    pub fn last_row(&self) -> &[f64] {
        self.row(self.steps - 1)
    }
}
