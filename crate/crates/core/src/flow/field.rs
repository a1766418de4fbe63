use crate::error::{Error, Result};

/// Dense backward displacement field: the vector stored at pixel `p` of the
/// reference (later) frame points to `p + f[p]` in the earlier frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<[f32; 2]>,
    valid: Vec<bool>,
}

impl FlowField {
    /// Vectors at invalid pixels are normalized to zero.
    pub fn new(width: usize, height: usize, mut vectors: Vec<[f32; 2]>, valid: Vec<bool>) -> Result<Self> {
        if vectors.len() != width * height || valid.len() != width * height {
            return Err(Error::invalid(format!("flow field buffers do not match {width}x{height}")));
        }
        if let Some(i) =
            (0..vectors.len()).find(|&i| valid[i] && !(vectors[i][0].is_finite() && vectors[i][1].is_finite()))
        {
            return Err(Error::invalid(format!("non-finite flow at valid pixel {i}")));
        }
        for (v, ok) in vectors.iter_mut().zip(&valid) {
            if !ok {
                *v = [0.0, 0.0];
            }
        }
        Ok(Self { width, height, vectors, valid })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, [0.0, 0.0])
    }

    pub fn constant(width: usize, height: usize, uv: [f32; 2]) -> Self {
        Self { width, height, vectors: vec![uv; width * height], valid: vec![true; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, x: usize, y: usize) -> Option<[f32; 2]> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.vectors[i])
    }

    pub fn invalidate(&mut self, index: usize) {
        self.valid[index] = false;
        self.vectors[index] = [0.0, 0.0];
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Mean endpoint error against `reference` over pixels valid in both.
    pub fn mean_endpoint_error(&self, reference: &FlowField) -> Result<f64> {
        crate::error::check_dims(self.dims(), reference.dims())?;
        let mut sum = 0.0;
        let mut n = 0usize;
        for i in 0..self.vectors.len() {
            if self.valid[i] && reference.valid[i] {
                let du = (self.vectors[i][0] - reference.vectors[i][0]) as f64;
                let dv = (self.vectors[i][1] - reference.vectors[i][1]) as f64;
                sum += (du * du + dv * dv).sqrt();
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::invalid("no pixel is valid in both flow fields"));
        }
        Ok(sum / n as f64)
    }

    pub fn mean_magnitude(&self) -> f64 {
        let (sum, n) =
            self.vectors.iter().zip(&self.valid).filter(|(_, &v)| v).fold((0.0, 0usize), |(s, n), (uv, _)| {
                (s + ((uv[0] as f64).powi(2) + (uv[1] as f64).powi(2)).sqrt(), n + 1)
            });
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}
