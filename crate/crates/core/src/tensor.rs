use crate::tfproc::ImageMatrix;

/// Channel-major image stack: `data[(ch * rows + r) * cols + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, rows: usize, cols: usize) -> Self {
        Self {
            channels,
            rows,
            cols,
            data: vec![0.0; channels * rows * cols],
        }
    }

    /// Copies one plane into `channels` identical channels.
    pub fn replicate(plane: &ImageMatrix, channels: usize) -> Self {
        let mut data = Vec::with_capacity(channels * plane.data.len());
        for _ in 0..channels {
            data.extend_from_slice(&plane.data);
        }
        Self {
            channels,
            rows: plane.rows,
            cols: plane.cols,
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.rows, self.cols)
    }

    pub fn plane(&self, ch: usize) -> ImageMatrix {
        let n = self.rows * self.cols;
        ImageMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data[ch * n..(ch + 1) * n].to_vec(),
        }
    }
}
