//! Raw 2D value grids and range-checked grayscale images.

use crate::error::{Error, Result};

/// A dense row-major 2D field of f64 values with no range constraint.
///
/// Residual maps, degradation intermediates and metric scratch all live
/// here; [`Image`] wraps a `Grid` whose values are certified to be in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            height * width,
            "grid data length {} != {}x{}",
            data.len(),
            height,
            width
        );
        Grid {
            height,
            width,
            data,
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Grid::new(height, width, vec![0.0; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Grid::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col] = value;
    }

    /// Copies the `n`x`n` square with upper-left corner (`row`, `col`).
    pub fn window(&self, row: usize, col: usize, n: usize) -> Vec<f64> {
        assert!(row + n <= self.height && col + n <= self.width);
        let mut out = Vec::with_capacity(n * n);
        for r in row..row + n {
            out.extend_from_slice(&self.data[r * self.width + col..r * self.width + col + n]);
        }
        out
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    /// 90-degree counterclockwise rotation.
    pub fn rotate90(&self) -> Grid {
        Grid::from_fn(self.width, self.height, |r, c| {
            self.get(c, self.width - 1 - r)
        })
    }

    pub fn flip_horizontal(&self) -> Grid {
        Grid::from_fn(self.height, self.width, |r, c| {
            self.get(r, self.width - 1 - c)
        })
    }

    pub fn flip_vertical(&self) -> Grid {
        Grid::from_fn(self.height, self.width, |r, c| {
            self.get(self.height - 1 - r, c)
        })
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Grid) -> Result<Grid> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::ShapeMismatch {
                op: "grid sub",
                lhs: vec![self.height, self.width],
                rhs: vec![other.height, other.width],
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Grid::new(self.height, self.width, data))
    }
}

/// A grayscale raster whose pixels are guaranteed to lie in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image(Grid);

impl Image {
    /// Validates the range; rejects NaN and out-of-range pixels.
    pub fn new(grid: Grid) -> Result<Self> {
        for (i, &v) in grid.values().iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::PixelOutOfRange { value: v, index: i });
            }
        }
        Ok(Image(grid))
    }

    /// Clips every value into [0, 1]; NaN becomes 0.
    pub fn from_grid_clipped(mut grid: Grid) -> Self {
        for v in grid.values_mut() {
            *v = v.clamp(0.0, 1.0);
            if v.is_nan() {
                *v = 0.0;
            }
        }
        Image(grid)
    }

    pub fn from_fn(height: usize, width: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Image::from_grid_clipped(Grid::from_fn(height, width, f))
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Self {
        Image::from_grid_clipped(Grid::new(height, width, vec![value; height * width]))
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }

    /// Crops the `size`x`size` square with upper-left corner (`row`, `col`).
    pub fn crop(&self, row: usize, col: usize, size: usize) -> Image {
        Image(Grid::new(size, size, self.0.window(row, col, size)))
    }

    /// Crops an arbitrary rectangle with upper-left corner (`row`, `col`).
    pub fn crop_rect(&self, row: usize, col: usize, height: usize, width: usize) -> Image {
        assert!(row + height <= self.height() && col + width <= self.width());
        let mut data = Vec::with_capacity(height * width);
        for r in row..row + height {
            for c in col..col + width {
                data.push(self.0.get(r, c));
            }
        }
        Image(Grid::new(height, width, data))
    }
}

impl std::ops::Deref for Image {
    type Target = Grid;

    fn deref(&self) -> &Grid {
        &self.0
    }
}
