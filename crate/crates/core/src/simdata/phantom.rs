use serde::Serialize;

use crate::error::{Error, Result};

/// A square test image, row-major with row index along `y` and column index
/// along `x`, pixel centers at `(2(j − c)/n, 2(i − c)/n)` in `[-1, 1]²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phantom {
    pub name: String,
    pub side: usize,
    pub values: Vec<f64>,
}

/// One ellipse of the phantom table, in `[-1, 1]²` coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub x0: f64,
    pub y0: f64,
    pub a: f64,
    pub b: f64,
    pub phi_deg: f64,
    pub intensity: f64,
}

impl Ellipse {
    const fn new(x0: f64, y0: f64, a: f64, b: f64, phi_deg: f64, intensity: f64) -> Self {
        Self {
            x0,
            y0,
            a,
            b,
            phi_deg,
            intensity,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.phi_deg.to_radians().sin_cos();
        let dx = x - self.x0;
        let dy = y - self.y0;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

/// The original Shepp–Logan head phantom table.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    Ellipse::new(0.0, 0.0, 0.69, 0.92, 0.0, 2.0),
    Ellipse::new(0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98),
    Ellipse::new(0.22, 0.0, 0.11, 0.31, -18.0, -0.02),
    Ellipse::new(-0.22, 0.0, 0.16, 0.41, 18.0, -0.02),
    Ellipse::new(0.0, 0.35, 0.21, 0.25, 0.0, 0.01),
    Ellipse::new(0.0, 0.1, 0.046, 0.046, 0.0, 0.01),
    Ellipse::new(0.0, -0.1, 0.046, 0.046, 0.0, 0.01),
    Ellipse::new(-0.08, -0.605, 0.046, 0.023, 0.0, 0.01),
    Ellipse::new(0.0, -0.606, 0.023, 0.023, 0.0, 0.01),
    Ellipse::new(0.06, -0.605, 0.023, 0.046, 0.0, 0.01),
];

pub const MIN_PHANTOM_SIDE: usize = 16;

/// Pixel-center coordinates in `[-1, 1]²` of pixel `(i, j)`.
pub fn pixel_center(i: usize, j: usize, side: usize) -> (f64, f64) {
    let c = (side as f64 - 1.0) / 2.0;
    let h = 2.0 / side as f64;
    ((j as f64 - c) * h, (i as f64 - c) * h)
}

/// Rasterizes an ellipse table by center-of-pixel membership.
pub fn rasterize(ellipses: &[Ellipse], side: usize) -> Vec<f64> {
    let mut values = vec![0.0; side * side];
    for i in 0..side {
        for j in 0..side {
            let (x, y) = pixel_center(i, j, side);
            values[i * side + j] = ellipses
                .iter()
                .filter(|e| e.contains(x, y))
                .map(|e| e.intensity)
                .sum();
        }
    }
    values
}

pub fn shepp_logan(side: usize) -> Result<Phantom> {
    if side < MIN_PHANTOM_SIDE {
        return Err(Error::config(format!(
            "phantom side must be at least {MIN_PHANTOM_SIDE}, got {side}"
        )));
    }
    Ok(Phantom {
        name: "shepp-logan".into(),
        side,
        values: rasterize(&SHEPP_LOGAN, side),
    })
}
