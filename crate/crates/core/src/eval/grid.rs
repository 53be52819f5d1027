use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Head, Matrix, MlpModel};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl GridBounds {
    /// Bounding box of `points` padded by `margin` on every side.
    pub fn around(points: &[Point], margin: f64) -> Self {
        let mut b = GridBounds {
            xmin: f64::INFINITY,
            xmax: f64::NEG_INFINITY,
            ymin: f64::INFINITY,
            ymax: f64::NEG_INFINITY,
        };
        for p in points {
            b.xmin = b.xmin.min(p[0]);
            b.xmax = b.xmax.max(p[0]);
            b.ymin = b.ymin.min(p[1]);
            b.ymax = b.ymax.max(p[1]);
        }
        b.xmin -= margin;
        b.xmax += margin;
        b.ymin -= margin;
        b.ymax += margin;
        b
    }
}

/// Predicted class on a `resolution x resolution` lattice of cell centres.
///
/// `cells[j * resolution + i]` is column `i` (x ascending) of row `j` (y ascending).
/// Sigmoid models store the thresholded findings as a bit pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionGrid {
    pub bounds: GridBounds,
    pub resolution: usize,
    pub cells: Vec<usize>,
}

impl DecisionGrid {
    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        cell_center(&self.bounds, self.resolution, i, j)
    }

    pub fn cell(&self, i: usize, j: usize) -> usize {
        self.cells[j * self.resolution + i]
    }

    /// One CSV line per grid row, y ascending.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for row in self.cells.chunks(self.resolution) {
            let line: Vec<String> = row.iter().map(usize::to_string).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

fn cell_center(b: &GridBounds, res: usize, i: usize, j: usize) -> Point {
    let dx = (b.xmax - b.xmin) / res as f64;
    let dy = (b.ymax - b.ymin) / res as f64;
    [b.xmin + (i as f64 + 0.5) * dx, b.ymin + (j as f64 + 0.5) * dy]
}

pub fn decision_grid(
    model: &MlpModel,
    bounds: GridBounds,
    resolution: usize,
    thresholds: Option<&[f64]>,
) -> Result<DecisionGrid> {
    if resolution < 2 {
        return Err(Error::Validation(format!("grid resolution must be >= 2, got {resolution}")));
    }
    if !(bounds.xmin < bounds.xmax && bounds.ymin < bounds.ymax) {
        return Err(Error::Validation(format!("inverted or empty grid bounds {bounds:?}")));
    }
    let centers: Vec<Point> = (0..resolution)
        .flat_map(|j| (0..resolution).map(move |i| (i, j)))
        .map(|(i, j)| cell_center(&bounds, resolution, i, j))
        .collect();
    let inputs = Matrix::from_points(&centers);
    let cells = match model.head() {
        Head::Softmax => model.predict_classes(&inputs)?,
        Head::SigmoidPerOutput => {
            let thresholds = thresholds
                .ok_or_else(|| Error::InvalidConfig("sigmoid grid needs thresholds".into()))?;
            model
                .predict_binary(&inputs, thresholds)?
                .into_iter()
                .map(|bits| bits.iter().enumerate().map(|(f, &b)| usize::from(b) << f).sum())
                .collect()
        }
    };
    Ok(DecisionGrid {
        bounds,
        resolution,
        cells,
    })
}
