use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::fmt_float;

/// Data points `a_i` with positive weights `w_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedDataset {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl WeightedDataset {
    /// Unit weights.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let weights = vec![1.0; points.len()];
        Self::with_weights(points, weights)
    }

    pub fn with_weights(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let data = WeightedDataset { points, weights };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Config("dataset is empty".into()));
        }
        if self.weights.len() != self.points.len() {
            return Err(Error::Shape {
                expected: format!("{} weights", self.points.len()),
                got: format!("{}", self.weights.len()),
            });
        }
        let d = self.points[0].len();
        if d == 0 {
            return Err(Error::Config("points need at least one coordinate".into()));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::Shape {
                    expected: format!("{d} coordinates"),
                    got: format!("{} at point {i}", p.len()),
                });
            }
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::Config(format!("point {i} has a non-finite coordinate")));
            }
        }
        if let Some(i) = self.weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Config(format!("weight {i} must be positive, got {}", self.weights[i])));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Points and weights at the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> WeightedDataset {
        WeightedDataset {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            weights: indices.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    pub fn scaled_weights(&self, c: f64) -> WeightedDataset {
        WeightedDataset {
            points: self.points.clone(),
            weights: self.weights.iter().map(|w| w * c).collect(),
        }
    }

    /// `Σ w_i a_i / Σ w_i`.
    pub fn weighted_average(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        (0..self.dim())
            .map(|k| {
                self.points
                    .iter()
                    .zip(&self.weights)
                    .map(|(p, w)| w * p[k])
                    .sum::<f64>()
                    / total
            })
            .collect()
    }

    /// CSV with header `x_0,…,x_{d−1}[,weight]`; the weight column is only
    /// written when some weight differs from 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let with_w = self.weights.iter().any(|w| *w != 1.0);
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim()).map(|k| format!("x_{k}")).collect();
        if with_w {
            header.push("weight".into());
        }
        w.write_record(&header)?;
        for (p, wt) in self.points.iter().zip(&self.weights) {
            let mut row: Vec<String> = p.iter().map(|v| fmt_float(*v)).collect();
            if with_w {
                row.push(fmt_float(*wt));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let weight_col = header.iter().position(|h| h.trim() == "weight");
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let mut p = Vec::with_capacity(rec.len());
            let mut w = 1.0;
            for (col, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| Error::Config(format!("row {row}, column {col}: '{field}': {e}")))?;
                if Some(col) == weight_col {
                    w = v;
                } else {
                    p.push(v);
                }
            }
            points.push(p);
            weights.push(w);
        }
        Self::with_weights(points, weights)
    }
}
