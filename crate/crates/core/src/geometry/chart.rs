use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Geometry, GeometryError};
use crate::expr::Expr;
use crate::jet::{expand, Jet, JetSpace};
use crate::tensor::{Tensor, Variance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordKind {
    /// Open interval `(lo, hi)`; sampling keeps `margin` away from both ends.
    Interval,
    /// Periodic with period `hi - lo`.
    Periodic,
    /// The whole real line; `lo..hi` is only the default sampling window.
    Line,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coordinate {
    pub name: String,
    pub kind: CoordKind,
    pub lo: f64,
    pub hi: f64,
}

impl Coordinate {
    pub fn new(name: &str, kind: CoordKind, lo: f64, hi: f64) -> Coordinate {
        Coordinate { name: name.to_string(), kind, lo, hi }
    }

    pub fn period(&self) -> Option<f64> {
        (self.kind == CoordKind::Periodic).then_some(self.hi - self.lo)
    }

    /// Closed sampling interval after applying the safety margin.
    pub fn safe_range(&self, margin: f64) -> (f64, f64) {
        match self.kind {
            CoordKind::Interval => (self.lo + margin, self.hi - margin),
            CoordKind::Periodic | CoordKind::Line => (self.lo, self.hi),
        }
    }
}

/// A single coordinate chart with a symmetric metric of expressions.
#[derive(Clone, Debug)]
pub struct MetricChart {
    coords: Vec<Coordinate>,
    metric: Vec<Expr>,
    margin: f64,
}

impl MetricChart {
    /// `metric` is row-major `n x n`; it must be symmetric entry by entry.
    pub fn new(coords: Vec<Coordinate>, metric: Vec<Expr>, margin: f64) -> Result<MetricChart, GeometryError> {
        let n = coords.len();
        if n < 2 {
            return Err(GeometryError::InvalidChart(format!("dimension {n} is too small")));
        }
        if metric.len() != n * n {
            return Err(GeometryError::InvalidChart(format!("expected {} metric entries, got {}", n * n, metric.len())));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (&metric[i * n + j], &metric[j * n + i]);
                if !a.ptr_eq(b) && a.to_string() != b.to_string() {
                    return Err(GeometryError::InvalidChart(format!("g[{i}][{j}] and g[{j}][{i}] differ")));
                }
            }
        }
        if let Some(v) = metric.iter().filter_map(Expr::max_var).max() {
            if v >= n {
                return Err(GeometryError::InvalidChart(format!("metric uses x{v} in dimension {n}")));
            }
        }
        for c in &coords {
            let (lo, hi) = c.safe_range(margin);
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(GeometryError::InvalidChart(format!("empty sampling range for {}", c.name)));
            }
        }
        if !(margin >= 0.0) {
            return Err(GeometryError::InvalidChart("margin must be non-negative".into()));
        }
        Ok(MetricChart { coords, metric, margin })
    }

    /// Builds a chart from the upper triangle of the metric.
    pub fn from_upper(coords: Vec<Coordinate>, entries: &[((usize, usize), Expr)], margin: f64) -> Result<MetricChart, GeometryError> {
        let n = coords.len();
        let mut metric = vec![Expr::zero(); n * n];
        for ((i, j), e) in entries {
            if *i >= n || *j >= n {
                return Err(GeometryError::InvalidChart(format!("metric index ({i},{j}) out of range")));
            }
            metric[i * n + j] = e.clone();
            metric[j * n + i] = e.clone();
        }
        MetricChart::new(coords, metric, margin)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.metric[i * self.dim() + j]
    }

    pub fn metric_field(&self) -> Tensor<Expr> {
        Tensor::new(self.dim(), vec![Variance::Lower; 2], self.metric.clone()).expect("square metric")
    }

    pub fn metric_at(&self, point: &[f64]) -> Result<Tensor<f64>, GeometryError> {
        Ok(self.metric_field().evaluate(point)?)
    }

    /// True when `point` lies in the closed safe sampling box.
    pub fn in_safe_domain(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && self.coords.iter().zip(point).all(|(c, &x)| {
                let (lo, hi) = c.safe_range(self.margin);
                match c.kind {
                    CoordKind::Interval => x >= lo && x <= hi,
                    CoordKind::Periodic | CoordKind::Line => x.is_finite(),
                }
            })
    }

    /// Cholesky test of the metric at `point`.
    pub fn check_positive_definite(&self, point: &[f64]) -> Result<(), GeometryError> {
        let g = self.metric_at(point)?;
        let n = self.dim();
        let m = DMatrix::from_row_slice(n, n, g.data());
        if m.iter().all(|x| x.is_finite()) && m.cholesky().is_some() {
            Ok(())
        } else {
            Err(GeometryError::NotPositiveDefinite { point: point.to_vec() })
        }
    }

    /// `count` deterministic pseudo-random points in the safe box.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                self.coords
                    .iter()
                    .map(|c| {
                        let (lo, hi) = c.safe_range(self.margin);
                        lo + (hi - lo) * rng.random::<f64>()
                    })
                    .collect()
            })
            .collect()
    }

    /// Symbolic curvature stack over the whole chart.
    pub fn symbolic(&self) -> Result<Geometry<Expr>, GeometryError> {
        Geometry::new(self.metric_field())
    }

    /// Jet curvature stack at `point`, exact through `order` metric derivatives.
    pub fn local(&self, point: &[f64], order: usize) -> Result<Geometry<Jet>, GeometryError> {
        if point.len() != self.dim() {
            return Err(GeometryError::InvalidChart(format!("point has {} coordinates, chart has {}", point.len(), self.dim())));
        }
        self.check_positive_definite(point)?;
        let space = JetSpace::shared(self.dim(), order);
        Geometry::new(self.expand(point, &space)?)
    }

    pub fn expand(&self, point: &[f64], space: &std::sync::Arc<JetSpace>) -> Result<Tensor<Jet>, GeometryError> {
        let data = self.metric.iter().map(|e| expand(e, space, point)).collect::<Result<Vec<_>, _>>()?;
        Ok(Tensor::new(self.dim(), vec![Variance::Lower; 2], data)?)
    }
}
