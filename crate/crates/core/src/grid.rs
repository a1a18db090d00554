use crate::error::{Error, Result};

/// Uniform grid of `n` cells on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    n: usize,
    h: f64,
    nodes: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Invalid(format!("grid needs at least 2 cells, got {n}")));
        }
        let h = 1.0 / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        nodes[n] = 1.0;
        Ok(Self { n, h, nodes })
    }

    /// Number of cells.
    pub fn cells(&self) -> usize {
        self.n
    }

    /// Number of nodes (`cells + 1`).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Composite trapezoid weights for the node samples.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.h; self.len()];
        w[0] = 0.5 * self.h;
        w[self.n] = 0.5 * self.h;
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_span_unit_interval_uniformly() {
        let g = SpatialGrid::new(1000).unwrap();
        let x = g.nodes();
        assert_eq!(x[0], 0.0);
        assert_eq!(*x.last().unwrap(), 1.0);
        assert_eq!(g.len(), 1001);
        let h = g.spacing();
        let worst = x
            .windows(2)
            .map(|w| ((w[1] - w[0]) - h).abs() / h)
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "{worst}");
        assert!(x.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let g = SpatialGrid::new(7).unwrap();
        let s: f64 = g
            .trapezoid_weights()
            .iter()
            .zip(g.nodes())
            .map(|(w, x)| w * (3.0 * x + 1.0))
            .sum();
        assert!((s - 2.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_degenerate_grid() {
        assert!(SpatialGrid::new(1).is_err());
    }
}
