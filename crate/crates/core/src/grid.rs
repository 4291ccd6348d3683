//! Radial grids with exact shell volumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::sphere_area;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spacing {
    Uniform { h: f64 },
    /// `Δr = max(h, stretch·r)`: uniform near the origin, geometric beyond `h/stretch`.
    Graded { h: f64, stretch: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub n: u32,
    pub r_max: f64,
    pub spacing: Spacing,
    pub nodes: Vec<f64>,
    /// Cell boundaries `r_{i−1/2}`, `r_{i+1/2}`; `faces[i]` is the right face of cell `i`.
    pub faces: Vec<f64>,
    pub volumes: Vec<f64>,
}

fn shell(n: u32, lo: f64, hi: f64) -> f64 {
    let nf = n as f64;
    sphere_area(n) * (hi.powi(n as i32) - lo.powi(n as i32)) / nf
}

impl RadialGrid {
    pub fn from_nodes(n: u32, nodes: Vec<f64>, spacing: Spacing) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("grid dimension must be at least 1".into()));
        }
        if nodes.len() < 3 || nodes[0] != 0.0 {
            return Err(Error::Domain("grid needs at least 3 nodes starting at r = 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("grid nodes must be strictly increasing".into()));
        }
        let k = nodes.len() - 1;
        let r_max = nodes[k];
        let mut faces: Vec<f64> = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        faces.push(r_max);
        let volumes = (0..=k)
            .map(|i| {
                let lo = if i == 0 { 0.0 } else { faces[i - 1] };
                shell(n, lo, faces[i])
            })
            .collect();
        Ok(Self {
            n,
            r_max,
            spacing,
            nodes,
            faces,
            volumes,
        })
    }

    pub fn uniform(n: u32, r_max: f64, points: usize) -> Result<Self> {
        if points < 3 || !(r_max > 0.0) {
            return Err(Error::Domain("uniform grid needs ≥ 3 points and R_max > 0".into()));
        }
        let h = r_max / (points - 1) as f64;
        let nodes = (0..points).map(|i| if i == points - 1 { r_max } else { i as f64 * h }).collect();
        Self::from_nodes(n, nodes, Spacing::Uniform { h })
    }

    pub fn graded(n: u32, h: f64, stretch: f64, r_max: f64) -> Result<Self> {
        if !(h > 0.0 && stretch > 0.0 && r_max > 2.0 * h) {
            return Err(Error::Domain(format!(
                "graded grid needs h > 0, stretch > 0 and R_max > 2h, got h={h}, stretch={stretch}, R_max={r_max}"
            )));
        }
        let mut nodes = vec![0.0];
        let mut r: f64 = 0.0;
        loop {
            let dr = h.max(stretch * r);
            if r + dr >= r_max - 0.5 * dr {
                break;
            }
            r += dr;
            nodes.push(r);
        }
        nodes.push(r_max);
        Self::from_nodes(n, nodes, Spacing::Graded { h, stretch })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ball_volume(&self) -> f64 {
        shell(self.n, 0.0, self.r_max)
    }

    /// `∫ u` by the cell quadrature.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.volumes).map(|(a, b)| a * b).sum()
    }

    /// `∫_{r ≥ big_r} u` with each cell clipped at `big_r`.
    pub fn tail_integral(&self, u: &[f64], big_r: f64) -> Result<f64> {
        if !(big_r > 0.0) || big_r >= self.r_max {
            return Err(Error::Domain(format!(
                "tail radius {big_r} must lie in (0, R_max = {})",
                self.r_max
            )));
        }
        let mut acc = 0.0;
        for i in (0..self.len()).rev() {
            let hi = self.faces[i];
            if hi <= big_r {
                break;
            }
            let lo = if i == 0 { 0.0 } else { self.faces[i - 1] };
            acc += u[i] * shell(self.n, lo.max(big_r), hi);
        }
        Ok(acc)
    }

    /// Linear interpolation of nodal values; zero beyond `R_max`.
    pub fn interpolate(&self, u: &[f64], r: f64) -> f64 {
        if r <= 0.0 {
            return u[0];
        }
        if r >= self.r_max {
            return if r == self.r_max { u[u.len() - 1] } else { 0.0 };
        }
        let i = self.nodes.partition_point(|&x| x <= r) - 1;
        let s = (r - self.nodes[i]) / (self.nodes[i + 1] - self.nodes[i]);
        u[i] + s * (u[i + 1] - u[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn volumes_sum_to_ball() {
        for n in 1..=5 {
            let g = RadialGrid::graded(n, 0.01, 0.02, 30.0).unwrap();
            let total: f64 = g.volumes.iter().sum();
            assert!((total / g.ball_volume() - 1.0).abs() < 1e-12);
            assert!(g.volumes.iter().all(|v| *v > 0.0));
            assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
            assert_eq!(*g.nodes.last().unwrap(), 30.0);
        }
    }

    #[test]
    fn unit_masses() {
        let g = RadialGrid::uniform(2, 1.0, 101).unwrap();
        assert!((g.integrate(&vec![1.0; 101]) - PI).abs() < 1e-12);
        let g = RadialGrid::uniform(1, 1.0, 101).unwrap();
        assert!((g.integrate(&vec![1.0; 101]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tail_of_constant() {
        let g = RadialGrid::uniform(3, 2.0, 201).unwrap();
        let u = vec![1.0; 201];
        let t = g.tail_integral(&u, 1.0).unwrap();
        assert!((t - 4.0 * PI / 3.0 * 7.0).abs() < 1e-10);
        assert!(g.tail_integral(&u, 2.0).is_err());
    }
}
