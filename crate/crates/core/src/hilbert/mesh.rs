use crate::error::{Error, Result};

/// Uniform right-angled P1 triangulation of the unit square.
///
/// Every grid cell `[ih, (i+1)h] × [jh, (j+1)h]` is split along its
/// lower-left to upper-right diagonal. Nodes are numbered lexicographically
/// (x fastest); interior nodes keep that order after boundary elimination.
#[derive(Debug, Clone)]
pub struct Mesh {
    level: u32,
    per_side: usize,
    coords: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    interior_of_node: Vec<Option<usize>>,
    node_of_interior: Vec<usize>,
}

impl Mesh {
    pub fn unit_square(level: u32) -> Result<Self> {
        if level == 0 || level > 12 {
            return Err(Error::InvalidMesh(format!("refinement level {level} outside 1..=12")));
        }
        let cells = 1usize << level;
        let per_side = cells + 1;
        let h = 1.0 / cells as f64;
        let id = |i: usize, j: usize| j * per_side + i;

        let mut coords = Vec::with_capacity(per_side * per_side);
        for j in 0..per_side {
            for i in 0..per_side {
                coords.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut elements = Vec::with_capacity(2 * cells * cells);
        for j in 0..cells {
            for i in 0..cells {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                elements.push([a, b, c]);
                elements.push([a, c, d]);
            }
        }
        let mut interior_of_node = vec![None; per_side * per_side];
        let mut node_of_interior = Vec::new();
        for j in 1..cells {
            for i in 1..cells {
                interior_of_node[id(i, j)] = Some(node_of_interior.len());
                node_of_interior.push(id(i, j));
            }
        }
        Ok(Self { level, per_side, coords, elements, interior_of_node, node_of_interior })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.per_side - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn interior_count(&self) -> usize {
        self.node_of_interior.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn interior_index(&self, node: usize) -> Option<usize> {
        self.interior_of_node[node]
    }

    pub fn interior_node(&self, k: usize) -> usize {
        self.node_of_interior[k]
    }

    /// Area and barycentric gradients of element `e`.
    pub fn element_geometry(&self, e: usize) -> (f64, [[f64; 2]; 3]) {
        let [p0, p1, p2] = self.elements[e].map(|v| self.coords[v]);
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let grads = [
            [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
            [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
            [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
        ];
        (0.5 * det.abs(), grads)
    }

    /// Vertex-lumped quadrature weights of the interior nodes
    /// (a third of the area of every adjacent element).
    pub fn lumped_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.interior_count()];
        for e in 0..self.elements.len() {
            let (area, _) = self.element_geometry(e);
            for &v in &self.elements[e] {
                if let Some(k) = self.interior_of_node[v] {
                    w[k] += area / 3.0;
                }
            }
        }
        w
    }

    /// Nodal interpolant of `u` restricted to the interior nodes.
    pub fn interpolate(&self, u: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.node_of_interior.iter().map(|&v| u(self.coords[v][0], self.coords[v][1])).collect()
    }

    /// Gradient on element `e` of the interior coefficient vector `u`
    /// (boundary values are zero).
    pub fn element_gradient(&self, e: usize, u: &[f64]) -> [f64; 2] {
        let (_, grads) = self.element_geometry(e);
        let mut g = [0.0; 2];
        for (local, &v) in self.elements[e].iter().enumerate() {
            if let Some(k) = self.interior_of_node[v] {
                g[0] += u[k] * grads[local][0];
                g[1] += u[k] * grads[local][1];
            }
        }
        g
    }
}
