//! Simplicial meshes in one and two dimensions.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::spectral::DomainSpec;

/// Structured generators remember their grid so points can be located in
/// constant time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grid {
    Interval {
        length: f64,
        cells: usize,
    },
    Rectangle {
        lx: f64,
        ly: f64,
        nx: usize,
        ny: usize,
    },
}

/// A conforming simplicial mesh: segments in 1-D, triangles in 2-D.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    h: f64,
    grid: Option<Grid>,
}

/// Uniform mesh of `[0, length]` with `cells` segments.
pub fn build_interval_mesh(length: f64, cells: usize) -> Result<Mesh> {
    DomainSpec::interval(length)?;
    if cells < 2 {
        return Err(Error::InvalidArgument(alloc::format!(
            "an interval mesh needs at least 2 cells, got {cells}"
        )));
    }
    let coords = (0..=cells)
        .map(|i| length * i as f64 / cells as f64)
        .collect();
    let topology = (0..cells).flat_map(|i| [i, i + 1]).collect();
    let mut mesh = Mesh::from_parts(1, coords, topology)?;
    mesh.grid = Some(Grid::Interval { length, cells });
    Ok(mesh)
}

/// Structured triangulation of `[0, lx] x [0, ly]` with `2 nx ny` triangles.
///
/// Each grid cell is split along one diagonal; the diagonal direction
/// alternates in a checkerboard pattern so the mesh has no preferred
/// orientation.
pub fn build_rectangle_mesh(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Mesh> {
    DomainSpec::rectangle(lx, ly)?;
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument(alloc::format!(
            "a rectangle mesh needs at least 2 cells per direction, got {nx} x {ny}"
        )));
    }
    let mut coords = Vec::with_capacity(2 * (nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            coords.push(lx * i as f64 / nx as f64);
            coords.push(ly * j as f64 / ny as f64);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(6 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                cells.extend_from_slice(&[a, b, c, a, c, d]);
            } else {
                cells.extend_from_slice(&[a, b, d, b, c, d]);
            }
        }
    }
    let mut mesh = Mesh::from_parts(2, coords, cells)?;
    mesh.grid = Some(Grid::Rectangle { lx, ly, nx, ny });
    Ok(mesh)
}

impl Mesh {
    /// Build a mesh from raw vertex coordinates (`dim` per vertex) and cell
    /// connectivity (`dim + 1` per cell).
    ///
    /// Index ranges and conformity are validated here; degenerate cells are
    /// reported by assembly, which names the offending cell.
    pub fn from_parts(dim: usize, coords: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(alloc::format!(
                "unsupported dimension {dim}"
            )));
        }
        if coords.len() % dim != 0 || cells.len() % (dim + 1) != 0 {
            return Err(Error::InvalidArgument("ragged vertex or cell array".into()));
        }
        let nv = coords.len() / dim;
        if let Some(&bad) = cells.iter().find(|&&v| v >= nv) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: nv,
            });
        }
        if cells.is_empty() {
            return Err(Error::InvalidArgument("mesh has no cells".into()));
        }
        let mut mesh = Mesh {
            dim,
            coords,
            cells,
            h: 0.0,
            grid: None,
        };
        mesh.check_conforming()?;
        mesh.h = (0..mesh.num_cells())
            .map(|c| mesh.cell_diameter(c))
            .fold(0.0, f64::max);
        Ok(mesh)
    }

    fn check_conforming(&self) -> Result<()> {
        // every facet is shared by at most two cells
        let mut facets: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for c in 0..self.num_cells() {
            let cell = self.cell(c);
            for skip in 0..cell.len() {
                let mut facet: Vec<usize> = cell
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != skip)
                    .map(|(_, v)| *v)
                    .collect();
                facet.sort_unstable();
                let count = facets.entry(facet).or_insert(0);
                *count += 1;
                if *count > 2 {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "mesh is not conforming: a facet of cell {c} is shared by more than two cells"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    /// Maximal cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> Option<Grid> {
        self.grid
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let n = self.dim + 1;
        &self.cells[c * n..(c + 1) * n]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let cell = self.cell(c);
        let mut d = 0.0_f64;
        for a in 0..cell.len() {
            for b in (a + 1)..cell.len() {
                let (p, q) = (self.vertex(cell[a]), self.vertex(cell[b]));
                let dist: f64 = p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum();
                d = d.max(dist.sqrt());
            }
        }
        d
    }

    /// Signed measure (length or area) of a cell.
    pub fn cell_measure(&self, c: usize) -> f64 {
        let cell = self.cell(c);
        match self.dim {
            1 => self.vertex(cell[1])[0] - self.vertex(cell[0])[0],
            _ => {
                let (a, b, p) = (
                    self.vertex(cell[0]),
                    self.vertex(cell[1]),
                    self.vertex(cell[2]),
                );
                0.5 * ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]))
            }
        }
    }

    /// Map barycentric coordinates on cell `c` to physical coordinates.
    pub fn map_point(&self, c: usize, bary: &[f64; 3], out: &mut [f64]) {
        let cell = self.cell(c);
        for (d, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = cell
                .iter()
                .zip(bary)
                .map(|(&v, l)| l * self.vertex(v)[d])
                .sum();
        }
    }

    /// Find a cell containing `x` together with its barycentric coordinates.
    pub fn locate(&self, x: &[f64]) -> Option<(usize, [f64; 3])> {
        match self.grid {
            Some(Grid::Interval { length, cells }) => {
                let s = x[0] / length * cells as f64;
                if !(s >= -1e-12 && s <= cells as f64 + 1e-12) {
                    return None;
                }
                let c = (s.floor().max(0.0) as usize).min(cells - 1);
                self.barycentric(c, x).map(|b| (c, b))
            }
            Some(Grid::Rectangle { lx, ly, nx, ny }) => {
                let (sx, sy) = (x[0] / lx * nx as f64, x[1] / ly * ny as f64);
                if !(sx >= -1e-12
                    && sx <= nx as f64 + 1e-12
                    && sy >= -1e-12
                    && sy <= ny as f64 + 1e-12)
                {
                    return None;
                }
                let i = (sx.floor().max(0.0) as usize).min(nx - 1);
                let j = (sy.floor().max(0.0) as usize).min(ny - 1);
                let base = 2 * (j * nx + i);
                [base, base + 1]
                    .into_iter()
                    .find_map(|c| self.barycentric(c, x).map(|b| (c, b)))
            }
            None => (0..self.num_cells()).find_map(|c| self.barycentric(c, x).map(|b| (c, b))),
        }
    }

    fn barycentric(&self, c: usize, x: &[f64]) -> Option<[f64; 3]> {
        let cell = self.cell(c);
        let tol = 1e-10;
        let bary = match self.dim {
            1 => {
                let (a, b) = (self.vertex(cell[0])[0], self.vertex(cell[1])[0]);
                let t = (x[0] - a) / (b - a);
                [1.0 - t, t, 0.0]
            }
            _ => {
                let (a, b, p) = (
                    self.vertex(cell[0]),
                    self.vertex(cell[1]),
                    self.vertex(cell[2]),
                );
                let det = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
                let l1 = ((x[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (x[1] - a[1])) / det;
                let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
                [1.0 - l1 - l2, l1, l2]
            }
        };
        if bary[..=self.dim].iter().all(|&l| l >= -tol) {
            Some(bary)
        } else {
            None
        }
    }
}
