//! Uniform cell-centered finite-volume grids on intervals and rectangles,
//! with homogeneous Neumann (mirror ghost cell) boundaries.
//!
//! Cells are stored with the first axis fastest: cell `(i, j)` lives at
//! `j * nx + i`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grids have 1 or 2 axes, got {0}")]
    Dimension(usize),
    #[error("axis {axis} needs at least 2 cells, got {cells}")]
    TooFewCells { axis: usize, cells: usize },
    #[error("axis {axis} has invalid length {length}")]
    InvalidLength { axis: usize, length: f64 },
    #[error("expected {expected} values for this grid, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("field set is empty")]
    EmptyFieldSet,
    #[error("fields live on different grids")]
    GridMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    lengths: [f64; 2],
    cells: [usize; 2],
}

impl Grid {
    pub fn new(lengths: &[f64], cells: &[usize]) -> Result<Self, GridError> {
        let dim = lengths.len();
        if !(1..=2).contains(&dim) {
            return Err(GridError::Dimension(dim));
        }
        if cells.len() != dim {
            return Err(GridError::Dimension(cells.len()));
        }
        for axis in 0..dim {
            if !(lengths[axis].is_finite() && lengths[axis] > 0.0) {
                return Err(GridError::InvalidLength {
                    axis,
                    length: lengths[axis],
                });
            }
            if cells[axis] < 2 {
                return Err(GridError::TooFewCells {
                    axis,
                    cells: cells[axis],
                });
            }
        }
        let mut grid = Self {
            dim,
            lengths: [1.0; 2],
            cells: [1; 2],
        };
        grid.lengths[..dim].copy_from_slice(lengths);
        grid.cells[..dim].copy_from_slice(cells);
        Ok(grid)
    }

    pub fn interval(length: f64, cells: usize) -> Result<Self, GridError> {
        Self::new(&[length], &[cells])
    }

    pub fn rectangle(lengths: [f64; 2], cells: [usize; 2]) -> Result<Self, GridError> {
        Self::new(&lengths, &cells)
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn cell_count(&self) -> usize {
        self.cells().iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.cells[axis] as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn cell_measure(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn measure(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Cell centers along one axis.
    pub fn centers(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        (0..self.cells[axis]).map(|i| (i as f64 + 0.5) * h).collect()
    }

    /// Center of the cell with flat index `index`; unused axes are 0.
    pub fn cell_center(&self, index: usize) -> [f64; 2] {
        let nx = self.cells[0];
        let (i, j) = (index % nx, index / nx);
        let y = if self.dim == 2 {
            (j as f64 + 0.5) * self.spacing(1)
        } else {
            0.0
        };
        [(i as f64 + 0.5) * self.spacing(0), y]
    }

    /// The same domain with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let mut grid = *self;
        for axis in 0..self.dim {
            grid.cells[axis] *= factor;
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.cell_count() {
            return Err(GridError::ValueCount {
                expected: grid.cell_count(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.cell_count()],
        }
    }

    /// Samples `f` at cell centers; `f` receives `[x, y]` (y = 0 in 1D).
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.cell_count()).map(|c| f(grid.cell_center(c))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Restriction to a grid coarser by `factor` per axis, by cell averaging.
    pub fn coarsened(&self, factor: usize) -> Result<Self, GridError> {
        let g = &self.grid;
        let mut coarse_cells = [1usize; 2];
        for axis in 0..g.dim {
            if !g.cells[axis].is_multiple_of(factor) {
                return Err(GridError::TooFewCells {
                    axis,
                    cells: g.cells[axis] / factor,
                });
            }
            coarse_cells[axis] = g.cells[axis] / factor;
        }
        let coarse = Grid::new(g.lengths(), &coarse_cells[..g.dim])?;
        let (nx, cnx) = (g.cells[0], coarse_cells[0]);
        let fy = if g.dim == 2 { factor } else { 1 };
        let weight = 1.0 / (factor * fy) as f64;
        let mut values = vec![0.0; coarse.cell_count()];
        for (c, out) in values.iter_mut().enumerate() {
            let (ci, cj) = (c % cnx, c / cnx);
            let mut sum = 0.0;
            for dj in 0..fy {
                for di in 0..factor {
                    sum += self.values[(cj * fy + dj) * nx + ci * factor + di];
                }
            }
            *out = sum * weight;
        }
        Field::new(coarse, values)
    }
}

/// One field per species, all on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet {
    fields: Vec<Field>,
}

impl FieldSet {
    pub fn new(fields: Vec<Field>) -> Result<Self, GridError> {
        let first = fields.first().ok_or(GridError::EmptyFieldSet)?;
        if fields.iter().any(|f| f.grid != first.grid) {
            return Err(GridError::GridMismatch);
        }
        Ok(Self { fields })
    }

    pub fn constant(grid: Grid, values: &[f64]) -> Result<Self, GridError> {
        Self::new(values.iter().map(|&v| Field::constant(grid, v)).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.fields[0].grid
    }

    pub fn species(&self) -> usize {
        self.fields.len()
    }

    pub fn field(&self, species: usize) -> &Field {
        &self.fields[species]
    }

    pub fn field_mut(&mut self, species: usize) -> &mut Field {
        &mut self.fields[species]
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    /// Copies the state of one cell into `out` (length = species count).
    pub fn cell_state(&self, cell: usize, out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(&self.fields) {
            *o = f.values[cell];
        }
    }

    pub fn set_cell_state(&mut self, cell: usize, state: &[f64]) {
        for (f, &v) in self.fields.iter_mut().zip(state) {
            f.values[cell] = v;
        }
    }

    /// Smallest value over all species and cells, with its location.
    pub fn min_entry(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for (s, f) in self.fields.iter().enumerate() {
            for (c, &v) in f.values.iter().enumerate() {
                if v < best.2 {
                    best = (s, c, v);
                }
            }
        }
        best
    }

    pub fn coarsened(&self, factor: usize) -> Result<Self, GridError> {
        Self::new(
            self.fields
                .iter()
                .map(|f| f.coarsened(factor))
                .collect::<Result<_, _>>()?,
        )
    }
}

/// Cell-centered 3- or 5-point Laplacian with mirror ghost cells.
///
/// The matrix is symmetric with zero row sums, so it conserves
/// `integrate` exactly up to rounding.
pub fn neumann_laplacian(field: &Field) -> Field {
    let g = field.grid;
    let u = &field.values;
    let mut out = vec![0.0; u.len()];
    let nx = g.cells[0];
    let ny = if g.dim == 2 { g.cells[1] } else { 1 };
    let ihx2 = 1.0 / (g.spacing(0) * g.spacing(0));
    let ihy2 = if g.dim == 2 {
        1.0 / (g.spacing(1) * g.spacing(1))
    } else {
        0.0
    };
    for j in 0..ny {
        for i in 0..nx {
            let c = j * nx + i;
            let mut acc = 0.0;
            if i > 0 {
                acc += (u[c - 1] - u[c]) * ihx2;
            }
            if i + 1 < nx {
                acc += (u[c + 1] - u[c]) * ihx2;
            }
            if g.dim == 2 {
                if j > 0 {
                    acc += (u[c - nx] - u[c]) * ihy2;
                }
                if j + 1 < ny {
                    acc += (u[c + nx] - u[c]) * ihy2;
                }
            }
            out[c] = acc;
        }
    }
    Field {
        grid: g,
        values: out,
    }
}

/// Midpoint-rule integral over the domain.
pub fn integrate(field: &Field) -> f64 {
    field.values.iter().sum::<f64>() * field.grid.cell_measure()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientWeight {
    /// `integral |grad u|^2`.
    Plain,
    /// `integral |grad u|^2 / u`, evaluated as `4 integral |grad sqrt(u)|^2`.
    InverseDensity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientEnergy {
    pub value: f64,
    /// Cells where the weighted form sees `u = 0`.
    pub vacuum_cells: usize,
}

/// Discrete Dirichlet energy from face differences between neighbouring
/// cells. Boundary faces carry no flux.
pub fn gradient_energy(field: &Field, weight: GradientWeight) -> GradientEnergy {
    match weight {
        GradientWeight::Plain => GradientEnergy {
            value: face_energy(field.grid, &field.values),
            vacuum_cells: 0,
        },
        GradientWeight::InverseDensity => {
            let roots: Vec<f64> = field.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
            GradientEnergy {
                value: 4.0 * face_energy(field.grid, &roots),
                vacuum_cells: field.values.iter().filter(|&&v| v <= 0.0).count(),
            }
        }
    }
}

fn face_energy(g: Grid, u: &[f64]) -> f64 {
    let nx = g.cells[0];
    let ny = if g.dim == 2 { g.cells[1] } else { 1 };
    let hx = g.spacing(0);
    let mut sum = 0.0;
    for j in 0..ny {
        for i in 0..nx - 1 {
            let c = j * nx + i;
            let du = (u[c + 1] - u[c]) / hx;
            sum += du * du;
        }
    }
    if g.dim == 2 {
        let hy = g.spacing(1);
        for j in 0..ny - 1 {
            for i in 0..nx {
                let c = j * nx + i;
                let du = (u[c + nx] - u[c]) / hy;
                sum += du * du;
            }
        }
    }
    sum * g.cell_measure()
}
