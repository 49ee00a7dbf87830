//! Shift-position combinatorics of a two-layer movable surface.
//!
//! MS 1 is the fixed `m_rows x m_cols` surface, MS 2 the movable
//! `n_rows x n_cols` surface sliding on top of it in whole-element steps.
//! Every placement of MS 2 is a shift position `u` and synthesizes one beam
//! pattern. Element and pattern indices are 1-based in the public API and
//! row-major: element `(r, c)` of an `R x C` surface has index `(r - 1) * C + c`.
//!
//! Note: the 1D configuration MS 1 = 1x64, MS 2 = 1x36 has
//! `U = 64 - 36 + 1 = 29` shift positions. Some published discussions of this
//! configuration quote 28; the count here always follows `U_c = M_c - N_c + 1`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_len, Error, Result};

/// Element counts of both surfaces plus the element spacing in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MisGeometry {
    m_rows: usize,
    m_cols: usize,
    n_rows: usize,
    n_cols: usize,
    spacing_over_lambda: f64,
}

/// Half-wavelength element spacing.
pub const DEFAULT_SPACING: f64 = 0.5;

impl MisGeometry {
    /// Builds a geometry with half-wavelength spacing.
    pub fn new(m_rows: usize, m_cols: usize, n_rows: usize, n_cols: usize) -> Result<Self> {
        Self::with_spacing(m_rows, m_cols, n_rows, n_cols, DEFAULT_SPACING)
    }

    pub fn with_spacing(
        m_rows: usize,
        m_cols: usize,
        n_rows: usize,
        n_cols: usize,
        spacing_over_lambda: f64,
    ) -> Result<Self> {
        if m_rows == 0 || m_cols == 0 || n_rows == 0 || n_cols == 0 {
            return Err(Error::Geometry(format!(
                "element counts must be positive (MS 1 {m_rows}x{m_cols}, MS 2 {n_rows}x{n_cols})"
            )));
        }
        if n_rows > m_rows || n_cols > m_cols {
            return Err(Error::Geometry(format!(
                "MS 2 ({n_rows}x{n_cols}) must fit inside MS 1 ({m_rows}x{m_cols}): \
                 require n_rows <= m_rows and n_cols <= m_cols"
            )));
        }
        if !(spacing_over_lambda.is_finite() && spacing_over_lambda > 0.0) {
            return Err(Error::Geometry(format!(
                "spacing_over_lambda must be positive and finite, got {spacing_over_lambda}"
            )));
        }
        Ok(Self {
            m_rows,
            m_cols,
            n_rows,
            n_cols,
            spacing_over_lambda,
        })
    }

    /// Single-layer static surface: MS 2 covers MS 1 exactly, so `U = 1`.
    pub fn single_layer(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, rows, cols)
    }

    /// The single-layer surface with the same MS 1 and spacing.
    pub fn to_single_layer(&self) -> Self {
        Self {
            n_rows: self.m_rows,
            n_cols: self.m_cols,
            ..*self
        }
    }

    pub fn m_rows(&self) -> usize {
        self.m_rows
    }
    pub fn m_cols(&self) -> usize {
        self.m_cols
    }
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
    pub fn spacing_over_lambda(&self) -> f64 {
        self.spacing_over_lambda
    }

    /// `M`, the number of MS 1 elements.
    pub fn ms1_len(&self) -> usize {
        self.m_rows * self.m_cols
    }

    /// `N`, the number of MS 2 elements.
    pub fn ms2_len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn pattern_grid(&self) -> PatternGrid {
        pattern_grid(self)
    }

    /// `U`, the number of shift positions (beam patterns).
    pub fn pattern_count(&self) -> usize {
        self.pattern_grid().count
    }

    /// All shift positions in flat-index order `u = 1..=U`.
    pub fn positions(&self) -> impl Iterator<Item = ShiftPosition> {
        let grid = self.pattern_grid();
        (1..=grid.rows)
            .flat_map(move |r| (1..=grid.cols).map(move |c| ShiftPosition { u_row: r, u_col: c }))
    }

    /// Selection operators for every shift position, indexed by `u - 1`.
    pub fn selections(&self) -> Vec<SelectionOperator> {
        self.positions()
            .map(|pos| build_selection(self, pos).expect("positions() stays on the grid"))
            .collect()
    }
}

/// Number of shift positions along each axis and in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PatternGrid {
    pub rows: usize,
    pub cols: usize,
    pub count: usize,
}

/// `(U_r, U_c, U)` for a geometry.
pub fn pattern_grid(geom: &MisGeometry) -> PatternGrid {
    let rows = geom.m_rows - geom.n_rows + 1;
    let cols = geom.m_cols - geom.n_cols + 1;
    PatternGrid {
        rows,
        cols,
        count: rows * cols,
    }
}

/// A placement of MS 2 on MS 1, as 1-based unit shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ShiftPosition {
    pub u_row: usize,
    pub u_col: usize,
}

impl ShiftPosition {
    pub fn new(grid: PatternGrid, u_row: usize, u_col: usize) -> Result<Self> {
        if u_row == 0 || u_col == 0 || u_row > grid.rows || u_col > grid.cols {
            return Err(Error::OutOfGrid {
                u_row,
                u_col,
                u_rows: grid.rows,
                u_cols: grid.cols,
            });
        }
        Ok(Self { u_row, u_col })
    }

    /// Inverse of [`ShiftPosition::index`].
    pub fn from_index(grid: PatternGrid, u: usize) -> Result<Self> {
        if u == 0 || u > grid.count {
            return Err(Error::IndexOutOfRange {
                what: "shift position",
                index: u,
                len: grid.count,
            });
        }
        Ok(Self {
            u_row: (u - 1) / grid.cols + 1,
            u_col: (u - 1) % grid.cols + 1,
        })
    }

    /// Flat 1-based index `u = (u_row - 1) * U_c + u_col`.
    pub fn index(&self, grid: PatternGrid) -> usize {
        (self.u_row - 1) * grid.cols + self.u_col
    }
}

/// Compact form of the binary selection matrix `S_u` and padding vector `e_u`.
///
/// `overlap[n]` is the 0-based MS 1 element covered by 0-based MS 2 element
/// `n`; `padding[m]` is true where MS 1 element `m` is not covered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionOperator {
    position: ShiftPosition,
    overlap: Vec<usize>,
    padding: Vec<bool>,
}

impl SelectionOperator {
    pub fn position(&self) -> ShiftPosition {
        self.position
    }

    /// 0-based MS 1 index covered by each MS 2 element.
    pub fn overlap_map(&self) -> &[usize] {
        &self.overlap
    }

    /// Padding mask over MS 1 (true = not covered by MS 2).
    pub fn padding(&self) -> &[bool] {
        &self.padding
    }

    pub fn ms1_len(&self) -> usize {
        self.padding.len()
    }

    pub fn ms2_len(&self) -> usize {
        self.overlap.len()
    }

    /// Dense `M x N` binary matrix, row-major.
    pub fn dense_matrix(&self) -> Vec<Vec<u8>> {
        let mut s = vec![vec![0u8; self.ms2_len()]; self.ms1_len()];
        for (n, &m) in self.overlap.iter().enumerate() {
            s[m][n] = 1;
        }
        s
    }

    /// Dense padding vector `e_u` as 0/1 entries.
    pub fn dense_padding(&self) -> Vec<u8> {
        self.padding.iter().map(|&p| u8::from(p)).collect()
    }
}

/// Selection operator for one shift position.
///
/// MS 2 element `(n_r, n_c)` lands on MS 1 element
/// `(n_r + u_row - 1, n_c + u_col - 1)`.
pub fn build_selection(geom: &MisGeometry, pos: ShiftPosition) -> Result<SelectionOperator> {
    let grid = geom.pattern_grid();
    let pos = ShiftPosition::new(grid, pos.u_row, pos.u_col)?;
    let mut overlap = Vec::with_capacity(geom.ms2_len());
    let mut padding = vec![true; geom.ms1_len()];
    for nr in 0..geom.n_rows {
        for nc in 0..geom.n_cols {
            let m = (nr + pos.u_row - 1) * geom.m_cols + (nc + pos.u_col - 1);
            overlap.push(m);
            padding[m] = false;
        }
    }
    Ok(SelectionOperator {
        position: pos,
        overlap,
        padding,
    })
}

/// Equivalent MS 2 phase on MS 1's grid, `S_u theta + e_u`.
pub fn equivalent_phase(theta: &[Complex64], sel: &SelectionOperator) -> Result<Vec<Complex64>> {
    check_len("theta", sel.ms2_len(), theta.len())?;
    let mut out = vec![Complex64::new(1.0, 0.0); sel.ms1_len()];
    for (&m, &t) in sel.overlap.iter().zip(theta) {
        out[m] = t;
    }
    Ok(out)
}
