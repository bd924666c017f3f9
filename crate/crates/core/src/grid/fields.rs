use super::{Grid, C64};
use crate::error::{Error, Result};

/// Complex scalar samples, one per node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<C64>,
}

/// Complex 3-vector samples stored component-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub comps: [Vec<C64>; 3],
}

/// Components `(W12, W13, W23)` with `Wjk = d_j A_k - d_k A_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoForm {
    pub grid: Grid,
    pub comps: [Vec<C64>; 3],
}

/// Axis pairs of the stored two-form components.
pub const TWO_FORM_AXES: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

fn zip_map(a: &[C64], b: &[C64], f: impl Fn(C64, C64) -> C64) -> Vec<C64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite field value".into()));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        ScalarField { grid, values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn constant(grid: Grid, c: C64) -> Self {
        ScalarField { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> C64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        ScalarField { grid, values }
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        ScalarField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        ScalarField { grid: self.grid, values: zip_map(&self.values, &other.values, |a, b| a + b) }
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        ScalarField { grid: self.grid, values: zip_map(&self.values, &other.values, |a, b| a - b) }
    }

    pub fn mul(&self, other: &ScalarField) -> Self {
        ScalarField { grid: self.grid, values: zip_map(&self.values, &other.values, |a, b| a * b) }
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|v| v * c)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Sup of `|f|` over nodes within `layers` of a face.
    pub fn boundary_layer_sup(&self, layers: usize) -> f64 {
        (0..self.grid.len())
            .filter(|&i| self.grid.boundary_distance(i) < layers)
            .map(|i| self.values[i].norm())
            .fold(0.0, f64::max)
    }

    /// Trapezoid integral of `f`.
    pub fn integrate(&self) -> C64 {
        (0..self.grid.len()).map(|i| self.values[i] * self.grid.weight(i)).sum()
    }

    /// Bilinear pairing `int f g`.
    pub fn dot(&self, other: &ScalarField) -> C64 {
        (0..self.grid.len()).map(|i| self.values[i] * other.values[i] * self.grid.weight(i)).sum()
    }

    /// Sesquilinear pairing `int f conj(g)`.
    pub fn inner(&self, other: &ScalarField) -> C64 {
        (0..self.grid.len())
            .map(|i| self.values[i] * other.values[i].conj() * self.grid.weight(i))
            .sum()
    }
}

impl VectorField {
    pub fn new(grid: Grid, comps: [Vec<C64>; 3]) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::ShapeMismatch(format!("{} values for {} nodes", c.len(), grid.len())));
            }
            if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::InvalidArgument("non-finite field value".into()));
            }
        }
        Ok(VectorField { grid, comps })
    }

    pub fn zeros(grid: Grid) -> Self {
        let z = vec![C64::new(0.0, 0.0); grid.len()];
        VectorField { grid, comps: [z.clone(), z.clone(), z] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> [C64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for i in 0..grid.len() {
            let v = f(grid.node(i));
            for d in 0..3 {
                out.comps[d][i] = v[d];
            }
        }
        out
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        Self::from_fn(grid, |x| {
            let v = f(x);
            [C64::new(v[0], 0.0), C64::new(v[1], 0.0), C64::new(v[2], 0.0)]
        })
    }

    pub fn from_components(a: ScalarField, b: ScalarField, c: ScalarField) -> Self {
        VectorField { grid: a.grid, comps: [a.values, b.values, c.values] }
    }

    pub fn component(&self, d: usize) -> ScalarField {
        ScalarField { grid: self.grid, values: self.comps[d].clone() }
    }

    #[inline]
    pub fn at(&self, i: usize) -> [C64; 3] {
        [self.comps[0][i], self.comps[1][i], self.comps[2][i]]
    }

    fn map_comps(&self, f: impl Fn(usize, &[C64]) -> Vec<C64>) -> Self {
        VectorField { grid: self.grid, comps: [f(0, &self.comps[0]), f(1, &self.comps[1]), f(2, &self.comps[2])] }
    }

    pub fn add(&self, other: &VectorField) -> Self {
        self.map_comps(|d, c| zip_map(c, &other.comps[d], |a, b| a + b))
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        self.map_comps(|d, c| zip_map(c, &other.comps[d], |a, b| a - b))
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map_comps(|_, c| c.iter().map(|&v| v * s).collect())
    }

    pub fn conj(&self) -> Self {
        self.map_comps(|_, c| c.iter().map(|v| v.conj()).collect())
    }

    /// Multiply every component by a scalar field.
    pub fn mul_scalar(&self, f: &ScalarField) -> Self {
        self.map_comps(|_, c| zip_map(c, &f.values, |a, b| a * b))
    }

    /// `sum_d v_d W_d` for a constant complex vector `v` (no conjugation).
    pub fn dot_const(&self, v: [C64; 3]) -> ScalarField {
        let values = (0..self.grid.len())
            .map(|i| v[0] * self.comps[0][i] + v[1] * self.comps[1][i] + v[2] * self.comps[2][i])
            .collect();
        ScalarField { grid: self.grid, values }
    }

    /// Bilinear `W . U` per node.
    pub fn dot(&self, other: &VectorField) -> ScalarField {
        let values = (0..self.grid.len())
            .map(|i| (0..3).map(|d| self.comps[d][i] * other.comps[d][i]).sum())
            .collect();
        ScalarField { grid: self.grid, values }
    }

    /// Sup over nodes of the Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| (0..3).map(|d| self.comps[d][i].norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Sup of the largest component modulus.
    pub fn sup_component(&self) -> f64 {
        self.comps.iter().flat_map(|c| c.iter()).map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn boundary_layer_sup(&self, layers: usize) -> f64 {
        (0..3).map(|d| self.component(d).boundary_layer_sup(layers)).fold(0.0, f64::max)
    }
}

impl TwoForm {
    pub fn zeros(grid: Grid) -> Self {
        let z = vec![C64::new(0.0, 0.0); grid.len()];
        TwoForm { grid, comps: [z.clone(), z.clone(), z] }
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField { grid: self.grid, values: self.comps[c].clone() }
    }

    pub fn sub(&self, other: &TwoForm) -> Self {
        TwoForm {
            grid: self.grid,
            comps: [0, 1, 2].map(|c| zip_map(&self.comps[c], &other.comps[c], |a, b| a - b)),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.comps.iter().flat_map(|c| c.iter()).map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Trapezoid L2 norm summed over the three components.
    pub fn l2_norm(&self) -> f64 {
        (0..3).map(|c| super::l2_norm(&self.component(c)).powi(2)).sum::<f64>().sqrt()
    }
}
