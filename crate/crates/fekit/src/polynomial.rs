//! One-dimensional polynomial bases and the multi-dimensional spaces built
//! from them.

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolynomialKind {
    Lagrange,
    Monomial,
}

/// A single 1D polynomial.
///
/// Lagrange polynomials keep the nodes of their basis followed by the scaling
/// `1 / prod_{s != m} (x_m - x_s)`; monomials store nothing.
#[derive(Clone, Debug)]
pub struct Polynomial1D {
    kind: PolynomialKind,
    order: usize,
    index: usize,
    coefficients: Vec<f64>,
}

impl Polynomial1D {
    pub fn kind(&self) -> PolynomialKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn value(&self, x: f64) -> f64 {
        self.value_and_derivative(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.value_and_derivative(x).1
    }

    pub fn value_and_derivative(&self, x: f64) -> (f64, f64) {
        match self.kind {
            PolynomialKind::Monomial => {
                let m = self.index as i32;
                let d = if m == 0 { 0.0 } else { m as f64 * x.powi(m - 1) };
                (x.powi(m), d)
            }
            PolynomialKind::Lagrange => {
                let nodes = &self.coefficients[..=self.order];
                let scale = self.coefficients[self.order + 1];
                let m = self.index;
                let mut value = 1.0;
                let mut deriv = 0.0;
                for (s, &xs) in nodes.iter().enumerate() {
                    if s == m {
                        continue;
                    }
                    // product rule: d(P * (x - xs)) = dP * (x - xs) + P
                    deriv = deriv * (x - xs) + value;
                    value *= x - xs;
                }
                (scale * value, scale * deriv)
            }
        }
    }
}

/// An ordered 1D basis of polynomials of a common kind and order.
#[derive(Clone, Debug)]
pub struct PolynomialBasis1D {
    polynomials: Vec<Polynomial1D>,
}

impl PolynomialBasis1D {
    /// Lagrange basis on the given (distinct) nodes.
    pub fn lagrange(nodes: &[f64]) -> Result<Self> {
        if nodes.is_empty() {
            return invalid("a Lagrange basis needs at least one node");
        }
        for (i, a) in nodes.iter().enumerate() {
            if nodes[..i].iter().any(|b| (a - b).abs() <= f64::EPSILON * 16.0) {
                return invalid(format!("duplicate Lagrange node {a}"));
            }
        }
        let order = nodes.len() - 1;
        let polynomials = (0..nodes.len())
            .map(|m| {
                let denom: f64 = nodes
                    .iter()
                    .enumerate()
                    .filter(|&(s, _)| s != m)
                    .map(|(_, &xs)| nodes[m] - xs)
                    .product();
                let mut coefficients = nodes.to_vec();
                coefficients.push(1.0 / denom);
                Polynomial1D {
                    kind: PolynomialKind::Lagrange,
                    order,
                    index: m,
                    coefficients,
                }
            })
            .collect();
        Ok(Self { polynomials })
    }

    /// Lagrange basis on `k + 1` equidistant nodes of `[0, 1]`; order 0 uses
    /// the midpoint.
    pub fn equidistant(k: usize) -> Self {
        let nodes: Vec<f64> = if k == 0 {
            vec![0.5]
        } else {
            (0..=k).map(|i| i as f64 / k as f64).collect()
        };
        Self::lagrange(&nodes).expect("equidistant nodes are distinct")
    }

    /// Monomials `1, x, ..., x^k`.
    pub fn monomial(k: usize) -> Self {
        let polynomials = (0..=k)
            .map(|m| Polynomial1D {
                kind: PolynomialKind::Monomial,
                order: k,
                index: m,
                coefficients: Vec::new(),
            })
            .collect();
        Self { polynomials }
    }

    pub fn len(&self) -> usize {
        self.polynomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polynomials.is_empty()
    }

    pub fn order(&self) -> usize {
        self.polynomials.len() - 1
    }

    pub fn polynomials(&self) -> &[Polynomial1D] {
        &self.polynomials
    }
}

/// Values and gradients of a set of scalar functions at a set of points.
#[derive(Clone, Debug, Default)]
pub struct BasisEvaluation {
    pub num_dims: usize,
    pub n_functions: usize,
    pub n_points: usize,
    /// `values[f * n_points + p]`
    pub values: Vec<f64>,
    /// `gradients[(dir * n_functions + f) * n_points + p]`
    pub gradients: Vec<f64>,
}

impl BasisEvaluation {
    fn zeros(num_dims: usize, n_functions: usize, n_points: usize) -> Self {
        Self {
            num_dims,
            n_functions,
            n_points,
            values: vec![0.0; n_functions * n_points],
            gradients: vec![0.0; num_dims * n_functions * n_points],
        }
    }

    pub fn value(&self, f: usize, p: usize) -> f64 {
        self.values[f * self.n_points + p]
    }

    pub fn gradient(&self, dir: usize, f: usize, p: usize) -> f64 {
        self.gradients[(dir * self.n_functions + f) * self.n_points + p]
    }
}

/// Tensor product of 1D bases, functions ordered with direction 0 fastest.
#[derive(Clone, Debug)]
pub struct TensorProductSpace {
    bases: Vec<PolynomialBasis1D>,
}

impl TensorProductSpace {
    pub fn new(bases: Vec<PolynomialBasis1D>) -> Self {
        Self { bases }
    }

    /// Equidistant Lagrange tensor space with per-direction orders.
    pub fn lagrange(orders: &[usize]) -> Self {
        Self::new(orders.iter().map(|&k| PolynomialBasis1D::equidistant(k)).collect())
    }

    pub fn num_dims(&self) -> usize {
        self.bases.len()
    }

    pub fn bases(&self) -> &[PolynomialBasis1D] {
        &self.bases
    }

    pub fn dimension(&self) -> usize {
        self.bases.iter().map(|b| b.len()).product()
    }

    /// Multi-index of function `f`.
    pub fn multi_index(&self, mut f: usize) -> Vec<usize> {
        self.bases
            .iter()
            .map(|b| {
                let m = f % b.len();
                f /= b.len();
                m
            })
            .collect()
    }
}

/// Monomials `x^alpha` with `|alpha| <= k`, ordered lexicographically with
/// direction 0 fastest.
#[derive(Clone, Debug)]
pub struct TruncatedTensorProductSpace {
    num_dims: usize,
    order: usize,
    multi_indices: Vec<Vec<usize>>,
}

impl TruncatedTensorProductSpace {
    pub fn new(num_dims: usize, order: usize) -> Self {
        let mut multi_indices: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..num_dims {
            multi_indices = multi_indices
                .into_iter()
                .flat_map(|m| {
                    let used: usize = m.iter().sum();
                    (0..=order - used).map(move |a| {
                        let mut n = m.clone();
                        n.push(a);
                        n
                    })
                })
                .collect();
        }
        multi_indices.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
        Self {
            num_dims,
            order,
            multi_indices,
        }
    }

    pub fn num_dims(&self) -> usize {
        self.num_dims
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn multi_indices(&self) -> &[Vec<usize>] {
        &self.multi_indices
    }

    pub fn dimension(&self) -> usize {
        self.multi_indices.len()
    }
}

/// Either kind of multi-dimensional polynomial space.
#[derive(Clone, Debug)]
pub enum PolynomialSpace {
    Tensor(TensorProductSpace),
    Truncated(TruncatedTensorProductSpace),
}

impl PolynomialSpace {
    pub fn num_dims(&self) -> usize {
        match self {
            Self::Tensor(s) => s.num_dims(),
            Self::Truncated(s) => s.num_dims(),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::Tensor(s) => s.dimension(),
            Self::Truncated(s) => s.dimension(),
        }
    }

    /// Values and gradients of every function at every point.
    pub fn evaluate(&self, points: &[Vec<f64>]) -> Result<BasisEvaluation> {
        if points.is_empty() {
            return invalid("cannot evaluate a space on an empty point list");
        }
        let d = self.num_dims();
        if points.iter().any(|p| p.len() != d) {
            return invalid(format!("points must have {d} coordinates"));
        }
        let np = points.len();
        let nf = self.dimension();
        let mut out = BasisEvaluation::zeros(d, nf, np);
        // per-direction 1D tables: [dir][m][p] -> (value, derivative)
        let tables: Vec<Vec<Vec<(f64, f64)>>> = match self {
            Self::Tensor(s) => s
                .bases()
                .iter()
                .enumerate()
                .map(|(dir, b)| {
                    b.polynomials()
                        .iter()
                        .map(|poly| points.iter().map(|x| poly.value_and_derivative(x[dir])).collect())
                        .collect()
                })
                .collect(),
            Self::Truncated(s) => {
                let mono = PolynomialBasis1D::monomial(s.order());
                (0..d)
                    .map(|dir| {
                        mono.polynomials()
                            .iter()
                            .map(|poly| {
                                points.iter().map(|x| poly.value_and_derivative(x[dir])).collect()
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        for f in 0..nf {
            let alpha = match self {
                Self::Tensor(s) => s.multi_index(f),
                Self::Truncated(s) => s.multi_indices()[f].clone(),
            };
            for p in 0..np {
                let mut value = 1.0;
                for (dir, &a) in alpha.iter().enumerate() {
                    value *= tables[dir][a][p].0;
                }
                out.values[f * np + p] = value;
                for g in 0..d {
                    let mut grad = 1.0;
                    for (dir, &a) in alpha.iter().enumerate() {
                        let (v, dv) = tables[dir][a][p];
                        grad *= if dir == g { dv } else { v };
                    }
                    out.gradients[(g * nf + f) * np + p] = grad;
                }
            }
        }
        Ok(out)
    }
}

impl From<TensorProductSpace> for PolynomialSpace {
    fn from(s: TensorProductSpace) -> Self {
        Self::Tensor(s)
    }
}

impl From<TruncatedTensorProductSpace> for PolynomialSpace {
    fn from(s: TruncatedTensorProductSpace) -> Self {
        Self::Truncated(s)
    }
}
