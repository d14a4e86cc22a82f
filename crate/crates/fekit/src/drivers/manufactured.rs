use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::{Point, SPACE_DIM};

/// Scalar field.
pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
/// Vector field written into a slice of components.
pub type VectorFn = Arc<dyn Fn(&Point, &mut [f64]) + Send + Sync>;

/// Exact solution of `-κ Δu = f` with Dirichlet data `u`.
#[derive(Clone)]
pub struct PoissonCase {
    pub name: String,
    pub num_dims: usize,
    pub kappa: f64,
    pub u: ScalarFn,
    pub grad_u: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
    pub forcing: ScalarFn,
}

impl PoissonCase {
    /// `u = Π sin(π x_i)`.
    pub fn sine(num_dims: usize) -> Self {
        let d = num_dims;
        Self {
            name: "sine".into(),
            num_dims,
            kappa: 1.0,
            u: Arc::new(move |x| (0..d).map(|i| (PI * x[i]).sin()).product()),
            grad_u: Arc::new(move |x| {
                let mut g = [0.0; SPACE_DIM];
                for (i, gi) in g.iter_mut().enumerate().take(d) {
                    *gi = PI
                        * (0..d)
                            .map(|j| if j == i { (PI * x[j]).cos() } else { (PI * x[j]).sin() })
                            .product::<f64>();
                }
                g
            }),
            forcing: Arc::new(move |x| d as f64 * PI * PI * (0..d).map(|i| (PI * x[i]).sin()).product::<f64>()),
        }
    }

    /// `u = (x_0 + ... + x_{d-1})^k`, which lies in every order-`k` Lagrangian space.
    pub fn polynomial(num_dims: usize, k: usize) -> Self {
        let d = num_dims;
        let s = move |x: &Point| x[..d].iter().sum::<f64>();
        let kf = k as f64;
        Self {
            name: format!("polynomial{k}"),
            num_dims,
            kappa: 1.0,
            u: Arc::new(move |x| s(x).powi(k as i32)),
            grad_u: Arc::new(move |x| {
                let g = if k == 0 { 0.0 } else { kf * s(x).powi(k as i32 - 1) };
                let mut out = [0.0; SPACE_DIM];
                out[..d].iter_mut().for_each(|v| *v = g);
                out
            }),
            forcing: Arc::new(move |x| {
                if k < 2 {
                    0.0
                } else {
                    -(d as f64) * kf * (kf - 1.0) * s(x).powi(k as i32 - 2)
                }
            }),
        }
    }

    pub fn by_name(name: &str, num_dims: usize, order: usize) -> Result<Self> {
        match name {
            "sine" => Ok(Self::sine(num_dims)),
            "polynomial" => Ok(Self::polynomial(num_dims, order)),
            _ => Err(Error::InvalidArgument(format!("unknown Poisson case '{name}'"))),
        }
    }
}

/// Exact solution of `-div(μ ε(u)) + ∇p = f`, `div u = 0`, with velocity
/// Dirichlet data on the whole boundary.
#[derive(Clone)]
pub struct StokesCase {
    pub name: String,
    pub num_dims: usize,
    pub mu: f64,
    pub u: VectorFn,
    /// Writes `∂u_c/∂x_j` at `c * SPACE_DIM + j`.
    pub grad_u: VectorFn,
    pub p: ScalarFn,
    pub forcing: VectorFn,
}

impl StokesCase {
    /// `u = (x², -2xy, 0)`, `p = Σ x_i`.
    pub fn polynomial(num_dims: usize) -> Result<Self> {
        if !(2..=3).contains(&num_dims) {
            return Err(Error::DimensionOutOfRange(num_dims, 3));
        }
        let d = num_dims;
        let mu = 1.0;
        Ok(Self {
            name: "polynomial".into(),
            num_dims,
            mu,
            u: Arc::new(|x, v| {
                v[0] = x[0] * x[0];
                v[1] = -2.0 * x[0] * x[1];
            }),
            grad_u: Arc::new(|x, g| {
                g[0] = 2.0 * x[0];
                g[SPACE_DIM] = -2.0 * x[1];
                g[SPACE_DIM + 1] = -2.0 * x[0];
            }),
            p: Arc::new(move |x| x[..d].iter().sum()),
            forcing: Arc::new(move |_, f| {
                f[0] = 1.0 - mu;
                f[1..d].iter_mut().for_each(|v| *v = 1.0);
            }),
        })
    }

    /// Divergence-free velocity of the stream function `sin²(πx) sin²(πy)`
    /// and `p = sin(πx) cos(πy)` on the unit square.
    pub fn sine(num_dims: usize) -> Result<Self> {
        if num_dims != 2 {
            return Err(Error::Unsupported("the sine Stokes case is two-dimensional".into()));
        }
        let mu = 1.0;
        let tp = 2.0 * PI;
        Ok(Self {
            name: "sine".into(),
            num_dims,
            mu,
            u: Arc::new(move |x, v| {
                v[0] = PI * (PI * x[0]).sin().powi(2) * (tp * x[1]).sin();
                v[1] = -PI * (tp * x[0]).sin() * (PI * x[1]).sin().powi(2);
            }),
            grad_u: Arc::new(move |x, g| {
                let p2 = PI * PI;
                g[0] = p2 * (tp * x[0]).sin() * (tp * x[1]).sin();
                g[1] = p2 * (1.0 - (tp * x[0]).cos()) * (tp * x[1]).cos();
                g[SPACE_DIM] = -p2 * (tp * x[0]).cos() * (1.0 - (tp * x[1]).cos());
                g[SPACE_DIM + 1] = -p2 * (tp * x[0]).sin() * (tp * x[1]).sin();
            }),
            p: Arc::new(|x| (PI * x[0]).sin() * (PI * x[1]).cos()),
            forcing: Arc::new(move |x, f| {
                let p3 = 2.0 * PI.powi(3);
                let lap0 = p3 * (tp * x[1]).sin() * (2.0 * (tp * x[0]).cos() - 1.0);
                let lap1 = -p3 * (tp * x[0]).sin() * (2.0 * (tp * x[1]).cos() - 1.0);
                f[0] = -0.5 * mu * lap0 + PI * (PI * x[0]).cos() * (PI * x[1]).cos();
                f[1] = -0.5 * mu * lap1 - PI * (PI * x[0]).sin() * (PI * x[1]).sin();
            }),
        })
    }

    pub fn by_name(name: &str, num_dims: usize) -> Result<Self> {
        match name {
            "sine" => Self::sine(num_dims),
            "polynomial" => Self::polynomial(num_dims),
            _ => Err(Error::InvalidArgument(format!("unknown Stokes case '{name}'"))),
        }
    }
}
