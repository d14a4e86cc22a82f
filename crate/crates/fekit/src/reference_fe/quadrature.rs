use crate::error::{Error, Result};
use crate::polytope::Polytope;

/// Quadrature points (reference coordinates) and weights.
#[derive(Clone, Debug)]
pub struct Quadrature {
    num_dims: usize,
    degree: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Gauss-Legendre rule with `n` points on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "a Gauss rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * weight;
        w[n - 1 - i] = 0.5 * weight;
    }
    (x, w)
}

fn tensor_points(d: usize, x: &[f64], w: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    let mut weights = vec![1.0];
    for _ in 0..d {
        let mut np = Vec::with_capacity(points.len() * x.len());
        let mut nw = Vec::with_capacity(points.len() * x.len());
        for (xi, wi) in x.iter().zip(w) {
            for (p, pw) in points.iter().zip(&weights) {
                let mut q = p.clone();
                q.push(*xi);
                np.push(q);
                nw.push(pw * wi);
            }
        }
        points = np;
        weights = nw;
    }
    (points, weights)
}

impl Quadrature {
    /// Tensor Gauss rule on the unit n-cube exact for degree `degree` in each
    /// variable.
    pub fn n_cube(num_dims: usize, degree: usize) -> Self {
        let n = degree / 2 + 1;
        let (x, w) = gauss_legendre(n);
        let (points, weights) = tensor_points(num_dims, &x, &w);
        Self {
            num_dims,
            degree,
            points,
            weights,
        }
    }

    /// Collapsed (Duffy) tensor Gauss rule on the unit n-simplex, exact for
    /// total degree `degree`.
    pub fn n_simplex(num_dims: usize, degree: usize) -> Self {
        let n = (degree + num_dims).div_ceil(2).max(1);
        let (x, w) = gauss_legendre(n);
        let (cube, cube_w) = tensor_points(num_dims, &x, &w);
        let mut points = Vec::with_capacity(cube.len());
        let mut weights = Vec::with_capacity(cube.len());
        for (u, wu) in cube.iter().zip(cube_w) {
            let mut p = vec![0.0; num_dims];
            let mut scale = 1.0;
            for i in (0..num_dims).rev() {
                p[i] = u[i] * scale;
                scale *= 1.0 - u[i];
            }
            let mut jacobian = 1.0;
            for (j, uj) in u.iter().enumerate().skip(1) {
                jacobian *= (1.0 - uj).powi(j as i32);
            }
            points.push(p);
            weights.push(wu * jacobian);
        }
        Self {
            num_dims,
            degree,
            points,
            weights,
        }
    }

    /// The one-point rule of a 0-dimensional polytope.
    pub fn point() -> Self {
        Self {
            num_dims: 0,
            degree: usize::MAX,
            points: vec![Vec::new()],
            weights: vec![1.0],
        }
    }

    /// Rule of the requested degree on an n-cube or n-simplex.
    pub fn for_polytope(polytope: &Polytope, degree: usize) -> Result<Self> {
        Self::for_shape(polytope.num_dims(), polytope.is_n_cube(), polytope.is_simplex(), degree)
    }

    pub(crate) fn for_shape(d: usize, cube: bool, simplex: bool, degree: usize) -> Result<Self> {
        if d == 0 {
            Ok(Self::point())
        } else if cube {
            Ok(Self::n_cube(d, degree))
        } else if simplex {
            Ok(Self::n_simplex(d, degree))
        } else {
            Err(Error::Unsupported(
                "quadratures are only available on n-cubes and n-simplices".into(),
            ))
        }
    }

    pub fn num_dims(&self) -> usize {
        self.num_dims
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_points(&self) -> usize {
        self.weights.len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point_coords(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    /// Exact integral of x^alpha over the unit simplex.
    fn simplex_moment(alpha: &[usize]) -> f64 {
        let num: f64 = alpha.iter().map(|&a| factorial(a)).product();
        num / factorial(alpha.iter().sum::<usize>() + alpha.len())
    }

    #[test]
    fn two_point_rule() {
        let (x, w) = gauss_legendre(2);
        let r = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(x[0], 0.5 * (1.0 - r), epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 0.5 * (1.0 + r), epsilon = 1e-15);
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-15);
        let q = Quadrature::n_cube(1, 3);
        assert_eq!(q.num_points(), 2);
        let i: f64 = q.points().iter().zip(q.weights()).map(|(p, w)| p[0].powi(3) * w).sum();
        assert_abs_diff_eq!(i, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn one_dimensional_exactness() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            for m in 0..2 * n {
                let i: f64 = x.iter().zip(&w).map(|(x, w)| x.powi(m as i32) * w).sum();
                assert!((i - 1.0 / (m as f64 + 1.0)).abs() < 1e-14, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn measures() {
        for q in 0..8 {
            for d in 1..=3 {
                let sum: f64 = Quadrature::n_cube(d, q).weights().iter().sum();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-14);
                let s = Quadrature::n_simplex(d, q);
                assert!(s.weights().iter().all(|&w| w > 0.0));
                let sum: f64 = s.weights().iter().sum();
                assert_abs_diff_eq!(sum, 1.0 / factorial(d), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn simplex_exactness() {
        for d in 2..=3 {
            for q in 0..=8 {
                let rule = Quadrature::n_simplex(d, q);
                let mut alpha = vec![0usize; d];
                loop {
                    if alpha.iter().sum::<usize>() <= q {
                        let i: f64 = rule
                            .points()
                            .iter()
                            .zip(rule.weights())
                            .map(|(p, w)| {
                                w * p.iter().zip(&alpha).map(|(x, &a)| x.powi(a as i32)).product::<f64>()
                            })
                            .sum();
                        assert!((i - simplex_moment(&alpha)).abs() < 1e-14, "d={d} q={q} {alpha:?}");
                    }
                    let mut j = 0;
                    while j < d {
                        alpha[j] += 1;
                        if alpha[j] <= q {
                            break;
                        }
                        alpha[j] = 0;
                        j += 1;
                    }
                    if j == d {
                        break;
                    }
                }
            }
        }
    }
}
