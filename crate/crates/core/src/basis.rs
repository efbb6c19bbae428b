//! Shape functions: biquadratic velocity (9 nodes), bilinear pressure/geometry
//! (4 corners) on [-1,1]², and linear triangles.
//!
//! Local velocity node `3*b + a` sits at ξ = (a-1, b-1). Corners are ordered
//! counterclockwise from (-1,-1).

use nalgebra::{Matrix2, Vector2};

/// Velocity-node index of each corner, in corner order.
pub const CORNER_TO_Q2: [usize; 4] = [0, 2, 8, 6];

/// Local reference coordinates of the four corners.
pub const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

#[inline]
fn lagrange2(s: f64) -> [f64; 3] {
    [0.5 * s * (s - 1.0), 1.0 - s * s, 0.5 * s * (s + 1.0)]
}

#[inline]
fn lagrange2_d(s: f64) -> [f64; 3] {
    [s - 0.5, -2.0 * s, s + 0.5]
}

/// Biquadratic basis values at ξ.
pub fn q2_values(xi: [f64; 2]) -> [f64; 9] {
    let lx = lagrange2(xi[0]);
    let ly = lagrange2(xi[1]);
    let mut out = [0.0; 9];
    for b in 0..3 {
        for a in 0..3 {
            out[3 * b + a] = lx[a] * ly[b];
        }
    }
    out
}

/// Reference-coordinate gradients of the biquadratic basis.
pub fn q2_gradients(xi: [f64; 2]) -> [[f64; 2]; 9] {
    let lx = lagrange2(xi[0]);
    let ly = lagrange2(xi[1]);
    let dx = lagrange2_d(xi[0]);
    let dy = lagrange2_d(xi[1]);
    let mut out = [[0.0; 2]; 9];
    for b in 0..3 {
        for a in 0..3 {
            out[3 * b + a] = [dx[a] * ly[b], lx[a] * dy[b]];
        }
    }
    out
}

/// Bilinear basis values at ξ, corner order.
pub fn q1_values(xi: [f64; 2]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (c, r) in CORNERS.iter().enumerate() {
        out[c] = 0.25 * (1.0 + r[0] * xi[0]) * (1.0 + r[1] * xi[1]);
    }
    out
}

pub fn q1_gradients(xi: [f64; 2]) -> [[f64; 2]; 4] {
    let mut out = [[0.0; 2]; 4];
    for (c, r) in CORNERS.iter().enumerate() {
        out[c] = [
            0.25 * r[0] * (1.0 + r[1] * xi[1]),
            0.25 * r[1] * (1.0 + r[0] * xi[0]),
        ];
    }
    out
}

/// Bilinear geometry of a quadrilateral cell.
#[derive(Debug, Clone, Copy)]
pub struct QuadGeometry {
    pub corners: [[f64; 2]; 4],
}

impl QuadGeometry {
    pub fn new(corners: [[f64; 2]; 4]) -> Self {
        QuadGeometry { corners }
    }

    pub fn map(&self, xi: [f64; 2]) -> [f64; 2] {
        let n = q1_values(xi);
        let mut x = [0.0; 2];
        for c in 0..4 {
            x[0] += n[c] * self.corners[c][0];
            x[1] += n[c] * self.corners[c][1];
        }
        x
    }

    /// Jacobian ∂x/∂ξ (rows: x components, columns: ξ components).
    pub fn jacobian(&self, xi: [f64; 2]) -> Matrix2<f64> {
        let g = q1_gradients(xi);
        let mut j = Matrix2::zeros();
        for c in 0..4 {
            for r in 0..2 {
                for s in 0..2 {
                    j[(r, s)] += self.corners[c][r] * g[c][s];
                }
            }
        }
        j
    }

    pub fn diameter(&self) -> f64 {
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        d(self.corners[0], self.corners[2]).max(d(self.corners[1], self.corners[3]))
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in &self.corners {
            for k in 0..2 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        (lo, hi)
    }

    /// Inverse bilinear map by Newton iteration from `start`; returns ξ and the
    /// final residual norm.
    pub fn inverse_map(&self, x: [f64; 2], start: [f64; 2], max_iter: usize, tol: f64) -> ([f64; 2], f64) {
        let mut xi = start;
        let mut res = f64::INFINITY;
        for _ in 0..max_iter {
            let y = self.map(xi);
            let r = Vector2::new(y[0] - x[0], y[1] - x[1]);
            res = r.norm();
            if res <= tol {
                break;
            }
            let j = self.jacobian(xi);
            let Some(jinv) = j.try_inverse() else { break };
            let d = jinv * r;
            xi = [xi[0] - d[0], xi[1] - d[1]];
        }
        let y = self.map(xi);
        res = res.min(((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2)).sqrt());
        (xi, res)
    }
}

/// Values and physical gradients of the Q2 basis at one quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct Q2Point {
    pub values: [f64; 9],
    pub grads: [[f64; 2]; 9],
    /// det J times quadrature weight
    pub jxw: f64,
    pub x: [f64; 2],
}

impl Q2Point {
    pub fn evaluate(geom: &QuadGeometry, xi: [f64; 2], weight: f64) -> Self {
        let j = geom.jacobian(xi);
        let det = j.determinant();
        let jinv_t = j.try_inverse().expect("singular cell Jacobian").transpose();
        let gref = q2_gradients(xi);
        let mut grads = [[0.0; 2]; 9];
        for a in 0..9 {
            let g = jinv_t * Vector2::new(gref[a][0], gref[a][1]);
            grads[a] = [g[0], g[1]];
        }
        Q2Point {
            values: q2_values(xi),
            grads,
            jxw: det * weight,
            x: geom.map(xi),
        }
    }
}

/// Signed area of a triangle.
pub fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Constant physical gradients of the three P1 basis functions and the signed area.
pub fn p1_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let area = triangle_area(p[0], p[1], p[2]);
    let inv = 1.0 / (2.0 * area);
    let grads = [
        [(p[1][1] - p[2][1]) * inv, (p[2][0] - p[1][0]) * inv],
        [(p[2][1] - p[0][1]) * inv, (p[0][0] - p[2][0]) * inv],
        [(p[0][1] - p[1][1]) * inv, (p[1][0] - p[0][0]) * inv],
    ];
    (grads, area)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q2_is_lagrange_and_partition_of_unity() {
        for b in 0..3 {
            for a in 0..3 {
                let xi = [a as f64 - 1.0, b as f64 - 1.0];
                let v = q2_values(xi);
                for (k, vk) in v.iter().enumerate() {
                    let expected = if k == 3 * b + a { 1.0 } else { 0.0 };
                    assert!((vk - expected).abs() < 1e-15);
                }
            }
        }
        let v = q2_values([0.3, -0.7]);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let g = q2_gradients([0.3, -0.7]);
        let gs = g.iter().fold([0.0, 0.0], |s, x| [s[0] + x[0], s[1] + x[1]]);
        assert!(gs[0].abs() < 1e-14 && gs[1].abs() < 1e-14);
    }

    #[test]
    fn q2_gradients_match_finite_differences() {
        let xi = [0.21, -0.43];
        let h = 1e-6;
        let g = q2_gradients(xi);
        let vp = q2_values([xi[0] + h, xi[1]]);
        let vm = q2_values([xi[0] - h, xi[1]]);
        let wp = q2_values([xi[0], xi[1] + h]);
        let wm = q2_values([xi[0], xi[1] - h]);
        for a in 0..9 {
            assert!((g[a][0] - (vp[a] - vm[a]) / (2.0 * h)).abs() < 1e-8);
            assert!((g[a][1] - (wp[a] - wm[a]) / (2.0 * h)).abs() < 1e-8);
        }
    }

    #[test]
    fn p1_gradients_reproduce_affine_field() {
        let p = [[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]];
        let f = |x: [f64; 2]| 2.0 * x[0] - 3.0 * x[1] + 0.5;
        let (g, area) = p1_gradients(p);
        assert!(area > 0.0);
        let mut grad = [0.0; 2];
        for k in 0..3 {
            grad[0] += f(p[k]) * g[k][0];
            grad[1] += f(p[k]) * g[k][1];
        }
        assert!((grad[0] - 2.0).abs() < 1e-13 && (grad[1] + 3.0).abs() < 1e-13);
    }

    #[test]
    fn inverse_map_on_distorted_quad() {
        let geom = QuadGeometry::new([[0.0, 0.0], [2.0, 0.3], [2.4, 1.9], [-0.2, 1.2]]);
        let xi0 = [0.37, -0.62];
        let x = geom.map(xi0);
        let (xi, res) = geom.inverse_map(x, [0.0, 0.0], 20, 1e-14);
        assert!(res < 1e-12);
        assert!((xi[0] - xi0[0]).abs() < 1e-12 && (xi[1] - xi0[1]).abs() < 1e-12);
    }
}
