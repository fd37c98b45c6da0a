//! Rigid-body least-squares superposition.
//!
//! Coordinates are row vectors and a registration acts as `x R + t`, so a
//! [`Registration`] maps X into Y's frame.

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{AlignError, Result};
use crate::Coord;

const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Registration {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Registration {
    /// Checks that `rotation` is proper orthogonal within 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if ortho > ORTHO_TOL || (det - 1.0).abs() > ORTHO_TOL {
            return Err(AlignError::contract(format!(
                "rotation is not proper orthogonal (|R'R - I| = {ortho:e}, det = {det})"
            )));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(AlignError::contract("non-finite translation"));
        }
        Ok(Registration { rotation, translation })
    }

    pub fn identity() -> Self {
        Registration { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Registration { rotation: rt, translation: -(self.rotation * self.translation) }
    }

    #[inline]
    pub fn apply_point(&self, p: &Coord) -> Coord {
        let v = self.rotation.tr_mul(&Vector3::new(p[0], p[1], p[2])) + self.translation;
        [v[0], v[1], v[2]]
    }

    pub fn apply(&self, x: &[Coord]) -> Vec<Coord> {
        x.iter().map(|p| self.apply_point(p)).collect()
    }

    /// Roll, pitch and yaw (radians) of the rotation matrix.
    pub fn euler_angles(&self) -> [f64; 3] {
        let (r, p, y) = Rotation3::from_matrix_unchecked(self.rotation).euler_angles();
        [r, p, y]
    }
}

/// Least-squares proper rotation and translation of `xm` onto `ym`,
/// together with the squared partial Procrustes distance.
pub fn superpose(xm: &[Coord], ym: &[Coord]) -> Result<(Registration, f64)> {
    let k = xm.len();
    if ym.len() != k {
        return Err(AlignError::contract(format!("{} vs {} matched rows", k, ym.len())));
    }
    if k < 3 {
        return Err(AlignError::Degenerate(format!("{k} matched points; at least 3 required")));
    }
    let to_vec = |p: &Coord| Vector3::new(p[0], p[1], p[2]);
    if xm.iter().chain(ym).any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(AlignError::contract("non-finite coordinate"));
    }
    let inv = 1.0 / k as f64;
    let xbar = xm.iter().map(to_vec).sum::<Vector3<f64>>() * inv;
    let ybar = ym.iter().map(to_vec).sum::<Vector3<f64>>() * inv;

    let mut cov = Matrix3::zeros();
    for (p, q) in xm.iter().zip(ym) {
        cov += (to_vec(p) - xbar) * (to_vec(q) - ybar).transpose();
    }

    let svd = cov.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(AlignError::Degenerate("SVD did not converge".into())),
    };
    let s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    if s[order[0]] <= 0.0 || s[order[1]] <= 1e-10 * s[order[0]] {
        return Err(AlignError::Degenerate(
            "centred cross-covariance has rank below 2".into(),
        ));
    }
    let mut u = u;
    if (u * v_t).determinant() < 0.0 {
        let smallest = order[2];
        u.column_mut(smallest).neg_mut();
    }
    let rotation = u * v_t;
    let translation = ybar - rotation.tr_mul(&xbar);
    let reg = Registration { rotation, translation };

    let dp2 = xm
        .iter()
        .zip(ym)
        .map(|(p, q)| {
            let r = reg.apply_point(p);
            (r[0] - q[0]).powi(2) + (r[1] - q[1]).powi(2) + (r[2] - q[2]).powi(2)
        })
        .sum();
    Ok((reg, dp2))
}

pub fn procrustes_distance2(xm: &[Coord], ym: &[Coord]) -> Result<f64> {
    superpose(xm, ym).map(|(_, d)| d)
}

pub fn rmsd(xm: &[Coord], ym: &[Coord]) -> Result<f64> {
    Ok((procrustes_distance2(xm, ym)? / xm.len() as f64).sqrt())
}

/// Squared distance between `reg(x)` and `y`.
#[inline]
pub fn registered_distance2(reg: &Registration, x: &Coord, y: &Coord) -> f64 {
    let r = reg.apply_point(x);
    (r[0] - y[0]).powi(2) + (r[1] - y[1]).powi(2) + (r[2] - y[2]).powi(2)
}
