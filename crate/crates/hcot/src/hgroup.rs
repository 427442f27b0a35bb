//! Exact arithmetic of the Heisenberg group ℍⁿ in canonical coordinates of
//! the first kind.
//!
//! A point is a vector `(x_1, …, x_{2n+1})`; the first `2n` entries span the
//! horizontal layer, the last entry is the vertical (center) coordinate. The
//! group law comes from the Baker-Campbell-Hausdorff formula for the step-2
//! algebra with `[X_j, X_{n+j}] = X_{2n+1}`:
//!
//! ```text
//! (x · y)_k      = x_k + y_k                       k = 1..2n
//! (x · y)_{2n+1} = x_{2n+1} + y_{2n+1} + ½ Σ_j (x_j y_{n+j} − x_{n+j} y_j)
//! ```
//!
//! Dilations scale the horizontal layer linearly and the vertical coordinate
//! quadratically, so the homogeneous dimension is `N = 2n + 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensional bookkeeping for ℍⁿ with runtime `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Step-2 index `n ≥ 1`.
    pub n: usize,
}

impl ModelDims {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        Ok(ModelDims { n })
    }

    /// Topological dimension `2n + 1`.
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    /// Number of horizontal directions `2n`.
    pub fn horizontal_dim(&self) -> usize {
        2 * self.n
    }

    /// Homogeneous dimension `N = 2n + 2`.
    pub fn homog_dim(&self) -> usize {
        2 * self.n + 2
    }

    /// Sharp contraction exponent `2n + 3 = N + 1`.
    pub fn contraction_exp(&self) -> usize {
        2 * self.n + 3
    }
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims { n: 1 }
    }
}

/// A point of ℍⁿ, stored as its `2n+1` canonical coordinates.
///
/// Serializes as a plain JSON array of numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupPoint {
    coords: Vec<f64>,
}

impl GroupPoint {
    /// Builds a point from coordinates; the length must be odd (`2n+1`) and
    /// every entry finite.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 3 || coords.len() % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "coordinate vector of length {} is not 2n+1",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite coordinate in group point".into(),
            ));
        }
        Ok(GroupPoint { coords })
    }

    /// The identity element (origin) of ℍⁿ.
    pub fn identity(dims: ModelDims) -> Self {
        GroupPoint {
            coords: vec![0.0; dims.dim()],
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            n: (self.coords.len() - 1) / 2,
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Vertical (center) coordinate `x_{2n+1}`.
    pub fn vertical(&self) -> f64 {
        *self.coords.last().unwrap()
    }

    /// Horizontal coordinates `(x_1, …, x_{2n})`.
    pub fn horizontal(&self) -> &[f64] {
        &self.coords[..self.coords.len() - 1]
    }

    fn check_same_dims(&self, other: &GroupPoint) -> Result<()> {
        if self.coords.len() != other.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coords.len(),
                got: other.coords.len(),
            });
        }
        Ok(())
    }

    /// Group composition `self · other` via the BCH formula.
    pub fn compose(&self, other: &GroupPoint) -> Result<GroupPoint> {
        self.check_same_dims(other)?;
        let n = self.dims().n;
        let d = self.coords.len();
        let mut out = vec![0.0; d];
        for k in 0..2 * n {
            out[k] = self.coords[k] + other.coords[k];
        }
        let mut twist = 0.0;
        for j in 0..n {
            twist += self.coords[j] * other.coords[n + j] - self.coords[n + j] * other.coords[j];
        }
        out[d - 1] = self.coords[d - 1] + other.coords[d - 1] + 0.5 * twist;
        Ok(GroupPoint { coords: out })
    }

    /// Group inverse; in exponential coordinates of the first kind this is
    /// plain negation.
    pub fn inverse(&self) -> GroupPoint {
        GroupPoint {
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }

    /// Non-isotropic dilation `δ_λ`, `λ > 0`.
    pub fn dilate(&self, lambda: f64) -> Result<GroupPoint> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dilation factor must be positive and finite, got {lambda}"
            )));
        }
        let d = self.coords.len();
        let mut out: Vec<f64> = self.coords.iter().map(|c| lambda * c).collect();
        out[d - 1] = lambda * lambda * self.coords[d - 1];
        Ok(GroupPoint { coords: out })
    }

    /// Difference `self⁻¹ · other`, the displacement seen from `self`.
    pub fn delta_to(&self, other: &GroupPoint) -> Result<GroupPoint> {
        self.inverse().compose(other)
    }
}

/// A horizontal tangent vector expressed in the left-invariant frame
/// `X_1, …, X_{2n}` (which is orthonormal by convention).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HorizontalVector {
    pub h: Vec<f64>,
}

impl HorizontalVector {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() || h.len() % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "horizontal vector of length {} is not 2n",
                h.len()
            )));
        }
        if h.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite entry in horizontal vector".into(),
            ));
        }
        Ok(HorizontalVector { h })
    }

    /// Euclidean norm of the frame coefficients, i.e. `|·|_H`.
    pub fn norm(&self) -> f64 {
        self.h.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// The horizontal frame at `q` as a `(2n) × (2n+1)` matrix whose row `j` is
/// `X_j(q)` in coordinates:
///
/// ```text
/// X_j     = ∂_j     − (x_{n+j}/2) ∂_{2n+1}
/// X_{n+j} = ∂_{n+j} + (x_j/2)     ∂_{2n+1}
/// ```
pub fn frame_at(q: &GroupPoint) -> nalgebra::DMatrix<f64> {
    let n = q.dims().n;
    let d = q.coords().len();
    let mut m = nalgebra::DMatrix::zeros(2 * n, d);
    for j in 0..n {
        m[(j, j)] = 1.0;
        m[(j, d - 1)] = -q.coords()[n + j] / 2.0;
        m[(n + j, n + j)] = 1.0;
        m[(n + j, d - 1)] = q.coords()[j] / 2.0;
    }
    m
}

/// Flow of the constant-frame-coefficient horizontal field `Σ u_j X_j` for
/// time `t` starting at `q`. Because the field is left invariant this equals
/// the left translation of `exp(t Σ u_j X_j)(e)`.
pub fn horizontal_flow(q: &GroupPoint, u: &HorizontalVector, t: f64) -> Result<GroupPoint> {
    let n = q.dims().n;
    if u.h.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: u.h.len(),
        });
    }
    let mut step = vec![0.0; q.coords().len()];
    for (k, uk) in u.h.iter().enumerate() {
        step[k] = t * uk;
    }
    q.compose(&GroupPoint { coords: step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(coords: &[f64]) -> GroupPoint {
        GroupPoint::new(coords.to_vec()).unwrap()
    }

    fn random_point(rng: &mut impl Rng, dims: ModelDims) -> GroupPoint {
        let coords: Vec<f64> = (0..dims.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        GroupPoint::new(coords).unwrap()
    }

    #[test]
    fn dims_bookkeeping() {
        let d = ModelDims::new(1).unwrap();
        assert_eq!(d.dim(), 3);
        assert_eq!(d.homog_dim(), 4);
        assert_eq!(d.contraction_exp(), 5);
        let d = ModelDims::new(3).unwrap();
        assert_eq!(d.dim(), 7);
        assert_eq!(d.homog_dim(), 8);
        assert_eq!(d.contraction_exp(), 9);
        assert!(ModelDims::new(0).is_err());
    }

    #[test]
    fn identity_composes_trivially() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dims = ModelDims::default();
        let e = GroupPoint::identity(dims);
        for _ in 0..10 {
            let x = random_point(&mut rng, dims);
            assert_eq!(e.compose(&x).unwrap(), x);
            assert_eq!(x.compose(&e).unwrap(), x);
        }
    }

    #[test]
    fn printed_group_law_example() {
        // (1,0,0)·(0,1,0) = (1,1,1/2); cross-checked against an independent
        // BCH evaluation: z = ½(x₁y₂ − x₂y₁) = ½.
        let a = pt(&[1.0, 0.0, 0.0]);
        let b = pt(&[0.0, 1.0, 0.0]);
        let c = a.compose(&b).unwrap();
        assert_eq!(c.coords(), &[1.0, 1.0, 0.5]);
        // Independent evaluation of the BCH correction ½[x, y] for step-2:
        let bch_z = 0.5 * (1.0 * 1.0 - 0.0 * 0.0);
        assert_eq!(c.vertical(), bch_z);
    }

    #[test]
    fn associativity_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &n in &[1usize, 2] {
            let dims = ModelDims::new(n).unwrap();
            for _ in 0..1000 {
                let x = random_point(&mut rng, dims);
                let y = random_point(&mut rng, dims);
                let z = random_point(&mut rng, dims);
                let left = x.compose(&y).unwrap().compose(&z).unwrap();
                let right = x.compose(&y.compose(&z).unwrap()).unwrap();
                for (l, r) in left.coords().iter().zip(right.coords()) {
                    assert_abs_diff_eq!(l, r, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn inverse_is_negation_and_cancels() {
        let a = pt(&[1.0, 2.0, 3.0]);
        assert_eq!(a.inverse().coords(), &[-1.0, -2.0, -3.0]);
        let dims = ModelDims::default();
        let e = GroupPoint::identity(dims);
        assert_eq!(e.inverse(), e);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = random_point(&mut rng, dims);
            let lhs = x.inverse().compose(&x).unwrap();
            let rhs = x.compose(&x.inverse()).unwrap();
            for c in lhs.coords().iter().chain(rhs.coords()) {
                assert_abs_diff_eq!(*c, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dilation_formula_and_identity() {
        let a = pt(&[1.0, 1.0, 1.0]);
        assert_eq!(a.dilate(1.0).unwrap(), a);
        assert_eq!(a.dilate(2.0).unwrap().coords(), &[2.0, 2.0, 4.0]);
        assert!(a.dilate(0.0).is_err());
        assert!(a.dilate(-1.0).is_err());
    }

    #[test]
    fn dilations_are_automorphisms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dims = ModelDims::new(2).unwrap();
        for _ in 0..200 {
            let x = random_point(&mut rng, dims);
            let y = random_point(&mut rng, dims);
            let lam: f64 = rng.gen_range(0.1..3.0);
            let lhs = x.compose(&y).unwrap().dilate(lam).unwrap();
            let rhs = x.dilate(lam).unwrap().compose(&y.dilate(lam).unwrap()).unwrap();
            for (l, r) in lhs.coords().iter().zip(rhs.coords()) {
                assert_abs_diff_eq!(l, r, epsilon = 1e-12);
            }
            // δ_λ ∘ δ_μ = δ_{λμ}
            let mu: f64 = rng.gen_range(0.1..3.0);
            let a = x.dilate(lam).unwrap().dilate(mu).unwrap();
            let b = x.dilate(lam * mu).unwrap();
            for (l, r) in a.coords().iter().zip(b.coords()) {
                assert_abs_diff_eq!(l, r, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn frame_at_origin_and_off_origin() {
        let dims = ModelDims::default();
        let e = GroupPoint::identity(dims);
        let m = frame_at(&e);
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
        assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);

        let q = pt(&[1.0, 2.0, 0.0]);
        let m = frame_at(&q);
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, -1.0]);
        assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.5]);
    }

    /// RK4 integration of the frame field, used as an independent oracle for
    /// the closed-form flow.
    fn rk4_flow(q: &GroupPoint, u: &[f64], t_end: f64, steps: usize) -> GroupPoint {
        let d = q.coords().len();
        let deriv = |y: &[f64]| -> Vec<f64> {
            let p = GroupPoint::new(y.to_vec()).unwrap();
            let frame = frame_at(&p);
            let mut dy = vec![0.0; d];
            for (j, uj) in u.iter().enumerate() {
                for k in 0..d {
                    dy[k] += uj * frame[(j, k)];
                }
            }
            dy
        };
        let mut y: Vec<f64> = q.coords().to_vec();
        let h = t_end / steps as f64;
        for _ in 0..steps {
            let k1 = deriv(&y);
            let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
            let k2 = deriv(&y2);
            let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
            let k3 = deriv(&y3);
            let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
            let k4 = deriv(&y4);
            for k in 0..d {
                y[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
            }
        }
        GroupPoint::new(y).unwrap()
    }

    #[test]
    fn flow_of_x1_is_left_translation() {
        let q = pt(&[0.3, -0.7, 0.2]);
        let t = 0.8;
        let closed = q
            .compose(&pt(&[t, 0.0, 0.0]))
            .unwrap();
        let u = HorizontalVector::new(vec![1.0, 0.0]).unwrap();
        let flowed = horizontal_flow(&q, &u, t).unwrap();
        for (a, b) in closed.coords().iter().zip(flowed.coords()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let integrated = rk4_flow(&q, &[1.0, 0.0], t, 1000);
        for (a, b) in closed.coords().iter().zip(integrated.coords()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn bracket_relation_via_commutator_of_flows() {
        // Flowing X_j, X_{n+j}, −X_j, −X_{n+j} for time h displaces by
        // exactly h² along the center (step-2: no higher corrections).
        let dims = ModelDims::default();
        let e = GroupPoint::identity(dims);
        for &h in &[0.1, 0.01, 0.001] {
            let ex = HorizontalVector::new(vec![1.0, 0.0]).unwrap();
            let ey = HorizontalVector::new(vec![0.0, 1.0]).unwrap();
            let p = horizontal_flow(&e, &ex, h).unwrap();
            let p = horizontal_flow(&p, &ey, h).unwrap();
            let p = horizontal_flow(&p, &ex, -h).unwrap();
            let p = horizontal_flow(&p, &ey, -h).unwrap();
            assert_abs_diff_eq!(p.coords()[0], 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(p.coords()[1], 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(p.vertical(), h * h, epsilon = 1e-15 * (1.0 + h * h));
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = pt(&[1.0, 0.0, 0.0]);
        let b = pt(&[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            a.compose(&b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn points_serialize_as_arrays() {
        let a = pt(&[1.0, 2.0, 0.5]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[1.0,2.0,0.5]");
        let back: GroupPoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
    }
}
