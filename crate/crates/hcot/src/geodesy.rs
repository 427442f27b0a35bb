//! Minimizing geodesics and the Carnot-Carathéodory distance on ℍⁿ.
//!
//! A geodesic through `base` is parametrized by a horizontal covector
//! `χ ∈ ℝ^{2n}` and a twist `θ ∈ [−2π, 2π]`. Writing the pairs
//! `(χ_j, χ_{n+j})` as complex numbers `c_j`, the displacement from the base
//! point in exponential coordinates is
//!
//! ```text
//! ζ_j(t) = c_j (e^{iθt} − 1)/(iθ)          (ζ_j(t) = t c_j for θ = 0)
//! z(t)   = |χ|² (θt − sin θt)/(2θ²)        (0 for θ = 0)
//! ```
//!
//! which solves the horizontal control system `σ̇ = Σ_j u_j(t) X_j(σ)` with
//! rotated controls `u(t) = c e^{iθt}`. The curve has constant horizontal
//! speed `|χ|`, so `|χ|` is the CC distance between the endpoints of the
//! unit-interval geodesic.
//!
//! Between two points with non-vanishing horizontal displacement the twist is
//! the unique root of the strictly monotone equation
//!
//! ```text
//! z_e / |ζ_e|² = (θ − sin θ) / (8 sin²(θ/2)),    θ ∈ (−2π, 2π),
//! ```
//!
//! solved by bracketed bisection plus Newton polish. Center pairs
//! (`x⁻¹·y = (0,…,0,z)`) have a one-parameter family of minimizers of common
//! length `√(4π|z|)`; we fix the canonical representative with χ along the
//! first horizontal axis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgroup::{GroupPoint, HorizontalVector};

const TAU: f64 = std::f64::consts::TAU;

/// Parameters of a minimizing geodesic on the unit interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicParams {
    pub base: GroupPoint,
    pub chi: HorizontalVector,
    pub theta: f64,
}

impl GeodesicParams {
    pub fn new(base: GroupPoint, chi: HorizontalVector, theta: f64) -> Result<Self> {
        if chi.h.len() != base.dims().horizontal_dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dims().horizontal_dim(),
                got: chi.h.len(),
            });
        }
        if !theta.is_finite() || theta.abs() > TAU {
            return Err(Error::InvalidParameter(format!(
                "twist {theta} outside [-2pi, 2pi]"
            )));
        }
        Ok(GeodesicParams { base, chi, theta })
    }

    /// Constant horizontal speed of the geodesic, equal to the CC length of
    /// its unit-interval arc.
    pub fn speed(&self) -> f64 {
        self.chi.norm()
    }
}

/// Output of [`solve_geodesic`]: the parameters plus a uniqueness flag which
/// is `false` exactly for center pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicSolveResult {
    pub params: GeodesicParams,
    pub unique: bool,
}

/// `φ − sin φ`, series-evaluated for small arguments to avoid cancellation.
fn phi_minus_sin(phi: f64) -> f64 {
    if phi.abs() > 0.8 {
        return phi - phi.sin();
    }
    // Σ_{k>=1} (−1)^{k+1} φ^{2k+1} / (2k+1)!
    let p2 = phi * phi;
    let mut term = phi * p2 / 6.0;
    let mut sum = term;
    let mut k = 1.0;
    while term.abs() > 1e-22 * sum.abs().max(1e-300) {
        term *= -p2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
        sum += term;
        k += 1.0;
    }
    sum
}

/// Twist function `f(θ) = (θ − sin θ)/(8 sin²(θ/2))`, strictly increasing on
/// `(−2π, 2π)` with `f(θ) = θ/12 + θ³/360 + O(θ⁵)` near the origin.
fn twist_ratio(theta: f64) -> f64 {
    if theta.abs() < 1e-9 {
        return theta / 12.0 + theta * theta * theta / 360.0;
    }
    let s = (theta / 2.0).sin();
    phi_minus_sin(theta) / (8.0 * s * s)
}

fn twist_ratio_deriv(theta: f64) -> f64 {
    if theta.abs() < 1e-6 {
        return 1.0 / 12.0 + theta * theta / 120.0;
    }
    let one_minus_cos = 2.0 * {
        let s = (theta / 2.0).sin();
        s * s
    };
    let num = one_minus_cos * one_minus_cos - phi_minus_sin(theta) * theta.sin();
    num / (4.0 * one_minus_cos * one_minus_cos)
}

/// Solves `twist_ratio(θ) = r` on `(−2π, 2π)` by bracketed bisection to width
/// 1e−3 followed by safeguarded Newton.
fn solve_twist(r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let sign = r.signum();
    let rho = r.abs();
    // Expand the bracket toward 2π until f(hi) >= rho.
    let mut lo = 0.0;
    let mut hi = TAU * (1.0 - 1e-3);
    let mut guard = 0;
    while twist_ratio(hi) < rho {
        lo = hi;
        hi = TAU - (TAU - hi) / 4.0;
        guard += 1;
        if guard > 200 {
            break;
        }
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if twist_ratio(mid) < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..80 {
        let f = twist_ratio(theta) - rho;
        if f > 0.0 {
            hi = theta;
        } else {
            lo = theta;
        }
        let step = f / twist_ratio_deriv(theta);
        let mut next = theta - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - theta).abs() <= 1e-16 * (1.0 + theta.abs()) {
            theta = next;
            break;
        }
        theta = next;
    }
    sign * theta
}

/// Evaluates the geodesic at `t ∈ [0, 1]`.
pub fn geodesic_point(params: &GeodesicParams, t: f64) -> Result<GroupPoint> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("time {t} outside [0, 1]")));
    }
    if params.theta.abs() > TAU {
        return Err(Error::InvalidParameter(format!(
            "twist {} outside [-2pi, 2pi]",
            params.theta
        )));
    }
    if t == 0.0 {
        return Ok(params.base.clone());
    }
    let n = params.base.dims().n;
    let theta = params.theta;
    let chi = &params.chi.h;
    let phi = theta * t;
    let (kr, ki) = if theta == 0.0 {
        (t, 0.0)
    } else {
        let s_half = (phi / 2.0).sin();
        (phi.sin() / theta, 2.0 * s_half * s_half / theta)
    };
    let mut step = vec![0.0; 2 * n + 1];
    for j in 0..n {
        let (cr, ci) = (chi[j], chi[n + j]);
        step[j] = cr * kr - ci * ki;
        step[n + j] = cr * ki + ci * kr;
    }
    if theta != 0.0 {
        let chi_sq: f64 = chi.iter().map(|c| c * c).sum();
        step[2 * n] = chi_sq * phi_minus_sin(phi) / (2.0 * theta * theta);
    }
    params.base.compose(&GroupPoint::new(step)?)
}

/// Solves for the minimizing geodesic from `x` to `y`.
///
/// For pairs with non-vanishing horizontal displacement the unique
/// `(χ, θ)` with `θ ∈ (−2π, 2π)` is recovered from the twist equation; for
/// center pairs the canonical first-axis selection is returned with
/// `unique = false`.
pub fn solve_geodesic(x: &GroupPoint, y: &GroupPoint) -> Result<GeodesicSolveResult> {
    if x == y {
        return Err(Error::IdenticalPoints);
    }
    let delta = x.delta_to(y)?;
    let n = x.dims().n;
    let w = delta.horizontal();
    let z = delta.vertical();
    let wnorm_sq: f64 = w.iter().map(|c| c * c).sum();

    if wnorm_sq == 0.0 {
        // Center pair: one minimizer per direction, all of length √(4π|z|).
        let theta = TAU * z.signum();
        let mut chi = vec![0.0; 2 * n];
        chi[0] = (4.0 * std::f64::consts::PI * z.abs()).sqrt();
        let params = GeodesicParams::new(x.clone(), HorizontalVector::new(chi)?, theta)?;
        return Ok(GeodesicSolveResult {
            params,
            unique: false,
        });
    }

    let theta = if z == 0.0 {
        0.0
    } else {
        solve_twist(z / wnorm_sq)
    };

    // Phase recovery: χ_c = ζ_e · (iθ)/(e^{iθ} − 1), i.e. division by the
    // chord factor k = sin(θ)/θ + i·2sin²(θ/2)/θ.
    let mut chi = vec![0.0; 2 * n];
    if theta == 0.0 {
        chi.copy_from_slice(w);
    } else {
        let s_half = (theta / 2.0).sin();
        let kr = theta.sin() / theta;
        let ki = 2.0 * s_half * s_half / theta;
        let knorm_sq = kr * kr + ki * ki;
        for j in 0..n {
            let (wr, wi) = (w[j], w[n + j]);
            chi[j] = (wr * kr + wi * ki) / knorm_sq;
            chi[n + j] = (wi * kr - wr * ki) / knorm_sq;
        }
    }
    let params = GeodesicParams::new(x.clone(), HorizontalVector::new(chi)?, theta)?;
    Ok(GeodesicSolveResult {
        params,
        unique: true,
    })
}

/// Carnot-Carathéodory distance between two points.
pub fn cc_distance(x: &GroupPoint, y: &GroupPoint) -> Result<f64> {
    if x == y {
        return Ok(0.0);
    }
    let delta = x.delta_to(y)?;
    let w = delta.horizontal();
    let z = delta.vertical();
    let wnorm_sq: f64 = w.iter().map(|c| c * c).sum();
    if wnorm_sq == 0.0 {
        return Ok((4.0 * std::f64::consts::PI * z.abs()).sqrt());
    }
    if z == 0.0 {
        return Ok(wnorm_sq.sqrt());
    }
    let theta = solve_twist(z / wnorm_sq);
    let s_half = (theta / 2.0).sin();
    Ok(wnorm_sq.sqrt() * (theta / (2.0 * s_half)).abs())
}

/// Canonical selection map `S_t(x, y)`: the point at CC distance
/// `t · d_CC(x, y)` from `x` on the selected geodesic. Endpoints are returned
/// exactly.
pub fn select_point(x: &GroupPoint, y: &GroupPoint, t: f64) -> Result<GroupPoint> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("time {t} outside [0, 1]")));
    }
    if x == y || t == 0.0 {
        return Ok(x.clone());
    }
    if t == 1.0 {
        return Ok(y.clone());
    }
    let solved = solve_geodesic(x, y)?;
    geodesic_point(&solved.params, t)
}

/// Central finite-difference determinant of the Jacobian of
/// `x ↦ S_t(x, ȳ)` at step `h = 1e−5 (1 + |x|)`.
///
/// The map is smooth only off the translated center `ȳ·L`; configurations
/// whose horizontal displacement is within two stencil widths of it are
/// rejected.
pub fn jacobian_det(x: &GroupPoint, ybar: &GroupPoint, t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("time {t} outside (0, 1)")));
    }
    let d = x.dims().dim();
    let xnorm = x.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
    let h = 1e-5 * (1.0 + xnorm);
    let delta = ybar.delta_to(x)?;
    let wnorm = delta
        .horizontal()
        .iter()
        .map(|c| c * c)
        .sum::<f64>()
        .sqrt();
    if wnorm <= 2.0 * h {
        return Err(Error::SingularConfiguration(format!(
            "point within {:.1e} of the translated center",
            2.0 * h
        )));
    }
    let mut jac = nalgebra::DMatrix::zeros(d, d);
    for k in 0..d {
        let mut plus = x.coords().to_vec();
        plus[k] += h;
        let mut minus = x.coords().to_vec();
        minus[k] -= h;
        let fp = select_point(&GroupPoint::new(plus)?, ybar, t)?;
        let fm = select_point(&GroupPoint::new(minus)?, ybar, t)?;
        for row in 0..d {
            jac[(row, k)] = (fp.coords()[row] - fm.coords()[row]) / (2.0 * h);
        }
    }
    Ok(jac.determinant())
}

/// A Euclidean coordinate ball used as the test set for the measure
/// contraction experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: GroupPoint,
    pub radius: f64,
}

/// Monte Carlo report for the measure contraction inequality
/// `ℒ(E) ≤ (1−t)^{−(2n+3)} ℒ(S_t(E, y))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McpReport {
    pub samples: u64,
    pub singular_skips: u64,
    /// Hit-or-miss estimate of `ℒ(E)` and its standard error.
    pub measure_set: f64,
    pub se_set: f64,
    /// Change-of-variables estimate of `ℒ(S_t(E, y))` and its standard error.
    pub measure_image: f64,
    pub se_image: f64,
    /// `(1−t)^{−(2n+3)}`.
    pub contraction_factor: f64,
    /// `ℒ(E) / ℒ(S_t(E, y))`, which tends to `1/det 𝒥` on shrinking sets.
    pub ratio: f64,
    /// Whether `ℒ(E) ≤ factor · ℒ(S_t(E,y))` holds within three combined
    /// standard errors.
    pub holds: bool,
}

/// Estimates both sides of the measure contraction inequality on `E` by
/// seeded Monte Carlo.
///
/// `ℒ(E)` is estimated hit-or-miss on the bounding box of the ball;
/// `ℒ(S_t(E, y))` by averaging the Jacobian determinant of the contraction
/// over the uniform samples in `E` (the map is injective off the singular
/// set, so the change of variables applies).
pub fn mcp_ratio(
    ball: &BallSpec,
    y: &GroupPoint,
    t: f64,
    samples: u64,
    seed: u64,
) -> Result<McpReport> {
    if !(ball.radius > 0.0) {
        return Err(Error::InvalidParameter("ball radius must be positive".into()));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("time {t} outside (0, 1)")));
    }
    if samples < 1000 {
        return Err(Error::InvalidParameter(
            "at least 1000 samples required".into(),
        ));
    }
    let dims = ball.center.dims();
    let d = dims.dim();
    let r = ball.radius;
    let vol_box = (2.0 * r).powi(d as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut n_in: u64 = 0;
    let mut skips: u64 = 0;
    let mut sum_det = 0.0;
    let mut sum_det_sq = 0.0;
    for _ in 0..samples {
        let coords: Vec<f64> = ball
            .center
            .coords()
            .iter()
            .map(|c| c + rng.gen_range(-r..r))
            .collect();
        let dist_sq: f64 = coords
            .iter()
            .zip(ball.center.coords())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if dist_sq > r * r {
            continue;
        }
        n_in += 1;
        let p = GroupPoint::new(coords)?;
        match jacobian_det(&p, y, t) {
            Ok(det) => {
                sum_det += det;
                sum_det_sq += det * det;
            }
            Err(Error::SingularConfiguration(_)) => skips += 1,
            Err(e) => return Err(e),
        }
    }
    let ns = samples as f64;
    let p_in = n_in as f64 / ns;
    let measure_set = vol_box * p_in;
    let se_set = vol_box * (p_in * (1.0 - p_in) / ns).sqrt();

    // Indicator-weighted determinant over box samples.
    let mean_det = sum_det / ns;
    let var_det = (sum_det_sq / ns - mean_det * mean_det).max(0.0);
    let measure_image = vol_box * mean_det;
    let se_image = vol_box * (var_det / ns).sqrt();

    let factor = (1.0 - t).powi(-(dims.contraction_exp() as i32));
    let se_comb = (se_set * se_set + factor * factor * se_image * se_image).sqrt();
    let holds = measure_set <= factor * measure_image + 3.0 * se_comb;
    Ok(McpReport {
        samples,
        singular_skips: skips,
        measure_set,
        se_set,
        measure_image,
        se_image,
        contraction_factor: factor,
        ratio: measure_set / measure_image,
        holds,
    })
}
