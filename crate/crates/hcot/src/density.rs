//! Transport densities, displacement interpolation and their L^p bounds.
//!
//! The transport density of a plan spreads the coupled mass `γ_ij d_ij`
//! uniformly in time along the selected geodesics (midpoint quadrature in
//! `t`, histogram deposit on a box grid). The displacement interpolation
//! `μ_t` pushes the plan forward through the geodesic selection at time `t`.
//!
//! The quantitative estimates use the Jacobian of the contraction maps: for
//! `μ` with an L^p density and finitely atomic `ν`, the interpolants obey
//! `‖μ_t‖_p ≤ (1−t)^{−(2n+3)/p'} ‖μ‖_p`, and two-sided variants with the
//! `2^{(2n+3)/p'} max(‖μ‖_p, ‖ν‖_p)` envelope. Norms of `μ_t` are estimated
//! by Monte Carlo through the change-of-variables formula
//! `ρ_t = ρ(T_t^{-1}) / det 𝒥`, with a deterministic value-binned histogram
//! on a refined image grid kept alongside for inspection.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{jacobian_det, select_point, solve_geodesic};
use crate::hgroup::{GroupPoint, ModelDims};
use crate::otcore::{solve_secondary, DiscreteMeasure, TransportPlan};

/// Axis-aligned box grid specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != shape.len() || lo.is_empty() {
            return Err(Error::InvalidParameter("inconsistent grid axes".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter("empty grid box".into()));
        }
        if shape.iter().any(|s| *s == 0) {
            return Err(Error::InvalidParameter("zero cells along an axis".into()));
        }
        Ok(GridSpec { lo, hi, shape })
    }

    pub fn ndim(&self) -> usize {
        self.lo.len()
    }

    pub fn num_cells(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(&self.shape)
            .map(|((a, b), s)| (b - a) / *s as f64)
            .product()
    }

    /// Linear index of the cell containing `x`, or `None` outside the box.
    /// Points exactly on the upper face are assigned to the last cell.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0usize;
        for k in 0..self.ndim() {
            let width = (self.hi[k] - self.lo[k]) / self.shape[k] as f64;
            if x[k] < self.lo[k] || x[k] > self.hi[k] {
                return None;
            }
            let mut c = ((x[k] - self.lo[k]) / width) as usize;
            if c >= self.shape[k] {
                c = self.shape[k] - 1;
            }
            idx = idx * self.shape[k] + c;
        }
        Some(idx)
    }

    pub fn cell_center(&self, mut idx: usize) -> Vec<f64> {
        let nd = self.ndim();
        let mut multi = vec![0usize; nd];
        for k in (0..nd).rev() {
            multi[k] = idx % self.shape[k];
            idx /= self.shape[k];
        }
        (0..nd)
            .map(|k| {
                let width = (self.hi[k] - self.lo[k]) / self.shape[k] as f64;
                self.lo[k] + (multi[k] as f64 + 0.5) * width
            })
            .collect()
    }

    /// Same box with every axis split `factor` times as finely.
    pub fn refined(&self, factor: usize) -> GridSpec {
        GridSpec {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            shape: self.shape.iter().map(|s| s * factor).collect(),
        }
    }
}

/// Scalar density on a box grid with respect to Lebesgue measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(spec: GridSpec) -> Self {
        let n = spec.num_cells();
        GridField {
            spec,
            values: vec![0.0; n],
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    /// Normalized indicator of a Euclidean coordinate ball, i.e. the uniform
    /// probability density on the cells whose centers fall in the ball.
    pub fn normalized_ball(spec: GridSpec, center: &[f64], radius: f64) -> Result<Self> {
        if center.len() != spec.ndim() {
            return Err(Error::DimensionMismatch {
                expected: spec.ndim(),
                got: center.len(),
            });
        }
        let mut field = GridField::zeros(spec);
        for idx in 0..field.spec.num_cells() {
            let c = field.spec.cell_center(idx);
            let d2: f64 = c
                .iter()
                .zip(center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2 <= radius * radius {
                field.values[idx] = 1.0;
            }
        }
        let mass = field.total_mass();
        if mass <= 0.0 {
            return Err(Error::InvalidParameter(
                "ball does not cover any cell center".into(),
            ));
        }
        for v in &mut field.values {
            *v /= mass;
        }
        Ok(field)
    }

    /// Writes the nonzero cells as `index,value` CSV rows.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> Result<()> {
        writeln!(w, "index,value")?;
        for (i, v) in self.values.iter().enumerate() {
            if *v != 0.0 {
                writeln!(w, "{i},{v}")?;
            }
        }
        Ok(())
    }
}

/// An L^p norm measurement on a given grid resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpReport {
    pub p: f64,
    pub norm: f64,
    pub resolution: Vec<usize>,
}

/// `(Σ |v|^p vol)^{1/p}`, or the essential sup for `p = ∞`.
pub fn lp_norm(field: &GridField, p: f64) -> Result<LpReport> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} below 1")));
    }
    let norm = if p.is_infinite() {
        field.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    } else {
        let vol = field.spec.cell_volume();
        field
            .values
            .iter()
            .map(|v| v.abs().powf(p) * vol)
            .sum::<f64>()
            .powf(1.0 / p)
    };
    Ok(LpReport {
        p,
        norm,
        resolution: field.spec.shape.clone(),
    })
}

/// Displacement interpolation `μ_t = (S_t)_# γ` of a plan between discrete
/// measures; coincident image atoms are merged.
pub fn interpolate(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &TransportPlan,
    t: f64,
) -> Result<DiscreteMeasure> {
    plan.validate(mu, nu)?;
    let mut order: Vec<(GroupPoint, f64)> = Vec::new();
    let mut seen: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
    for (i, j) in plan.support() {
        let w = plan.gamma[(i, j)];
        let point = if mu.points()[i] == nu.points()[j] {
            mu.points()[i].clone()
        } else {
            select_point(&mu.points()[i], &nu.points()[j], t)?
        };
        let key: Vec<u64> = point.coords().iter().map(|c| c.to_bits()).collect();
        match seen.entry(key) {
            std::collections::hash_map::Entry::Occupied(e) => order[*e.get()].1 += w,
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(order.len());
                order.push((point, w));
            }
        }
    }
    let (points, weights): (Vec<_>, Vec<_>) = order.into_iter().unzip();
    DiscreteMeasure::new(points, weights)
}

/// Transport density of a plan: each coupled mass `γ_ij` deposits
/// `γ_ij d_ij` along its geodesic by midpoint quadrature with `steps`
/// samples, binned on the grid and normalized by cell volume.
///
/// Errors when any sampled geodesic point leaves the grid box.
pub fn transport_density(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &TransportPlan,
    spec: &GridSpec,
    steps: usize,
) -> Result<GridField> {
    plan.validate(mu, nu)?;
    if steps == 0 {
        return Err(Error::InvalidParameter("quadrature needs steps >= 1".into()));
    }
    if spec.ndim() != mu.dims().dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dims().dim(),
            got: spec.ndim(),
        });
    }
    let mut field = GridField::zeros(spec.clone());
    for (i, j) in plan.support() {
        let (x, y) = (&mu.points()[i], &nu.points()[j]);
        if x == y {
            continue; // zero length, zero deposit
        }
        let solved = solve_geodesic(x, y)?;
        let d = solved.params.speed();
        let mass = plan.gamma[(i, j)] * d / steps as f64;
        for k in 0..steps {
            let t = (k as f64 + 0.5) / steps as f64;
            let p = crate::geodesy::geodesic_point(&solved.params, t)?;
            let cell = spec
                .cell_of(p.coords())
                .ok_or_else(|| Error::OutOfBox(p.coords().to_vec()))?;
            field.values[cell] += mass;
        }
    }
    let vol = spec.cell_volume();
    for v in &mut field.values {
        *v /= vol;
    }
    Ok(field)
}

/// Bounding box of all geodesics of a plan, padded by `pad` on each side;
/// convenience for choosing a grid that contains every deposit.
pub fn plan_bounding_box(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &TransportPlan,
    probe_steps: usize,
    pad: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = mu.dims().dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut absorb = |coords: &[f64]| {
        for k in 0..d {
            lo[k] = lo[k].min(coords[k]);
            hi[k] = hi[k].max(coords[k]);
        }
    };
    for (i, j) in plan.support() {
        let (x, y) = (&mu.points()[i], &nu.points()[j]);
        absorb(x.coords());
        absorb(y.coords());
        if x == y {
            continue;
        }
        let solved = solve_geodesic(x, y)?;
        for k in 1..probe_steps {
            let t = k as f64 / probe_steps as f64;
            let p = crate::geodesy::geodesic_point(&solved.params, t)?;
            absorb(p.coords());
        }
    }
    for k in 0..d {
        lo[k] -= pad;
        hi[k] += pad;
    }
    Ok((lo, hi))
}

/// Converts a grid density into the discrete measure of its cell masses
/// placed at cell centers (cells with zero mass are dropped).
pub fn field_to_atoms(field: &GridField) -> Result<DiscreteMeasure> {
    let vol = field.spec.cell_volume();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (idx, v) in field.values.iter().enumerate() {
        if *v > 0.0 {
            points.push(GroupPoint::new(field.spec.cell_center(idx))?);
            weights.push(v * vol);
        }
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidMeasure(format!(
            "field mass {total} is not 1"
        )));
    }
    // Absorb the fp drift so the discrete measure is exactly normalized.
    let drift = 1.0 - total;
    if let Some(w) = weights.last_mut() {
        *w += drift;
    }
    DiscreteMeasure::new(points, weights)
}

/// Report of an interpolation-norm experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub t: f64,
    pub p: f64,
    pub samples: u64,
    pub singular_skips: u64,
    /// Monte Carlo estimate of `‖μ_t‖_p` via the change-of-variables values
    /// (`E[ρ_t^{p−1}]^{1/p}` over μ_t samples) and its standard error.
    pub norm_mc: f64,
    pub se_mc: f64,
    /// L^p norm of the value-binned histogram of `ρ_t` on the refined image
    /// grid (deterministic given the seed).
    pub norm_hist: f64,
    /// The bound being tested.
    pub rhs: f64,
    /// `norm_mc / rhs`.
    pub ratio: f64,
    /// `norm_mc ≤ rhs (1 + tol)`.
    pub holds: bool,
}

struct CellSampler {
    cells: Vec<usize>,
    cumulative: Vec<f64>,
}

impl CellSampler {
    fn new(field: &GridField) -> Result<Self> {
        let vol = field.spec.cell_volume();
        let mut cells = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (idx, v) in field.values.iter().enumerate() {
            if *v > 0.0 {
                acc += v * vol;
                cells.push(idx);
                cumulative.push(acc);
            }
        }
        if cells.is_empty() {
            return Err(Error::InvalidMeasure("field carries no mass".into()));
        }
        Ok(CellSampler { cells, cumulative })
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u: f64 = rng.gen_range(0.0..total);
        let pos = self.cumulative.partition_point(|c| *c < u);
        self.cells[pos.min(self.cells.len() - 1)]
    }
}

fn uniform_point_in_cell(spec: &GridSpec, idx: usize, rng: &mut impl Rng) -> Vec<f64> {
    let center = spec.cell_center(idx);
    center
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let width = (spec.hi[k] - spec.lo[k]) / spec.shape[k] as f64;
            c + width * (rng.gen_range(0.0..1.0) - 0.5)
        })
        .collect()
}

/// Core Monte Carlo engine shared by the one- and two-sided bound checks:
/// samples `x ~ μ`, routes it to a target atom through the plan, pushes it to
/// `S_t(x, y)` and evaluates `ρ_t = ρ(x)/det 𝒥`.
fn interpolant_norm_mc(
    mu: &GridField,
    targets: &DiscreteMeasure,
    plan: &TransportPlan,
    mu_atoms: &DiscreteMeasure,
    t: f64,
    p: f64,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64, f64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = CellSampler::new(mu)?;
    // Map grid cells to plan rows.
    let mut cell_to_row = std::collections::HashMap::new();
    for (row, point) in mu_atoms.points().iter().enumerate() {
        let idx = mu
            .spec
            .cell_of(point.coords())
            .ok_or_else(|| Error::OutOfBox(point.coords().to_vec()))?;
        cell_to_row.insert(idx, row);
    }

    let mut sum_pow = 0.0;
    let mut sum_pow_sq = 0.0;
    let mut skips = 0u64;
    let mut pushed: Vec<(Vec<f64>, f64)> = Vec::with_capacity(samples as usize);
    for _ in 0..samples {
        let cell = sampler.sample(&mut rng);
        let coords = uniform_point_in_cell(&mu.spec, cell, &mut rng);
        let x = GroupPoint::new(coords)?;
        let row = *cell_to_row
            .get(&cell)
            .ok_or_else(|| Error::Numerical("sampled cell missing from the plan".into()))?;
        // Route through the conditional plan of the row.
        let row_mass = mu_atoms.weights()[row];
        let u: f64 = rng.gen_range(0.0..row_mass);
        let mut acc = 0.0;
        let mut target = targets.len() - 1;
        for j in 0..targets.len() {
            acc += plan.gamma[(row, j)];
            if u < acc {
                target = j;
                break;
            }
        }
        let y = &targets.points()[target];
        // Density of the sampled branch: the conditional routing fraction
        // scales the cell density before the change of variables.
        let rho = mu.values[cell] * plan.gamma[(row, target)] / row_mass;
        match jacobian_det(&x, y, t) {
            Ok(det) => {
                let rho_t = rho / det;
                let z = select_point(&x, y, t)?;
                pushed.push((z.coords().to_vec(), rho_t));
                let val = rho_t.powf(p - 1.0);
                sum_pow += val;
                sum_pow_sq += val * val;
            }
            Err(Error::SingularConfiguration(_)) => skips += 1,
            Err(e) => return Err(e),
        }
    }
    let ns = (samples - skips) as f64;
    if ns < 1.0 {
        return Err(Error::Numerical("all samples fell on the singular set".into()));
    }
    let mean = sum_pow / ns;
    let var = (sum_pow_sq / ns - mean * mean).max(0.0);
    let se_mean = (var / ns).sqrt();
    let norm_mc = mean.powf(1.0 / p);
    // Delta method: d(m^{1/p})/dm = m^{1/p−1}/p.
    let se_mc = if mean > 0.0 {
        se_mean * mean.powf(1.0 / p - 1.0) / p
    } else {
        0.0
    };

    // Deterministic mass histogram of the pushed samples on the refined
    // image grid (the image lattice split twice as finely, grown to the
    // sample hull).
    let mut lo = mu.spec.lo.clone();
    let mut hi = mu.spec.hi.clone();
    for (coords, _) in &pushed {
        for k in 0..lo.len() {
            lo[k] = lo[k].min(coords[k]);
            hi[k] = hi[k].max(coords[k]);
        }
    }
    for k in 0..lo.len() {
        let pad = 1e-9 * (1.0 + hi[k].abs() + lo[k].abs());
        lo[k] -= pad;
        hi[k] += pad;
    }
    let image_spec = GridSpec::new(lo, hi, mu.spec.shape.iter().map(|s| s * 2).collect())?;
    let mut hist = GridField::zeros(image_spec);
    let sample_mass = 1.0 / pushed.len() as f64;
    let vol = hist.spec.cell_volume();
    for (coords, _) in &pushed {
        if let Some(cell) = hist.spec.cell_of(coords) {
            hist.values[cell] += sample_mass / vol;
        }
    }
    let norm_hist = lp_norm(&hist, p)?.norm;
    Ok((norm_mc, se_mc, norm_hist, skips))
}

/// Checks the one-sided interpolation bound
/// `‖μ_t‖_p ≤ (1−t)^{−(2n+3)/p'} ‖μ‖_p (1+tol)` for a grid density `μ` and
/// finitely atomic `ν`, routing the Monte Carlo samples through the
/// lexicographic (secondary) optimal plan.
pub fn interpolation_bound_check(
    mu: &GridField,
    nu_atoms: &DiscreteMeasure,
    t: f64,
    p: f64,
    samples: u64,
    seed: u64,
    tol: f64,
) -> Result<BoundReport> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("t = {t} outside (0,1)")));
    }
    if !(p > 1.0) || p.is_infinite() {
        return Err(Error::InvalidParameter(format!("p = {p} outside (1, inf)")));
    }
    let dims = nu_atoms.dims();
    let mu_atoms = field_to_atoms(mu)?;
    let plan = solve_secondary(&mu_atoms, nu_atoms)?;
    let (norm_mc, se_mc, norm_hist, skips) = interpolant_norm_mc(
        mu, nu_atoms, &plan, &mu_atoms, t, p, samples, seed,
    )?;
    let p_conj = p / (p - 1.0);
    let mu_norm = lp_norm(mu, p)?.norm;
    let rhs = (1.0 - t).powf(-(dims.contraction_exp() as f64) / p_conj) * mu_norm;
    Ok(BoundReport {
        t,
        p,
        samples,
        singular_skips: skips,
        norm_mc,
        se_mc,
        norm_hist,
        rhs,
        ratio: norm_mc / rhs,
        holds: norm_mc <= rhs * (1.0 + tol),
    })
}

/// Checks the uniform two-sided bound
/// `‖μ_t‖_p ≤ 2^{(2n+3)/p'} max(‖μ‖_p, ‖ν‖_p)` within `3σ` when both
/// marginals are grid densities (the target is discretized to its cell
/// atoms, mirroring the atomic-approximation construction).
pub fn two_sided_bound_check(
    mu: &GridField,
    nu: &GridField,
    t: f64,
    p: f64,
    samples: u64,
    seed: u64,
) -> Result<BoundReport> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("t = {t} outside (0,1)")));
    }
    if !(p > 1.0) || p.is_infinite() {
        return Err(Error::InvalidParameter(format!("p = {p} outside (1, inf)")));
    }
    let mu_atoms = field_to_atoms(mu)?;
    let nu_atoms = field_to_atoms(nu)?;
    let dims = mu_atoms.dims();
    let plan = solve_secondary(&mu_atoms, &nu_atoms)?;
    let (norm_mc, se_mc, norm_hist, skips) = interpolant_norm_mc(
        mu, &nu_atoms, &plan, &mu_atoms, t, p, samples, seed,
    )?;
    let p_conj = p / (p - 1.0);
    let mu_norm = lp_norm(mu, p)?.norm;
    let nu_norm = lp_norm(nu, p)?.norm;
    let rhs = 2.0f64.powf(dims.contraction_exp() as f64 / p_conj) * mu_norm.max(nu_norm);
    Ok(BoundReport {
        t,
        p,
        samples,
        singular_skips: skips,
        norm_mc,
        se_mc,
        norm_hist,
        rhs,
        ratio: norm_mc / rhs,
        holds: norm_mc <= rhs + 3.0 * se_mc,
    })
}

/// Interpolation exponent `s₀(p₁, p₂, 2n+3) = p₂ k (p₁−1) / (k (p₁−1) − (p₁−p₂))`
/// with `k = 2n+3`; requires `p₁ > p₂ ≥ 1`.
pub fn s0_exponent(p1: f64, p2: f64, n: usize) -> Result<f64> {
    if !(p1 > p2 && p2 >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need p1 > p2 >= 1, got ({p1}, {p2})"
        )));
    }
    let k = (2 * n + 3) as f64;
    Ok(p2 * k * (p1 - 1.0) / (k * (p1 - 1.0) - (p1 - p2)))
}

/// Exact-rational version of [`s0_exponent`]. The denominator equals
/// `(2n+2)(p₁−1) + (p₂−1)`, which is positive under the precondition.
pub fn s0_exponent_rational(p1: &BigRational, p2: &BigRational, n: usize) -> Result<BigRational> {
    let one = BigRational::one();
    if !(p1 > p2 && *p2 >= one) {
        return Err(Error::InvalidParameter(format!(
            "need p1 > p2 >= 1, got ({p1}, {p2})"
        )));
    }
    let k = BigRational::from_integer(BigInt::from(2 * n as i64 + 3));
    let num = p2 * &k * (p1 - &one);
    let den = &k * (p1 - &one) - (p1 - p2);
    if den.is_zero() {
        return Err(Error::Numerical("zero denominator in s0".into()));
    }
    Ok(num / den)
}

/// Outcome for one grid point of the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p1: String,
    pub p2: String,
    pub s0: String,
    pub meets_precondition: bool,
    pub equality: bool,
    pub violation: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub n: usize,
    pub threshold: String,
    pub checked: usize,
    pub equalities: usize,
    pub violations: usize,
    pub all_pass: bool,
    pub points: Vec<SweepPoint>,
}

/// Lower-bound threshold `(2n+3)/(2n+2)`.
pub fn s0_threshold(n: usize) -> BigRational {
    BigRational::new(BigInt::from(2 * n as i64 + 3), BigInt::from(2 * n as i64 + 2))
}

/// Verifies `s₀ ≥ (2n+3)/(2n+2)` in exact rational arithmetic on the given
/// `(p₁, p₂)` points, recording equality cases (`p₂ = 1` or
/// `(2n+2)(p₁−1) = 1`) and violations (possible only when the sweep
/// precondition `p₁ ≥ (2n+3)/(2n+2)` is dropped).
pub fn s0_lower_bound_sweep(n: usize, grid: &[(BigRational, BigRational)]) -> Result<SweepReport> {
    let threshold = s0_threshold(n);
    let mut points = Vec::with_capacity(grid.len());
    let mut equalities = 0;
    let mut violations = 0;
    for (p1, p2) in grid {
        let s0 = s0_exponent_rational(p1, p2, n)?;
        let meets = *p1 >= threshold;
        let equality = s0 == threshold;
        let violation = s0 < threshold;
        if equality {
            equalities += 1;
        }
        if violation {
            violations += 1;
        }
        points.push(SweepPoint {
            p1: p1.to_string(),
            p2: p2.to_string(),
            s0: s0.to_string(),
            meets_precondition: meets,
            equality,
            violation,
        });
    }
    Ok(SweepReport {
        n,
        threshold: threshold.to_string(),
        checked: grid.len(),
        equalities,
        violations,
        all_pass: violations == 0,
        points,
    })
}

/// Default sweep grid: `count` values of `p₁` strictly above the threshold up
/// to 3, each paired with `count` values of `p₂` from 1 (inclusive) toward
/// `p₁` (exclusive).
pub fn default_sweep_grid(n: usize, count: usize) -> Vec<(BigRational, BigRational)> {
    let threshold = s0_threshold(n);
    let three = BigRational::from_integer(BigInt::from(3));
    let count_big = BigRational::from_integer(BigInt::from(count as i64));
    let one = BigRational::one();
    let mut grid = Vec::with_capacity(count * count);
    for k in 1..=count {
        let kr = BigRational::from_integer(BigInt::from(k as i64));
        let p1 = &threshold + (&three - &threshold) * &kr / &count_big;
        for l in 0..count {
            let lr = BigRational::from_integer(BigInt::from(l as i64));
            let p2 = &one + (&p1 - &one) * &lr / &count_big;
            grid.push((p1.clone(), p2));
        }
    }
    grid
}
