//! Radial Neumann ground state of the rescaled pair problem, the zero-energy
//! scattering length, and the asymptotic correlation profile.
//!
//! The 3D problem (-lap + (1/2) N^(3b-1) V(N^b .)) f = lambda f on the ball
//! |x| <= ell with f(ell) = 1, f'(ell) = 0 reduces exactly to the 1D
//! Sturm-Liouville problem u'' = (q - lambda) u for u = r f, u(0) = 0.

use crate::error::{CoreError, Result};
use serde::Serialize;
use std::f64::consts::PI;

/// Radial interaction profile r -> V(r), supported on r <= R.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum RadialProfile {
    /// V(r) = v0 for r <= R.
    SquareWell { v0: f64 },
    /// V(r) = v0 (1 - (r/R)^2) for r <= R.
    Parabolic { v0: f64 },
}

impl RadialProfile {
    fn amplitude(&self) -> f64 {
        match self {
            RadialProfile::SquareWell { v0 } | RadialProfile::Parabolic { v0 } => *v0,
        }
    }
}

/// A repulsive, compactly supported radial potential with cached b0 = int V.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PotentialSpec {
    pub profile: RadialProfile,
    pub support_radius: f64,
    pub b0: f64,
}

impl PotentialSpec {
    pub fn new(profile: RadialProfile, support_radius: f64) -> Result<Self> {
        let v0 = profile.amplitude();
        if !v0.is_finite() || v0 < 0.0 {
            return Err(CoreError::InvalidPotential(format!("amplitude must be finite and >= 0, got {v0}")));
        }
        if !support_radius.is_finite() || support_radius <= 0.0 {
            return Err(CoreError::InvalidPotential(format!(
                "support radius must be finite and positive, got {support_radius}"
            )));
        }
        let mut spec = PotentialSpec { profile, support_radius, b0: 0.0 };
        spec.b0 = integrate_b0(&spec)?;
        Ok(spec)
    }

    /// Pointwise value V(r); zero outside the support.
    pub fn eval(&self, r: f64) -> f64 {
        if r > self.support_radius {
            return 0.0;
        }
        match self.profile {
            RadialProfile::SquareWell { v0 } => v0,
            RadialProfile::Parabolic { v0 } => v0 * (1.0 - (r / self.support_radius).powi(2)),
        }
    }

    /// Branch-resolved value: uses the piece containing `witness`, so that a
    /// stage landing exactly on the support edge picks the correct side.
    pub fn eval_branch(&self, r: f64, witness: f64) -> f64 {
        if witness > self.support_radius {
            return 0.0;
        }
        match self.profile {
            RadialProfile::SquareWell { v0 } => v0,
            RadialProfile::Parabolic { v0 } => {
                (v0 * (1.0 - (r / self.support_radius).powi(2))).max(0.0)
            }
        }
    }

    pub fn max_value(&self) -> f64 {
        self.profile.amplitude()
    }
}

/// Adaptive Simpson quadrature to relative tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        eps: f64,
        depth: usize,
    ) -> Result<f64> {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if !delta.is_finite() {
            return Err(CoreError::InvalidPotential("non-finite values under quadrature".into()));
        }
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return Ok(left + right + delta / 15.0);
        }
        let l = recurse(f, a, fa, m, fm, left, lm, flm, eps / 2.0, depth - 1)?;
        let r = recurse(f, m, fm, b, fb, right, rm, frm, eps / 2.0, depth - 1)?;
        Ok(l + r)
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    if !fa.is_finite() || !fb.is_finite() {
        return Err(CoreError::InvalidPotential("non-finite values under quadrature".into()));
    }
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    let scale = whole.abs().max(1e-300);
    recurse(f, a, fa, b, fb, whole, m, fm, tol * scale, 48)
}

/// b0 = int V(x) d^3x = 4 pi int_0^R r^2 V(r) dr, to relative 1e-10.
pub fn integrate_b0(pot: &PotentialSpec) -> Result<f64> {
    let integrand = |r: f64| r * r * pot.eval(r);
    let val = adaptive_simpson(&integrand, 0.0, pot.support_radius, 1e-11)?;
    Ok(4.0 * PI * val)
}

/// Solved Neumann ground state on a radial grid.
#[derive(Clone, Debug)]
pub struct RadialScattering {
    /// Strictly increasing radii in (0, ell].
    pub r_grid: Vec<f64>,
    /// f values at `r_grid`.
    pub f_values: Vec<f64>,
    /// df/dr at `r_grid`.
    pub f_prime: Vec<f64>,
    /// f at r = 0 (regular limit of u/r).
    pub f_origin: f64,
    pub lambda: f64,
    pub ell: f64,
    pub n: f64,
    pub beta: f64,
    /// Rescaled support radius R N^-beta of the potential term.
    pub support_radius: f64,
}

/// Empirical constants of the ground-state bounds.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundReport {
    /// min f, must lie in (0, 1].
    pub c0: f64,
    /// N^(2-beta) |lambda - 3 b0 / (8 pi N ell^3)|
    pub c_lambda: f64,
    /// sup_r N (r + N^-beta) omega(r)
    pub c_omega: f64,
    /// sup_r N (r^2 + N^-2beta) |omega'(r)|
    pub c_grad: f64,
}

fn shooting_grid(support: f64, ell: f64, n_grid: usize) -> Result<Vec<f64>> {
    // graded toward r = 0 inside the rescaled support, uniform outside
    let n_in = n_grid / 2;
    if n_in < 8 {
        return Err(CoreError::Resolution {
            what: "radial grid points inside the rescaled support".into(),
            needed: 8,
            got: n_in,
        });
    }
    let n_out = (n_grid - n_in).max(8);
    let mut r = Vec::with_capacity(n_in + n_out + 1);
    for j in 0..=n_in {
        r.push(support * (j as f64 / n_in as f64).powf(1.5));
    }
    for j in 1..=n_out {
        r.push(support + (ell - support) * j as f64 / n_out as f64);
    }
    Ok(r)
}

/// One shooting pass: integrate u'' = (q - lambda) u from 0 to ell with
/// u(0) = 0, u'(0) = 1; returns (u, u') sampled on the grid.
///
/// `q(r, witness)` must evaluate the branch of the potential containing
/// `witness`; the grid is breakpoint-aligned, so stages at a discontinuity
/// need the branch of the open interval, not the pointwise value.
fn shoot(grid: &[f64], q: &dyn Fn(f64, f64) -> f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = grid.len();
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    for j in 0..n - 1 {
        let h = grid[j + 1] - grid[j];
        let mid = grid[j] + 0.5 * h;
        let rhs = |r: f64, y: [f64; 2]| [y[1], (q(r, mid) - lambda) * y[0]];
        let y = [u[j], v[j]];
        let k1 = rhs(grid[j], y);
        let k2 = rhs(mid, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs(mid, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs(grid[j] + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        u[j + 1] = y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        v[j + 1] = y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    }
    (u, v)
}

/// Lowest Neumann eigenpair of the rescaled pair problem on the ball of radius `ell`.
pub fn solve_neumann(pot: &PotentialSpec, n: f64, beta: f64, ell: f64, n_grid: usize) -> Result<RadialScattering> {
    if !(n >= 1.0) || !(0.0 < beta && beta < 1.0) || !(ell > 0.0) {
        return Err(CoreError::SolverConvergence(format!(
            "parameters out of range: n={n}, beta={beta}, ell={ell}"
        )));
    }
    let support = pot.support_radius * n.powf(-beta);
    if support >= ell {
        return Err(CoreError::SolverConvergence(format!(
            "rescaled support {support:.3e} must be below ell = {ell} (N too small)"
        )));
    }

    // V = 0 has the exact solution f = 1, lambda = 0
    if pot.max_value() == 0.0 || pot.b0 == 0.0 {
        let grid = shooting_grid(support, ell, n_grid.max(64))?;
        let r_grid: Vec<f64> = grid[1..].to_vec();
        let m = r_grid.len();
        return Ok(RadialScattering {
            r_grid,
            f_values: vec![1.0; m],
            f_prime: vec![0.0; m],
            f_origin: 1.0,
            lambda: 0.0,
            ell,
            n,
            beta,
            support_radius: support,
        });
    }

    let grid = shooting_grid(support, ell, n_grid)?;
    let coupling = 0.5 * n.powf(3.0 * beta - 1.0);
    let nb = n.powf(beta);
    let q = move |r: f64, witness: f64| coupling * pot.eval_branch(nb * r, nb * witness);

    // Neumann residual: f'(ell) = 0 iff ell u'(ell) - u(ell) = 0
    let residual = |lambda: f64| -> f64 {
        let (u, v) = shoot(&grid, &q, lambda);
        ell * v[grid.len() - 1] - u[grid.len() - 1]
    };

    // The constant trial function gives lambda_1 <= 3 b0 / (8 pi N ell^3) exactly,
    // well below the second eigenvalue; bisection on [0, that] is safe.
    let lam_trial = 3.0 * pot.b0 / (8.0 * PI * n * ell * ell * ell);
    let mut lo = 0.0;
    let mut hi = lam_trial * (1.0 + 1e-9);
    let g_lo = residual(lo);
    let mut g_hi = residual(hi);
    if g_lo <= 0.0 {
        return Err(CoreError::SolverConvergence(format!(
            "unexpected residual sign at lambda=0: {g_lo:.3e}"
        )));
    }
    // widen (weak-coupling roundoff can push the root marginally past the trial bound)
    let cap = n.powf(3.0 * beta - 1.0) * pot.max_value();
    while g_hi > 0.0 && hi < cap {
        hi *= 2.0;
        g_hi = residual(hi);
    }
    if g_hi > 0.0 {
        return Err(CoreError::SolverConvergence("eigenvalue bracket failure".into()));
    }
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);

    let (u, v) = shoot(&grid, &q, lambda);
    let last = grid.len() - 1;
    let scale = ell / u[last];
    let boundary_residual = (v[last] * scale - u[last] * scale / ell).abs();
    if boundary_residual > 1e-10 * (1.0 + 1.0 / ell) {
        return Err(CoreError::SolverConvergence(format!(
            "boundary derivative residual {boundary_residual:.3e} above tolerance"
        )));
    }

    let mut f_values = Vec::with_capacity(last);
    let mut f_prime = Vec::with_capacity(last);
    for j in 1..=last {
        let r = grid[j];
        let fu = u[j] * scale / r;
        f_values.push(fu);
        f_prime.push((v[j] * scale * r - u[j] * scale) / (r * r));
    }
    if f_values.iter().any(|&f| f <= 0.0) {
        return Err(CoreError::SolverConvergence("selected solution has a node".into()));
    }
    Ok(RadialScattering {
        r_grid: grid[1..].to_vec(),
        f_values,
        f_prime,
        f_origin: v[0] * scale,
        lambda,
        ell,
        n,
        beta,
        support_radius: support,
    })
}

impl RadialScattering {
    /// f(r) by cubic Hermite interpolation; f = 1 for r >= ell.
    pub fn f_at(&self, r: f64) -> f64 {
        if r >= self.ell {
            return 1.0;
        }
        if r <= 0.0 {
            return self.f_origin;
        }
        let first = self.r_grid[0];
        if r <= first {
            // even extension near the origin: f ~ f0 + c r^2
            let c = (self.f_values[0] - self.f_origin) / (first * first);
            return self.f_origin + c * r * r;
        }
        let j = match self.r_grid.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(j) => return self.f_values[j],
            Err(j) => j - 1,
        };
        let (r0, r1) = (self.r_grid[j], self.r_grid[j + 1]);
        let h = r1 - r0;
        let t = (r - r0) / h;
        let (f0, f1) = (self.f_values[j], self.f_values[j + 1]);
        let (d0, d1) = (self.f_prime[j] * h, self.f_prime[j + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * f0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * f1
            + (t3 - t2) * d1
    }

    /// omega(r) = 1 - f(r), continued by zero for r >= ell.
    pub fn omega_at(&self, r: f64) -> f64 {
        if r >= self.ell {
            0.0
        } else {
            1.0 - self.f_at(r)
        }
    }

    /// d/dr omega(r) = -f'(r).
    pub fn omega_prime_at(&self, r: f64) -> f64 {
        if r >= self.ell || r <= 0.0 {
            return 0.0;
        }
        let first = self.r_grid[0];
        if r <= first {
            let c = (self.f_values[0] - self.f_origin) / (first * first);
            return -2.0 * c * r;
        }
        let j = match self.r_grid.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(j) => return -self.f_prime[j],
            Err(j) => j - 1,
        };
        let (r0, r1) = (self.r_grid[j], self.r_grid[j + 1]);
        let h = r1 - r0;
        let t = (r - r0) / h;
        let (f0, f1) = (self.f_values[j], self.f_values[j + 1]);
        let (d0, d1) = (self.f_prime[j] * h, self.f_prime[j + 1] * h);
        let dt = (6.0 * t * t - 6.0 * t) * f0
            + (3.0 * t * t - 4.0 * t + 1.0) * d0
            + (-6.0 * t * t + 6.0 * t) * f1
            + (3.0 * t * t - 2.0 * t) * d1;
        -dt / h
    }

    /// Ball average (3/a^3) int_0^a r^2 omega(r) dr, used for diagonal kernel cells.
    pub fn omega_ball_average(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return self.omega_at(0.0);
        }
        let f = |r: f64| r * r * self.omega_at(r);
        let v = adaptive_simpson(&f, 0.0, a, 1e-11).unwrap_or(0.0);
        3.0 * v / (a * a * a)
    }

    /// int N^(3 beta) V(N^beta x) f_{N,ell}(x) d^3x, the renormalization target
    /// of the grid-sampled interaction.
    pub fn interaction_integral(&self, pot: &PotentialSpec) -> Result<f64> {
        let nb = self.n.powf(-self.beta);
        let f = |r: f64| r * r * pot.eval(r) * self.f_at(r * nb);
        Ok(4.0 * PI * adaptive_simpson(&f, 0.0, pot.support_radius, 1e-11)?)
    }
}

/// Pointwise limit profile of N omega: (b0/8pi)[1/r - 3/(2 ell) + r^2/(2 ell^3)] on r <= ell.
pub fn omega_asymp(b0: f64, ell: f64, r: f64) -> Result<f64> {
    if r == 0.0 {
        return Err(CoreError::Singularity);
    }
    if r > ell {
        return Ok(0.0);
    }
    Ok(b0 / (8.0 * PI) * (1.0 / r - 1.5 / ell + r * r / (2.0 * ell * ell * ell)))
}

/// Radial derivative of the limit profile.
pub fn omega_asymp_prime(b0: f64, ell: f64, r: f64) -> Result<f64> {
    if r == 0.0 {
        return Err(CoreError::Singularity);
    }
    if r > ell {
        return Ok(0.0);
    }
    Ok(b0 / (8.0 * PI) * (-1.0 / (r * r) + r / (ell * ell * ell)))
}

/// Ball average of the limit profile over radius `a` (analytic).
pub fn omega_asymp_ball_average(b0: f64, ell: f64, a: f64) -> f64 {
    assert!(a > 0.0 && a <= ell);
    b0 / (8.0 * PI) * (1.5 / a - 1.5 / ell + 0.3 * a * a / (ell * ell * ell))
}

/// Empirical constants of Lemma-type pointwise and eigenvalue bounds.
pub fn check_lemma_bounds(sol: &RadialScattering, b0: f64) -> BoundReport {
    let n = sol.n;
    let beta = sol.beta;
    let mut c0 = sol.f_origin;
    let mut c_omega: f64 = 0.0;
    let mut c_grad: f64 = 0.0;
    let nb = n.powf(-beta);
    for (j, &r) in sol.r_grid.iter().enumerate() {
        c0 = c0.min(sol.f_values[j]);
        let w = 1.0 - sol.f_values[j];
        c_omega = c_omega.max(n * (r + nb) * w);
        c_grad = c_grad.max(n * (r * r + nb * nb) * sol.f_prime[j].abs());
    }
    let lam_ref = 3.0 * b0 / (8.0 * PI * n * sol.ell.powi(3));
    let c_lambda = n.powf(2.0 - beta) * (sol.lambda - lam_ref).abs();
    BoundReport { c0, c_lambda, c_omega, c_grad }
}

/// sup over r in (R N^-beta, ell] of N^(1-beta) r |N omega(r) - omega_asymp(r)|.
pub fn omega_difference_bound(sol: &RadialScattering, b0: f64) -> f64 {
    let mut sup: f64 = 0.0;
    let pref = sol.n.powf(1.0 - sol.beta);
    for (j, &r) in sol.r_grid.iter().enumerate() {
        if r <= sol.support_radius {
            continue;
        }
        let w = 1.0 - sol.f_values[j];
        let asymp = omega_asymp(b0, sol.ell, r).unwrap_or(0.0);
        sup = sup.max(pref * r * (sol.n * w - asymp).abs());
    }
    sup
}

/// Scattering length from the zero-energy equation [-lap + V/2] f = 0,
/// fitted against the exterior law f = 1 - a0/r.
pub fn scattering_length(pot: &PotentialSpec, domain_radius: f64, n_grid: usize) -> Result<f64> {
    if domain_radius < 10.0 * pot.support_radius {
        return Err(CoreError::SolverConvergence(format!(
            "domain radius {domain_radius} below 10 R = {}",
            10.0 * pot.support_radius
        )));
    }
    if pot.max_value() == 0.0 {
        return Ok(0.0);
    }
    let grid = shooting_grid(pot.support_radius, domain_radius, n_grid)?;
    let q = |r: f64, witness: f64| 0.5 * pot.eval_branch(r, witness);
    let (u, v) = shoot(&grid, &q, 0.0);
    let last = grid.len() - 1;
    // outside the support u = c (r - a0)
    Ok(domain_radius - u[last] / v[last])
}
