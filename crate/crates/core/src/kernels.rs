//! Correlation kernels as dense Hilbert-Schmidt operators: construction from
//! the radial profiles, the hyperbolic calculus cosh_k / sinh_k, derivative
//! kernels, and the norms that drive the convergence experiments.

use crate::error::{CoreError, Result};
use crate::grid::{fft_nd, Grid, GridField};
use crate::linalg::{self, Flavour};
use crate::scattering::{
    omega_asymp, omega_asymp_ball_average, omega_asymp_prime, RadialScattering,
};
use num_complex::Complex64;
use rayon::prelude::*;

/// Dense two-point kernel with quadrature weight: entry (i, j) samples
/// K(x_i, x_j), operator composition is the entries product scaled by the
/// weight, and |K|_HS^2 = weight^2 sum |entries|^2.
#[derive(Clone, Debug)]
pub struct HSKernel {
    pub grid: Grid,
    pub entries: Vec<Complex64>,
    pub weight: f64,
    pub symmetric: bool,
}

impl HSKernel {
    pub fn zero(grid: Grid) -> Self {
        HSKernel {
            grid,
            entries: vec![Complex64::default(); grid.mode_count() * grid.mode_count()],
            weight: grid.weight(),
            symmetric: true,
        }
    }

    /// Kernel of the identity operator (delta / weight on the diagonal).
    pub fn identity(grid: Grid) -> Self {
        let m = grid.mode_count();
        let mut k = HSKernel::zero(grid);
        let iv = 1.0 / grid.weight();
        for i in 0..m {
            k.entries[i * m + i] = Complex64::new(iv, 0.0);
        }
        k
    }

    pub fn dim(&self) -> usize {
        self.grid.mode_count()
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim() + j]
    }

    /// Discrete-mode matrix weight * entries, the representation in which
    /// composition is a plain matrix product.
    pub fn mode_matrix(&self) -> Vec<Complex64> {
        self.entries.iter().map(|v| v * self.weight).collect()
    }

    pub fn from_mode_matrix(grid: Grid, mode: Vec<Complex64>) -> Self {
        let w = grid.weight();
        let entries = mode.into_iter().map(|v| v / w).collect();
        HSKernel { grid, entries, weight: w, symmetric: false }
    }

    pub fn check_same_grid(&self, other: &HSKernel) -> Result<()> {
        if self.grid != other.grid {
            return Err(CoreError::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    /// Operator composition (self . other)(x, z) = int self(x, y) other(y, z) dy.
    pub fn compose(&self, other: &HSKernel) -> Result<HSKernel> {
        self.check_same_grid(other)?;
        let m = self.dim();
        let mut entries = linalg::mm(&self.entries, Flavour::N, &other.entries, Flavour::N, m);
        entries.iter_mut().for_each(|v| *v *= self.weight);
        Ok(HSKernel { grid: self.grid, entries, weight: self.weight, symmetric: false })
    }

    /// Adjoint kernel K*(x, y) = conj K(y, x).
    pub fn adjoint(&self) -> HSKernel {
        HSKernel {
            grid: self.grid,
            entries: linalg::adjoint(&self.entries, self.dim()),
            weight: self.weight,
            symmetric: self.symmetric,
        }
    }

    pub fn scale(&mut self, s: Complex64) {
        self.entries.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add_scaled(&mut self, other: &HSKernel, s: Complex64) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += s * b;
        }
        self.symmetric = false;
        Ok(())
    }

    pub fn hs_norm(&self) -> f64 {
        self.weight * linalg::frobenius(&self.entries)
    }

    /// sup over x of the weighted row L2 norm |K(x, .)|_2.
    pub fn sup_row_norm(&self) -> f64 {
        let m = self.dim();
        (0..m)
            .map(|i| {
                let s: f64 = self.entries[i * m..(i + 1) * m].iter().map(|v| v.norm_sqr()).sum();
                (self.weight * s).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn sup_entry(&self) -> f64 {
        self.entries.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn symmetric_defect(&self) -> f64 {
        linalg::symmetric_defect(&self.entries, self.dim())
    }

    pub fn hermitian_defect(&self) -> f64 {
        linalg::hermitian_defect(&self.entries, self.dim())
    }

    /// Hilbert-Schmidt distance |self - other|_HS.
    pub fn distance(&self, other: &HSKernel) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok(self.weight * s.sqrt())
    }

    /// Kernel trace int K(x, x) dx.
    pub fn trace(&self) -> Complex64 {
        let m = self.dim();
        let mut t = Complex64::default();
        for i in 0..m {
            t += self.entries[i * m + i];
        }
        t * self.weight
    }

    pub fn transpose(&self) -> HSKernel {
        HSKernel {
            grid: self.grid,
            entries: linalg::transpose(&self.entries, self.dim()),
            weight: self.weight,
            symmetric: self.symmetric,
        }
    }
}

/// The radial correlation profile entering k(x, y) = -omega(|x-y|) phi^2(mid):
/// N omega_{N,ell} for finite N, or the asymptotic profile in the limit.
pub trait CorrelationProfile: Sync {
    /// Profile value including its N prefactor.
    fn omega(&self, r: f64) -> f64;
    /// Radial derivative of `omega`.
    fn omega_prime(&self, r: f64) -> f64;
    /// Average of `omega` over a ball of radius `a` (diagonal cell value).
    fn ball_average(&self, a: f64) -> f64;
    fn ell(&self) -> f64;
}

/// Finite-N profile N omega_{N,ell} from a solved Neumann ground state.
pub struct FiniteProfile<'a> {
    pub scat: &'a RadialScattering,
}

impl CorrelationProfile for FiniteProfile<'_> {
    fn omega(&self, r: f64) -> f64 {
        self.scat.n * self.scat.omega_at(r)
    }
    fn omega_prime(&self, r: f64) -> f64 {
        self.scat.n * self.scat.omega_prime_at(r)
    }
    fn ball_average(&self, a: f64) -> f64 {
        self.scat.n * self.scat.omega_ball_average(a)
    }
    fn ell(&self) -> f64 {
        self.scat.ell
    }
}

/// Limiting profile omega_ell^asymp.
pub struct LimitProfile {
    pub b0: f64,
    pub ell: f64,
}

impl CorrelationProfile for LimitProfile {
    fn omega(&self, r: f64) -> f64 {
        omega_asymp(self.b0, self.ell, r).unwrap_or(0.0)
    }
    fn omega_prime(&self, r: f64) -> f64 {
        omega_asymp_prime(self.b0, self.ell, r).unwrap_or(0.0)
    }
    fn ball_average(&self, a: f64) -> f64 {
        omega_asymp_ball_average(self.b0, self.ell, a.min(self.ell))
    }
    fn ell(&self) -> f64 {
        self.ell
    }
}

/// Midpoint samples of phi (and optionally its gradient) on the doubled grid,
/// obtained by band-limited interpolation.
pub struct Midpoints {
    pub phi: GridField,
    pub grads: Vec<GridField>,
}

impl Midpoints {
    pub fn new(phi: &GridField, with_grads: bool) -> Self {
        let fine = phi.upsample_double();
        let grads = if with_grads {
            (0..phi.grid.dim).map(|d| fine.gradient_component(d)).collect()
        } else {
            Vec::new()
        };
        Midpoints { phi: fine, grads }
    }

    /// Fine-grid flat index of the short-arc midpoint of sites i and j.
    fn mid_index(coarse: &Grid, i: usize, j: usize) -> usize {
        let g = coarse.points_per_dim as i64;
        let a = coarse.lattice(i);
        let b = coarse.lattice(j);
        let fine_g = 2 * coarse.points_per_dim;
        let mut idx = [0usize; 3];
        for d in 0..coarse.dim {
            let mut diff = a[d] as i64 - b[d] as i64;
            if diff >= g / 2 {
                diff -= g;
            } else if diff < -(g / 2) {
                diff += g;
            }
            let f = (2 * b[d] as i64 + diff).rem_euclid(2 * g);
            idx[d] = f as usize;
        }
        let mut flat = 0;
        for d in 0..coarse.dim {
            flat = flat * fine_g + idx[d];
        }
        flat
    }
}

/// Correlation kernel k(x, y) = -omega(|x-y|) phi((x+y)/2)^2 on the grid of
/// `phi`, with the diagonal cell carrying the ball-averaged profile.
pub fn build_kernel(profile: &dyn CorrelationProfile, phi: &GridField) -> HSKernel {
    build_kernel_with(profile, phi, |_r, _omega, phim| -phim * phim)
        .expect("infallible closure")
}

/// Builds the N-dependent kernel k_{N,t}.
pub fn build_k_n(scat: &RadialScattering, phi: &GridField) -> HSKernel {
    build_kernel(&FiniteProfile { scat }, phi)
}

/// Builds the limiting kernel k_t.
pub fn build_k_limit(b0: f64, ell: f64, phi: &GridField) -> HSKernel {
    build_kernel(&LimitProfile { b0, ell }, phi)
}

fn build_kernel_with(
    profile: &dyn CorrelationProfile,
    phi: &GridField,
    entry: impl Fn(f64, f64, Complex64) -> Complex64 + Sync,
) -> Result<HSKernel> {
    let grid = phi.grid;
    let m = grid.mode_count();
    let mids = Midpoints::new(phi, false);
    let a = grid.spacing() / 2.0;
    let diag = profile.ball_average(a);
    let mut entries = vec![Complex64::default(); m * m];
    entries.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            let om = if i == j { diag } else { profile.omega(grid.pair_distance(i, j)) };
            if om == 0.0 {
                continue;
            }
            let phim = mids.phi.values[Midpoints::mid_index(&grid, i, j)];
            *out = om * entry(grid.pair_distance(i, j), om, phim);
        }
    });
    Ok(HSKernel { grid, entries, weight: grid.weight(), symmetric: true })
}

/// Hyperbolic images of a symmetric kernel.
pub struct HyperbolicFamily {
    pub c: HSKernel,
    pub s: HSKernel,
    pub p: HSKernel,
    pub r: HSKernel,
}

fn sinc_sinh(d: f64) -> f64 {
    // sinh(x)/x on x = sqrt(d), with the series for small arguments
    if d < 1e-12 {
        1.0 + d / 6.0 + d * d / 120.0
    } else {
        let x = d.sqrt();
        x.sinh() / x
    }
}

/// cosh_k, sinh_k, p = cosh - 1, r = sinh - k through the eigendecomposition
/// of the Hermitian positive product (k kbar).
pub fn hyperbolic(k: &HSKernel) -> Result<HyperbolicFamily> {
    if !k.symmetric || k.symmetric_defect() > 1e-10 {
        return Err(CoreError::Assembly(format!(
            "hyperbolic calculus requires a symmetric kernel (defect {:.3e})",
            k.symmetric_defect()
        )));
    }
    let m = k.dim();
    let km = k.mode_matrix();
    // theta = (w k)(w conj k); for symmetric k this is k k* and Hermitian PSD
    let theta = linalg::mm(&km, Flavour::N, &km, Flavour::C, m);
    let hdef = linalg::hermitian_defect(&theta, m);
    if hdef > 1e-10 {
        return Err(CoreError::Assembly(format!(
            "conjugate-kernel product not Hermitian (defect {hdef:.3e})"
        )));
    }
    let (mut d, u) = linalg::eigh(&theta, m)?;
    let dmax = d.iter().cloned().fold(0.0, f64::max);
    for v in d.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-10 * dmax.max(1.0) {
                return Err(CoreError::Numeric(format!("kernel product has negative eigenvalue {v:.3e}")));
            }
            *v = 0.0;
        }
    }
    let cosh_d: Vec<f64> = d.iter().map(|&x| x.sqrt().cosh()).collect();
    let g_d: Vec<f64> = d.iter().map(|&x| sinc_sinh(x)).collect();
    let c_mode = linalg::from_eigen(&u, &cosh_d, m);
    let g_mode = linalg::from_eigen(&u, &g_d, m);
    let s_mode = linalg::mm(&g_mode, Flavour::N, &km, Flavour::N, m);

    let c = HSKernel::from_mode_matrix(k.grid, c_mode);
    let s = HSKernel::from_mode_matrix(k.grid, s_mode);
    let mut p = c.clone();
    let ident = HSKernel::identity(k.grid);
    p.add_scaled(&ident, Complex64::new(-1.0, 0.0))?;
    let mut r = s.clone();
    r.add_scaled(k, Complex64::new(-1.0, 0.0))?;

    let mut c = c;
    let mut s = s;
    let mut p = p;
    let mut r = r;
    // s and r are symmetric by the series algebra; c and p only when k is real
    s.symmetric = s.symmetric_defect() <= 1e-10;
    r.symmetric = r.symmetric_defect() <= 1e-10;
    c.symmetric = c.symmetric_defect() <= 1e-10;
    p.symmetric = p.symmetric_defect() <= 1e-10;
    Ok(HyperbolicFamily { c, s, p, r })
}

/// Truncated-series route to the same operators, kept independent of the
/// eigendecomposition path as a cross-check.
pub fn hyperbolic_series(k: &HSKernel, tol: f64, n_max: usize) -> Result<HyperbolicFamily> {
    if !k.symmetric {
        return Err(CoreError::Assembly("series calculus requires a symmetric kernel".into()));
    }
    let m = k.dim();
    let km = k.mode_matrix();
    let theta = linalg::mm(&km, Flavour::N, &km, Flavour::C, m);
    let mut c_mode = vec![Complex64::default(); m * m];
    let mut g_mode = vec![Complex64::default(); m * m];
    // power = theta^n, starting at the identity
    let mut power = vec![Complex64::default(); m * m];
    for i in 0..m {
        power[i * m + i] = Complex64::new(1.0, 0.0);
    }
    let mut converged = false;
    for n in 0..=n_max {
        let c_fac = 1.0 / factorial(2 * n);
        let g_fac = 1.0 / factorial(2 * n + 1);
        for i in 0..m * m {
            c_mode[i] += power[i] * c_fac;
            g_mode[i] += power[i] * g_fac;
        }
        let tail = linalg::frobenius(&power) * c_fac;
        if tail < tol {
            converged = true;
            break;
        }
        power = linalg::mm(&power, Flavour::N, &theta, Flavour::N, m);
    }
    if !converged {
        return Err(CoreError::Truncation { n_max, residual: linalg::frobenius(&power) / factorial(2 * n_max) });
    }
    let s_mode = linalg::mm(&g_mode, Flavour::N, &km, Flavour::N, m);
    let c = HSKernel::from_mode_matrix(k.grid, c_mode);
    let s = HSKernel::from_mode_matrix(k.grid, s_mode);
    let mut p = c.clone();
    p.add_scaled(&HSKernel::identity(k.grid), Complex64::new(-1.0, 0.0))?;
    let mut r = s.clone();
    r.add_scaled(k, Complex64::new(-1.0, 0.0))?;
    Ok(HyperbolicFamily { c, s, p, r })
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Defect of the commutation-preserving identity: |c c* - s s* - 1|_HS.
pub fn verify_bogoliubov_identity(c: &HSKernel, s: &HSKernel) -> Result<f64> {
    c.check_same_grid(s)?;
    let m = c.dim();
    let cm = c.mode_matrix();
    let sm = s.mode_matrix();
    let mut acc = linalg::mm(&cm, Flavour::N, &cm, Flavour::H, m);
    let ss = linalg::mm(&sm, Flavour::N, &sm, Flavour::H, m);
    for i in 0..m * m {
        acc[i] -= ss[i];
    }
    for i in 0..m {
        acc[i * m + i] -= 1.0;
    }
    // Frobenius norm of the mode-matrix defect equals the kernel HS norm
    Ok(linalg::frobenius(&acc))
}

/// The three norms tracked for every kernel.
#[derive(Clone, Copy, Debug)]
pub struct KernelNorms {
    pub hs: f64,
    pub sup_row: f64,
    pub sup_entry: f64,
}

pub fn kernel_norms(k: &HSKernel) -> KernelNorms {
    KernelNorms { hs: k.hs_norm(), sup_row: k.sup_row_norm(), sup_entry: k.sup_entry() }
}

/// Spectral derivative along the first kernel argument: for each fixed column
/// the map x -> K(x, y) is a grid field.
pub fn spectral_first_arg(k: &HSKernel, multiplier: &[Complex64]) -> HSKernel {
    let grid = k.grid;
    let m = k.dim();
    // rows of the transpose are the first-argument fields
    let mut t = linalg::transpose(&k.entries, m);
    t.par_chunks_mut(m).for_each(|col| {
        fft_nd(&grid, col, false);
        for (v, mu) in col.iter_mut().zip(multiplier) {
            *v *= mu;
        }
        fft_nd(&grid, col, true);
    });
    HSKernel {
        grid,
        entries: linalg::transpose(&t, m),
        weight: k.weight,
        symmetric: false,
    }
}

/// -Laplacian along the first argument.
pub fn neg_lap_first_arg(k: &HSKernel) -> HSKernel {
    let mult: Vec<Complex64> = (0..k.dim()).map(|i| Complex64::new(k.grid.k_squared(i), 0.0)).collect();
    spectral_first_arg(k, &mult)
}

/// d/dx_d along the first argument.
pub fn grad_first_arg(k: &HSKernel, d: usize) -> HSKernel {
    let grid = k.grid;
    let mult: Vec<Complex64> = (0..k.dim())
        .map(|i| {
            let idx = grid.lattice(i);
            Complex64::new(0.0, grid.wavenumber(idx[d]))
        })
        .collect();
    spectral_first_arg(k, &mult)
}

/// Derivative kernels of the correlation family: the analytic gradient of k
/// and the spectrally differentiated hyperbolic remainders.
pub struct DerivativeKernels {
    pub grad1_k: Vec<HSKernel>,
    pub grad1_p: Vec<HSKernel>,
    pub lap1_p: HSKernel,
    pub lap1_r: HSKernel,
}

/// Analytic first-argument gradient of k, assembled from the radial
/// derivative of the profile and the gradient of phi^2 at midpoints.
pub fn grad1_k_analytic(profile: &dyn CorrelationProfile, phi: &GridField) -> Vec<HSKernel> {
    let grid = phi.grid;
    let m = grid.mode_count();
    let mids = Midpoints::new(phi, true);
    let a = grid.spacing() / 2.0;
    let diag_omega = profile.ball_average(a);
    (0..grid.dim)
        .map(|d| {
            let mut entries = vec![Complex64::default(); m * m];
            entries.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
                for (j, out) in row.iter_mut().enumerate() {
                    let mid = Midpoints::mid_index(&grid, i, j);
                    let phim = mids.phi.values[mid];
                    let dphim = mids.grads[d].values[mid];
                    if i == j {
                        // odd profile gradient averages to zero over the cell
                        *out = -diag_omega * phim * dphim;
                        continue;
                    }
                    let disp = grid.min_image(i, j);
                    let r = grid.pair_distance(i, j);
                    let om = profile.omega(r);
                    let domega = profile.omega_prime(r) * disp[d] / r;
                    *out = -(domega * phim * phim + om * phim * dphim);
                }
            });
            HSKernel { grid, entries, weight: grid.weight(), symmetric: false }
        })
        .collect()
}

pub fn derivative_kernels(
    profile: &dyn CorrelationProfile,
    phi: &GridField,
    fam: &HyperbolicFamily,
) -> DerivativeKernels {
    DerivativeKernels {
        grad1_k: grad1_k_analytic(profile, phi),
        grad1_p: (0..phi.grid.dim).map(|d| grad_first_arg(&fam.p, d)).collect(),
        lap1_p: neg_lap_first_arg(&fam.p),
        lap1_r: neg_lap_first_arg(&fam.r),
    }
}

/// HS norm of the analytic gradient of k without materializing the kernels.
pub fn grad1_k_hs_norm(profile: &dyn CorrelationProfile, phi: &GridField) -> f64 {
    let grid = phi.grid;
    let m = grid.mode_count();
    let mids = Midpoints::new(phi, true);
    let a = grid.spacing() / 2.0;
    let diag_omega = profile.ball_average(a);
    let sums: f64 = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..m {
                let mid = Midpoints::mid_index(&grid, i, j);
                let phim = mids.phi.values[mid];
                if i == j {
                    for g in &mids.grads {
                        acc += (diag_omega * phim * g.values[mid]).norm_sqr();
                    }
                    continue;
                }
                let disp = grid.min_image(i, j);
                let r = grid.pair_distance(i, j);
                let om = profile.omega(r);
                let dom = profile.omega_prime(r);
                if om == 0.0 && dom == 0.0 {
                    continue;
                }
                for (d, g) in mids.grads.iter().enumerate() {
                    let dphim = g.values[mid];
                    acc += (dom * disp[d] / r * phim * phim + om * phim * dphim).norm_sqr();
                }
            }
            acc
        })
        .sum();
    grid.weight() * sums.sqrt()
}

/// |kN - kLim|_HS without materializing kN (used by the sweep studies).
pub fn kernel_distance_streaming(
    profile_n: &dyn CorrelationProfile,
    phi_n: &GridField,
    k_lim: &HSKernel,
) -> Result<f64> {
    if phi_n.grid != k_lim.grid {
        return Err(CoreError::GridMismatch("field and kernel grids differ".into()));
    }
    let grid = phi_n.grid;
    let m = grid.mode_count();
    let mids = Midpoints::new(phi_n, false);
    let a = grid.spacing() / 2.0;
    let diag = profile_n.ball_average(a);
    let sums: f64 = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..m {
                let om = if i == j { diag } else { profile_n.omega(grid.pair_distance(i, j)) };
                let phim = mids.phi.values[Midpoints::mid_index(&grid, i, j)];
                let e = -om * phim * phim;
                acc += (e - k_lim.entries[i * m + j]).norm_sqr();
            }
            acc
        })
        .sum();
    Ok(grid.weight() * sums.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::{solve_neumann, PotentialSpec, RadialProfile};
    use approx::assert_abs_diff_eq;

    fn well() -> PotentialSpec {
        PotentialSpec::new(RadialProfile::SquareWell { v0: 1.0 }, 1.0).unwrap()
    }

    #[test]
    fn zero_field_gives_zero_kernel() {
        let g = Grid::new(1, 32, 8.0).unwrap();
        let phi = GridField::zero(g);
        let k = build_k_limit(1.0, 1.0, &phi);
        assert_eq!(k.hs_norm(), 0.0);
    }

    #[test]
    fn kernel_is_exactly_symmetric() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let phi = GridField::gaussian(g, 0.8);
        let pot = well();
        let scat = solve_neumann(&pot, 64.0, 0.5, 1.0, 4000).unwrap();
        let k = build_k_n(&scat, &phi);
        let m = k.dim();
        for i in 0..m {
            for j in 0..i {
                assert_eq!(k.entries[i * m + j], k.entries[j * m + i]);
            }
        }
    }

    #[test]
    fn limit_kernel_vanishes_beyond_ell() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let phi = GridField::gaussian(g, 0.8);
        let k = build_k_limit(1.0, 1.0, &phi);
        let m = k.dim();
        for i in 0..m {
            for j in 0..m {
                if g.pair_distance(i, j) > 1.0 {
                    assert_eq!(k.entries[i * m + j], Complex64::default());
                }
            }
        }
    }

    #[test]
    fn kernel_norm_uniform_in_n() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let phi = GridField::gaussian(g, 0.8);
        let pot = well();
        let mut norms = Vec::new();
        for &n in &[64.0, 256.0, 1024.0, 4096.0] {
            let scat = solve_neumann(&pot, n, 0.5, 1.0, 4000).unwrap();
            norms.push(build_k_n(&scat, &phi).hs_norm());
        }
        let hi = norms.iter().cloned().fold(f64::MIN, f64::max);
        let lo = norms.iter().cloned().fold(f64::MAX, f64::min);
        assert!(hi / lo < 2.0, "norms {:?}", norms);
    }

    #[test]
    fn rank_one_kernel_hyperbolics_are_scalar() {
        // k = kappa |e><e| with a weight-normalized real vector e
        let g = Grid::new(1, 16, 4.0).unwrap();
        let m = g.mode_count();
        let w = g.weight();
        let kappa = 0.7;
        let e: Vec<f64> = (0..m).map(|i| ((i as f64 + 1.0) * 0.37).sin()).collect();
        let nrm = (w * e.iter().map(|x| x * x).sum::<f64>()).sqrt();
        let e: Vec<f64> = e.iter().map(|x| x / nrm).collect();
        let mut k = HSKernel::zero(g);
        for i in 0..m {
            for j in 0..m {
                k.entries[i * m + j] = Complex64::new(kappa * e[i] * e[j], 0.0);
            }
        }
        k.symmetric = true;
        let fam = hyperbolic(&k).unwrap();
        for i in 0..m {
            for j in 0..m {
                let proj = e[i] * e[j];
                let ident = if i == j { 1.0 / w } else { 0.0 };
                let want_c = ident + (kappa.cosh() - 1.0) * proj;
                let want_s = kappa.sinh() * proj;
                assert_abs_diff_eq!(fam.c.entries[i * m + j].re, want_c, epsilon = 1e-9 / w);
                assert_abs_diff_eq!(fam.s.entries[i * m + j].re, want_s, epsilon = 1e-9);
                assert_abs_diff_eq!(fam.c.entries[i * m + j].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_kernel_hyperbolics() {
        let g = Grid::new(1, 8, 4.0).unwrap();
        let k = HSKernel::zero(g);
        let fam = hyperbolic(&k).unwrap();
        assert!(fam.c.distance(&HSKernel::identity(g)).unwrap() < 1e-12);
        assert!(fam.s.hs_norm() < 1e-12);
        assert!(fam.p.hs_norm() < 1e-12);
        assert!(fam.r.hs_norm() < 1e-12);
    }

    #[test]
    fn bogoliubov_identity_on_built_kernel() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let phi = GridField::gaussian(g, 0.8);
        let pot = well();
        let scat = solve_neumann(&pot, 128.0, 0.5, 1.0, 4000).unwrap();
        let k = build_k_n(&scat, &phi);
        let fam = hyperbolic(&k).unwrap();
        let defect = verify_bogoliubov_identity(&fam.c, &fam.s).unwrap();
        assert!(defect < 1e-8, "defect {defect}");
        // r symmetric for complex symmetric k
        assert!(fam.r.symmetric, "r defect {}", fam.r.symmetric_defect());
        // identity inputs
        let ident = HSKernel::identity(g);
        assert!(verify_bogoliubov_identity(&ident, &HSKernel::zero(g)).unwrap() < 1e-12);
        let d = verify_bogoliubov_identity(&ident, &ident).unwrap();
        assert_abs_diff_eq!(d, ident.hs_norm(), epsilon = 1e-9);
    }

    #[test]
    fn series_route_matches_eigendecomposition() {
        let g = Grid::new(1, 32, 8.0).unwrap();
        let phi = GridField::gaussian(g, 0.8);
        let pot = well();
        let scat = solve_neumann(&pot, 64.0, 0.5, 1.0, 4000).unwrap();
        let mut k = build_k_n(&scat, &phi);
        // bring |k| under 1 for the stated agreement window
        let nrm = k.hs_norm();
        if nrm > 0.9 {
            k.scale(Complex64::new(0.9 / nrm, 0.0));
        }
        let a = hyperbolic(&k).unwrap();
        let b = hyperbolic_series(&k, 1e-14, 40).unwrap();
        assert!(a.c.distance(&b.c).unwrap() < 1e-10);
        assert!(a.s.distance(&b.s).unwrap() < 1e-10);
    }

    #[test]
    fn norms_of_rank_one_kernel_are_consistent() {
        let g = Grid::new(1, 16, 4.0).unwrap();
        let m = g.mode_count();
        let w = g.weight();
        let e: Vec<f64> = (0..m).map(|i| ((i as f64) * 0.4).cos()).collect();
        let nrm = (w * e.iter().map(|x| x * x).sum::<f64>()).sqrt();
        let e: Vec<f64> = e.iter().map(|x| x / nrm).collect();
        let mut k = HSKernel::zero(g);
        for i in 0..m {
            for j in 0..m {
                k.entries[i * m + j] = Complex64::new(e[i] * e[j], 0.0);
            }
        }
        let norms = kernel_norms(&k);
        // rank-one normalized: hs = 1 and sup_row = max |e| over the row norm
        assert_abs_diff_eq!(norms.hs, 1.0, epsilon = 1e-12);
        let emax = e.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert_abs_diff_eq!(norms.sup_row, emax, epsilon = 1e-12);
        assert_abs_diff_eq!(norms.sup_entry, emax * emax, epsilon = 1e-12);
        // zero kernel
        let z = kernel_norms(&HSKernel::zero(g));
        assert_eq!((z.hs, z.sup_row, z.sup_entry), (0.0, 0.0, 0.0));
    }

    #[test]
    fn kernel_distance_decreases_in_n() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let phi = GridField::gaussian(g, 0.8);
        let pot = well();
        let lim = build_k_limit(pot.b0, 1.0, &phi);
        let d = |n: f64| {
            let scat = solve_neumann(&pot, n, 0.5, 1.0, 8000).unwrap();
            build_k_n(&scat, &phi).distance(&lim).unwrap()
        };
        let d1 = d(64.0);
        let d2 = d(256.0);
        assert!(d2 < d1, "distances {d1} {d2}");
        // streaming route agrees with the dense one
        let scat = solve_neumann(&pot, 64.0, 0.5, 1.0, 8000).unwrap();
        let ds = kernel_distance_streaming(&FiniteProfile { scat: &scat }, &phi, &lim).unwrap();
        assert_abs_diff_eq!(ds, d1, epsilon = 1e-10);
    }

    #[test]
    fn spectral_first_argument_derivatives_are_exact_on_smooth_kernels() {
        // separable band-limited kernel K(x, y) = f(x) g(y) has known derivatives
        let g = Grid::new(1, 32, 8.0).unwrap();
        let m = g.mode_count();
        let f = GridField::plane_wave(g, [2, 0, 0]);
        let h = GridField::gaussian(g, 1.1);
        let mut k = HSKernel::zero(g);
        for i in 0..m {
            for j in 0..m {
                k.entries[i * m + j] = f.values[i] * h.values[j];
            }
        }
        let fp = f.gradient_component(0);
        let fl = f.neg_laplacian();
        let dk = grad_first_arg(&k, 0);
        let lk = neg_lap_first_arg(&k);
        for i in 0..m {
            for j in 0..m {
                assert!((dk.entries[i * m + j] - fp.values[i] * h.values[j]).norm() < 1e-10);
                assert!((lk.entries[i * m + j] - fl.values[i] * h.values[j]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn grad_norm_streaming_matches_dense() {
        let g = Grid::new(1, 32, 8.0).unwrap();
        let phi = GridField::gaussian(g, 0.8);
        let pot = well();
        let scat = solve_neumann(&pot, 64.0, 0.5, 1.0, 4000).unwrap();
        let profile = FiniteProfile { scat: &scat };
        let dense = grad1_k_analytic(&profile, &phi);
        let total: f64 = dense.iter().map(|k| k.hs_norm().powi(2)).sum::<f64>().sqrt();
        let streamed = grad1_k_hs_norm(&profile, &phi);
        assert_abs_diff_eq!(streamed, total, epsilon = 1e-10 * total.max(1.0));
    }
}
