//! Periodic cubic grids and the spectral toolkit used by every module:
//! FFTs, Sobolev norms, derivatives, band-limited interpolation.

use crate::error::{CoreError, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Periodic box discretization. `dim` is 1 or 3, `points_per_dim` a power of two.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub points_per_dim: usize,
    pub box_length: f64,
}

impl Grid {
    pub fn new(dim: usize, points_per_dim: usize, box_length: f64) -> Result<Self> {
        if dim != 1 && dim != 3 {
            return Err(CoreError::GridMismatch(format!("dim must be 1 or 3, got {dim}")));
        }
        if !points_per_dim.is_power_of_two() {
            return Err(CoreError::GridMismatch(format!(
                "points_per_dim must be a power of two, got {points_per_dim}"
            )));
        }
        if !(box_length > 0.0) || !box_length.is_finite() {
            return Err(CoreError::GridMismatch(format!("box_length must be positive, got {box_length}")));
        }
        Ok(Grid { dim, points_per_dim, box_length })
    }

    /// Total mode count M = G^dim.
    pub fn mode_count(&self) -> usize {
        self.points_per_dim.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.points_per_dim as f64
    }

    /// Quadrature weight dx^dim of one cell.
    pub fn weight(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Cartesian coordinates of flat index `i`; unused components are zero.
    pub fn coords(&self, i: usize) -> [f64; 3] {
        let g = self.points_per_dim;
        let dx = self.spacing();
        let mut out = [0.0; 3];
        let mut rest = i;
        for d in (0..self.dim).rev() {
            out[d] = (rest % g) as f64 * dx;
            rest /= g;
        }
        out
    }

    /// Integer lattice coordinates of flat index `i`.
    pub fn lattice(&self, i: usize) -> [usize; 3] {
        let g = self.points_per_dim;
        let mut out = [0usize; 3];
        let mut rest = i;
        for d in (0..self.dim).rev() {
            out[d] = rest % g;
            rest /= g;
        }
        out
    }

    pub fn flat(&self, idx: [usize; 3]) -> usize {
        let g = self.points_per_dim;
        let mut out = 0;
        for d in 0..self.dim {
            out = out * g + idx[d] % g;
        }
        out
    }

    /// Signed mode number for index `m` along one axis, in [-G/2, G/2).
    pub fn signed_mode(&self, m: usize) -> i64 {
        let g = self.points_per_dim as i64;
        let m = m as i64;
        if m < g / 2 { m } else { m - g }
    }

    /// Wavenumber 2*pi*m/L for one axis index.
    pub fn wavenumber(&self, m: usize) -> f64 {
        2.0 * PI * self.signed_mode(m) as f64 / self.box_length
    }

    /// |k|^2 for the flat spectral index.
    pub fn k_squared(&self, i: usize) -> f64 {
        let idx = self.lattice(i);
        let mut k2 = 0.0;
        for d in 0..self.dim {
            let k = self.wavenumber(idx[d]);
            k2 += k * k;
        }
        k2
    }

    /// Minimum-image displacement between lattice sites `i` and `j` (coords of i minus j).
    pub fn min_image(&self, i: usize, j: usize) -> [f64; 3] {
        let g = self.points_per_dim as i64;
        let dx = self.spacing();
        let a = self.lattice(i);
        let b = self.lattice(j);
        let mut out = [0.0; 3];
        for d in 0..self.dim {
            let mut diff = a[d] as i64 - b[d] as i64;
            if diff >= g / 2 {
                diff -= g;
            } else if diff < -(g / 2) {
                diff += g;
            }
            out[d] = diff as f64 * dx;
        }
        out
    }

    /// Euclidean length of the minimum-image displacement.
    pub fn pair_distance(&self, i: usize, j: usize) -> f64 {
        let d = self.min_image(i, j);
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    /// Grid with doubled resolution per axis (for half-step midpoints).
    pub fn doubled(&self) -> Grid {
        Grid { dim: self.dim, points_per_dim: 2 * self.points_per_dim, box_length: self.box_length }
    }
}

fn plan(len: usize, inverse: bool) -> Arc<dyn rustfft::Fft<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    let mut planner = PLANNER.get_or_init(|| Mutex::new(FftPlanner::new())).lock().unwrap();
    if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    }
}

struct SendPtr(*mut Complex64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

impl SendPtr {
    fn get(&self) -> *mut Complex64 {
        self.0
    }
}

/// In-place FFT along every axis. Forward transform is unnormalized;
/// the inverse carries the 1/M factor so that ifft(fft(x)) == x.
pub fn fft_nd(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let g = grid.points_per_dim;
    let m = grid.mode_count();
    assert_eq!(data.len(), m, "field length does not match grid");
    for axis in 0..grid.dim {
        fft_axis(grid, data, axis, inverse);
    }
    if inverse {
        let scale = 1.0 / m as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
    let _ = g;
}

fn fft_axis(grid: &Grid, data: &mut [Complex64], axis: usize, inverse: bool) {
    let g = grid.points_per_dim;
    let m = grid.mode_count();
    let fft = plan(g, inverse);
    // stride between consecutive elements along `axis` in row-major layout
    let stride = g.pow((grid.dim - 1 - axis) as u32);
    let n_lines = m / g;
    if stride == 1 {
        data.par_chunks_mut(g).for_each(|line| fft.process(line));
        return;
    }
    // Lines are interleaved; gather/scatter through a raw pointer. Each line
    // index touches a disjoint set of elements, so parallel access is sound.
    let ptr = SendPtr(data.as_mut_ptr());
    (0..n_lines).into_par_iter().for_each(|line| {
        // decompose line index into (block, offset) around the strided axis
        let block = line / stride;
        let offset = line % stride;
        let base = block * stride * g + offset;
        let mut buf = vec![Complex64::default(); g];
        let p = ptr.get();
        unsafe {
            for t in 0..g {
                buf[t] = *p.add(base + t * stride);
            }
            fft.process(&mut buf);
            for t in 0..g {
                *p.add(base + t * stride) = buf[t];
            }
        }
    });
}

/// Complex field sampled on a periodic grid.
#[derive(Clone, Debug)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl GridField {
    pub fn zero(grid: Grid) -> Self {
        GridField { grid, values: vec![Complex64::default(); grid.mode_count()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> Complex64) -> Self {
        let values = (0..grid.mode_count()).map(|i| f(grid.coords(i))).collect();
        GridField { grid, values }
    }

    /// Normalized plane wave exp(i k.x)/L^(dim/2) for integer mode numbers.
    pub fn plane_wave(grid: Grid, mode: [i64; 3]) -> Self {
        let amp = grid.box_length.powf(-(grid.dim as f64) / 2.0);
        let kvec: Vec<f64> = (0..grid.dim).map(|d| 2.0 * PI * mode[d] as f64 / grid.box_length).collect();
        GridField::from_fn(grid, |x| {
            let phase: f64 = (0..grid.dim).map(|d| kvec[d] * x[d]).sum();
            Complex64::from_polar(amp, phase)
        })
    }

    /// Unit-mass Gaussian bump centered in the box, width `sigma` in amplitude.
    pub fn gaussian(grid: Grid, sigma: f64) -> Self {
        let c = grid.box_length / 2.0;
        let g2 = 2.0 * sigma * sigma;
        let mut out = GridField::from_fn(grid, |x| {
            let mut r2 = 0.0;
            for d in 0..grid.dim {
                let mut u = x[d] - c;
                // minimum image so the bump is exactly periodic
                if u > grid.box_length / 2.0 {
                    u -= grid.box_length;
                }
                r2 += u * u;
            }
            Complex64::new((-r2 / g2).exp(), 0.0)
        });
        out.normalize();
        out
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (self.grid.weight() * s).sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.l2_norm();
        if n > 0.0 {
            let s = 1.0 / n;
            self.values.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Weighted inner product <a, b> = w * sum conj(a) b.
    pub fn inner(&self, other: &GridField) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.weight())
    }

    pub fn check_same_grid(&self, other: &GridField) -> Result<()> {
        if self.grid != other.grid {
            return Err(CoreError::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    pub fn fft(&self) -> Vec<Complex64> {
        let mut out = self.values.clone();
        fft_nd(&self.grid, &mut out, false);
        out
    }

    /// Spectral H^n norm, n in 0..=4.
    pub fn sobolev_norm(&self, n: usize) -> Result<f64> {
        if n > 4 {
            return Err(CoreError::SobolevOrder(n));
        }
        let hat = self.fft();
        let m = self.grid.mode_count() as f64;
        let mut acc = 0.0;
        for (i, v) in hat.iter().enumerate() {
            let k2 = self.grid.k_squared(i);
            acc += (1.0 + k2).powi(n as i32) * v.norm_sqr();
        }
        Ok((self.grid.weight() / m * acc).sqrt())
    }

    /// Weighted L2 distance to another field on the same grid.
    pub fn l2_distance(&self, other: &GridField) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((self.grid.weight() * s).sqrt())
    }

    /// -Laplacian, evaluated spectrally.
    pub fn neg_laplacian(&self) -> GridField {
        let mut hat = self.fft();
        for (i, v) in hat.iter_mut().enumerate() {
            *v *= self.grid.k_squared(i);
        }
        fft_nd(&self.grid, &mut hat, true);
        GridField { grid: self.grid, values: hat }
    }

    /// Partial derivative along axis `d`, evaluated spectrally.
    pub fn gradient_component(&self, d: usize) -> GridField {
        let mut hat = self.fft();
        let g = self.grid.points_per_dim;
        for (i, v) in hat.iter_mut().enumerate() {
            let idx = self.grid.lattice(i);
            let k = self.grid.wavenumber(idx[d]);
            *v *= Complex64::new(0.0, k);
        }
        fft_nd(&self.grid, &mut hat, true);
        let _ = g;
        GridField { grid: self.grid, values: hat }
    }

    /// Exact trigonometric interpolation onto the doubled grid.
    /// Nyquist coefficients are split between the +/- slots.
    pub fn upsample_double(&self) -> GridField {
        let fine = self.grid.doubled();
        let coarse_hat = self.fft();
        let g = self.grid.points_per_dim;
        let gf = fine.points_per_dim;
        let mut fine_hat = vec![Complex64::default(); fine.mode_count()];
        // per-axis image slots of a coarse index: (fine index, weight)
        let images = |mc: usize| -> Vec<(usize, f64)> {
            let s = if mc < g / 2 { mc as i64 } else { mc as i64 - g as i64 };
            if s == -(g as i64) / 2 {
                vec![
                    ((gf as i64 + s) as usize, 0.5),
                    ((g / 2) as usize, 0.5),
                ]
            } else if s >= 0 {
                vec![(s as usize, 1.0)]
            } else {
                vec![((gf as i64 + s) as usize, 1.0)]
            }
        };
        for (i, &v) in coarse_hat.iter().enumerate() {
            let idx = self.grid.lattice(i);
            let mut slots: Vec<([usize; 3], f64)> = vec![([0; 3], 1.0)];
            for d in 0..self.grid.dim {
                let mut next = Vec::with_capacity(slots.len() * 2);
                for (base, wgt) in &slots {
                    for (fi, fw) in images(idx[d]) {
                        let mut b = *base;
                        b[d] = fi;
                        next.push((b, wgt * fw));
                    }
                }
                slots = next;
            }
            for (b, wgt) in slots {
                fine_hat[fine.flat(b)] += v * wgt;
            }
        }
        // inverse normalized by the coarse mode count so point values carry over
        fft_nd(&fine, &mut fine_hat, true);
        let scale = (fine.mode_count() / self.grid.mode_count()) as f64;
        fine_hat.iter_mut().for_each(|v| *v *= scale);
        GridField { grid: fine, values: fine_hat }
    }

    /// Band-limited restriction onto a coarser grid (mode truncation).
    pub fn restrict(&self, coarse: Grid) -> Result<GridField> {
        if coarse.dim != self.grid.dim
            || coarse.box_length != self.grid.box_length
            || coarse.points_per_dim > self.grid.points_per_dim
        {
            return Err(CoreError::GridMismatch("restrict target must be a coarser grid of the same box".into()));
        }
        if coarse.points_per_dim == self.grid.points_per_dim {
            return Ok(self.clone());
        }
        let hat = self.fft();
        let gc = coarse.points_per_dim;
        let gf = self.grid.points_per_dim;
        let mut coarse_hat = vec![Complex64::default(); coarse.mode_count()];
        for (i, v) in coarse_hat.iter_mut().enumerate() {
            let idx = coarse.lattice(i);
            // fine-grid images of each coarse axis index; the coarse Nyquist
            // slot collects both +G/2 and -G/2 fine modes
            let mut slots: Vec<[usize; 3]> = vec![[0; 3]];
            for d in 0..coarse.dim {
                let s = if idx[d] < gc / 2 { idx[d] as i64 } else { idx[d] as i64 - gc as i64 };
                let fine: Vec<usize> = if s == -(gc as i64) / 2 {
                    vec![(gf as i64 + s) as usize, gc / 2]
                } else if s >= 0 {
                    vec![s as usize]
                } else {
                    vec![(gf as i64 + s) as usize]
                };
                let mut next = Vec::with_capacity(slots.len() * fine.len());
                for base in &slots {
                    for &fi in &fine {
                        let mut b = *base;
                        b[d] = fi;
                        next.push(b);
                    }
                }
                slots = next;
            }
            for b in slots {
                *v += hat[self.grid.flat(b)];
            }
        }
        fft_nd(&coarse, &mut coarse_hat, true);
        let scale = coarse.mode_count() as f64 / self.grid.mode_count() as f64;
        coarse_hat.iter_mut().for_each(|v| *v *= scale);
        Ok(GridField { grid: coarse, values: coarse_hat })
    }
}
