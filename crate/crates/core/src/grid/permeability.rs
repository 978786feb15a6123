use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CellBox, CellField, StructuredGrid};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Diagonal permeability tensor `(K11, K22, K33)` per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct PermeabilityField<T> {
    grid: StructuredGrid<T>,
    comps: [Vec<T>; 3],
}

impl<T: Real> PermeabilityField<T> {
    pub fn new(grid: StructuredGrid<T>, comps: [Vec<T>; 3]) -> Result<Self> {
        let n = grid.cell_count();
        for (a, comp) in comps.iter().enumerate() {
            if comp.len() != n {
                return Err(Error::CountMismatch { expected: n, found: comp.len() });
            }
            if let Some((i, v)) =
                comp.iter().enumerate().find(|(_, v)| !(**v > T::zero()) || !v.is_finite())
            {
                return Err(Error::NonPositivePermeability {
                    index: a * n + i,
                    value: v.to_f64_lossy(),
                });
            }
        }
        Ok(Self { grid, comps })
    }

    pub fn homogeneous(grid: StructuredGrid<T>, k: [T; 3]) -> Result<Self> {
        let n = grid.cell_count();
        Self::new(grid, k.map(|v| vec![v; n]))
    }

    pub fn isotropic(grid: StructuredGrid<T>, values: Vec<T>) -> Result<Self> {
        Self::new(grid, [values.clone(), values.clone(), values])
    }

    #[inline]
    pub fn grid(&self) -> &StructuredGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn component(&self, axis: usize) -> &[T] {
        &self.comps[axis]
    }

    #[inline]
    pub fn get(&self, cell: usize, axis: usize) -> T {
        self.comps[axis][cell]
    }

    pub fn restrict(&self, cells: &CellBox) -> Result<Self> {
        let sub = self.grid.subgrid(cells)?;
        let idx = cells.cells(&self.grid);
        let comps = [0, 1, 2].map(|a| idx.iter().map(|&c| self.comps[a][c]).collect());
        Ok(Self { grid: sub, comps })
    }

    /// Componentwise product with a positive cell field (e.g. total mobility).
    pub fn scaled_by(&self, factor: &CellField<T>) -> Result<Self> {
        if !factor.grid().same_shape(&self.grid) {
            return Err(Error::ShapeMismatch("mobility field does not match permeability".into()));
        }
        let comps = [0, 1, 2].map(|a| {
            self.comps[a].iter().zip(factor.values()).map(|(&k, &s)| k * s).collect()
        });
        Self::new(self.grid, comps)
    }

    pub fn min(&self) -> T {
        self.comps.iter().flatten().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max(&self) -> T {
        self.comps.iter().flatten().fold(T::zero(), |m, &v| m.max(v))
    }

    /// Ratio of the largest to the smallest component value.
    pub fn contrast(&self) -> T {
        self.max() / self.min()
    }

    /// Volume-weighted mean of one component.
    pub fn mean(&self, axis: usize) -> T {
        self.comps[axis].iter().copied().sum::<T>() / T::count(self.grid.cell_count())
    }

    /// Piecewise-constant prolongation onto a grid refined by integer factors.
    ///
    /// This is the L2 projection onto the refined piecewise-constant space, so
    /// every component keeps its volume-weighted mean.
    pub fn refine(&self, factors: [usize; 3]) -> Result<Self> {
        let fine = self.grid.refined(factors)?;
        let comps = [0, 1, 2].map(|a| {
            (0..fine.cell_count())
                .map(|c| {
                    let ijk = fine.cell_coords(c);
                    let coarse = [0, 1, 2].map(|d| ijk[d] / factors[d]);
                    self.comps[a][self.grid.cell_index(coarse)]
                })
                .collect()
        });
        Ok(Self { grid: fine, comps })
    }

    /// Componentwise power `K -> K^theta`, which maps the contrast `c` to `c^theta`.
    pub fn apply_contrast_exponent(&self, theta: T) -> Result<Self> {
        if !(theta >= T::zero()) {
            return Err(invalid(format!("contrast exponent must be >= 0, got {theta}")));
        }
        let comps = [0, 1, 2].map(|a| self.comps[a].iter().map(|&k| k.powf(theta)).collect());
        Self::new(self.grid, comps)
    }

    /// Synthetic channelized field: a smooth lognormal background with
    /// sinuous high-permeability channels, rescaled so that the global
    /// max/min ratio equals `contrast`. Bit-reproducible per seed.
    pub fn generate_channel_field(
        seed: u64,
        grid: StructuredGrid<T>,
        contrast: f64,
    ) -> Result<Self> {
        Self::generate_with(seed, grid, &ChannelFieldParams { contrast, ..Default::default() })
    }

    pub fn generate_with(
        seed: u64,
        grid: StructuredGrid<T>,
        params: &ChannelFieldParams,
    ) -> Result<Self> {
        if !(params.contrast >= 1.0) || !params.contrast.is_finite() {
            return Err(invalid(format!("contrast must be >= 1, got {}", params.contrast)));
        }
        let n = grid.cell_count();
        if params.contrast == 1.0 {
            return Self::homogeneous(grid, [T::one(); 3]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ext = grid.extents().map(|v| v.to_f64_lossy());
        let centers: Vec<[f64; 3]> =
            (0..n).map(|c| grid.cell_center(c).map(|v| v.to_f64_lossy())).collect();

        // Background: random superposition of low wavenumber cosines.
        let modes: Vec<([f64; 3], f64, f64)> = (0..params.modes.max(1))
            .map(|_| {
                let mut k = [0.0; 3];
                while k == [0.0; 3] {
                    k = [0, 1, 2].map(|_| rng.gen_range(0..=4) as f64);
                }
                (k, rng.gen_range(0.5..1.0), rng.gen_range(0.0..TAU))
            })
            .collect();
        let mut bg: Vec<f64> = centers
            .iter()
            .map(|x| {
                modes
                    .iter()
                    .map(|(k, amp, ph)| {
                        let arg: f64 = (0..3).map(|a| k[a] * x[a] / ext[a]).sum();
                        amp * (TAU * arg + ph).cos()
                    })
                    .sum()
            })
            .collect();
        let mean = bg.iter().sum::<f64>() / n as f64;
        let var = bg.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt().max(f64::MIN_POSITIVE);
        for v in &mut bg {
            *v = params.background_sigma * (*v - mean) / std;
        }
        let (bmin, bmax) = min_max(&bg);
        let span = (bmax - bmin).max(f64::MIN_POSITIVE);

        // Channels: meandering bands along x2 within a layer band in x3.
        struct Channel {
            x0: f64,
            amp: f64,
            freq: f64,
            phase: f64,
            half_width: f64,
            z_lo: f64,
            z_hi: f64,
        }
        let channels: Vec<Channel> = (0..params.channels)
            .map(|_| {
                let thick = rng.gen_range(0.15..0.35) * ext[2];
                let z_lo = rng.gen_range(0.0..(ext[2] - thick).max(f64::MIN_POSITIVE));
                Channel {
                    x0: rng.gen_range(0.15..0.85) * ext[0],
                    amp: rng.gen_range(0.05..0.2) * ext[0],
                    freq: rng.gen_range(0.5..2.0),
                    phase: rng.gen_range(0.0..TAU),
                    half_width: 0.5 * params.channel_width * ext[0],
                    z_lo,
                    z_hi: z_lo + thick,
                }
            })
            .collect();

        let mut g: Vec<f64> = centers
            .iter()
            .zip(&bg)
            .map(|(x, &b)| {
                let b = (b - bmin) / span;
                let in_channel = channels.iter().any(|ch| {
                    let center = ch.x0 + ch.amp * (TAU * ch.freq * x[1] / ext[1] + ch.phase).sin();
                    (x[0] - center).abs() <= ch.half_width && x[2] >= ch.z_lo && x[2] <= ch.z_hi
                });
                if in_channel {
                    0.8 + 0.2 * b
                } else {
                    0.6 * b
                }
            })
            .collect();
        let (gmin, gmax) = min_max(&g);
        let gspan = gmax - gmin;
        for v in &mut g {
            *v = if gspan > 0.0 { (*v - gmin) / gspan } else { 0.0 };
        }
        let horiz: Vec<T> = g.iter().map(|&v| T::lit(params.contrast.powf(v))).collect();
        let vert: Vec<T> = g
            .iter()
            .map(|&v| T::lit(params.contrast.powf(v * params.vertical_exponent)))
            .collect();
        Self::new(grid, [horiz.clone(), horiz, vert])
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Knobs of the synthetic channelized permeability generator.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelFieldParams {
    /// Target max/min ratio over all components.
    pub contrast: f64,
    pub channels: usize,
    /// Standard deviation of the log background before rescaling.
    pub background_sigma: f64,
    /// Channel width as a fraction of the x1 extent.
    pub channel_width: f64,
    /// Number of background cosine modes.
    pub modes: usize,
    /// K33 = contrast^(g * vertical_exponent) where K11 = K22 = contrast^g.
    pub vertical_exponent: f64,
}

impl Default for ChannelFieldParams {
    fn default() -> Self {
        Self {
            contrast: 1e4,
            channels: 4,
            background_sigma: 1.0,
            channel_width: 0.12,
            modes: 8,
            vertical_exponent: 0.8,
        }
    }
}
