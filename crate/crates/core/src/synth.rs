//! Synthetic study area: smooth predictor rasters, a forest-type map with
//! two regimes, an analytic basal-area truth, local plot networks inside
//! disjoint sub-forest blocks and a regional network over the whole area.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ForestType, Plot, PlotTable};
use crate::raster::{RasterGrid, RasterStack, DEFAULT_NODATA};
use crate::rng::{derive_seed, stage, stream_rng};

/// Continuous predictors with their physical mean and standard deviation.
pub const PREDICTORS: [(&str, f64, f64); 8] = [
    ("volin", 6000.0, 2000.0),
    ("gap_ratio", 0.3, 0.1),
    ("b11", 1500.0, 300.0),
    ("b12", 800.0, 200.0),
    ("zmean", 15.0, 5.0),
    ("zq50", 16.0, 6.0),
    ("canopy_closure", 0.7, 0.1),
    ("p2th", 0.85, 0.05),
];

const BUMPS: usize = 10;
const BACKGROUND_WEIGHT: f64 = 0.7;
const FOREST_TYPE_THRESHOLD: f64 = 0.4;
/// Share of the area masked as non-forest.
const MASK_QUANTILE_Z: f64 = -1.2816;

/// Basal-area truth coefficients, m²/ha.
const BA_BASE: f64 = 27.0;
const BA_VOLUME: f64 = 16.0;
const BA_GAP: f64 = 5.0;
const BA_STEEPNESS: f64 = 0.8;
const BA_TYPE_OFFSET: [f64; 3] = [-4.0, 0.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub aoi_width_km: f64,
    pub aoi_height_km: f64,
    pub cellsize_m: f64,
    pub n_subforests: usize,
    pub plots_per_subforest: usize,
    /// Side of each square sub-forest block.
    pub block_km: f64,
    pub regional_plots: usize,
    /// Covariate-shift magnitude per sub-forest, in predictor sd units.
    pub shift: f64,
    /// Plot measurement noise sd, m²/ha.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            aoi_width_km: 61.44,
            aoi_height_km: 61.44,
            cellsize_m: 120.0,
            n_subforests: 5,
            plots_per_subforest: 200,
            block_km: 8.0,
            regional_plots: 600,
            shift: 0.7,
            noise_sd: 4.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Sub-forest slots laid out on a near-square grid.
    fn layout(&self) -> (usize, usize) {
        let cols = (self.n_subforests as f64).sqrt().ceil() as usize;
        (cols, self.n_subforests.div_ceil(cols))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("aoi_width_km", self.aoi_width_km),
            ("aoi_height_km", self.aoi_height_km),
            ("cellsize_m", self.cellsize_m),
            ("block_km", self.block_km),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_subforests == 0 || self.plots_per_subforest == 0 || self.regional_plots == 0 {
            return Err(Error::InvalidConfig("plot and sub-forest counts must be positive".into()));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::InvalidConfig(format!("noise sd must be >= 0, got {}", self.noise_sd)));
        }
        if !(self.shift.is_finite() && self.shift >= 0.0) {
            return Err(Error::InvalidConfig(format!("shift must be >= 0, got {}", self.shift)));
        }
        let (cols, rows) = self.layout();
        if self.block_km * cols as f64 > self.aoi_width_km || self.block_km * rows as f64 > self.aoi_height_km {
            return Err(Error::InvalidConfig(format!(
                "{} blocks of {} km do not fit in a {} x {} km area",
                self.n_subforests, self.block_km, self.aoi_width_km, self.aoi_height_km
            )));
        }
        let (nc, nr) = self.grid_size();
        if nc == 0 || nr == 0 {
            return Err(Error::InvalidConfig("cellsize larger than the area".into()));
        }
        Ok(())
    }

    fn grid_size(&self) -> (usize, usize) {
        (
            (self.aoi_width_km * 1000.0 / self.cellsize_m).round() as usize,
            (self.aoi_height_km * 1000.0 / self.cellsize_m).round() as usize,
        )
    }
}

/// Axis-aligned rectangle in map units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Block {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.xmin && x <= self.xmax && y >= self.ymin && y <= self.ymax
    }

    fn center(&self) -> (f64, f64) {
        (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }

    /// Pixel window `(row0, col0, nrows, ncols)` of the cells whose centers
    /// fall inside the block.
    pub fn window(&self, grid: &RasterGrid) -> (usize, usize, usize, usize) {
        let cs = grid.cellsize;
        let col0 = ((self.xmin - grid.xllcorner) / cs).round().max(0.0) as usize;
        let col1 = (((self.xmax - grid.xllcorner) / cs).round() as usize).min(grid.ncols);
        let top = grid.yllcorner + grid.nrows as f64 * cs;
        let row0 = ((top - self.ymax) / cs).round().max(0.0) as usize;
        let row1 = (((top - self.ymin) / cs).round() as usize).min(grid.nrows);
        (row0, col0, row1.saturating_sub(row0), col1.saturating_sub(col0))
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    /// One table per sub-forest, named `forest1`, `forest2`, ...
    pub locals: Vec<PlotTable>,
    pub regional: PlotTable,
    pub stack: RasterStack,
    /// Noise-free basal area; nodata outside the forest mask.
    pub truth: RasterGrid,
    pub blocks: Vec<Block>,
}

/// Noise-free basal area from standardized volume and gap fields.
pub fn true_ba(volume_z: f64, gap_z: f64, forest_type: ForestType) -> f64 {
    let v = BA_BASE + BA_VOLUME * (BA_STEEPNESS * volume_z).tanh() - BA_GAP * (BA_STEEPNESS * gap_z).tanh()
        + BA_TYPE_OFFSET[forest_type.index()];
    v.max(0.0)
}

#[derive(Debug, Clone, Copy)]
struct Bump {
    x: f64,
    y: f64,
    sigma: f64,
    amplitude: f64,
}

struct Geometry {
    ncols: usize,
    nrows: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Geometry {
    /// Sum of bumps at every cell center, evaluated separably.
    fn field(&self, bumps: &[Bump]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols * self.nrows];
        for b in bumps {
            let s2 = 2.0 * b.sigma * b.sigma;
            let ex: Vec<f64> = self.xs.iter().map(|x| (-(x - b.x) * (x - b.x) / s2).exp()).collect();
            for (r, y) in self.ys.iter().enumerate() {
                let ey = b.amplitude * (-(y - b.y) * (y - b.y) / s2).exp();
                for (v, e) in out[r * self.ncols..(r + 1) * self.ncols].iter_mut().zip(&ex) {
                    *v += ey * e;
                }
            }
        }
        out
    }

    /// Flat-topped window centred on `block`: about 0.87 at the block
    /// edges, decaying to zero within one block width outside.
    fn taper(&self, block: &Block) -> Vec<f64> {
        let (cx, cy) = block.center();
        let h = 0.75 * (block.xmax - block.xmin);
        let f = |d: f64| (d / h).powi(4);
        let ex: Vec<f64> = self.xs.iter().map(|x| f(x - cx)).collect();
        let mut out = Vec::with_capacity(self.ncols * self.nrows);
        for y in &self.ys {
            let ey = f(y - cy);
            out.extend(ex.iter().map(|e| (-(e + ey) * std::f64::consts::LN_2).exp()));
        }
        out
    }
}

/// Standardize `values` using the mean and population sd over `mask`.
fn standardize_over(values: &mut [f64], mask: impl Fn(usize) -> bool) {
    let (mut n, mut sum) = (0usize, 0.0);
    for (i, v) in values.iter().enumerate() {
        if mask(i) {
            n += 1;
            sum += v;
        }
    }
    let mean = sum / n as f64;
    let var = values
        .iter()
        .enumerate()
        .filter(|(i, _)| mask(*i))
        .map(|(_, v)| (v - mean) * (v - mean))
        .sum::<f64>()
        / n as f64;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    for v in values.iter_mut() {
        *v = (*v - mean) / sd;
    }
}

fn random_bumps(rng: &mut ChaCha8Rng, n: usize, area: &Block, sigma: (f64, f64)) -> Vec<Bump> {
    (0..n)
        .map(|_| Bump {
            x: rng.gen_range(area.xmin..area.xmax),
            y: rng.gen_range(area.ymin..area.ymax),
            sigma: rng.gen_range(sigma.0..sigma.1),
            amplitude: StandardNormal.sample(rng),
        })
        .collect()
}

/// Raw field recipe for one latent component.
struct LatentRecipe {
    background: Vec<Bump>,
    /// Local bumps per block; empty for non-predictor components.
    local: Vec<Vec<Bump>>,
    /// Mean offset per block.
    offsets: Vec<f64>,
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let seed = derive_seed(cfg.seed, &[stage::SYNTH]);
    let (ncols, nrows) = cfg.grid_size();
    let (xll, yll) = (600_000.0, 6_600_000.0);
    let geometry_grid = RasterGrid::new(ncols, nrows, xll, yll, cfg.cellsize_m, DEFAULT_NODATA, vec![0.0; ncols * nrows])?;
    let aoi = Block {
        name: "aoi".into(),
        xmin: xll,
        ymin: yll,
        xmax: xll + ncols as f64 * cfg.cellsize_m,
        ymax: yll + nrows as f64 * cfg.cellsize_m,
    };
    let geo = Geometry {
        ncols,
        nrows,
        xs: (0..ncols).map(|c| geometry_grid.cell_center(0, c).0).collect(),
        ys: (0..nrows).map(|r| geometry_grid.cell_center(r, 0).1).collect(),
    };

    let blocks = layout_blocks(cfg, &aoi);
    let n_cells = ncols * nrows;
    let mut rng = stream_rng(seed, 0);
    let k = PREDICTORS.len();
    let aoi_km = cfg.aoi_width_km.max(cfg.aoi_height_km);
    let bg_sigma = (0.1 * aoi_km * 1000.0, 0.22 * aoi_km * 1000.0);
    let local_sigma = (0.12 * cfg.block_km * 1000.0, 0.3 * cfg.block_km * 1000.0);

    // latent components: predictors, then forest type, then the forest mask
    let mut recipes = Vec::with_capacity(k + 2);
    for c in 0..k + 2 {
        let background = random_bumps(&mut rng, BUMPS, &aoi, bg_sigma);
        let mut local = Vec::new();
        let mut offsets = Vec::new();
        for (b, block) in blocks.iter().enumerate() {
            let pad = 1000.0;
            let area = Block {
                name: String::new(),
                xmin: block.xmin - pad,
                ymin: block.ymin - pad,
                xmax: block.xmax + pad,
                ymax: block.ymax + pad,
            };
            if c <= k {
                local.push(random_bumps(&mut rng, BUMPS, &area, local_sigma));
            }
            if c < k {
                let z: f64 = StandardNormal.sample(&mut rng);
                offsets.push(cfg.shift * z);
            } else if c == k {
                // two regimes: broadleaf-leaning and conifer-leaning blocks
                offsets.push(if b % 2 == 0 { -0.6 } else { 0.6 });
            }
        }
        if c < k {
            // shifts are relative to the mean over sub-forests
            let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
            offsets.iter_mut().for_each(|o| *o -= mean);
        }
        recipes.push(LatentRecipe {
            background,
            local,
            offsets,
        });
    }

    let tapers: Vec<Vec<f64>> = blocks.iter().map(|b| geo.taper(b)).collect();
    let latent: Vec<Vec<f64>> = recipes
        .par_iter()
        .enumerate()
        .map(|(c, r)| {
            let mut out = geo.field(&r.background);
            standardize_over(&mut out, |_| true);
            let w = if c < k { BACKGROUND_WEIGHT } else { 0.8 };
            out.iter_mut().for_each(|v| *v *= w);
            let bg = out.clone();
            for (b, block) in blocks.iter().enumerate() {
                let inside = |i: usize| block.contains(geo.xs[i % ncols], geo.ys[i / ncols]);
                // block mean set by the offset alone for predictors
                let recentre = if c < k {
                    let (n, sum) = bg
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| inside(*i))
                        .fold((0usize, 0.0), |(n, s), (_, v)| (n + 1, s + v));
                    sum / n as f64
                } else {
                    0.0
                };
                let mut local = match r.local.get(b) {
                    Some(bumps) => {
                        let mut l = geo.field(bumps);
                        standardize_over(&mut l, inside);
                        l
                    }
                    None => vec![0.0; n_cells],
                };
                let offset = r.offsets.get(b).copied().unwrap_or(0.0) - recentre;
                for ((v, l), t) in out.iter_mut().zip(local.iter_mut()).zip(&tapers[b]) {
                    *v += t * (*l + offset);
                }
            }
            out
        })
        .collect();

    // observed predictors mix the latent components (correlated metrics)
    let mix = |p: usize, i: usize| -> f64 {
        let g = |c: usize| latent[c][i];
        match p {
            4 => 0.6 * g(0) + 0.8 * g(4),
            5 => 0.6 * g(0) + 0.8 * g(5),
            6 => -0.6 * g(1) + 0.8 * g(6),
            _ => g(p),
        }
    };
    let forest_type: Vec<Option<ForestType>> = (0..n_cells)
        .map(|i| {
            if latent[k + 1][i] < MASK_QUANTILE_Z {
                None
            } else {
                let t = latent[k][i];
                Some(if t < -FOREST_TYPE_THRESHOLD {
                    ForestType::Broadleaves
                } else if t > FOREST_TYPE_THRESHOLD {
                    ForestType::Conifers
                } else {
                    ForestType::Mixed
                })
            }
        })
        .collect();

    let bands: Vec<(String, RasterGrid)> = PREDICTORS
        .iter()
        .enumerate()
        .map(|(p, &(name, mean, sd))| {
            let values = (0..n_cells).map(|i| mean + sd * mix(p, i)).collect();
            Ok((name.to_string(), geometry_grid.with_values(values)?))
        })
        .collect::<Result<_>>()?;
    let ft_grid = geometry_grid.with_values(
        forest_type
            .iter()
            .map(|f| f.map_or(DEFAULT_NODATA, |f| f.code() as f64))
            .collect(),
    )?;
    let truth = geometry_grid.with_values(
        (0..n_cells)
            .map(|i| forest_type[i].map_or(DEFAULT_NODATA, |f| true_ba(mix(0, i), mix(1, i), f)))
            .collect(),
    )?;
    let stack = RasterStack::new(bands, ft_grid)?;

    let sample_table = |name: String, prefix: &str, n: usize, area: &Block, stream: u64| -> Result<PlotTable> {
        let mut rng = stream_rng(seed, stream);
        let mut plots = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while plots.len() < n {
            attempts += 1;
            if attempts > 1000 * n {
                return Err(Error::InvalidConfig(format!("{name}: too few forest cells to place plots")));
            }
            let x = rng.gen_range(area.xmin..area.xmax);
            let y = rng.gen_range(area.ymin..area.ymax);
            let Some((r, c)) = truth.cell_at(x, y) else { continue };
            let i = r * ncols + c;
            let Some(ft) = forest_type[i] else { continue };
            let z: f64 = StandardNormal.sample(&mut rng);
            let noise = cfg.noise_sd * z;
            plots.push(Plot {
                id: format!("{prefix}_{:04}", plots.len() + 1),
                x,
                y,
                ba: (truth.values[i] + noise).max(0.0),
                features: stack.bands().iter().map(|(_, g)| g.values[i]).collect(),
                forest_type: ft,
            });
        }
        PlotTable::new(name, PREDICTORS.iter().map(|p| p.0.to_string()).collect(), plots)
    };

    let locals = blocks
        .iter()
        .enumerate()
        .map(|(b, block)| sample_table(block.name.clone(), &block.name, cfg.plots_per_subforest, block, 1 + b as u64))
        .collect::<Result<Vec<_>>>()?;
    let regional = sample_table("regional".into(), "regional", cfg.regional_plots, &aoi, 0xFFFF)?;

    Ok(SynthData {
        locals,
        regional,
        stack,
        truth,
        blocks,
    })
}

fn layout_blocks(cfg: &SynthConfig, aoi: &Block) -> Vec<Block> {
    let (cols, rows) = cfg.layout();
    let slot_w = (aoi.xmax - aoi.xmin) / cols as f64;
    let slot_h = (aoi.ymax - aoi.ymin) / rows as f64;
    let half = 0.5 * cfg.block_km * 1000.0;
    (0..cfg.n_subforests)
        .map(|b| {
            let (c, r) = (b % cols, b / cols);
            let cx = aoi.xmin + (c as f64 + 0.5) * slot_w;
            let cy = aoi.ymax - (r as f64 + 0.5) * slot_h;
            Block {
                name: format!("forest{}", b + 1),
                xmin: cx - half,
                ymin: cy - half,
                xmax: cx + half,
                ymax: cy + half,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mean_sd;

    fn small() -> SynthConfig {
        SynthConfig {
            aoi_width_km: 20.0,
            aoi_height_km: 12.0,
            cellsize_m: 200.0,
            n_subforests: 3,
            plots_per_subforest: 40,
            block_km: 4.0,
            regional_plots: 60,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn default_regional_ba_matches_reference_ranges() {
        let d = synth_generate(&SynthConfig::default()).unwrap();
        for t in d.locals.iter().chain([&d.regional]) {
            let (m, s) = mean_sd(&t.ba());
            assert!((20.0..=32.0).contains(&m), "{} mean {m}", t.name());
            assert!((8.0..=14.0).contains(&s), "{} sd {s}", t.name());
        }
        assert_eq!(d.stack.geometry().ncols, 512);
    }

    #[test]
    fn noiseless_plots_equal_truth() {
        let d = synth_generate(&SynthConfig {
            noise_sd: 0.0,
            ..small()
        })
        .unwrap();
        for t in d.locals.iter().chain([&d.regional]) {
            for p in t.plots() {
                assert_eq!(p.ba, d.truth.sample(p.x, p.y).unwrap());
            }
        }
    }

    #[test]
    fn plots_lie_in_their_blocks() {
        let d = synth_generate(&small()).unwrap();
        let g = d.stack.geometry();
        for (t, b) in d.locals.iter().zip(&d.blocks) {
            assert_eq!(t.len(), 40);
            assert!(t.plots().iter().all(|p| b.contains(p.x, p.y)));
        }
        for p in d.regional.plots() {
            assert!(g.cell_at(p.x, p.y).is_some());
        }
        for (i, a) in d.blocks.iter().enumerate() {
            for b in &d.blocks[i + 1..] {
                assert!(a.xmax <= b.xmin || b.xmax <= a.xmin || a.ymax <= b.ymin || b.ymax <= a.ymin);
            }
        }
    }

    #[test]
    fn plot_features_match_rasters() {
        let d = synth_generate(&small()).unwrap();
        let p = &d.locals[1].plots()[3];
        for ((_, g), v) in d.stack.bands().iter().zip(&p.features) {
            assert_eq!(g.sample(p.x, p.y).unwrap(), *v);
        }
        assert_eq!(d.stack.forest_type().sample(p.x, p.y).unwrap(), p.forest_type.code() as f64);
    }

    #[test]
    fn same_seed_same_data() {
        let a = synth_generate(&small()).unwrap();
        let b = synth_generate(&small()).unwrap();
        assert_eq!(a.regional, b.regional);
        assert_eq!(a.locals, b.locals);
        assert_eq!(a.truth, b.truth);
        let c = synth_generate(&SynthConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.regional, c.regional);
    }

    #[test]
    fn block_window_covers_block() {
        let d = synth_generate(&small()).unwrap();
        let g = d.stack.geometry();
        let (r0, c0, nr, nc) = d.blocks[0].window(g);
        assert_eq!((nr, nc), (20, 20));
        let (x, y) = g.cell_center(r0, c0);
        assert!(d.blocks[0].contains(x, y));
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            SynthConfig { noise_sd: -1.0, ..small() },
            SynthConfig { n_subforests: 0, ..small() },
            SynthConfig { block_km: 15.0, ..small() },
            SynthConfig { cellsize_m: 0.0, ..small() },
        ] {
            assert!(matches!(synth_generate(&cfg), Err(Error::InvalidConfig(_))));
        }
    }
}
