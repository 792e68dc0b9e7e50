//! Calibration envelope: convex hull of the standardized calibration
//! points, mean calibration distance (MCD) and Inside/Near/Far labels.
//!
//! Queries are raw predictor vectors. They are standardized with the
//! calibration set's own means and standard deviations before any hull or
//! distance computation.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdtree::{distance, KdTree};
use crate::lp::{extreme_points, in_convex_hull, GEOMETRY_EPS};
use crate::model::{PlotTable, Standardizer};

pub const ENVELOPE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtrapolationClass {
    Inside,
    /// Outside the hull, nearest calibration point within MCD.
    Near { distance: f64 },
    /// Outside the hull, nearest calibration point beyond MCD.
    Far { distance: f64 },
}

impl ExtrapolationClass {
    /// Raster code: 0 inside, 1 near, 2 far.
    pub fn code(&self) -> u8 {
        match self {
            ExtrapolationClass::Inside => 0,
            ExtrapolationClass::Near { .. } => 1,
            ExtrapolationClass::Far { .. } => 2,
        }
    }

    pub fn distance(&self) -> Option<f64> {
        match *self {
            ExtrapolationClass::Inside => None,
            ExtrapolationClass::Near { distance } | ExtrapolationClass::Far { distance } => Some(distance),
        }
    }

    pub fn is_exterior(&self) -> bool {
        !matches!(self, ExtrapolationClass::Inside)
    }
}

/// Affine span of the calibration points, used when they do not span the
/// full predictor space.
#[derive(Debug, Clone)]
struct AffineFrame {
    origin: Vec<f64>,
    /// Orthonormal basis vectors of the span.
    basis: Vec<Vec<f64>>,
    reduced_points: Vec<Vec<f64>>,
}

impl AffineFrame {
    fn coords(&self, q: &[f64]) -> (Vec<f64>, f64) {
        let centered: Vec<f64> = q.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        let coords: Vec<f64> = self
            .basis
            .iter()
            .map(|b| b.iter().zip(&centered).map(|(u, v)| u * v).sum())
            .collect();
        let mut resid = centered;
        for (c, b) in coords.iter().zip(&self.basis) {
            for (r, u) in resid.iter_mut().zip(b) {
                *r -= c * u;
            }
        }
        let off = resid.iter().map(|r| r * r).sum::<f64>().sqrt();
        (coords, off)
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationEnvelope {
    predictors: Vec<String>,
    standardizer: Standardizer,
    points: Vec<Vec<f64>>,
    mcd: f64,
    rank: usize,
    frame: Option<AffineFrame>,
    /// Hull vertices in the coordinates the LP works in (full or reduced).
    vertices: Vec<Vec<f64>>,
    index: KdTree,
}

/// Mean Euclidean distance over all unordered pairs.
pub fn mean_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += distance(&points[i], &points[j]);
        }
    }
    sum / (n * (n - 1) / 2) as f64
}

/// Numerical rank of the centered point matrix and its principal axes.
fn affine_rank(points: &[Vec<f64>]) -> (usize, Vec<f64>, Vec<Vec<f64>>) {
    let n = points.len();
    let d = points[0].len();
    let origin: Vec<f64> = (0..d)
        .map(|k| points.iter().map(|p| p[k]).sum::<f64>() / n as f64)
        .collect();
    let m = DMatrix::from_fn(n, d, |i, k| points[i][k] - origin[k]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut axes: Vec<(f64, usize)> = svd.singular_values.iter().copied().zip(0..).collect();
    axes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let largest = axes.first().map_or(0.0, |a| a.0);
    let kept: Vec<Vec<f64>> = axes
        .iter()
        .filter(|(s, _)| largest > 0.0 && *s > GEOMETRY_EPS * largest)
        .map(|&(_, r)| v_t.row(r).iter().copied().collect())
        .collect();
    (kept.len(), origin, kept)
}

impl CalibrationEnvelope {
    /// Envelope over the calibration plots' `predictors`, standardized by
    /// the calibration set itself.
    pub fn build(calib: &PlotTable, predictors: &[String]) -> Result<Self> {
        if calib.len() < 2 {
            return Err(Error::TooFewPlots {
                needed: 2,
                got: calib.len(),
            });
        }
        let standardizer = Standardizer::fit(calib, predictors)?;
        let idx: Vec<usize> = predictors
            .iter()
            .map(|p| calib.predictor_index(p))
            .collect::<Result<_>>()?;
        let raw: Vec<Vec<f64>> = calib
            .plots()
            .iter()
            .map(|p| idx.iter().map(|&j| p.features[j]).collect())
            .collect();
        Self::from_raw_points(standardizer, &raw)
    }

    /// Envelope over raw points with a given standardizer.
    pub fn from_raw_points(standardizer: Standardizer, raw: &[Vec<f64>]) -> Result<Self> {
        let d = standardizer.dim();
        let mut points = Vec::with_capacity(raw.len());
        for r in raw {
            points.push(standardizer.apply(r)?);
        }
        let mcd = mean_pairwise_distance(&points);
        Self::assemble(standardizer, points, mcd, d)
    }

    fn assemble(standardizer: Standardizer, points: Vec<Vec<f64>>, mcd: f64, d: usize) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewPlots {
                needed: 2,
                got: points.len(),
            });
        }
        if d == 0 {
            return Err(Error::InvalidConfig("envelope needs at least one predictor".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("calibration points"));
        }
        let (rank, origin, basis) = affine_rank(&points);
        let frame = (rank < d).then(|| {
            let mut f = AffineFrame {
                origin,
                basis,
                reduced_points: vec![],
            };
            f.reduced_points = points.iter().map(|p| f.coords(p).0).collect();
            f
        });
        let lp_points = frame.as_ref().map_or(&points, |f| &f.reduced_points);
        let vertices = if lp_points.first().is_some_and(|p| p.is_empty()) {
            vec![]
        } else {
            extreme_points(lp_points, GEOMETRY_EPS)
                .into_iter()
                .map(|i| lp_points[i].clone())
                .collect()
        };
        Ok(Self {
            predictors: standardizer.names.clone(),
            index: KdTree::new(points.clone()),
            standardizer,
            points,
            mcd,
            rank,
            frame,
            vertices,
        })
    }

    pub fn predictors(&self) -> &[String] {
        &self.predictors
    }

    pub fn dim(&self) -> usize {
        self.predictors.len()
    }

    pub fn mcd(&self) -> f64 {
        self.mcd
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn is_degenerate(&self) -> bool {
        self.rank < self.dim()
    }

    pub fn affine_rank(&self) -> usize {
        self.rank
    }

    /// Number of calibration points that are hull vertices.
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    fn standardize(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.standardizer.apply(x)
    }

    fn contains_standardized(&self, z: &[f64]) -> bool {
        match &self.frame {
            None => in_convex_hull(&self.vertices, z, GEOMETRY_EPS),
            Some(frame) => {
                let (coords, off) = frame.coords(z);
                if off > GEOMETRY_EPS {
                    return false;
                }
                if frame.basis.is_empty() {
                    return true;
                }
                in_convex_hull(&self.vertices, &coords, GEOMETRY_EPS)
            }
        }
    }

    pub fn in_hull(&self, x: &[f64]) -> Result<bool> {
        Ok(self.contains_standardized(&self.standardize(x)?))
    }

    /// Distance in standardized space to the closest calibration point.
    pub fn nearest_calib_distance(&self, x: &[f64]) -> Result<f64> {
        let z = self.standardize(x)?;
        Ok(self.index.nearest(&z).map_or(f64::INFINITY, |(_, d)| d))
    }

    pub fn classify(&self, x: &[f64]) -> Result<ExtrapolationClass> {
        let z = self.standardize(x)?;
        Ok(self.classify_standardized(&z))
    }

    fn classify_standardized(&self, z: &[f64]) -> ExtrapolationClass {
        if self.contains_standardized(z) {
            return ExtrapolationClass::Inside;
        }
        let distance = self.index.nearest(z).map_or(f64::INFINITY, |(_, d)| d);
        if distance <= self.mcd {
            ExtrapolationClass::Near { distance }
        } else {
            ExtrapolationClass::Far { distance }
        }
    }

    /// Classify many raw query vectors in parallel; output order follows input.
    pub fn classify_all(&self, queries: &[Vec<f64>]) -> Result<Vec<ExtrapolationClass>> {
        queries.par_iter().map(|q| self.classify(q)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&EnvelopeDoc {
            version: ENVELOPE_VERSION,
            standardizer: self.standardizer.clone(),
            points: self.points.clone(),
            mcd: self.mcd,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: EnvelopeDoc = serde_json::from_str(text)?;
        if doc.version != ENVELOPE_VERSION {
            return Err(Error::Version {
                found: doc.version,
                expected: ENVELOPE_VERSION,
            });
        }
        let d = doc.standardizer.dim();
        if doc.points.iter().any(|p| p.len() != d) {
            return Err(Error::InvalidConfig("envelope document: point dimension mismatch".into()));
        }
        Self::assemble(doc.standardizer, doc.points, doc.mcd, d)
    }
}

#[derive(Serialize, Deserialize)]
struct EnvelopeDoc {
    version: u32,
    standardizer: Standardizer,
    /// Standardized calibration points.
    points: Vec<Vec<f64>>,
    mcd: f64,
}

/// Class proportions over a query set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationSummary {
    pub n: usize,
    pub inside: usize,
    pub near: usize,
    pub far: usize,
    /// Mean nearest-calibration distance over exterior queries; `None`
    /// when every query is inside.
    pub mean_distance: Option<f64>,
}

impl ExtrapolationSummary {
    pub fn from_classes<'a>(classes: impl IntoIterator<Item = &'a ExtrapolationClass>) -> Self {
        let mut s = ExtrapolationSummary {
            n: 0,
            inside: 0,
            near: 0,
            far: 0,
            mean_distance: None,
        };
        let mut dist_sum = 0.0;
        for c in classes {
            s.n += 1;
            match c {
                ExtrapolationClass::Inside => s.inside += 1,
                ExtrapolationClass::Near { distance } => {
                    s.near += 1;
                    dist_sum += distance;
                }
                ExtrapolationClass::Far { distance } => {
                    s.far += 1;
                    dist_sum += distance;
                }
            }
        }
        let exterior = s.near + s.far;
        if exterior > 0 {
            s.mean_distance = Some(dist_sum / exterior as f64);
        }
        s
    }

    pub fn prop_inside(&self) -> f64 {
        self.inside as f64 / self.n as f64
    }

    pub fn prop_near(&self) -> f64 {
        self.near as f64 / self.n as f64
    }

    pub fn prop_far(&self) -> f64 {
        self.far as f64 / self.n as f64
    }

    pub fn prop_exterior(&self) -> f64 {
        (self.near + self.far) as f64 / self.n as f64
    }
}

pub fn extrapolation_summary(env: &CalibrationEnvelope, queries: &[Vec<f64>]) -> Result<ExtrapolationSummary> {
    if queries.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    let classes = env.classify_all(queries)?;
    Ok(ExtrapolationSummary::from_classes(&classes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|k| format!("v{k}")).collect()
    }

    fn raw_env(points: &[Vec<f64>]) -> CalibrationEnvelope {
        CalibrationEnvelope::from_raw_points(Standardizer::identity(names(points[0].len())), points).unwrap()
    }

    fn triangle() -> CalibrationEnvelope {
        raw_env(&[vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 4.0]])
    }

    #[test]
    fn mcd_hand_example() {
        let env = triangle();
        assert_eq!(env.mcd(), 4.0);
        assert!(!env.is_degenerate());
        let two = raw_env(&[vec![1.0, 1.0], vec![4.0, 5.0]]);
        assert_eq!(two.mcd(), 5.0);
    }

    #[test]
    fn near_far_boundary() {
        let env = triangle();
        assert_eq!(env.classify(&[-4.0, 0.0]).unwrap(), ExtrapolationClass::Near { distance: 4.0 });
        assert!(matches!(env.classify(&[-4.001, 0.0]).unwrap(), ExtrapolationClass::Far { .. }));
        assert_eq!(env.classify(&[1.0, 1.0]).unwrap(), ExtrapolationClass::Inside);
        assert!(matches!(env.classify(&[-40.0, 0.0]).unwrap(), ExtrapolationClass::Far { .. }));
    }

    #[test]
    fn unit_triangle_standardized() {
        // standardized by its own (n−1) statistics
        let raw = [vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let st = Standardizer::fit_columns(names(2), &[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let env = CalibrationEnvelope::from_raw_points(st, &raw).unwrap();
        let s = 3f64.sqrt();
        let expect = (2.0 * s + s * 2f64.sqrt()) / 3.0;
        assert!((env.mcd() - expect).abs() < 1e-12);
        assert!(env.in_hull(&[0.25, 0.25]).unwrap());
        assert!(!env.in_hull(&[1.0, 1.0]).unwrap());
        assert!(env.in_hull(&[0.0, 0.0]).unwrap());
        // just past the hypotenuse: standardized distance ≈ 0.1 · √3
        let q = [0.5 + 0.1 / 2f64.sqrt(), 0.5 + 0.1 / 2f64.sqrt()];
        assert!(matches!(env.classify(&q).unwrap(), ExtrapolationClass::Near { .. }));
        let far = [10.0 * env.mcd(), 10.0 * env.mcd()];
        assert!(matches!(env.classify(&far).unwrap(), ExtrapolationClass::Far { .. }));
    }

    #[test]
    fn collinear_is_degenerate() {
        let env = raw_env(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]);
        assert!(env.is_degenerate());
        assert_eq!(env.affine_rank(), 1);
        assert!(env.in_hull(&[1.5, 1.5]).unwrap());
        assert!(!env.in_hull(&[2.5, 2.5]).unwrap());
        assert!(!env.in_hull(&[1.0, 1.2]).unwrap());
        match env.classify(&[1.0, 1.2]).unwrap() {
            ExtrapolationClass::Near { distance } => assert!((distance - 0.2).abs() < 1e-12),
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn identical_points() {
        let env = raw_env(&[vec![1.0, 2.0], vec![1.0, 2.0]]);
        assert_eq!(env.affine_rank(), 0);
        assert_eq!(env.mcd(), 0.0);
        assert!(env.in_hull(&[1.0, 2.0]).unwrap());
        assert!(matches!(env.classify(&[1.0, 2.5]).unwrap(), ExtrapolationClass::Far { .. }));
    }

    #[test]
    fn nearest_distance() {
        let env = raw_env(&[vec![0.0, 0.0], vec![10.0, 0.0]]);
        assert_eq!(env.nearest_calib_distance(&[4.0, 3.0]).unwrap(), 5.0);
        assert_eq!(env.nearest_calib_distance(&[10.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            env.nearest_calib_distance(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn build_rejects_bad_calibration() {
        use crate::model::test_util::table_from_fn;
        let t = table_from_fn(1, 2, |i, j| (i + j) as f64, |_| 1.0);
        assert!(CalibrationEnvelope::build(&t, &names(2).iter().map(|s| s.replace('v', "p")).collect::<Vec<_>>()).is_err());
        let t = table_from_fn(5, 2, |i, j| if j == 0 { 3.0 } else { i as f64 }, |_| 1.0);
        assert!(matches!(
            CalibrationEnvelope::build(&t, &["p0".into(), "p1".into()]),
            Err(Error::ZeroVariance(ref c)) if c == "p0"
        ));
    }

    #[test]
    fn summary_counts() {
        let env = triangle();
        let q = vec![vec![1.0, 1.0], vec![-4.0, 0.0], vec![-20.0, 0.0], vec![0.5, 0.5]];
        let s = extrapolation_summary(&env, &q).unwrap();
        assert_eq!((s.n, s.inside, s.near, s.far), (4, 2, 1, 1));
        assert_eq!(s.mean_distance, Some((4.0 + 20.0) / 2.0));
        assert!((s.prop_inside() + s.prop_near() + s.prop_far() - 1.0).abs() < 1e-12);

        let inside = extrapolation_summary(&env, &[vec![0.1, 0.1]]).unwrap();
        assert_eq!(inside.mean_distance, None);
        assert_eq!(inside.prop_far(), 0.0);
        assert!(extrapolation_summary(&env, &[]).is_err());
    }

    #[test]
    fn generators_and_midpoints_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 2..=5 {
            let pts: Vec<Vec<f64>> = (0..30).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let env = raw_env(&pts);
            let s = extrapolation_summary(&env, &pts).unwrap();
            assert_eq!(s.inside, pts.len());
            for i in 0..pts.len() {
                let j = (i + 7) % pts.len();
                let mid: Vec<f64> = pts[i].iter().zip(&pts[j]).map(|(a, b)| 0.5 * (a + b)).collect();
                assert!(env.in_hull(&mid).unwrap());
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| rng.gen_range(0.0..100.0)).collect()).collect();
        let cols: Vec<Vec<f64>> = (0..3).map(|k| pts.iter().map(|p| p[k]).collect()).collect();
        let env = CalibrationEnvelope::from_raw_points(Standardizer::fit_columns(names(3), &cols).unwrap(), &pts).unwrap();
        let back = CalibrationEnvelope::from_json(&env.to_json().unwrap()).unwrap();
        assert_eq!(back.mcd().to_bits(), env.mcd().to_bits());
        for _ in 0..200 {
            let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-20.0..120.0)).collect();
            assert_eq!(env.classify(&q).unwrap(), back.classify(&q).unwrap());
        }
    }
}
