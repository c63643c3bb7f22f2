//! Demand models, scenario sampling, and the binary scenario file format.
//!
//! A [`DemandModel`] is a distribution family plus per-customer nominal
//! demands and a seed. Sampling draws each scenario from its own
//! counter-derived RNG stream, so scenario `omega` of a sample is a pure
//! function of `(seed, omega)`: samples are reproducible, scenarios can be
//! generated in parallel in any order, and the first `m` scenarios of a
//! larger sample are bitwise identical to a sample of size `m` (seed-prefix
//! stability).
//!
//! A [`ScenarioSet`] stores the `m x n` demand matrix scenario-major
//! (row = scenario, column = customer id order) together with its
//! provenance (model, seed, max demand). Sets round-trip through a compact
//! binary file format with a CRC32 trailer.
//!
//! [`permute_to_tour_order`] and [`demand_prefix_sums`] are the batched
//! preprocessing steps of the split kernel: reorder each row to giant-tour
//! order, then take per-row prefix sums used for O(1) segment-load queries.

use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::GiantTour;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("sample size m must be positive")]
    EmptySample,
    #[error("demand model has no customers")]
    EmptyNominal,
    #[error("invalid demand model parameter: {0}")]
    InvalidParameter(String),
    #[error("scenario set has {got} customers but {expected} are required")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario file: {0}")]
    Format(String),
    #[error("scenario file checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("scenario payload of {bytes} bytes does not fit in memory")]
    TooLarge { bytes: u64 },
}

/// Distribution family for stochastic demands. Parameters are relative to
/// each customer's nominal demand.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DemandKind {
    /// Demand equals the nominal value in every scenario.
    Fixed,
    /// Integer uniform on `[round(lo_frac * nominal), round(hi_frac * nominal)]`.
    UniformInteger { lo_frac: f64, hi_frac: f64 },
    /// `nominal * (1 + cv * z)` with `z` standard normal, clamped to
    /// `[0, 2 * nominal]`, rounded.
    TruncatedNormal { cv: f64 },
    /// `nominal * (1 + rho * g + (1 - rho) * eps)` with `g` shared across
    /// the scenario and `eps` per customer, both `N(0, cv)`; clamped below
    /// at zero, rounded. `rho` in `[0, 1]` controls demand correlation.
    CommonFactor { cv: f64, rho: f64 },
}

impl DemandKind {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::InvalidParameter(msg));
        match *self {
            DemandKind::Fixed => Ok(()),
            DemandKind::UniformInteger { lo_frac, hi_frac } => {
                if !lo_frac.is_finite() || !hi_frac.is_finite() || lo_frac < 0.0 {
                    return bad(format!("uniform-integer bounds ({lo_frac}, {hi_frac})"));
                }
                if lo_frac > hi_frac {
                    return bad(format!("uniform-integer lo_frac {lo_frac} > hi_frac {hi_frac}"));
                }
                Ok(())
            }
            DemandKind::TruncatedNormal { cv } => {
                if !cv.is_finite() || cv < 0.0 {
                    return bad(format!("truncated-normal cv {cv}"));
                }
                Ok(())
            }
            DemandKind::CommonFactor { cv, rho } => {
                if !cv.is_finite() || cv < 0.0 {
                    return bad(format!("common-factor cv {cv}"));
                }
                if !rho.is_finite() || !(0.0..=1.0).contains(&rho) {
                    return bad(format!("common-factor rho {rho} outside [0, 1]"));
                }
                Ok(())
            }
        }
    }
}

/// A demand distribution: family, per-customer nominal demands, and the
/// seed of the sampling stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    pub kind: DemandKind,
    pub nominal: Vec<u16>,
    pub seed: u64,
}

impl DemandModel {
    pub fn new(kind: DemandKind, nominal: Vec<u16>, seed: u64) -> Self {
        DemandModel { kind, nominal, seed }
    }

    pub fn n(&self) -> usize {
        self.nominal.len()
    }

    /// Draws `m` scenarios. Scenario `omega` depends only on
    /// `(self.seed, omega)`, never on `m` or on evaluation order.
    pub fn sample(&self, m: usize) -> Result<ScenarioSet, ScenarioError> {
        if m == 0 {
            return Err(ScenarioError::EmptySample);
        }
        if self.nominal.is_empty() {
            return Err(ScenarioError::EmptyNominal);
        }
        self.kind.validate()?;
        let n = self.nominal.len();
        let bytes = (m as u64) * (n as u64) * 2;
        let mut demands: Vec<u16> = Vec::new();
        demands
            .try_reserve_exact(m * n)
            .map_err(|_| ScenarioError::TooLarge { bytes })?;
        demands.resize(m * n, 0);
        let q_max = demands
            .par_chunks_mut(n)
            .enumerate()
            .map(|(omega, row)| {
                self.fill_scenario(omega as u64, row);
                row.iter().copied().max().unwrap_or(0)
            })
            .max()
            .unwrap_or(0);
        Ok(ScenarioSet { m, n, demands, q_max, model: self.clone() })
    }

    /// Fills one scenario row. Draw order is fixed per kind (shared factor
    /// first, then customers in id order), so streams are stable across
    /// layout or parallelism changes.
    fn fill_scenario(&self, omega: u64, row: &mut [u16]) {
        let mut rng = scenario_rng(self.seed, omega);
        match self.kind {
            DemandKind::Fixed => row.copy_from_slice(&self.nominal),
            DemandKind::UniformInteger { lo_frac, hi_frac } => {
                for (out, &nom) in row.iter_mut().zip(&self.nominal) {
                    let lo = (lo_frac * nom as f64).round().min(u16::MAX as f64) as u32;
                    let hi = (hi_frac * nom as f64).round().min(u16::MAX as f64) as u32;
                    *out = rng.random_range(lo..=hi) as u16;
                }
            }
            DemandKind::TruncatedNormal { cv } => {
                for (out, &nom) in row.iter_mut().zip(&self.nominal) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let raw = nom as f64 * (1.0 + cv * z);
                    let clamped = raw.clamp(0.0, 2.0 * nom as f64).min(u16::MAX as f64);
                    *out = clamped.round() as u16;
                }
            }
            DemandKind::CommonFactor { cv, rho } => {
                let z: f64 = StandardNormal.sample(&mut rng);
                let g = cv * z;
                for (out, &nom) in row.iter_mut().zip(&self.nominal) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let eps = cv * z;
                    let raw = nom as f64 * (1.0 + rho * g + (1.0 - rho) * eps);
                    let clamped = raw.max(0.0).min(u16::MAX as f64);
                    *out = clamped.round() as u16;
                }
            }
        }
    }
}

/// RNG for one scenario, keyed directly by `(seed, omega)` so distinct
/// scenarios get distinct ChaCha keys without any mixing collisions.
fn scenario_rng(seed: u64, omega: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&omega.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// An `m x n` demand matrix in scenario-major layout plus its sampling
/// provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSet {
    m: usize,
    n: usize,
    demands: Vec<u16>,
    q_max: u16,
    model: DemandModel,
}

const MAGIC: &[u8; 4] = b"SCNS";
const FORMAT_VERSION: u16 = 1;
/// Fixed-size part of the file header, before the nominal-demand vector.
pub const HEADER_BYTES: usize = 4 + 2 + 1 + 1 + 8 + 4 + 2 + 8 + 16;
/// CRC32 trailer size.
pub const TRAILER_BYTES: usize = 4;

impl ScenarioSet {
    /// Assembles a set from externally produced demand rows (row-major,
    /// `m x n`, customer id order); `model` records provenance only.
    pub fn from_raw(m: usize, n: usize, demands: Vec<u16>, model: DemandModel) -> ScenarioSet {
        assert!(m > 0 && n > 0, "empty scenario matrix");
        assert_eq!(demands.len(), m * n, "demand matrix shape");
        let q_max = demands.iter().copied().max().unwrap_or(0);
        ScenarioSet { m, n, demands, q_max, model }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest demand across the whole set.
    pub fn q_max(&self) -> u16 {
        self.q_max
    }

    pub fn seed(&self) -> u64 {
        self.model.seed
    }

    pub fn model(&self) -> &DemandModel {
        &self.model
    }

    /// Demands of scenario `omega` in customer id order.
    pub fn row(&self, omega: usize) -> &[u16] {
        &self.demands[omega * self.n..(omega + 1) * self.n]
    }

    pub fn demands(&self) -> &[u16] {
        &self.demands
    }

    /// Copies the first `m` scenarios into a new set. With counter-derived
    /// streams this equals a fresh sample of size `m` from the same model.
    pub fn prefix(&self, m: usize) -> ScenarioSet {
        assert!(m >= 1 && m <= self.m, "prefix size {m} outside 1..={}", self.m);
        let demands = self.demands[..m * self.n].to_vec();
        let q_max = demands.iter().copied().max().unwrap_or(0);
        ScenarioSet { m, n: self.n, demands, q_max, model: self.model.clone() }
    }

    /// Expected file size in bytes for a set with `n` customers and `m`
    /// scenarios: header, nominal vector, payload, CRC trailer.
    pub fn file_size(m: u64, n: u64) -> u64 {
        HEADER_BYTES as u64 + 2 * n + 2 * m * n + TRAILER_BYTES as u64
    }

    fn header_bytes(&self) -> Vec<u8> {
        let (tag, p0, p1) = match self.model.kind {
            DemandKind::Fixed => (0u8, 0.0, 0.0),
            DemandKind::UniformInteger { lo_frac, hi_frac } => (1, lo_frac, hi_frac),
            DemandKind::TruncatedNormal { cv } => (2, cv, 0.0),
            DemandKind::CommonFactor { cv, rho } => (3, cv, rho),
        };
        let mut h = Vec::with_capacity(HEADER_BYTES + 2 * self.n);
        h.extend_from_slice(MAGIC);
        h.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        h.push(tag);
        h.push(0);
        h.extend_from_slice(&(self.m as u64).to_le_bytes());
        h.extend_from_slice(&(self.n as u32).to_le_bytes());
        h.extend_from_slice(&self.q_max.to_le_bytes());
        h.extend_from_slice(&self.model.seed.to_le_bytes());
        h.extend_from_slice(&p0.to_le_bytes());
        h.extend_from_slice(&p1.to_le_bytes());
        for &nom in &self.model.nominal {
            h.extend_from_slice(&nom.to_le_bytes());
        }
        h
    }

    /// Writes the set to `path`, streaming the payload and appending a
    /// CRC32 of everything before the trailer.
    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        let mut crc = crc32fast::Hasher::new();
        let header = self.header_bytes();
        crc.update(&header);
        w.write_all(&header)?;
        let mut chunk = Vec::with_capacity(64 * 1024);
        for part in self.demands.chunks(32 * 1024) {
            chunk.clear();
            for &d in part {
                chunk.extend_from_slice(&d.to_le_bytes());
            }
            crc.update(&chunk);
            w.write_all(&chunk)?;
        }
        w.write_all(&crc.finalize().to_le_bytes())?;
        w.flush()?;
        Ok(())
    }

    /// Serializes the set to bytes (same layout as [`ScenarioSet::save`]).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header_bytes();
        out.reserve(2 * self.demands.len() + TRAILER_BYTES);
        for &d in &self.demands {
            out.extend_from_slice(&d.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    /// Decodes a scenario file. Validates magic, version, declared sizes
    /// against the actual byte count (before any allocation), model
    /// parameters, the CRC32 trailer, and the stored maximum demand.
    pub fn from_bytes(buf: &[u8]) -> Result<Self, ScenarioError> {
        let fail = |msg: &str| Err(ScenarioError::Format(msg.to_string()));
        if buf.len() < HEADER_BYTES + TRAILER_BYTES {
            return fail("file shorter than fixed header");
        }
        if &buf[0..4] != MAGIC {
            return fail("bad magic, not a scenario file");
        }
        let version = u16::from_le_bytes(buf[4..6].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(ScenarioError::Format(format!("unsupported version {version}")));
        }
        let tag = buf[6];
        let m = u64::from_le_bytes(buf[8..16].try_into().unwrap());
        let n = u32::from_le_bytes(buf[16..20].try_into().unwrap()) as u64;
        let q_max = u16::from_le_bytes(buf[20..22].try_into().unwrap());
        let seed = u64::from_le_bytes(buf[22..30].try_into().unwrap());
        let p0 = f64::from_le_bytes(buf[30..38].try_into().unwrap());
        let p1 = f64::from_le_bytes(buf[38..46].try_into().unwrap());
        if m == 0 || n == 0 {
            return fail("empty scenario matrix");
        }
        let expected = (HEADER_BYTES as u64)
            .checked_add(2 * n)
            .and_then(|v| v.checked_add(2u64.checked_mul(m)?.checked_mul(n)?))
            .and_then(|v| v.checked_add(TRAILER_BYTES as u64))
            .ok_or_else(|| ScenarioError::Format("declared sizes overflow".into()))?;
        if expected != buf.len() as u64 {
            return Err(ScenarioError::Format(format!(
                "file is {} bytes but header declares {expected}",
                buf.len()
            )));
        }
        let kind = match tag {
            0 => DemandKind::Fixed,
            1 => DemandKind::UniformInteger { lo_frac: p0, hi_frac: p1 },
            2 => DemandKind::TruncatedNormal { cv: p0 },
            3 => DemandKind::CommonFactor { cv: p0, rho: p1 },
            t => return Err(ScenarioError::Format(format!("unknown model tag {t}"))),
        };
        kind.validate().map_err(|e| ScenarioError::Format(e.to_string()))?;

        let body = &buf[..buf.len() - TRAILER_BYTES];
        let stored = u32::from_le_bytes(buf[buf.len() - TRAILER_BYTES..].try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(ScenarioError::Checksum { stored, computed });
        }

        let (m, n) = (m as usize, n as usize);
        let nominal: Vec<u16> = buf[HEADER_BYTES..HEADER_BYTES + 2 * n]
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .collect();
        let payload = &body[HEADER_BYTES + 2 * n..];
        let mut demands: Vec<u16> = Vec::new();
        demands
            .try_reserve_exact(m * n)
            .map_err(|_| ScenarioError::TooLarge { bytes: 2 * (m as u64) * (n as u64) })?;
        demands.extend(payload.chunks_exact(2).map(|b| u16::from_le_bytes([b[0], b[1]])));
        let actual_max = demands.iter().copied().max().unwrap_or(0);
        if actual_max != q_max {
            return Err(ScenarioError::Format(format!(
                "stored q_max {q_max} but payload maximum is {actual_max}"
            )));
        }
        Ok(ScenarioSet {
            m,
            n,
            demands,
            q_max,
            model: DemandModel { kind, nominal, seed },
        })
    }
}

/// Demands reordered to giant-tour position order: column `k` holds the
/// demand of the customer visited at tour position `k + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TourOrderedDemands {
    m: usize,
    n: usize,
    data: Vec<u16>,
}

impl TourOrderedDemands {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, omega: usize) -> &[u16] {
        &self.data[omega * self.n..(omega + 1) * self.n]
    }
}

/// Per-scenario prefix sums of tour-ordered demands: row `omega` has
/// `n + 1` entries with `S[0] = 0` and `S[k]` the load of the first `k`
/// tour positions. Segment `(p, i]` weighs `S[i] - S[p]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefixSums {
    m: usize,
    n: usize,
    data: Vec<u64>,
}

impl PrefixSums {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, omega: usize) -> &[u64] {
        &self.data[omega * (self.n + 1)..(omega + 1) * (self.n + 1)]
    }
}

#[inline]
pub(crate) fn permute_row_into(src: &[u16], order: &[u32], dst: &mut [u16]) {
    for (d, &c) in dst.iter_mut().zip(order) {
        *d = src[(c - 1) as usize];
    }
}

#[inline]
pub(crate) fn prefix_row_into(demands: &[u16], out: &mut [u64]) {
    let mut acc = 0u64;
    out[0] = 0;
    for (k, &q) in demands.iter().enumerate() {
        acc += q as u64;
        out[k + 1] = acc;
    }
}

/// Materializes the whole set in giant-tour order as a new contiguous
/// matrix.
pub fn permute_to_tour_order<C: crate::cost::Cost>(
    set: &ScenarioSet,
    tour: &GiantTour<C>,
) -> Result<TourOrderedDemands, ScenarioError> {
    if tour.n() != set.n() {
        return Err(ScenarioError::DimensionMismatch { got: set.n(), expected: tour.n() });
    }
    let (m, n) = (set.m(), set.n());
    let mut data = vec![0u16; m * n];
    data.par_chunks_mut(n)
        .enumerate()
        .for_each(|(omega, dst)| permute_row_into(set.row(omega), tour.order(), dst));
    Ok(TourOrderedDemands { m, n, data })
}

/// Per-scenario prefix sums over tour-ordered demands.
pub fn demand_prefix_sums(demands: &TourOrderedDemands) -> PrefixSums {
    let (m, n) = (demands.m(), demands.n());
    let mut data = vec![0u64; m * (n + 1)];
    data.par_chunks_mut(n + 1)
        .enumerate()
        .for_each(|(omega, out)| prefix_row_into(demands.row(omega), out));
    PrefixSums { m, n, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{CvrpInstance, GiantTour};
    use proptest::prelude::*;

    fn model(kind: DemandKind, nominal: Vec<u16>, seed: u64) -> DemandModel {
        DemandModel::new(kind, nominal, seed)
    }

    #[test]
    fn fixed_model_repeats_nominal() {
        let set = model(DemandKind::Fixed, vec![3, 7, 11], 9).sample(4).unwrap();
        for omega in 0..4 {
            assert_eq!(set.row(omega), &[3, 7, 11]);
        }
        assert_eq!(set.q_max(), 11);
    }

    #[test]
    fn sampling_is_deterministic_and_seed_sensitive() {
        let kind = DemandKind::UniformInteger { lo_frac: 0.5, hi_frac: 1.5 };
        let a = model(kind, vec![10; 6], 42).sample(50).unwrap();
        let b = model(kind, vec![10; 6], 42).sample(50).unwrap();
        let c = model(kind, vec![10; 6], 43).sample(50).unwrap();
        assert_eq!(a.demands(), b.demands());
        assert_ne!(a.demands(), c.demands());
    }

    #[test]
    fn seed_prefix_stability() {
        let kind = DemandKind::TruncatedNormal { cv: 0.3 };
        let small = model(kind, vec![20; 5], 7).sample(40).unwrap();
        let large = model(kind, vec![20; 5], 7).sample(300).unwrap();
        assert_eq!(small.demands(), &large.demands()[..40 * 5]);
        assert_eq!(large.prefix(40), small);
    }

    #[test]
    fn empty_sample_and_empty_nominal_are_rejected() {
        assert!(matches!(
            model(DemandKind::Fixed, vec![1], 0).sample(0),
            Err(ScenarioError::EmptySample)
        ));
        assert!(matches!(
            model(DemandKind::Fixed, vec![], 0).sample(3),
            Err(ScenarioError::EmptyNominal)
        ));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        for kind in [
            DemandKind::UniformInteger { lo_frac: 1.5, hi_frac: 0.5 },
            DemandKind::UniformInteger { lo_frac: -0.1, hi_frac: 0.5 },
            DemandKind::TruncatedNormal { cv: -0.2 },
            DemandKind::TruncatedNormal { cv: f64::NAN },
            DemandKind::CommonFactor { cv: 0.2, rho: 1.5 },
        ] {
            assert!(kind.validate().is_err(), "{kind:?}");
        }
    }

    #[test]
    fn uniform_mean_approaches_interval_midpoint() {
        let kind = DemandKind::UniformInteger { lo_frac: 0.5, hi_frac: 1.5 };
        let set = model(kind, vec![10; 4], 123).sample(100_000).unwrap();
        let draws = set.demands().len() as f64;
        let mean: f64 = set.demands().iter().map(|&d| d as f64).sum::<f64>() / draws;
        let var = ((15.0f64 - 5.0 + 1.0).powi(2) - 1.0) / 12.0;
        let se = (var / draws).sqrt();
        assert!((mean - 10.0).abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn truncated_normal_stays_in_band_and_centers_on_nominal() {
        let kind = DemandKind::TruncatedNormal { cv: 0.3 };
        let set = model(kind, vec![50; 4], 99).sample(50_000).unwrap();
        assert!(set.demands().iter().all(|&d| d <= 100));
        let draws = set.demands().len() as f64;
        let mean: f64 = set.demands().iter().map(|&d| d as f64).sum::<f64>() / draws;
        let se = (0.3 * 50.0) / draws.sqrt();
        assert!((mean - 50.0).abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn common_factor_induces_cross_customer_correlation() {
        let rho = 0.5;
        let kind = DemandKind::CommonFactor { cv: 0.2, rho };
        let set = model(kind, vec![100, 100], 5).sample(20_000).unwrap();
        let (mut s1, mut s2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for omega in 0..set.m() {
            let r = set.row(omega);
            let (a, b) = (r[0] as f64, r[1] as f64);
            s1 += a;
            s2 += b;
            s11 += a * a;
            s22 += b * b;
            s12 += a * b;
        }
        let m = set.m() as f64;
        let cov = s12 / m - (s1 / m) * (s2 / m);
        let v1 = s11 / m - (s1 / m).powi(2);
        let v2 = s22 / m - (s2 / m).powi(2);
        let corr = cov / (v1 * v2).sqrt();
        let want = rho * rho / (rho * rho + (1.0 - rho) * (1.0 - rho));
        assert!((corr - want).abs() < 0.05, "corr {corr}, want {want}");
    }

    #[test]
    fn zero_nominal_yields_zero_demand() {
        for kind in [
            DemandKind::UniformInteger { lo_frac: 0.5, hi_frac: 1.5 },
            DemandKind::TruncatedNormal { cv: 0.5 },
            DemandKind::CommonFactor { cv: 0.5, rho: 0.3 },
        ] {
            let set = model(kind, vec![0, 10], 3).sample(100).unwrap();
            assert!((0..100).all(|omega| set.row(omega)[0] == 0), "{kind:?}");
        }
    }

    fn line_instance(n: usize) -> CvrpInstance<f64> {
        let mut coords = vec![[0.0, 0.0]];
        coords.extend((1..=n).map(|i| [i as f64, 0.0]));
        CvrpInstance::from_coords("line", &coords, 100).unwrap()
    }

    #[test]
    fn permutation_reorders_one_row_correctly() {
        let inst = line_instance(5);
        let tour = GiantTour::new(&inst, &[1, 2, 4, 3, 5]).unwrap();
        let mut dst = [0u16; 5];
        permute_row_into(&[14, 15, 8, 1, 8], tour.order(), &mut dst);
        assert_eq!(dst, [14, 15, 1, 8, 8]);
    }

    #[test]
    fn prefix_sums_of_identity_row() {
        let mut out = [0u64; 6];
        prefix_row_into(&[14, 15, 8, 1, 8], &mut out);
        assert_eq!(out, [0, 14, 29, 37, 38, 46]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let inst = line_instance(4);
        let tour = GiantTour::identity(&inst);
        let set = model(DemandKind::Fixed, vec![1, 2, 3], 0).sample(2).unwrap();
        assert!(matches!(
            permute_to_tour_order(&set, &tour),
            Err(ScenarioError::DimensionMismatch { got: 3, expected: 4 })
        ));
    }

    #[test]
    fn file_round_trip_preserves_everything() {
        let kind = DemandKind::CommonFactor { cv: 0.25, rho: 0.4 };
        let set = model(kind, vec![9, 18, 27], 77).sample(100).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.scn");
        set.save(&path).unwrap();
        let size = std::fs::metadata(&path).unwrap().len();
        assert_eq!(size, ScenarioSet::file_size(100, 3));
        let back = ScenarioSet::load(&path).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn to_bytes_matches_save() {
        let set = model(DemandKind::Fixed, vec![5, 6], 1).sample(7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.scn");
        set.save(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), set.to_bytes());
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let set = model(DemandKind::Fixed, vec![5, 6], 1).sample(7).unwrap();
        let mut bytes = set.to_bytes();
        let k = HEADER_BYTES + 6;
        bytes[k] ^= 0xff;
        assert!(matches!(
            ScenarioSet::from_bytes(&bytes),
            Err(ScenarioError::Checksum { .. })
        ));
    }

    #[test]
    fn truncated_file_is_rejected_before_allocation() {
        let set = model(DemandKind::Fixed, vec![5, 6], 1).sample(7).unwrap();
        let bytes = set.to_bytes();
        let err = ScenarioSet::from_bytes(&bytes[..bytes.len() - 5]).unwrap_err();
        assert!(matches!(err, ScenarioError::Format(_)), "{err}");

        let mut huge = bytes.clone();
        huge[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        let err = ScenarioSet::from_bytes(&huge).unwrap_err();
        assert!(matches!(err, ScenarioError::Format(_)), "{err}");
    }

    #[test]
    fn bad_magic_and_version_are_rejected() {
        let set = model(DemandKind::Fixed, vec![5], 1).sample(2).unwrap();
        let mut bytes = set.to_bytes();
        bytes[0] = b'X';
        assert!(ScenarioSet::from_bytes(&bytes).is_err());

        let mut bytes = set.to_bytes();
        bytes[4] = 99;
        let err = ScenarioSet::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    proptest! {
        #[test]
        fn permutation_preserves_row_multiset(
            demands in proptest::collection::vec(0u16..1000, 6),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            let inst = line_instance(6);
            let mut order: Vec<u32> = (1..=6).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
            let tour = GiantTour::new(&inst, &order).unwrap();
            let mut dst = vec![0u16; 6];
            permute_row_into(&demands, tour.order(), &mut dst);
            let mut a = demands.clone();
            let mut b = dst.clone();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn prefix_rows_are_nondecreasing_and_end_at_total(
            demands in proptest::collection::vec(0u16..u16::MAX, 1..50),
        ) {
            let mut out = vec![0u64; demands.len() + 1];
            prefix_row_into(&demands, &mut out);
            prop_assert_eq!(out[0], 0);
            prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
            let total: u64 = demands.iter().map(|&d| d as u64).sum();
            prop_assert_eq!(*out.last().unwrap(), total);
        }

        #[test]
        fn file_round_trip_random_sets(
            m in 1usize..40,
            n in 1usize..10,
            seed in 0u64..500,
        ) {
            let nominal: Vec<u16> = (0..n).map(|j| 5 + 3 * j as u16).collect();
            let kind = DemandKind::UniformInteger { lo_frac: 0.0, hi_frac: 2.0 };
            let set = model(kind, nominal, seed).sample(m).unwrap();
            let back = ScenarioSet::from_bytes(&set.to_bytes()).unwrap();
            prop_assert_eq!(back, set);
        }
    }
}
