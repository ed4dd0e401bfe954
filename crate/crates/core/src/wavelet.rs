//! Haar estimators of the density of an expected persistence diagram.
//!
//! The Haar system lives on the unit square through the change of variables of
//! [`DomainGeometry`]: a level-`j` function is supported on a dyadic square of
//! side `2^-j` and takes the values `+-2^j / R` there, which makes the family
//! orthonormal in `L^2(Omega_R)`.
//!
//! On strip `A_k` the estimator keeps the scaling coefficients of level `k + 1`
//! and the details of levels `k + 1 ..= J + K`; strips beyond `K` are dropped.
//! Its density is therefore constant on dyadic squares of level `J + K + 1`.
//!
//! Coefficients are computed bottom-up: atoms are binned on the finest grid
//! and children masses `c = [lb, rb, lt, rt]` of every occupied square give
//!
//! ```text
//! alpha   = s (lb + rb + lt + rt)
//! beta_a  = s (lb + lt - rb - rt)
//! beta_b  = s (lb + rb - lt - rt)
//! beta_c  = s (lb + rt - rb - lt)        s = 2^level / R
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    pow2, strip_of_height, CellIndex, DomainGeometry, DyadicSquare, QuadraturePartition,
    MAX_DYADIC_LEVEL,
};
use crate::measures::{locate, Atom, PersistenceMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaarKind {
    Scaling,
    /// `+` on the left half of the support, `-` on the right half.
    DetailA,
    /// `+` on the bottom half, `-` on the top half.
    DetailB,
    /// `+` on the bottom-left and top-right quarters.
    DetailC,
}

impl HaarKind {
    pub const DETAILS: [HaarKind; 3] = [HaarKind::DetailA, HaarKind::DetailB, HaarKind::DetailC];

    pub fn is_detail(self) -> bool {
        self != HaarKind::Scaling
    }

    /// Sign on each child quarter, ordered (left-bottom, right-bottom, left-top, right-top).
    pub fn signs(self) -> [f64; 4] {
        match self {
            HaarKind::Scaling => [1.0, 1.0, 1.0, 1.0],
            HaarKind::DetailA => [1.0, -1.0, 1.0, -1.0],
            HaarKind::DetailB => [1.0, 1.0, -1.0, -1.0],
            HaarKind::DetailC => [1.0, -1.0, -1.0, 1.0],
        }
    }

    fn name(self) -> &'static str {
        match self {
            HaarKind::Scaling => "scaling",
            HaarKind::DetailA => "detail_a",
            HaarKind::DetailB => "detail_b",
            HaarKind::DetailC => "detail_c",
        }
    }
}

impl fmt::Display for HaarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HaarKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaling" => Ok(HaarKind::Scaling),
            "detail_a" => Ok(HaarKind::DetailA),
            "detail_b" => Ok(HaarKind::DetailB),
            "detail_c" => Ok(HaarKind::DetailC),
            _ => Err(Error::InvalidInput(format!("unknown Haar kind {s:?}"))),
        }
    }
}

/// A Haar function: its kind and its support square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HaarIndex {
    pub support: DyadicSquare,
    pub kind: HaarKind,
}

impl HaarIndex {
    pub fn new(kind: HaarKind, level: usize, m: u64, n: u64) -> Self {
        HaarIndex {
            support: DyadicSquare { level, m, n },
            kind,
        }
    }

    pub fn level(&self) -> usize {
        self.support.level
    }

    /// Value at a unit-coordinate point, in units of `2^level / R`.
    fn pattern_at_unit(&self, u: f64, v: f64) -> f64 {
        let child = DyadicSquare::containing(u, v, self.support.level + 1);
        if child.ancestor(self.support.level) != self.support {
            return 0.0;
        }
        let quarter = (child.m & 1) + 2 * (child.n & 1);
        self.kind.signs()[quarter as usize]
    }
}

/// Value of the adapted Haar function at `(t1, t2)`.
pub fn basis_eval(idx: &HaarIndex, t1: f64, t2: f64, geom: &DomainGeometry) -> f64 {
    match geom.unit_coords(t1, t2) {
        Ok((u, v)) => idx.pattern_at_unit(u, v) * pow2(idx.level() as i32) / geom.radius(),
        Err(_) => 0.0,
    }
}

/// Exact `L^2(Omega_R)` inner product of two adapted Haar functions.
pub fn basis_inner_product(a: &HaarIndex, b: &HaarIndex) -> f64 {
    let (coarse, fine) = if a.level() <= b.level() {
        (a, b)
    } else {
        (b, a)
    };
    if !fine.support.is_within(&coarse.support) {
        return 0.0;
    }
    if coarse.level() == fine.level() {
        // same support: sum over the four quarters
        let sa = coarse.kind.signs();
        let sb = fine.kind.signs();
        return sa.iter().zip(sb).map(|(x, y)| x * y).sum::<f64>() / 4.0;
    }
    // the coarse function is constant on the fine support
    let quarter = fine.support.ancestor(coarse.level() + 1);
    let coarse_sign = coarse.kind.signs()[((quarter.m & 1) + 2 * (quarter.n & 1)) as usize];
    let fine_integral: f64 = fine.kind.signs().iter().sum::<f64>() / 4.0;
    // 2^lc 2^lf / R^2 * coarse_sign * fine_integral * R^2 4^-lf
    coarse_sign * fine_integral * pow2(coarse.level() as i32 - fine.level() as i32)
}

/// Truncation levels `(K, J)` of the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorLevels {
    pub strips: usize,
    pub depth: usize,
}

impl EstimatorLevels {
    pub fn new(strips: usize, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidInput("the depth J must be at least 1".into()));
        }
        if strips + depth + 1 > MAX_DYADIC_LEVEL {
            return Err(Error::InvalidInput(format!(
                "K + J = {} exceeds the supported maximum {}",
                strips + depth,
                MAX_DYADIC_LEVEL - 1
            )));
        }
        Ok(EstimatorLevels { strips, depth })
    }

    /// `K = J = ceil(log2 N)`, with `J >= 1`.
    pub fn auto(samples: usize) -> Self {
        let l = (samples.max(1) as f64).log2().ceil() as usize;
        EstimatorLevels {
            strips: l,
            depth: l.max(1),
        }
    }

    /// Finest absolute dyadic level, `J + K + 1`.
    pub fn finest_level(&self) -> usize {
        self.strips + self.depth + 1
    }

    /// Finest strip-relative cell level in strip `k`.
    pub fn finest_cell_level(&self, k: usize) -> usize {
        self.strips + self.depth - k
    }
}

/// Hard-threshold rule `tau_j = prefactor * tau * 2^(j/p) * j / sqrt(N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub tau: f64,
    pub p: f64,
    pub samples: usize,
    pub prefactor: f64,
}

impl ThresholdRule {
    pub fn new(tau: f64, p: f64, samples: usize) -> Result<Self> {
        if !(tau >= 0.0) || tau.is_nan() {
            return Err(Error::InvalidInput(format!(
                "tau must be nonnegative, got {tau}"
            )));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "p must be a finite value >= 1, got {p}"
            )));
        }
        if samples == 0 {
            return Err(Error::InvalidInput("threshold needs N >= 1".into()));
        }
        Ok(ThresholdRule {
            tau,
            p,
            samples,
            prefactor: 1.0,
        })
    }

    pub fn with_prefactor(mut self, prefactor: f64) -> Self {
        self.prefactor = prefactor;
        self
    }

    pub fn threshold(&self, level: usize) -> f64 {
        let j = level as f64;
        self.prefactor * self.tau * (j / self.p).exp2() * j / (self.samples as f64).sqrt()
    }
}

/// Sparse Haar estimator of a density on `Omega_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletEstimator {
    geom: DomainGeometry,
    levels: EstimatorLevels,
    samples: usize,
    coeffs: BTreeMap<HaarIndex, f64>,
    truncated_mass: f64,
    outside_mass: f64,
}

impl WaveletEstimator {
    /// Estimator of the mean of `diagrams`, via the bottom-up transform.
    pub fn estimate(
        diagrams: &[PersistenceMeasure],
        geom: DomainGeometry,
        levels: EstimatorLevels,
    ) -> Result<Self> {
        if diagrams.is_empty() {
            return Err(Error::InvalidInput(
                "the estimator needs at least one diagram".into(),
            ));
        }
        let atoms = diagrams.iter().flat_map(|d| d.atoms().iter());
        Self::from_atoms(atoms, geom, levels, diagrams.len())
    }

    /// Estimator of a single weighted measure (`N = 1`).
    pub fn from_measure(
        measure: &PersistenceMeasure,
        geom: DomainGeometry,
        levels: EstimatorLevels,
    ) -> Result<Self> {
        Self::from_atoms(measure.atoms().iter(), geom, levels, 1)
    }

    fn from_atoms<'a>(
        atoms: impl Iterator<Item = &'a Atom>,
        geom: DomainGeometry,
        levels: EstimatorLevels,
        samples: usize,
    ) -> Result<Self> {
        let finest = levels.finest_level();
        let mut bins: BTreeMap<DyadicSquare, f64> = BTreeMap::new();
        let (mut truncated, mut outside) = (0.0, 0.0);
        for atom in atoms {
            match locate(atom, &geom) {
                None => outside += atom.weight,
                Some((_, _, k)) if k > levels.strips => truncated += atom.weight,
                Some((u, v, _)) => {
                    *bins
                        .entry(DyadicSquare::containing(u, v, finest))
                        .or_default() += atom.weight
                }
            }
        }
        let scale = 1.0 / samples as f64;
        let mut coeffs = BTreeMap::new();
        let radius = geom.radius();
        let mut current: BTreeMap<DyadicSquare, f64> =
            bins.into_iter().map(|(sq, w)| (sq, w * scale)).collect();
        for level in (1..finest).rev() {
            let mut parents: BTreeMap<DyadicSquare, [f64; 4]> = BTreeMap::new();
            for (sq, mass) in current {
                let quarter = (sq.m & 1) + 2 * (sq.n & 1);
                parents.entry(sq.parent().expect("level >= 1")).or_default()[quarter as usize] =
                    mass;
            }
            let s = pow2(level as i32) / radius;
            current = BTreeMap::new();
            for (parent, c) in parents {
                // strip k ends at level k + 1, where the scaling coefficient sits
                let strip = parent
                    .strip()
                    .expect("binned squares stay off the diagonal");
                for kind in HaarKind::DETAILS {
                    let signs = kind.signs();
                    let beta =
                        s * (signs[0] * c[0] + signs[1] * c[1] + signs[2] * c[2] + signs[3] * c[3]);
                    if beta != 0.0 {
                        coeffs.insert(
                            HaarIndex {
                                support: parent,
                                kind,
                            },
                            beta,
                        );
                    }
                }
                let mass = (c[0] + c[2]) + (c[1] + c[3]);
                if level == strip + 1 {
                    coeffs.insert(
                        HaarIndex {
                            support: parent,
                            kind: HaarKind::Scaling,
                        },
                        s * mass,
                    );
                } else {
                    current.insert(parent, mass);
                }
            }
        }
        Ok(WaveletEstimator {
            geom,
            levels,
            samples,
            coeffs,
            truncated_mass: truncated * scale,
            outside_mass: outside * scale,
        })
    }

    /// Reference implementation: every coefficient as the direct sum
    /// `(1/N) sum_i sum_x w(x) psi(x)` over the indices the fast path produced.
    pub fn direct_coefficient(&self, idx: &HaarIndex, diagrams: &[PersistenceMeasure]) -> f64 {
        let total: f64 = diagrams
            .iter()
            .flat_map(|d| d.atoms().iter())
            .map(|a| a.weight * basis_eval(idx, a.birth, a.death, &self.geom))
            .sum();
        total / diagrams.len() as f64
    }

    pub fn geometry(&self) -> &DomainGeometry {
        &self.geom
    }

    pub fn levels(&self) -> EstimatorLevels {
        self.levels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn coefficients(&self) -> &BTreeMap<HaarIndex, f64> {
        &self.coeffs
    }

    pub fn coefficient(&self, idx: &HaarIndex) -> f64 {
        self.coeffs.get(idx).copied().unwrap_or(0.0)
    }

    /// Mean mass in strips `k > K`, which the estimator drops.
    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    /// Mean mass outside `Omega_R`.
    pub fn outside_mass(&self) -> f64 {
        self.outside_mass
    }

    pub fn nonzero_details(&self) -> usize {
        self.coeffs.keys().filter(|i| i.kind.is_detail()).count()
    }

    /// Total mass, the integral of the density over `Omega_R`.
    pub fn total_mass(&self) -> f64 {
        let r = self.geom.radius();
        self.coeffs
            .iter()
            .filter(|(i, _)| i.kind == HaarKind::Scaling)
            .map(|(i, a)| a * r * pow2(-(i.level() as i32)))
            .sum()
    }

    /// Hard thresholding of the detail coefficients; scaling coefficients are kept.
    pub fn apply_threshold(&self, rule: &ThresholdRule) -> Self {
        let mut out = self.clone();
        out.coeffs
            .retain(|idx, beta| !idx.kind.is_detail() || beta.abs() > rule.threshold(idx.level()));
        out
    }

    fn level_scale(&self, level: usize) -> f64 {
        pow2(level as i32) / self.geom.radius()
    }

    /// Density on a dyadic square lying inside a strip `k <= K`, summed over the
    /// Haar functions of levels `< square.level` whose support contains it.
    fn density_on(&self, square: &DyadicSquare, strip: usize) -> f64 {
        let top = strip + 1;
        let mut density = 0.0;
        let scaling = square.ancestor(top);
        density += self.coefficient(&HaarIndex {
            support: scaling,
            kind: HaarKind::Scaling,
        }) * self.level_scale(top);
        for level in top..square.level.min(self.levels.finest_level()) {
            let support = square.ancestor(level);
            let child = square.ancestor(level + 1);
            let quarter = ((child.m & 1) + 2 * (child.n & 1)) as usize;
            let s = self.level_scale(level);
            for kind in HaarKind::DETAILS {
                if let Some(beta) = self.coeffs.get(&HaarIndex { support, kind }) {
                    density += beta * kind.signs()[quarter] * s;
                }
            }
        }
        density
    }

    /// Density at `(t1, t2)`; zero outside `Omega_R` and on strips beyond `K`.
    pub fn density_at(&self, t1: f64, t2: f64) -> f64 {
        let Ok((u, v)) = self.geom.unit_coords(t1, t2) else {
            return 0.0;
        };
        match strip_of_height(v) {
            Some(k) if k <= self.levels.strips => {
                let finest = DyadicSquare::containing(u, v, self.levels.finest_level());
                self.density_on(&finest, k)
            }
            _ => 0.0,
        }
    }

    /// Exact integral of the density over a dyadic square.
    ///
    /// Squares touching the diagonal collect every strip they intersect.
    pub fn integrate_square(&self, square: &DyadicSquare) -> Result<f64> {
        let finest = self.levels.finest_level();
        match square.strip() {
            Some(k) if k > self.levels.strips => Ok(0.0),
            Some(k) => {
                if square.level > finest {
                    return Err(Error::LevelTooFine {
                        strip: k,
                        level: square.level - 1 - k,
                        finest: self.levels.finest_cell_level(k),
                    });
                }
                Ok(self.density_on(square, k) * self.geom.square_area(square))
            }
            None => {
                let r = self.geom.radius();
                Ok(self
                    .coeffs
                    .range(first_key_at(square.level.max(1))..)
                    .filter(|(i, _)| {
                        i.kind == HaarKind::Scaling
                            && i.level() >= square.level.max(1)
                            && i.support.is_within(square)
                    })
                    .map(|(i, a)| a * r * pow2(-(i.level() as i32)))
                    .sum())
            }
        }
    }

    pub fn integrate_cell(&self, cell: &CellIndex) -> Result<f64> {
        if cell.k <= self.levels.strips && cell.j > self.levels.finest_cell_level(cell.k) {
            return Err(Error::LevelTooFine {
                strip: cell.k,
                level: cell.j,
                finest: self.levels.finest_cell_level(cell.k),
            });
        }
        self.integrate_square(&cell.square())
    }

    /// Cell integrals at strip-relative level `resolution` (`None` = finest) in
    /// every strip `k <= K`, skipping cells whose integral is exactly zero.
    /// Fails once more than `cap` cells would be produced.
    pub fn cell_integrals(
        &self,
        resolution: Option<usize>,
        cap: usize,
    ) -> Result<Vec<(CellIndex, f64)>> {
        let active = self.active_squares();
        let mut out = Vec::new();
        for idx in self.coeffs.keys().filter(|i| i.kind == HaarKind::Scaling) {
            let k = idx.level() - 1;
            let finest = self.levels.finest_cell_level(k);
            let j = resolution.unwrap_or(finest);
            if j > finest {
                return Err(Error::LevelTooFine {
                    strip: k,
                    level: j,
                    finest,
                });
            }
            let walk = CellWalk {
                active: &active,
                target: k + 1 + j,
                cap,
            };
            self.collect_cells(&walk, idx.support, (0.0, 0.0), &mut out)?;
        }
        Ok(out)
    }

    /// Squares that carry a detail coefficient at or below them.
    fn active_squares(&self) -> BTreeSet<DyadicSquare> {
        let mut active = BTreeSet::new();
        for idx in self.coeffs.keys().filter(|i| i.kind.is_detail()) {
            let top = idx.support.strip().expect("details stay off the diagonal") + 1;
            let mut square = idx.support;
            while active.insert(square) && square.level > top {
                square = square.parent().expect("level > top >= 1");
            }
        }
        active
    }

    /// Walks the coefficient tree below `square`, carrying the density of the
    /// coarser levels and the sum of the magnitudes of its terms. Outside the
    /// active squares the density is constant.
    fn collect_cells(
        &self,
        walk: &CellWalk<'_>,
        square: DyadicSquare,
        (inherited, magnitude): (f64, f64),
        out: &mut Vec<(CellIndex, f64)>,
    ) -> Result<()> {
        let alpha = self.coefficient(&HaarIndex {
            support: square,
            kind: HaarKind::Scaling,
        }) * self.level_scale(square.level);
        let density = inherited + alpha;
        let magnitude = magnitude + alpha.abs();
        // exact cancellations of Haar terms leave rounding residues behind
        let vanishes = density.abs() <= CANCELLATION_TOLERANCE * magnitude;
        if square.level == walk.target {
            let mass = density * self.geom.square_area(&square);
            if !vanishes {
                if out.len() >= walk.cap {
                    return Err(Error::InvalidInput(format!(
                        "discretization exceeds {} cells; choose a coarser resolution",
                        walk.cap
                    )));
                }
                out.push((CellIndex::from_square(square).expect("strip square"), mass));
            }
            return Ok(());
        }
        let active = walk.active.contains(&square);
        if !active && vanishes {
            return Ok(());
        }
        let s = self.level_scale(square.level);
        let betas = HaarKind::DETAILS.map(|kind| {
            self.coefficient(&HaarIndex {
                support: square,
                kind,
            }) * s
        });
        let spread: f64 = betas.iter().map(|b| b.abs()).sum();
        for (quarter, child) in square.children().into_iter().enumerate() {
            let mut d = density;
            for (kind, beta) in HaarKind::DETAILS.iter().zip(betas) {
                d += beta * kind.signs()[quarter];
            }
            self.collect_cells(walk, child, (d, magnitude + spread), out)?;
        }
        Ok(())
    }

    /// One atom per nonzero cell at strip-relative level `resolution`
    /// (`None` = finest), placed at the cell center.
    ///
    /// Haar projections can be negative, so the result comes as a positive
    /// and a negative part; their difference preserves the total mass.
    pub fn discretize(&self, resolution: Option<usize>, cap: usize) -> Result<SignedMeasure> {
        let cells = self.cell_integrals(resolution, cap)?;
        let mut positive = Vec::new();
        let mut negative = Vec::new();
        for (cell, mass) in cells {
            let (t1, t2) = self.geom.cell_center(&cell);
            if mass > 0.0 {
                positive.push(Atom::new(t1, t2, mass));
            } else {
                negative.push(Atom::new(t1, t2, -mass));
            }
        }
        Ok(SignedMeasure {
            positive: PersistenceMeasure::new(positive)?,
            negative: PersistenceMeasure::new(negative)?,
        })
    }

    /// Integrals over the squares of a quadrature partition, keyed by square.
    pub fn partition_masses(
        &self,
        partition: &QuadraturePartition,
    ) -> Result<BTreeMap<DyadicSquare, f64>> {
        let active = self.active_squares();
        let mut masses: BTreeMap<DyadicSquare, f64> = BTreeMap::new();
        let r = self.geom.radius();
        let mut cells = Vec::new();
        for (idx, alpha) in self
            .coeffs
            .iter()
            .filter(|(i, _)| i.kind == HaarKind::Scaling)
        {
            let k = idx.level() - 1;
            if k >= partition.depth {
                let square = idx.support.ancestor(partition.depth);
                *masses.entry(square).or_default() += alpha * r * pow2(-(idx.level() as i32));
                continue;
            }
            let finest = self.levels.finest_cell_level(k);
            if partition.resolution > finest {
                return Err(Error::LevelTooFine {
                    strip: k,
                    level: partition.resolution,
                    finest,
                });
            }
            let walk = CellWalk {
                active: &active,
                target: k + 1 + partition.resolution,
                cap: usize::MAX,
            };
            cells.clear();
            self.collect_cells(&walk, idx.support, (0.0, 0.0), &mut cells)?;
            for (cell, mass) in &cells {
                *masses.entry(cell.square()).or_default() += mass;
            }
        }
        masses.retain(|_, m| *m != 0.0);
        Ok(masses)
    }

    /// Block averages of the density on the level-`level` dyadic grid, as
    /// `(u, v, value)` rows.
    pub fn density_grid(&self, level: usize) -> Result<Vec<(f64, f64, f64)>> {
        if level > 12 {
            return Err(Error::InvalidInput(format!(
                "density grid level {level} is too fine; use at most 12"
            )));
        }
        // the bottom row collects every strip at or below its own level
        let mut bottom: BTreeMap<u64, f64> = BTreeMap::new();
        let r = self.geom.radius();
        for (idx, alpha) in self
            .coeffs
            .iter()
            .filter(|(i, _)| i.kind == HaarKind::Scaling)
        {
            if idx.level() > level {
                *bottom.entry(idx.support.ancestor(level).m).or_default() +=
                    alpha * r * pow2(-(idx.level() as i32));
            }
        }
        let side = 1u64 << level;
        let mut rows = Vec::with_capacity((side * side) as usize);
        for n in 0..side {
            for m in 0..side {
                let square = DyadicSquare { level, m, n };
                let (u, v) = square.unit_center();
                let value = match square.strip() {
                    Some(k) if k <= self.levels.strips => self.density_on(&square, k),
                    Some(_) => 0.0,
                    None => bottom.get(&m).copied().unwrap_or(0.0) / self.geom.square_area(&square),
                };
                rows.push((u, v, value));
            }
        }
        Ok(rows)
    }

    pub fn write_density_grid(&self, level: usize, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["u", "v", "value"])?;
        for (u, v, value) in self.density_grid(level)? {
            writer.write_record([u.to_string(), v.to_string(), value.to_string()])?;
        }
        writer
            .flush()
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    pub fn to_file(&self) -> EstimatorFile {
        EstimatorFile {
            radius: self.geom.radius(),
            k: self.levels.strips,
            j: self.levels.depth,
            samples: self.samples,
            truncated_mass: self.truncated_mass,
            outside_mass: self.outside_mass,
            coefficients: self
                .coeffs
                .iter()
                .map(|(i, &value)| (i.kind, i.level(), i.support.m, i.support.n, value))
                .collect(),
        }
    }

    pub fn from_file(file: EstimatorFile) -> Result<Self> {
        let geom = DomainGeometry::new(file.radius)?;
        let levels = EstimatorLevels::new(file.k, file.j)?;
        let mut coeffs = BTreeMap::new();
        for (kind, level, m, n, value) in file.coefficients {
            let idx = HaarIndex::new(kind, level, m, n);
            let strip = idx.support.strip().ok_or_else(|| {
                Error::InvalidInput(format!(
                    "coefficient {kind} at level {level} touches the diagonal"
                ))
            })?;
            let valid_level = if kind == HaarKind::Scaling {
                level == strip + 1
            } else {
                level > strip && level < levels.finest_level()
            };
            if strip > levels.strips || !valid_level || m >> level != 0 {
                return Err(Error::InvalidInput(format!(
                    "coefficient ({kind}, {level}, {m}, {n}) is not part of a K = {}, J = {} estimator",
                    levels.strips, levels.depth
                )));
            }
            coeffs.insert(idx, value);
        }
        Ok(WaveletEstimator {
            geom,
            levels,
            samples: file.samples,
            coeffs,
            truncated_mass: file.truncated_mass,
            outside_mass: file.outside_mass,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut writer = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut writer, &self.to_file())?;
        writer
            .flush()
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_file(serde_json::from_str(&text)?)
    }
}

/// Relative size below which a density built from cancelling terms counts as zero.
const CANCELLATION_TOLERANCE: f64 = 1e-12;

struct CellWalk<'a> {
    active: &'a BTreeSet<DyadicSquare>,
    target: usize,
    cap: usize,
}

/// Coefficients are ordered by support level first, so every support that
/// can lie inside a square of level `level` comes after this key.
fn first_key_at(level: usize) -> HaarIndex {
    HaarIndex::new(HaarKind::Scaling, level, 0, 0)
}

/// Serialized estimator: radius, levels and the coefficient list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorFile {
    pub radius: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub samples: usize,
    #[serde(default)]
    pub truncated_mass: f64,
    #[serde(default)]
    pub outside_mass: f64,
    pub coefficients: Vec<(HaarKind, usize, u64, u64, f64)>,
}

/// Difference of two atomic measures.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignedMeasure {
    pub positive: PersistenceMeasure,
    pub negative: PersistenceMeasure,
}

impl SignedMeasure {
    pub fn net_mass(&self) -> f64 {
        self.positive.total_mass() - self.negative.total_mass()
    }
}

/// Masses of an atomic measure over the squares of a quadrature partition,
/// with the mass that fell outside `Omega_R` or on the diagonal.
pub fn partition_masses(
    measure: &PersistenceMeasure,
    geom: &DomainGeometry,
    partition: &QuadraturePartition,
) -> (BTreeMap<DyadicSquare, f64>, f64) {
    let mut masses: BTreeMap<DyadicSquare, f64> = BTreeMap::new();
    let mut lost = 0.0;
    for atom in measure.atoms() {
        match geom
            .unit_coords(atom.birth, atom.death)
            .ok()
            .and_then(|(u, v)| partition.square_of(u, v))
        {
            Some(square) => *masses.entry(square).or_default() += atom.weight,
            None => lost += atom.weight,
        }
    }
    (masses, lost)
}

/// Atoms at the representative points of a partition, split by sign.
pub fn partition_measure(
    masses: &BTreeMap<DyadicSquare, f64>,
    geom: &DomainGeometry,
    partition: &QuadraturePartition,
) -> Result<SignedMeasure> {
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for (square, &mass) in masses {
        let (u, v) = partition.unit_center(square);
        let (t1, t2) = geom.from_unit_square(u, v);
        if mass > 0.0 {
            positive.push(Atom::new(t1, t2, mass));
        } else if mass < 0.0 {
            negative.push(Atom::new(t1, t2, -mass));
        }
    }
    Ok(SignedMeasure {
        positive: PersistenceMeasure::new(positive)?,
        negative: PersistenceMeasure::new(negative)?,
    })
}
