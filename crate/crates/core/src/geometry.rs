//! Support region, change of variables and the multiscale dyadic partition.
//!
//! All partition arithmetic happens in rotated unit coordinates `(u, v)`:
//!
//! ```text
//! u = (t1 + t2) / (sqrt(2) R) + 1/2,    v = (t2 - t1) / (sqrt(2) R)
//! ```
//!
//! which map the support region `Omega_R` onto `[0, 1]^2` and the diagonal
//! onto `v = 0`. Strip `A_k` is `2^-(k+1) <= v < 2^-k` (closed at `v = 1`),
//! and a cell at level `(k, j)` is a dyadic square of side `2^-(k+1+j)`.
//! Every interval is half-open except at the outer edges `u = 1` and `v = 1`.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when deciding whether a point lies in `Omega_R`, in unit coordinates.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Deepest dyadic level addressable with `u64` translations.
pub const MAX_DYADIC_LEVEL: usize = 60;

/// Order of an `l_q` norm, or the exponent `p` of a transport cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Order {
    Finite(f64),
    Infinity,
}

impl Order {
    pub fn finite(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 1.0 {
            Ok(Order::Finite(value))
        } else {
            Err(Error::InvalidInput(format!(
                "norm order must be >= 1, got {value}"
            )))
        }
    }

    /// `l_q` norm of a planar vector.
    pub fn norm(self, dx: f64, dy: f64) -> f64 {
        let (ax, ay) = (dx.abs(), dy.abs());
        match self {
            Order::Infinity => ax.max(ay),
            Order::Finite(q) if q == 1.0 => ax + ay,
            Order::Finite(q) if q == 2.0 => ax.hypot(ay),
            Order::Finite(q) => {
                let m = ax.max(ay);
                if m == 0.0 {
                    0.0
                } else {
                    m * ((ax / m).powf(q) + (ay / m).powf(q)).powf(1.0 / q)
                }
            }
        }
    }

    pub fn as_finite(self) -> Option<f64> {
        match self {
            Order::Finite(q) => Some(q),
            Order::Infinity => None,
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(q) => write!(f, "{q}"),
            Order::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" => Ok(Order::Infinity),
            other => {
                let q: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("cannot parse norm order {s:?}")))?;
                if q.is_infinite() {
                    Ok(Order::Infinity)
                } else {
                    Order::finite(q)
                }
            }
        }
    }
}

/// `||x - x_perp||_q` for `x = (t1, t2)`, where `x_perp` is the orthogonal
/// projection onto the diagonal.
pub fn diagonal_distance(t1: f64, t2: f64, q: Order) -> Result<f64> {
    if !(t2 >= t1) {
        return Err(Error::InvalidInput(format!(
            "point ({t1}, {t2}) lies below the diagonal"
        )));
    }
    Ok(diagonal_distance_unchecked(t1, t2, q))
}

#[inline]
pub(crate) fn diagonal_distance_unchecked(t1: f64, t2: f64, q: Order) -> f64 {
    let half = 0.5 * (t2 - t1);
    match q {
        Order::Infinity => half,
        Order::Finite(q) if q == 2.0 => half * SQRT_2,
        Order::Finite(q) if q == 1.0 => 2.0 * half,
        Order::Finite(q) => half * 2f64.powf(1.0 / q),
    }
}

/// Strip containing unit height `v`, or `None` on the diagonal and outside `(0, 1]`.
pub fn strip_of_height(v: f64) -> Option<usize> {
    if !(v > 0.0) || v > 1.0 {
        return None;
    }
    if v == 1.0 {
        return Some(0);
    }
    // v in [2^e, 2^(e+1)) with e = floor(log2 v) <= -1, so k = -e - 1.
    Some((-floor_log2(v) - 1) as usize)
}

fn floor_log2(x: f64) -> i64 {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let exponent = ((bits >> 52) & 0x7ff) as i64;
    if exponent == 0 {
        // subnormal
        let mantissa = bits & ((1u64 << 52) - 1);
        -1074 + (63 - mantissa.leading_zeros() as i64)
    } else {
        exponent - 1023
    }
}

/// Index of the dyadic interval of length `2^-level` containing `x` in `[0, 1]`,
/// with the last interval closed at 1.
#[inline]
pub(crate) fn dyadic_position(x: f64, level: usize) -> u64 {
    let count = 1u64 << level;
    let scaled = (x * count as f64).floor();
    if scaled <= 0.0 {
        0
    } else {
        (scaled as u64).min(count - 1)
    }
}

#[inline]
pub(crate) fn pow2(exponent: i32) -> f64 {
    2f64.powi(exponent)
}

/// A dyadic square `[m, m+1) x [n, n+1) / 2^level` in unit coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicSquare {
    pub level: usize,
    pub m: u64,
    pub n: u64,
}

impl DyadicSquare {
    pub fn containing(u: f64, v: f64, level: usize) -> Self {
        DyadicSquare {
            level,
            m: dyadic_position(u, level),
            n: dyadic_position(v, level),
        }
    }

    pub fn side(&self) -> f64 {
        pow2(-(self.level as i32))
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| DyadicSquare {
            level: self.level - 1,
            m: self.m / 2,
            n: self.n / 2,
        })
    }

    /// Children ordered (left-bottom, right-bottom, left-top, right-top).
    pub fn children(&self) -> [Self; 4] {
        let (level, m, n) = (self.level + 1, 2 * self.m, 2 * self.n);
        [
            DyadicSquare { level, m, n },
            DyadicSquare { level, m: m + 1, n },
            DyadicSquare { level, m, n: n + 1 },
            DyadicSquare {
                level,
                m: m + 1,
                n: n + 1,
            },
        ]
    }

    /// Ancestor at a coarser level.
    pub fn ancestor(&self, level: usize) -> Self {
        debug_assert!(level <= self.level);
        let shift = self.level - level;
        DyadicSquare {
            level,
            m: self.m >> shift,
            n: self.n >> shift,
        }
    }

    /// Strip that contains this square, `None` when it touches the diagonal.
    pub fn strip(&self) -> Option<usize> {
        if self.n == 0 {
            return None;
        }
        let row_exponent = 63 - self.n.leading_zeros() as usize;
        Some(self.level - 1 - row_exponent)
    }

    pub fn unit_bounds(&self) -> ((f64, f64), (f64, f64)) {
        let s = self.side();
        (
            (self.m as f64 * s, (self.m + 1) as f64 * s),
            (self.n as f64 * s, (self.n + 1) as f64 * s),
        )
    }

    pub fn unit_center(&self) -> (f64, f64) {
        let s = self.side();
        ((self.m as f64 + 0.5) * s, (self.n as f64 + 0.5) * s)
    }

    pub fn contains_unit(&self, u: f64, v: f64) -> bool {
        *self == DyadicSquare::containing(u, v, self.level)
    }

    pub fn is_within(&self, other: &DyadicSquare) -> bool {
        self.level >= other.level && self.ancestor(other.level) == *other
    }
}

/// Cell `(k, j, m, n)` of the multiscale partition.
///
/// `m` counts squares along `u` from 0, `n` counts rows upward from the
/// bottom edge of strip `k`; both are in units of the cell side
/// `2^-(k+1+j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub k: usize,
    pub j: usize,
    pub m: u64,
    pub n: u64,
}

impl CellIndex {
    pub fn dyadic_level(&self) -> usize {
        self.k + 1 + self.j
    }

    pub fn square(&self) -> DyadicSquare {
        DyadicSquare {
            level: self.dyadic_level(),
            m: self.m,
            n: (1u64 << self.j) + self.n,
        }
    }

    pub fn from_square(square: DyadicSquare) -> Option<Self> {
        let k = square.strip()?;
        let j = square.level - 1 - k;
        Some(CellIndex {
            k,
            j,
            m: square.m,
            n: square.n - (1u64 << j),
        })
    }

    pub fn unit_side(&self) -> f64 {
        pow2(-(self.dyadic_level() as i32))
    }

    pub fn parent(&self) -> Option<Self> {
        (self.j > 0).then(|| CellIndex {
            k: self.k,
            j: self.j - 1,
            m: self.m / 2,
            n: self.n / 2,
        })
    }

    pub fn children(&self) -> [Self; 4] {
        let (k, j, m, n) = (self.k, self.j + 1, 2 * self.m, 2 * self.n);
        [
            CellIndex { k, j, m, n },
            CellIndex { k, j, m: m + 1, n },
            CellIndex { k, j, m, n: n + 1 },
            CellIndex {
                k,
                j,
                m: m + 1,
                n: n + 1,
            },
        ]
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Q[k={}, j={}, m={}, n={}]",
            self.k, self.j, self.m, self.n
        )
    }
}

/// The support region `Omega_R` with its change of variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainGeometry {
    radius: f64,
}

impl DomainGeometry {
    pub fn new(radius: f64) -> Result<Self> {
        if radius.is_finite() && radius > 0.0 {
            Ok(DomainGeometry { radius })
        } else {
            Err(Error::InvalidInput(format!(
                "support radius must be positive and finite, got {radius}"
            )))
        }
    }

    /// Smallest power of two `R` with every point inside `Omega_R`.
    pub fn fitting<I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let needed = points
            .into_iter()
            .map(|(t1, t2)| (SQRT_2 * (t1 + t2).abs()).max((t2 - t1) / SQRT_2))
            .fold(0.0f64, f64::max);
        if !needed.is_finite() {
            return Err(Error::InvalidInput(
                "cannot fit a support region around non-finite points".into(),
            ));
        }
        if needed == 0.0 {
            return DomainGeometry::new(1.0);
        }
        let mut radius = pow2(needed.log2().ceil() as i32);
        while radius < needed {
            radius *= 2.0;
        }
        DomainGeometry::new(radius)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn to_unit_square(&self, t1: f64, t2: f64) -> (f64, f64) {
        let scale = SQRT_2 * self.radius;
        ((t1 + t2) / scale + 0.5, (t2 - t1) / scale)
    }

    pub fn from_unit_square(&self, u: f64, v: f64) -> (f64, f64) {
        let scale = self.radius / SQRT_2;
        let s = u - 0.5;
        (scale * (s - v), scale * (s + v))
    }

    pub fn contains(&self, t1: f64, t2: f64) -> bool {
        let (u, v) = self.to_unit_square(t1, t2);
        in_unit_interval(u) && in_unit_interval(v)
    }

    /// Unit coordinates of a point of `Omega_R`, snapped into `[0, 1]^2`.
    pub fn unit_coords(&self, t1: f64, t2: f64) -> Result<(f64, f64)> {
        let (u, v) = self.to_unit_square(t1, t2);
        if in_unit_interval(u) && in_unit_interval(v) {
            Ok((u.clamp(0.0, 1.0), v.clamp(0.0, 1.0)))
        } else {
            Err(Error::OutsideDomain {
                t1,
                t2,
                radius: self.radius,
            })
        }
    }

    /// Strip `k` containing the point; `None` exactly on the diagonal.
    pub fn strip_index(&self, t1: f64, t2: f64) -> Result<Option<usize>> {
        if t2 < t1 {
            return Err(Error::InvalidInput(format!(
                "point ({t1}, {t2}) lies below the diagonal"
            )));
        }
        let (_, v) = self.unit_coords(t1, t2)?;
        Ok(strip_of_height(v))
    }

    pub fn cell_of(&self, t1: f64, t2: f64, k: usize, j: usize) -> Result<CellIndex> {
        let (u, v) = self.unit_coords(t1, t2)?;
        if strip_of_height(v) != Some(k) {
            return Err(Error::WrongStrip { t1, t2, strip: k });
        }
        Ok(cell_at_unit(u, v, k, j))
    }

    /// All cells of level `(k, j)`, row by row.
    pub fn cells_at_level(&self, k: usize, j: usize) -> Vec<CellIndex> {
        let columns = 1u64 << (k + 1 + j);
        let rows = 1u64 << j;
        (0..rows)
            .flat_map(|n| (0..columns).map(move |m| CellIndex { k, j, m, n }))
            .collect()
    }

    /// Lebesgue area of strip `A_k`.
    pub fn strip_area(&self, k: usize) -> f64 {
        self.radius * self.radius * pow2(-(k as i32) - 1)
    }

    /// Lebesgue area (in `(t1, t2)`) of a dyadic square.
    pub fn square_area(&self, square: &DyadicSquare) -> f64 {
        let side = self.radius * square.side();
        side * side
    }

    pub fn cell_area(&self, cell: &CellIndex) -> f64 {
        self.square_area(&cell.square())
    }

    pub fn square_center(&self, square: &DyadicSquare) -> (f64, f64) {
        let (u, v) = square.unit_center();
        self.from_unit_square(u, v)
    }

    pub fn cell_center(&self, cell: &CellIndex) -> (f64, f64) {
        self.square_center(&cell.square())
    }
}

/// Partition of `[0, 1] x (0, 1]` used to turn densities and large atomic
/// measures into comparable finite measures.
///
/// Strips `k < depth` are cut into their level-`(k, resolution)` cells; all
/// strips `k >= depth` are pooled into the squares of side `2^-depth` that
/// touch the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadraturePartition {
    pub resolution: usize,
    pub depth: usize,
}

impl QuadraturePartition {
    pub fn new(resolution: usize, depth: usize) -> Result<Self> {
        if depth == 0 || depth + resolution + 1 > MAX_DYADIC_LEVEL {
            return Err(Error::InvalidInput(format!(
                "quadrature depth must be in 1..={}, got depth {depth} with resolution {resolution}",
                MAX_DYADIC_LEVEL - resolution - 1
            )));
        }
        Ok(QuadraturePartition { resolution, depth })
    }

    /// Partition square holding a unit-coordinate point; `None` on the diagonal.
    pub fn square_of(&self, u: f64, v: f64) -> Option<DyadicSquare> {
        let k = strip_of_height(v)?;
        Some(if k < self.depth {
            DyadicSquare::containing(u, v, k + 1 + self.resolution)
        } else {
            DyadicSquare {
                level: self.depth,
                m: dyadic_position(u, self.depth),
                n: 0,
            }
        })
    }

    /// Representative point of a partition square in unit coordinates: its
    /// center, which for a diagonal square lies on the lower edge of strip `depth`.
    pub fn unit_center(&self, square: &DyadicSquare) -> (f64, f64) {
        square.unit_center()
    }
}

fn in_unit_interval(x: f64) -> bool {
    (-UNIT_TOLERANCE..=1.0 + UNIT_TOLERANCE).contains(&x)
}

/// Cell of level `(k, j)` containing a unit-coordinate point already known to lie in strip `k`.
pub(crate) fn cell_at_unit(u: f64, v: f64, k: usize, j: usize) -> CellIndex {
    let square = DyadicSquare::containing(u, v, k + 1 + j);
    CellIndex {
        k,
        j,
        m: square.m,
        n: square.n - (1u64 << j),
    }
}
