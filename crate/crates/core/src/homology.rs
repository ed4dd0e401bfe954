//! Vietoris-Rips persistence in degrees 0 and 1 for small point clouds.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::PersistenceMeasure;

/// Points in R^2 or R^3 with the Euclidean metric.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map_or(2, Vec::len);
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "point clouds must be 2- or 3-dimensional, got dimension {dim}"
            )));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
            coords.extend_from_slice(p);
        }
        Ok(PointCloud { dim, coords })
    }

    pub(crate) fn from_flat(dim: usize, coords: Vec<f64>) -> Self {
        debug_assert!(coords.len() % dim == 0);
        PointCloud { dim, coords }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn distance_matrix(&self) -> Vec<f64> {
        let n = self.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let dij = self.distance(i, j);
                d[i * n + j] = dij;
                d[j * n + i] = dij;
            }
        }
        d
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.distance(i, j))
            .fold(0.0, f64::max)
    }

    /// `min_i max_j d(i, j)`: beyond this scale the Rips complex is a cone.
    pub fn enclosing_radius(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.distance(i, j)).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min)
    }

    /// Reads one point per row; a non-numeric first row is treated as a header.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match parsed {
                Ok(p) => points.push(p),
                Err(_) if points.is_empty() && i == 0 => continue,
                Err(_) => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        row: i + 1,
                        message: format!("cannot parse {line:?} as coordinates"),
                    })
                }
            }
        }
        PointCloud::new(points)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|c| c.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// A simplex of dimension at most 2 with its Rips filtration value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simplex {
    vertices: [u32; 3],
    dim: u8,
    pub value: f64,
}

impl Simplex {
    pub fn vertices(&self) -> &[u32] {
        &self.vertices[..=self.dim as usize]
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }
}

/// Simplices of the Rips complex, sorted by (value, dimension, vertices).
#[derive(Debug, Clone)]
pub struct FilteredComplex {
    vertex_count: usize,
    simplices: Vec<Simplex>,
}

impl FilteredComplex {
    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn count_of_dim(&self, dim: usize) -> usize {
        self.simplices.iter().filter(|s| s.dim() == dim).count()
    }
}

pub fn rips_complex(cloud: &PointCloud, t_max: f64) -> Result<FilteredComplex> {
    if !(t_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "t_max must be positive, got {t_max}"
        )));
    }
    let n = cloud.len();
    if n > u32::MAX as usize {
        return Err(Error::InvalidInput("too many points".into()));
    }
    let d = cloud.distance_matrix();
    let mut simplices = Vec::new();
    for i in 0..n {
        simplices.push(Simplex {
            vertices: [i as u32, 0, 0],
            dim: 0,
            value: 0.0,
        });
    }
    for i in 0..n {
        for j in i + 1..n {
            let dij = d[i * n + j];
            if dij > t_max {
                continue;
            }
            simplices.push(Simplex {
                vertices: [i as u32, j as u32, 0],
                dim: 1,
                value: dij,
            });
            for k in j + 1..n {
                let diam = dij.max(d[i * n + k]).max(d[j * n + k]);
                if diam <= t_max {
                    simplices.push(Simplex {
                        vertices: [i as u32, j as u32, k as u32],
                        dim: 2,
                        value: diam,
                    });
                }
            }
        }
    }
    simplices.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.dim.cmp(&b.dim))
            .then_with(|| a.vertices().cmp(b.vertices()))
    });
    Ok(FilteredComplex {
        vertex_count: n,
        simplices,
    })
}

/// Finite bars in degrees 0 and 1; zero-length bars are discarded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagrams {
    pub h0: PersistenceMeasure,
    pub h1: PersistenceMeasure,
    /// Classes still alive at the end of the filtration.
    pub h0_infinite: usize,
    pub h1_infinite: usize,
}

impl Diagrams {
    pub fn degree(&self, degree: HomologyDegree) -> &PersistenceMeasure {
        match degree {
            HomologyDegree::H0 => &self.h0,
            HomologyDegree::H1 => &self.h1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum HomologyDegree {
    H0,
    #[default]
    H1,
}

impl std::str::FromStr for HomologyDegree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" | "h0" => Ok(HomologyDegree::H0),
            "1" | "h1" => Ok(HomologyDegree::H1),
            other => Err(Error::InvalidInput(format!(
                "unsupported homology degree {other:?}"
            ))),
        }
    }
}

pub(crate) struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// Returns false when both already share a root.
    pub(crate) fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (ra_rank, rb_rank) = (self.rank[ra as usize], self.rank[rb as usize]);
        if ra_rank < rb_rank {
            self.parent[ra as usize] = rb;
        } else {
            self.parent[rb as usize] = ra;
            if ra_rank == rb_rank {
                self.rank[ra as usize] += 1;
            }
        }
        true
    }
}

/// Symmetric difference of two sorted index lists, written into `out`.
fn add_columns(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

const NO_EDGE: u32 = u32::MAX;

/// H0 by union-find over edges (elder rule, all births at 0) and H1 by
/// column reduction of the edge-triangle boundary matrix over GF(2).
pub fn persistence(complex: &FilteredComplex) -> Diagrams {
    let n = complex.vertex_count;
    // edge rank (position among edges in filtration order), looked up by vertex pair
    let mut edge_rank = vec![NO_EDGE; n * n];
    let mut edge_values = Vec::new();
    let mut uf = UnionFind::new(n);
    let mut h0 = Vec::new();
    let mut positive = Vec::new();
    for s in complex.simplices.iter().filter(|s| s.dim == 1) {
        let (a, b) = (s.vertices[0], s.vertices[1]);
        let rank = edge_values.len() as u32;
        edge_rank[a as usize * n + b as usize] = rank;
        edge_values.push(s.value);
        if uf.union(a, b) {
            if s.value > 0.0 {
                h0.push((0.0, s.value));
            }
            positive.push(false);
        } else {
            positive.push(true);
        }
    }
    let components = (0..n as u32).filter(|&v| uf.find(v) == v).count();

    let unpaired_total = positive.iter().filter(|&&p| p).count();
    let mut owner: Vec<Option<usize>> = vec![None; edge_values.len()];
    let mut reduced: Vec<Vec<u32>> = Vec::new();
    let mut h1 = Vec::new();
    let mut paired = 0;
    let mut column = Vec::with_capacity(16);
    let mut scratch = Vec::with_capacity(16);
    for s in complex.simplices.iter().filter(|s| s.dim == 2) {
        if paired == unpaired_total {
            // every cycle is already killed; remaining columns reduce to zero
            break;
        }
        let [a, b, c] = s.vertices;
        let rank = |x: u32, y: u32| edge_rank[x as usize * n + y as usize];
        column.clear();
        column.extend([rank(a, b), rank(a, c), rank(b, c)]);
        column.sort_unstable();
        while let Some(&pivot) = column.last() {
            match owner[pivot as usize] {
                Some(idx) => {
                    add_columns(&column, &reduced[idx], &mut scratch);
                    std::mem::swap(&mut column, &mut scratch);
                }
                None => break,
            }
        }
        if let Some(&pivot) = column.last() {
            owner[pivot as usize] = Some(reduced.len());
            reduced.push(column.clone());
            paired += 1;
            let birth = edge_values[pivot as usize];
            if s.value > birth {
                h1.push((birth, s.value));
            }
        }
    }

    Diagrams {
        h0: PersistenceMeasure::from_pairs(h0).expect("H0 bars lie above the diagonal"),
        h1: PersistenceMeasure::from_pairs(h1).expect("H1 bars lie above the diagonal"),
        h0_infinite: components,
        h1_infinite: unpaired_total - paired,
    }
}

/// Order key of a triangle: (filtration value bits, lexicographic vertex code).
/// Values are nonnegative, so their IEEE bit patterns sort numerically.
type TriangleKey = (u64, u64);

struct Coboundary<'a> {
    dist: &'a [f64],
    n: usize,
    t_max: f64,
}

impl Coboundary<'_> {
    fn key(&self, a: usize, b: usize, c: usize, value: f64) -> TriangleKey {
        let mut v = [a, b, c];
        v.sort_unstable();
        let n = self.n as u64;
        (
            value.to_bits(),
            (v[0] as u64 * n + v[1] as u64) * n + v[2] as u64,
        )
    }

    fn cofaces(&self, a: usize, b: usize) -> impl Iterator<Item = TriangleKey> + '_ {
        let n = self.n;
        let dab = self.dist[a * n + b];
        (0..n)
            .filter(move |&c| c != a && c != b)
            .filter_map(move |c| {
                let diam = dab.max(self.dist[a * n + c]).max(self.dist[b * n + c]);
                (diam <= self.t_max).then(|| self.key(a, b, c, diam))
            })
    }

    fn sorted(&self, a: usize, b: usize) -> Vec<TriangleKey> {
        let mut col: Vec<TriangleKey> = self.cofaces(a, b).collect();
        col.sort_unstable();
        col
    }
}

fn add_keyed(a: &[TriangleKey], b: &[TriangleKey], out: &mut Vec<TriangleKey>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Same diagrams as [`persistence`] on `rips_complex(cloud, t_max)`, computed
/// by reducing edge coboundaries in reverse filtration order. Edges that kill
/// an H0 class are skipped (clearing) and triangles are never materialized.
pub fn persistence_cohomology(cloud: &PointCloud, t_max: f64) -> Result<Diagrams> {
    if !(t_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "t_max must be positive, got {t_max}"
        )));
    }
    let n = cloud.len();
    let dist = cloud.distance_matrix();
    let mut edges: Vec<(f64, u32, u32)> = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let d = dist[a * n + b];
            if d <= t_max {
                edges.push((d, a as u32, b as u32));
            }
        }
    }
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut uf = UnionFind::new(n);
    let mut h0 = Vec::new();
    let mut positive = Vec::new();
    for &(d, a, b) in &edges {
        if uf.union(a, b) {
            if d > 0.0 {
                h0.push((0.0, d));
            }
        } else {
            positive.push((d, a as usize, b as usize));
        }
    }
    let components = (0..n as u32).filter(|&v| uf.find(v) == v).count();

    let cob = Coboundary {
        dist: &dist,
        n,
        t_max,
    };
    let mut pivot_owner: std::collections::HashMap<TriangleKey, usize> =
        std::collections::HashMap::new();
    // reduction recipe of each paired column: the edges whose coboundaries it sums
    let mut recipes: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut h1 = Vec::new();
    let mut essential = 0;
    let mut column = Vec::new();
    let mut scratch = Vec::new();
    let mut other = Vec::new();
    for &(birth, a, b) in positive.iter().rev() {
        let Some(first) = cob.cofaces(a, b).min() else {
            essential += 1;
            continue;
        };
        if !pivot_owner.contains_key(&first) {
            pivot_owner.insert(first, recipes.len());
            recipes.push(vec![(a, b)]);
            let death = f64::from_bits(first.0);
            if death > birth {
                h1.push((birth, death));
            }
            continue;
        }
        let mut recipe = vec![(a, b)];
        column.clear();
        column.extend(cob.sorted(a, b));
        while let Some(&pivot) = column.first() {
            let Some(&owner) = pivot_owner.get(&pivot) else {
                break;
            };
            other.clear();
            for &(x, y) in &recipes[owner] {
                add_keyed(&other, &cob.sorted(x, y), &mut scratch);
                std::mem::swap(&mut other, &mut scratch);
            }
            add_keyed(&column, &other, &mut scratch);
            std::mem::swap(&mut column, &mut scratch);
            for &edge in &recipes[owner] {
                if let Some(pos) = recipe.iter().position(|&e| e == edge) {
                    recipe.swap_remove(pos);
                } else {
                    recipe.push(edge);
                }
            }
        }
        match column.first() {
            Some(&pivot) => {
                pivot_owner.insert(pivot, recipes.len());
                recipes.push(recipe);
                let death = f64::from_bits(pivot.0);
                if death > birth {
                    h1.push((birth, death));
                }
            }
            None => essential += 1,
        }
    }

    Ok(Diagrams {
        h0: PersistenceMeasure::from_pairs(h0).expect("H0 bars lie above the diagonal"),
        h1: PersistenceMeasure::from_pairs(h1).expect("H1 bars lie above the diagonal"),
        h0_infinite: components,
        h1_infinite: essential,
    })
}

/// Rips persistence up to the enclosing radius, beyond which no finite
/// feature of positive length can exist.
pub fn rips_persistence(cloud: &PointCloud) -> Result<Diagrams> {
    if cloud.len() < 2 {
        return Ok(Diagrams {
            h0: PersistenceMeasure::empty(),
            h1: PersistenceMeasure::empty(),
            h0_infinite: cloud.len(),
            h1_infinite: 0,
        });
    }
    let t_max = cloud.enclosing_radius();
    if t_max == 0.0 {
        return Ok(Diagrams {
            h0: PersistenceMeasure::empty(),
            h1: PersistenceMeasure::empty(),
            h0_infinite: 1,
            h1_infinite: 0,
        });
    }
    persistence_cohomology(cloud, t_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    fn cloud(points: &[[f64; 2]]) -> PointCloud {
        PointCloud::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn rejects_bad_clouds() {
        assert!(PointCloud::new(vec![vec![1.0]]).is_err());
        assert!(PointCloud::new(vec![vec![1.0, 2.0], vec![1.0, 2.0, 3.0]]).is_err());
        assert!(PointCloud::new(vec![vec![f64::NAN, 2.0]]).is_err());
    }

    #[test]
    fn two_point_complex() {
        let c = rips_complex(&cloud(&[[0.0, 0.0], [1.0, 0.0]]), 2.0).unwrap();
        assert_eq!(c.count_of_dim(0), 2);
        assert_eq!(c.count_of_dim(1), 1);
        assert_eq!(c.simplices()[2].value, 1.0);
        assert!(rips_complex(&cloud(&[[0.0, 0.0]]), 0.0).is_err());
    }

    #[test]
    fn equilateral_triangle_complex() {
        let h = 3f64.sqrt() / 2.0;
        let c = rips_complex(&cloud(&[[0.0, 0.0], [1.0, 0.0], [0.5, h]]), 2.0).unwrap();
        assert_eq!(c.count_of_dim(0), 3);
        assert_eq!(c.count_of_dim(1), 3);
        assert_eq!(c.count_of_dim(2), 1);
        for s in c.simplices().iter().filter(|s| s.dim() > 0) {
            assert!((s.value - 1.0).abs() < 1e-15);
        }
        // faces precede cofaces at equal values
        assert_eq!(c.simplices().last().unwrap().dim(), 2);
    }

    #[test]
    fn threshold_below_all_distances_leaves_vertices() {
        let c = rips_complex(&cloud(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), 0.5).unwrap();
        assert_eq!(c.simplices().len(), 3);
        assert!(c.simplices().iter().all(|s| s.dim() == 0));
    }

    #[test]
    fn two_points_give_one_finite_bar() {
        let d = 0.7;
        let complex = rips_complex(&cloud(&[[0.0, 0.0], [d, 0.0]]), 2.0).unwrap();
        let dg = persistence(&complex);
        assert_eq!(dg.h0.atoms().len(), 1);
        assert_eq!((dg.h0.atoms()[0].birth, dg.h0.atoms()[0].death), (0.0, d));
        assert!(dg.h1.is_empty());
        assert_eq!(dg.h0_infinite, 1);
    }

    #[test]
    fn unit_square_has_one_loop() {
        let sq = cloud(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let dg = persistence(&rips_complex(&sq, 2.0).unwrap());
        assert_eq!(dg.h1.atoms().len(), 1);
        let bar = dg.h1.atoms()[0];
        assert_eq!(bar.birth, 1.0);
        assert_eq!(bar.death, SQRT_2);
        assert_eq!(bar.weight, 1.0);
        assert_eq!(dg.h0.total_mass(), 3.0);
        assert_eq!(dg.h1_infinite, 0);

        let same = rips_persistence(&sq).unwrap();
        assert_eq!(same.h1.atoms(), dg.h1.atoms());
    }

    #[test]
    fn truncated_loop_is_infinite() {
        let sq = cloud(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let dg = persistence(&rips_complex(&sq, 1.2).unwrap());
        assert!(dg.h1.is_empty());
        assert_eq!(dg.h1_infinite, 1);
    }

    #[test]
    fn enclosing_radius_truncation_keeps_every_finite_bar() {
        // a noisy circle plus a few outliers
        let pts: Vec<[f64; 2]> = (0..24)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 24.0;
                let r = 1.0 + 0.05 * ((i * 7) % 5) as f64;
                [r * a.cos(), r * a.sin()]
            })
            .chain([[3.0, 0.2], [-2.5, 1.0]])
            .collect();
        let c = cloud(&pts);
        let full = persistence(&rips_complex(&c, c.diameter()).unwrap());
        let truncated = rips_persistence(&c).unwrap();
        assert_eq!(full.h0.atoms(), truncated.h0.atoms());
        assert_eq!(full.h1.atoms(), truncated.h1.atoms());
        assert!(c.enclosing_radius() < c.diameter());
    }

    #[test]
    fn point_cloud_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.csv");
        let c = PointCloud::new(vec![vec![0.5, 1.25, -2.0], vec![3.0, 0.1, 1e-3]]).unwrap();
        c.write_csv(&path).unwrap();
        assert_eq!(PointCloud::read_csv(&path).unwrap(), c);
        fs::write(&path, "x,y\n1,2\n3,4\n").unwrap();
        assert_eq!(PointCloud::read_csv(&path).unwrap().len(), 2);
        fs::write(&path, "1,2\n3,x\n").unwrap();
        assert!(matches!(
            PointCloud::read_csv(&path),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap()
    }

    /// Edge weights of a Euclidean minimum spanning tree, by Prim's algorithm.
    fn mst_weights(c: &PointCloud) -> Vec<f64> {
        let n = c.len();
        let mut in_tree = vec![false; n];
        let mut best = vec![f64::INFINITY; n];
        best[0] = 0.0;
        let mut weights = Vec::new();
        for _ in 0..n {
            let next = (0..n)
                .filter(|&i| !in_tree[i])
                .min_by(|&a, &b| best[a].total_cmp(&best[b]))
                .unwrap();
            in_tree[next] = true;
            if next != 0 {
                weights.push(best[next]);
            }
            for i in 0..n {
                if !in_tree[i] {
                    best[i] = best[i].min(c.distance(next, i));
                }
            }
        }
        weights.sort_by(f64::total_cmp);
        weights
    }

    fn deaths(m: &PersistenceMeasure) -> Vec<f64> {
        let mut d: Vec<f64> = m
            .atoms()
            .iter()
            .flat_map(|a| std::iter::repeat_n(a.death, a.weight as usize))
            .collect();
        d.sort_by(f64::total_cmp);
        d
    }

    #[test]
    fn h0_deaths_are_mst_edge_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..20 {
            let c = random_cloud(&mut rng, 30, 2 + trial % 2);
            let dg = rips_persistence(&c).unwrap();
            let got = deaths(&dg.h0);
            let want = mst_weights(&c);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
            assert_eq!(dg.h0_infinite, 1);
        }
    }

    #[test]
    fn cohomology_matches_standard_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for trial in 0..15 {
            let c = random_cloud(&mut rng, 22, 2 + trial % 2);
            for t_max in [c.diameter(), c.enclosing_radius(), 0.6] {
                let standard = persistence(&rips_complex(&c, t_max).unwrap());
                let fast = persistence_cohomology(&c, t_max).unwrap();
                assert_eq!(standard.h0.atoms(), fast.h0.atoms());
                assert_eq!(standard.h1.atoms(), fast.h1.atoms());
                assert_eq!(standard.h0_infinite, fast.h0_infinite);
                assert_eq!(standard.h1_infinite, fast.h1_infinite);
            }
        }
    }

    #[test]
    fn diagrams_do_not_depend_on_point_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_cloud(&mut rng, 40, 3);
        let mut pts: Vec<Vec<f64>> = c.points().map(|p| p.to_vec()).collect();
        pts.reverse();
        pts.swap(3, 17);
        let shuffled = PointCloud::new(pts).unwrap();
        let (a, b) = (
            rips_persistence(&c).unwrap(),
            rips_persistence(&shuffled).unwrap(),
        );
        assert_eq!(a.h0.atoms(), b.h0.atoms());
        assert_eq!(a.h1.atoms(), b.h1.atoms());
    }
}
