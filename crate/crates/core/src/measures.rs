//! Persistence measures: diagrams, weighted atomic measures and their empirical means.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    cell_at_unit, diagonal_distance_unchecked, strip_of_height, CellIndex, DomainGeometry, Order,
};

/// A weighted point `(birth, death)` above the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub birth: f64,
    pub death: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(birth: f64, death: f64, weight: f64) -> Self {
        Atom {
            birth,
            death,
            weight,
        }
    }

    pub fn unit(birth: f64, death: f64) -> Self {
        Atom::new(birth, death, 1.0)
    }

    fn validate(&self) -> Result<()> {
        if !self.birth.is_finite() || !self.death.is_finite() {
            return Err(Error::InvalidInput(format!(
                "atom ({}, {}) has a non-finite coordinate",
                self.birth, self.death
            )));
        }
        if !(self.death > self.birth) {
            return Err(Error::InvalidInput(format!(
                "atom ({}, {}) is not strictly above the diagonal",
                self.birth, self.death
            )));
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "atom ({}, {}) has non-positive weight {}",
                self.birth, self.death, self.weight
            )));
        }
        Ok(())
    }
}

/// Finite nonnegative measure on the open half-plane above the diagonal,
/// stored as merged weighted atoms sorted by `(birth, death)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PersistenceMeasure {
    atoms: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

impl PersistenceMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        for atom in &atoms {
            atom.validate()?;
        }
        Ok(PersistenceMeasure {
            atoms: canonicalize(atoms),
            provenance: None,
        })
    }

    /// A persistence diagram: unit mass per `(birth, death)` pair.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        PersistenceMeasure::new(pairs.into_iter().map(|(b, d)| Atom::unit(b, d)).collect())
    }

    pub fn empty() -> Self {
        PersistenceMeasure::default()
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = Some(provenance.into());
        self
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Multiplies every weight by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "scaling factor must be positive, got {factor}"
            )));
        }
        Ok(PersistenceMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom::new(a.birth, a.death, a.weight * factor))
                .collect(),
            provenance: self.provenance.clone(),
        })
    }

    /// Sum of two measures.
    pub fn plus(&self, other: &PersistenceMeasure) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        PersistenceMeasure {
            atoms: canonicalize(atoms),
            provenance: None,
        }
    }

    /// `Pers_p` with ground norm `l_q`; the `p`-th root is taken for finite `p`.
    pub fn total_persistence(&self, p: Order, q: Order) -> f64 {
        let distances = self
            .atoms
            .iter()
            .map(|a| (a.weight, diagonal_distance_unchecked(a.birth, a.death, q)));
        match p {
            Order::Infinity => distances.map(|(_, d)| d).fold(0.0, f64::max),
            Order::Finite(p) => distances
                .map(|(w, d)| w * d.powf(p))
                .sum::<f64>()
                .powf(1.0 / p),
        }
    }

    /// Mass of the atoms that fall into `cell`.
    pub fn mass_in_cell(&self, cell: &CellIndex, geom: &DomainGeometry) -> f64 {
        self.atoms
            .iter()
            .filter(|a| {
                locate(a, geom)
                    .is_some_and(|(u, v, k)| k == cell.k && cell_at_unit(u, v, k, cell.j) == *cell)
            })
            .map(|a| a.weight)
            .sum()
    }

    /// Mass of the atoms in strip `A_k`.
    pub fn mass_in_strip(&self, k: usize, geom: &DomainGeometry) -> f64 {
        self.atoms
            .iter()
            .filter(|a| locate(a, geom).is_some_and(|(_, _, strip)| strip == k))
            .map(|a| a.weight)
            .sum()
    }

    /// Mass of atoms lying outside `Omega_R`.
    pub fn mass_outside(&self, geom: &DomainGeometry) -> f64 {
        self.atoms
            .iter()
            .filter(|a| !geom.contains(a.birth, a.death))
            .map(|a| a.weight)
            .sum()
    }
}

/// Unit coordinates and strip of an atom, `None` outside `Omega_R`.
pub(crate) fn locate(atom: &Atom, geom: &DomainGeometry) -> Option<(f64, f64, usize)> {
    let (u, v) = geom.unit_coords(atom.birth, atom.death).ok()?;
    strip_of_height(v).map(|k| (u, v, k))
}

fn canonicalize(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| {
        a.birth
            .total_cmp(&b.birth)
            .then_with(|| a.death.total_cmp(&b.death))
    });
    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match merged.last_mut() {
            Some(last) if last.birth == atom.birth && last.death == atom.death => {
                last.weight += atom.weight;
            }
            _ => merged.push(atom),
        }
    }
    merged
}

/// `(1/N) sum_i mu_i` together with the sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMean {
    pub measure: PersistenceMeasure,
    pub samples: usize,
}

pub fn empirical_mean(diagrams: &[PersistenceMeasure]) -> Result<EmpiricalMean> {
    if diagrams.is_empty() {
        return Err(Error::InvalidInput(
            "empirical mean needs at least one diagram".into(),
        ));
    }
    let scale = 1.0 / diagrams.len() as f64;
    let atoms = diagrams
        .iter()
        .flat_map(|d| d.atoms.iter())
        .map(|a| Atom::new(a.birth, a.death, a.weight * scale))
        .collect();
    Ok(EmpiricalMean {
        measure: PersistenceMeasure {
            atoms: canonicalize(atoms),
            provenance: Some(format!("empirical mean of {} diagrams", diagrams.len())),
        },
        samples: diagrams.len(),
    })
}

/// A diagram read from disk, with the number of infinite bars that were dropped.
#[derive(Debug, Clone)]
pub struct DiagramFile {
    pub measure: PersistenceMeasure,
    pub dropped_infinite: usize,
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads `birth,death[,weight]` CSV, or a JSON array of `[birth, death, weight?]`.
pub fn read_diagram(path: &Path) -> Result<DiagramFile> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let rows = if is_json(path) {
        json_rows(path, &text)?
    } else {
        csv_rows(path, &text)?
    };
    let mut atoms = Vec::with_capacity(rows.len());
    let mut dropped_infinite = 0;
    for (row, birth, death, weight) in rows {
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            message,
        };
        if !birth.is_finite() {
            return Err(parse_err(format!("birth {birth} is not finite")));
        }
        if death == f64::INFINITY {
            dropped_infinite += 1;
            continue;
        }
        if !death.is_finite() {
            return Err(parse_err(format!("death {death} is not finite")));
        }
        if !(death > birth) {
            return Err(parse_err(format!(
                "death {death} is not greater than birth {birth}"
            )));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(parse_err(format!("weight {weight} is not positive")));
        }
        atoms.push(Atom::new(birth, death, weight));
    }
    Ok(DiagramFile {
        measure: PersistenceMeasure::new(atoms)?.with_provenance(path.display().to_string()),
        dropped_infinite,
    })
}

type Row = (usize, f64, f64, f64);

fn parse_number(field: &str) -> Option<f64> {
    let f = field.trim();
    match f.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
        _ => f.parse().ok(),
    }
}

fn csv_rows(path: &Path, text: &str) -> Result<Vec<Row>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            message,
        };
        if rows.is_empty()
            && i == 0
            && record
                .get(0)
                .is_some_and(|f| f.eq_ignore_ascii_case("birth"))
        {
            continue;
        }
        if record.len() < 2 || record.len() > 3 {
            return Err(err(format!(
                "expected 2 or 3 fields, found {}",
                record.len()
            )));
        }
        let mut values = [0.0, 0.0, 1.0];
        for (slot, field) in values.iter_mut().zip(record.iter()) {
            *slot = parse_number(field)
                .ok_or_else(|| err(format!("cannot parse {field:?} as a number")))?;
        }
        rows.push((row, values[0], values[1], values[2]));
    }
    Ok(rows)
}

fn json_rows(path: &Path, text: &str) -> Result<Vec<Row>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let entries = value.as_array().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        row: 0,
        message: "expected a JSON array of [birth, death, weight] entries".into(),
    })?;
    let mut rows = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let row = i + 1;
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            message,
        };
        let fields = entry
            .as_array()
            .filter(|f| (2..=3).contains(&f.len()))
            .ok_or_else(|| err("expected [birth, death] or [birth, death, weight]".into()))?;
        let mut values = [0.0, 0.0, 1.0];
        for (idx, (slot, field)) in values.iter_mut().zip(fields).enumerate() {
            *slot = match field {
                serde_json::Value::Number(n) => n.as_f64(),
                serde_json::Value::String(s) => parse_number(s),
                serde_json::Value::Null if idx == 1 => Some(f64::INFINITY),
                _ => None,
            }
            .ok_or_else(|| err(format!("cannot parse {field} as a number")))?;
        }
        rows.push((row, values[0], values[1], values[2]));
    }
    Ok(rows)
}

/// Writes a measure as CSV (`birth,death,weight`) or JSON, chosen by extension.
pub fn write_diagram(measure: &PersistenceMeasure, path: &Path) -> Result<()> {
    let file =
        fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e| Error::io(format!("writing {}", path.display()), e);
    if is_json(path) {
        let rows: Vec<[f64; 3]> = measure
            .atoms()
            .iter()
            .map(|a| [a.birth, a.death, a.weight])
            .collect();
        serde_json::to_writer(&mut out, &rows)?;
        writeln!(out).map_err(io_err)?;
    } else {
        writeln!(out, "birth,death,weight").map_err(io_err)?;
        for a in measure.atoms() {
            writeln!(out, "{},{},{}", a.birth, a.death, a.weight).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

/// Reads every `.csv`/`.json` diagram in a directory, in file-name order.
pub fn read_diagram_dir(dir: &Path) -> Result<Vec<(PathBuf, DiagramFile)>> {
    let entries =
        fs::read_dir(dir).map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
            .path();
        let known = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("csv") || e.eq_ignore_ascii_case("json"));
        if path.is_file() && known {
            paths.push(path);
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|p| read_diagram(&p).map(|d| (p, d)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    const L2: Order = Order::Finite(2.0);

    #[test]
    fn rejects_atoms_on_or_below_the_diagonal() {
        assert!(PersistenceMeasure::from_pairs([(1.0, 1.0)]).is_err());
        assert!(PersistenceMeasure::from_pairs([(1.0, 0.5)]).is_err());
        assert!(PersistenceMeasure::new(vec![Atom::new(0.0, 1.0, 0.0)]).is_err());
        assert!(PersistenceMeasure::new(vec![Atom::new(0.0, f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn equal_atoms_are_merged() {
        let mu = PersistenceMeasure::from_pairs([(0.0, 1.0), (0.5, 2.0), (0.0, 1.0)]).unwrap();
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.atoms()[0], Atom::new(0.0, 1.0, 2.0));
    }

    #[test]
    fn total_persistence_examples() {
        let single = PersistenceMeasure::from_pairs([(0.0, 1.0)]).unwrap();
        assert_relative_eq!(
            single.total_persistence(Order::Finite(2.0), L2),
            1.0 / SQRT_2,
            epsilon = 1e-15
        );
        assert_eq!(
            PersistenceMeasure::empty().total_persistence(Order::Finite(3.0), L2),
            0.0
        );
        assert_eq!(
            PersistenceMeasure::empty().total_persistence(Order::Infinity, L2),
            0.0
        );
        let two = PersistenceMeasure::from_pairs([(0.0, 1.0), (0.0, 2.0)]).unwrap();
        assert_relative_eq!(
            two.total_persistence(Order::Finite(1.0), L2),
            3.0 / SQRT_2,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            two.total_persistence(Order::Infinity, L2),
            2.0 / SQRT_2,
            epsilon = 1e-14
        );
    }

    #[test]
    fn total_persistence_is_bounded_on_the_support_region() {
        let g = DomainGeometry::new(2.0).unwrap();
        let pts: Vec<(f64, f64)> = (1..40)
            .map(|i| g.from_unit_square(i as f64 / 40.0, (i % 7 + 1) as f64 / 8.0))
            .collect();
        let mu = PersistenceMeasure::from_pairs(pts).unwrap();
        // sup of ||x - x_perp||_2 over Omega_R is R (attained at v = 1)
        assert!(mu.total_persistence(Order::Infinity, L2) <= g.radius() + 1e-12);
        // l_inf and l_1 distances are 1/sqrt(2) and sqrt(2) times the l_2 one
        assert!(
            mu.total_persistence(Order::Infinity, Order::Infinity) <= g.radius() / SQRT_2 + 1e-12
        );
        assert!(
            mu.total_persistence(Order::Infinity, Order::Finite(1.0))
                <= g.radius() * SQRT_2 + 1e-12
        );
    }

    #[test]
    fn empirical_mean_examples() {
        let d = PersistenceMeasure::from_pairs([(0.0, 1.0)]).unwrap();
        let one = empirical_mean(std::slice::from_ref(&d)).unwrap();
        assert_eq!(one.samples, 1);
        assert_eq!(one.measure.atoms(), d.atoms());

        let two = empirical_mean(&[d.clone(), d.clone()]).unwrap();
        assert_eq!(two.measure.atoms(), &[Atom::new(0.0, 1.0, 1.0)]);

        let half = empirical_mean(&[d, PersistenceMeasure::empty()]).unwrap();
        assert_eq!(half.measure.atoms(), &[Atom::new(0.0, 1.0, 0.5)]);

        assert!(empirical_mean(&[]).is_err());
    }

    #[test]
    fn mass_in_cell_uses_half_open_membership() {
        let g = DomainGeometry::new(1.0).unwrap();
        // (u, v) = (0.5, 0.75) sits on the edge shared by cells m = 0 and m = 1 of level (0, 0)
        let (t1, t2) = g.from_unit_square(0.5, 0.75);
        let mu = PersistenceMeasure::from_pairs([(t1, t2)]).unwrap();
        let cells = g.cells_at_level(0, 0);
        let masses: Vec<f64> = cells.iter().map(|c| mu.mass_in_cell(c, &g)).collect();
        assert_eq!(masses.iter().sum::<f64>(), 1.0);
        assert_eq!(masses.iter().filter(|&&m| m > 0.0).count(), 1);

        let inside = g.from_unit_square(0.2, 0.6);
        let mu = PersistenceMeasure::from_pairs([inside]).unwrap();
        assert_eq!(
            mu.mass_in_cell(
                &CellIndex {
                    k: 0,
                    j: 0,
                    m: 0,
                    n: 0
                },
                &g
            ),
            1.0
        );
    }

    #[test]
    fn cell_masses_add_up_to_strip_mass() {
        let g = DomainGeometry::new(1.0).unwrap();
        let pts: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let u = ((i * 37) % 200) as f64 / 200.0;
                let v = 0.26 + 0.2 * ((i * 11) % 100) as f64 / 100.0;
                g.from_unit_square(u, v)
            })
            .collect();
        let mu = PersistenceMeasure::from_pairs(pts).unwrap();
        for j in 0..4 {
            let total: f64 = g
                .cells_at_level(1, j)
                .iter()
                .map(|c| mu.mass_in_cell(c, &g))
                .sum();
            assert_relative_eq!(total, mu.mass_in_strip(1, &g), epsilon = 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let pairs: Vec<(f64, f64)> = (0..100)
            .map(|i| (i as f64 * 0.013, 2.0 + i as f64 * 0.0271))
            .collect();
        let mu = PersistenceMeasure::from_pairs(pairs)
            .unwrap()
            .scaled(0.3)
            .unwrap();
        for name in ["d.csv", "d.json"] {
            let path = dir.path().join(name);
            write_diagram(&mu, &path).unwrap();
            let back = read_diagram(&path).unwrap();
            assert_eq!(back.measure.atoms(), mu.atoms());
            assert_eq!(back.dropped_infinite, 0);
        }

        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "birth,death\n0.0,1.0\n0.2,0.1\n").unwrap();
        match read_diagram(&bad) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected parse error, got {other:?}"),
        }

        let inf = dir.path().join("inf.csv");
        fs::write(&inf, "birth,death\n0.0,inf\n0.1,0.4\n").unwrap();
        let read = read_diagram(&inf).unwrap();
        assert_eq!(read.dropped_infinite, 1);
        assert_eq!(read.measure.len(), 1);

        let junk = dir.path().join("junk.csv");
        fs::write(&junk, "0.0,abc\n").unwrap();
        assert!(matches!(
            read_diagram(&junk),
            Err(Error::Parse { row: 1, .. })
        ));

        let js = dir.path().join("inf.json");
        fs::write(&js, "[[0.0, null], [0.1, \"inf\"], [0.0, 1.0, 2.5]]").unwrap();
        let read = read_diagram(&js).unwrap();
        assert_eq!(read.dropped_infinite, 2);
        assert_eq!(read.measure.atoms(), &[Atom::new(0.0, 1.0, 2.5)]);
    }

    fn arb_diagram() -> impl Strategy<Value = PersistenceMeasure> {
        prop::collection::vec((0.0f64..1.0, 0.01f64..1.0), 0..12).prop_map(|v| {
            PersistenceMeasure::from_pairs(v.into_iter().map(|(b, l)| (b, b + l))).unwrap()
        })
    }

    proptest! {
        #[test]
        fn empirical_mean_is_linear_on_cells(ds in prop::collection::vec(arb_diagram(), 1..6), j in 0usize..3) {
            let g = DomainGeometry::new(4.0).unwrap();
            let mean = empirical_mean(&ds).unwrap();
            prop_assert!((mean.measure.total_mass() - ds.iter().map(|d| d.total_mass()).sum::<f64>() / ds.len() as f64).abs() < 1e-12);
            for k in 0..4 {
                for cell in g.cells_at_level(k, j) {
                    let direct: f64 = ds.iter().map(|d| d.mass_in_cell(&cell, &g)).sum::<f64>() / ds.len() as f64;
                    prop_assert!((mean.measure.mass_in_cell(&cell, &g) - direct).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn first_total_persistence_is_homogeneous(d in arb_diagram(), c in 0.01f64..100.0) {
            let scaled = d.scaled(c).unwrap();
            let p1 = Order::Finite(1.0);
            let lhs = scaled.total_persistence(p1, L2);
            let rhs = c * d.total_persistence(p1, L2);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }
    }
}
