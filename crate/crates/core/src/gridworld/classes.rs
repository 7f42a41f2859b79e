use std::io::{Read, Write};

use super::{Cell, GridError, GridMap};

const LIBRARY_CLASSES_CSV: &str = include_str!("../../assets/classes.csv");

/// One coded (source, destination) path class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathClass {
    pub id: usize,
    pub source: Cell,
    pub destination: Cell,
}

/// Ordered class coding; entry `k` has id `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathClassTable {
    entries: Vec<PathClass>,
}

impl PathClassTable {
    pub fn new(entries: Vec<PathClass>) -> Result<Self, GridError> {
        if entries.is_empty() {
            return Err(GridError::InvalidTable("no classes".into()));
        }
        for (k, e) in entries.iter().enumerate() {
            if e.id != k {
                return Err(GridError::InvalidTable(format!(
                    "class ids must be contiguous from 0; entry {k} has id {}",
                    e.id
                )));
            }
        }
        Ok(Self { entries })
    }

    /// The six source/destination codings used on the library floor.
    pub fn library() -> Self {
        Self::read_csv(LIBRARY_CLASSES_CSV.as_bytes()).expect("bundled class table is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&PathClass> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> &[PathClass] {
        &self.entries
    }

    pub fn find(&self, source: Cell, destination: Cell) -> Option<&PathClass> {
        self.entries
            .iter()
            .find(|e| e.source == source && e.destination == destination)
    }

    /// Check every endpoint lies on a public cell of `map`.
    pub fn check_against(&self, map: &GridMap) -> Result<(), GridError> {
        for e in &self.entries {
            for (what, cell) in [("source", e.source), ("destination", e.destination)] {
                if !map.is_public(cell) {
                    return Err(GridError::InvalidSpec {
                        class_id: e.id,
                        reason: format!("{what} {cell:?} is not a public cell"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Parse `class,x1,y1,x2,y2` CSV with a header row.
    pub fn read_csv<R: Read>(mut reader: R) -> Result<Self, GridError> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.replace(' ', "") == "class,x1,y1,x2,y2" => {}
            _ => {
                return Err(GridError::MalformedCsv {
                    line: 1,
                    reason: "expected header class,x1,y1,x2,y2".into(),
                })
            }
        }
        let mut entries = Vec::new();
        for (n, line) in lines {
            let fields: Result<Vec<usize>, _> =
                line.split(',').map(|f| f.trim().parse::<usize>()).collect();
            match fields.as_deref() {
                Ok(&[id, x1, y1, x2, y2]) => entries.push(PathClass {
                    id,
                    source: (x1, y1),
                    destination: (x2, y2),
                }),
                _ => {
                    return Err(GridError::MalformedCsv {
                        line: n + 1,
                        reason: "expected five non-negative integers".into(),
                    })
                }
            }
        }
        Self::new(entries)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        writeln!(w, "class,x1,y1,x2,y2")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.id, e.source.0, e.source.1, e.destination.0, e.destination.1
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_table_matches_coding() {
        let t = PathClassTable::library();
        assert_eq!(t.len(), 6);
        assert_eq!(t.get(0).unwrap().source, (0, 0));
        assert_eq!(t.get(0).unwrap().destination, (14, 7));
        assert_eq!(t.get(2).unwrap().source, (2, 5));
        assert_eq!(t.get(2).unwrap().destination, (16, 12));
        assert_eq!(t.get(4).unwrap().destination, (18, 0));
        assert_eq!(t.get(5).unwrap().source, (4, 0));
        assert_eq!(t.get(5).unwrap().destination, (10, 10));
        assert_eq!(t.find((2, 5), (16, 8)).unwrap().id, 3);
        t.check_against(&GridMap::library()).unwrap();
    }

    #[test]
    fn non_contiguous_ids_rejected() {
        let csv = "class,x1,y1,x2,y2\n0,0,0,1,1\n2,0,0,1,0\n";
        assert!(matches!(
            PathClassTable::read_csv(csv.as_bytes()),
            Err(GridError::InvalidTable(_))
        ));
    }

    #[test]
    fn endpoint_on_blocked_cell_rejected() {
        let map = GridMap::from_ascii("..\n.#").unwrap();
        let t = PathClassTable::read_csv("class,x1,y1,x2,y2\n0,0,0,1,1\n".as_bytes()).unwrap();
        assert!(matches!(
            t.check_against(&map),
            Err(GridError::InvalidSpec { class_id: 0, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let t = PathClassTable::library();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(PathClassTable::read_csv(buf.as_slice()).unwrap(), t);
    }
}
