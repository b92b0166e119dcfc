use std::path::Path;

use super::Adjacency;
use crate::data::DomainId;
use crate::error::{Error, Result};
use crate::util::write_atomic;

/// Reads one undirected edge `id_i id_j` per line. Blank lines and lines
/// starting with `#` are skipped; commas are accepted as separators.
pub fn read_adjacency(path: &Path) -> Result<Adjacency> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let ids: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        if ids.len() != 2 {
            return Err(Error::malformed(path, i as u64 + 1, "expected two domain ids"));
        }
        let parse = |s: &str| {
            s.parse::<u32>()
                .map(DomainId)
                .map_err(|_| Error::malformed(path, i as u64 + 1, format!("bad domain id {s:?}")))
        };
        edges.push((parse(ids[0])?, parse(ids[1])?));
    }
    let domains: Vec<DomainId> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    Adjacency::new(domains, edges)
}

pub fn write_adjacency(adj: &Adjacency, path: &Path) -> Result<()> {
    let text: String = adj.edges().iter().map(|(a, b)| format!("{a} {b}\n")).collect();
    write_atomic(path, text.as_bytes())
}

/// Full matrix with a `domain_id` header row and column.
pub fn write_relation_matrix(path: &Path, ids: &[DomainId], matrix: &[Vec<f64>]) -> Result<()> {
    let mut out = String::from("domain_id");
    for id in ids {
        out.push_str(&format!(",{id}"));
    }
    out.push('\n');
    for (id, row) in ids.iter().zip(matrix) {
        out.push_str(&id.to_string());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_relation_matrix(path: &Path) -> Result<(Vec<DomainId>, Vec<Vec<f64>>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let parse_id = |s: &str, line: u64| {
        s.parse::<u32>()
            .map(DomainId)
            .map_err(|_| Error::malformed(path, line, format!("bad domain id {s:?}")))
    };
    let ids = headers.iter().skip(1).map(|s| parse_id(s, 1)).collect::<Result<Vec<_>>>()?;
    let mut matrix = Vec::with_capacity(ids.len());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        if rec.get(0).map(|s| parse_id(s, line)).transpose()? != ids.get(i).copied() {
            return Err(Error::malformed(path, line, "row id does not match column order"));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|_| Error::malformed(path, line, format!("bad number {s:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        matrix.push(row);
    }
    if matrix.len() != ids.len() {
        return Err(Error::malformed(path, matrix.len() as u64 + 1, "matrix is not square"));
    }
    Ok((ids, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacency_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adj.txt");
        std::fs::write(&path, "# grid\n0 1\n1,2\n\n2 0\n").unwrap();
        let adj = read_adjacency(&path).unwrap();
        assert_eq!(adj.edges().len(), 3);
        write_adjacency(&adj, &path).unwrap();
        assert_eq!(read_adjacency(&path).unwrap(), adj);
    }

    #[test]
    fn bad_adjacency_line_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adj.txt");
        std::fs::write(&path, "0 1\n3\n").unwrap();
        assert!(matches!(read_adjacency(&path), Err(Error::MalformedRow { line: 2, .. })));
    }

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rel.csv");
        let ids = vec![DomainId(3), DomainId(8)];
        let m = vec![vec![1.0, 0.123456789012345], vec![0.123456789012345, 1.0]];
        write_relation_matrix(&path, &ids, &m).unwrap();
        assert_eq!(read_relation_matrix(&path).unwrap(), (ids, m));
    }
}
