use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use csv::StringRecord;

use super::{DataError, Dataset, DayFrame, Label};
use crate::graph::Graph;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const EDGES_FILE: &str = "edges.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";

fn reader(path: &Path) -> Result<csv::Reader<File>, DataError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| DataError::Csv {
            path: path.to_path_buf(),
            source,
        })
}

struct Ctx<'a> {
    path: &'a Path,
}

impl Ctx<'_> {
    fn err(&self, line: u64, message: impl Into<String>) -> DataError {
        DataError::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn csv(&self, source: csv::Error) -> DataError {
        DataError::Csv {
            path: self.path.to_path_buf(),
            source,
        }
    }

    fn header(&self, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<StringRecord, DataError> {
        let header = rdr.headers().map_err(|e| self.csv(e))?.clone();
        let ok = header.len() >= expected.len() && expected.iter().zip(header.iter()).all(|(e, h)| *e == h);
        if !ok {
            return Err(self.err(1, format!("expected header starting with {}", expected.join(","))));
        }
        Ok(header)
    }

    fn integer(&self, line: u64, field: &str, name: &str) -> Result<usize, DataError> {
        field
            .parse::<usize>()
            .map_err(|_| self.err(line, format!("{name} '{field}' is not a nonnegative integer")))
    }
}

fn line_of(rec: &StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

/// Loads the three CSV files into a validated dataset.
///
/// The node count is one more than the largest node id in the feature file.
/// Blank feature cells become 0; a `(day, node)` pair absent from the label
/// file is a missing label.
pub fn load_dataset<T: Scalar>(
    edge_file: &Path,
    feature_file: &Path,
    label_file: &Path,
) -> Result<Dataset<T>, DataError> {
    // features
    let ctx = Ctx { path: feature_file };
    let mut rdr = reader(feature_file)?;
    let header = ctx.header(&mut rdr, &["day", "node"])?;
    let feature_dim = header.len() - 2;
    if feature_dim == 0 {
        return Err(ctx.err(1, "no feature columns"));
    }
    for (j, name) in header.iter().skip(2).enumerate() {
        if name != format!("f{j}") {
            return Err(ctx.err(
                1,
                format!("feature column {} must be named f{j}, found '{name}'", j + 2),
            ));
        }
    }
    let mut rows: BTreeMap<(u32, usize), Vec<T>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ctx.csv(e))?;
        let line = line_of(&rec);
        if rec.len() != feature_dim + 2 {
            return Err(ctx.err(
                line,
                format!("expected {} fields, found {}", feature_dim + 2, rec.len()),
            ));
        }
        let day = ctx.integer(line, &rec[0], "day")? as u32;
        let node = ctx.integer(line, &rec[1], "node")?;
        let mut values = Vec::with_capacity(feature_dim);
        for cell in rec.iter().skip(2) {
            let v = if cell.is_empty() {
                T::zero()
            } else {
                let v = T::from_str_radix(cell, 10)
                    .map_err(|_| ctx.err(line, format!("feature value '{cell}' is not a number")))?;
                if !v.is_finite() {
                    return Err(ctx.err(line, format!("feature value '{cell}' is not finite")));
                }
                v
            };
            values.push(v);
        }
        if rows.insert((day, node), values).is_some() {
            return Err(ctx.err(line, format!("duplicate feature row for day {day}, node {node}")));
        }
    }
    let node_count = rows
        .keys()
        .map(|&(_, n)| n + 1)
        .max()
        .ok_or_else(|| DataError::Invalid(format!("{} has no rows", feature_file.display())))?;
    let day_ids: BTreeSet<u32> = rows.keys().map(|&(d, _)| d).collect();

    // edges
    let ctx = Ctx { path: edge_file };
    let mut rdr = reader(edge_file)?;
    ctx.header(&mut rdr, &["src", "dst"])?;
    let mut edges = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ctx.csv(e))?;
        let line = line_of(&rec);
        if rec.len() != 2 {
            return Err(ctx.err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let a = ctx.integer(line, &rec[0], "src")?;
        let b = ctx.integer(line, &rec[1], "dst")?;
        for v in [a, b] {
            if v >= node_count {
                return Err(ctx.err(
                    line,
                    format!("edge references unknown node {v} (node count {node_count})"),
                ));
            }
        }
        if a == b {
            return Err(ctx.err(line, format!("self-loop on node {a}")));
        }
        edges.push((a, b));
    }
    let graph = Graph::new(node_count, edges)?;

    // labels
    let ctx = Ctx { path: label_file };
    let mut rdr = reader(label_file)?;
    ctx.header(&mut rdr, &["day", "node", "label"])?;
    let mut labels: BTreeMap<(u32, usize), Label> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ctx.csv(e))?;
        let line = line_of(&rec);
        if rec.len() != 3 {
            return Err(ctx.err(line, format!("expected 3 fields, found {}", rec.len())));
        }
        let day = ctx.integer(line, &rec[0], "day")? as u32;
        let node = ctx.integer(line, &rec[1], "node")?;
        if node >= node_count {
            return Err(ctx.err(line, format!("label references unknown node {node}")));
        }
        if !day_ids.contains(&day) {
            return Err(ctx.err(line, format!("label references day {day} with no feature rows")));
        }
        let label = match &rec[2] {
            "0" => Some(false),
            "1" => Some(true),
            "" => None,
            other => return Err(ctx.err(line, format!("label value '{other}' is not 0 or 1"))),
        };
        if labels.insert((day, node), label).is_some() {
            return Err(ctx.err(line, format!("duplicate label for day {day}, node {node}")));
        }
    }

    let days = day_ids
        .into_iter()
        .map(|day| {
            let mut features = Matrix::zeros(node_count, feature_dim);
            let mut day_labels = vec![None; node_count];
            for node in 0..node_count {
                if let Some(v) = rows.get(&(day, node)) {
                    features.row_mut(node).copy_from_slice(v);
                }
                day_labels[node] = labels.get(&(day, node)).copied().flatten();
            }
            DayFrame {
                day_index: day,
                features,
                labels: day_labels,
            }
        })
        .collect();

    let name = feature_file
        .parent()
        .and_then(|p| p.file_name())
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, graph, days, feature_dim)
}

fn create(path: &Path) -> Result<std::io::BufWriter<File>, DataError> {
    File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes `edges.csv`, `features.csv` and `labels.csv` into `dir`.
///
/// Values use the shortest round-trip decimal form, so loading the files
/// back reproduces every feature bit-for-bit.
pub fn write_dataset<T: Scalar>(dataset: &Dataset<T>, dir: &Path) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DataError::Io { path, source }
    };

    let path = dir.join(EDGES_FILE);
    let mut w = create(&path)?;
    writeln!(w, "src,dst").map_err(io(&path))?;
    for &(a, b) in dataset.graph.edges() {
        writeln!(w, "{a},{b}").map_err(io(&path))?;
    }
    w.flush().map_err(io(&path))?;

    let path = dir.join(FEATURES_FILE);
    let mut w = create(&path)?;
    let mut header = String::from("day,node");
    for j in 0..dataset.feature_dim {
        header.push_str(&format!(",f{j}"));
    }
    writeln!(w, "{header}").map_err(io(&path))?;
    for day in &dataset.days {
        for node in 0..dataset.node_count() {
            let mut line = format!("{},{node}", day.day_index);
            for v in day.features.row(node) {
                line.push_str(&format!(",{v}"));
            }
            writeln!(w, "{line}").map_err(io(&path))?;
        }
    }
    w.flush().map_err(io(&path))?;

    let path = dir.join(LABELS_FILE);
    let mut w = create(&path)?;
    writeln!(w, "day,node,label").map_err(io(&path))?;
    for day in &dataset.days {
        for (node, label) in day.labels.iter().enumerate() {
            if let Some(l) = label {
                writeln!(w, "{},{node},{}", day.day_index, u8::from(*l)).map_err(io(&path))?;
            }
        }
    }
    w.flush().map_err(io(&path))?;
    Ok(())
}
