//! Instance file I/O: the native JSON format and free-format MPS.
//!
//! The JSON format is a direct serialization of [`MilpInstance`]
//! (`{n, m, obj, rows, rhs, sense, lb, ub, int_set, annotations}`) and
//! round-trips exactly, infinite bounds included (written as the strings
//! `"inf"` / `"-inf"` since JSON has no infinity literal).
//!
//! The MPS writer emits free-format (whitespace-delimited) sections NAME,
//! ROWS, COLUMNS (with INTORG/INTEND integrality markers), RHS, BOUNDS,
//! ENDATA. MPS carries no annotations, so an MPS round-trip preserves the
//! mathematical content but drops provenance labels; row/column identity is
//! positional (`r{i}` / `x{j}` names are generated).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{MilpError, MilpInstance, RowSense, SparseRow};

/// Serde adapter for bound vectors: finite entries as numbers, infinities as
/// `"inf"` / `"-inf"` strings.
pub(crate) mod bound_vec {
    use serde::de::Error as _;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Num(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for &x in v {
            if x == f64::INFINITY {
                seq.serialize_element("inf")?;
            } else if x == f64::NEG_INFINITY {
                seq.serialize_element("-inf")?;
            } else {
                seq.serialize_element(&x)?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<Entry> = Vec::deserialize(d)?;
        raw.into_iter()
            .map(|e| match e {
                Entry::Num(x) => Ok(x),
                Entry::Str(s) => match s.as_str() {
                    "inf" | "+inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    other => Err(D::Error::custom(format!(
                        "bound entry must be a number, \"inf\", or \"-inf\", got \"{other}\""
                    ))),
                },
            })
            .collect()
    }
}

pub fn export_json(inst: &MilpInstance, path: impl AsRef<Path>) -> Result<(), MilpError> {
    inst.validate()?;
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), inst)?;
    Ok(())
}

pub fn import_json(path: impl AsRef<Path>) -> Result<MilpInstance, MilpError> {
    let file = std::fs::File::open(path)?;
    let inst: MilpInstance = serde_json::from_reader(std::io::BufReader::new(file))?;
    inst.validate()?;
    Ok(inst)
}

/// Load an instance from `.json` or `.mps`, dispatching on the extension.
pub fn import_instance(path: impl AsRef<Path>) -> Result<MilpInstance, MilpError> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => import_json(path),
        Some("mps") => import_mps(path),
        other => Err(MilpError::UnknownFormat(
            other.unwrap_or("<none>").to_string(),
        )),
    }
}

pub fn export_mps(inst: &MilpInstance, path: impl AsRef<Path>) -> Result<(), MilpError> {
    inst.validate()?;
    let mut out = String::new();
    let _ = writeln!(out, "NAME          MILPLAN");
    let _ = writeln!(out, "ROWS");
    let _ = writeln!(out, " N  COST");
    for i in 0..inst.m {
        let tag = match inst.sense[i] {
            RowSense::Le => 'L',
            RowSense::Ge => 'G',
            RowSense::Eq => 'E',
        };
        let _ = writeln!(out, " {tag}  r{i}");
    }

    // Column-major walk. Every column gets an explicit COST entry (zero or
    // not) so that columns without row entries are still declared.
    let mut col_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); inst.n];
    for (i, row) in inst.rows.iter().enumerate() {
        for (j, a) in row.iter() {
            if a != 0.0 {
                col_rows[j].push((i, a));
            }
        }
    }
    let _ = writeln!(out, "COLUMNS");
    let mut in_int = false;
    for j in 0..inst.n {
        let want_int = inst.int_set.contains(&j);
        if want_int != in_int {
            let marker = if want_int { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, "    MARK{j:04}   'MARKER'                 '{marker}'");
            in_int = want_int;
        }
        let mut entries: Vec<(String, f64)> = vec![("COST".to_string(), inst.obj[j])];
        for &(i, a) in &col_rows[j] {
            entries.push((format!("r{i}"), a));
        }
        for pair in entries.chunks(2) {
            let mut line = format!("    x{j:<9}", j = j);
            for (row_name, v) in pair {
                let _ = write!(line, "{row_name:<10}{v:<15}");
            }
            let _ = writeln!(out, "{}", line.trim_end());
        }
    }
    if in_int {
        let _ = writeln!(out, "    MARKEND    'MARKER'                 'INTEND'");
    }

    let _ = writeln!(out, "RHS");
    for i in 0..inst.m {
        if inst.rhs[i] != 0.0 {
            let _ = writeln!(out, "    RHS       r{i:<8}{v}", v = inst.rhs[i]);
        }
    }

    // Defaults are [0, +inf) for continuous columns; integer columns always
    // get explicit lines because readers disagree on integer defaults.
    let _ = writeln!(out, "BOUNDS");
    for j in 0..inst.n {
        let (lo, hi) = (inst.lb[j], inst.ub[j]);
        let integer = inst.int_set.contains(&j);
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " FR BND       x{j}");
            continue;
        }
        if lo == hi {
            let _ = writeln!(out, " FX BND       x{j:<8}{lo}");
            continue;
        }
        if lo == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND       x{j}");
        } else if lo != 0.0 || integer {
            let _ = writeln!(out, " LO BND       x{j:<8}{lo}");
        }
        if hi == f64::INFINITY {
            if integer || lo == f64::NEG_INFINITY {
                let _ = writeln!(out, " PL BND       x{j}");
            }
        } else {
            let _ = writeln!(out, " UP BND       x{j:<8}{hi}");
        }
    }
    let _ = writeln!(out, "ENDATA");
    std::fs::write(path, out)?;
    Ok(())
}

pub fn import_mps(path: impl AsRef<Path>) -> Result<MilpInstance, MilpError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let err = |line: usize, msg: String| MilpError::MpsParse {
        path: path_str.clone(),
        line,
        msg,
    };

    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        Rows,
        Columns,
        Rhs,
        Bounds,
        Done,
    }

    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut row_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut senses: Vec<RowSense> = Vec::new();
    let mut col_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut col_order: Vec<String> = Vec::new();
    let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new(); // (row, col) -> coeff
    let mut obj: BTreeMap<usize, f64> = BTreeMap::new();
    let mut rhs: BTreeMap<usize, f64> = BTreeMap::new();
    let mut bounds: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut int_cols: Vec<usize> = Vec::new();
    let mut in_int = false;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let indented = raw.starts_with(' ') || raw.starts_with('\t');
        let fields: Vec<&str> = raw.split_whitespace().collect();

        // Section headers start in column 1. Bound lines also start with a
        // short indent in our writer, so "unindented" alone is not enough:
        // a header is unindented AND its first token is a known keyword.
        if !indented {
            section = match fields[0] {
                "NAME" => section, // name value ignored
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::Done,
                "RANGES" => {
                    return Err(err(lineno, "RANGES section is not supported".into()));
                }
                other => {
                    return Err(err(lineno, format!("unknown section keyword '{other}'")));
                }
            };
            if section == Section::Done {
                break;
            }
            continue;
        }

        match section {
            Section::None => {
                return Err(err(lineno, "data line before any section header".into()));
            }
            Section::Done => unreachable!(),
            Section::Rows => {
                if fields.len() != 2 {
                    return Err(err(lineno, "ROWS line needs a type and a name".into()));
                }
                let name = fields[1].to_string();
                match fields[0] {
                    "N" => {
                        if obj_row.is_some() {
                            return Err(err(lineno, "multiple objective (N) rows".into()));
                        }
                        obj_row = Some(name);
                    }
                    t @ ("L" | "G" | "E") => {
                        let sense = match t {
                            "L" => RowSense::Le,
                            "G" => RowSense::Ge,
                            _ => RowSense::Eq,
                        };
                        if row_index.insert(name.clone(), senses.len()).is_some() {
                            return Err(err(lineno, format!("duplicate row name '{name}'")));
                        }
                        senses.push(sense);
                    }
                    other => {
                        return Err(err(lineno, format!("unknown row type '{other}'")));
                    }
                }
            }
            Section::Columns => {
                if fields.len() >= 3 && fields[1] == "'MARKER'" {
                    match fields[2] {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        other => {
                            return Err(err(lineno, format!("unknown marker '{other}'")));
                        }
                    }
                    continue;
                }
                if fields.len() < 3 || fields.len() % 2 == 0 {
                    return Err(err(
                        lineno,
                        "COLUMNS line needs a column name and row/value pairs".into(),
                    ));
                }
                let col_name = fields[0];
                let j = *col_index.entry(col_name.to_string()).or_insert_with(|| {
                    col_order.push(col_name.to_string());
                    if in_int {
                        int_cols.push(col_order.len() - 1);
                    }
                    col_order.len() - 1
                });
                for pair in fields[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| err(lineno, format!("bad numeric value '{}'", pair[1])))?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        *obj.entry(j).or_insert(0.0) += value;
                    } else {
                        let i = *row_index
                            .get(pair[0])
                            .ok_or_else(|| err(lineno, format!("unknown row '{}'", pair[0])))?;
                        *entries.entry((i, j)).or_insert(0.0) += value;
                    }
                }
            }
            Section::Rhs => {
                if fields.len() < 3 || fields.len() % 2 == 0 {
                    return Err(err(
                        lineno,
                        "RHS line needs a set name and row/value pairs".into(),
                    ));
                }
                for pair in fields[1..].chunks(2) {
                    let value: f64 = pair[1]
                        .parse()
                        .map_err(|_| err(lineno, format!("bad numeric value '{}'", pair[1])))?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        return Err(err(lineno, "objective-row RHS is not supported".into()));
                    }
                    let i = *row_index
                        .get(pair[0])
                        .ok_or_else(|| err(lineno, format!("unknown row '{}'", pair[0])))?;
                    rhs.insert(i, value);
                }
            }
            Section::Bounds => {
                if fields.len() < 3 {
                    return Err(err(lineno, "BOUNDS line needs type, set, column".into()));
                }
                let j = *col_index
                    .get(fields[2])
                    .ok_or_else(|| err(lineno, format!("unknown column '{}'", fields[2])))?;
                let slot = bounds.entry(j).or_insert((0.0, f64::INFINITY));
                let value = || -> Result<f64, MilpError> {
                    fields
                        .get(3)
                        .ok_or_else(|| err(lineno, "bound type needs a value".into()))?
                        .parse()
                        .map_err(|_| err(lineno, format!("bad numeric value '{}'", fields[3])))
                };
                match fields[0] {
                    "UP" => slot.1 = value()?,
                    "LO" => slot.0 = value()?,
                    "FX" => {
                        let v = value()?;
                        *slot = (v, v);
                    }
                    "FR" => *slot = (f64::NEG_INFINITY, f64::INFINITY),
                    "MI" => slot.0 = f64::NEG_INFINITY,
                    "PL" => slot.1 = f64::INFINITY,
                    "BV" => {
                        *slot = (0.0, 1.0);
                        int_cols.push(j);
                    }
                    other => {
                        return Err(err(lineno, format!("unknown bound type '{other}'")));
                    }
                }
            }
        }
    }

    if obj_row.is_none() {
        return Err(err(0, "no objective (N) row declared".into()));
    }

    let n = col_order.len();
    let m = senses.len();
    let mut inst = MilpInstance::new(n);
    inst.m = m;
    inst.sense = senses;
    inst.rhs = vec![0.0; m];
    for (i, v) in rhs {
        inst.rhs[i] = v;
    }
    for (j, v) in obj {
        inst.obj[j] = v;
    }
    for (j, (lo, hi)) in bounds {
        inst.lb[j] = lo;
        inst.ub[j] = hi;
    }
    inst.int_set = int_cols.into_iter().collect();
    let mut rows: Vec<SparseRow> = vec![SparseRow::default(); m];
    for ((i, j), v) in entries {
        if v != 0.0 {
            rows[i].idx.push(j);
            rows[i].val.push(v);
        }
    }
    inst.rows = rows;
    inst.validate()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Annotations, RowSense};
    use std::collections::BTreeSet;

    fn sample_instance() -> MilpInstance {
        let mut inst = MilpInstance::new(4);
        inst.obj = vec![-1.0, 0.0, 2.5, 0.125];
        inst.lb = vec![0.0, f64::NEG_INFINITY, -2.0, 0.0];
        inst.ub = vec![1.0, f64::INFINITY, f64::INFINITY, 3.0];
        inst.push_row(RowSense::Le, 1.5, &[(0, 1.0), (2, 2.0)]);
        inst.push_row(RowSense::Ge, -0.5, &[(1, 1.0), (3, -1.0)]);
        inst.push_row(RowSense::Eq, 0.0, &[(0, 1.0), (1, 1.0), (3, 1.0)]);
        inst.int_set = BTreeSet::from([0, 3]);
        inst.annotations = Annotations::default();
        inst.annotations.var.insert(0, "z:goal".into());
        inst.annotations.row.insert(2, "balance".into());
        inst.annotations.info.insert("generator".into(), "test".into());
        inst
    }

    /// Mathematical content with rows canonicalized (sorted by column), for
    /// format round-trips that need not preserve entry order or annotations.
    fn math_view(
        inst: &MilpInstance,
    ) -> (
        usize,
        usize,
        Vec<f64>,
        Vec<Vec<(usize, f64)>>,
        Vec<f64>,
        Vec<RowSense>,
        Vec<f64>,
        Vec<f64>,
        BTreeSet<usize>,
    ) {
        let rows = inst
            .rows
            .iter()
            .map(|r| {
                let mut v: Vec<(usize, f64)> = r.iter().collect();
                v.sort_by_key(|(j, _)| *j);
                v
            })
            .collect();
        (
            inst.n,
            inst.m,
            inst.obj.clone(),
            rows,
            inst.rhs.clone(),
            inst.sense.clone(),
            inst.lb.clone(),
            inst.ub.clone(),
            inst.int_set.clone(),
        )
    }

    #[test]
    fn json_round_trip_is_exact() {
        let inst = sample_instance();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        export_json(&inst, &path).unwrap();
        let back = import_json(&path).unwrap();
        assert_eq!(back, inst); // includes annotations and infinite bounds
    }

    #[test]
    fn json_carries_schema_fields() {
        let inst = sample_instance();
        let text = serde_json::to_string(&inst).unwrap();
        for field in [
            "\"n\"", "\"m\"", "\"obj\"", "\"rows\"", "\"rhs\"", "\"sense\"", "\"lb\"", "\"ub\"",
            "\"int_set\"", "\"annotations\"", "\"idx\"", "\"val\"",
        ] {
            assert!(text.contains(field), "missing {field} in {text}");
        }
        assert!(text.contains("\"inf\"") && text.contains("\"-inf\""));
    }

    #[test]
    fn mps_round_trip_preserves_math_content() {
        let inst = sample_instance();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.mps");
        export_mps(&inst, &path).unwrap();
        let back = import_mps(&path).unwrap();
        assert_eq!(math_view(&back), math_view(&inst));
    }

    #[test]
    fn mps_round_trip_is_a_fixed_point() {
        let inst = sample_instance();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.mps");
        let p2 = dir.path().join("b.mps");
        export_mps(&inst, &p1).unwrap();
        let once = import_mps(&p1).unwrap();
        export_mps(&once, &p2).unwrap();
        let twice = import_mps(&p2).unwrap();
        assert_eq!(once, twice);
        assert_eq!(
            std::fs::read_to_string(&p1).unwrap(),
            std::fs::read_to_string(&p2).unwrap()
        );
    }

    #[test]
    fn infinite_bounds_use_fr_mi_pl_markers() {
        let mut inst = MilpInstance::new(3);
        inst.lb = vec![f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0];
        inst.ub = vec![f64::INFINITY, 2.0, f64::INFINITY];
        inst.int_set.insert(2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.mps");
        export_mps(&inst, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains(" FR BND"), "{text}");
        assert!(text.contains(" MI BND"), "{text}");
        assert!(text.contains(" PL BND"), "{text}");
    }

    #[test]
    fn unknown_section_keyword_is_an_error_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mps");
        std::fs::write(&path, "NAME t\nROWS\n N  COST\nFROBNICATE\nENDATA\n").unwrap();
        match import_mps(&path) {
            Err(MilpError::MpsParse { line, msg, .. }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("FROBNICATE"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_columns_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mps");
        std::fs::write(
            &path,
            "NAME t\nROWS\n N  COST\n L  r0\nCOLUMNS\n    x0 r0\nENDATA\n",
        )
        .unwrap();
        match import_mps(&path) {
            Err(MilpError::MpsParse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_row_reference_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mps");
        std::fs::write(
            &path,
            "NAME t\nROWS\n N  COST\nCOLUMNS\n    x0 ghost 1.0\nENDATA\n",
        )
        .unwrap();
        assert!(matches!(
            import_mps(&path),
            Err(MilpError::MpsParse { line: 5, .. })
        ));
    }

    #[test]
    fn import_dispatches_on_extension() {
        let inst = sample_instance();
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("i.json");
        let mps = dir.path().join("i.mps");
        export_json(&inst, &json).unwrap();
        export_mps(&inst, &mps).unwrap();
        assert_eq!(import_instance(&json).unwrap(), inst);
        assert_eq!(
            math_view(&import_instance(&mps).unwrap()),
            math_view(&inst)
        );
        let odd = dir.path().join("i.lp");
        std::fs::write(&odd, "x").unwrap();
        assert!(matches!(
            import_instance(&odd),
            Err(MilpError::UnknownFormat(_))
        ));
    }
}
