//! Typed tabular data with schema-declared domains and stable row identifiers.
//!
//! A [`Dataset`] is immutable after load. Deletion is handled above this
//! layer by tombstoning row ids, so surviving rows keep their identifiers
//! forever. [`DataView`] is the cheap handle the learner passes around: an
//! ascending set of row ids plus a variable scope.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Current version of the plain-text schema file format.
pub const SCHEMA_FILE_VERSION: u32 = 1;

/// Index of a variable in the schema.
pub type VarIdx = usize;
/// Stable identifier of a row. Never reused, never renumbered.
pub type RowId = u64;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("row {row} has {got} values, schema declares {want}")]
    Arity { row: usize, got: usize, want: usize },
    #[error("row {row}, variable '{var}': {msg}")]
    Domain { row: usize, var: String, msg: String },
    #[error("no rows")]
    NoRows,
    #[error("empty view: {0}")]
    EmptyView(String),
    #[error("undefined variance: empty view")]
    UndefinedVariance,
    #[error("row {0} is not part of the view")]
    RowNotInView(RowId),
    #[error("variable {0} is not part of the view scope")]
    VarNotInScope(VarIdx),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Kind and domain of a single variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VarKind {
    /// Finite set of labels; values are stored as codes into this list.
    Categorical { categories: Vec<String> },
    /// Real-valued variable with declared closed bounds.
    Gaussian { lo: f64, hi: f64 },
}

impl VarKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, VarKind::Categorical { .. })
    }
}

/// One declared variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
}

/// Ordered list of variables with their domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    variables: Vec<Variable>,
}

impl Schema {
    pub fn new(variables: Vec<Variable>) -> Result<Self, DataError> {
        if variables.is_empty() {
            return Err(DataError::Schema("schema declares no variables".into()));
        }
        let mut names = BTreeSet::new();
        for v in &variables {
            if v.name.is_empty() {
                return Err(DataError::Schema("empty variable name".into()));
            }
            if !names.insert(v.name.clone()) {
                return Err(DataError::Schema(format!("duplicate variable name '{}'", v.name)));
            }
            match &v.kind {
                VarKind::Categorical { categories } => {
                    if categories.is_empty() {
                        return Err(DataError::Schema(format!(
                            "variable '{}': empty category list",
                            v.name
                        )));
                    }
                    let mut labels = BTreeSet::new();
                    for c in categories {
                        if !labels.insert(c) {
                            return Err(DataError::Schema(format!(
                                "variable '{}': duplicate category '{}'",
                                v.name, c
                            )));
                        }
                    }
                }
                VarKind::Gaussian { lo, hi } => {
                    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                        return Err(DataError::Schema(format!(
                            "variable '{}': bounds must be finite with lo < hi",
                            v.name
                        )));
                    }
                }
            }
        }
        Ok(Schema { variables })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn var(&self, idx: VarIdx) -> &Variable {
        &self.variables[idx]
    }

    /// Loads a schema from its plain-text (TOML) file form.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses the schema file format. See the repository README for the
    /// exact field names.
    pub fn parse(text: &str) -> Result<Self, DataError> {
        #[derive(Deserialize)]
        struct FileVar {
            name: String,
            kind: String,
            categories: Option<Vec<String>>,
            min: Option<f64>,
            max: Option<f64>,
        }
        #[derive(Deserialize)]
        struct File {
            schema_version: u32,
            #[serde(default)]
            variable: Vec<FileVar>,
        }
        let file: File =
            toml::from_str(text).map_err(|e| DataError::Schema(format!("schema file: {e}")))?;
        if file.schema_version != SCHEMA_FILE_VERSION {
            return Err(DataError::Schema(format!(
                "unsupported schema_version {} (expected {})",
                file.schema_version, SCHEMA_FILE_VERSION
            )));
        }
        let mut vars = Vec::with_capacity(file.variable.len());
        for fv in file.variable {
            let kind = match fv.kind.as_str() {
                "categorical" => VarKind::Categorical {
                    categories: fv.categories.ok_or_else(|| {
                        DataError::Schema(format!("variable '{}': missing categories", fv.name))
                    })?,
                },
                "gaussian" => VarKind::Gaussian {
                    lo: fv.min.ok_or_else(|| {
                        DataError::Schema(format!("variable '{}': missing min", fv.name))
                    })?,
                    hi: fv.max.ok_or_else(|| {
                        DataError::Schema(format!("variable '{}': missing max", fv.name))
                    })?,
                },
                other => {
                    return Err(DataError::Schema(format!(
                        "variable '{}': unknown kind '{}'",
                        fv.name, other
                    )))
                }
            };
            vars.push(Variable { name: fv.name, kind });
        }
        Schema::new(vars)
    }

    /// Renders the schema in its file form.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("schema_version = {SCHEMA_FILE_VERSION}\n");
        for v in &self.variables {
            out.push_str("\n[[variable]]\n");
            out.push_str(&format!("name = {:?}\n", v.name));
            match &v.kind {
                VarKind::Categorical { categories } => {
                    out.push_str("kind = \"categorical\"\n");
                    let labels: Vec<String> = categories.iter().map(|c| format!("{c:?}")).collect();
                    out.push_str(&format!("categories = [{}]\n", labels.join(", ")));
                }
                VarKind::Gaussian { lo, hi } => {
                    out.push_str("kind = \"gaussian\"\n");
                    out.push_str(&format!("min = {lo:?}\nmax = {hi:?}\n"));
                }
            }
        }
        out
    }
}

/// One observed cell. Categorical values are codes into the schema's list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Cat(u32),
    Num(f64),
}

impl Value {
    pub fn as_num(&self) -> f64 {
        match self {
            Value::Num(x) => *x,
            Value::Cat(c) => *c as f64,
        }
    }

    pub fn as_cat(&self) -> u32 {
        match self {
            Value::Cat(c) => *c,
            Value::Num(_) => panic!("numeric value used as categorical"),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Cat(c) => write!(f, "#{c}"),
            Value::Num(x) => write!(f, "{x}"),
        }
    }
}

/// Immutable typed table. Row ids are dense `0..n-1` in load order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Vec<Value>>,
}

impl Dataset {
    /// Builds a dataset from rows, checking every value against the schema.
    /// Row ids are assigned in order.
    pub fn new(schema: Schema, rows: Vec<Vec<Value>>) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::NoRows);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(DataError::Arity { row: i, got: row.len(), want: schema.len() });
            }
            for (j, value) in row.iter().enumerate() {
                check_value(&schema, i, j, value)?;
            }
        }
        Ok(Dataset { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn value(&self, row: RowId, var: VarIdx) -> Value {
        self.rows[row as usize][var]
    }

    pub fn row(&self, row: RowId) -> &[Value] {
        &self.rows[row as usize]
    }

    /// All row ids, ascending.
    pub fn all_row_ids(&self) -> Vec<RowId> {
        (0..self.rows.len() as RowId).collect()
    }

    /// Full scope, ascending.
    pub fn full_scope(&self) -> Vec<VarIdx> {
        (0..self.schema.len()).collect()
    }

    /// A view over the whole dataset.
    pub fn full_view(&self) -> DataView<'_> {
        DataView { data: self, rows: self.all_row_ids(), scope: self.full_scope() }
    }

    /// A view over a chosen row set and scope. Both must be nonempty and
    /// ascending subsets of the dataset.
    pub fn view(&self, rows: Vec<RowId>, scope: Vec<VarIdx>) -> Result<DataView<'_>, DataError> {
        if rows.is_empty() {
            return Err(DataError::EmptyView("no rows".into()));
        }
        if scope.is_empty() {
            return Err(DataError::EmptyView("no variables".into()));
        }
        debug_assert!(rows.windows(2).all(|w| w[0] < w[1]), "row ids must ascend");
        debug_assert!(scope.windows(2).all(|w| w[0] < w[1]), "scope must ascend");
        if let Some(&last) = rows.last() {
            if last as usize >= self.rows.len() {
                return Err(DataError::RowNotInView(last));
            }
        }
        if let Some(&last) = scope.last() {
            if last >= self.schema.len() {
                return Err(DataError::VarNotInScope(last));
            }
        }
        Ok(DataView { data: self, rows, scope })
    }
}

fn check_value(schema: &Schema, row: usize, var: VarIdx, value: &Value) -> Result<(), DataError> {
    let v = schema.var(var);
    match (&v.kind, value) {
        (VarKind::Categorical { categories }, Value::Cat(c)) => {
            if (*c as usize) >= categories.len() {
                return Err(DataError::Domain {
                    row,
                    var: v.name.clone(),
                    msg: format!("category code {c} out of range"),
                });
            }
        }
        (VarKind::Gaussian { lo, hi }, Value::Num(x)) => {
            if !x.is_finite() {
                return Err(DataError::Domain {
                    row,
                    var: v.name.clone(),
                    msg: "non-finite value".into(),
                });
            }
            if x < lo || x > hi {
                return Err(DataError::Domain {
                    row,
                    var: v.name.clone(),
                    msg: format!("value {x} outside declared bounds [{lo}, {hi}]"),
                });
            }
        }
        _ => {
            return Err(DataError::Domain {
                row,
                var: v.name.clone(),
                msg: "value kind does not match variable kind".into(),
            })
        }
    }
    Ok(())
}

/// CSV ingestion options.
#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub has_header: bool,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { has_header: false, delimiter: b',' }
    }
}

/// Loads a delimiter-separated file against a schema. Row ids are assigned
/// `0..n-1` in file order.
pub fn load_csv(path: &Path, schema: &Schema, opts: CsvOptions) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .delimiter(opts.delimiter)
        .flexible(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Parse { row: i, col: 0, msg: e.to_string() })?;
        if record.len() != schema.len() {
            return Err(DataError::Arity { row: i, got: record.len(), want: schema.len() });
        }
        let mut row = Vec::with_capacity(schema.len());
        for (j, field) in record.iter().enumerate() {
            let field = field.trim();
            let value = match &schema.var(j).kind {
                VarKind::Categorical { categories } => {
                    match categories.iter().position(|c| c == field) {
                        Some(code) => Value::Cat(code as u32),
                        None => {
                            return Err(DataError::Domain {
                                row: i,
                                var: schema.var(j).name.clone(),
                                msg: format!("unknown category label '{field}'"),
                            })
                        }
                    }
                }
                VarKind::Gaussian { .. } => {
                    if field.is_empty() {
                        return Err(DataError::Domain {
                            row: i,
                            var: schema.var(j).name.clone(),
                            msg: "missing value".into(),
                        });
                    }
                    let x: f64 = field.parse().map_err(|e| DataError::Parse {
                        row: i,
                        col: j,
                        msg: format!("'{field}': {e}"),
                    })?;
                    Value::Num(x)
                }
            };
            check_value(schema, i, j, &value)?;
            row.push(value);
        }
        rows.push(row);
    }
    Dataset::new(schema.clone(), rows)
}

/// A scoped, read-only window into a dataset: an ascending row-id set plus
/// an ascending variable scope.
#[derive(Debug, Clone)]
pub struct DataView<'a> {
    data: &'a Dataset,
    rows: Vec<RowId>,
    scope: Vec<VarIdx>,
}

impl<'a> DataView<'a> {
    pub fn dataset(&self) -> &'a Dataset {
        self.data
    }

    pub fn rows(&self) -> &[RowId] {
        &self.rows
    }

    pub fn scope(&self) -> &[VarIdx] {
        &self.scope
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn contains_row(&self, row: RowId) -> bool {
        self.rows.binary_search(&row).is_ok()
    }

    /// Values of one variable across the view's rows, ascending row order.
    pub fn column(&self, var: VarIdx) -> impl Iterator<Item = Value> + '_ {
        self.rows.iter().map(move |&r| self.data.value(r, var))
    }

    /// True iff every value of `var` over the view's rows is exactly equal.
    ///
    /// This is an all-equal test, not a variance-epsilon test: a column has
    /// zero variance precisely when all its points coincide, and the removal
    /// logic depends on that exact equivalence.
    pub fn is_uninformative(&self, var: VarIdx) -> Result<bool, DataError> {
        if self.rows.is_empty() {
            return Err(DataError::UndefinedVariance);
        }
        if !self.scope.contains(&var) {
            return Err(DataError::VarNotInScope(var));
        }
        let first = self.data.value(self.rows[0], var);
        Ok(self.rows.iter().all(|&r| self.data.value(r, var) == first))
    }

    /// New view without `drop_rows`, restricted to `keep_scope`.
    /// The original view is unchanged.
    pub fn restrict(
        &self,
        drop_rows: &BTreeSet<RowId>,
        keep_scope: &[VarIdx],
    ) -> Result<DataView<'a>, DataError> {
        for r in drop_rows {
            if !self.contains_row(*r) {
                return Err(DataError::RowNotInView(*r));
            }
        }
        for v in keep_scope {
            if !self.scope.contains(v) {
                return Err(DataError::VarNotInScope(*v));
            }
        }
        let rows: Vec<RowId> =
            self.rows.iter().copied().filter(|r| !drop_rows.contains(r)).collect();
        if rows.is_empty() {
            return Err(DataError::EmptyView("all rows dropped".into()));
        }
        if keep_scope.is_empty() {
            return Err(DataError::EmptyView("empty scope".into()));
        }
        Ok(DataView { data: self.data, rows, scope: keep_scope.to_vec() })
    }

    /// Same rows, different scope.
    pub fn with_scope(&self, scope: Vec<VarIdx>) -> Result<DataView<'a>, DataError> {
        if scope.is_empty() {
            return Err(DataError::EmptyView("empty scope".into()));
        }
        Ok(DataView { data: self.data, rows: self.rows.clone(), scope })
    }

    /// Same scope, different rows.
    pub fn with_rows(&self, rows: Vec<RowId>) -> Result<DataView<'a>, DataError> {
        if rows.is_empty() {
            return Err(DataError::EmptyView("no rows".into()));
        }
        Ok(DataView { data: self.data, rows, scope: self.scope.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    pub(crate) fn gaussian_schema(n: usize, lo: f64, hi: f64) -> Schema {
        Schema::new(
            (0..n)
                .map(|i| Variable { name: format!("x{i}"), kind: VarKind::Gaussian { lo, hi } })
                .collect(),
        )
        .unwrap()
    }

    fn numeric_dataset(cols: &[&[f64]]) -> Dataset {
        let n = cols[0].len();
        let schema = gaussian_schema(cols.len(), -1e6, 1e6);
        let rows = (0..n)
            .map(|i| cols.iter().map(|c| Value::Num(c[i])).collect())
            .collect();
        Dataset::new(schema, rows).unwrap()
    }

    #[test]
    fn schema_rejects_duplicates_and_bad_bounds() {
        let dup = Schema::new(vec![
            Variable { name: "a".into(), kind: VarKind::Gaussian { lo: 0.0, hi: 1.0 } },
            Variable { name: "a".into(), kind: VarKind::Gaussian { lo: 0.0, hi: 1.0 } },
        ]);
        assert!(dup.is_err());
        let bad = Schema::new(vec![Variable {
            name: "a".into(),
            kind: VarKind::Gaussian { lo: 2.0, hi: 1.0 },
        }]);
        assert!(bad.is_err());
    }

    #[test]
    fn schema_file_round_trip() {
        let schema = Schema::new(vec![
            Variable { name: "sex".into(), kind: VarKind::Categorical { categories: vec!["M".into(), "F".into(), "I".into()] } },
            Variable { name: "length".into(), kind: VarKind::Gaussian { lo: 0.0, hi: 1.0 } },
        ])
        .unwrap();
        let text = schema.to_file_string();
        let back = Schema::parse(&text).unwrap();
        assert_eq!(schema, back);
    }

    #[test]
    fn schema_file_version_checked() {
        let text = "schema_version = 99\n";
        assert!(Schema::parse(text).is_err());
    }

    #[test]
    fn load_csv_mixed_abalone_shape() {
        // 1 categorical + 8 gaussian variables, like the abalone layout
        let mut vars = vec![Variable {
            name: "sex".into(),
            kind: VarKind::Categorical { categories: vec!["M".into(), "F".into(), "I".into()] },
        }];
        for i in 0..8 {
            vars.push(Variable { name: format!("m{i}"), kind: VarKind::Gaussian { lo: 0.0, hi: 30.0 } });
        }
        let schema = Schema::new(vars).unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "M,0.455,0.365,0.095,0.514,0.2245,0.101,0.15,15").unwrap();
        writeln!(f, "F,0.53,0.42,0.135,0.677,0.2565,0.1415,0.21,9").unwrap();
        writeln!(f, "I,0.44,0.365,0.125,0.516,0.2155,0.114,0.155,10").unwrap();
        let ds = load_csv(f.path(), &schema, CsvOptions::default()).unwrap();
        assert_eq!(ds.schema().len(), 9);
        assert_eq!(ds.num_rows(), 3);
        assert!(ds.schema().var(0).kind.is_categorical());
        assert_eq!(ds.value(0, 0), Value::Cat(0));
        assert_eq!(ds.value(2, 8), Value::Num(10.0));
    }

    #[test]
    fn load_csv_empty_file_errors() {
        let schema = gaussian_schema(2, 0.0, 1.0);
        let f = tempfile::NamedTempFile::new().unwrap();
        match load_csv(f.path(), &schema, CsvOptions::default()) {
            Err(DataError::NoRows) => {}
            other => panic!("expected NoRows, got {other:?}"),
        }
    }

    #[test]
    fn load_csv_domain_violation_names_row_and_variable() {
        let schema = gaussian_schema(1, 1.0, 2.0);
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1.5").unwrap();
        writeln!(f, "0.5").unwrap();
        match load_csv(f.path(), &schema, CsvOptions::default()) {
            Err(DataError::Domain { row, var, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(var, "x0");
            }
            other => panic!("expected Domain, got {other:?}"),
        }
    }

    #[test]
    fn uninformative_detection() {
        let ds = numeric_dataset(&[&[5.0, 5.0, 5.0], &[1.0, 2.0, 2.0]]);
        let view = ds.full_view();
        assert!(view.is_uninformative(0).unwrap());
        assert!(!view.is_uninformative(1).unwrap());
        // a single remaining row has variance 0
        let one = view.restrict(&BTreeSet::from([0, 1]), &[0, 1]).unwrap();
        assert!(one.is_uninformative(1).unwrap());
    }

    #[test]
    fn restrict_identity_and_errors() {
        let ds = numeric_dataset(&[&[1.0, 2.0, 3.0]]);
        let view = ds.full_view();
        let same = view.restrict(&BTreeSet::new(), &[0]).unwrap();
        assert_eq!(same.rows(), view.rows());
        assert!(view.restrict(&BTreeSet::from([0, 1, 2]), &[0]).is_err());
        let two = view.restrict(&BTreeSet::from([1]), &[0]).unwrap();
        assert_eq!(two.rows(), &[0, 2]);
    }

    #[test]
    fn removal_preserves_constant_columns() {
        // dropping a row can never make a constant column non-constant
        let ds = numeric_dataset(&[&[4.0, 4.0, 4.0, 4.0], &[1.0, 2.0, 3.0, 4.0]]);
        let view = ds.full_view();
        assert!(view.is_uninformative(0).unwrap());
        for r in 0..4u64 {
            let v = view.restrict(&BTreeSet::from([r]), &[0, 1]).unwrap();
            assert!(v.is_uninformative(0).unwrap());
        }
    }

    #[test]
    fn restrict_commutes() {
        let ds = numeric_dataset(&[&[1.0, 2.0, 3.0, 4.0, 5.0]]);
        let view = ds.full_view();
        let ab = view
            .restrict(&BTreeSet::from([1]), &[0])
            .unwrap()
            .restrict(&BTreeSet::from([3]), &[0])
            .unwrap();
        let ba = view
            .restrict(&BTreeSet::from([3]), &[0])
            .unwrap()
            .restrict(&BTreeSet::from([1]), &[0])
            .unwrap();
        assert_eq!(ab.rows(), ba.rows());
        assert_eq!(ab.rows(), &[0, 2, 4]);
    }
}
