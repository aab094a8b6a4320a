//! Result tables. Every CSV starts with the same twelve columns; table
//! specific columns follow.

use agsp_core::verify::SpreadBoundReport;

pub const COLUMNS: [&str; 12] = [
    "instance_id",
    "n",
    "cut",
    "boundary_size",
    "gap",
    "delta",
    "smoothing",
    "es_bits",
    "logD",
    "cost_qubits",
    "bound_rhs",
    "satisfied",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row {
    pub instance_id: String,
    pub n: Option<usize>,
    pub cut: String,
    pub boundary_size: Option<usize>,
    pub gap: Option<f64>,
    pub delta: Option<f64>,
    pub smoothing: Option<f64>,
    pub es_bits: Option<f64>,
    pub log_d: Option<f64>,
    pub cost_qubits: Option<u64>,
    pub bound_rhs: Option<f64>,
    /// `None` renders as `n/a` when a bound was evaluated but not applicable.
    pub satisfied: Option<Option<bool>>,
    pub extra: Vec<String>,
}

impl Row {
    pub fn with_report(mut self, r: &SpreadBoundReport) -> Self {
        self.delta = Some(r.delta);
        self.smoothing = Some(r.smoothing);
        self.es_bits = Some(r.lhs_spread_bits);
        self.log_d = Some(r.log_d);
        self.bound_rhs = Some(r.rhs_logd_plus_1);
        self.satisfied = Some(r.satisfied);
        self
    }

    pub fn violated(&self) -> bool {
        self.satisfied == Some(Some(false))
    }

    fn cells(&self) -> Vec<String> {
        let mut v = vec![
            self.instance_id.clone(),
            opt(self.n),
            self.cut.clone(),
            opt(self.boundary_size),
            optf(self.gap),
            optf(self.delta),
            optf(self.smoothing),
            optf(self.es_bits),
            optf(self.log_d),
            opt(self.cost_qubits),
            optf(self.bound_rhs),
            match self.satisfied {
                None => String::new(),
                Some(None) => "n/a".into(),
                Some(Some(b)) => b.to_string(),
            },
        ];
        v.extend(self.extra.iter().cloned());
        v
    }
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn optf(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Shortest round-trip representation; stable across runs.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub extra_columns: Vec<&'static str>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(name: impl Into<String>, extra_columns: &[&'static str]) -> Self {
        Table { name: name.into(), extra_columns: extra_columns.to_vec(), rows: Vec::new() }
    }

    pub fn header(&self) -> Vec<&str> {
        COLUMNS.iter().copied().chain(self.extra_columns.iter().copied()).collect()
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(self.header()).expect("in-memory write");
        let width = COLUMNS.len() + self.extra_columns.len();
        for r in &self.rows {
            let mut cells = r.cells();
            cells.resize(width, String::new());
            w.write_record(&cells).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violated()).count()
    }
}

/// Plot-ready series: one `(series, x, y)` line per point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub name: String,
    pub x_label: &'static str,
    pub y_label: &'static str,
    pub points: Vec<(String, f64, f64)>,
}

impl Series {
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["series", self.x_label, self.y_label]).expect("in-memory write");
        for (s, x, y) in &self.points {
            w.write_record([s.clone(), num(*x), num(*y)]).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}
