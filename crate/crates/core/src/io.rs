//! JSON state sets, grid specs and CSV tables.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristic::SweepRow;
use crate::linalg::{self, CMatrix, CVector};
use crate::qstate::{Bipartition, DensityMatrix, PureState};
use crate::sets::{StateSet, States};

/// Largest local dimension accepted from files.
const MAX_LOCAL_DIM: usize = 64;
/// Largest number of states accepted from files.
const MAX_STATES: usize = 4096;

/// `{label, d1, d2, states, pure}`. A pure state is its amplitude vector; a
/// mixed state is its density matrix flattened row-major. Complex scalars are
/// `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSetJson {
    pub label: String,
    pub d1: usize,
    pub d2: usize,
    pub states: Vec<Vec<[f64; 2]>>,
    pub pure: bool,
}

fn pairs(v: impl Iterator<Item = num_complex::Complex64>) -> Vec<[f64; 2]> {
    v.map(|z| [z.re, z.im]).collect()
}

impl From<&StateSet> for StateSetJson {
    fn from(s: &StateSet) -> Self {
        let bp = s.bipartition();
        let (states, pure) = match s.states() {
            States::Pure(v) => (v.iter().map(|p| pairs(p.amplitudes().iter().copied())).collect(), true),
            States::Mixed(v) => (
                v.iter()
                    .map(|r| {
                        let m = r.matrix();
                        pairs((0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])))
                    })
                    .collect(),
                false,
            ),
        };
        Self {
            label: s.label().to_string(),
            d1: bp.d1(),
            d2: bp.d2(),
            states,
            pure,
        }
    }
}

impl StateSetJson {
    pub fn into_state_set(self) -> Result<StateSet> {
        if self.d1 > MAX_LOCAL_DIM || self.d2 > MAX_LOCAL_DIM {
            return Err(Error::OutOfRange(format!("local dimensions {}x{} too large", self.d1, self.d2)));
        }
        if self.states.len() > MAX_STATES {
            return Err(Error::TooManyStates {
                got: self.states.len(),
                max: MAX_STATES,
            });
        }
        let bp = Bipartition::new(self.d1, self.d2)?;
        let d = bp.dim();
        let expected = if self.pure { d } else { d * d };
        for s in &self.states {
            if s.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    got: s.len(),
                });
            }
            if s.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::OutOfRange("non-finite amplitude".into()));
            }
        }
        let complex = |v: &[[f64; 2]]| v.iter().map(|&[re, im]| linalg::c(re, im)).collect::<Vec<_>>();
        if self.pure {
            let states = self
                .states
                .iter()
                .map(|s| PureState::new(CVector::from_vec(complex(s))))
                .collect::<Result<Vec<_>>>()?;
            StateSet::pure(self.label, bp, states)
        } else {
            let states = self
                .states
                .iter()
                .map(|s| DensityMatrix::new(CMatrix::from_row_slice(d, d, &complex(s))))
                .collect::<Result<Vec<_>>>()?;
            StateSet::mixed(self.label, bp, states)
        }
    }
}

pub fn state_set_to_json(s: &StateSet) -> String {
    serde_json::to_string_pretty(&StateSetJson::from(s)).expect("plain data serializes")
}

pub fn state_set_from_json(text: &str) -> Result<StateSet> {
    serde_json::from_str::<StateSetJson>(text)?.into_state_set()
}

/// Row-major `[[[re, im], ...], ...]`.
pub fn matrix_to_json(m: &CMatrix) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows()).map(|i| pairs((0..m.ncols()).map(|j| m[(i, j)]))).collect();
    serde_json::to_value(rows).expect("plain data serializes")
}

/// A single state as JSON: an amplitude vector `[[re, im], ...]` or a
/// density matrix given as rows of `[re, im]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum StateJson {
    Vector(Vec<[f64; 2]>),
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateInput {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl StateInput {
    pub fn density(&self) -> DensityMatrix {
        match self {
            StateInput::Pure(p) => p.projector(),
            StateInput::Mixed(r) => r.clone(),
        }
    }
}

pub fn state_from_json(text: &str, bp: Bipartition) -> Result<StateInput> {
    let d = bp.dim();
    let finite = |v: &[[f64; 2]]| v.iter().flatten().all(|x| x.is_finite());
    match serde_json::from_str::<StateJson>(text)? {
        StateJson::Vector(v) => {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.len() });
            }
            if !finite(&v) {
                return Err(Error::OutOfRange("non-finite amplitude".into()));
            }
            let amps = CVector::from_iterator(d, v.iter().map(|&[re, im]| linalg::c(re, im)));
            Ok(StateInput::Pure(PureState::new(amps)?))
        }
        StateJson::Matrix(rows) => {
            if rows.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: rows.len() });
            }
            let mut m = CMatrix::zeros(d, d);
            for (i, r) in rows.iter().enumerate() {
                if r.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: r.len() });
                }
                if !finite(r) {
                    return Err(Error::OutOfRange("non-finite matrix entry".into()));
                }
                for (j, &[re, im]) in r.iter().enumerate() {
                    m[(i, j)] = linalg::c(re, im);
                }
            }
            Ok(StateInput::Mixed(DensityMatrix::new(m)?))
        }
    }
}

/// An inclusive evenly spaced grid `from:to:steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

/// Upper limit on grid points.
pub const MAX_GRID_STEPS: usize = 100_000;

impl Grid {
    pub fn new(from: f64, to: f64, steps: usize) -> Result<Self> {
        if !from.is_finite() || !to.is_finite() {
            return Err(Error::OutOfRange("grid bounds must be finite".into()));
        }
        if steps == 0 || steps > MAX_GRID_STEPS {
            return Err(Error::OutOfRange(format!("grid needs 1..={MAX_GRID_STEPS} steps, got {steps}")));
        }
        if steps == 1 && from != to {
            return Err(Error::OutOfRange("a one-point grid needs from == to".into()));
        }
        Ok(Self { from, to, steps })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.from];
        }
        let h = (self.to - self.from) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.to } else { self.from + h * i as f64 })
            .collect()
    }
}

impl std::str::FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse(1, format!("grid `{s}` is not `from:to:steps`"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(bad());
        };
        let from: f64 = a.trim().parse().map_err(|_| bad())?;
        let to: f64 = b.trim().parse().map_err(|_| bad())?;
        let steps: usize = n.trim().parse().map_err(|_| bad())?;
        Grid::new(from, to, steps)
    }
}

/// 17 significant digits, which round-trip every `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A rectangular table of pre-formatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::DimensionMismatch {
                expected: self.header.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        let csv_err = |e: csv::Error| Error::parse(0, e.to_string());
        wr.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            wr.write_record(r).map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::parse(0, e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("cells are UTF-8")
    }

    pub fn emit_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let mut records = rd.records();
        let header = match records.next() {
            Some(r) => r.map_err(|e| csv_parse_error(&e))?.iter().map(String::from).collect(),
            None => return Err(Error::Empty("csv header")),
        };
        let mut t = Table {
            header,
            rows: Vec::new(),
        };
        for r in records {
            let r = r.map_err(|e| csv_parse_error(&e))?;
            t.push(r.iter().map(String::from).collect())?;
        }
        Ok(t)
    }
}

fn csv_parse_error(e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(line, e.to_string())
}

/// One sweep record as written to CSV. A failed grid point has `value` NaN,
/// `converged` false and empty per-state cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub param: f64,
    pub value: f64,
    pub converged: bool,
    pub per_state: Vec<Option<f64>>,
    pub starts: usize,
    pub seed: u64,
}

impl SweepRecord {
    pub fn from_row(row: &SweepRow, states: usize, seed: u64) -> Self {
        match &row.result {
            Ok(r) => Self {
                param: row.param,
                value: r.value,
                converged: r.converged,
                per_state: r.per_state.iter().map(|&v| Some(v)).collect(),
                starts: r.starts,
                seed,
            },
            Err(_) => Self {
                param: row.param,
                value: f64::NAN,
                converged: false,
                per_state: vec![None; states],
                starts: 0,
                seed,
            },
        }
    }
}

pub fn sweep_header(states: usize) -> Vec<String> {
    let mut h = vec!["param".to_string(), "value".into(), "converged".into()];
    h.extend((1..=states).map(|k| format!("per_state_{k}")));
    h.push("starts".into());
    h.push("seed".into());
    h
}

pub fn sweep_table(records: &[SweepRecord], states: usize) -> Result<Table> {
    let mut t = Table::new(sweep_header(states));
    for r in records {
        if r.per_state.len() != states {
            return Err(Error::DimensionMismatch {
                expected: states,
                got: r.per_state.len(),
            });
        }
        let mut row = vec![format_f64(r.param), format_f64(r.value), r.converged.to_string()];
        row.extend(r.per_state.iter().map(|v| v.map(format_f64).unwrap_or_default()));
        row.push(r.starts.to_string());
        row.push(r.seed.to_string());
        t.push(row)?;
    }
    Ok(t)
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let t = Table::parse_csv(text)?;
    let n = t.header.len();
    if n < 5 || t.header != sweep_header(n - 5) {
        return Err(Error::parse(1, "not a sweep table header"));
    }
    let states = n - 5;
    let num = |s: &str, line: usize| -> Result<f64> { s.parse().map_err(|_| Error::parse(line, format!("invalid number `{s}`"))) };
    t.rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i + 2;
            let per_state = r[3..3 + states]
                .iter()
                .map(|s| if s.is_empty() { Ok(None) } else { num(s, line).map(Some) })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepRecord {
                param: num(&r[0], line)?,
                value: num(&r[1], line)?,
                converged: r[2].parse().map_err(|_| Error::parse(line, "converged must be true or false"))?,
                per_state,
                starts: r[3 + states].parse().map_err(|_| Error::parse(line, "invalid start count"))?,
                seed: r[4 + states].parse().map_err(|_| Error::parse(line, "invalid seed"))?,
            })
        })
        .collect()
}
