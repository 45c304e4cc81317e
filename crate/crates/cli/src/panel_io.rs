//! Panel CSV ingestion and emission.
//!
//! Format: a header row naming `unit,time,y,x,z` followed by any number of
//! control columns, one row per `(unit, period)` cell in any order.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use state_lp_core::panel::PanelDataset;
use state_lp_core::Error;

/// Column names for each panel field.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSchema {
    pub unit: String,
    pub time: String,
    pub outcome: String,
    pub shock: String,
    pub state: String,
    /// `None` takes every remaining column, in header order.
    pub controls: Option<Vec<String>>,
}

impl Default for PanelSchema {
    fn default() -> Self {
        Self {
            unit: "unit".into(),
            time: "time".into(),
            outcome: "y".into(),
            shock: "x".into(),
            state: "z".into(),
            controls: None,
        }
    }
}

fn ingest(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Ingest {
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Orders unit ids numerically when all of them are integers, otherwise
/// lexicographically.
fn sort_units(ids: &mut [String]) {
    if ids.iter().all(|s| s.parse::<i64>().is_ok()) {
        ids.sort_by_key(|s| s.parse::<i64>().unwrap());
    } else {
        ids.sort();
    }
}

/// Reads a balanced panel. Row numbers in errors count the header as row 1.
pub fn load_panel(source: impl Read, schema: &PanelSchema) -> Result<PanelDataset, Error> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| ingest(1, "", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ingest(1, name, "column missing from header"))
    };
    let c_unit = find(&schema.unit)?;
    let c_time = find(&schema.time)?;
    let c_y = find(&schema.outcome)?;
    let c_x = find(&schema.shock)?;
    let c_z = find(&schema.state)?;
    let core_cols = [c_unit, c_time, c_y, c_x, c_z];
    let control_names: Vec<String> = match &schema.controls {
        Some(names) => names.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|(k, _)| !core_cols.contains(k))
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let c_w = control_names.iter().map(|n| find(n)).collect::<Result<Vec<_>, _>>()?;
    let q = c_w.len();

    struct Cell {
        y: f64,
        x: f64,
        z: f64,
        w: Vec<f64>,
    }
    let mut cells: HashMap<(String, i64), Cell> = HashMap::new();
    let mut shock_rows: BTreeMap<i64, f64> = BTreeMap::new();
    let mut bad_shock: Option<i64> = None;

    for (k, record) in reader.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| ingest(row, "", e.to_string()))?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let number = |c: usize| -> Result<f64, Error> {
            let name = &header[c];
            let s = field(c);
            if s.is_empty() {
                return Err(ingest(row, name, "empty cell"));
            }
            let v: f64 = s.parse().map_err(|_| ingest(row, name, format!("`{s}` is not a number")))?;
            if !v.is_finite() {
                return Err(ingest(row, name, format!("`{s}` is not finite")));
            }
            Ok(v)
        };
        let unit = field(c_unit).to_string();
        if unit.is_empty() {
            return Err(ingest(row, &schema.unit, "empty cell"));
        }
        let t_str = field(c_time);
        let t: i64 = t_str
            .parse()
            .map_err(|_| ingest(row, &schema.time, format!("`{t_str}` is not an integer period")))?;
        let cell = Cell {
            y: number(c_y)?,
            x: number(c_x)?,
            z: number(c_z)?,
            w: c_w.iter().map(|&c| number(c)).collect::<Result<_, _>>()?,
        };
        match shock_rows.get(&t) {
            Some(&x0) if x0 != cell.x => {
                bad_shock = Some(bad_shock.map_or(t, |b| b.min(t)));
            }
            Some(_) => {}
            None => {
                shock_rows.insert(t, cell.x);
            }
        }
        if cells.insert((unit.clone(), t), cell).is_some() {
            return Err(ingest(row, &schema.time, format!("duplicate cell for unit `{unit}` in period {t}")));
        }
    }
    if let Some(period) = bad_shock {
        return Err(Error::ShockInconsistency { period });
    }
    if cells.is_empty() {
        return Err(ingest(2, "", "no data rows"));
    }

    let mut units: Vec<String> = cells.keys().map(|(u, _)| u.clone()).collect();
    units.sort();
    units.dedup();
    sort_units(&mut units);
    let t_min = *shock_rows.keys().next().unwrap();
    let t_max = *shock_rows.keys().next_back().unwrap();
    let times: Vec<i64> = (t_min..=t_max).collect();
    let mut missing = Vec::new();
    for u in &units {
        for &t in &times {
            if !cells.contains_key(&(u.clone(), t)) {
                missing.push((u.clone(), t));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Balance { missing });
    }

    let (n, tt) = (units.len(), times.len());
    let mut outcome = Vec::with_capacity(n * tt);
    let mut state = Vec::with_capacity(n * tt);
    let mut controls = Vec::with_capacity(n * tt * q);
    for u in &units {
        for &t in &times {
            let c = &cells[&(u.clone(), t)];
            outcome.push(c.y);
            state.push(c.z);
            controls.extend_from_slice(&c.w);
        }
    }
    let shock = times.iter().map(|t| shock_rows[t]).collect();
    PanelDataset::new(units, times, outcome, shock, state, controls, control_names)
}

/// Writes the panel in `(unit, time)` order with the default column names
/// and the panel's own control names.
pub fn write_panel(sink: impl Write, panel: &PanelDataset) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["unit".to_string(), "time".into(), "y".into(), "x".into(), "z".into()];
    header.extend(panel.control_names.iter().cloned());
    w.write_record(&header)?;
    let q = panel.n_controls();
    let mut rec: Vec<String> = Vec::with_capacity(5 + q);
    for (i, u) in panel.unit_ids.iter().enumerate() {
        for (t, label) in panel.time_index.iter().enumerate() {
            rec.clear();
            rec.push(u.clone());
            rec.push(label.to_string());
            rec.push(panel.y(i, t).to_string());
            rec.push(panel.x(t).to_string());
            rec.push(panel.z(i, t).to_string());
            rec.extend(panel.w(i, t).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()
}

/// Splits control column `name` off the panel, returning the reduced panel
/// and the column as a unit-major `N×T` array.
pub fn take_control(panel: &PanelDataset, name: &str) -> Result<(PanelDataset, Vec<f64>), Error> {
    let k = panel
        .control_names
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| Error::Config(format!("no column `{name}` among the panel's extra columns")))?;
    let q = panel.n_controls();
    let cells = panel.n_units() * panel.n_periods();
    let mut column = Vec::with_capacity(cells);
    let mut rest = Vec::with_capacity(cells * (q - 1));
    for c in 0..cells {
        let row = &panel.controls[c * q..(c + 1) * q];
        column.push(row[k]);
        rest.extend(row.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| *v));
    }
    let mut names = panel.control_names.clone();
    names.remove(k);
    let reduced = PanelDataset::new(
        panel.unit_ids.clone(),
        panel.time_index.clone(),
        panel.outcome.clone(),
        panel.shock.clone(),
        panel.state.clone(),
        rest,
        names,
    )?;
    Ok((reduced, column))
}
