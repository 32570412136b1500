//! Run logs and their CSV form.
//!
//! One row per control tick. All columns are numeric and carry their unit
//! in the name (`_m`, `_rad`, `_mps`, `_radps`, `_N`, `_Nm`, `_s`; flags
//! and counts have none). Wrench columns are body-frame, about the body
//! origin. Set-point velocities are world-frame. Attitudes are Z-Y-X roll,
//! pitch, yaw. `planner_mode` codes: 0 approach, 1 press, 2 slide, 3 shift,
//! 4 retreat, 5 hold, -1 no planner.

use std::io::{Read, Write};
use std::path::Path;

use crate::HarnessError;

const XYZ: [&str; 3] = ["x", "y", "z"];
const RPY: [&str; 3] = ["roll", "pitch", "yaw"];

fn triple(out: &mut Vec<String>, prefix: &str, names: [&str; 3], unit: &str) {
    for n in names {
        out.push(format!("{prefix}_{n}_{unit}"));
    }
}

fn wrench(out: &mut Vec<String>, prefix: &str) {
    triple(out, &format!("{prefix}_force"), XYZ, "N");
    triple(out, &format!("{prefix}_torque"), XYZ, "Nm");
}

/// Frozen column schema.
pub fn columns() -> Vec<String> {
    let mut c = vec!["time_s".to_string()];
    triple(&mut c, "true_pos", XYZ, "m");
    triple(&mut c, "true_att", RPY, "rad");
    triple(&mut c, "true_vel", XYZ, "mps");
    triple(&mut c, "true_rate", XYZ, "radps");
    triple(&mut c, "meas_pos", XYZ, "m");
    triple(&mut c, "meas_att", RPY, "rad");
    triple(&mut c, "sp_pos", XYZ, "m");
    triple(&mut c, "sp_att", RPY, "rad");
    triple(&mut c, "sp_vel", XYZ, "mps");
    triple(&mut c, "sp_rate", XYZ, "radps");
    triple(&mut c, "tip", XYZ, "m");
    triple(&mut c, "sp_tip", XYZ, "m");
    triple(&mut c, "err_pos", XYZ, "m");
    c.push("err_att_rad".into());
    wrench(&mut c, "est");
    wrench(&mut c, "ext");
    wrench(&mut c, "contact");
    wrench(&mut c, "dist");
    wrench(&mut c, "cmd");
    wrench(&mut c, "act");
    for i in 0..12 {
        c.push(format!("rotor_{i}_radps"));
    }
    for i in 0..6 {
        c.push(format!("tilt_{i}_rad"));
    }
    for i in 0..6 {
        c.push(format!("thrust_{i}_N"));
    }
    c.push("saturated".into());
    c.push("alloc_scale".into());
    c.push("penetration_m".into());
    c.push("contact_normal_N".into());
    c.push("sensor_raw_N".into());
    c.push("sensor_filtered_N".into());
    c.push("est_sensor_axis_N".into());
    c.push("surf_valid".into());
    c.push("surf_count".into());
    triple(&mut c, "surf_normal", XYZ, "1");
    triple(&mut c, "surf_point", XYZ, "m");
    c.push("planner_mode".into());
    c.push("slide_travel_m".into());
    c
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RunLog {
    pub fn new() -> Self {
        Self { columns: columns(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the schema");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn require(&self, name: &str) -> Result<Vec<f64>, HarnessError> {
        self.column(name).ok_or_else(|| HarnessError::Log(format!("missing column `{name}`")))
    }

    /// Rows with `from ≤ time ≤ to`.
    pub fn window(&self, from: f64, to: f64) -> RunLog {
        let t = self.index("time_s").expect("time column");
        RunLog {
            columns: self.columns.clone(),
            rows: self.rows.iter().filter(|r| r[t] >= from && r[t] <= to).cloned().collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| HarnessError::Io(e.to_string());
        out.write_record(&self.columns).map_err(err)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|v| v.to_string())).map_err(err)?;
        }
        out.flush().map_err(|e| HarnessError::Io(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, HarnessError> {
        let mut rdr = csv::Reader::from_reader(r);
        let err = |e: csv::Error| HarnessError::Log(e.to_string());
        let columns: Vec<String> = rdr.headers().map_err(err)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(err)?;
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| HarnessError::Log(format!("row {}: {e}", line + 1)))?;
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let file = std::fs::File::create(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let file = std::fs::File::open(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}
