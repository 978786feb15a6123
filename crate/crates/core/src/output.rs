//! Report and curve writers: CSV files plus a plain-text summary.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::metrics::ErrorReport;
use crate::mrcm::StageTimings;
use crate::transport::ProductionRecord;

/// One timed stage of a run; `stage` groups rows (`fine`, `mrcm`, `transport`).
#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub stage: String,
    pub name: String,
    pub seconds: f64,
}

impl TimingRow {
    pub fn new(stage: &str, name: &str, seconds: f64) -> Self {
        Self { stage: stage.into(), name: name.into(), seconds }
    }
}

/// Timings, counters, error norms and pass flags of one command.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub timings: Vec<TimingRow>,
    pub metrics: Vec<(String, f64)>,
    pub flags: Vec<(String, bool)>,
}

impl RunReport {
    pub fn time(&mut self, stage: &str, name: &str, seconds: f64) {
        self.timings.push(TimingRow::new(stage, name, seconds.max(0.0)));
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.push((name.into(), value));
    }

    pub fn flag(&mut self, name: &str, ok: bool) {
        self.flags.push((name.into(), ok));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn add_mrcm_timings(&mut self, t: &StageTimings) {
        for (name, s) in [
            ("mbf", t.mbf),
            ("mbf_factor", t.mbf_factor),
            ("mbf_solve", t.mbf_solve),
            ("interface_assembly", t.interface_assembly),
            ("interface_solve", t.interface_solve),
            ("reconstruction", t.reconstruction),
            ("total", t.total()),
        ] {
            self.time("mrcm", name, s);
        }
    }

    pub fn add_errors(&mut self, e: &ErrorReport<f64>) {
        self.metric("pressure_error", e.pressure);
        self.metric("velocity_error", e.velocity);
        self.metric("max_pressure_jump", e.max_pressure_jump);
        self.metric("max_flux_jump", e.max_flux_jump);
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (n, v) in &self.metrics {
            let _ = writeln!(s, "{n:<24} {v:.6e}");
        }
        for t in &self.timings {
            let _ = writeln!(s, "{:<24} {:.6} s", format!("{}/{}", t.stage, t.name), t.seconds);
        }
        for (n, ok) in &self.flags {
            let _ = writeln!(s, "{n:<24} {}", if *ok { "pass" } else { "fail" });
        }
        s
    }
}

pub fn write_timings(path: impl AsRef<Path>, rows: &[TimingRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["stage", "name", "seconds"])?;
    for r in rows {
        w.write_record([r.stage.as_str(), r.name.as_str(), &r.seconds.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `metric,value` rows; flags are written as 1 or 0.
pub fn write_report(path: impl AsRef<Path>, report: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "value"])?;
    for (n, v) in &report.metrics {
        w.write_record([n.as_str(), &v.to_string()])?;
    }
    for (n, ok) in &report.flags {
        w.write_record([n.as_str(), if *ok { "1" } else { "0" }])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per sample; missing producers are written as 0.
pub fn write_production_curves(path: impl AsRef<Path>, record: &ProductionRecord<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t_pvi", "oil_fraction", "w1", "w2", "w3", "w4"])?;
    for s in &record.samples {
        let mut row = vec![s.t_pvi.to_string(), s.oil_fraction.to_string()];
        row.extend((0..4).map(|i| s.watercuts.get(i).copied().unwrap_or(0.0).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a curves file back as `(t_pvi, oil_fraction, [w1..w4])` rows.
pub fn read_production_curves(path: impl AsRef<Path>) -> Result<Vec<(f64, f64, [f64; 4])>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64> {
            let tok = rec.get(j).unwrap_or("");
            tok.parse().map_err(|_| crate::Error::Parse { line: i + 2, message: format!("bad number `{tok}`") })
        };
        out.push((num(0)?, num(1)?, [num(2)?, num(3)?, num(4)?, num(5)?]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::ProductionSample;

    #[test]
    fn curves_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let record = ProductionRecord {
            samples: vec![
                ProductionSample { t_pvi: 0.0, oil_fraction: 1.0, watercuts: vec![0.0; 4], no_flow: false },
                ProductionSample { t_pvi: 0.1 + 0.2, oil_fraction: 0.7, watercuts: vec![0.1, 0.2, 0.3, 1.0 / 3.0], no_flow: false },
            ],
        };
        write_production_curves(&path, &record).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t_pvi,oil_fraction,w1,w2,w3,w4\n"));
        let back = read_production_curves(&path).unwrap();
        assert_eq!(back[1], (0.1 + 0.2, 0.7, [0.1, 0.2, 0.3, 1.0 / 3.0]));
    }

    #[test]
    fn report_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = RunReport::default();
        r.metric("pressure_error", 1e-3);
        r.flag("conservative", true);
        r.time("fine", "solve", 0.5);
        write_report(dir.path().join("r.csv"), &r).unwrap();
        write_timings(dir.path().join("t.csv"), &r.timings).unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("r.csv")).unwrap(), "metric,value\npressure_error,0.001\nconservative,1\n");
        assert_eq!(std::fs::read_to_string(dir.path().join("t.csv")).unwrap(), "stage,name,seconds\nfine,solve,0.5\n");
        assert!(r.summary().contains("fine/solve"));
        assert_eq!(r.get("pressure_error"), Some(1e-3));
    }
}
