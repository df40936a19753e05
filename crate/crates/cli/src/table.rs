//! Trajectory CSV: `t,q_1..q_N,v_1..v_N,exposure`, 17 significant digits.

use std::path::Path;

use hedger_core::{HedgeInputs, Trajectory};

use crate::error::CliError;

pub fn header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("q_{i}")));
    h.extend((1..=n).map(|i| format!("v_{i}")));
    h.push("exposure".into());
    h
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trajectory(
    path: &Path,
    tr: &Trajectory,
    inputs: &HedgeInputs,
) -> Result<(), CliError> {
    let out = |e: csv::Error| CliError::Output(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(out)?;
    w.write_record(header(tr.dim())).map_err(out)?;
    for ((t, q), v) in tr.times.iter().zip(&tr.positions).zip(&tr.velocities) {
        let mut row = vec![fmt(*t)];
        row.extend(q.iter().map(|x| fmt(*x)));
        row.extend(v.iter().map(|x| fmt(*x)));
        row.push(fmt(inputs.exposure(q)));
        w.write_record(&row).map_err(out)?;
    }
    w.flush()
        .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let cols = r.headers().map_err(|e| bad(e.to_string()))?.len();
    if cols < 4 || (cols - 2) % 2 != 0 {
        return Err(bad(format!(
            "expected t, q_1..q_N, v_1..v_N, exposure; got {cols} columns"
        )));
    }
    let n = (cols - 2) / 2;
    let expected = header(n);
    if r.headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .ne(expected.iter().map(String::as_str))
    {
        return Err(bad(format!("header must be {}", expected.join(","))));
    }
    let (mut times, mut positions, mut velocities) = (Vec::new(), Vec::new(), Vec::new());
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let values: Vec<f64> = record
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
        times.push(values[0]);
        positions.push(values[1..=n].to_vec());
        velocities.push(values[n + 1..=2 * n].to_vec());
    }
    Trajectory::new(times, positions, velocities).map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hedger_core::{CostSpec, MarketView, TargetVector};

    #[test]
    fn round_trip_is_exact() {
        let inputs = HedgeInputs {
            gamma: 1.0,
            rho: 0.0,
            xi: 1.0,
            view: MarketView::NONE,
            vega_sv: vec![0.3, 1.0 / 3.0],
            target: TargetVector(vec![1.0, -2.0]),
            q0: vec![0.1, 0.7],
            costs: vec![CostSpec::quadratic(1.0); 2],
            horizon: 0.7,
        };
        let tr = Trajectory::fast_unwind(&[0.1, 0.7], &[-1.0, 2.0], 0.07, 0.7, 37);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trajectory(&path, &tr, &inputs).unwrap();
        assert_eq!(read_trajectory(&path).unwrap(), tr);
    }

    #[test]
    fn rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "t,a,b,exposure\n0,1,2,3\n").unwrap();
        assert!(matches!(read_trajectory(&path), Err(CliError::Config(_))));
    }
}
