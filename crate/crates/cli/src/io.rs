//! CSV emission. Floats carry 17 significant digits so they read back bit
//! for bit.

use std::fmt::Write as _;
use std::path::Path;

use impulse_iss_core::estimate::TrialResult;
use impulse_iss_core::system::HybridTrajectory;

use crate::error::CliError;

/// `x` with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(path.display().to_string(), e))
}

/// `t,x1,...,xn,pre_jump`; an impulse time appears twice, pre-jump row first.
pub fn trajectory_csv(traj: &HybridTrajectory) -> String {
    let mut s = String::from("t");
    for i in 1..=traj.n {
        write!(s, ",x{i}").unwrap();
    }
    s.push_str(",pre_jump\n");
    for p in traj.points() {
        s.push_str(&fmt17(p.t));
        for x in p.x {
            s.push(',');
            s.push_str(&fmt17(*x));
        }
        s.push_str(if p.pre_jump { ",1\n" } else { ",0\n" });
    }
    s
}

pub fn sequence_csv(times: &[f64]) -> String {
    let mut s = String::from("t\n");
    for t in times {
        s.push_str(&fmt17(*t));
        s.push('\n');
    }
    s
}

/// Reads a one-column `t` file; blank lines are ignored.
pub fn parse_sequence_csv(text: &str) -> Result<Vec<f64>, String> {
    let mut lines = text.lines().map(str::trim).enumerate().filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, "t")) => {}
        _ => return Err("sequence file must start with the header `t`".into()),
    }
    lines
        .map(|(i, l)| l.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

pub fn read_sequence_csv(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    parse_sequence_csv(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn trials_csv(trials: &[TrialResult]) -> String {
    let mut s = String::from("trial,seed,max_ratio,arg_t\n");
    for t in trials {
        writeln!(s, "{},{},{},{}", t.trial, t.seed, fmt17(t.max_ratio), fmt17(t.arg_t)).unwrap();
    }
    s
}

/// A generic table with a header row.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| fmt17(*x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
