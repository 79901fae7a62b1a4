//! CSV formats for stage records, summaries and curves.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::summary::{CurvePoint, SummaryStats};
use super::{Framework, StageRecord};
use crate::error::{BocoError, Result};

pub const STAGE_CSV_HEADER: &str = "trial,t,framework,z1,z2,z3,z4,reward,feasible,hindsight,regret,ess,rejuvenated";
pub const SUMMARY_CSV_HEADER: &str = "framework,trials,T,mean_r_T,std_r_T,mean_r_half,std_r_half,mean_feas_T,std_feas_T,mean_feas_half,std_feas_half";
pub const CURVE_CSV_HEADER: &str = "t,mean,p10,p90";

/// Seventeen significant digits, which round-trips every `f64`.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn stage_file_name(fw: Framework) -> String {
    format!("{}_stages.csv", fw.slug())
}

pub fn reward_curve_file_name(fw: Framework) -> String {
    format!("{}_reward_curve.csv", fw.slug())
}

pub fn feasibility_curve_file_name(fw: Framework) -> String {
    format!("{}_feasibility_curve.csv", fw.slug())
}

pub const SUMMARY_FILE_NAME: &str = "summary.csv";

pub fn stage_csv(records: &[StageRecord]) -> String {
    let mut s = String::with_capacity(160 * (records.len() + 1));
    s.push_str(STAGE_CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = write!(s, "{},{},{}", r.trial, r.t, r.framework.tag());
        for z in r.z {
            let _ = write!(s, ",{z}");
        }
        let _ = write!(
            s,
            ",{},{},{},{},",
            fmt_float(r.reward),
            u8::from(r.feasible),
            fmt_float(r.hindsight),
            fmt_float(r.regret)
        );
        if let Some(e) = r.ess {
            s.push_str(&fmt_float(e));
        }
        s.push(',');
        if let Some(j) = r.rejuvenated {
            s.push_str(if j { "1" } else { "0" });
        }
        s.push('\n');
    }
    s
}

fn csv_err(path: &Path, line: usize, message: impl std::fmt::Display) -> BocoError {
    BocoError::Csv {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| csv_err(path, line, format!("bad {name} value {raw:?}")))
}

/// Parses a stage CSV as written by [`stage_csv`].
pub fn parse_stage_csv(path: &Path, text: &str) -> Result<Vec<StageRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == STAGE_CSV_HEADER => {}
        _ => return Err(csv_err(path, 1, "missing or unexpected header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 13 {
            return Err(csv_err(path, n, format!("expected 13 columns, found {}", cols.len())));
        }
        let framework = Framework::parse(cols[2]).ok_or_else(|| csv_err(path, n, "unknown framework"))?;
        let flag = |raw: &str, name: &str| -> Result<bool> {
            match raw.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(csv_err(path, n, format!("bad {name} flag {raw:?}"))),
            }
        };
        let ess = match cols[11].trim() {
            "" => None,
            v => Some(field(path, n, "ess", v)?),
        };
        let rejuvenated = match cols[12].trim() {
            "" => None,
            v => Some(flag(v, "rejuvenated")?),
        };
        out.push(StageRecord {
            trial: field(path, n, "trial", cols[0])?,
            t: field(path, n, "t", cols[1])?,
            framework,
            z: [
                field(path, n, "z1", cols[3])?,
                field(path, n, "z2", cols[4])?,
                field(path, n, "z3", cols[5])?,
                field(path, n, "z4", cols[6])?,
            ],
            reward: field(path, n, "reward", cols[7])?,
            feasible: flag(cols[8], "feasible")?,
            hindsight: field(path, n, "hindsight", cols[9])?,
            regret: field(path, n, "regret", cols[10])?,
            ess,
            rejuvenated,
        });
    }
    Ok(out)
}

pub fn read_stage_csv(path: &Path) -> Result<Vec<StageRecord>> {
    let text = fs::read_to_string(path).map_err(|e| BocoError::io(path, e))?;
    parse_stage_csv(path, &text)
}

pub fn summary_row(s: &SummaryStats) -> String {
    let cols = [
        s.reward_full.mean,
        s.reward_full.std,
        s.reward_half.mean,
        s.reward_half.std,
        s.feas_full.mean,
        s.feas_full.std,
        s.feas_half.mean,
        s.feas_half.std,
    ];
    let mut row = format!("{},{},{}", s.framework.tag(), s.trials, s.horizon);
    for v in cols {
        row.push(',');
        row.push_str(&fmt_float(v));
    }
    row
}

pub fn summary_csv(stats: &[SummaryStats]) -> String {
    let mut s = String::from(SUMMARY_CSV_HEADER);
    s.push('\n');
    for st in stats {
        s.push_str(&summary_row(st));
        s.push('\n');
    }
    s
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from(CURVE_CSV_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(s, "{},{},{},{}", p.t, fmt_float(p.mean), fmt_float(p.p10), fmt_float(p.p90));
    }
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| BocoError::io(path, e))
}
