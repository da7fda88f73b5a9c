//! Log serialization: one fixed 10-column CSV schema, written with fixed
//! decimal precision so identical runs produce identical bytes.

use std::path::Path;

use thiserror::Error;

use crate::sim::LogRow;

pub const CSV_HEADER: &str =
    "time_s,wind_mps,power_w,rotor_speed_rpm,pitch_deg,gen_torque_knm,solve_time_s,mip_gap,\
     eps_omega,d_omega";

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected header `{expected}`", expected = CSV_HEADER)]
    BadHeader { line: usize },
    #[error("line {line}: expected 10 fields, got {got}")]
    BadFieldCount { line: usize, got: usize },
    #[error("line {line}, field {field}: `{text}` is not a number")]
    BadNumber {
        line: usize,
        field: usize,
        text: String,
    },
}

fn format_row(r: &LogRow) -> String {
    format!(
        "{:.3},{:.6},{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.9}",
        r.time_s,
        r.wind_mps,
        r.power_w,
        r.rotor_speed_rpm,
        r.pitch_deg,
        r.gen_torque_knm,
        r.solve_time_s,
        r.mip_gap,
        r.eps_omega,
        r.d_omega
    )
}

pub fn to_csv_text(rows: &[LogRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format_row(r));
        out.push('\n');
    }
    out
}

pub fn write_csv(rows: &[LogRow], path: &Path) -> Result<(), CsvError> {
    std::fs::write(path, to_csv_text(rows)).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn from_csv_text(text: &str) -> Result<Vec<LogRow>, CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(CsvError::BadHeader { line: 1 }),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(CsvError::BadFieldCount {
                line: idx + 1,
                got: fields.len(),
            });
        }
        let mut v = [0.0f64; 10];
        for (f, (slot, text)) in v.iter_mut().zip(fields).enumerate() {
            *slot = text.trim().parse().map_err(|_| CsvError::BadNumber {
                line: idx + 1,
                field: f + 1,
                text: text.to_string(),
            })?;
        }
        rows.push(LogRow {
            time_s: v[0],
            wind_mps: v[1],
            power_w: v[2],
            rotor_speed_rpm: v[3],
            pitch_deg: v[4],
            gen_torque_knm: v[5],
            solve_time_s: v[6],
            mip_gap: v[7],
            eps_omega: v[8],
            d_omega: v[9],
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<LogRow>, CsvError> {
    let text = std::fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_csv_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row(t: f64) -> LogRow {
        LogRow {
            time_s: t,
            wind_mps: 8.123456789,
            power_w: 3_299_987.6543,
            rotor_speed_rpm: 11.459155902,
            pitch_deg: 12.3456789,
            gen_torque_knm: 28.7654321,
            solve_time_s: 0.0123456,
            mip_gap: 3.2e-5,
            eps_omega: 0.0001234,
            d_omega: -4.56e-7,
        }
    }

    #[test]
    fn header_has_ten_columns_and_matches_schema() {
        assert_eq!(CSV_HEADER.split(',').count(), 10);
        let text = to_csv_text(&[]);
        assert_eq!(text, format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn round_trip_preserves_values_within_precision() {
        let rows = vec![sample_row(0.0), sample_row(3.0)];
        let text = to_csv_text(&rows);
        let back = from_csv_text(&text).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in rows.iter().zip(&back) {
            assert!((a.time_s - b.time_s).abs() <= 5e-4);
            assert!((a.wind_mps - b.wind_mps).abs() <= 5e-7);
            assert!((a.power_w - b.power_w).abs() <= 5e-4);
            assert!((a.rotor_speed_rpm - b.rotor_speed_rpm).abs() <= 5e-7);
            assert!((a.pitch_deg - b.pitch_deg).abs() <= 5e-7);
            assert!((a.gen_torque_knm - b.gen_torque_knm).abs() <= 5e-7);
            assert!((a.solve_time_s - b.solve_time_s).abs() <= 5e-7);
            assert!((a.mip_gap - b.mip_gap).abs() <= 5e-7);
            assert!((a.eps_omega - b.eps_omega).abs() <= 5e-7);
            assert!((a.d_omega - b.d_omega).abs() <= 5e-10);
        }
    }

    #[test]
    fn infinite_gap_survives_the_round_trip() {
        let mut r = sample_row(6.0);
        r.mip_gap = f64::INFINITY;
        let back = from_csv_text(&to_csv_text(&[r])).unwrap();
        assert!(back[0].mip_gap.is_infinite());
    }

    #[test]
    fn deterministic_formatting_is_byte_stable() {
        let rows = vec![sample_row(0.0), sample_row(3.0), sample_row(6.0)];
        assert_eq!(to_csv_text(&rows), to_csv_text(&rows));
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(matches!(
            from_csv_text("nope\n1,2,3\n"),
            Err(CsvError::BadHeader { .. })
        ));
        let missing = format!("{CSV_HEADER}\n1,2,3\n");
        assert!(matches!(
            from_csv_text(&missing),
            Err(CsvError::BadFieldCount { line: 2, got: 3 })
        ));
        let garbled = format!("{CSV_HEADER}\n0,1,2,3,4,5,6,7,8,x\n");
        assert!(matches!(
            from_csv_text(&garbled),
            Err(CsvError::BadNumber { line: 2, field: 10, .. })
        ));
    }
}
