//! Number formatting and CSV encoding.

use crate::error::{CliError, Result};

/// Six significant digits, keeping trailing zeros (`1.81670`).
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 {
            "0.00000".into()
        } else {
            x.to_string()
        };
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("exponent digits");
    if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        sci
    }
}

/// CSV with a header row, LF line endings and shortest round-trip floats.
pub fn csv_bytes<R: serde::Serialize>(rows: &[R], header_if_empty: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(!rows.is_empty())
        .from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header_if_empty).map_err(csv_error)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| csv_error(e.into_error().into()))
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Config {
        origin: "csv".into(),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(1.1919573), "1.19196");
        assert_eq!(sig6(0.72134752), "0.721348");
        assert_eq!(sig6(1.8167), "1.81670");
        assert_eq!(sig6(119.4253), "119.425");
        assert_eq!(sig6(9.9999996), "10.0000");
        assert_eq!(sig6(-0.5), "-0.500000");
        assert_eq!(sig6(1.5e-7), "1.50000e-7");
        assert_eq!(sig6(0.0), "0.00000");
    }

    #[derive(serde::Serialize)]
    struct Row {
        tau: f64,
        objective: f64,
    }

    #[test]
    fn csv_uses_lf_and_round_trip_floats() {
        let bytes = csv_bytes(
            &[Row {
                tau: 0.1,
                objective: 1.0 / 3.0,
            }],
            &[],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "tau,objective\n0.1,0.3333333333333333\n"
        );
        let empty = csv_bytes::<Row>(&[], &["tau", "objective"]).unwrap();
        assert_eq!(empty, b"tau,objective\n");
    }
}
