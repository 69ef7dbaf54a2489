//! Trajectory CSV: one row per recorded sample, columns in state order
//! with buses numbered by their position in the system file.

use std::io::{Read, Write};

use gridstate_core::simulate::Trajectory;
use nalgebra::DVector;

use crate::error::{CliError, CliResult};
use crate::numfmt::csv_field;
use crate::schema::ParsedSystem;

/// Header names paired with the state index each column holds.
pub fn columns(parsed: &ParsedSystem) -> Vec<(String, usize)> {
    let sys = &parsed.system;
    let layout = sys.layout();
    let mut cols = Vec::with_capacity(layout.n_x());
    for k in 0..sys.n_g() {
        cols.push((format!("theta_{}", k + 1), layout.theta().start + k));
    }
    for k in 0..sys.n_g() {
        cols.push((format!("omega_{}", k + 1), layout.omega().start + k));
    }
    for k in 0..sys.n_g() {
        let c = layout.machine_currents(k).start;
        for (j, name) in ["i_alpha", "i_beta", "i_f", "i_d", "i_q"].iter().enumerate() {
            cols.push((format!("{name}_{}", k + 1), c + j));
        }
    }
    let v0 = layout.voltages().start;
    for (f, k) in parsed.internal_of_file().into_iter().enumerate() {
        cols.push((format!("v_alpha_{}", f + 1), v0 + 2 * k));
        cols.push((format!("v_beta_{}", f + 1), v0 + 2 * k + 1));
    }
    let t0 = layout.line_currents().start;
    for l in 0..sys.n_t() {
        cols.push((format!("iT_alpha_{}", l + 1), t0 + 2 * l));
        cols.push((format!("iT_beta_{}", l + 1), t0 + 2 * l + 1));
    }
    cols
}

pub fn header(parsed: &ParsedSystem) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain(columns(parsed).into_iter().map(|(n, _)| n))
        .collect()
}

pub fn write_csv<W: Write>(out: W, parsed: &ParsedSystem, traj: &Trajectory) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Usage(format!("cannot write trajectory: {e}"));
    let cols = columns(parsed);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(parsed)).map_err(io)?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let row = std::iter::once(csv_field(*t)).chain(cols.iter().map(|(_, i)| csv_field(x[*i])));
        w.write_record(row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Usage(format!("cannot write trajectory: {e}")))
}

/// Recorded samples as `(times, states)`.
pub fn read_csv<R: Read>(input: R, parsed: &ParsedSystem) -> CliResult<(Vec<f64>, Vec<DVector<f64>>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let got: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Parse(format!("trajectory header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let want = header(parsed);
    if got != want {
        let missing: Vec<&str> = want.iter().filter(|w| !got.contains(w)).map(String::as_str).collect();
        let msg = if missing.is_empty() {
            format!("trajectory header does not match the system; expected `{}`", want.join(","))
        } else {
            format!("trajectory is missing columns: {}", missing.join(", "))
        };
        return Err(CliError::Parse(msg));
    }
    let cols = columns(parsed);
    let n_x = parsed.system.n_x();
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Parse(format!("trajectory sample {row}: {e}")))?;
        if rec.len() != want.len() {
            return Err(CliError::Parse(format!(
                "trajectory sample {row}: {} fields, expected {}",
                rec.len(),
                want.len()
            )));
        }
        let mut vals = rec.iter().enumerate().map(|(c, s)| {
            s.trim().parse::<f64>().map_err(|_| {
                CliError::Parse(format!("trajectory sample {row}, column {}: {s:?} is not a number", want[c]))
            })
        });
        times.push(vals.next().expect("header has t")?);
        let mut x = DVector::zeros(n_x);
        for ((_, idx), v) in cols.iter().zip(vals) {
            x[*idx] = v?;
        }
        states.push(x);
    }
    if states.is_empty() {
        return Err(CliError::Parse("trajectory has no samples".into()));
    }
    Ok((times, states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::tests::fixture;

    #[test]
    fn header_is_exact() {
        let h = header(&fixture()).join(",");
        assert_eq!(
            h,
            "t,theta_1,theta_2,omega_1,omega_2,\
             i_alpha_1,i_beta_1,i_f_1,i_d_1,i_q_1,i_alpha_2,i_beta_2,i_f_2,i_d_2,i_q_2,\
             v_alpha_1,v_beta_1,v_alpha_2,v_beta_2,v_alpha_3,v_beta_3,\
             iT_alpha_1,iT_beta_1,iT_alpha_2,iT_beta_2,iT_alpha_3,iT_beta_3"
        );
    }

    #[test]
    fn columns_cover_the_state_once() {
        let mut idx: Vec<usize> = columns(&fixture()).into_iter().map(|(_, i)| i).collect();
        idx.sort();
        assert_eq!(idx, (0..26).collect::<Vec<_>>());
    }

    #[test]
    fn round_trip_is_exact() {
        let p = fixture();
        let states: Vec<DVector<f64>> = (0..3)
            .map(|s| DVector::from_fn(26, |i, _| ((i + 1) as f64 * 0.37 + s as f64).sin() * 1e3 / 7.0))
            .collect();
        let traj = Trajectory {
            times: vec![0.0, 1e-5, 2e-5],
            states: states.clone(),
            inputs: gridstate_core::system::InputVector::zeros(2),
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &p, &traj).unwrap();
        let (t, x) = read_csv(buf.as_slice(), &p).unwrap();
        assert_eq!(t, traj.times);
        assert_eq!(x, states);
    }

    #[test]
    fn schema_mismatches_are_parse_errors() {
        let p = fixture();
        let err = read_csv("t,theta_1\n0,1\n".as_bytes(), &p).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("missing columns: theta_2"));
        let mut text = header(&p).join(",");
        text.push('\n');
        assert!(read_csv(text.as_bytes(), &p).unwrap_err().to_string().contains("no samples"));
        text.push_str(&vec!["0"; 26].join(","));
        text.push_str(",x\n");
        assert!(read_csv(text.as_bytes(), &p).unwrap_err().to_string().contains("iT_beta_3"));
    }
}
