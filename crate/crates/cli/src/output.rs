//! CSV emission. Floats use the shortest representation that round-trips.

use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use impulsive_iss::linalg::norm;
use impulsive_iss::{Error, LyapunovPair, Result, Trajectory};

/// Shortest round-trip text; scientific notation outside `[1e-4, 1e15)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// `<dir>/<stem>_events.csv` next to the trajectory file.
pub fn events_path(trajectory: &Path) -> PathBuf {
    let stem = trajectory
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trajectory");
    trajectory.with_file_name(format!("{stem}_events.csv"))
}

fn open(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)
}

/// Trajectory rows at every grid node; an event adds a pre-jump row first.
pub fn write_trajectory<W: Write>(
    out: W,
    traj: &Trajectory,
    projection: Range<usize>,
    pair: Option<&LyapunovPair>,
) -> Result<usize> {
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let n = traj.dim();
    let m = traj.input.dim();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=m).map(|i| format!("w_{i}")));
    header.push("norm_x".into());
    if pair.is_some() {
        header.extend(["V", "V1", "V2"].map(String::from));
    }
    wr.write_record(&header).map_err(csv_err)?;

    let mut rows = 0;
    let mut row = |t: f64, x: &[f64], w: Vec<f64>, v: Option<[f64; 3]>| -> Result<()> {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        rec.push(fmt_f64(t));
        rec.extend(x.iter().copied().map(fmt_f64));
        rec.extend(w.iter().copied().map(fmt_f64));
        rec.push(fmt_f64(norm(&x[projection.clone()])));
        if let Some(v) = v {
            rec.extend(v.iter().copied().map(fmt_f64));
        }
        rows += 1;
        wr.write_record(&rec).map_err(csv_err)
    };
    for t in traj.grid() {
        if let Some(e) = traj.event_at(t) {
            let v = pair
                .map(|p| p.eval_v_left(traj, t))
                .transpose()?
                .map(|v| [v.v, v.v1, v.v2]);
            row(t, &e.pre, traj.input.left_limit(t), v)?;
        }
        let v = pair
            .map(|p| p.eval_v(traj, t))
            .transpose()?
            .map(|v| [v.v, v.v1, v.v2]);
        row(t, &traj.eval(t)?, traj.input.eval(t), v)?;
    }
    wr.flush()
        .map_err(|e| Error::Config(format!("write: {e}")))?;
    Ok(rows)
}

pub fn write_trajectory_file(
    path: &Path,
    traj: &Trajectory,
    projection: Range<usize>,
    pair: Option<&LyapunovPair>,
) -> Result<usize> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
    write_trajectory(std::io::BufWriter::new(file), traj, projection, pair)
}

pub fn write_events(path: &Path, traj: &Trajectory, projection: Range<usize>) -> Result<()> {
    let mut wr = open(path)?;
    wr.write_record(["k", "t_k", "pre_norm", "post_norm", "jump_norm"])
        .map_err(csv_err)?;
    for e in &traj.events {
        let p = projection.clone();
        wr.write_record([
            e.index.to_string(),
            fmt_f64(e.time),
            fmt_f64(norm(&e.pre[p.clone()])),
            fmt_f64(norm(&e.post[p.clone()])),
            fmt_f64(norm(&e.delta[p])),
        ])
        .map_err(csv_err)?;
    }
    wr.flush().map_err(|e| Error::Config(format!("write: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_file_sits_next_to_trajectory() {
        assert_eq!(
            events_path(Path::new("out/run.csv")),
            PathBuf::from("out/run_events.csv")
        );
        assert_eq!(
            events_path(Path::new("run")),
            PathBuf::from("run_events.csv")
        );
    }

    #[test]
    fn float_text_round_trips() {
        for x in [
            0.0,
            1.0,
            -2.5e-12,
            9.174651683190389e-12,
            123456.789,
            3e20,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(1e-5), "1e-5");
        assert_eq!(fmt_f64(0.5), "0.5");
    }
}
