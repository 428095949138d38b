//! Trajectory CSV and atomic file output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3};
use crate::sim::TrajectoryRecord;

/// Column names, in order.
pub fn csv_header() -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    let indexed = |cols: &mut Vec<String>, name: &str, n: usize| {
        cols.extend((0..n).map(|i| format!("{name}{i}")));
    };
    indexed(&mut cols, "Q", 9);
    indexed(&mut cols, "w_b", 3);
    indexed(&mut cols, "Qd", 9);
    indexed(&mut cols, "wd_b", 3);
    indexed(&mut cols, "u", 3);
    cols.push("psi".into());
    indexed(&mut cols, "e_q", 3);
    indexed(&mut cols, "e_w", 3);
    indexed(&mut cols, "s", 3);
    for c in ["V", "sandwich_lo", "sandwich_hi", "Vdot_fd"] {
        cols.push(c.into());
    }
    cols
}

// 17 significant digits: enough to round-trip any f64.
fn push_f64(line: &mut String, x: f64) {
    if !line.is_empty() {
        line.push(',');
    }
    let _ = write!(line, "{x:.16e}");
}

fn push_vec(line: &mut String, v: &Vec3) {
    for x in v.iter() {
        push_f64(line, *x);
    }
}

// Row-major: Q0 = Q[0][0], Q1 = Q[0][1], ...
fn push_mat(line: &mut String, m: &Mat3) {
    for i in 0..3 {
        for j in 0..3 {
            push_f64(line, m[(i, j)]);
        }
    }
}

/// Header plus one line per record, LF terminated.
pub fn trajectory_csv(records: &[TrajectoryRecord]) -> String {
    let mut out = csv_header().join(",");
    out.push('\n');
    let mut line = String::with_capacity(42 * 24);
    for r in records {
        line.clear();
        push_f64(&mut line, r.t);
        push_mat(&mut line, &r.attitude);
        push_vec(&mut line, &r.omega);
        push_mat(&mut line, &r.attitude_d);
        push_vec(&mut line, &r.omega_d);
        push_vec(&mut line, &r.u);
        push_f64(&mut line, r.psi);
        push_vec(&mut line, &r.e_q);
        push_vec(&mut line, &r.e_w);
        push_vec(&mut line, &r.s);
        let m = &r.monitor;
        for x in [m.v, m.sandwich_lo, m.sandwich_hi, m.vdot_fd] {
            push_f64(&mut line, x);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Writes `contents` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    // Temporary files are created owner-only; outputs are ordinary files.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| Error::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}
