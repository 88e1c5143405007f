//! File formats: DDMX snapshots, the time-series CSV and check reports.
//! Every write goes to a temporary file in the target directory and is
//! renamed into place.

use std::io::Write;
use std::path::Path;

use crate::dynamics::State;
use crate::error::IoError;
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::integrator::{TrajectoryRecord, TrajectoryRow};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"DDMX";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `bytes` to `path` atomically (temporary file, then rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

/// `"DDMX"`, version, `N`, `L`, `t`, then the seven planes
/// `ρ, E₁, E₂, E₃, B₁, B₂, B₃` as row-major little-endian `f64`.
pub fn encode_snapshot(s: &State) -> Vec<u8> {
    let g = s.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 7 * 8 * g.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&g.length().to_le_bytes());
    out.extend_from_slice(&s.time.to_le_bytes());
    for plane in s.planes() {
        for v in plane.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_snapshot(bytes: &[u8], origin: &str) -> Result<State, IoError> {
    let bad = |reason: String| IoError::BadSnapshot {
        path: origin.to_string(),
        reason,
    };
    if bytes.len() < HEADER_LEN || &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(bad("missing magic bytes".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(4);
    if version != SNAPSHOT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let n = u32_at(8) as usize;
    let grid = Grid::new(n, f64_at(12))?;
    let time = f64_at(20);
    let expected = HEADER_LEN + 7 * 8 * grid.len();
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let planes: Vec<ScalarField> = (0..7)
        .map(|p| {
            let start = HEADER_LEN + p * 8 * grid.len();
            let values = (0..grid.len()).map(|i| f64_at(start + 8 * i)).collect();
            ScalarField::from_values(&grid, values)
        })
        .collect::<Result<_, _>>()?;
    let planes: [ScalarField; 7] = planes.try_into().expect("seven planes");
    Ok(State::from_planes(planes, time)?)
}

pub fn write_snapshot(path: &Path, s: &State) -> Result<(), IoError> {
    write_atomic(path, &encode_snapshot(s))
}

pub fn read_snapshot(path: &Path) -> Result<State, IoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode_snapshot(&bytes, &path.display().to_string())
}

/// Column order of the time-series CSV.
pub const TIMESERIES_COLUMNS: [&str; 24] = [
    "t",
    "l2_rho",
    "l2_E",
    "l2_B",
    "h1_rho",
    "h1_E",
    "h1_B",
    "grad_rho_l2",
    "hess_rho_l2",
    "linf_rho",
    "gauss_e_residual",
    "div_b_residual",
    "energy",
    "dissipation_integral",
    "I1",
    "I2",
    "I3",
    "I4",
    "J1",
    "J2",
    "J3",
    "J4",
    "J5",
    "J6",
];

fn row_values(r: &TrajectoryRow) -> [f64; 24] {
    [
        r.t,
        r.l2_rho,
        r.l2_e,
        r.l2_b,
        r.h1_rho,
        r.h1_e,
        r.h1_b,
        r.grad_rho_l2,
        r.hess_rho_l2,
        r.linf_rho,
        r.gauss_e_residual,
        r.div_b_residual,
        r.energy,
        r.dissipation_integral,
        r.i1,
        r.i2,
        r.i3,
        r.i4,
        r.j1,
        r.j2,
        r.j3,
        r.j4,
        r.j5,
        r.j6,
    ]
}

/// One CSV line per row; floats use the shortest exact representation.
pub fn timeseries_csv(traj: &TrajectoryRecord) -> String {
    let mut out = TIMESERIES_COLUMNS.join(",");
    out.push('\n');
    for r in traj.rows() {
        let cells: Vec<String> = row_values(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Parses a time-series CSV back into rows (running integrals included).
pub fn parse_timeseries_csv(text: &str) -> Result<Vec<[f64; 24]>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    if header != TIMESERIES_COLUMNS.join(",") {
        return Err(format!("unexpected header `{header}`"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2)))
                .collect::<Result<_, _>>()?;
            v.try_into().map_err(|_| format!("line {}: expected 24 columns", i + 2))
        })
        .collect()
}

/// CSV of check reports: `name,lhs,rhs,margin,passed`.
pub fn checks_csv<'a>(rows: impl IntoIterator<Item = (&'a str, f64, f64, f64, bool)>) -> String {
    let mut out = String::from("name,lhs,rhs,margin,passed\n");
    for (name, lhs, rhs, margin, passed) in rows {
        out.push_str(&format!("{name},{lhs},{rhs},{margin},{passed}\n"));
    }
    out
}
