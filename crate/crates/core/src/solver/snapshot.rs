//! Snapshot files: one JSON header line, then `N_u·N_f³` little-endian `f64`
//! values in `(i_u, j1, j2, j3)` row-major order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NormMode, PotentialState};
use crate::construct::{analyze_matrix, lattice_chart};
use crate::error::{Error, Result};
use crate::modelgeom::ModelParams;

pub const SNAPSHOT_VERSION: u32 = 1;
/// Largest field a decoder will accept, in samples.
const MAX_SAMPLES: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "N_u")]
    pub n_u: usize,
    #[serde(rename = "N_f")]
    pub n_f: usize,
    pub y0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsAB {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub version: u32,
    pub t: f64,
    pub grid: GridSpec,
    pub matrix: [i64; 9],
    pub params: ParamsAB,
    pub norm_mode: NormMode,
    pub c1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub phi: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(state: &PotentialState) -> Self {
        let m = state.chart.structure.matrix;
        Snapshot {
            header: SnapshotHeader {
                version: SNAPSHOT_VERSION,
                t: state.t,
                grid: GridSpec {
                    n_u: state.chart.n_u,
                    n_f: state.chart.n_f,
                    y0: state.chart.y0,
                },
                matrix: [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]],
                params: ParamsAB {
                    a: state.a(),
                    b: state.b(),
                },
                norm_mode: state.norm_mode,
                c1: state.c1,
            },
            phi: state.phi.clone(),
        }
    }

    /// Rebuild the chart and state described by the header.
    pub fn to_state(&self) -> Result<PotentialState> {
        let h = &self.header;
        let m = h.matrix;
        let structure = analyze_matrix(&[[m[0], m[1], m[2]], [m[3], m[4], m[5]], [m[6], m[7], m[8]]])?;
        let chart = lattice_chart(&structure, h.grid.y0, h.grid.n_u, h.grid.n_f)?;
        PotentialState::new(
            chart,
            h.t,
            self.phi.clone(),
            ModelParams::single(h.params.a, h.params.b)?,
            h.norm_mode,
            h.c1,
        )
    }
}

pub fn encode_snapshot(snap: &Snapshot) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(&snap.header)?;
    out.push(b'\n');
    out.reserve(8 * snap.phi.len());
    for v in &snap.phi {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    let nl = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::Snapshot("missing header line".into()))?;
    let header: SnapshotHeader = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| Error::Snapshot(format!("bad header: {e}")))?;
    if header.version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!("unsupported version {}", header.version)));
    }
    let g = &header.grid;
    if g.n_u == 0 || g.n_f == 0 {
        return Err(Error::Snapshot("empty grid".into()));
    }
    let samples = g
        .n_f
        .checked_pow(3)
        .and_then(|v| v.checked_mul(g.n_u))
        .filter(|v| *v <= MAX_SAMPLES)
        .ok_or_else(|| Error::Snapshot("grid too large".into()))?;
    let body = &bytes[nl + 1..];
    if body.len() != 8 * samples {
        return Err(Error::Snapshot(format!(
            "body has {} bytes, grid needs {}",
            body.len(),
            8 * samples
        )));
    }
    let phi = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Snapshot { header, phi })
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    std::fs::write(path, encode_snapshot(snap)?)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    decode_snapshot(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Snapshot {
        Snapshot {
            header: SnapshotHeader {
                version: 1,
                t: 0.1 + 0.2,
                grid: GridSpec { n_u: 4, n_f: 4, y0: 1.0 },
                matrix: [0, 1, 0, 0, 0, 1, 1, 1, 0],
                params: ParamsAB { a: 1.0, b: 1.0 },
                norm_mode: NormMode::Improved,
                c1: 1.0,
            },
            phi: (0..256).map(|k| (k as f64).sin() * 1e-7).collect(),
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let s = sample();
        let bytes = encode_snapshot(&s).unwrap();
        let back = decode_snapshot(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(encode_snapshot(&back).unwrap(), bytes);
        let text = std::str::from_utf8(&bytes[..bytes.iter().position(|b| *b == b'\n').unwrap()]).unwrap();
        assert!(text.starts_with("{\"version\":1,"));
        assert!(text.contains("\"N_u\":4"));
        assert!(text.contains("\"norm_mode\":\"improved\""));
    }

    #[test]
    fn truncated_body_rejected() {
        let bytes = encode_snapshot(&sample()).unwrap();
        assert!(decode_snapshot(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_snapshot(b"{}").is_err());
        assert!(decode_snapshot(b"not json\n").is_err());
    }

    #[test]
    fn oversized_grid_rejected() {
        let mut s = sample();
        s.header.grid.n_f = usize::MAX / 2;
        s.phi.clear();
        let bytes = encode_snapshot(&s).unwrap();
        assert!(decode_snapshot(&bytes).is_err());
    }

    #[test]
    fn state_round_trip() {
        let s = sample();
        let st = s.to_state().unwrap();
        assert_eq!(Snapshot::from_state(&st), s);
    }
}
