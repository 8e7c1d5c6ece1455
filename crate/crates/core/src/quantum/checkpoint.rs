//! Binary wavefunction checkpoints, all fields little-endian:
//!
//! | offset | size | content                         |
//! |--------|------|---------------------------------|
//! | 0      | 8    | magic `FERMIWF1`                |
//! | 8      | 8    | `n_points` (u64)                |
//! | 16     | 8    | `z_min` (f64)                   |
//! | 24     | 8    | `dz` (f64)                      |
//! | 32     | 8    | `t` (f64)                       |
//! | 40     | 8    | `norm_lost` (f64)               |
//! | 48     | 16·n | `re ψ_j, im ψ_j` for each `j`   |

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{GridGeometry, Wavefunction};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FERMIWF1";

pub fn write_checkpoint(psi: &Wavefunction, mut out: impl Write) -> Result<()> {
    let io = |e| Error::io("writing checkpoint", e);
    out.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    out.write_all(&(psi.grid.n_points as u64).to_le_bytes()).map_err(io)?;
    for v in [psi.grid.z_min, psi.grid.dz, psi.t, psi.norm_lost] {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    let mut buf = Vec::with_capacity(16 * psi.amplitudes.len());
    for a in &psi.amplitudes {
        buf.extend_from_slice(&a.re.to_le_bytes());
        buf.extend_from_slice(&a.im.to_le_bytes());
    }
    out.write_all(&buf).map_err(io)
}

pub fn read_checkpoint(mut input: impl Read) -> Result<Wavefunction> {
    let io = |e| Error::io("reading checkpoint", e);
    let mut word = [0u8; 8];
    input.read_exact(&mut word).map_err(io)?;
    if &word != CHECKPOINT_MAGIC {
        return Err(Error::Config("not a wavefunction checkpoint (bad magic)".into()));
    }
    let mut next = |input: &mut dyn Read| -> Result<[u8; 8]> {
        input.read_exact(&mut word).map_err(io)?;
        Ok(word)
    };
    let n = u64::from_le_bytes(next(&mut input)?) as usize;
    if !n.is_power_of_two() {
        return Err(Error::Config(format!("checkpoint grid size {n} is not a power of two")));
    }
    let z_min = f64::from_le_bytes(next(&mut input)?);
    let dz = f64::from_le_bytes(next(&mut input)?);
    let t = f64::from_le_bytes(next(&mut input)?);
    let norm_lost = f64::from_le_bytes(next(&mut input)?);

    let mut raw = vec![0u8; 16 * n];
    input.read_exact(&mut raw).map_err(io)?;
    let amplitudes = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok(Wavefunction {
        amplitudes,
        t,
        norm_lost,
        grid: GridGeometry { z_min, dz, n_points: n },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{init_gaussian, GridConfig};

    #[test]
    fn round_trip_and_layout() {
        let grid = GridConfig {
            z_max: 300.0,
            n_points: 1 << 10,
            absorber_width: 25.0,
            ..GridConfig::default()
        };
        let mut psi = init_gaussian(20.0, 1.0, 2.0, &grid, 4.0).unwrap();
        psi.t = 12.5;
        psi.norm_lost = 3e-9;
        let mut bytes = Vec::new();
        write_checkpoint(&psi, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 48 + 16 * 1024);
        assert_eq!(&bytes[..8], b"FERMIWF1");
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 1024);
        let j = 400;
        let re = f64::from_le_bytes(bytes[48 + 16 * j..56 + 16 * j].try_into().unwrap());
        assert_eq!(re, psi.amplitudes[j].re);
        assert_eq!(read_checkpoint(bytes.as_slice()).unwrap(), psi);
    }

    #[test]
    fn rejects_foreign_data() {
        assert!(read_checkpoint(&b"NOTAWAVEFUNCTION"[..]).is_err());
        let mut bytes = CHECKPOINT_MAGIC.to_vec();
        bytes.extend_from_slice(&4u64.to_le_bytes());
        assert!(read_checkpoint(bytes.as_slice()).is_err());
    }
}
