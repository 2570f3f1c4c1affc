use super::DiffusionTrajectory;
use crate::error::{Error, Result};
use std::io::{Read, Write};

pub const MAGIC: &[u8; 4] = b"KPZT";
pub const VERSION: u32 = 1;

/// Little-endian layout: magic, version, `N`, steps, `dt`, `T`, `η`, `θ`,
/// length-prefixed potential descriptor, seed, then `u` row-major by step and `W` per step.
pub fn write_trajectory<W: Write>(traj: &DiffusionTrajectory, out: &mut W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(traj.n as u64).to_le_bytes())?;
    out.write_all(&(traj.steps as u64).to_le_bytes())?;
    for v in [traj.dt, traj.horizon, traj.eta, traj.theta] {
        out.write_all(&v.to_le_bytes())?;
    }
    let desc = traj.potential.as_bytes();
    out.write_all(&(desc.len() as u32).to_le_bytes())?;
    out.write_all(desc)?;
    out.write_all(&traj.seed.to_le_bytes())?;
    for v in traj.u.iter().chain(&traj.w) {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Header and data read back from a dump.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDump {
    pub n: usize,
    pub steps: usize,
    pub dt: f64,
    pub horizon: f64,
    pub eta: f64,
    pub theta: f64,
    pub potential: String,
    pub seed: u64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

fn take<const K: usize, R: Read>(r: &mut R) -> Result<[u8; K]> {
    let mut b = [0u8; K];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn f64s<R: Read>(r: &mut R, len: usize) -> Result<Vec<f64>> {
    (0..len).map(|_| Ok(f64::from_le_bytes(take(r)?))).collect()
}

pub fn read_trajectory<R: Read>(r: &mut R) -> Result<TrajectoryDump> {
    if &take::<4, _>(r)? != MAGIC {
        return Err(Error::Io("bad trajectory magic".into()));
    }
    let version = u32::from_le_bytes(take(r)?);
    if version != VERSION {
        return Err(Error::Io(format!("unsupported trajectory version {version}")));
    }
    let n = u64::from_le_bytes(take(r)?) as usize;
    let steps = u64::from_le_bytes(take(r)?) as usize;
    let h = f64s(r, 4)?;
    let len = u32::from_le_bytes(take(r)?) as usize;
    let mut desc = vec![0u8; len];
    r.read_exact(&mut desc)?;
    let potential = String::from_utf8(desc).map_err(|e| Error::Io(e.to_string()))?;
    let seed = u64::from_le_bytes(take(r)?);
    let u = f64s(r, (steps + 1) * n)?;
    let w = f64s(r, steps + 1)?;
    Ok(TrajectoryDump {
        n,
        steps,
        dt: h[0],
        horizon: h[1],
        eta: h[2],
        theta: h[3],
        potential,
        seed,
        u,
        w,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{integrate, DiffusionConfig, Potential};
    use super::*;
    use crate::rng::SeedPath;

    #[test]
    fn round_trip() {
        let cfg = DiffusionConfig::new(3, 1.0, 1.2, 1e-2, 0.3).unwrap();
        let p = Potential::default_mixture();
        let traj = integrate(&p, cfg, &SeedPath::new(9, "dump"), 2).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&traj, &mut buf).unwrap();
        let d = read_trajectory(&mut buf.as_slice()).unwrap();
        assert_eq!((d.n, d.steps, d.seed), (3, traj.steps, 9));
        assert_eq!((d.eta, d.theta, d.dt), (1.0, 1.2, traj.dt));
        assert_eq!(d.potential, p.descriptor());
        assert_eq!(d.u, traj.u);
        assert_eq!(d.w, traj.w);
        buf[0] = b'X';
        assert!(read_trajectory(&mut buf.as_slice()).is_err());
    }
}
