//! Trajectory export: little-endian binary and CSV.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::sde::particles::ParticleTrajectory;
use crate::sde::time::TimeGrid;

pub const TRAJECTORY_MAGIC: &[u8; 8] = b"CHTR0001";

/// Header `magic, N, d, steps, seed` (u64 LE), then `T` (f64), then the
/// positions `[steps+1][N][d]` as f64 LE.
pub fn write_trajectory_binary<W: Write>(tr: &ParticleTrajectory, mut w: W) -> Result<()> {
    w.write_all(TRAJECTORY_MAGIC)?;
    for v in [tr.n as u64, tr.d as u64, tr.steps() as u64, tr.seed] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&tr.time.horizon().to_le_bytes())?;
    for v in tr.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_trajectory_binary<R: Read>(mut r: R) -> Result<ParticleTrajectory> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != TRAJECTORY_MAGIC {
        return Err(Error::invalid("not a trajectory file"));
    }
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let n = u64::from_le_bytes(next(&mut r)?) as usize;
    let d = u64::from_le_bytes(next(&mut r)?) as usize;
    let steps = u64::from_le_bytes(next(&mut r)?) as usize;
    let seed = u64::from_le_bytes(next(&mut r)?);
    let horizon = f64::from_le_bytes(next(&mut r)?);
    let len = (steps + 1)
        .checked_mul(n)
        .and_then(|v| v.checked_mul(d))
        .ok_or_else(|| Error::invalid("trajectory header overflows"))?;
    let mut x = Vec::with_capacity(len);
    for _ in 0..len {
        x.push(f64::from_le_bytes(next(&mut r)?));
    }
    ParticleTrajectory::new(n, d, TimeGrid::new(horizon, steps)?, seed, x)
}

/// One row per `(t, i)`: `t,i,x1,...,xd`.
pub fn write_trajectory_csv<W: Write>(tr: &ParticleTrajectory, mut w: W) -> Result<()> {
    let coords: Vec<String> = if tr.d == 1 { vec!["x".into()] } else { (1..=tr.d).map(|a| format!("x{a}")).collect() };
    writeln!(w, "t,i,{}", coords.join(","))?;
    for j in 0..=tr.steps() {
        let t = tr.time.t(j);
        for i in 0..tr.n {
            let p: Vec<String> = tr.particle(j, i).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{t},{i},{}", p.join(","))?;
        }
    }
    Ok(())
}
