//! Snapshot persistence.
//!
//! CSV: header `period,particle,x_1,…,x_d,reflection_cum`, one row per
//! particle per snapshot.
//!
//! Binary: one file per snapshot, `snapshot_XXXX.bin`, holding rows of
//! little-endian `f64` values `[period, particle, x_1, …, x_d, reflection_cum]`
//! back to back (row-major, `d + 3` values per row, no header).

use super::Ensemble;
use crate::error::{Error, Result};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub fn write_csv(path: &Path, snapshots: &[Ensemble]) -> Result<()> {
    let Some(first) = snapshots.first() else {
        return Err(Error::Config("no snapshots to write".into()));
    };
    let d = first.dim;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["period".to_string(), "particle".to_string()];
    header.extend((1..=d).map(|k| format!("x_{k}")));
    header.push("reflection_cum".into());
    w.write_record(&header)?;
    for (n, s) in snapshots.iter().enumerate() {
        for i in 0..s.len() {
            let mut row = vec![n.to_string(), i.to_string()];
            row.extend(s.point(i).iter().map(|v| v.to_string()));
            row.push(s.reflection[i].to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<Ensemble>> {
    let mut r = csv::Reader::from_path(path)?;
    let d = r.headers()?.len().checked_sub(3).filter(|d| *d > 0).ok_or_else(|| {
        Error::Config(format!("{}: header must hold period, particle, coordinates, reflection_cum", path.display()))
    })?;
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        };
        let n = parse(0)? as usize;
        while out.len() <= n {
            out.push((Vec::new(), Vec::new()));
        }
        for k in 0..d {
            out[n].0.push(parse(2 + k)?);
        }
        out[n].1.push(parse(2 + d)?);
    }
    out.into_iter()
        .map(|(p, r)| {
            let mut e = Ensemble::new(p, d, 0.0)?;
            e.reflection = r;
            Ok(e)
        })
        .collect()
}

pub fn snapshot_path(dir: &Path, period: usize) -> PathBuf {
    dir.join(format!("snapshot_{period:04}.bin"))
}

pub fn write_binary(dir: &Path, snapshots: &[Ensemble]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(snapshots.len());
    for (n, s) in snapshots.iter().enumerate() {
        let path = snapshot_path(dir, n);
        let mut w = BufWriter::new(fs::File::create(&path)?);
        for i in 0..s.len() {
            w.write_all(&(n as f64).to_le_bytes())?;
            w.write_all(&(i as f64).to_le_bytes())?;
            for v in s.point(i) {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&s.reflection[i].to_le_bytes())?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn read_binary(path: &Path, dim: usize) -> Result<Ensemble> {
    let bytes = fs::read(path)?;
    let row = (dim + 3) * 8;
    if bytes.is_empty() || bytes.len() % row != 0 {
        return Err(Error::Config(format!(
            "{}: size {} is not a multiple of the {}-byte row",
            path.display(),
            bytes.len(),
            row
        )));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let mut pos = Vec::new();
    let mut refl = Vec::new();
    for r in vals.chunks_exact(dim + 3) {
        pos.extend_from_slice(&r[2..2 + dim]);
        refl.push(r[2 + dim]);
    }
    let mut e = Ensemble::new(pos, dim, 0.0)?;
    e.reflection = refl;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Ensemble> {
        let mut a = Ensemble::new(vec![0.1, -2.5, 1.0 / 3.0, 4e-300], 2, 0.0).unwrap();
        a.reflection = vec![0.0, 0.25];
        let b = Ensemble::new(vec![1.0, 2.0, 3.0, 4.0], 2, 1.0).unwrap();
        vec![a, b]
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_csv(&p, &sample()).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("period,particle,x_1,x_2,reflection_cum\n"));
        let back = read_csv(&p).unwrap();
        for (x, y) in back.iter().zip(sample()) {
            assert_eq!(x.positions, y.positions);
            assert_eq!(x.reflection, y.reflection);
        }
    }

    #[test]
    fn binary_layout_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_binary(dir.path(), &sample()).unwrap();
        assert!(paths[1].ends_with("snapshot_0001.bin"));
        let bytes = fs::read(&paths[0]).unwrap();
        assert_eq!(bytes.len(), 2 * 5 * 8);
        // second row starts with period 0, particle 1, then x_1 = 1/3
        assert_eq!(f64::from_le_bytes(bytes[48..56].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(bytes[56..64].try_into().unwrap()), 1.0 / 3.0);
        let back = read_binary(&paths[0], 2).unwrap();
        assert_eq!(back.positions, sample()[0].positions);
        assert_eq!(back.reflection, sample()[0].reflection);
    }
}
