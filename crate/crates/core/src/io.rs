//! Configuration serialization: CSV rows and a compact little-endian binary.
//!
//! CSV rows are `species, x_0..x_{d-1}, v_0..v_{d-1}`. The binary layout is a
//! header of three `u64` values (d, N_A, N_B) followed by the A rows then the B
//! rows, each row being d position doubles and d velocity doubles.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::mixture::{Configuration, SpeciesKind};

pub fn write_csv<W: Write>(z: &Configuration, w: W) -> Result<()> {
    let d = z.dim();
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["species".to_string()];
    header.extend((0..d).map(|k| format!("x{k}")));
    header.extend((0..d).map(|k| format!("v{k}")));
    wtr.write_record(&header)?;
    for (s, i) in z.ids() {
        let mut row = vec![s.tag().to_string()];
        row.extend(z.x(s, i).iter().map(|c| format!("{c:e}")));
        row.extend(z.v(s, i).iter().map(|c| format!("{c:e}")));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Configuration> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.len() < 5 || (header.len() - 1) % 2 != 0 {
        return Err(Error::InvalidInput(format!("bad configuration header with {} columns", header.len())));
    }
    let d = (header.len() - 1) / 2;
    let mut z = Configuration::new(d);
    let mut rows: [Vec<(Vec<f64>, Vec<f64>)>; 2] = [Vec::new(), Vec::new()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let s = SpeciesKind::parse(&rec[0])?;
        let nums: std::result::Result<Vec<f64>, _> = rec.iter().skip(1).map(|c| c.trim().parse::<f64>()).collect();
        let nums = nums.map_err(|e| Error::InvalidInput(format!("row {}: {e}", line + 2)))?;
        rows[s.index()].push((nums[..d].to_vec(), nums[d..].to_vec()));
    }
    for s in SpeciesKind::ALL {
        for (x, v) in &rows[s.index()] {
            z.push(s, x, v);
        }
    }
    Ok(z)
}

pub fn write_binary<W: Write>(z: &Configuration, mut w: W) -> Result<()> {
    w.write_all(&(z.dim() as u64).to_le_bytes())?;
    for s in SpeciesKind::ALL {
        w.write_all(&(z.count(s) as u64).to_le_bytes())?;
    }
    for (s, i) in z.ids() {
        for c in z.x(s, i).iter().chain(z.v(s, i)) {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Configuration> {
    let d = read_word(&mut r)? as usize;
    let na = read_word(&mut r)? as usize;
    let nb = read_word(&mut r)? as usize;
    if d < 1 {
        return Err(Error::InvalidInput("binary header has d = 0".into()));
    }
    let mut z = Configuration::new(d);
    let mut buf = vec![0.0; 2 * d];
    for (s, n) in [(SpeciesKind::A, na), (SpeciesKind::B, nb)] {
        for _ in 0..n {
            for c in buf.iter_mut() {
                *c = f64::from_bits(read_word(&mut r)?);
            }
            z.push(s, &buf[..d], &buf[d..]);
        }
    }
    Ok(z)
}

fn read_word<R: Read>(r: &mut R) -> Result<u64> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    Ok(u64::from_le_bytes(word))
}
