use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampler::{FieldSampler, SamplerScratch};
use super::CorrelationModel;
use crate::error::{Error, Result};
use crate::geometry::GridSpec;

/// One realization on a lattice, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub dims: Vec<usize>,
    pub spacings: Vec<f64>,
    /// Coordinates of the first lattice point.
    pub origin: Vec<f64>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct DumpHeader {
    dims: Vec<usize>,
    spacings: Vec<f64>,
    origin: Vec<f64>,
    seed: u64,
}

impl FieldSample {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Writes a JSON header line followed by little-endian `f64` values.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header = DumpHeader {
            dims: self.dims.clone(),
            spacings: self.spacings.clone(),
            origin: self.origin.clone(),
            seed: self.seed,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a file written by [`FieldSample::write_dump`].
pub fn read_dump(path: &Path) -> Result<FieldSample> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: DumpHeader = serde_json::from_str(line.trim_end())?;
    let n: usize = header.dims.iter().product();
    let mut bytes = Vec::with_capacity(n * 8);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * 8 {
        return Err(Error::invalid(format!(
            "dump holds {} bytes of values, header implies {}",
            bytes.len(),
            n * 8
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of eight bytes")))
        .collect();
    Ok(FieldSample {
        values,
        dims: header.dims,
        spacings: header.spacings,
        origin: header.origin,
        seed: header.seed,
    })
}

/// Draws one field on `grid` from the stream seeded by `seed`.
pub fn sample_field(model: &CorrelationModel, grid: &GridSpec, seed: u64) -> Result<FieldSample> {
    let sampler = FieldSampler::new(model, grid)?;
    let mut values = vec![0.0; sampler.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sampler.sample_into(&mut rng, &mut values, &mut SamplerScratch::default());
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("field sample".into()));
    }
    Ok(FieldSample {
        values,
        dims: grid.dims(),
        spacings: grid.spacings(),
        origin: grid.axes.iter().map(|a| a.coordinate(0)).collect(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::SeparableStable;

    #[test]
    fn dump_round_trip() {
        let model = CorrelationModel::SeparableStable(SeparableStable::new(vec![1.0, 2.0]).unwrap());
        let grid = GridSpec::from_axes(&[0.1, 0.2], &[5, 7]).unwrap();
        let sample = sample_field(&model, &grid, 42).unwrap();
        assert_eq!(sample.values.len(), 35);
        let dir = std::env::temp_dir().join(format!("ef-dump-{}", std::process::id()));
        sample.write_dump(&dir).unwrap();
        let back = read_dump(&dir).unwrap();
        std::fs::remove_file(&dir).ok();
        assert_eq!(back, sample);
        assert_eq!(sample_field(&model, &grid, 42).unwrap(), sample);
    }
}
