//! Tabulated optical constants for the mirror/substrate materials.
//!
//! Tables use the CSV schema `energy_eV,n,k` and are interpolated linearly in
//! energy. Shipped data: aluminium from a Lorentz–Drude fit to ellipsometric
//! handbook values, fused silica and LiF from Sellmeier dispersion (k = 0 in
//! the transparent range).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A tabulated complex refractive index n(E) + i·k(E).
#[derive(Debug, Clone)]
pub struct MaterialTable {
    /// Strictly increasing energies in eV.
    pub energies: Vec<f64>,
    /// n + ik at each energy.
    pub index: Vec<Complex64>,
}

impl MaterialTable {
    /// Build from parallel arrays, validating the grid.
    pub fn new(energies: Vec<f64>, index: Vec<Complex64>) -> Result<Self> {
        if energies.len() != index.len() {
            return Err(Error::data("material table length mismatch".to_string()));
        }
        if energies.len() < 2 {
            return Err(Error::data("material table needs at least two rows".to_string()));
        }
        if energies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::data("material energies must be strictly increasing".to_string()));
        }
        Ok(Self { energies, index })
    }

    /// Parse the `energy_eV,n,k` CSV format.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut energies = Vec::new();
        let mut index = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 && line.starts_with("energy_eV") {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::data(format!("material CSV line {} too short", lineno + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::data(format!("material CSV line {}: {e}", lineno + 1)))
            };
            let e = parse(parts.next())?;
            let n = parse(parts.next())?;
            let k = parse(parts.next())?;
            energies.push(e);
            index.push(Complex64::new(n, k));
        }
        Self::new(energies, index)
    }

    /// Linear interpolation; errors outside the tabulated range.
    pub fn index_at(&self, energy: f64) -> Result<Complex64> {
        let first = self.energies[0];
        let last = *self.energies.last().unwrap();
        if energy < first || energy > last {
            return Err(Error::data(format!(
                "energy {energy} eV outside material table [{first}, {last}]"
            )));
        }
        let i = match self
            .energies
            .binary_search_by(|x| x.partial_cmp(&energy).unwrap())
        {
            Ok(i) => return Ok(self.index[i]),
            Err(i) => i,
        };
        let (x0, x1) = (self.energies[i - 1], self.energies[i]);
        let w = (energy - x0) / (x1 - x0);
        Ok(self.index[i - 1] * (1.0 - w) + self.index[i] * w)
    }
}

/// Aluminium mirror optical constants.
pub fn aluminium() -> MaterialTable {
    MaterialTable::parse_csv(include_str!("../assets/aluminium.csv"))
        .expect("embedded aluminium table is valid")
}

/// Fused-silica (quartz) substrate.
pub fn quartz() -> MaterialTable {
    MaterialTable::parse_csv(include_str!("../assets/quartz.csv"))
        .expect("embedded quartz table is valid")
}

/// LiF spacer.
pub fn lif() -> MaterialTable {
    MaterialTable::parse_csv(include_str!("../assets/lif.csv")).expect("embedded LiF table is valid")
}
