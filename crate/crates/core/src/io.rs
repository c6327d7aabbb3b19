//! CSV + JSON sidecar serialization of grid fields.
//!
//! Every number is written with 17 significant digits, which round-trips an
//! `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridSpec, RealField};

/// Formats a float losslessly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Real,
    Complex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMeta {
    pub grid: GridSpec,
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_ref: Option<String>,
}

const AXIS_NAMES: [&str; 2] = ["x", "y"];

fn csv_text(spec: &GridSpec, values: impl Iterator<Item = Complex64>) -> String {
    let mut out = String::new();
    for name in &AXIS_NAMES[..spec.dim()] {
        out.push_str(name);
        out.push(',');
    }
    out.push_str("re,im\n");
    for (i, v) in values.enumerate() {
        let p = spec.node(i);
        for c in &p[..spec.dim()] {
            out.push_str(&fmt_f64(*c));
            out.push(',');
        }
        let _ = writeln!(out, "{},{}", fmt_f64(v.re), fmt_f64(v.im));
    }
    out
}

fn parse_csv(spec: &GridSpec, text: &str) -> Result<Vec<Complex64>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))?;
    let cols = header.split(',').count();
    if cols != spec.dim() + 2 {
        return Err(Error::Parse(format!("expected {} columns, header has {cols}", spec.dim() + 2)));
    }
    let mut values = Vec::with_capacity(spec.len());
    for (row, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::Parse(format!("row {row}: {} columns", fields.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {row}: {e}")))
        };
        values.push(Complex64::new(num(fields[cols - 2])?, num(fields[cols - 1])?));
    }
    if values.len() != spec.len() {
        return Err(Error::LengthMismatch { expected: spec.len(), got: values.len() });
    }
    Ok(values)
}

/// Sidecar path for a CSV path: `field.csv` -> `field.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn complex_to_csv(field: &ComplexField) -> (String, FieldMeta) {
    let meta = FieldMeta {
        grid: field.spec().clone(),
        kind: FieldKind::Complex,
        mass: Some(field.mass()),
        potential_ref: field.potential_ref().map(str::to_owned),
    };
    (csv_text(field.spec(), field.values().iter().copied()), meta)
}

pub fn real_to_csv(field: &RealField) -> (String, FieldMeta) {
    let meta =
        FieldMeta { grid: field.spec().clone(), kind: FieldKind::Real, mass: None, potential_ref: None };
    let values = field.values().iter().map(|&v| Complex64::new(v, 0.0));
    (csv_text(field.spec(), values), meta)
}

pub fn complex_from_csv(text: &str, meta: &FieldMeta) -> Result<ComplexField> {
    let values = parse_csv(&meta.grid, text)?;
    let mut f = ComplexField::new(meta.grid.clone(), values, meta.mass.unwrap_or(1.0))?;
    if let Some(p) = &meta.potential_ref {
        f = f.with_potential_ref(p.clone());
    }
    Ok(f)
}

pub fn real_from_csv(text: &str, meta: &FieldMeta) -> Result<RealField> {
    let values = parse_csv(&meta.grid, text)?;
    RealField::new(meta.grid.clone(), values.into_iter().map(|c| c.re).collect())
}

pub fn write_complex(path: &Path, field: &ComplexField) -> Result<()> {
    let (csv, meta) = complex_to_csv(field);
    fs::write(path, csv)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn write_real(path: &Path, field: &RealField) -> Result<()> {
    let (csv, meta) = real_to_csv(field);
    fs::write(path, csv)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn read_meta(path: &Path) -> Result<FieldMeta> {
    Ok(serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?)
}

pub fn read_complex(path: &Path) -> Result<ComplexField> {
    let meta = read_meta(path)?;
    complex_from_csv(&fs::read_to_string(path)?, &meta)
}

pub fn read_real(path: &Path) -> Result<RealField> {
    let meta = read_meta(path)?;
    real_from_csv(&fs::read_to_string(path)?, &meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn complex_field_roundtrip_is_bit_exact(
            vals in prop::collection::vec((-1e300f64..1e300, -1e-300f64..1e-300), 64),
            mass in 0.1f64..10.0,
        ) {
            let g = GridSpec::new(&[-1.1, 0.3], &[2.7, 9.0], &[8, 8], Boundary::Dirichlet).unwrap();
            let values = vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let f = ComplexField::new(g, values, mass).unwrap().with_potential_ref("harmonic");
            let (csv, meta) = complex_to_csv(&f);
            let meta: FieldMeta = serde_json::from_str(&serde_json::to_string(&meta).unwrap()).unwrap();
            let back = complex_from_csv(&csv, &meta).unwrap();
            for (a, b) in f.values().iter().zip(back.values()) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
            prop_assert_eq!(back.mass().to_bits(), mass.to_bits());
            prop_assert_eq!(back.potential_ref(), Some("harmonic"));
        }
    }

    #[test]
    fn real_field_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::line(0.0, 1.0, 16, Boundary::Periodic).unwrap();
        let f = RealField::from_fn(&g, |p| (p[0] * 7.3).sin() / 3.0);
        let path = dir.path().join("v.csv");
        write_real(&path, &f).unwrap();
        assert_eq!(read_real(&path).unwrap(), f);
        assert!(dir.path().join("v.json").exists());
    }

    #[test]
    fn truncated_csv_is_rejected() {
        let g = GridSpec::line(0.0, 1.0, 16, Boundary::Periodic).unwrap();
        let f = RealField::constant(&g, 1.0);
        let (csv, meta) = real_to_csv(&f);
        let short: String = csv.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(real_from_csv(&short, &meta).is_err());
    }
}
