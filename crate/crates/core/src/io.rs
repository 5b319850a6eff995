//! Field files for 2-D grids.
//!
//! CSV: a header line `# grid NX NY dx`, then `NY` rows of `NX` comma-separated
//! values. Row `j` holds the cells with y index `j`, column `i` the x index
//! `i` (grid axis 0 is x). Values are written with 17 significant digits so a
//! write/read cycle is bit-identical.
//!
//! PGM: binary P5, 8-bit, min-max normalized per file, top row is the largest
//! y index.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

fn check_2d(grid: &GridSpec, values: &[f64]) -> Result<(usize, usize)> {
    if grid.ndim() != 2 {
        return Err(Error::invalid(format!("field files are 2-D, grid has {} axes", grid.ndim())));
    }
    if values.len() != grid.num_cells() {
        return Err(Error::DimensionMismatch { expected: grid.num_cells(), actual: values.len() });
    }
    Ok((grid.shape()[0], grid.shape()[1]))
}

pub fn field_csv_string(grid: &GridSpec, values: &[f64]) -> Result<String> {
    let (nx, ny) = check_2d(grid, values)?;
    let mut s = String::with_capacity(24 * values.len() + 64);
    writeln!(s, "# grid {nx} {ny} {:.16e}", grid.dx()).unwrap();
    for j in 0..ny {
        for i in 0..nx {
            if i > 0 {
                s.push(',');
            }
            write!(s, "{:.16e}", values[i * ny + j]).unwrap();
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn write_field_csv(path: &Path, grid: &GridSpec, values: &[f64]) -> Result<()> {
    std::fs::write(path, field_csv_string(grid, values)?)?;
    Ok(())
}

pub fn parse_field_csv(text: &str) -> Result<(GridSpec, Vec<f64>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Format("empty field file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 || parts[0] != "#" || parts[1] != "grid" {
        return Err(Error::Format(format!("line 1: expected `# grid NX NY dx`, got `{header}`")));
    }
    let dim = |s: &str, what: &str| {
        s.parse::<usize>().map_err(|_| Error::Format(format!("line 1: bad {what} `{s}`")))
    };
    let (nx, ny) = (dim(parts[2], "NX")?, dim(parts[3], "NY")?);
    let dx: f64 = parts[4].parse().map_err(|_| Error::Format(format!("line 1: bad dx `{}`", parts[4])))?;
    let grid = GridSpec::new(vec![nx, ny], dx).map_err(|e| Error::Format(format!("line 1: {e}")))?;
    let mut values = vec![0.0; nx * ny];
    let mut rows = 0;
    for (lineno, line) in lines {
        if rows == ny {
            return Err(Error::Format(format!("line {}: more than {ny} rows", lineno + 1)));
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != nx {
            return Err(Error::Format(format!("line {}: expected {nx} values, found {}", lineno + 1, cols.len())));
        }
        for (i, c) in cols.iter().enumerate() {
            values[i * ny + rows] = c
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad number `{}`", lineno + 1, c.trim())))?;
        }
        rows += 1;
    }
    if rows != ny {
        return Err(Error::Format(format!("expected {ny} rows, found {rows}")));
    }
    Ok((grid, values))
}

pub fn read_field_csv(path: &Path) -> Result<(GridSpec, Vec<f64>)> {
    parse_field_csv(&std::fs::read_to_string(path)?)
}

pub fn pgm_bytes(grid: &GridSpec, values: &[f64]) -> Result<Vec<u8>> {
    let (nx, ny) = check_2d(grid, values)?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    out.reserve(nx * ny);
    for j in (0..ny).rev() {
        for i in 0..nx {
            let v = values[i * ny + j];
            let level = if span > 0.0 && span.is_finite() { ((v - lo) / span * 255.0).round() } else { 0.0 };
            out.push(level.clamp(0.0, 255.0) as u8);
        }
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, grid: &GridSpec, values: &[f64]) -> Result<()> {
    std::fs::write(path, pgm_bytes(grid, values)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_and_header() {
        let g = GridSpec::new(vec![3, 2], 0.5).unwrap();
        // index = i * ny + j
        let v = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let s = field_csv_string(&g, &v).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# grid 3 2 5.0000000000000000e-1");
        assert!(lines[1].starts_with("0.0000000000000000e0,2.0000000000000000e0,"));
        assert_eq!(parse_field_csv(&s).unwrap(), (g.clone(), v.clone()));
        let p = pgm_bytes(&g, &v).unwrap();
        assert!(p.starts_with(b"P5\n3 2\n255\n"));
        // top row is j = 1: cells 1, 3, 5
        assert_eq!(&p[p.len() - 6..], &[51, 153, 255, 0, 102, 204]);
    }

    #[test]
    fn malformed_files() {
        assert!(parse_field_csv("").is_err());
        assert!(parse_field_csv("# grid 2 1 1.0\n1,2,3\n").is_err());
        assert!(parse_field_csv("# grid 2 2 1.0\n1,2\n").is_err());
        assert!(parse_field_csv("# grid 2 1 1.0\n1,x\n").is_err());
        assert!(parse_field_csv("grid 2 1 1.0\n1,2\n").is_err());
    }

    #[test]
    fn constant_field_pgm() {
        let g = GridSpec::unit(4, 2).unwrap();
        let p = pgm_bytes(&g, &[2.5; 16]).unwrap();
        assert!(p[p.len() - 16..].iter().all(|&b| b == 0));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_identical(v in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL, 12)) {
            let g = GridSpec::new(vec![4, 3], 1.0 / 3.0).unwrap();
            let (g2, w) = parse_field_csv(&field_csv_string(&g, &v).unwrap()).unwrap();
            prop_assert_eq!(g2, g);
            for (a, b) in v.iter().zip(&w) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
