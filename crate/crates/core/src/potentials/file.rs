//! Line-oriented medium/potential description files.
//!
//! ```text
//! # gain slab with a delta on its left face
//! [layers]
//! # x_left x_right Re(n) Im(n)
//! 0.0 1.0 3.0 -0.05
//! [deltas]
//! # x Re(z) Im(z)
//! -0.5 0.0 1.0
//! [samples]
//! # x Re(v) Im(v), uniform spacing
//! 2.0 0.0 0.0
//! 2.1 0.5 0.0
//! ```

use std::path::Path;

use num_complex::Complex64;

use super::{Delta, Medium, MediumLayer, Potential, SampledGrid, Structure};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Layers,
    Deltas,
    Samples,
}

pub fn load_structure(path: impl AsRef<Path>) -> Result<Structure> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        line: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_structure(&text)
}

pub fn parse_structure(text: &str) -> Result<Structure> {
    let mut section = Section::None;
    let mut layers = Vec::new();
    let mut deltas = Vec::new();
    let mut samples: Vec<(usize, f64, Complex64)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            section = match content {
                "[layers]" => Section::Layers,
                "[deltas]" => Section::Deltas,
                "[samples]" => Section::Samples,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown section {other}"),
                    })
                }
            };
            continue;
        }
        let fields = parse_numbers(content, line)?;
        let expect = |n: usize| -> Result<()> {
            if fields.len() == n {
                Ok(())
            } else {
                Err(Error::Parse {
                    line,
                    message: format!("expected {n} numbers, found {}", fields.len()),
                })
            }
        };
        match section {
            Section::None => {
                return Err(Error::Parse {
                    line,
                    message: "data before any [layers], [deltas] or [samples] header".into(),
                })
            }
            Section::Layers => {
                expect(4)?;
                layers.push((
                    line,
                    MediumLayer {
                        left: fields[0],
                        right: fields[1],
                        index: Complex64::new(fields[2], fields[3]),
                    },
                ));
            }
            Section::Deltas => {
                expect(3)?;
                deltas.push((
                    line,
                    Delta {
                        position: fields[0],
                        strength: Complex64::new(fields[1], fields[2]),
                    },
                ));
            }
            Section::Samples => {
                expect(3)?;
                samples.push((line, fields[0], Complex64::new(fields[1], fields[2])));
            }
        }
    }

    let first_line = |v: &[(usize, MediumLayer)]| v.first().map_or(0, |x| x.0);
    let medium = Medium::new(layers.iter().map(|(_, l)| *l).collect()).map_err(|e| Error::Parse {
        line: first_line(&layers),
        message: e.to_string(),
    })?;

    let mut potentials = Vec::new();
    if !deltas.is_empty() {
        for pair in deltas.windows(2) {
            if pair[1].1.position <= pair[0].1.position {
                return Err(Error::Parse {
                    line: pair[1].0,
                    message: "delta positions must be strictly increasing".into(),
                });
            }
        }
        potentials.push(Potential::DeltaComb(deltas.into_iter().map(|(_, d)| d).collect()));
    }
    if !samples.is_empty() {
        potentials.push(Potential::Sampled(sampled_from_rows(&samples)?));
    }
    let line = samples.first().map(|s| s.0).unwrap_or(0);
    Structure::new(medium, potentials).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })
}

fn parse_numbers(content: &str, line: usize) -> Result<Vec<f64>> {
    content
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse {tok:?} as a number"),
            })
        })
        .collect()
}

fn sampled_from_rows(rows: &[(usize, f64, Complex64)]) -> Result<SampledGrid> {
    if rows.len() < 2 {
        return Err(Error::Parse {
            line: rows[0].0,
            message: "a [samples] section needs at least two rows".into(),
        });
    }
    let left = rows[0].1;
    let right = rows[rows.len() - 1].1;
    let dx = (right - left) / (rows.len() - 1) as f64;
    if !(dx > 0.0) {
        return Err(Error::Parse {
            line: rows[0].0,
            message: "sample positions must be increasing".into(),
        });
    }
    for (j, (line, x, _)) in rows.iter().enumerate() {
        let expected = left + j as f64 * dx;
        if (x - expected).abs() > 1e-9 * (right - left) {
            return Err(Error::Parse {
                line: *line,
                message: format!("sample grid is not uniform: x = {x}, expected {expected}"),
            });
        }
    }
    SampledGrid::new(left, right, rows.iter().map(|r| r.2).collect()).map_err(|e| Error::Parse {
        line: rows[0].0,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_sections() {
        let text = "# comment\n[layers]\n0 1 3 -0.05 # slab\n[deltas]\n-0.5 0 1\n[samples]\n2.0 0 0\n2.1 0.5 0\n2.2 0 0\n";
        let s = parse_structure(text).unwrap();
        assert_eq!(s.medium().layers().len(), 1);
        assert_eq!(s.medium().layers()[0].index, Complex64::new(3.0, -0.05));
        assert_eq!(s.potentials().len(), 2);
        assert_eq!(s.support(), Some((-0.5, 2.2)));
    }

    #[test]
    fn empty_file_is_vacuum() {
        let s = parse_structure("# nothing here\n\n").unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let err = parse_structure("[layers]\n0 1 3\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 2,
                message: "expected 4 numbers, found 3".into()
            }
        );
        let err = parse_structure("\n\n[deltas]\n0 1 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
        let err = parse_structure("[wat]\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_structure("1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_structure("[samples]\n0 1 0\n0.1 1 0\n0.35 1 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_structure("[deltas]\n1 1 0\n0 1 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }
}
