//! Smearing functions from short text specs.
//!
//! Scalars: `const:c` or `cos:axis:mode:amp`. Vectors: `e1:amp`, `e2:amp`,
//! `e3:amp` or `cos:axis:mode:amp:dir`. Axes and directions are 1-based.
//! Terms may be joined with `+`, e.g. `const:1+cos:1:1:0.2`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fields::{FormField, PeriodicGrid, VectorFieldOnGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarTerm {
    Const(f64),
    Cos { axis: usize, mode: u32, amp: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VectorTerm {
    Const { dir: usize, amp: f64 },
    Cos { axis: usize, mode: u32, amp: f64, dir: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSpec(pub Vec<ScalarTerm>);

#[derive(Clone, Debug, PartialEq)]
pub struct VectorSpec(pub Vec<VectorTerm>);

fn err(spec: &str, reason: impl Into<String>) -> Error {
    Error::Smearing {
        spec: spec.to_string(),
        reason: reason.into(),
    }
}

fn num(spec: &str, s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| err(spec, format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(err(spec, "non-finite value"));
    }
    Ok(v)
}

fn axis(spec: &str, s: &str) -> Result<usize> {
    match s {
        "1" | "2" | "3" => Ok(s.parse::<usize>().unwrap() - 1),
        _ => Err(err(spec, format!("axis must be 1, 2 or 3, got {s:?}"))),
    }
}

fn mode(spec: &str, s: &str) -> Result<u32> {
    s.parse().map_err(|_| err(spec, format!("mode must be a non-negative integer, got {s:?}")))
}

fn terms(spec: &str) -> Result<Vec<&str>> {
    let t: Vec<&str> = spec.split('+').map(str::trim).collect();
    if t.iter().any(|x| x.is_empty()) {
        return Err(err(spec, "empty term"));
    }
    Ok(t)
}

impl FromStr for ScalarSpec {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        terms(spec)?
            .into_iter()
            .map(|t| {
                let parts: Vec<&str> = t.split(':').collect();
                match parts.as_slice() {
                    ["const", c] => Ok(ScalarTerm::Const(num(spec, c)?)),
                    ["cos", a, m, amp] => Ok(ScalarTerm::Cos {
                        axis: axis(spec, a)?,
                        mode: mode(spec, m)?,
                        amp: num(spec, amp)?,
                    }),
                    _ => Err(err(spec, format!("unrecognized scalar term {t:?}"))),
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(ScalarSpec)
    }
}

impl FromStr for VectorSpec {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        terms(spec)?
            .into_iter()
            .map(|t| {
                let parts: Vec<&str> = t.split(':').collect();
                match parts.as_slice() {
                    [e, amp] if matches!(*e, "e1" | "e2" | "e3") => Ok(VectorTerm::Const {
                        dir: axis(spec, &e[1..])?,
                        amp: num(spec, amp)?,
                    }),
                    ["cos", a, m, amp, d] => Ok(VectorTerm::Cos {
                        axis: axis(spec, a)?,
                        mode: mode(spec, m)?,
                        amp: num(spec, amp)?,
                        dir: axis(spec, d)?,
                    }),
                    _ => Err(err(spec, format!("unrecognized vector term {t:?}"))),
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(VectorSpec)
    }
}

fn wave(x: [f64; 3], periods: [f64; 3], axis: usize, mode: u32) -> f64 {
    (TAU * mode as f64 * x[axis] / periods[axis]).cos()
}

impl ScalarSpec {
    pub fn field(&self, grid: PeriodicGrid) -> FormField {
        let l = grid.periods();
        let terms = self.0.clone();
        FormField::scalar_fn(grid, move |x| {
            terms
                .iter()
                .map(|t| match *t {
                    ScalarTerm::Const(c) => c,
                    ScalarTerm::Cos { axis, mode, amp } => amp * wave(x, l, axis, mode),
                })
                .sum()
        })
    }
}

impl VectorSpec {
    pub fn field(&self, grid: PeriodicGrid) -> VectorFieldOnGrid {
        let l = grid.periods();
        let terms = self.0.clone();
        VectorFieldOnGrid::from_fn(grid, move |x| {
            let mut v = [0.0; 3];
            for t in &terms {
                match *t {
                    VectorTerm::Const { dir, amp } => v[dir] += amp,
                    VectorTerm::Cos { axis, mode, amp, dir } => v[dir] += amp * wave(x, l, axis, mode),
                }
            }
            v
        })
    }
}

impl fmt::Display for ScalarSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self
            .0
            .iter()
            .map(|t| match *t {
                ScalarTerm::Const(c) => format!("const:{c}"),
                ScalarTerm::Cos { axis, mode, amp } => format!("cos:{}:{mode}:{amp}", axis + 1),
            })
            .collect();
        f.write_str(&s.join("+"))
    }
}

impl fmt::Display for VectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self
            .0
            .iter()
            .map(|t| match *t {
                VectorTerm::Const { dir, amp } => format!("e{}:{amp}", dir + 1),
                VectorTerm::Cos { axis, mode, amp, dir } => format!("cos:{}:{mode}:{amp}:{}", axis + 1, dir + 1),
            })
            .collect();
        f.write_str(&s.join("+"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalar_forms() {
        let s: ScalarSpec = "const:2".parse().unwrap();
        assert_eq!(s.0, vec![ScalarTerm::Const(2.0)]);
        let s: ScalarSpec = "const:1+cos:1:1:0.5".parse().unwrap();
        assert_eq!(s.to_string(), "const:1+cos:1:1:0.5");
        let f = s.field(PeriodicGrid::cube(8));
        assert!((f.value(0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn parses_vector_forms() {
        let v: VectorSpec = "e3:0.5+cos:2:1:1:3".parse().unwrap();
        let f = v.field(PeriodicGrid::cube(8));
        assert_eq!(f.at(0).components(), &[0.0, 0.0, 1.5]);
        assert_eq!(v.to_string(), "e3:0.5+cos:2:1:1:3");
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "const", "const:x", "cos:4:1:1", "cos:1:-1:1", "const:1+", "e4:1"] {
            assert!(bad.parse::<ScalarSpec>().is_err(), "{bad}");
        }
        for bad in ["e0:1", "cos:1:1:1", "const:1", "e1:nan"] {
            assert!(bad.parse::<VectorSpec>().is_err(), "{bad}");
        }
    }
}
