//! Field bundle files.
//!
//! A text header of `key=value` lines in a fixed order, a blank line, then
//! little-endian f64 values: `theta` as (A, i, point), `p` as
//! (A, (12)/(13)/(23), point), `lapse` per point, `shift` as (i, point).
//! Points are row-major with the third coordinate fastest.

use std::path::Path;

use crate::error::{Error, Result};
use crate::exterior::KForm;
use crate::fields::{FormField, PeriodicGrid, VectorFieldOnGrid};
use crate::teleparallel::CotetradField;
use crate::dynamics::{Multipliers, PhaseState};

const MAGIC: &str = "teleham-bundle";
const VERSION: &str = "1";
const KEYS: [&str; 8] = ["format", "version", "n", "h", "seed", "description", "payload", "count"];

#[derive(Clone, Debug, PartialEq)]
pub struct FieldBundle {
    pub grid: PeriodicGrid,
    pub seed: u64,
    pub description: String,
    pub theta: CotetradField,
    pub p: [FormField; 4],
    pub lapse: FormField,
    pub shift: VectorFieldOnGrid,
}

fn perr(offset: usize, message: impl Into<String>) -> Error {
    Error::BundleParse {
        offset,
        message: message.into(),
    }
}

impl FieldBundle {
    pub fn new(state: &PhaseState, mult: &Multipliers, seed: u64, description: &str) -> Result<Self> {
        Self::from_parts(state.theta.clone(), state.p.clone(), mult.lapse.clone(), mult.shift.clone(), seed, description)
    }

    /// Unvalidated contents (e.g. density dumps in the lapse/shift slots).
    pub fn from_parts(
        theta: CotetradField,
        p: [FormField; 4],
        lapse: FormField,
        shift: VectorFieldOnGrid,
        seed: u64,
        description: &str,
    ) -> Result<Self> {
        if description.contains(['\n', '\r']) {
            return Err(Error::InvalidGrid("bundle description must be one line".into()));
        }
        let grid = *theta.grid();
        if p.iter().any(|f| f.grid() != &grid || f.degree() != 2) || lapse.grid() != &grid || shift.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        if lapse.degree() != 0 {
            return Err(Error::DegreeMismatch {
                expected: 0,
                got: lapse.degree(),
            });
        }
        Ok(Self {
            grid,
            seed,
            description: description.to_string(),
            theta,
            p,
            lapse,
            shift,
        })
    }

    pub fn state(&self) -> Result<PhaseState> {
        PhaseState::new(self.theta.clone(), self.p.clone())
    }

    pub fn multipliers(&self) -> Result<Multipliers> {
        Multipliers::new(self.lapse.clone(), self.shift.clone())
    }

    fn value_count(grid: &PeriodicGrid) -> usize {
        (12 + 12 + 1 + 3) * grid.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.grid;
        let n = g.points();
        let h = g.spacing();
        let mut out = String::new();
        out.push_str(&format!("format={MAGIC}\n"));
        out.push_str(&format!("version={VERSION}\n"));
        out.push_str(&format!("n={} {} {}\n", n[0], n[1], n[2]));
        out.push_str(&format!("h={:?} {:?} {:?}\n", h[0], h[1], h[2]));
        out.push_str(&format!("seed={}\n", self.seed));
        out.push_str(&format!("description={}\n", self.description));
        out.push_str("payload=f64le\n");
        out.push_str(&format!("count={}\n\n", Self::value_count(g)));
        let mut bytes = out.into_bytes();
        let len = g.len();
        let mut put = |v: f64| bytes.extend_from_slice(&v.to_le_bytes());
        for a in 0..4 {
            let d = self.theta.leg(a).data();
            for i in 0..3 {
                (0..len).for_each(|q| put(d[3 * q + i]));
            }
        }
        // strict (12), (13), (23) sit at dense offsets 1, 2, 5
        for a in 0..4 {
            let d = self.p[a].data();
            for off in [1, 2, 5] {
                (0..len).for_each(|q| put(d[9 * q + off]));
            }
        }
        self.lapse.data().iter().for_each(|&v| put(v));
        let s = self.shift.data();
        for i in 0..3 {
            (0..len).for_each(|q| put(s[3 * q + i]));
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut values: Vec<String> = Vec::with_capacity(KEYS.len());
        for key in KEYS {
            let end = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .map(|e| pos + e)
                .ok_or_else(|| perr(pos, "unterminated header line"))?;
            let line = std::str::from_utf8(&bytes[pos..end]).map_err(|e| perr(pos + e.valid_up_to(), "header is not UTF-8"))?;
            let (k, v) = line.split_once('=').ok_or_else(|| perr(pos, format!("expected `{key}=...`")))?;
            if k != key {
                return Err(perr(pos, format!("expected key `{key}`, found `{k}`")));
            }
            values.push(v.to_string());
            pos = end + 1;
        }
        if bytes.get(pos) != Some(&b'\n') {
            return Err(perr(pos, "expected blank line after header"));
        }
        let header_end = pos + 1;
        let line_offset = |i: usize| -> usize {
            // start of header line i
            let mut off = 0;
            for _ in 0..i {
                off += bytes[off..].iter().position(|&b| b == b'\n').unwrap() + 1;
            }
            off + KEYS[i].len() + 1
        };
        if values[0] != MAGIC {
            return Err(perr(line_offset(0), format!("unknown format `{}`", values[0])));
        }
        if values[1] != VERSION {
            return Err(perr(line_offset(1), format!("unsupported version `{}`", values[1])));
        }
        let triple = |i: usize| -> Result<[&str; 3]> {
            let parts: Vec<&str> = values[i].split(' ').collect();
            <[&str; 3]>::try_from(parts).map_err(|_| perr(line_offset(i), "expected three space-separated values"))
        };
        let n = triple(2)?;
        let mut np = [0usize; 3];
        for (j, s) in n.iter().enumerate() {
            np[j] = s.parse().map_err(|_| perr(line_offset(2), format!("bad point count `{s}`")))?;
        }
        let hs = triple(3)?;
        let mut h = [0f64; 3];
        for (j, s) in hs.iter().enumerate() {
            h[j] = s.parse().map_err(|_| perr(line_offset(3), format!("bad spacing `{s}`")))?;
        }
        let grid = PeriodicGrid::new(np, h).map_err(|e| perr(line_offset(2), e.to_string()))?;
        let seed: u64 = values[4].parse().map_err(|_| perr(line_offset(4), "bad seed"))?;
        let description = values[5].clone();
        if values[6] != "f64le" {
            return Err(perr(line_offset(6), format!("unsupported payload `{}`", values[6])));
        }
        let count: usize = values[7].parse().map_err(|_| perr(line_offset(7), "bad count"))?;
        if count != Self::value_count(&grid) {
            return Err(perr(line_offset(7), format!("count {count} does not match grid ({})", Self::value_count(&grid))));
        }
        let payload = &bytes[header_end..];
        if payload.len() != 8 * count {
            let at = header_end + payload.len().min(8 * count);
            return Err(perr(at, format!("payload has {} bytes, expected {}", payload.len(), 8 * count)));
        }
        let mut vals = Vec::with_capacity(count);
        for (i, c) in payload.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(perr(header_end + 8 * i, "non-finite value"));
            }
            vals.push(v);
        }
        let len = grid.len();
        let mut it = vals.into_iter();
        let mut take = |k: usize| -> Vec<f64> { it.by_ref().take(k).collect() };
        let mut legs = Vec::with_capacity(4);
        for _ in 0..4 {
            let comps: Vec<Vec<f64>> = (0..3).map(|_| take(len)).collect();
            let data: Vec<f64> = (0..len).flat_map(|q| [comps[0][q], comps[1][q], comps[2][q]]).collect();
            legs.push(FormField::from_data(grid, 1, data)?);
        }
        let theta = CotetradField::new(legs.try_into().expect("four legs"))?;
        let mut ps = Vec::with_capacity(4);
        for _ in 0..4 {
            let comps: Vec<Vec<f64>> = (0..3).map(|_| take(len)).collect();
            ps.push(FormField::from_fn(grid, 2, |q| KForm::from_strict(3, 2, &[comps[0][q], comps[1][q], comps[2][q]])));
        }
        let p: [FormField; 4] = ps.try_into().expect("four momenta");
        let lapse = FormField::from_data(grid, 0, take(len))?;
        let comps: Vec<Vec<f64>> = (0..3).map(|_| take(len)).collect();
        let shift = VectorFieldOnGrid::from_data(grid, (0..len).flat_map(|q| [comps[0][q], comps[1][q], comps[2][q]]).collect())?;
        Ok(Self {
            grid,
            seed,
            description,
            theta,
            p,
            lapse,
            shift,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FieldBundle {
        let grid = PeriodicGrid::new([5, 6, 7], [0.2, 1.0 / 6.0, 1.0 / 7.0]).unwrap();
        let s = PhaseState::random(grid, 0.1, 1, 3).unwrap();
        FieldBundle::new(&s, &Multipliers::unit(grid), 3, "random test state").unwrap()
    }

    #[test]
    fn roundtrip_is_lossless() {
        let b = sample();
        let bytes = b.to_bytes();
        let back = FieldBundle::from_bytes(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn header_errors_carry_offsets() {
        let bytes = sample().to_bytes();
        let mut bad = bytes.clone();
        bad[7] = b'X';
        match FieldBundle::from_bytes(&bad) {
            Err(Error::BundleParse { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("{other:?}"),
        }
        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(FieldBundle::from_bytes(truncated), Err(Error::BundleParse { .. })));
    }

    #[test]
    fn non_finite_payload_rejected() {
        let mut bytes = sample().to_bytes();
        let start = bytes.len() - 8;
        bytes[start..].copy_from_slice(&f64::NAN.to_le_bytes());
        match FieldBundle::from_bytes(&bytes) {
            Err(Error::BundleParse { offset, .. }) => assert_eq!(offset, start),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn multiline_description_rejected() {
        let grid = PeriodicGrid::cube(5);
        assert!(FieldBundle::new(&PhaseState::flat(grid), &Multipliers::unit(grid), 0, "a\nb").is_err());
    }
}
