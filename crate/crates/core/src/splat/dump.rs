//! Line-oriented field snapshot:
//!
//! ```text
//! SPLATFIELD v1 <count>
//! mu_x mu_y mu_z s_x s_y s_z q_w q_x q_y q_z opacity_logit cost birth_frame
//! ```
//!
//! Reals carry 9 significant digits.

use std::io::{BufRead, Write};

use nalgebra::{Quaternion, UnitQuaternion};

use super::{GaussianPrimitive, SplatField};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

const HEADER: &str = "SPLATFIELD v1";

/// `%.9g`-style formatting.
pub(crate) fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let sci = format!("{v:.8e}");
    // rounding may bump the exponent (e.g. 9.999999999 → 1.00000000e1)
    let exp = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse::<i32>().ok())
        .unwrap_or(exp);
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let (mant, e) = sci.split_once('e').expect("scientific format");
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    }
}

pub fn write_field<W: Write>(field: &SplatField, mut out: W) -> Result<()> {
    writeln!(out, "{HEADER} {}", field.primitives.len())?;
    for g in &field.primitives {
        let q = g.rot.quaternion();
        let reals = [
            g.mu.x,
            g.mu.y,
            g.mu.z,
            g.scale.x,
            g.scale.y,
            g.scale.z,
            q.w,
            q.i,
            q.j,
            q.k,
            g.opacity_logit,
            g.cost,
        ];
        let line: Vec<String> = reals.iter().map(|&v| fmt_sig9(v)).collect();
        writeln!(out, "{} {}", line.join(" "), g.birth_frame)?;
    }
    Ok(())
}

pub fn read_field<R: BufRead>(input: R) -> Result<SplatField> {
    let mut lines = input.lines();
    let header = lines.next().ok_or(Error::EmptyInput("field dump"))??;
    let count: usize = header
        .strip_prefix(HEADER)
        .map(str::trim)
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad field header {header:?}")))?;
    let mut prims = Vec::with_capacity(count);
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 13 {
            return Err(Error::Parse(format!("line {}: expected 13 fields, got {}", n + 2, toks.len())));
        }
        let r = |i: usize| -> Result<f64> {
            toks[i]
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: field {}: {e}", n + 2, i + 1)))
        };
        let birth_frame = toks[12]
            .parse::<u64>()
            .map_err(|e| Error::Parse(format!("line {}: birth_frame: {e}", n + 2)))?;
        let scale = Vec3::new(r(3)?, r(4)?, r(5)?);
        if scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Parse(format!("line {}: scales must be positive", n + 2)));
        }
        let q = Quaternion::new(r(6)?, r(7)?, r(8)?, r(9)?);
        if !(q.norm() > 1e-12) {
            return Err(Error::Parse(format!("line {}: degenerate quaternion", n + 2)));
        }
        prims.push(GaussianPrimitive {
            mu: Vec3::new(r(0)?, r(1)?, r(2)?),
            scale,
            rot: UnitQuaternion::from_quaternion(q),
            opacity_logit: r(10)?,
            cost: r(11)?.clamp(0.0, 1.0),
            birth_frame,
        });
    }
    if prims.len() != count {
        return Err(Error::Parse(format!("header declares {count} primitives, found {}", prims.len())));
    }
    let frame = prims.iter().map(|g| g.birth_frame).max().unwrap_or(0);
    Ok(SplatField {
        budget: count.max(SplatField::default().budget),
        primitives: prims,
        frame_counter: frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(1.5), "1.5");
        assert_eq!(fmt_sig9(-0.85), "-0.85");
        assert_eq!(fmt_sig9(123456789.0), "123456789");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(1e-7), "1e-7");
        assert_eq!(fmt_sig9(2.5e12), "2.5e12");
        assert_eq!(fmt_sig9(9.9999999999), "10");
    }

    #[test]
    fn header_and_errors() {
        let mut f = SplatField::new(4);
        f.primitives.push(GaussianPrimitive::isotropic(Vec3::new(1.0, 2.0, 3.0), 0.1, 0.7, 0.85, 4));
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("SPLATFIELD v1 1\n1 2 3 0.1 0.1 0.1 1 0 0 0 "));
        assert!(text.trim_end().ends_with(" 0.85 4"));

        assert!(read_field("SPLATFIELD v1 2\n".as_bytes()).is_err());
        assert!(read_field("GARBAGE\n".as_bytes()).is_err());
        assert!(read_field("SPLATFIELD v1 1\n1 2 3\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_within_nine_digits(
            prims in prop::collection::vec((prop::array::uniform3(-50.0f64..50.0), 0.01f64..2.0, -8.0f64..8.0, 0.0f64..1.0, 0u64..1000), 0..8)
        ) {
            let mut f = SplatField::new(100);
            for (m, s, o, c, b) in prims {
                let mut g = GaussianPrimitive::isotropic(Vec3::new(m[0], m[1], m[2]), s, 0.5, c, b);
                g.opacity_logit = o;
                f.primitives.push(g);
            }
            let mut buf = Vec::new();
            write_field(&f, &mut buf).unwrap();
            let back = read_field(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), f.len());
            for (a, b) in f.primitives.iter().zip(&back.primitives) {
                prop_assert!((a.mu - b.mu).norm() <= 1e-7 * a.mu.norm().max(1.0));
                prop_assert!((a.cost - b.cost).abs() <= 1e-8);
                prop_assert!((a.opacity_logit - b.opacity_logit).abs() <= 1e-7 * a.opacity_logit.abs().max(1.0));
                prop_assert_eq!(a.birth_frame, b.birth_frame);
            }
        }
    }
}
