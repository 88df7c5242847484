//! Fixed sinusoidal positional encoding.
//!
//! Position `pos` maps to `[sin(pos / base^(2i/dim)), cos(pos / base^(2i/dim))]`
//! for `i in 0..dim/2`. With the two-dimensional encoding used here only
//! `i = 0` exists, so the divisor is 1 and `base` has no effect.

use crate::error::{Error, Result};

pub const ENCODING_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionalEncoding {
    dim: usize,
    base: f64,
}

impl Default for PositionalEncoding {
    fn default() -> Self {
        PositionalEncoding {
            dim: ENCODING_DIM,
            base: 10_000.0,
        }
    }
}

impl PositionalEncoding {
    pub fn new(base: f64) -> Result<Self> {
        if !(base > 1.0) || !base.is_finite() {
            return Err(Error::Domain(format!("positional encoding base must be > 1, got {base}")));
        }
        Ok(PositionalEncoding {
            dim: ENCODING_DIM,
            base,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn encode(&self, pos: i64) -> Result<Vec<f64>> {
        if pos < 0 {
            return Err(Error::Domain(format!("negative position {pos}")));
        }
        let pos = pos as f64;
        let mut out = Vec::with_capacity(self.dim);
        for i in 0..self.dim / 2 {
            let angle = pos / self.base.powf(2.0 * i as f64 / self.dim as f64);
            out.push(angle.sin());
            out.push(angle.cos());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn origin_and_unit_position() {
        let pe = PositionalEncoding::default();
        assert_eq!(pe.encode(0).unwrap(), vec![0.0, 1.0]);
        let one = pe.encode(1).unwrap();
        assert!((one[0] - 0.841471).abs() < 1e-6);
        assert!((one[1] - 0.540302).abs() < 1e-6);
    }

    #[test]
    fn negative_position_rejected() {
        assert!(PositionalEncoding::default().encode(-1).is_err());
        assert!(PositionalEncoding::new(1.0).is_err());
    }

    #[test]
    fn base_is_inert_at_two_dims() {
        let a = PositionalEncoding::new(10.0).unwrap();
        let b = PositionalEncoding::default();
        for pos in 0..50 {
            assert_eq!(a.encode(pos).unwrap(), b.encode(pos).unwrap());
        }
    }

    #[test]
    fn positions_in_use_are_distinct() {
        let pe = PositionalEncoding::default();
        let codes: Vec<Vec<f64>> = (0..6).map(|p| pe.encode(p).unwrap()).collect();
        for i in 0..codes.len() {
            for j in i + 1..codes.len() {
                let d = ((codes[i][0] - codes[j][0]).powi(2) + (codes[i][1] - codes[j][1]).powi(2)).sqrt();
                assert!(d > 1e-3, "positions {i} and {j} collide");
            }
        }
    }

    proptest! {
        #[test]
        fn unit_norm(pos in 0i64..1_000_000) {
            let v = PositionalEncoding::default().encode(pos).unwrap();
            prop_assert!((v[0] * v[0] + v[1] * v[1] - 1.0).abs() < 1e-12);
        }
    }
}
