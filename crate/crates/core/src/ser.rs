//! Serde helpers: complex scalars serialize as `[re, im]`, complex matrices
//! as row-major nested arrays of `[re, im]` pairs.

use crate::{CMat, C64};
use serde::ser::SerializeSeq;
use serde::Serializer;

pub mod c64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &C64, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(2))?;
        seq.serialize_element(&v.re)?;
        seq.serialize_element(&v.im)?;
        seq.end()
    }
}

pub mod cmat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|r| {
                (0..m.ncols())
                    .map(|c| [m[(r, c)].re, m[(r, c)].im])
                    .collect()
            })
            .collect();
        serde::Serialize::serialize(&rows, s)
    }
}

/// Optional matrix: `null` or the nested-array form.
pub fn opt_cmat<S: Serializer>(m: &Option<CMat>, s: S) -> Result<S::Ok, S::Error> {
    match m {
        None => s.serialize_none(),
        Some(m) => cmat::serialize(m, s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Serialize;

    #[derive(Serialize)]
    struct Wrap {
        #[serde(with = "c64")]
        z: C64,
        #[serde(with = "cmat")]
        m: CMat,
    }

    #[test]
    fn complex_serializes_as_re_im_pairs() {
        let w = Wrap {
            z: C64::new(1.5, -2.0),
            m: CMat::from_row_slice(1, 2, &[C64::new(0.0, 1.0), C64::new(3.0, 0.0)]),
        };
        let j = serde_json::to_value(&w).unwrap();
        assert_eq!(j["z"], serde_json::json!([1.5, -2.0]));
        assert_eq!(j["m"], serde_json::json!([[[0.0, 1.0], [3.0, 0.0]]]));
    }
}
