//! `GSRM` model container.
//!
//! ```text
//! magic        4 bytes   "GSRM"
//! version      u32 LE    1
//! spec_len     u32 LE
//! spec         spec_len bytes of JSON (GestureNetSpec)
//! param_count  u64 LE
//! weights      param_count × f32 LE, layer order, kernel/weights before bias
//! ```

use std::fs;
use std::path::Path;

use super::{build_gessure_net, GestureNet, GestureNetSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GSRM";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_model(net: &GestureNet) -> Vec<u8> {
    let spec = serde_json::to_vec(&net.spec).expect("spec serializes");
    let params = net.network.flat_params();
    let mut out = Vec::with_capacity(24 + spec.len() + params.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
    out.extend_from_slice(&spec);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, field: &'static str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Format {
            field,
            msg: "file truncated".into(),
        });
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

pub fn decode_model(mut bytes: &[u8]) -> Result<GestureNet> {
    let cur = &mut bytes;
    if take(cur, 4, "magic")? != MAGIC {
        return Err(Error::Format {
            field: "magic",
            msg: "not a GSRM model file".into(),
        });
    }
    let version = u32::from_le_bytes(take(cur, 4, "version")?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format {
            field: "version",
            msg: format!("unsupported version {version}"),
        });
    }
    let spec_len = u32::from_le_bytes(take(cur, 4, "spec")?.try_into().unwrap()) as usize;
    let spec: GestureNetSpec =
        serde_json::from_slice(take(cur, spec_len, "spec")?).map_err(|e| Error::Format {
            field: "spec",
            msg: e.to_string(),
        })?;
    let count = u64::from_le_bytes(take(cur, 8, "param_count")?.try_into().unwrap()) as usize;

    let mut net = build_gessure_net(&spec, 0)?;
    if count != net.param_count() {
        return Err(Error::Consistency(format!(
            "file declares {count} parameters, spec realizes {}",
            net.param_count()
        )));
    }
    if cur.len() != count * 4 {
        return Err(Error::Format {
            field: "weights",
            msg: format!("expected {} weight bytes, found {}", count * 4, cur.len()),
        });
    }
    let values: Vec<f64> = cur
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    net.network.set_flat_params(&values)?;
    Ok(net)
}

pub fn save_model(net: &GestureNet, path: &Path) -> Result<()> {
    fs::write(path, encode_model(net)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<GestureNet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_rounds_weights_to_f32() {
        let net = build_gessure_net(&GestureNetSpec::toy(), 4).unwrap();
        let bytes = encode_model(&net);
        assert_eq!(&bytes[..4], b"GSRM");
        let back = decode_model(&bytes).unwrap();
        assert_eq!(back.spec, net.spec);
        for (a, b) in net.network.flat_params().iter().zip(back.network.flat_params()) {
            assert_eq!(*a as f32 as f64, b);
        }
        // f32 weights survive a second round trip exactly
        assert_eq!(encode_model(&back), bytes);
    }

    #[test]
    fn corrupt_files_rejected() {
        let net = build_gessure_net(&GestureNetSpec::toy(), 4).unwrap();
        let bytes = encode_model(&net);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_model(&bad), Err(Error::Format { field: "magic", .. })));

        assert!(matches!(
            decode_model(&bytes[..bytes.len() - 4]),
            Err(Error::Format { field: "weights", .. })
        ));

        let spec_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let mut wrong_count = bytes.clone();
        let at = 12 + spec_len;
        wrong_count[at..at + 8].copy_from_slice(&1u64.to_le_bytes());
        assert!(matches!(decode_model(&wrong_count), Err(Error::Consistency(_))));
    }
}
