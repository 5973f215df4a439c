//! Frame-sequence clip files: `FSEQ`, u8 version, u16 L, u8 C, u16 H, u16 W,
//! u8 dtype code (0 u8, 1 f32, 2 f64), row-major little-endian payload.

use std::path::Path;

use engagenet_core::data::{RawClip, RawData};

use crate::bytes::Reader;
use crate::error::{read_file, write_file, Error, Result};

pub const MAGIC: &[u8; 4] = b"FSEQ";
pub const VERSION: u8 = 1;

pub fn encode(clip: &RawClip) -> Result<Vec<u8>> {
    let [l, c, h, w] = clip.shape();
    let fits = l <= u16::MAX as usize && c <= u8::MAX as usize && h <= u16::MAX as usize && w <= u16::MAX as usize;
    if !fits {
        return Err(Error::Usage(format!("clip extents {:?} exceed the header fields", clip.shape())));
    }
    let mut out = Vec::with_capacity(14 + clip.data().len() * 8);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(l as u16).to_le_bytes());
    out.push(c as u8);
    out.extend_from_slice(&(h as u16).to_le_bytes());
    out.extend_from_slice(&(w as u16).to_le_bytes());
    match clip.data() {
        RawData::U8(v) => {
            out.push(0);
            out.extend_from_slice(v);
        }
        RawData::F32(v) => {
            out.push(1);
            v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        }
        RawData::F64(v) => {
            out.push(2);
            v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<RawClip> {
    let mut r = Reader::new(bytes, path);
    r.magic(MAGIC)?;
    let at = r.offset();
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(r.fail(at, format!("unsupported version {version}")));
    }
    let at = r.offset();
    let l = r.u16("frame count")? as usize;
    let c = r.u8("channels")? as usize;
    let h = r.u16("height")? as usize;
    let w = r.u16("width")? as usize;
    if [l, c, h, w].contains(&0) {
        return Err(r.fail(at, format!("zero extent in {l}x{c}x{h}x{w}")));
    }
    let n = l * c * h * w;
    let at = r.offset();
    let code = r.u8("dtype")?;
    let data = match code {
        0 => RawData::U8(r.take(n, "payload")?.to_vec()),
        1 => RawData::F32(
            r.take(n * 4, "payload")?
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect(),
        ),
        2 => RawData::F64(
            r.take(n * 8, "payload")?
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect(),
        ),
        other => return Err(r.fail(at, format!("unknown dtype code {other}"))),
    };
    r.finish()?;
    Ok(RawClip::new([l, c, h, w], data)?)
}

pub fn write(path: &Path, clip: &RawClip) -> Result<()> {
    write_file(path, &encode(clip)?)
}

pub fn read(path: &Path) -> Result<RawClip> {
    decode(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(l: u16, code: u8) -> Vec<u8> {
        let mut b = b"FSEQ\x01".to_vec();
        b.extend_from_slice(&l.to_le_bytes());
        b.push(1);
        b.extend_from_slice(&2u16.to_le_bytes());
        b.extend_from_slice(&2u16.to_le_bytes());
        b.push(code);
        b
    }

    #[test]
    fn truncated_payload() {
        let mut b = header(100, 0);
        b.extend(std::iter::repeat_n(7u8, 40));
        let err = decode(&b, Path::new("c.fseq")).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 13, .. }), "{err}");
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn unknown_dtype() {
        let mut b = header(1, 9);
        b.extend([0u8; 4]);
        let err = decode(&b, Path::new("c.fseq")).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 12, .. }), "{err}");
    }

    #[test]
    fn bad_magic() {
        let err = decode(b"FSEX\x01", Path::new("c.fseq")).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }));
    }

    #[test]
    fn u8_round_trip() {
        let clip = RawClip::new([2, 1, 2, 2], RawData::U8((0..8).collect())).unwrap();
        let b = encode(&clip).unwrap();
        assert_eq!(decode(&b, Path::new("m")).unwrap(), clip);
    }
}
