//! 8-bit grayscale PGM (`P5`, plus ASCII `P2` on read).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::GrayFrame;

pub fn decode_pgm(data: &[u8]) -> Result<GrayFrame> {
    let mut pos = 0usize;
    let magic = next_token(data, &mut pos)?;
    let binary = match magic.as_slice() {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(Error::Unsupported(format!(
                "not a grayscale PGM (magic {:?})",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = header_number(data, &mut pos, "width")?;
    let height = header_number(data, &mut pos, "height")?;
    let maxval = header_number(data, &mut pos, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Unsupported(format!("bit depth with maxval {maxval}; only 8-bit is supported")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Unsupported(format!("empty {width}x{height} image")));
    }
    let count = width as usize * height as usize;

    let pixels = if binary {
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let raster = data
            .get(pos..pos + count)
            .ok_or_else(|| Error::Unsupported(format!("truncated raster: expected {count} bytes")))?;
        raster.to_vec()
    } else {
        (0..count)
            .map(|_| {
                let v = header_number(data, &mut pos, "pixel")?;
                if v > maxval {
                    return Err(Error::Unsupported(format!("pixel value {v} exceeds maxval {maxval}")));
                }
                Ok(v as u8)
            })
            .collect::<Result<Vec<_>>>()?
    };
    GrayFrame::new(width, height, pixels)
}

fn next_token(data: &[u8], pos: &mut usize) -> Result<Vec<u8>> {
    loop {
        match data.get(*pos) {
            Some(b'#') => {
                while data.get(*pos).is_some_and(|&c| c != b'\n') {
                    *pos += 1;
                }
            }
            Some(c) if c.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Unsupported("unexpected end of PGM header".into())),
        }
    }
    let start = *pos;
    while data.get(*pos).is_some_and(|c| !c.is_ascii_whitespace() && *c != b'#') {
        *pos += 1;
    }
    Ok(data[start..*pos].to_vec())
}

fn header_number(data: &[u8], pos: &mut usize, what: &str) -> Result<u32> {
    let tok = next_token(data, pos)?;
    std::str::from_utf8(&tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Unsupported(format!("bad PGM {what} '{}'", String::from_utf8_lossy(&tok))))
}

pub fn encode_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.pixels());
    out
}

pub fn load_frame(path: impl AsRef<Path>) -> Result<GrayFrame> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&data).map_err(|e| match e {
        Error::Unsupported(m) => Error::Unsupported(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_frame(path: impl AsRef<Path>, frame: &GrayFrame) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(frame)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_tiny_raster() {
        let mut data = b"P5\n2 2\n255\n".to_vec();
        data.extend_from_slice(&[0, 2, 4, 6]);
        let f = decode_pgm(&data).unwrap();
        assert_eq!((f.width(), f.height()), (2, 2));
        assert_eq!(f.pixels(), &[0, 2, 4, 6]);
    }

    #[test]
    fn header_comments_and_ascii() {
        let data = b"P2\n# made by hand\n3 1 # trailing\n255\n1 2 3\n";
        assert_eq!(decode_pgm(data).unwrap().pixels(), &[1, 2, 3]);
    }

    #[test]
    fn sixteen_bit_rejected() {
        let mut data = b"P5\n1 1\n65535\n".to_vec();
        data.extend_from_slice(&[0, 1]);
        assert!(matches!(decode_pgm(&data), Err(Error::Unsupported(_))));
        assert!(decode_pgm(b"P6\n1 1\n255\n\0\0\0").is_err());
        assert!(decode_pgm(b"P5\n4 4\n255\n\0").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let f = GrayFrame::new(3, 2, vec![9, 8, 7, 255, 0, 10]).unwrap();
        save_frame(&path, &f).unwrap();
        assert_eq!(load_frame(&path).unwrap(), f);
        assert!(matches!(load_frame(dir.path().join("missing.pgm")), Err(Error::Io { .. })));
    }

    proptest! {
        #[test]
        fn encode_decode_identity(w in 1u32..20, h in 1u32..20, seed in any::<u64>()) {
            let pixels: Vec<u8> = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 13) as u8).collect();
            let f = GrayFrame::new(w, h, pixels).unwrap();
            prop_assert_eq!(decode_pgm(&encode_pgm(&f)).unwrap(), f);
        }
    }
}
