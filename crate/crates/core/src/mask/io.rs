//! Binary PPM (P6) frames, binary PGM (P5) class-id masks and label-space text files.

use std::path::Path;
use std::sync::Arc;

use super::types::{Frame, LabelSpace, SegMask};
use crate::error::{Error, Result};

struct Header {
    width: usize,
    height: usize,
    payload_offset: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::format(0, format!("expected magic `{}`", String::from_utf8_lossy(magic))));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (k, field) in fields.iter_mut().enumerate() {
        // whitespace and `#` comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::format(pos, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(pos, format!("expected header field {}", k + 1)));
        }
        let digits = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = digits.parse().map_err(|_| Error::format(start, "header field out of range"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::format(pos, "expected single whitespace after maxval")),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::format(2, "zero image dimension"));
    }
    if maxval != 255 {
        return Err(Error::format(pos - 1, format!("unsupported maxval {maxval}")));
    }
    Ok(Header { width, height, payload_offset: pos })
}

fn payload<'a>(bytes: &'a [u8], header: &Header, len: usize) -> Result<&'a [u8]> {
    let end = header.payload_offset + len;
    if bytes.len() < end {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: expected {len} bytes from offset {}", header.payload_offset),
        ));
    }
    if bytes.len() > end {
        return Err(Error::format(end, "trailing bytes after payload"));
    }
    Ok(&bytes[header.payload_offset..end])
}

pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.data());
    out
}

pub fn decode_frame(bytes: &[u8]) -> Result<Frame> {
    let header = parse_header(bytes, b"P6")?;
    let data = payload(bytes, &header, 3 * header.width * header.height)?;
    Frame::new(header.width, header.height, data.to_vec())
}

pub fn encode_mask(mask: &SegMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend_from_slice(mask.labels());
    out
}

pub fn decode_mask(bytes: &[u8], label_space: Arc<LabelSpace>) -> Result<SegMask> {
    let header = parse_header(bytes, b"P5")?;
    let data = payload(bytes, &header, header.width * header.height)?;
    if let Some(pos) = data.iter().position(|&l| !label_space.contains(l)) {
        return Err(Error::format(
            header.payload_offset + pos,
            format!("label {} outside label space of {} classes", data[pos], label_space.len()),
        ));
    }
    SegMask::new(header.width, header.height, data.to_vec(), label_space)
}

pub fn read_frame(path: impl AsRef<Path>) -> Result<Frame> {
    decode_frame(&std::fs::read(path)?)
}

pub fn write_frame(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    std::fs::write(path, encode_frame(frame))?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>, label_space: Arc<LabelSpace>) -> Result<SegMask> {
    decode_mask(&std::fs::read(path)?, label_space)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &SegMask) -> Result<()> {
    std::fs::write(path, encode_mask(mask))?;
    Ok(())
}

pub fn read_label_space(path: impl AsRef<Path>) -> Result<LabelSpace> {
    LabelSpace::from_text(&std::fs::read_to_string(path)?)
}

pub fn write_label_space(path: impl AsRef<Path>, labels: &LabelSpace) -> Result<()> {
    std::fs::write(path, labels.to_text())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn white_pixel_frame_bytes() {
        let f = Frame::filled(1, 1, [255, 255, 255]).unwrap();
        let bytes = encode_frame(&f);
        assert_eq!(bytes, b"P6\n1 1\n255\n\xff\xff\xff");
        assert_eq!(decode_frame(&bytes).unwrap(), f);
    }

    #[test]
    fn truncated_and_malformed_inputs() {
        let f = Frame::filled(2, 2, [1, 2, 3]).unwrap();
        let bytes = encode_frame(&f);
        let err = decode_frame(&bytes[..bytes.len() - 1]).unwrap_err();
        assert!(matches!(err, Error::Format { offset, .. } if offset == bytes.len() - 1));
        assert!(matches!(decode_frame(b"P5\n1 1\n255\n\0"), Err(Error::Format { offset: 0, .. })));
        assert!(decode_frame(b"P6\n1 1\n65535\n\0\0\0\0\0\0").is_err());
        assert!(decode_frame(b"P6\n1").is_err());
    }

    #[test]
    fn header_comments_are_skipped() {
        let f = decode_frame(b"P6\n# made by hand\n1 1\n255\n\x01\x02\x03").unwrap();
        assert_eq!(f.pixel(0, 0), [1, 2, 3]);
    }

    #[test]
    fn mask_labels_outside_space_are_rejected() {
        let ls = Arc::new(LabelSpace::anonymous(2).unwrap());
        assert!(decode_mask(b"P5\n2 1\n255\n\x00\x05", ls).is_err());
    }

    #[test]
    fn label_space_text_round_trip() {
        let ls = LabelSpace::new(["background", "tissue", "tool"]).unwrap();
        assert_eq!(LabelSpace::from_text(&ls.to_text()).unwrap(), ls);
        assert!(LabelSpace::from_text("background\ntool\ntool\n").is_err());
    }

    proptest! {
        #[test]
        fn mask_round_trip(w in 1usize..24, h in 1usize..24, seed in any::<u64>()) {
            let ls = Arc::new(LabelSpace::anonymous(7).unwrap());
            let labels: Vec<u8> = (0..w * h).map(|i| ((seed >> (i % 61)) as usize + i) as u8 % 7).collect();
            let m = SegMask::new(w, h, labels, ls.clone()).unwrap();
            prop_assert_eq!(decode_mask(&encode_mask(&m), ls).unwrap(), m);
        }

        #[test]
        fn frame_round_trip(w in 1usize..16, h in 1usize..16, data in proptest::collection::vec(any::<u8>(), 768)) {
            let f = Frame::new(w, h, data[..3 * w * h].to_vec()).unwrap();
            prop_assert_eq!(decode_frame(&encode_frame(&f)).unwrap(), f);
        }
    }
}
