//! Portable graymap I/O. Stored values `0..=255` map to pixels `1..=256`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::denoise::GrayImage;

fn tokens(bytes: &[u8], count: usize, mut pos: usize) -> Result<(Vec<usize>, usize)> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Pgm("expected a number".into()));
        }
        let s = std::str::from_utf8(&bytes[start..pos]).unwrap();
        out.push(s.parse().map_err(|_| Error::Pgm(format!("bad number `{s}`")))?);
    }
    Ok((out, pos))
}

/// Parses ASCII (`P2`) or binary (`P5`) graymaps with 8-bit samples.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'2' || bytes[1] == b'5') {
        return Err(Error::Pgm("missing P2/P5 magic".into()));
    }
    let binary = bytes[1] == b'5';
    let (hdr, pos) = tokens(bytes, 3, 2)?;
    let (cols, rows, maxval) = (hdr[0], hdr[1], hdr[2]);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Pgm(format!("unsupported maxval {maxval}")));
    }
    let n = rows * cols;
    let raw: Vec<usize> = if binary {
        let start = pos + 1;
        if bytes.len() < start + n {
            return Err(Error::Pgm("truncated pixel data".into()));
        }
        bytes[start..start + n].iter().map(|&b| b as usize).collect()
    } else {
        tokens(bytes, n, pos)?.0
    };
    if let Some(v) = raw.iter().find(|&&v| v > maxval) {
        return Err(Error::Pgm(format!("sample {v} exceeds maxval {maxval}")));
    }
    GrayImage::new(rows, cols, raw.into_iter().map(|v| v as u16 + 1).collect())
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_pgm(&bytes)
}

/// Encodes as `P5` (binary) or `P2` (ASCII).
pub fn encode_pgm(image: &GrayImage, binary: bool) -> Vec<u8> {
    let mut out = format!("{}\n{} {}\n255\n", if binary { "P5" } else { "P2" }, image.cols, image.rows).into_bytes();
    if binary {
        out.extend(image.pixels.iter().map(|&p| (p - 1) as u8));
    } else {
        for row in image.pixels.chunks(image.cols.max(1)) {
            let line: Vec<String> = row.iter().map(|&p| (p - 1).to_string()).collect();
            out.extend(line.join(" ").into_bytes());
            out.push(b'\n');
        }
    }
    out
}

pub fn write_pgm(path: &Path, image: &GrayImage, binary: bool) -> Result<()> {
    std::fs::File::create(path)?.write_all(&encode_pgm(image, binary))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::denoise::synthetic_image;

    #[test]
    fn round_trip_both_formats() {
        let img = synthetic_image(9, 13);
        for binary in [true, false] {
            assert_eq!(parse_pgm(&encode_pgm(&img, binary)).unwrap(), img);
        }
    }

    #[test]
    fn comments_and_offsets() {
        let img = parse_pgm(b"P2\n# hi\n2 1\n255\n0 255\n").unwrap();
        assert_eq!(img.pixels, vec![1, 256]);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let img = synthetic_image(4, 5);
        write_pgm(&p, &img, true).unwrap();
        assert_eq!(read_pgm(&p).unwrap(), img);
    }

    #[test]
    fn malformed_rejected() {
        assert!(parse_pgm(b"P6\n1 1\n255\n").is_err());
        assert!(parse_pgm(b"P5\n4 4\n255\n\x00").is_err());
    }
}
