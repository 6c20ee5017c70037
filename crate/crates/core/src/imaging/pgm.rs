use std::io::{Read, Write};

use super::{GrayImage, ImagingError};

/// Writes a binary (P5) PGM with maxval 255.
pub fn write_pgm<W: Write>(img: &GrayImage, mut out: W) -> Result<(), ImagingError> {
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())?;
    out.write_all(img.samples())?;
    Ok(())
}

/// Reads a binary (P5) PGM. Only maxval 255 is accepted.
pub fn read_pgm<R: Read>(mut input: R) -> Result<GrayImage, ImagingError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut pos = 0usize;

    let magic = next_token(&bytes, &mut pos).ok_or_else(|| invalid("missing magic"))?;
    if magic != b"P5" {
        return Err(invalid("not a binary PGM (P5)"));
    }
    let width = parse_number(&bytes, &mut pos, "width")?;
    let height = parse_number(&bytes, &mut pos, "height")?;
    let maxval = parse_number(&bytes, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(invalid("only maxval 255 is supported"));
    }
    if width == 0 || height == 0 {
        return Err(invalid("empty image"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(invalid("malformed header"));
    }
    pos += 1;
    let n = width as usize * height as usize;
    if bytes.len() - pos < n {
        return Err(invalid("truncated raster"));
    }
    GrayImage::from_samples(width, height, bytes[pos..pos + n].to_vec())
}

fn invalid(msg: &str) -> ImagingError {
    ImagingError::InvalidImage(msg.to_string())
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

fn parse_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32, ImagingError> {
    let tok = next_token(bytes, pos).ok_or_else(|| invalid(&format!("missing {what}")))?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| invalid(&format!("bad {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let img = GrayImage::from_fn(7, 5, |x, y| (x * 37 + y * 11) as u8);
        let mut buf = Vec::new();
        write_pgm(&img, &mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n7 5\n255\n"));
        let back = read_pgm(&buf[..]).unwrap();
        assert_eq!(back, img);
        let mut again = Vec::new();
        write_pgm(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut data = b"P5 # made by hand\n2 1\n# max\n255\n".to_vec();
        data.extend_from_slice(&[10, 20]);
        let img = read_pgm(&data[..]).unwrap();
        assert_eq!(img.samples(), &[10, 20]);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(read_pgm(&b"P2\n1 1\n255\n0"[..]).is_err());
        assert!(read_pgm(&b"P5\n2 2\n255\n\x00"[..]).is_err());
        assert!(read_pgm(&b"P5\n1 1\n65535\n\x00\x00"[..]).is_err());
        assert!(read_pgm(&b""[..]).is_err());
    }
}
