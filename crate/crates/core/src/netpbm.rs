//! Binary PGM (P5) and PPM (P6) writers with 8-bit round-half-up quantization.

use std::io::{self, Write};

/// Maps `[0, 1]` to `0..=255`, rounding halves up; out-of-range input is clamped.
pub fn quantize(x: f64) -> u8 {
    let v = (x.clamp(0.0, 1.0) * 255.0 + 0.5).floor();
    v as u8
}

pub fn write_pgm<W: Write>(mut out: W, h: usize, w: usize, pixels: &[u8]) -> io::Result<()> {
    assert_eq!(pixels.len(), h * w);
    write!(out, "P5\n{w} {h}\n255\n")?;
    out.write_all(pixels)
}

/// Grayscale image from unit-interval values.
pub fn write_pgm_unit<W: Write>(out: W, h: usize, w: usize, values: &[f64]) -> io::Result<()> {
    let px: Vec<u8> = values.iter().map(|&v| quantize(v)).collect();
    write_pgm(out, h, w, &px)
}

/// Colour image from interleaved RGB unit-interval values (`[H, W, 3]`).
pub fn write_ppm_unit<W: Write>(mut out: W, h: usize, w: usize, rgb: &[f64]) -> io::Result<()> {
    assert_eq!(rgb.len(), h * w * 3);
    write!(out, "P6\n{w} {h}\n255\n")?;
    let px: Vec<u8> = rgb.iter().map(|&v| quantize(v)).collect();
    out.write_all(&px)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_rounds_half_up() {
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.5), 128); // 127.5 rounds up
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(1.7), 255);
        assert_eq!(quantize(1.0 / 3.0), 85);
    }

    #[test]
    fn pgm_header_and_payload() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, 2, 3, &[0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(&buf[..11], b"P5\n3 2\n255\n");
        assert_eq!(&buf[11..], &[0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn ppm_header() {
        let mut buf = Vec::new();
        write_ppm_unit(&mut buf, 1, 1, &[1.0, 0.0, 0.5]).unwrap();
        assert_eq!(buf, b"P6\n1 1\n255\n\xff\x00\x80");
    }
}
