//! Deterministic placeholder media.
//!
//! WAV clips are 8 kHz mono 16-bit PCM silence with the spoken transcript in
//! a `LIST/INFO/ICMT` chunk. PNG images are small grayscale frames with the
//! caption in a `tEXt` chunk under the `Description` keyword. Both formats can
//! be padded to a target size: WAV with extra silence, PNG with a private
//! ancillary `mmPd` chunk that decoders skip.

use std::io::Cursor;

pub const WAV_SAMPLE_RATE: u32 = 8_000;
pub const DEFAULT_WAV_SAMPLES: usize = 2_000;
pub const PNG_SIDE: u32 = 8;
pub const PNG_CAPTION_KEYWORD: &str = "Description";
const PNG_PADDING_CHUNK: [u8; 4] = *b"mmPd";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MediaError {
    #[error("not a RIFF/WAVE file")]
    NotWav,
    #[error("WAV chunk {0:?} runs past end of file")]
    TruncatedChunk(String),
    #[error("WAV file has no fmt chunk")]
    MissingFormat,
    #[error("PNG error: {0}")]
    Png(String),
    #[error("text must be Latin-1 for a PNG tEXt chunk")]
    NotLatin1,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WavInfo {
    pub format_tag: u16,
    pub channels: u16,
    pub sample_rate: u32,
    pub bits_per_sample: u16,
    pub data_len: usize,
    pub comment: Option<String>,
}

fn chunk(id: &[u8; 4], body: &[u8], out: &mut Vec<u8>) {
    out.extend_from_slice(id);
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(body);
    if body.len() % 2 == 1 {
        out.push(0);
    }
}

/// Builds a WAV clip of at least `min_size` bytes carrying `transcript`.
pub fn wav_with_transcript(transcript: &str, min_size: Option<usize>) -> Vec<u8> {
    let mut fmt = Vec::with_capacity(16);
    fmt.extend_from_slice(&1u16.to_le_bytes()); // PCM
    fmt.extend_from_slice(&1u16.to_le_bytes()); // mono
    fmt.extend_from_slice(&WAV_SAMPLE_RATE.to_le_bytes());
    fmt.extend_from_slice(&(WAV_SAMPLE_RATE * 2).to_le_bytes());
    fmt.extend_from_slice(&2u16.to_le_bytes());
    fmt.extend_from_slice(&16u16.to_le_bytes());

    let mut icmt = transcript.as_bytes().to_vec();
    icmt.push(0);
    let mut info = b"INFO".to_vec();
    chunk(b"ICMT", &icmt, &mut info);

    let mut head = Vec::new();
    chunk(b"fmt ", &fmt, &mut head);
    chunk(b"LIST", &info, &mut head);

    // 12 bytes RIFF header + 8 bytes data chunk header.
    let fixed = 12 + head.len() + 8;
    let mut samples = DEFAULT_WAV_SAMPLES * 2;
    if let Some(target) = min_size {
        samples = samples.max(target.saturating_sub(fixed).div_ceil(2) * 2);
    }
    let mut body = b"WAVE".to_vec();
    body.extend_from_slice(&head);
    body.extend_from_slice(b"data");
    body.extend_from_slice(&(samples as u32).to_le_bytes());
    body.resize(body.len() + samples, 0);

    let mut out = Vec::with_capacity(body.len() + 8);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(&body);
    out
}

pub fn parse_wav(bytes: &[u8]) -> Result<WavInfo, MediaError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(MediaError::NotWav);
    }
    let mut fmt = None;
    let mut data_len = 0;
    let mut comment = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let start = pos + 8;
        let end = start.checked_add(len).filter(|e| *e <= bytes.len());
        let Some(end) = end else {
            return Err(MediaError::TruncatedChunk(String::from_utf8_lossy(id).into_owned()));
        };
        let body = &bytes[start..end];
        match id {
            b"fmt " if body.len() >= 16 => {
                let u16_at = |i: usize| u16::from_le_bytes([body[i], body[i + 1]]);
                let sample_rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                fmt = Some((u16_at(0), u16_at(2), sample_rate, u16_at(14)));
            }
            b"data" => data_len = len,
            b"LIST" if body.starts_with(b"INFO") => comment = find_icmt(&body[4..]).or(comment),
            _ => {}
        }
        pos = end + (len % 2);
    }
    let (format_tag, channels, sample_rate, bits_per_sample) = fmt.ok_or(MediaError::MissingFormat)?;
    Ok(WavInfo { format_tag, channels, sample_rate, bits_per_sample, data_len, comment })
}

fn find_icmt(mut sub: &[u8]) -> Option<String> {
    while sub.len() >= 8 {
        let len = u32::from_le_bytes(sub[4..8].try_into().unwrap()) as usize;
        let body = sub.get(8..8 + len)?;
        if &sub[0..4] == b"ICMT" {
            let text = body.split(|b| *b == 0).next().unwrap_or_default();
            return Some(String::from_utf8_lossy(text).into_owned());
        }
        sub = sub.get(8 + len + (len % 2)..)?;
    }
    None
}

/// Builds a PNG of at least `min_size` bytes with `caption` in a tEXt chunk.
pub fn png_with_caption(caption: &str, min_size: Option<usize>) -> Result<Vec<u8>, MediaError> {
    if !caption.chars().all(|c| (c as u32) < 256) {
        return Err(MediaError::NotLatin1);
    }
    let encode = |padding: usize| -> Result<Vec<u8>, png::EncodingError> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, PNG_SIDE, PNG_SIDE);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        enc.add_text_chunk(PNG_CAPTION_KEYWORD.to_string(), caption.to_string())?;
        let mut writer = enc.write_header()?;
        if padding > 0 {
            writer.write_chunk(png::chunk::ChunkType(PNG_PADDING_CHUNK), &vec![0u8; padding])?;
        }
        // A fixed diagonal gradient so the frame is not blank.
        let pixels: Vec<u8> = (0..PNG_SIDE * PNG_SIDE).map(|i| ((i % PNG_SIDE + i / PNG_SIDE) * 16) as u8).collect();
        writer.write_image_data(&pixels)?;
        writer.finish()?;
        Ok(out)
    };
    let base = encode(0).map_err(|e| MediaError::Png(e.to_string()))?;
    match min_size {
        Some(target) if target > base.len() => {
            // An extra chunk costs 12 bytes of framing on top of its body.
            let padding = (target - base.len()).max(12) - 12;
            let padded = encode(padding.max(1)).map_err(|e| MediaError::Png(e.to_string()))?;
            Ok(padded)
        }
        _ => Ok(base),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PngInfo {
    pub width: u32,
    pub height: u32,
    pub caption: Option<String>,
}

pub fn parse_png(bytes: &[u8]) -> Result<PngInfo, MediaError> {
    let reader = png::Decoder::new(Cursor::new(bytes)).read_info().map_err(|e| MediaError::Png(e.to_string()))?;
    let info = reader.info();
    let caption = info
        .uncompressed_latin1_text
        .iter()
        .find(|t| t.keyword == PNG_CAPTION_KEYWORD)
        .map(|t| t.text.clone());
    Ok(PngInfo { width: info.width, height: info.height, caption })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_header_and_transcript() {
        let bytes = wav_with_transcript("it started grinding after the fall", None);
        let info = parse_wav(&bytes).unwrap();
        assert_eq!((info.format_tag, info.channels, info.sample_rate, info.bits_per_sample), (1, 1, 8000, 16));
        assert_eq!(info.data_len, DEFAULT_WAV_SAMPLES * 2);
        assert_eq!(info.comment.as_deref(), Some("it started grinding after the fall"));
        let riff_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        assert_eq!(riff_len + 8, bytes.len());
    }

    #[test]
    fn odd_length_transcript_is_padded() {
        for t in ["a", "ab", "abc"] {
            let info = parse_wav(&wav_with_transcript(t, None)).unwrap();
            assert_eq!(info.comment.as_deref(), Some(t));
        }
    }

    #[test]
    fn wav_size_knob() {
        let bytes = wav_with_transcript("x", Some(2 * 1024 * 1024));
        assert!(bytes.len() >= 2 * 1024 * 1024);
        assert!(bytes.len() < 2 * 1024 * 1024 + 16);
        assert!(parse_wav(&bytes).is_ok());
    }

    #[test]
    fn png_caption_and_padding() {
        let small = png_with_caption("cracked bezel near the hinge", None).unwrap();
        assert_eq!(&small[..8], b"\x89PNG\r\n\x1a\n");
        let info = parse_png(&small).unwrap();
        assert_eq!((info.width, info.height), (PNG_SIDE, PNG_SIDE));
        assert_eq!(info.caption.as_deref(), Some("cracked bezel near the hinge"));

        let target = 2 * 1024 * 1024;
        let big = png_with_caption("cracked bezel near the hinge", Some(target)).unwrap();
        assert!(big.len() >= target && big.len() < target + 16, "{}", big.len());
        assert_eq!(parse_png(&big).unwrap().caption, info.caption);
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(wav_with_transcript("same", None), wav_with_transcript("same", None));
        assert_eq!(png_with_caption("same", Some(5000)).unwrap(), png_with_caption("same", Some(5000)).unwrap());
    }

    #[test]
    fn rejects_garbage() {
        assert_eq!(parse_wav(b"not a wav at all"), Err(MediaError::NotWav));
        assert!(parse_png(b"\x89PNG garbage").is_err());
    }
}
