//! Mock speech-to-text and image captioning.
//!
//! Both read the description embedded in the placeholder media (the WAV
//! `ICMT` comment, the PNG `Description` text chunk) and tag the result with
//! the fidelity marker so downstream agents can tell they got a stand-in.

use crate::a2a::MimeType;
use crate::media;

use super::mode::TranscoderKind;

pub const FIDELITY_MARKER: &str = "[fidelity=transcoded]";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranscodeError {
    #[error("cannot resolve payload at {0}")]
    Unresolvable(String),
    #[error("{kind:?} cannot handle {mime}")]
    WrongInput { kind: TranscoderKind, mime: String },
}

pub fn mark_transcoded(text: &str) -> String {
    format!("{text} {FIDELITY_MARKER}")
}

pub fn is_transcoded(text: &str) -> bool {
    text.contains(FIDELITY_MARKER)
}

pub fn strip_marker(text: &str) -> String {
    text.replace(FIDELITY_MARKER, "").trim().to_string()
}

pub trait Transcoder: Send + Sync {
    fn kind(&self) -> TranscoderKind;

    /// Returns the text rendering of a media payload, marker included.
    fn transcode(&self, mime: &MimeType, bytes: &[u8]) -> Result<String, TranscodeError>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MockSpeechToText;

#[derive(Debug, Default, Clone, Copy)]
pub struct MockImageCaption;

impl Transcoder for MockSpeechToText {
    fn kind(&self) -> TranscoderKind {
        TranscoderKind::SpeechToText
    }

    fn transcode(&self, mime: &MimeType, bytes: &[u8]) -> Result<String, TranscodeError> {
        if !mime.top_level().eq_ignore_ascii_case("audio") {
            return Err(TranscodeError::WrongInput { kind: self.kind(), mime: mime.to_string() });
        }
        let text = media::parse_wav(bytes)
            .ok()
            .and_then(|w| w.comment)
            .filter(|c| !c.trim().is_empty())
            .unwrap_or_else(|| format!("unintelligible {} clip of {} bytes", mime, bytes.len()));
        Ok(mark_transcoded(&text))
    }
}

impl Transcoder for MockImageCaption {
    fn kind(&self) -> TranscoderKind {
        TranscoderKind::ImageCaption
    }

    fn transcode(&self, mime: &MimeType, bytes: &[u8]) -> Result<String, TranscodeError> {
        if !mime.top_level().eq_ignore_ascii_case("image") {
            return Err(TranscodeError::WrongInput { kind: self.kind(), mime: mime.to_string() });
        }
        let text = media::parse_png(bytes)
            .ok()
            .and_then(|p| p.caption)
            .filter(|c| !c.trim().is_empty())
            .unwrap_or_else(|| format!("an {} image of {} bytes", mime, bytes.len()));
        Ok(mark_transcoded(&text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_embedded_descriptions() {
        let wav = media::wav_with_transcript("the fan rattles at high speed", None);
        let out = MockSpeechToText.transcode(&MimeType::parse("audio/wav").unwrap(), &wav).unwrap();
        assert_eq!(out, "the fan rattles at high speed [fidelity=transcoded]");
        assert!(is_transcoded(&out));
        assert_eq!(strip_marker(&out), "the fan rattles at high speed");

        let png = media::png_with_caption("a photo of a cracked lid", None).unwrap();
        let out = MockImageCaption.transcode(&MimeType::parse("image/png").unwrap(), &png).unwrap();
        assert_eq!(out, "a photo of a cracked lid [fidelity=transcoded]");
    }

    #[test]
    fn fallback_is_deterministic() {
        let webm = MimeType::parse("audio/webm").unwrap();
        let a = MockSpeechToText.transcode(&webm, b"\x1aE\xdf\xa3").unwrap();
        assert_eq!(a, MockSpeechToText.transcode(&webm, b"\x1aE\xdf\xa3").unwrap());
        assert!(a.ends_with(FIDELITY_MARKER));
    }

    #[test]
    fn rejects_wrong_modality() {
        let png = MimeType::parse("image/png").unwrap();
        assert!(matches!(MockSpeechToText.transcode(&png, b""), Err(TranscodeError::WrongInput { .. })));
    }
}
