//! Mojibake repair for UTF-8 text that was decoded as Windows-1252/Latin-1.

use encoding_rs::WINDOWS_1252;

fn cp1252_byte(c: char) -> Option<u8> {
    let cp = c as u32;
    if cp < 0x80 || (0xA0..=0xFF).contains(&cp) {
        return Some(cp as u8);
    }
    let mut buf = [0u8; 4];
    let (bytes, _, unmappable) = WINDOWS_1252.encode(c.encode_utf8(&mut buf));
    if unmappable || bytes.len() != 1 {
        None
    } else {
        Some(bytes[0])
    }
}

/// Adjacent char pairs whose Windows-1252 bytes form a UTF-8 lead byte
/// followed by a continuation byte, the fingerprint of mis-decoded UTF-8.
pub fn suspicious_sequences(text: &str) -> usize {
    let bytes: Vec<Option<u8>> = text.chars().map(cp1252_byte).collect();
    bytes
        .windows(2)
        .filter(|w| matches!((w[0], w[1]), (Some(0xC2..=0xF4), Some(0x80..=0xBF))))
        .count()
}

/// Re-encode as Windows-1252 and decode as UTF-8; `None` if either step fails.
fn reinterpret(text: &str) -> Option<String> {
    let (bytes, _, unmappable) = WINDOWS_1252.encode(text);
    if unmappable {
        return None;
    }
    String::from_utf8(bytes.into_owned()).ok()
}

/// Repairs mojibake when, and only when, reinterpreting the text strictly
/// lowers the number of suspicious sequences. Passes repeat until no pass
/// improves, so doubly mis-decoded text is fully repaired and the function
/// is idempotent.
pub fn fix_encoding(text: &str) -> (String, bool) {
    let mut current = text.to_string();
    let mut score = suspicious_sequences(&current);
    let mut repaired = false;
    while score > 0 {
        match reinterpret(&current) {
            Some(candidate) => {
                let cand_score = suspicious_sequences(&candidate);
                if cand_score < score {
                    current = candidate;
                    score = cand_score;
                    repaired = true;
                } else {
                    break;
                }
            }
            None => break,
        }
    }
    (current, repaired)
}
