//! American Soundex.

use crate::error::{Error, Result};

/// Digit class of a letter: `Some(0)` for vowels (which separate repeats),
/// `None` for `h`/`w` (which do not).
fn class(c: u8) -> Option<u8> {
    Some(match c {
        b'b' | b'f' | b'p' | b'v' => 1,
        b'c' | b'g' | b'j' | b'k' | b'q' | b's' | b'x' | b'z' => 2,
        b'd' | b't' => 3,
        b'l' => 4,
        b'm' | b'n' => 5,
        b'r' => 6,
        b'h' | b'w' => return None,
        _ => 0,
    })
}

/// Four-character code: the first letter upper-cased, then three digits.
/// Non-letters after the first character are ignored.
pub fn soundex(word: &str) -> Result<String> {
    let mut letters = word.bytes();
    let first = match letters.next() {
        None => return Err(Error::EmptyInput),
        Some(b) if b.is_ascii_alphabetic() => b.to_ascii_lowercase(),
        Some(_) => return Err(Error::NonAlphabeticInput(word.to_string())),
    };

    let mut code = String::with_capacity(4);
    code.push(first.to_ascii_uppercase() as char);
    let mut last = class(first).unwrap_or(0);
    for b in letters.filter(u8::is_ascii_alphabetic) {
        if code.len() == 4 {
            break;
        }
        match class(b.to_ascii_lowercase()) {
            None => {}
            Some(0) => last = 0,
            Some(d) => {
                if d != last {
                    code.push((b'0' + d) as char);
                }
                last = d;
            }
        }
    }
    while code.len() < 4 {
        code.push('0');
    }
    Ok(code)
}
