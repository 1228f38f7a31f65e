//! Whitespace tokenizer that tracks byte offsets for error reporting.

pub(crate) struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Tokens { bytes, pos: 0 }
    }

    pub(crate) fn next(&mut self) -> Option<(usize, &'a str)> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= self.bytes.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        // Inputs are ASCII; lossy fallback only affects error text.
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("<non-utf8>");
        Some((start, s))
    }
}
