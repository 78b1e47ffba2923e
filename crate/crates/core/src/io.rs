//! The tensor text format.
//!
//! Line 1 is a header `tensor K d1 d2 ... dK`; the remaining tokens are the
//! entries in vectorization order, whitespace-separated. Values are written
//! with 17 significant digits so that reading a written file reproduces the
//! tensor exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::tensor::Tensor;

/// Parse failure with the position of the offending token.
#[derive(Debug, Clone, thiserror::Error)]
#[error("parse error at line {line}, column {column} (byte {offset}): {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub offset: usize,
    pub message: String,
}

struct Tokens<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

struct Token<'a> {
    text: &'a str,
    line: usize,
    col: usize,
    offset: usize,
}

impl<'a> Tokens<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0, line: 1, col: 1 }
    }

    fn bump(&mut self, c: char) {
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
    }

    fn next_token(&mut self) -> Option<Token<'a>> {
        let chars = self.src[self.pos..].chars();
        for c in chars {
            if c.is_whitespace() {
                self.bump(c);
            } else {
                break;
            }
        }
        if self.pos >= self.src.len() {
            return None;
        }
        let start = self.pos;
        let (line, col) = (self.line, self.col);
        let chars = self.src[self.pos..].chars();
        for c in chars {
            if c.is_whitespace() {
                break;
            }
            self.bump(c);
        }
        Some(Token {
            text: &self.src[start..self.pos],
            line,
            col,
            offset: start,
        })
    }

    fn err_here(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.col,
            offset: self.pos.min(self.src.len()),
            message: message.into(),
        }
    }
}

fn err_at(tok: &Token<'_>, message: impl Into<String>) -> ParseError {
    ParseError {
        line: tok.line,
        column: tok.col,
        offset: tok.offset,
        message: message.into(),
    }
}

/// Parse a tensor from text in the tensor text format.
pub fn parse_tensor(src: &str) -> std::result::Result<Tensor, ParseError> {
    let mut toks = Tokens::new(src);
    let magic = toks
        .next_token()
        .ok_or_else(|| toks.err_here("empty input; expected `tensor` header"))?;
    if magic.text != "tensor" {
        return Err(err_at(&magic, format!("expected `tensor`, found `{}`", magic.text)));
    }
    let k_tok = toks
        .next_token()
        .ok_or_else(|| toks.err_here("expected mode count after `tensor`"))?;
    let order: usize = k_tok
        .text
        .parse()
        .map_err(|_| err_at(&k_tok, format!("invalid mode count `{}`", k_tok.text)))?;
    if order == 0 {
        return Err(err_at(&k_tok, "mode count must be at least 1"));
    }
    let mut shape = Vec::with_capacity(order);
    for m in 0..order {
        let d = toks
            .next_token()
            .ok_or_else(|| toks.err_here(format!("expected size of mode {}", m + 1)))?;
        let size: usize = d
            .text
            .parse()
            .map_err(|_| err_at(&d, format!("invalid mode size `{}`", d.text)))?;
        if size == 0 {
            return Err(err_at(&d, "mode sizes must be positive"));
        }
        shape.push(size);
    }
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let v = toks.next_token().ok_or_else(|| {
            toks.err_here(format!("expected {} values, found only {}", n, i))
        })?;
        let x: f64 = v
            .text
            .parse()
            .map_err(|_| err_at(&v, format!("invalid value `{}`", v.text)))?;
        data.push(x);
    }
    if let Some(extra) = toks.next_token() {
        return Err(err_at(&extra, format!("trailing token `{}` after {} values", extra.text, n)));
    }
    Ok(Tensor::new(shape, data).expect("validated dimensions"))
}

/// Render a tensor in the tensor text format.
pub fn format_tensor(t: &Tensor) -> String {
    let mut out = String::new();
    write!(out, "tensor {}", t.order()).unwrap();
    for d in t.shape() {
        write!(out, " {d}").unwrap();
    }
    out.push('\n');
    for (i, v) in t.data().iter().enumerate() {
        // 17 significant digits round-trips any f64
        write!(out, "{v:.16e}").unwrap();
        if (i + 1) % 8 == 0 || i + 1 == t.len() {
            out.push('\n');
        } else {
            out.push(' ');
        }
    }
    out
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<Tensor> {
    let src = fs::read_to_string(path)?;
    Ok(parse_tensor(&src)?)
}

pub fn write_tensor_file(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(format_tensor(t).as_bytes())?;
    Ok(())
}
