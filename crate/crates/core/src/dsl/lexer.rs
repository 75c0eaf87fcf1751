use std::collections::BTreeSet;

use super::{ParseError, Position};

#[derive(Debug, Clone, PartialEq)]
pub(super) enum TokenKind {
    Ident(String),
    Str(String),
    /// Raw numeric text; interpreted by the parser.
    Number(String),
    Dot,
    Equals,
}

impl TokenKind {
    pub(super) fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Str(s) => format!("string {s:?}"),
            TokenKind::Number(n) => format!("number `{n}`"),
            TokenKind::Dot => "`.`".into(),
            TokenKind::Equals => "`=`".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(super) struct Token {
    pub kind: TokenKind,
    pub start: Position,
    pub end: Position,
}

pub(super) struct Lexer<'a> {
    src: &'a str,
    offset: usize,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a str) -> Self {
        Self {
            src,
            offset: 0,
            line: 1,
            column: 1,
        }
    }

    fn position(&self) -> Position {
        Position {
            offset: self.offset,
            line: self.line,
            column: self.column,
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.offset..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, at: Position, expected: &[&str], found: String) -> ParseError {
        ParseError {
            at,
            expected: expected.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
            found,
        }
    }

    fn found_here(&self) -> String {
        match self.peek() {
            Some(c) => format!("{c:?}"),
            None => "end of input".into(),
        }
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    /// Position just past the last non-trivia input.
    pub fn eof_position(&mut self) -> Position {
        self.skip_trivia();
        self.position()
    }

    pub fn next_token(&mut self) -> Result<Option<Token>, ParseError> {
        self.skip_trivia();
        let start = self.position();
        let Some(c) = self.peek() else {
            return Ok(None);
        };
        let kind = match c {
            'a'..='z' => {
                let mut text = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' {
                        text.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                TokenKind::Ident(text)
            }
            '"' => {
                self.bump();
                let mut text = String::new();
                loop {
                    match self.peek() {
                        None => {
                            return Err(self.error(self.position(), &["`\"`"], "end of input".into()))
                        }
                        Some('"') => {
                            self.bump();
                            break;
                        }
                        Some('\\') => {
                            let escape_at = self.position();
                            self.bump();
                            match self.peek() {
                                Some(e @ ('"' | '\\')) => {
                                    text.push(e);
                                    self.bump();
                                }
                                _ => {
                                    return Err(self.error(
                                        escape_at,
                                        &["`\\\"`", "`\\\\`"],
                                        format!("escape {}", self.found_here()),
                                    ))
                                }
                            }
                        }
                        Some(c) => {
                            text.push(c);
                            self.bump();
                        }
                    }
                }
                TokenKind::Str(text)
            }
            '+' | '-' | '0'..='9' => {
                let mut text = String::new();
                if c == '+' || c == '-' {
                    text.push(c);
                    self.bump();
                }
                self.digits(&mut text)?;
                if self.peek() == Some('.') {
                    text.push('.');
                    self.bump();
                    self.digits(&mut text)?;
                }
                TokenKind::Number(text)
            }
            '.' => {
                self.bump();
                TokenKind::Dot
            }
            '=' => {
                self.bump();
                TokenKind::Equals
            }
            _ => {
                return Err(self.error(
                    start,
                    &["identifier", "string", "number", "`.`", "`=`"],
                    self.found_here(),
                ))
            }
        };
        Ok(Some(Token {
            kind,
            start,
            end: self.position(),
        }))
    }

    fn digits(&mut self, text: &mut String) -> Result<(), ParseError> {
        let before = text.len();
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            text.push(c);
            self.bump();
        }
        if text.len() == before {
            return Err(self.error(self.position(), &["digit"], self.found_here()));
        }
        Ok(())
    }
}
