use thiserror::Error;

use super::{BinaryOp, CmpOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: String, found: String },
    #[error("unexpected end of input, expected {0}")]
    UnexpectedEnd(String),
    #[error("invalid number literal '{0}'")]
    InvalidNumber(String),
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("function '{name}' takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("comparison operators are only allowed as the first argument of if(...)")]
    ComparisonOutsideIf,
    #[error("exponent must not depend on the state")]
    StateDependentExponent,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Cmp(CmpOp),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Cmp(c) => format!("'{}'", c.symbol()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

fn err(pos: Pos, kind: ParseErrorKind) -> ParseError {
    ParseError {
        line: pos.line,
        column: pos.column,
        kind,
    }
}

fn tokenize(text: &str) -> Result<(Vec<(Tok, Pos)>, Pos), ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column };
        let start = i;
        let tok = match c {
            '\n' => {
                line += 1;
                column = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                column += 1;
                continue;
            }
            '+' => Tok::Plus,
            '-' | '\u{2212}' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '<' | '>' => {
                let eq = chars.get(i + 1) == Some(&'=');
                if eq {
                    i += 1;
                }
                Tok::Cmp(match (c, eq) {
                    ('<', false) => CmpOp::Lt,
                    ('<', true) => CmpOp::Le,
                    ('>', false) => CmpOp::Gt,
                    _ => CmpOp::Ge,
                })
            }
            c if c.is_ascii_digit() || c == '.' => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit: String = chars[start..i].iter().collect();
                let v: f64 = lit
                    .parse()
                    .map_err(|_| err(pos, ParseErrorKind::InvalidNumber(lit.clone())))?;
                column += i - start;
                out.push((Tok::Num(v), pos));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let name: String = chars[start..i].iter().collect();
                column += i - start;
                out.push((Tok::Ident(name), pos));
                continue;
            }
            other => return Err(err(pos, ParseErrorKind::UnexpectedChar(other))),
        };
        i += 1;
        column += i - start;
        out.push((tok, pos));
    }
    Ok((out, Pos { line, column }))
}

struct Parser<'a> {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
    n: usize,
    params: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<(Tok, Pos)> {
        let t = self.toks.get(self.at).cloned();
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        match self.next() {
            Some((t, _)) if t == want => Ok(()),
            Some((t, p)) => Err(err(
                p,
                ParseErrorKind::Unexpected {
                    expected: want.describe(),
                    found: t.describe(),
                },
            )),
            None => Err(err(self.end, ParseErrorKind::UnexpectedEnd(want.describe()))),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinaryOp::Add,
                Some(Tok::Minus) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.at += 1;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinaryOp::Mul,
                Some(Tok::Slash) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.at += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    // '-' binds looser than '^', so -x^2 is -(x^2).
    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            self.at += 1;
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.at += 1;
        let pos = self.pos();
        let exponent = self.unary()?;
        if exponent.depends_on_state() {
            return Err(err(pos, ParseErrorKind::StateDependentExponent));
        }
        Ok(Expr::pow(base, exponent))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some((tok, pos)) = self.next() else {
            return Err(err(self.end, ParseErrorKind::UnexpectedEnd("an operand".into())));
        };
        match tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.close_paren()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek() == Some(&Tok::LParen) {
                    self.at += 1;
                    self.call(name, pos)
                } else {
                    self.identifier(name, pos)
                }
            }
            Tok::Cmp(_) => Err(err(pos, ParseErrorKind::ComparisonOutsideIf)),
            other => Err(err(
                pos,
                ParseErrorKind::Unexpected {
                    expected: "an operand".into(),
                    found: other.describe(),
                },
            )),
        }
    }

    fn close_paren(&mut self) -> Result<(), ParseError> {
        if let Some(Tok::Cmp(_)) = self.peek() {
            return Err(err(self.pos(), ParseErrorKind::ComparisonOutsideIf));
        }
        self.expect(Tok::RParen)
    }

    fn identifier(&self, name: String, pos: Pos) -> Result<Expr, ParseError> {
        if self.params.contains(&name) {
            return Ok(Expr::Param(name));
        }
        if let Some(idx) = state_index(&name) {
            if (1..=self.n).contains(&idx) {
                return Ok(Expr::Var(idx));
            }
        }
        if UnaryOp::from_name(&name).is_some() || name == "if" {
            return Err(err(
                pos,
                ParseErrorKind::Unexpected {
                    expected: format!("'(' after '{name}'"),
                    found: "no argument list".into(),
                },
            ));
        }
        Err(err(pos, ParseErrorKind::UnknownIdentifier(name)))
    }

    fn call(&mut self, name: String, pos: Pos) -> Result<Expr, ParseError> {
        if name == "if" {
            let lhs = self.expr()?;
            let cmp = match self.next() {
                Some((Tok::Cmp(c), _)) => c,
                Some((t, p)) => {
                    return Err(err(
                        p,
                        ParseErrorKind::Unexpected {
                            expected: "a comparison operator".into(),
                            found: t.describe(),
                        },
                    ))
                }
                None => {
                    return Err(err(
                        self.end,
                        ParseErrorKind::UnexpectedEnd("a comparison operator".into()),
                    ))
                }
            };
            let rhs = self.expr()?;
            let mut args = vec![];
            while self.peek() == Some(&Tok::Comma) {
                self.at += 1;
                args.push(self.expr()?);
            }
            if args.len() != 2 {
                return Err(err(
                    pos,
                    ParseErrorKind::Arity {
                        name,
                        expected: 3,
                        found: args.len() + 1,
                    },
                ));
            }
            self.close_paren()?;
            let otherwise = args.pop().unwrap();
            let then = args.pop().unwrap();
            return Ok(Expr::cond(lhs, cmp, rhs, then, otherwise));
        }
        let Some(op) = UnaryOp::from_name(&name) else {
            return Err(err(pos, ParseErrorKind::UnknownFunction(name)));
        };
        let mut args = vec![self.expr()?];
        while self.peek() == Some(&Tok::Comma) {
            self.at += 1;
            args.push(self.expr()?);
        }
        if args.len() != 1 {
            return Err(err(
                pos,
                ParseErrorKind::Arity {
                    name,
                    expected: 1,
                    found: args.len(),
                },
            ));
        }
        self.close_paren()?;
        Ok(Expr::unary(op, args.pop().unwrap()))
    }
}

/// `x12` -> `Some(12)`.
pub(crate) fn state_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    digits.parse().ok()
}

/// Parses `text` into an expression over `x1..xn` and the given parameters.
///
/// Precedence from loosest to tightest: `+ -`, `* /`, unary minus, `^`
/// (right-associative). Comparisons appear only as the first argument of
/// `if(cmp, then, else)`.
pub fn parse_expr<S: AsRef<str>>(text: &str, n: usize, params: &[S]) -> Result<Expr, ParseError> {
    let (toks, end) = tokenize(text)?;
    let params: Vec<String> = params.iter().map(|p| p.as_ref().to_string()).collect();
    let mut p = Parser {
        toks,
        at: 0,
        end,
        n,
        params: &params,
    };
    let e = p.expr()?;
    match p.next() {
        None => Ok(e),
        Some((Tok::Cmp(_), pos)) => Err(err(pos, ParseErrorKind::ComparisonOutsideIf)),
        Some((t, pos)) => Err(err(
            pos,
            ParseErrorKind::Unexpected {
                expected: "end of input".into(),
                found: t.describe(),
            },
        )),
    }
}
