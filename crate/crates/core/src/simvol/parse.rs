//! Recursive-descent parser for manifold expressions.
//!
//! ```text
//! expr     := name '(' [arg (',' arg)*] ')'
//! arg      := [name '='] value
//! value    := number | interval | 'inf' | expr
//! interval := '[' number ',' (number | 'inf') ']'
//! ```
//!
//! Recognised constructors: `hyperbolic(n, vol)`, `surface(genus)`,
//! `product(a, b)`, `connect_sum(a, b)` and `opaque(dim, simvol, vol)` where
//! `simvol` is a number or an interval and `vol` is optional.

use serde::Serialize;

use super::SimvolError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExprKind {
    Hyperbolic { n: usize, vol: f64 },
    Surface { genus: u64 },
    Product { left: Box<Expr>, right: Box<Expr> },
    ConnectSum { left: Box<Expr>, right: Box<Expr> },
    Opaque { dim: usize, lo: f64, hi: f64, vol: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Expr {
    #[serde(flatten)]
    pub kind: ExprKind,
    pub dim: usize,
    #[serde(skip)]
    pub pos: Position,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Tok<'a> {
    Ident(&'a str),
    Number(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Equals,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    offset: usize,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            offset: 0,
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self, c: char) {
        self.offset += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok<'a>, Position)>, SimvolError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.src[self.offset..].chars().next().filter(|c| c.is_whitespace()) {
                self.bump(c);
            }
            let pos = Position {
                line: self.line,
                column: self.column,
            };
            let rest = &self.src[self.offset..];
            let Some(c) = rest.chars().next() else {
                out.push((Tok::End, pos));
                return Ok(out);
            };
            let single = match c {
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                '[' => Some(Tok::LBracket),
                ']' => Some(Tok::RBracket),
                ',' => Some(Tok::Comma),
                '=' => Some(Tok::Equals),
                _ => None,
            };
            if let Some(t) = single {
                self.bump(c);
                out.push((t, pos));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let len = rest.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(rest.len());
                let word = &rest[..len];
                word.chars().for_each(|c| self.bump(c));
                out.push((Tok::Ident(word), pos));
            } else if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' {
                let len = number_len(rest);
                let text = &rest[..len];
                let value: f64 = text.parse().map_err(|_| SimvolError::Syntax {
                    line: pos.line,
                    column: pos.column,
                    message: format!("malformed number '{text}'"),
                })?;
                text.chars().for_each(|c| self.bump(c));
                out.push((Tok::Number(value), pos));
            } else {
                return Err(SimvolError::Syntax {
                    line: pos.line,
                    column: pos.column,
                    message: format!("unexpected character '{c}'"),
                });
            }
        }
    }
}

fn number_len(s: &str) -> usize {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'-' || b[i] == b'+') {
        i += 1;
    }
    while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
        i += 1;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'-' || b[j] == b'+') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            i = j;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    i.max(1)
}

#[derive(Clone, Debug)]
enum Value {
    Number(f64),
    Interval(f64, f64),
    Expr(Expr),
}

struct Arg {
    name: Option<String>,
    value: Value,
    pos: Position,
}

struct Parser<'a> {
    toks: Vec<(Tok<'a>, Position)>,
    at: usize,
}

fn syntax(pos: Position, message: impl Into<String>) -> SimvolError {
    SimvolError::Syntax {
        line: pos.line,
        column: pos.column,
        message: message.into(),
    }
}

fn semantic(pos: Position, message: impl Into<String>) -> SimvolError {
    SimvolError::Semantic {
        line: pos.line,
        column: pos.column,
        message: message.into(),
    }
}

impl<'a> Parser<'a> {
    fn peek(&self) -> (Tok<'a>, Position) {
        self.toks[self.at]
    }

    fn next(&mut self) -> (Tok<'a>, Position) {
        let t = self.toks[self.at];
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok<'static>, what: &str) -> Result<Position, SimvolError> {
        let (t, pos) = self.next();
        if t == want {
            Ok(pos)
        } else {
            Err(syntax(pos, format!("expected {what}, found {}", describe(t))))
        }
    }

    fn expr(&mut self) -> Result<Expr, SimvolError> {
        let (t, pos) = self.next();
        let Tok::Ident(name) = t else {
            return Err(syntax(pos, format!("expected a constructor name, found {}", describe(t))));
        };
        self.expect(Tok::LParen, "'('")?;
        let mut args = Vec::new();
        if self.peek().0 != Tok::RParen {
            loop {
                args.push(self.arg()?);
                match self.next() {
                    (Tok::Comma, _) => continue,
                    (Tok::RParen, _) => break,
                    (t, p) => return Err(syntax(p, format!("expected ',' or ')', found {}", describe(t)))),
                }
            }
        } else {
            self.next();
        }
        build(name, pos, args)
    }

    fn arg(&mut self) -> Result<Arg, SimvolError> {
        let pos = self.peek().1;
        let mut name = None;
        if let (Tok::Ident(id), _) = self.peek() {
            if self.toks.get(self.at + 1).map(|t| t.0) == Some(Tok::Equals) {
                name = Some(id.to_string());
                self.next();
                self.next();
            }
        }
        let value = self.value()?;
        Ok(Arg { name, value, pos })
    }

    fn value(&mut self) -> Result<Value, SimvolError> {
        match self.peek() {
            (Tok::Number(x), _) => {
                self.next();
                Ok(Value::Number(x))
            }
            (Tok::Ident("inf"), _) => {
                self.next();
                Ok(Value::Number(f64::INFINITY))
            }
            (Tok::LBracket, _) => {
                self.next();
                let lo = self.bound()?;
                self.expect(Tok::Comma, "','")?;
                let hi = self.bound()?;
                self.expect(Tok::RBracket, "']'")?;
                Ok(Value::Interval(lo, hi))
            }
            (Tok::Ident(_), _) => Ok(Value::Expr(self.expr()?)),
            (t, pos) => Err(syntax(pos, format!("expected a value, found {}", describe(t)))),
        }
    }

    fn bound(&mut self) -> Result<f64, SimvolError> {
        match self.next() {
            (Tok::Number(x), _) => Ok(x),
            (Tok::Ident("inf"), _) => Ok(f64::INFINITY),
            (t, pos) => Err(syntax(pos, format!("expected a number, found {}", describe(t)))),
        }
    }
}

fn describe(t: Tok<'_>) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Number(x) => format!("number {x}"),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::LBracket => "'['".into(),
        Tok::RBracket => "']'".into(),
        Tok::Comma => "','".into(),
        Tok::Equals => "'='".into(),
        Tok::End => "end of input".into(),
    }
}

/// Binds positional and named arguments to the parameter list `params`.
fn bind(name: &str, pos: Position, params: &[&str], required: usize, args: Vec<Arg>) -> Result<Vec<Option<(Value, Position)>>, SimvolError> {
    let mut slots: Vec<Option<(Value, Position)>> = vec![None; params.len()];
    let mut positional = 0;
    let mut seen_named = false;
    for arg in args {
        let idx = match &arg.name {
            Some(n) => {
                seen_named = true;
                params
                    .iter()
                    .position(|p| p == n)
                    .ok_or_else(|| semantic(arg.pos, format!("{name} has no parameter '{n}'")))?
            }
            None => {
                if seen_named {
                    return Err(syntax(arg.pos, "positional argument after a named one"));
                }
                positional += 1;
                if positional > params.len() {
                    return Err(semantic(arg.pos, format!("{name} takes at most {} arguments", params.len())));
                }
                positional - 1
            }
        };
        if slots[idx].is_some() {
            return Err(semantic(arg.pos, format!("parameter '{}' given twice", params[idx])));
        }
        slots[idx] = Some((arg.value, arg.pos));
    }
    for (i, p) in params.iter().enumerate().take(required) {
        if slots[i].is_none() {
            return Err(semantic(pos, format!("{name} is missing parameter '{p}'")));
        }
    }
    Ok(slots)
}

fn number(v: (Value, Position), what: &str) -> Result<(f64, Position), SimvolError> {
    match v {
        (Value::Number(x), p) => Ok((x, p)),
        (_, p) => Err(semantic(p, format!("{what} must be a number"))),
    }
}

fn integer(v: (Value, Position), what: &str) -> Result<(u64, Position), SimvolError> {
    let (x, p) = number(v, what)?;
    if x.fract() != 0.0 || x < 0.0 || !x.is_finite() {
        return Err(semantic(p, format!("{what} must be a non-negative integer, got {x}")));
    }
    Ok((x as u64, p))
}

fn subexpr(v: (Value, Position), what: &str) -> Result<Expr, SimvolError> {
    match v {
        (Value::Expr(e), _) => Ok(e),
        (_, p) => Err(semantic(p, format!("{what} must be a manifold expression"))),
    }
}

fn positive_volume(v: (Value, Position)) -> Result<f64, SimvolError> {
    let (x, p) = number(v, "vol")?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(semantic(p, format!("vol must be positive and finite, got {x}")));
    }
    Ok(x)
}

fn build(name: &str, pos: Position, args: Vec<Arg>) -> Result<Expr, SimvolError> {
    let take = |slots: &mut Vec<Option<(Value, Position)>>, i: usize| slots[i].take();
    match name {
        "hyperbolic" => {
            let mut s = bind(name, pos, &["n", "vol"], 2, args)?;
            let (n, np) = integer(take(&mut s, 0).unwrap(), "n")?;
            if n < 2 {
                return Err(semantic(np, format!("hyperbolic dimension must be at least 2, got {n}")));
            }
            let vol = positive_volume(take(&mut s, 1).unwrap())?;
            Ok(Expr {
                kind: ExprKind::Hyperbolic { n: n as usize, vol },
                dim: n as usize,
                pos,
            })
        }
        "surface" => {
            let mut s = bind(name, pos, &["genus"], 1, args)?;
            let (g, gp) = integer(take(&mut s, 0).unwrap(), "genus")?;
            if g < 2 {
                return Err(semantic(gp, format!("genus must be at least 2, got {g}")));
            }
            Ok(Expr {
                kind: ExprKind::Surface { genus: g },
                dim: 2,
                pos,
            })
        }
        "product" | "connect_sum" => {
            let mut s = bind(name, pos, &["left", "right"], 2, args)?;
            let left = subexpr(take(&mut s, 0).unwrap(), "left")?;
            let right = subexpr(take(&mut s, 1).unwrap(), "right")?;
            if name == "product" {
                let dim = left.dim + right.dim;
                return Ok(Expr {
                    kind: ExprKind::Product {
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                    dim,
                    pos,
                });
            }
            if left.dim != right.dim {
                return Err(semantic(
                    pos,
                    format!("connect_sum needs equal dimensions, got {} and {}", left.dim, right.dim),
                ));
            }
            if left.dim < 3 {
                return Err(semantic(pos, format!("connect_sum needs dimension at least 3, got dimension {}", left.dim)));
            }
            let dim = left.dim;
            Ok(Expr {
                kind: ExprKind::ConnectSum {
                    left: Box::new(left),
                    right: Box::new(right),
                },
                dim,
                pos,
            })
        }
        "opaque" => {
            let mut s = bind(name, pos, &["dim", "simvol", "vol"], 2, args)?;
            let (dim, dp) = integer(take(&mut s, 0).unwrap(), "dim")?;
            if dim < 1 {
                return Err(semantic(dp, "dim must be at least 1"));
            }
            let (lo, hi, ip) = match take(&mut s, 1).unwrap() {
                (Value::Number(x), p) => (x, x, p),
                (Value::Interval(lo, hi), p) => (lo, hi, p),
                (_, p) => return Err(semantic(p, "simvol must be a number or an interval")),
            };
            if !(lo >= 0.0) || !(lo <= hi) || lo.is_infinite() {
                return Err(semantic(ip, format!("simvol interval [{lo}, {hi}] must satisfy 0 <= lo <= hi")));
            }
            let vol = take(&mut s, 2).map(positive_volume).transpose()?;
            Ok(Expr {
                kind: ExprKind::Opaque {
                    dim: dim as usize,
                    lo,
                    hi,
                    vol,
                },
                dim: dim as usize,
                pos,
            })
        }
        other => Err(semantic(pos, format!("unknown constructor '{other}'"))),
    }
}

pub fn parse(text: &str) -> Result<Expr, SimvolError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, at: 0 };
    let e = p.expr()?;
    match p.next() {
        (Tok::End, _) => Ok(e),
        (t, pos) => Err(syntax(pos, format!("unexpected {} after expression", describe(t)))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_constructors() {
        let e = parse("surface(genus=2)").unwrap();
        assert_eq!(e.kind, ExprKind::Surface { genus: 2 });
        assert_eq!(e.dim, 2);
        let p = parse("product(surface(genus=2),\n  surface(2))").unwrap();
        assert_eq!(p.dim, 4);
        let h = parse(" hyperbolic( 3 , vol = 2.5e0 ) ").unwrap();
        assert_eq!(h.kind, ExprKind::Hyperbolic { n: 3, vol: 2.5 });
        let o = parse("opaque(dim=3, simvol=[2, inf])").unwrap();
        assert!(matches!(o.kind, ExprKind::Opaque { hi, vol: None, .. } if hi.is_infinite()));
    }

    #[test]
    fn reports_positions() {
        match parse("product(surface(genus=2),\n  surface(genus=2) x)") {
            Err(SimvolError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 20)),
            other => panic!("{other:?}"),
        }
        match parse("connect_sum(surface(genus=2), surface(genus=2))") {
            Err(SimvolError::Semantic { message, .. }) => assert!(message.contains("dimension 2")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("surface(genus=1)"), Err(SimvolError::Semantic { .. })));
        assert!(matches!(parse("torus()"), Err(SimvolError::Semantic { .. })));
        assert!(matches!(parse("surface(genus=2"), Err(SimvolError::Syntax { .. })));
        assert!(matches!(parse("surface(genus=2) extra"), Err(SimvolError::Syntax { .. })));
        assert!(matches!(parse("opaque(dim=3, simvol=[3, 2])"), Err(SimvolError::Semantic { .. })));
        assert!(matches!(parse("hyperbolic(3, vol=-1)"), Err(SimvolError::Semantic { .. })));
        assert!(matches!(parse("surface(genus=2, genus=3)"), Err(SimvolError::Semantic { .. })));
    }
}
