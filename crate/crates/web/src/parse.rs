//! A small text syntax for formulas, used by the explorers.
//!
//! ```text
//! formula := disj ("=>" disj)?
//! disj    := conj (("\/" | "or") conj)*
//! conj    := unary (("/\" | "and") unary)*
//! unary   := "not" unary | "(" formula ")" | expr rel expr
//! expr    := term (("+" | "-") term)*
//! term    := factor ("*" factor)*
//! factor  := int | ident | "-" factor | "(" expr ")"
//! rel     := "<=" | "<" | ">=" | ">" | "=" | "!="
//! ```

use domcoop::formula::{cst, var, Expr, Formula, Rel};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(i64),
    Ident(String),
    Sym(&'static str),
}

const SYMBOLS: [&str; 15] =
    ["<=", ">=", "!=", "=>", "/\\", "\\/", "..", "<", ">", "=", "+", "-", "*", "(", ")"];

fn lex(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let b = s.as_bytes();
    let mut i = 0;
    'outer: while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let v = s[start..i].parse().map_err(|_| format!("number too large: {}", &s[start..i]))?;
            out.push(Tok::Int(v));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Ident(s[start..i].to_string()));
            continue;
        }
        for sym in SYMBOLS {
            if s[i..].starts_with(sym) {
                out.push(Tok::Sym(sym));
                i += sym.len();
                continue 'outer;
            }
        }
        return Err(format!("unexpected character `{c}`"));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == w) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), String> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(format!("expected `{sym}`"))
        }
    }

    fn formula(&mut self) -> Result<Formula, String> {
        let lhs = self.disj()?;
        if self.eat_sym("=>") {
            Ok(lhs.implies(self.disj()?))
        } else {
            Ok(lhs)
        }
    }

    fn disj(&mut self) -> Result<Formula, String> {
        let mut f = self.conj()?;
        while self.eat_sym("\\/") || self.eat_word("or") {
            f = f.or(self.conj()?);
        }
        Ok(f)
    }

    fn conj(&mut self) -> Result<Formula, String> {
        let mut f = self.unary()?;
        while self.eat_sym("/\\") || self.eat_word("and") {
            f = f.and(self.unary()?);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, String> {
        if self.eat_word("not") {
            return Ok(self.unary()?.negated());
        }
        let save = self.pos;
        match self.atom() {
            Ok(a) => Ok(a),
            Err(e) => {
                self.pos = save;
                if self.eat_sym("(") {
                    let f = self.formula()?;
                    self.expect_sym(")")?;
                    Ok(f)
                } else {
                    Err(e)
                }
            }
        }
    }

    fn atom(&mut self) -> Result<Formula, String> {
        let l = self.expr()?;
        let rel = match self.peek() {
            Some(Tok::Sym("<=")) => Rel::Le,
            Some(Tok::Sym("<")) => Rel::Lt,
            Some(Tok::Sym(">=")) => Rel::Ge,
            Some(Tok::Sym(">")) => Rel::Gt,
            Some(Tok::Sym("=")) => Rel::Eq,
            Some(Tok::Sym("!=")) => Rel::Neq,
            _ => return Err("expected a comparison".into()),
        };
        self.pos += 1;
        let r = self.expr()?;
        Ok(Formula::atom(l, rel, r))
    }

    fn expr(&mut self) -> Result<Expr, String> {
        let mut e = self.term()?;
        loop {
            if self.eat_sym("+") {
                e = e + self.term()?;
            } else if self.eat_sym("-") {
                e = e - self.term()?;
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, String> {
        let mut e = self.factor()?;
        while self.eat_sym("*") {
            e = e * self.factor()?;
        }
        Ok(e)
    }

    fn factor(&mut self) -> Result<Expr, String> {
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(cst(v))
            }
            Some(Tok::Ident(name)) if !["and", "or", "not", "in"].contains(&name.as_str()) => {
                self.pos += 1;
                Ok(var(name))
            }
            Some(Tok::Sym("-")) => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => Err("expected a number, a variable or `(`".into()),
        }
    }

    fn done(&self) -> Result<(), String> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(format!("unexpected {t:?}")),
        }
    }
}

/// One line of the explorers: a variable domain or a constraint.
#[derive(Clone, Debug, PartialEq)]
pub enum Line {
    Domain(String, i64, i64),
    Constraint(Formula),
}

fn signed(p: &mut Parser) -> Result<i64, String> {
    let neg = p.eat_sym("-");
    match p.peek().cloned() {
        Some(Tok::Int(v)) => {
            p.pos += 1;
            Ok(if neg { -v } else { v })
        }
        _ => Err("expected an integer".into()),
    }
}

/// Parses `x in lo..hi` or a formula.
pub fn parse_line(s: &str) -> Result<Line, String> {
    let toks = lex(s)?;
    let mut p = Parser { toks, pos: 0 };
    if let (Some(Tok::Ident(x)), Some(Tok::Ident(kw))) = (p.toks.first().cloned(), p.toks.get(1).cloned()) {
        if kw == "in" {
            p.pos = 2;
            let lo = signed(&mut p)?;
            p.expect_sym("..")?;
            let hi = signed(&mut p)?;
            p.done()?;
            return Ok(Line::Domain(x, lo, hi));
        }
    }
    let f = p.formula()?;
    p.done()?;
    Ok(Line::Constraint(f))
}

/// Non-empty lines without `#` comments, with 1-based line numbers.
pub fn parse_lines(text: &str) -> Result<Vec<Line>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_line(line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Formula {
        match parse_line(s).unwrap() {
            Line::Constraint(f) => f,
            l => panic!("{l:?}"),
        }
    }

    #[test]
    fn precedence_and_grouping() {
        assert_eq!(f("x + 2 * y <= 3"), (var("x") + cst(2) * var("y")).le(3));
        assert_eq!(f("x - y - 1 < 0"), ((var("x") - var("y")) - cst(1)).lt(0));
        assert_eq!(f("(x + 1) * y = 4"), ((var("x") + cst(1)) * var("y")).eq_to(4));
        assert_eq!(f("-x >= -2"), (-var("x")).ge(-cst(2)));
    }

    #[test]
    fn connectives() {
        let a = var("x").le(1);
        let b = var("y").ge(2);
        assert_eq!(f("x <= 1 \\/ y >= 2"), a.clone().or(b.clone()));
        assert_eq!(f("x <= 1 and y >= 2"), a.clone().and(b.clone()));
        assert_eq!(f("x <= 1 => y >= 2"), a.clone().implies(b.clone()));
        assert_eq!(f("not (x <= 1 or y >= 2)"), a.clone().or(b.clone()).negated());
        assert_eq!(f("(x <= 1) /\\ (y >= 2)"), a.and(b));
    }

    #[test]
    fn domains_and_errors() {
        assert_eq!(parse_line("x in -3..4").unwrap(), Line::Domain("x".into(), -3, 4));
        assert!(parse_line("x <=").is_err());
        assert!(parse_line("x <= 1 )").is_err());
        assert!(parse_line("x ? 1").is_err());
        let lines = parse_lines("# c\nx in 0..2\n\nx != 1 # no\n").unwrap();
        assert_eq!(lines.len(), 2);
        assert!(parse_lines("x in 0..2\nx <").unwrap_err().starts_with("line 2"));
    }
}
