//! Recursive-descent parser for the problem file format.
//!
//! ```text
//! vars x, y, z;
//! common x, y;
//! phi: y - x^2 >= 0 && z > 0;
//! psi: y + cos(x) - 0.8 <= 0;
//! degree: 2;
//! option box = 10;
//! ```

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use super::{Expr, Formula, FormulaError, Problem, Rel};
use crate::Rational;

const FUNCTIONS: [&str; 4] = ["sin", "cos", "exp", "log"];
const KEYWORDS: [&str; 6] = ["vars", "common", "phi", "psi", "degree", "option"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    /// Literal value plus whether it was written as a plain integer.
    Num(Rational, bool),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    text: String,
}

const SYMBOLS: [&str; 18] = [
    "&&", "||", "<=", ">=", "<", ">", "=", "!", "+", "-", "*", "/", "^", "(", ")", ",", ";", ":",
];

fn err(line: usize, col: usize, message: impl Into<String>) -> FormulaError {
    FormulaError::Parse {
        line,
        col,
        message: message.into(),
    }
}

fn parse_number(s: &str) -> Option<Rational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    let digits = format!("{int_part}{frac_part}");
    if digits.is_empty() {
        return None;
    }
    let numer: BigInt = digits.parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    })
}

fn tokenize(text: &str) -> Result<Vec<Token>, FormulaError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            col += j - i;
            i = j;
            out.push(Token {
                tok: Tok::Ident(s.clone()),
                line: start.0,
                col: start.1,
                text: s,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let s: String = chars[i..j].iter().collect();
            let value = parse_number(&s).ok_or_else(|| err(line, col, format!("bad number `{s}`")))?;
            let is_int = !s.contains(['.', 'e', 'E']);
            col += j - i;
            i = j;
            out.push(Token {
                tok: Tok::Num(value, is_int),
                line: start.0,
                col: start.1,
                text: s,
            });
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let sym = SYMBOLS
            .iter()
            .find(|s| rest.starts_with(**s))
            .ok_or_else(|| err(line, col, format!("unexpected character `{c}`")))?;
        i += sym.len();
        col += sym.len();
        out.push(Token {
            tok: Tok::Sym(sym),
            line: start.0,
            col: start.1,
            text: sym.to_string(),
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
        text: String::new(),
    });
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    vars: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Token {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(x) if *x == s)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), FormulaError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            let t = self.peek();
            Err(err(t.line, t.col, format!("expected `{s}`, found `{}`", t.text)))
        }
    }

    fn error_here(&self, message: impl Into<String>) -> FormulaError {
        let t = self.peek();
        err(t.line, t.col, message)
    }

    fn formula(&mut self) -> Result<Formula, FormulaError> {
        let mut f = self.conjunction()?;
        while self.is_sym("||") {
            self.bump();
            f = Formula::or(f, self.conjunction()?);
        }
        Ok(f)
    }

    fn conjunction(&mut self) -> Result<Formula, FormulaError> {
        let mut f = self.negation()?;
        while self.is_sym("&&") {
            self.bump();
            f = Formula::and(f, self.negation()?);
        }
        Ok(f)
    }

    fn negation(&mut self) -> Result<Formula, FormulaError> {
        if self.is_sym("!") {
            self.bump();
            return Ok(Formula::not(self.negation()?));
        }
        if self.is_sym("(") {
            let save = self.pos;
            match self.atom() {
                Ok(a) => return Ok(a),
                Err(atom_err) => {
                    self.pos = save;
                    self.bump();
                    let inner = self.formula();
                    return match inner.and_then(|f| self.expect_sym(")").map(|_| f)) {
                        Ok(f) => Ok(f),
                        Err(paren_err) => Err(later_error(atom_err, paren_err)),
                    };
                }
            }
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula, FormulaError> {
        let lhs = self.expr()?;
        let rel = match &self.peek().tok {
            Tok::Sym("<") => Rel::Lt,
            Tok::Sym(">") => Rel::Gt,
            Tok::Sym("<=") => Rel::Le,
            Tok::Sym(">=") => Rel::Ge,
            Tok::Sym("=") => Rel::Eq,
            _ => return Err(self.error_here(format!("expected a relation, found `{}`", self.peek().text))),
        };
        self.bump();
        let rhs = self.expr()?;
        let lhs = if rhs.is_zero_const() {
            lhs
        } else {
            Expr::Sub(Box::new(lhs), Box::new(rhs))
        };
        Ok(Formula::atom(lhs, rel))
    }

    fn expr(&mut self) -> Result<Expr, FormulaError> {
        let mut e = self.term()?;
        loop {
            if self.is_sym("+") {
                self.bump();
                e = Expr::Add(Box::new(e), Box::new(self.term()?));
            } else if self.is_sym("-") {
                self.bump();
                e = Expr::Sub(Box::new(e), Box::new(self.term()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, FormulaError> {
        let mut e = self.unary()?;
        loop {
            if self.is_sym("*") {
                self.bump();
                e = Expr::Mul(Box::new(e), Box::new(self.unary()?));
            } else if self.is_sym("/") {
                let (line, col) = (self.peek().line, self.peek().col);
                self.bump();
                let divisor = self.unary()?;
                let d = divisor
                    .const_value()
                    .ok_or_else(|| err(line, col, "division is only supported by constants"))?;
                if d.is_zero() {
                    return Err(err(line, col, "division by zero"));
                }
                e = match e {
                    Expr::Const(n) => Expr::Const(n / d),
                    other => Expr::Mul(Box::new(other), Box::new(Expr::Const(d.recip()))),
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, FormulaError> {
        if self.is_sym("-") {
            self.bump();
            // `-3` is a negative literal unless an exponent follows.
            if let Tok::Num(q, _) = &self.peek().tok {
                if !matches!(self.peek_at(1).tok, Tok::Sym("^")) {
                    let q = -q.clone();
                    self.bump();
                    return Ok(Expr::Const(q));
                }
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, FormulaError> {
        let base = self.primary()?;
        if !self.is_sym("^") {
            return Ok(base);
        }
        self.bump();
        let t = self.peek().clone();
        let n = match &t.tok {
            Tok::Num(q, true) => q.to_integer(),
            Tok::Num(_, false) => {
                return Err(FormulaError::BadDegree {
                    line: t.line,
                    col: t.col,
                    message: format!("exponent `{}` is not a natural number", t.text),
                })
            }
            _ => return Err(err(t.line, t.col, "expected a natural exponent after `^`")),
        };
        self.bump();
        if n.is_zero() || n.is_negative() || n > BigInt::from(u32::MAX) {
            return Err(FormulaError::BadDegree {
                line: t.line,
                col: t.col,
                message: format!("exponent must be >= 1, got {n}"),
            });
        }
        if self.is_sym("^") {
            return Err(self.error_here("chained exponents need parentheses"));
        }
        let n: u32 = n.try_into().expect("bounded above");
        Ok(Expr::Pow(Box::new(base), n))
    }

    fn primary(&mut self) -> Result<Expr, FormulaError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Num(q, _) => {
                self.bump();
                Ok(Expr::Const(q.clone()))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) if FUNCTIONS.contains(&name.as_str()) => {
                self.bump();
                self.expect_sym("(")?;
                let arg = Box::new(self.expr()?);
                self.expect_sym(")")?;
                Ok(match name.as_str() {
                    "sin" => Expr::Sin(arg),
                    "cos" => Expr::Cos(arg),
                    "exp" => Expr::Exp(arg),
                    _ => Expr::Log(arg),
                })
            }
            Tok::Ident(name) => {
                self.bump();
                self.vars
                    .iter()
                    .position(|v| v == name)
                    .map(Expr::Var)
                    .ok_or(FormulaError::UndeclaredVariable {
                        name: name.clone(),
                        line: t.line,
                        col: t.col,
                    })
            }
            _ => Err(err(t.line, t.col, format!("unexpected `{}`", t.text))),
        }
    }

    fn expect_end(&self) -> Result<(), FormulaError> {
        match self.peek().tok {
            Tok::Eof | Tok::Sym(";") => Ok(()),
            _ => Err(self.error_here(format!("unexpected `{}`", self.peek().text))),
        }
    }
}

fn later_error(a: FormulaError, b: FormulaError) -> FormulaError {
    let pos = |e: &FormulaError| match e {
        FormulaError::Parse { line, col, .. }
        | FormulaError::UndeclaredVariable { line, col, .. }
        | FormulaError::BadDegree { line, col, .. } => (*line, *col),
    };
    if pos(&a) >= pos(&b) {
        a
    } else {
        b
    }
}

/// Parses a formula over the given variable names.
pub fn parse_formula(text: &str, vars: &[String]) -> Result<Formula, FormulaError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks: &toks, pos: 0, vars };
    let f = p.formula()?;
    if !matches!(p.peek().tok, Tok::Eof) {
        return Err(p.error_here(format!("unexpected `{}`", p.peek().text)));
    }
    Ok(f)
}

pub fn parse_expr(text: &str, vars: &[String]) -> Result<Expr, FormulaError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks: &toks, pos: 0, vars };
    let e = p.expr()?;
    if !matches!(p.peek().tok, Tok::Eof) {
        return Err(p.error_here(format!("unexpected `{}`", p.peek().text)));
    }
    Ok(e)
}

fn name_list(stmt: &[Token]) -> Result<Vec<(String, usize, usize)>, FormulaError> {
    let mut names = Vec::new();
    for t in stmt {
        match &t.tok {
            Tok::Ident(n) => names.push((n.clone(), t.line, t.col)),
            Tok::Sym(",") => {}
            _ => return Err(err(t.line, t.col, format!("expected a variable name, found `{}`", t.text))),
        }
    }
    Ok(names)
}

/// Parses a complete problem description.
pub fn parse_problem(text: &str) -> Result<Problem, FormulaError> {
    let toks = tokenize(text)?;
    let eof = toks.last().cloned().expect("tokenizer emits Eof");

    // Split into `;`-terminated statements.
    let mut stmts: Vec<&[Token]> = Vec::new();
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        match t.tok {
            Tok::Sym(";") => {
                stmts.push(&toks[start..=i]);
                start = i + 1;
            }
            Tok::Eof => {
                if start < i {
                    let t = &toks[start];
                    return Err(err(t.line, t.col, "statement is missing its terminating `;`"));
                }
            }
            _ => {}
        }
    }

    let keyword = |s: &[Token]| match &s[0].tok {
        Tok::Ident(k) if KEYWORDS.contains(&k.as_str()) => Ok(k.clone()),
        _ => Err(err(s[0].line, s[0].col, format!("expected a declaration, found `{}`", s[0].text))),
    };

    let mut vars: Vec<String> = Vec::new();
    for s in &stmts {
        if keyword(s)? == "vars" {
            for (name, line, col) in name_list(&s[1..s.len() - 1])? {
                if FUNCTIONS.contains(&name.as_str()) || KEYWORDS.contains(&name.as_str()) {
                    return Err(err(line, col, format!("`{name}` is reserved")));
                }
                if vars.contains(&name) {
                    return Err(err(line, col, format!("variable `{name}` declared twice")));
                }
                vars.push(name);
            }
        }
    }

    let mut common: Option<Vec<usize>> = None;
    let mut phi = None;
    let mut psi = None;
    let mut degree = 1u32;
    let mut options = BTreeMap::new();
    for s in &stmts {
        let body = &s[1..];
        match keyword(s)?.as_str() {
            "vars" => {}
            "common" => {
                let mut idx = Vec::new();
                for (name, line, col) in name_list(&body[..body.len() - 1])? {
                    let i = vars
                        .iter()
                        .position(|v| *v == name)
                        .ok_or(FormulaError::UndeclaredVariable { name, line, col })?;
                    if !idx.contains(&i) {
                        idx.push(i);
                    }
                }
                common = Some(idx);
            }
            kw @ ("phi" | "psi") => {
                let mut p = Parser {
                    toks: body,
                    pos: 0,
                    vars: &vars,
                };
                p.expect_sym(":")?;
                let f = p.formula()?;
                p.expect_end()?;
                if kw == "phi" {
                    phi = Some(f);
                } else {
                    psi = Some(f);
                }
            }
            "degree" => {
                let mut p = Parser {
                    toks: body,
                    pos: 0,
                    vars: &vars,
                };
                p.expect_sym(":")?;
                let t = p.peek().clone();
                let bad = |message: String| FormulaError::BadDegree {
                    line: t.line,
                    col: t.col,
                    message,
                };
                match &t.tok {
                    Tok::Num(q, true) if q.is_positive() && q.to_integer() <= BigInt::from(64) => {
                        degree = q.to_integer().try_into().expect("small");
                    }
                    _ => return Err(bad(format!("degree must be a natural number >= 1, got `{}`", t.text))),
                }
                p.bump();
                p.expect_end()?;
            }
            _ => {
                // option NAME = VALUE ;
                let name = match body.first().map(|t| &t.tok) {
                    Some(Tok::Ident(n)) => n.clone(),
                    _ => return Err(err(body[0].line, body[0].col, "expected an option name")),
                };
                if !matches!(body.get(1).map(|t| &t.tok), Some(Tok::Sym("="))) {
                    let t = body.get(1).unwrap_or(&body[0]);
                    return Err(err(t.line, t.col, "expected `=` after option name"));
                }
                let value: String = body[2..body.len() - 1].iter().map(|t| t.text.as_str()).collect();
                if value.is_empty() {
                    return Err(err(body[0].line, body[0].col, "option value missing"));
                }
                options.insert(name, value);
            }
        }
    }

    let phi = phi.ok_or_else(|| err(eof.line, eof.col, "missing `phi` declaration"))?;
    let psi = psi.ok_or_else(|| err(eof.line, eof.col, "missing `psi` declaration"))?;
    let common = common.unwrap_or_else(|| {
        let (a, b) = (phi.free_vars(), psi.free_vars());
        (0..vars.len()).filter(|i| a.contains(i) && b.contains(i)).collect()
    });
    Ok(Problem {
        vars,
        common,
        phi,
        psi,
        degree,
        options,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn dummy_problem() {
        let p = parse_problem("vars x; common x; phi: x < -1; psi: x >= 1; degree: 1;").unwrap();
        assert_eq!(p.vars, vec!["x"]);
        assert_eq!(p.common, vec![0]);
        assert_eq!(p.degree, 1);
        let x = || Box::new(Expr::Var(0));
        assert_eq!(
            p.phi,
            Formula::atom(Expr::Sub(x(), Box::new(Expr::Const(q(-1, 1)))), Rel::Lt)
        );
        assert_eq!(
            p.psi,
            Formula::atom(Expr::Sub(x(), Box::new(Expr::Const(q(1, 1)))), Rel::Ge)
        );
    }

    #[test]
    fn decimal_literal_is_exact() {
        let vars = vec!["y".to_string()];
        let f = parse_formula("0.8 <= y", &vars).unwrap();
        let Formula::Atom(a) = f else { panic!() };
        let Expr::Sub(lhs, _) = a.lhs else { panic!() };
        assert_eq!(*lhs, Expr::Const(q(4, 5)));
        assert_eq!(parse_number("0.5418"), Some(q(2709, 5000)));
        assert_eq!(parse_number("1e-3"), Some(q(1, 1000)));
    }

    #[test]
    fn zero_exponent_is_bad_degree() {
        let e = parse_problem("vars x; common x; phi: x^0 < 1; psi: x > 2;").unwrap_err();
        assert!(matches!(e, FormulaError::BadDegree { line: 1, .. }), "{e:?}");
        let e = parse_problem("vars x; phi: x^1.5 < 1; psi: x > 2;").unwrap_err();
        assert!(matches!(e, FormulaError::BadDegree { .. }), "{e:?}");
        let e = parse_problem("vars x; phi: x < 1; psi: x > 2; degree: 0;").unwrap_err();
        assert!(matches!(e, FormulaError::BadDegree { .. }), "{e:?}");
    }

    #[test]
    fn undeclared_variable_reported_with_position() {
        let e = parse_problem("vars x;\nphi: x < y;\npsi: x > 2;").unwrap_err();
        assert_eq!(
            e,
            FormulaError::UndeclaredVariable {
                name: "y".into(),
                line: 2,
                col: 10
            }
        );
    }

    #[test]
    fn precedence() {
        let vars: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let f = parse_formula("a > 0 || b > 0 && c > 0", &vars).unwrap();
        assert!(matches!(f, Formula::Or(_, ref r) if matches!(**r, Formula::And(_, _))));
        let f = parse_formula("!a > 0 && b > 0", &vars).unwrap();
        assert!(matches!(f, Formula::And(ref l, _) if matches!(**l, Formula::Not(_))));
        let f = parse_formula("(a + b)^2 > 0", &vars).unwrap();
        assert!(matches!(f, Formula::Atom(ref at) if matches!(at.lhs, Expr::Pow(_, 2))));
        let f = parse_formula("(a > 0 || b > 0) && c > 0", &vars).unwrap();
        assert!(matches!(f, Formula::And(ref l, _) if matches!(**l, Formula::Or(_, _))));
        let e = parse_expr("-a^2", &vars).unwrap();
        assert!(matches!(e, Expr::Neg(ref inner) if matches!(**inner, Expr::Pow(_, 2))));
    }

    #[test]
    fn common_defaults_to_shared_variables() {
        let p = parse_problem("vars a, x, z; phi: a + x > 0; psi: x - z > 0;").unwrap();
        assert_eq!(p.common, vec![1]);
    }

    #[test]
    fn options_are_collected() {
        let p = parse_problem("vars x; phi: x < -1; psi: x > 1; option box = 100; option mode = delta;")
            .unwrap();
        assert_eq!(p.options.get("box").map(String::as_str), Some("100"));
        assert_eq!(p.options.get("mode").map(String::as_str), Some("delta"));
    }

    #[test]
    fn division_by_constant() {
        let vars: Vec<String> = vec!["x".into()];
        let e = parse_expr("x/4", &vars).unwrap();
        assert_eq!(
            e,
            Expr::Mul(Box::new(Expr::Var(0)), Box::new(Expr::Const(q(1, 4))))
        );
        assert!(parse_expr("1/x", &vars).is_err());
    }
}
