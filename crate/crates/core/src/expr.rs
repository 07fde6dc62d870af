//! A small arithmetic-expression language for user-supplied coefficient
//! fields.
//!
//! Grammar: `+ - * / ^` (with `^` right-associative), unary minus, numeric
//! literals, parentheses, and the functions `abs`, `exp`, `log`, `sqrt`,
//! `min`, `max`, `norm`. Variables are `x1..xd` for the state and
//! `lambda1..lambdam` for the control parameters. `min`/`max` take two or
//! more arguments; `norm` takes one or more and returns the Euclidean norm.
//!
//! Expressions are parsed once into a postfix program and evaluated with a
//! reusable stack, so per-point evaluation stays allocation-free.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Instr {
    Const(f64),
    StateVar(usize),
    ControlVar(usize),
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Abs,
    Exp,
    Log,
    Sqrt,
    /// Fold `n` stack values with `min`.
    Min(usize),
    /// Fold `n` stack values with `max`.
    Max(usize),
    /// Euclidean norm of `n` stack values.
    Norm(usize),
}

/// A compiled scalar expression in the state variables `x1..xd` and control
/// parameters `lambda1..lambdam`.
#[derive(Debug, Clone)]
pub struct Expr {
    program: Vec<Instr>,
    max_stack: usize,
    state_dim: usize,
    control_dim: usize,
    source: String,
}

impl Expr {
    /// Parse `source` against the given state/control dimensions.
    pub fn parse(source: &str, state_dim: usize, control_dim: usize) -> Result<Expr> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            state_dim,
            control_dim,
            source,
        };
        let program = parser.parse_expression_to_program()?;
        let max_stack = stack_depth(&program);
        Ok(Expr {
            program,
            max_stack,
            state_dim,
            control_dim,
            source: source.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluate at state `x` and control parameters `lambda`.
    ///
    /// `x` must have at least `state_dim` entries, `lambda` at least
    /// `control_dim`.
    pub fn eval(&self, x: &[f64], lambda: &[f64]) -> f64 {
        debug_assert!(x.len() >= self.state_dim);
        debug_assert!(lambda.len() >= self.control_dim);
        let mut stack = [0.0f64; 32];
        let mut heap;
        let stack: &mut [f64] = if self.max_stack <= 32 {
            &mut stack
        } else {
            heap = vec![0.0; self.max_stack];
            &mut heap
        };
        let mut top = 0usize;
        for instr in &self.program {
            match *instr {
                Instr::Const(c) => {
                    stack[top] = c;
                    top += 1;
                }
                Instr::StateVar(i) => {
                    stack[top] = x[i];
                    top += 1;
                }
                Instr::ControlVar(i) => {
                    stack[top] = lambda[i];
                    top += 1;
                }
                Instr::Add => {
                    top -= 1;
                    stack[top - 1] += stack[top];
                }
                Instr::Sub => {
                    top -= 1;
                    stack[top - 1] -= stack[top];
                }
                Instr::Mul => {
                    top -= 1;
                    stack[top - 1] *= stack[top];
                }
                Instr::Div => {
                    top -= 1;
                    stack[top - 1] /= stack[top];
                }
                Instr::Pow => {
                    top -= 1;
                    stack[top - 1] = stack[top - 1].powf(stack[top]);
                }
                Instr::Neg => stack[top - 1] = -stack[top - 1],
                Instr::Abs => stack[top - 1] = stack[top - 1].abs(),
                Instr::Exp => stack[top - 1] = stack[top - 1].exp(),
                Instr::Log => stack[top - 1] = stack[top - 1].ln(),
                Instr::Sqrt => stack[top - 1] = stack[top - 1].sqrt(),
                Instr::Min(n) => {
                    let mut v = stack[top - n];
                    for k in 1..n {
                        v = v.min(stack[top - n + k]);
                    }
                    top -= n - 1;
                    stack[top - 1] = v;
                }
                Instr::Max(n) => {
                    let mut v = stack[top - n];
                    for k in 1..n {
                        v = v.max(stack[top - n + k]);
                    }
                    top -= n - 1;
                    stack[top - 1] = v;
                }
                Instr::Norm(n) => {
                    let mut s = 0.0;
                    for k in 0..n {
                        let v = stack[top - n + k];
                        s += v * v;
                    }
                    top -= n - 1;
                    stack[top - 1] = s.sqrt();
                }
            }
        }
        debug_assert_eq!(top, 1);
        stack[0]
    }
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
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn parse_err(msg: impl Into<String>, line: usize, col: usize) -> Error {
    Error::Parse {
        message: msg.into(),
        line,
        col,
    }
}

fn tokenize(src: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0usize;
    let mut line = 1usize;
    let mut col = 1usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let (tline, tcol) = (line, col);
        let advance = |i: &mut usize, line: &mut usize, col: &mut usize, by: usize| {
            for k in 0..by {
                if bytes[*i + k] == b'\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
            }
            *i += by;
        };
        match c {
            ' ' | '\t' | '\n' | '\r' => advance(&mut i, &mut line, &mut col, 1),
            '+' => {
                out.push(Spanned { tok: Tok::Plus, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '-' => {
                out.push(Spanned { tok: Tok::Minus, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '*' => {
                out.push(Spanned { tok: Tok::Star, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '/' => {
                out.push(Spanned { tok: Tok::Slash, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '^' => {
                out.push(Spanned { tok: Tok::Caret, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '(' => {
                out.push(Spanned { tok: Tok::LParen, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col, 1);
            }
            ')' => {
                out.push(Spanned { tok: Tok::RParen, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col, 1);
            }
            ',' => {
                out.push(Spanned { tok: Tok::Comma, line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col, 1);
            }
            '0'..='9' | '.' => {
                let start = i;
                let mut j = i;
                while j < bytes.len() && matches!(bytes[j] as char, '0'..='9' | '.') {
                    j += 1;
                }
                // exponent part
                if j < bytes.len() && matches!(bytes[j] as char, 'e' | 'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && matches!(bytes[k] as char, '+' | '-') {
                        k += 1;
                    }
                    if k < bytes.len() && (bytes[k] as char).is_ascii_digit() {
                        j = k;
                        while j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let text = &src[start..j];
                let value: f64 = text
                    .parse()
                    .map_err(|_| parse_err(format!("invalid number `{text}`"), tline, tcol))?;
                out.push(Spanned { tok: Tok::Num(value), line: tline, col: tcol });
                advance(&mut i, &mut line, &mut col, j - start);
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                let mut j = i;
                while j < bytes.len()
                    && matches!(bytes[j] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    j += 1;
                }
                out.push(Spanned {
                    tok: Tok::Ident(src[start..j].to_string()),
                    line: tline,
                    col: tcol,
                });
                advance(&mut i, &mut line, &mut col, j - start);
            }
            other => return Err(parse_err(format!("unexpected character `{other}`"), tline, tcol)),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Spanned>,
    pos: usize,
    state_dim: usize,
    control_dim: usize,
    source: &'a str,
}

impl<'a> Parser<'a> {
    fn parse_expression_to_program(&mut self) -> Result<Vec<Instr>> {
        let mut program = Vec::new();
        self.expression(&mut program)?;
        if self.pos != self.tokens.len() {
            let t = &self.tokens[self.pos];
            return Err(parse_err(
                format!("unexpected trailing token at `{}`", self.describe(&t.tok)),
                t.line,
                t.col,
            ));
        }
        if program.is_empty() {
            return Err(parse_err("empty expression", 1, 1));
        }
        Ok(program)
    }

    fn describe(&self, tok: &Tok) -> String {
        match tok {
            Tok::Num(v) => format!("{v}"),
            Tok::Ident(s) => s.clone(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Caret => "^".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::Comma => ",".into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.tokens
            .get(self.pos)
            .map(|s| (s.line, s.col))
            .unwrap_or_else(|| {
                let lines = self.source.lines().count().max(1);
                let col = self.source.lines().last().map(|l| l.len() + 1).unwrap_or(1);
                (lines, col)
            })
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        match self.peek() {
            Some(t) if *t == tok => {
                self.pos += 1;
                Ok(())
            }
            _ => {
                let (line, col) = self.here();
                Err(parse_err(format!("expected `{}`", self.describe(&tok)), line, col))
            }
        }
    }

    // expression := term (("+"|"-") term)*
    fn expression(&mut self, prog: &mut Vec<Instr>) -> Result<()> {
        self.term(prog)?;
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Plus => {
                    self.pos += 1;
                    self.term(prog)?;
                    prog.push(Instr::Add);
                }
                Tok::Minus => {
                    self.pos += 1;
                    self.term(prog)?;
                    prog.push(Instr::Sub);
                }
                _ => break,
            }
        }
        Ok(())
    }

    // term := unary (("*"|"/") unary)*
    fn term(&mut self, prog: &mut Vec<Instr>) -> Result<()> {
        self.unary(prog)?;
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Star => {
                    self.pos += 1;
                    self.unary(prog)?;
                    prog.push(Instr::Mul);
                }
                Tok::Slash => {
                    self.pos += 1;
                    self.unary(prog)?;
                    prog.push(Instr::Div);
                }
                _ => break,
            }
        }
        Ok(())
    }

    // unary := "-" unary | power
    fn unary(&mut self, prog: &mut Vec<Instr>) -> Result<()> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.pos += 1;
            self.unary(prog)?;
            prog.push(Instr::Neg);
            return Ok(());
        }
        self.power(prog)
    }

    // power := atom ("^" unary)?   (right-associative, binds tighter than unary minus on the left)
    fn power(&mut self, prog: &mut Vec<Instr>) -> Result<()> {
        self.atom(prog)?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.pos += 1;
            self.unary(prog)?;
            prog.push(Instr::Pow);
        }
        Ok(())
    }

    fn atom(&mut self, prog: &mut Vec<Instr>) -> Result<()> {
        let (line, col) = self.here();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                prog.push(Instr::Const(v));
                Ok(())
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                self.expression(prog)?;
                self.expect(Tok::RParen)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if matches!(self.peek(), Some(Tok::LParen)) {
                    self.pos += 1;
                    let mut argc = 0usize;
                    if !matches!(self.peek(), Some(Tok::RParen)) {
                        loop {
                            self.expression(prog)?;
                            argc += 1;
                            if matches!(self.peek(), Some(Tok::Comma)) {
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen)?;
                    self.function(&name, argc, prog, line, col)
                } else {
                    self.variable(&name, prog, line, col)
                }
            }
            _ => Err(parse_err("expected a value", line, col)),
        }
    }

    fn function(
        &self,
        name: &str,
        argc: usize,
        prog: &mut Vec<Instr>,
        line: usize,
        col: usize,
    ) -> Result<()> {
        let unary = |prog: &mut Vec<Instr>, instr: Instr| -> Result<()> {
            if argc != 1 {
                return Err(parse_err(
                    format!("function `{name}` takes exactly 1 argument, got {argc}"),
                    line,
                    col,
                ));
            }
            prog.push(instr);
            Ok(())
        };
        match name {
            "abs" => unary(prog, Instr::Abs),
            "exp" => unary(prog, Instr::Exp),
            "log" => unary(prog, Instr::Log),
            "sqrt" => unary(prog, Instr::Sqrt),
            "min" | "max" | "norm" => {
                let at_least = if name == "norm" { 1 } else { 2 };
                if argc < at_least {
                    return Err(parse_err(
                        format!("function `{name}` takes at least {at_least} arguments, got {argc}"),
                        line,
                        col,
                    ));
                }
                prog.push(match name {
                    "min" => Instr::Min(argc),
                    "max" => Instr::Max(argc),
                    _ => Instr::Norm(argc),
                });
                Ok(())
            }
            other => Err(parse_err(format!("unknown function `{other}`"), line, col)),
        }
    }

    fn variable(&self, name: &str, prog: &mut Vec<Instr>, line: usize, col: usize) -> Result<()> {
        if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
            if idx >= 1 && idx <= self.state_dim {
                prog.push(Instr::StateVar(idx - 1));
                return Ok(());
            }
            return Err(parse_err(
                format!("state variable `{name}` out of range (dimension {})", self.state_dim),
                line,
                col,
            ));
        }
        if let Some(idx) = name.strip_prefix("lambda").and_then(|s| s.parse::<usize>().ok()) {
            if idx >= 1 && idx <= self.control_dim {
                prog.push(Instr::ControlVar(idx - 1));
                return Ok(());
            }
            return Err(parse_err(
                format!(
                    "control variable `{name}` out of range (parameter dimension {})",
                    self.control_dim
                ),
                line,
                col,
            ));
        }
        match name {
            "pi" => {
                prog.push(Instr::Const(std::f64::consts::PI));
                Ok(())
            }
            other => Err(parse_err(format!("unknown variable `{other}`"), line, col)),
        }
    }
}

fn stack_depth(program: &[Instr]) -> usize {
    let mut depth = 0usize;
    let mut max = 0usize;
    for instr in program {
        match instr {
            Instr::Const(_) | Instr::StateVar(_) | Instr::ControlVar(_) => {
                depth += 1;
                max = max.max(depth);
            }
            Instr::Add | Instr::Sub | Instr::Mul | Instr::Div | Instr::Pow => depth -= 1,
            Instr::Neg | Instr::Abs | Instr::Exp | Instr::Log | Instr::Sqrt => {}
            Instr::Min(n) | Instr::Max(n) | Instr::Norm(n) => depth -= n - 1,
        }
    }
    max
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, x: &[f64], lam: &[f64]) -> f64 {
        Expr::parse(src, x.len(), lam.len()).unwrap().eval(x, lam)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("1 + 2 * 3", &[], &[]), 7.0);
        assert_eq!(eval("(1 + 2) * 3", &[], &[]), 9.0);
        assert_eq!(eval("2 ^ 3 ^ 2", &[], &[]), 512.0); // right associative
        assert_eq!(eval("-2 ^ 2", &[], &[]), -4.0); // unary minus binds looser than ^
        assert_eq!(eval("6 / 3 / 2", &[], &[]), 1.0);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(eval("x1 + 2 * x2", &[1.0, 3.0], &[]), 7.0);
        assert_eq!(eval("lambda1 * x1", &[2.0], &[5.0]), 10.0);
        assert_eq!(eval("norm(x1, x2)", &[3.0, 4.0], &[]), 5.0);
        assert_eq!(eval("min(3, 1, 2)", &[], &[]), 1.0);
        assert_eq!(eval("max(3, 1, 2)", &[], &[]), 3.0);
        assert_eq!(eval("abs(-2)", &[], &[]), 2.0);
        assert!((eval("exp(log(5))", &[], &[]) - 5.0).abs() < 1e-12);
        assert_eq!(eval("sqrt(16)", &[], &[]), 4.0);
        assert_eq!(eval("1e-3 * 2", &[], &[]), 2e-3);
    }

    #[test]
    fn singular_drift_component() {
        // first component of -x / (2 ||x||^2), the critical-integrability drift
        let e = Expr::parse("-x1 / (2 * norm(x1, x2)^2)", 2, 0).unwrap();
        let v = e.eval(&[0.5, 0.0], &[]);
        assert!((v - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_line_and_column() {
        let err = Expr::parse("1 + \n  bogus(2)", 2, 0).unwrap_err();
        match err {
            Error::Parse { line, col, .. } => {
                assert_eq!(line, 2);
                assert_eq!(col, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(Expr::parse("x3", 2, 0).is_err());
        assert!(Expr::parse("1 +", 0, 0).is_err());
        assert!(Expr::parse("min(1)", 0, 0).is_err());
        assert!(Expr::parse("1 2", 0, 0).is_err());
    }
}
