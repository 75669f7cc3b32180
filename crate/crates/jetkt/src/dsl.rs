//! The `.eq` problem-file language: lexer, statement grammar, and the
//! abstract syntax consumed by the lowering pass.
//!
//! Design points:
//!
//! * Identifiers are `[A-Za-z][A-Za-z0-9]*`; the underscore is its own
//!   token, which is what makes subscript sugar (`u_xxt`) parseable.
//! * Subscripts come in two forms: a run of single-letter independent names
//!   (`u_xxt`), or the braced canonical form (`u_{x^2 t}`), which also
//!   accepts multi-letter variable names.
//! * Components are selected with brackets (`psi[1]`, `c1[0]`); a bare name
//!   means component 0.
//! * `D_x` (or `D_xt`, `D_x^3`) denotes total-derivative factors and is only
//!   meaningful inside `compat` operator entries.
//! * `#` starts a comment running to the end of the line.
//!
//! Every failure is a positioned [`Diagnostic`]; the parser never panics on
//! any input.

use std::fmt;

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Stable diagnostic codes; these appear verbatim in CLI error output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagCode {
    /// Malformed syntax: unexpected token, unterminated construct.
    Syntax,
    /// An identifier that names no declared or canonical symbol.
    UnknownSymbol,
    /// Equation left side is not a single derivative of a dependent.
    SolvedForm,
    /// Two equations solved for the same leading derivative.
    DuplicateLeading,
    /// An operator entry whose coefficients mix parities.
    ParityOperator,
    /// A numeric literal that does not fit, or a division by a non-constant.
    Number,
    /// Declaration shape mismatch (component counts, tier structure).
    Shape,
}

impl DiagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagCode::Syntax => "E_SYNTAX",
            DiagCode::UnknownSymbol => "E_UNKNOWN_SYMBOL",
            DiagCode::SolvedForm => "E_SOLVED_FORM",
            DiagCode::DuplicateLeading => "E_DUP_LEADING",
            DiagCode::ParityOperator => "E_PARITY_OP",
            DiagCode::Number => "E_NUMBER",
            DiagCode::Shape => "E_SHAPE",
        }
    }
}

/// A positioned parse or lowering failure.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub code: DiagCode,
    pub pos: Pos,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: DiagCode, pos: Pos, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            code,
            pos,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}] {}: {}", self.code.as_str(), self.pos, self.message)
    }
}

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(String),
    Punct(char),
    Underscore,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(s) => format!("number `{s}`"),
            Tok::Punct(c) => format!("`{c}`"),
            Tok::Underscore => "`_`".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Lexed {
    tok: Tok,
    pos: Pos,
}

fn lex(text: &str) -> Result<Vec<Lexed>, Diagnostic> {
    let mut out = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            c if c.is_ascii_alphabetic() => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push(Lexed {
                    tok: Tok::Ident(s),
                    pos,
                });
            }
            c if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push(Lexed { tok: Tok::Int(s), pos });
            }
            '_' => {
                chars.next();
                col += 1;
                out.push(Lexed {
                    tok: Tok::Underscore,
                    pos,
                });
            }
            ';' | ',' | '=' | ':' | '^' | '*' | '+' | '-' | '/' | '(' | ')' | '[' | ']' | '{'
            | '}' => {
                chars.next();
                col += 1;
                out.push(Lexed {
                    tok: Tok::Punct(c),
                    pos,
                });
            }
            other => {
                return Err(Diagnostic::new(
                    DiagCode::Syntax,
                    pos,
                    format!("unexpected character `{other}`"),
                ));
            }
        }
    }
    out.push(Lexed {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Expression syntax
// ---------------------------------------------------------------------------

/// Subscript attached to a symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Subscript {
    None,
    /// `u_xxt`: one letter per derivative, multiplicity by repetition.
    Sugar(String),
    /// `u_{x^2 t}`: names with optional powers.
    Braced(Vec<(String, u32)>),
}

/// One symbol reference: `u`, `u_xx`, `psi[1]`, `c1[0]_{x}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolRef {
    pub name: String,
    pub component: Option<u32>,
    pub subscript: Subscript,
    pub pos: Pos,
}

/// Expression tree; `DTotal` only lowers inside operator entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprAst {
    Int(String, Pos),
    Symbol(SymbolRef),
    /// Total-derivative factor `D_xt`: one letter per application.
    DTotal { letters: String, pos: Pos },
    Neg(Box<ExprAst>),
    Add(Box<ExprAst>, Box<ExprAst>),
    Sub(Box<ExprAst>, Box<ExprAst>),
    Mul(Box<ExprAst>, Box<ExprAst>),
    Div(Box<ExprAst>, Box<ExprAst>, Pos),
    Pow(Box<ExprAst>, u32, Pos),
}

impl ExprAst {
    pub fn pos(&self) -> Pos {
        match self {
            ExprAst::Int(_, p) | ExprAst::DTotal { pos: p, .. } => *p,
            ExprAst::Symbol(s) => s.pos,
            ExprAst::Neg(e) => e.pos(),
            ExprAst::Add(a, _) | ExprAst::Sub(a, _) | ExprAst::Mul(a, _) => a.pos(),
            ExprAst::Div(_, _, p) | ExprAst::Pow(_, _, p) => *p,
        }
    }
}

// ---------------------------------------------------------------------------
// Statement syntax
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AntifieldDecl {
    pub name: String,
    pub rank: u32,
    pub tier: u32,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct EquationDecl {
    pub lhs: ExprAst,
    pub rhs: ExprAst,
    pub pos: Pos,
}

/// One `compat NAME = [entry, …];` row.  Rows sharing a name stack into one
/// operator; distinct names are successive stages of the chain.
#[derive(Debug, Clone)]
pub struct CompatRow {
    pub name: String,
    pub entries: Vec<ExprAst>,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct NamedExpr {
    pub name: String,
    pub exprs: Vec<ExprAst>,
    pub pos: Pos,
}

/// Parsed problem file, prior to symbol resolution.
#[derive(Debug, Clone, Default)]
pub struct ProblemAst {
    pub independents: Vec<(String, Pos)>,
    pub dependents: Vec<(String, Pos)>,
    pub antifields: Vec<AntifieldDecl>,
    pub equations: Vec<EquationDecl>,
    pub compat_rows: Vec<CompatRow>,
    pub densities: Vec<NamedExpr>,
    pub currents: Vec<NamedExpr>,
    pub cosymmetries: Vec<NamedExpr>,
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<Lexed>,
    at: usize,
}

/// Parse a problem file, yielding the syntax tree or the first positioned
/// diagnostic.  Total: no input panics.
pub fn parse_problem(text: &str) -> Result<ProblemAst, Diagnostic> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0 };
    let mut ast = ProblemAst::default();
    loop {
        if matches!(p.peek(), Tok::Eof) {
            return Ok(ast);
        }
        p.statement(&mut ast)?;
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Lexed {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect_punct(&mut self, c: char) -> Result<(), Diagnostic> {
        if self.peek() == &Tok::Punct(c) {
            self.bump();
            Ok(())
        } else {
            Err(Diagnostic::new(
                DiagCode::Syntax,
                self.pos(),
                format!("expected `{c}`, found {}", self.peek().describe()),
            ))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Pos), Diagnostic> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok((s, pos))
            }
            other => Err(Diagnostic::new(
                DiagCode::Syntax,
                pos,
                format!("expected {what}, found {}", other.describe()),
            )),
        }
    }

    fn expect_int(&mut self, what: &str) -> Result<(u32, Pos), Diagnostic> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(s) => {
                self.bump();
                let n: u32 = s.parse().map_err(|_| {
                    Diagnostic::new(DiagCode::Number, pos, format!("{what} `{s}` is too large"))
                })?;
                Ok((n, pos))
            }
            other => Err(Diagnostic::new(
                DiagCode::Syntax,
                pos,
                format!("expected {what}, found {}", other.describe()),
            )),
        }
    }

    fn statement(&mut self, ast: &mut ProblemAst) -> Result<(), Diagnostic> {
        let pos = self.pos();
        let (keyword, _) = self.expect_ident("a statement keyword")?;
        match keyword.as_str() {
            "independent" => {
                ast.independents.extend(self.ident_list()?);
            }
            "dependent" => {
                ast.dependents.extend(self.ident_list()?);
            }
            "antifield" => {
                let (name, npos) = self.expect_ident("an antifield name")?;
                self.expect_punct(':')?;
                let (rank, _) = self.expect_int("a component count")?;
                let (tier_kw, tpos) = self.expect_ident("`tier`")?;
                if tier_kw != "tier" {
                    return Err(Diagnostic::new(
                        DiagCode::Syntax,
                        tpos,
                        format!("expected `tier`, found identifier `{tier_kw}`"),
                    ));
                }
                let (tier, _) = self.expect_int("a tier number")?;
                ast.antifields.push(AntifieldDecl {
                    name,
                    rank,
                    tier,
                    pos: npos,
                });
            }
            "equation" => {
                let lhs = self.expr()?;
                self.expect_punct('=')?;
                let rhs = self.expr()?;
                ast.equations.push(EquationDecl { lhs, rhs, pos });
            }
            "compat" => {
                let (name, npos) = self.expect_ident("an operator name")?;
                self.expect_punct('=')?;
                self.expect_punct('[')?;
                let mut entries = vec![self.expr()?];
                while self.peek() == &Tok::Punct(',') {
                    self.bump();
                    entries.push(self.expr()?);
                }
                self.expect_punct(']')?;
                ast.compat_rows.push(CompatRow {
                    name,
                    entries,
                    pos: npos,
                });
            }
            "density" => {
                let (name, npos) = self.expect_ident("a density name")?;
                self.expect_punct('=')?;
                let e = self.expr()?;
                ast.densities.push(NamedExpr {
                    name,
                    exprs: vec![e],
                    pos: npos,
                });
            }
            "current" => {
                let (name, npos) = self.expect_ident("a current name")?;
                self.expect_punct('=')?;
                ast.currents.push(NamedExpr {
                    name,
                    exprs: self.expr_list()?,
                    pos: npos,
                });
            }
            "cosymmetry" => {
                let (name, npos) = self.expect_ident("a cosymmetry name")?;
                self.expect_punct('=')?;
                ast.cosymmetries.push(NamedExpr {
                    name,
                    exprs: self.expr_list()?,
                    pos: npos,
                });
            }
            other => {
                return Err(Diagnostic::new(
                    DiagCode::Syntax,
                    pos,
                    format!(
                        "unknown statement `{other}` (expected independent, dependent, \
                         antifield, equation, compat, density, current, or cosymmetry)"
                    ),
                ));
            }
        }
        self.expect_punct(';')
    }

    fn ident_list(&mut self) -> Result<Vec<(String, Pos)>, Diagnostic> {
        let mut out = vec![self.expect_ident("a variable name")?];
        while self.peek() == &Tok::Punct(',') {
            self.bump();
            out.push(self.expect_ident("a variable name")?);
        }
        Ok(out)
    }

    fn expr_list(&mut self) -> Result<Vec<ExprAst>, Diagnostic> {
        let mut out = vec![self.expr()?];
        while self.peek() == &Tok::Punct(',') {
            self.bump();
            out.push(self.expr()?);
        }
        Ok(out)
    }

    fn expr(&mut self) -> Result<ExprAst, Diagnostic> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Punct('+') => {
                    self.bump();
                    lhs = ExprAst::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Punct('-') => {
                    self.bump();
                    lhs = ExprAst::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<ExprAst, Diagnostic> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Punct('*') => {
                    self.bump();
                    lhs = ExprAst::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Punct('/') => {
                    let pos = self.pos();
                    self.bump();
                    lhs = ExprAst::Div(Box::new(lhs), Box::new(self.factor()?), pos);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<ExprAst, Diagnostic> {
        if self.peek() == &Tok::Punct('-') {
            self.bump();
            return Ok(ExprAst::Neg(Box::new(self.factor()?)));
        }
        let mut base = self.primary()?;
        while self.peek() == &Tok::Punct('^') {
            let pos = self.pos();
            self.bump();
            let (e, _) = self.expect_int("an exponent")?;
            base = ExprAst::Pow(Box::new(base), e, pos);
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<ExprAst, Diagnostic> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(s) => {
                self.bump();
                Ok(ExprAst::Int(s, pos))
            }
            Tok::Punct('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if name == "D" {
                    // Total-derivative factor: D_x, D_xt.
                    if self.peek() != &Tok::Underscore {
                        return Err(Diagnostic::new(
                            DiagCode::Syntax,
                            pos,
                            "`D` must be followed by a subscript, as in `D_x`",
                        ));
                    }
                    self.bump();
                    let (letters, lpos) = self.expect_ident("derivative letters")?;
                    if !letters.chars().all(|c| c.is_ascii_alphabetic()) {
                        return Err(Diagnostic::new(
                            DiagCode::Syntax,
                            lpos,
                            format!("`D_{letters}` mixes letters and digits"),
                        ));
                    }
                    return Ok(ExprAst::DTotal { letters, pos });
                }
                let component = if self.peek() == &Tok::Punct('[') {
                    self.bump();
                    let (k, _) = self.expect_int("a component index")?;
                    self.expect_punct(']')?;
                    Some(k)
                } else {
                    None
                };
                let subscript = if self.peek() == &Tok::Underscore {
                    self.bump();
                    self.subscript()?
                } else {
                    Subscript::None
                };
                Ok(ExprAst::Symbol(SymbolRef {
                    name,
                    component,
                    subscript,
                    pos,
                }))
            }
            other => Err(Diagnostic::new(
                DiagCode::Syntax,
                pos,
                format!("expected an expression, found {}", other.describe()),
            )),
        }
    }

    fn subscript(&mut self) -> Result<Subscript, Diagnostic> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                if s.chars().all(|c| c.is_ascii_alphabetic()) {
                    Ok(Subscript::Sugar(s))
                } else {
                    Err(Diagnostic::new(
                        DiagCode::Syntax,
                        pos,
                        format!("subscript `{s}` mixes letters and digits"),
                    ))
                }
            }
            Tok::Punct('{') => {
                self.bump();
                let mut pairs = Vec::new();
                loop {
                    match self.peek().clone() {
                        Tok::Punct('}') => {
                            self.bump();
                            if pairs.is_empty() {
                                return Err(Diagnostic::new(
                                    DiagCode::Syntax,
                                    pos,
                                    "empty subscript braces",
                                ));
                            }
                            return Ok(Subscript::Braced(pairs));
                        }
                        Tok::Ident(name) => {
                            self.bump();
                            let exp = if self.peek() == &Tok::Punct('^') {
                                self.bump();
                                self.expect_int("a derivative multiplicity")?.0
                            } else {
                                1
                            };
                            pairs.push((name, exp));
                        }
                        other => {
                            return Err(Diagnostic::new(
                                DiagCode::Syntax,
                                self.pos(),
                                format!(
                                    "expected a variable name or `}}` in subscript, found {}",
                                    other.describe()
                                ),
                            ));
                        }
                    }
                }
            }
            other => Err(Diagnostic::new(
                DiagCode::Syntax,
                pos,
                format!("expected subscript letters or `{{`, found {}", other.describe()),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kdv_file_parses() {
        let ast = parse_problem(
            "independent x, t; dependent u; equation u_t = u*u_x + u_xxx;",
        )
        .unwrap();
        assert_eq!(ast.independents.len(), 2);
        assert_eq!(ast.dependents.len(), 1);
        assert_eq!(ast.equations.len(), 1);
    }

    #[test]
    fn compat_row_parses() {
        let ast = parse_problem(
            "independent x, y; dependent u; equation u_x = 0; equation u_y = 0;\n\
             compat Delta1 = [D_y, -D_x];",
        )
        .unwrap();
        assert_eq!(ast.compat_rows.len(), 1);
        assert_eq!(ast.compat_rows[0].entries.len(), 2);
    }

    #[test]
    fn braced_subscripts_and_components_parse() {
        let ast = parse_problem("dependent u; density h = u[0]_{x^2 t} + c1[0]_x;").unwrap();
        assert_eq!(ast.densities.len(), 1);
    }

    #[test]
    fn positioned_syntax_error() {
        let err = parse_problem("independent x,, t;").unwrap_err();
        assert_eq!(err.code, DiagCode::Syntax);
        assert_eq!(err.pos.line, 1);
        assert_eq!(err.pos.col, 15);
    }

    #[test]
    fn unknown_character_is_a_diagnostic() {
        let err = parse_problem("independent x; € y;").unwrap_err();
        assert_eq!(err.code, DiagCode::Syntax);
    }

    #[test]
    fn comments_are_skipped() {
        let ast = parse_problem("# heading\nindependent x; # trailing\ndependent u;").unwrap();
        assert_eq!(ast.independents.len(), 1);
        assert_eq!(ast.dependents.len(), 1);
    }
}
