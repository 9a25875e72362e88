//! Spatial query language.
//!
//! A program is a list of statements, each storing the value of one
//! expression in a scene attribute (`name`) or an object attribute
//! (`<id>.name`). Expressions are function calls over object ids and label
//! strings:
//!
//! ```text
//! expr := ident "(" [expr ("," expr)*] ")" | integer | string
//! ```
//!
//! Image coordinates put the origin top-left with `y` growing downwards, so
//! `above(a, b)` means `a`'s centroid has the smaller `y`. Depth follows the
//! scene convention (smaller is nearer). Every selector breaks ties towards
//! the lower id. Evaluation only reads the scene.

use std::fmt;

use super::ReasoningError;
use crate::gateway::schemas::{SpatialProgramReply, MAX_STATEMENTS};
use crate::ssr::{AttrValue, ObjectId, SceneObject, SceneRep};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Centroid,
    Area,
    Depth,
    LeftOf,
    RightOf,
    Above,
    Below,
    Distance,
    Nearest,
    Farthest,
    Largest,
    Smallest,
    Count,
}

#[derive(Clone, Copy, PartialEq)]
enum Arg {
    Id,
    Label,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "centroid" => Func::Centroid,
            "area" => Func::Area,
            "depth" => Func::Depth,
            "left_of" => Func::LeftOf,
            "right_of" => Func::RightOf,
            "above" => Func::Above,
            "below" => Func::Below,
            "distance" => Func::Distance,
            "nearest" => Func::Nearest,
            "farthest" => Func::Farthest,
            "largest" => Func::Largest,
            "smallest" => Func::Smallest,
            "count" => Func::Count,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Centroid => "centroid",
            Func::Area => "area",
            Func::Depth => "depth",
            Func::LeftOf => "left_of",
            Func::RightOf => "right_of",
            Func::Above => "above",
            Func::Below => "below",
            Func::Distance => "distance",
            Func::Nearest => "nearest",
            Func::Farthest => "farthest",
            Func::Largest => "largest",
            Func::Smallest => "smallest",
            Func::Count => "count",
        }
    }

    /// Required and optional argument kinds.
    fn signature(self) -> (&'static [Arg], &'static [Arg]) {
        match self {
            Func::Centroid | Func::Area | Func::Depth => (&[Arg::Id], &[]),
            Func::LeftOf | Func::RightOf | Func::Above | Func::Below | Func::Distance => {
                (&[Arg::Id, Arg::Id], &[])
            }
            Func::Nearest | Func::Farthest | Func::Largest | Func::Smallest => (&[], &[Arg::Label]),
            Func::Count => (&[Arg::Label], &[]),
        }
    }

    fn selects_object(self) -> bool {
        matches!(self, Func::Nearest | Func::Farthest | Func::Largest | Func::Smallest)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(u64),
    Str(String),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Scene(String),
    Object(ObjectId, String),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Scene(name) => f.write_str(name),
            Target::Object(id, name) => write!(f, "{id}.{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub target: Target,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialProgram {
    pub statements: Vec<Statement>,
}

fn dsl_err(index: usize, message: impl Into<String>) -> ReasoningError {
    ReasoningError::Dsl {
        index,
        message: message.into(),
    }
}

impl SpatialProgram {
    pub fn parse<'a, I>(statements: I) -> Result<Self, ReasoningError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let statements = statements
            .into_iter()
            .enumerate()
            .map(|(i, (output, expr))| {
                Ok(Statement {
                    target: parse_target(output).map_err(|m| dsl_err(i, m))?,
                    expr: parse_expr(expr).map_err(|m| dsl_err(i, m))?,
                })
            })
            .collect::<Result<Vec<_>, ReasoningError>>()?;
        if statements.is_empty() || statements.len() > MAX_STATEMENTS {
            return Err(dsl_err(
                0,
                format!("program must hold 1..={MAX_STATEMENTS} statements, got {}", statements.len()),
            ));
        }
        Ok(Self { statements })
    }

    pub fn from_reply(reply: &SpatialProgramReply) -> Result<Self, ReasoningError> {
        Self::parse(reply.statements.iter().map(|s| (s.output.as_str(), s.expr.as_str())))
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_target(text: &str) -> Result<Target, String> {
    let text = text.trim();
    match text.split_once('.') {
        Some((id, name)) => {
            let id: ObjectId = id
                .parse()
                .map_err(|_| format!("output `{text}`: `{id}` is not an object id"))?;
            if !is_ident(name) {
                return Err(format!("output `{text}`: `{name}` is not a valid attribute name"));
            }
            Ok(Target::Object(id, name.to_string()))
        }
        None if is_ident(text) => Ok(Target::Scene(text.to_string())),
        None => Err(format!("output `{text}` is not a valid attribute name")),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Int(u64),
    Str(String),
    Open,
    Close,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' | ')' | ',' => {
                chars.next();
                tokens.push(match c {
                    '(' => Token::Open,
                    ')' => Token::Close,
                    _ => Token::Comma,
                });
            }
            '"' | '\'' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some((_, q)) if q == c => break,
                        Some((_, ch)) => s.push(ch),
                        None => return Err(format!("unterminated string starting at {pos}")),
                    }
                }
                tokens.push(Token::Str(s));
            }
            c if c.is_ascii_digit() => {
                let mut end = pos;
                while let Some(&(i, d)) = chars.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    end = i + d.len_utf8();
                    chars.next();
                }
                let n = src[pos..end]
                    .parse()
                    .map_err(|_| format!("integer `{}` is out of range", &src[pos..end]))?;
                tokens.push(Token::Int(n));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut end = pos;
                while let Some(&(i, d)) = chars.peek() {
                    if !(d.is_ascii_alphanumeric() || d == '_') {
                        break;
                    }
                    end = i + 1;
                    chars.next();
                }
                tokens.push(Token::Ident(src[pos..end].to_string()));
            }
            other => return Err(format!("unexpected character `{other}` at {pos}")),
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<Expr, String> {
        match self.next() {
            Some(Token::Int(n)) => Ok(Expr::Int(n)),
            Some(Token::Str(s)) => Ok(Expr::Str(s)),
            Some(Token::Ident(name)) => {
                let func = Func::lookup(&name).ok_or_else(|| format!("unknown function `{name}`"))?;
                if self.next() != Some(Token::Open) {
                    return Err(format!("expected `(` after `{name}`"));
                }
                let mut args = Vec::new();
                if self.peek() == Some(&Token::Close) {
                    self.next();
                } else {
                    loop {
                        args.push(self.expr()?);
                        match self.next() {
                            Some(Token::Comma) => continue,
                            Some(Token::Close) => break,
                            _ => return Err(format!("expected `,` or `)` in call to `{name}`")),
                        }
                    }
                }
                check_call(func, &args)?;
                Ok(Expr::Call(func, args))
            }
            Some(t) => Err(format!("unexpected token {t:?}")),
            None => Err("unexpected end of expression".into()),
        }
    }
}

fn check_call(func: Func, args: &[Expr]) -> Result<(), String> {
    let (required, optional) = func.signature();
    if args.len() < required.len() || args.len() > required.len() + optional.len() {
        let expected = if optional.is_empty() {
            required.len().to_string()
        } else {
            format!("{} or {}", required.len(), required.len() + optional.len())
        };
        return Err(format!(
            "`{}` takes {expected} argument(s), got {}",
            func.name(),
            args.len()
        ));
    }
    for (arg, kind) in args.iter().zip(required.iter().chain(optional)) {
        let ok = match (kind, arg) {
            (Arg::Id, Expr::Int(_)) => true,
            (Arg::Id, Expr::Call(f, _)) => f.selects_object(),
            (Arg::Label, Expr::Str(_)) => true,
            _ => false,
        };
        if !ok {
            let want = if *kind == Arg::Id { "an object id" } else { "a label string" };
            return Err(format!("`{}` expects {want}, got {arg:?}", func.name()));
        }
    }
    Ok(())
}

pub fn parse_expr(src: &str) -> Result<Expr, String> {
    let mut p = Parser {
        tokens: tokenize(src)?,
        pos: 0,
    };
    let expr = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err("trailing input after expression".into());
    }
    Ok(expr)
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64),
    Bool(bool),
    Point(f64, f64),
    Obj(ObjectId),
}

impl Value {
    fn into_attr(self) -> AttrValue {
        match self {
            Value::Num(n) => AttrValue::Number(n),
            Value::Bool(b) => AttrValue::Bool(b),
            Value::Point(x, y) => AttrValue::Point(x, y),
            Value::Obj(id) => AttrValue::Object(id),
        }
    }
}

struct Eval<'a> {
    scene: &'a SceneRep,
}

impl Eval<'_> {
    fn object(&self, e: &Expr) -> Result<&SceneObject, String> {
        let id = match self.eval(e)? {
            Value::Obj(id) => id,
            Value::Num(n) if n >= 0.0 && n.fract() == 0.0 && n <= ObjectId::MAX as f64 => n as ObjectId,
            v => return Err(format!("{v:?} is not an object")),
        };
        self.scene
            .get(id)
            .ok_or_else(|| format!("object {id} does not exist"))
    }

    fn centroid(&self, e: &Expr) -> Result<(f64, f64), String> {
        let o = self.object(e)?;
        o.mask.centroid().ok_or_else(|| format!("object {} is empty", o.id))
    }

    fn select(
        &self,
        label: Option<&Expr>,
        key: impl Fn(&SceneObject) -> Option<f64>,
        prefer_max: bool,
    ) -> Result<Value, String> {
        let label = match label {
            Some(Expr::Str(s)) => Some(s.as_str()),
            _ => None,
        };
        let mut best: Option<(f64, ObjectId)> = None;
        for o in self.scene.objects() {
            if let Some(l) = label {
                if !o.label.as_deref().is_some_and(|ol| ol.eq_ignore_ascii_case(l)) {
                    continue;
                }
            }
            let Some(k) = key(o) else { continue };
            let better = match best {
                None => true,
                Some((b, _)) => if prefer_max { k > b } else { k < b },
            };
            if better {
                best = Some((k, o.id));
            }
        }
        best.map(|(_, id)| Value::Obj(id)).ok_or_else(|| match label {
            Some(l) => format!("no object labeled `{l}` qualifies"),
            None => "no object qualifies".to_string(),
        })
    }

    fn eval(&self, e: &Expr) -> Result<Value, String> {
        let (func, args) = match e {
            Expr::Int(n) => return Ok(Value::Num(*n as f64)),
            Expr::Str(s) => return Err(format!("string \"{s}\" is not a value")),
            Expr::Call(f, args) => (*f, args),
        };
        Ok(match func {
            Func::Centroid => {
                let (x, y) = self.centroid(&args[0])?;
                Value::Point(x, y)
            }
            Func::Area => Value::Num(self.object(&args[0])?.mask.area() as f64),
            Func::Depth => {
                let o = self.object(&args[0])?;
                Value::Num(o.depth.ok_or_else(|| format!("object {} has no depth", o.id))?)
            }
            Func::LeftOf | Func::RightOf | Func::Above | Func::Below => {
                let (ax, ay) = self.centroid(&args[0])?;
                let (bx, by) = self.centroid(&args[1])?;
                Value::Bool(match func {
                    Func::LeftOf => ax < bx,
                    Func::RightOf => ax > bx,
                    Func::Above => ay < by,
                    _ => ay > by,
                })
            }
            Func::Distance => {
                let (ax, ay) = self.centroid(&args[0])?;
                let (bx, by) = self.centroid(&args[1])?;
                Value::Num((ax - bx).hypot(ay - by))
            }
            Func::Nearest => self.select(args.first(), |o| o.depth, false)?,
            Func::Farthest => self.select(args.first(), |o| o.depth, true)?,
            Func::Largest => self.select(args.first(), |o| Some(o.mask.area() as f64), true)?,
            Func::Smallest => self.select(args.first(), |o| Some(o.mask.area() as f64), false)?,
            Func::Count => {
                let Expr::Str(label) = &args[0] else { unreachable!("checked at parse") };
                let n = self
                    .scene
                    .objects()
                    .iter()
                    .filter(|o| o.label.as_deref().is_some_and(|l| l.eq_ignore_ascii_case(label)))
                    .count();
                Value::Num(n as f64)
            }
        })
    }
}

/// Evaluates every statement against `scene` and returns the scene with the
/// results stored and the revision advanced by one. Nothing is stored when
/// any statement fails.
pub fn interpret_spatial(scene: &SceneRep, program: &SpatialProgram) -> Result<SceneRep, ReasoningError> {
    let ev = Eval { scene };
    let mut results = Vec::with_capacity(program.statements.len());
    for (i, st) in program.statements.iter().enumerate() {
        if let Target::Object(id, _) = &st.target {
            if !scene.contains(*id) {
                return Err(dsl_err(i, format!("output object {id} does not exist")));
            }
        }
        let value = ev.eval(&st.expr).map_err(|m| dsl_err(i, m))?;
        results.push((st.target.clone(), value.into_attr()));
    }
    let mut out = scene.clone();
    for (target, value) in results {
        match target {
            Target::Scene(name) => {
                out.attrs.insert(name, value);
            }
            Target::Object(id, name) => {
                out.get_mut(id).expect("checked above").attrs.insert(name, value);
            }
        }
    }
    out.bump_revision();
    Ok(out)
}
