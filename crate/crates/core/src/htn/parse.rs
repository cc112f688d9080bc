//! Domain text format: tokenizer, recursive-descent parser, and the
//! static validation pass (arity, unknown symbols, method coverage,
//! primitive-free recursion cycles).

use std::collections::BTreeMap;

use super::{Call, Domain, MethodDef, Pred, PredKind, Term};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error("parse error at {line}:{col}: {what}")]
    Parse { line: usize, col: usize, what: String },
    #[error("invalid domain ({scope}): {what}")]
    Validate { scope: String, what: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, DomainError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
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
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
                line += 1;
                col = 1;
            }
            '(' | ')' | '{' | '}' | ',' => {
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    _ => Tok::Comma,
                };
                out.push(Spanned { tok, line, col });
                chars.next();
                col += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start_col = col;
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        ident.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push(Spanned { tok: Tok::Ident(ident), line, col: start_col });
            }
            other => {
                return Err(DomainError::Parse {
                    line,
                    col,
                    what: format!("unexpected character {other:?}"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn err_here(&self, what: impl Into<String>) -> DomainError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map(|s| (s.line, s.col))
            .or_else(|| self.toks.last().map(|s| (s.line, s.col + 1)))
            .unwrap_or((1, 1));
        DomainError::Parse { line, col, what: what.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn next(&mut self) -> Option<Spanned> {
        let s = self.toks.get(self.pos).cloned();
        if s.is_some() {
            self.pos += 1;
        }
        s
    }

    fn expect_ident(&mut self, role: &str) -> Result<(String, usize, usize), DomainError> {
        match self.next() {
            Some(Spanned { tok: Tok::Ident(s), line, col }) => Ok((s, line, col)),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err_here(format!("expected {role}")))
            }
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), DomainError> {
        match self.next() {
            Some(s) if s.tok == tok => Ok(()),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err_here(format!("expected {what}")))
            }
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            return true;
        }
        false
    }

    /// `( name { , name } )`, or nothing.
    fn param_list(&mut self) -> Result<Vec<String>, DomainError> {
        let mut params = Vec::new();
        if !self.eat(&Tok::LParen) {
            return Ok(params);
        }
        loop {
            let (name, _, _) = self.expect_ident("parameter name")?;
            params.push(name);
            if self.eat(&Tok::Comma) {
                continue;
            }
            self.expect(Tok::RParen, "')'")?;
            return Ok(params);
        }
    }

    /// A call or predicate: `name` or `name(arg, ...)`.
    fn call(&mut self, role: &str) -> Result<Call, DomainError> {
        let (name, line, col) = self.expect_ident(role)?;
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                let (arg, _, _) = self.expect_ident("argument")?;
                args.push(Term::Const(arg));
                if self.eat(&Tok::Comma) {
                    continue;
                }
                self.expect(Tok::RParen, "')'")?;
                break;
            }
        }
        Ok(Call { name, args, line, col })
    }
}

/// Parses and statically validates a domain text.
pub fn load_domain(text: &str) -> Result<Domain, DomainError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0 };

    match p.next() {
        Some(Spanned { tok: Tok::Ident(kw), .. }) if kw == "domain" => {}
        _ => {
            p.pos = p.pos.saturating_sub(1);
            return Err(p.err_here("expected 'domain <name>' at the top of the file"));
        }
    }
    let (name, _, _) = p.expect_ident("domain name")?;

    let mut tasks: BTreeMap<String, usize> = BTreeMap::new();
    let mut methods: Vec<MethodDef> = Vec::new();

    while let Some(tok) = p.peek() {
        let kw = match tok {
            Tok::Ident(s) => s.clone(),
            _ => return Err(p.err_here("expected 'task' or 'method'")),
        };
        match kw.as_str() {
            "task" => {
                p.next();
                let (task, line, col) = p.expect_ident("task name")?;
                let params = p.param_list()?;
                if tasks.insert(task.clone(), params.len()).is_some() {
                    return Err(DomainError::Parse {
                        line,
                        col,
                        what: format!("task {task} declared twice"),
                    });
                }
            }
            "method" => {
                p.next();
                let (task, _, _) = p.expect_ident("task name")?;
                let params = p.param_list()?;
                let (mname, _, _) = p.expect_ident("method name")?;
                p.expect(Tok::LBrace, "'{'")?;
                let mut pre = Vec::new();
                let mut subtasks = Vec::new();
                loop {
                    if p.eat(&Tok::RBrace) {
                        break;
                    }
                    let (stmt, _, _) = p.expect_ident("'pre', 'do' or '}'")?;
                    match stmt.as_str() {
                        "pre" => loop {
                            let negated = matches!(p.peek(), Some(Tok::Ident(s)) if s == "not");
                            if negated {
                                p.next();
                            }
                            let call = p.call("predicate")?;
                            pre.push((negated, call));
                            if !p.eat(&Tok::Comma) {
                                break;
                            }
                        },
                        "do" => subtasks.push(p.call("subtask")?),
                        other => {
                            p.pos = p.pos.saturating_sub(1);
                            return Err(p.err_here(format!(
                                "expected 'pre', 'do' or '}}', got {other:?}"
                            )));
                        }
                    }
                }
                methods.push(MethodDef {
                    task,
                    name: mname,
                    params,
                    pre: Vec::new(),
                    raw_pre: pre,
                    subtasks,
                });
            }
            other => {
                return Err(p.err_here(format!("expected 'task' or 'method', got {other:?}")));
            }
        }
    }

    if tasks.is_empty() && methods.is_empty() {
        return Err(DomainError::Parse {
            line: 1,
            col: 1,
            what: "domain declares no tasks".into(),
        });
    }

    finish(name, tasks, methods)
}

/// Primitive action schemata: name -> arity.
pub(super) const PRIMITIVES: [(&str, usize); 6] = [
    ("grasp", 1),
    ("release", 1),
    ("move", 1),
    ("manipulate", 2),
    ("wait", 1),
    ("perceive", 1),
];

fn primitive_arity(name: &str) -> Option<usize> {
    PRIMITIVES.iter().find(|(n, _)| *n == name).map(|(_, a)| *a)
}

fn pred_kind(name: &str) -> Option<(PredKind, usize)> {
    Some(match name {
        "exists" => (PredKind::Exists, 1),
        "delivered" => (PredKind::Delivered, 1),
        "holding" => (PredKind::Holding, 1),
        "free_effector" => (PredKind::FreeEffector, 0),
        "has_count" => (PredKind::HasCount, 1),
        "fastened" => (PredKind::Fastened, 1),
        _ => return None,
    })
}

/// Static validation; also resolves bare names into variables
/// (method parameters) versus constants.
fn finish(
    name: String,
    tasks: BTreeMap<String, usize>,
    mut methods: Vec<MethodDef>,
) -> Result<Domain, DomainError> {
    let invalid = |scope: &str, what: String| DomainError::Validate { scope: scope.into(), what };

    for m in &mut methods {
        let scope = format!("method {}/{}", m.task, m.name);
        let arity = tasks
            .get(&m.task)
            .copied()
            .ok_or_else(|| invalid(&scope, format!("method for undeclared task {}", m.task)))?;
        if m.params.len() != arity {
            return Err(invalid(
                &scope,
                format!("task {} has arity {}, method binds {}", m.task, arity, m.params.len()),
            ));
        }
        if m.subtasks.is_empty() {
            return Err(invalid(&scope, "empty subtask list".into()));
        }
        let params = m.params.clone();
        let resolve = |call: &mut Call| {
            for arg in &mut call.args {
                if let Term::Const(n) = arg {
                    if params.contains(n) {
                        *arg = Term::Var(n.clone());
                    }
                }
            }
        };
        let raw_pre = std::mem::take(&mut m.raw_pre);
        for (negated, mut call) in raw_pre {
            let (kind, want) = pred_kind(&call.name).ok_or_else(|| {
                invalid(&scope, format!("unknown predicate {}", call.name))
            })?;
            if call.args.len() != want {
                return Err(invalid(
                    &scope,
                    format!("predicate {} takes {} argument(s)", call.name, want),
                ));
            }
            resolve(&mut call);
            m.pre.push(Pred { negated, kind, args: call.args });
        }
        for call in &mut m.subtasks {
            resolve(call);
            if let Some(want) = primitive_arity(&call.name) {
                if call.args.len() != want {
                    return Err(invalid(
                        &scope,
                        format!("primitive {} takes {} argument(s)", call.name, want),
                    ));
                }
                check_primitive_constants(&scope, call)?;
            } else if let Some(want) = tasks.get(&call.name) {
                if call.args.len() != *want {
                    return Err(invalid(
                        &scope,
                        format!("task {} has arity {want}", call.name),
                    ));
                }
            } else {
                return Err(invalid(&scope, format!("unknown task or action {}", call.name)));
            }
        }
    }

    for task in tasks.keys() {
        if !methods.iter().any(|m| &m.task == task) {
            return Err(invalid(
                &format!("task {task}"),
                "no decomposition method declared".into(),
            ));
        }
    }

    let mut methods_by_task: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, m) in methods.iter().enumerate() {
        methods_by_task.entry(m.task.clone()).or_default().push(i);
    }

    check_cycles(&tasks, &methods, &methods_by_task)?;

    Ok(Domain { name, tasks, methods, methods_by_task })
}

/// Enumerated argument slots must be constants from the right set, so
/// they can be checked here rather than at decomposition time.
fn check_primitive_constants(scope: &str, call: &Call) -> Result<(), DomainError> {
    let invalid = |what: String| DomainError::Validate { scope: scope.into(), what };
    let constant = |term: &Term, role: &str| -> Result<String, DomainError> {
        match term {
            Term::Const(c) => Ok(c.clone()),
            Term::Var(v) => Err(invalid(format!("{role} must be a constant, got variable {v}"))),
        }
    };
    match call.name.as_str() {
        "wait" => {
            let c = constant(&call.args[0], "wait condition")?;
            if c != "idle" && c != "working" {
                return Err(invalid(format!("wait condition must be idle or working, got {c}")));
            }
        }
        "perceive" => {
            let c = constant(&call.args[0], "perceive channel")?;
            if !["gaze", "imu", "active"].contains(&c.as_str()) {
                return Err(invalid(format!(
                    "perceive channel must be gaze, imu or active, got {c}"
                )));
            }
        }
        "manipulate" => {
            let c = constant(&call.args[1], "manipulate effect")?;
            if c != "decrement" && c != "fasten" {
                return Err(invalid(format!(
                    "manipulate effect must be decrement or fasten, got {c}"
                )));
            }
        }
        _ => {}
    }
    Ok(())
}

/// Rejects decomposition cycles reachable without consuming a
/// primitive: an edge A -> B exists when a method of A reaches
/// compound B before any primitive subtask.
fn check_cycles(
    tasks: &BTreeMap<String, usize>,
    methods: &[MethodDef],
    methods_by_task: &BTreeMap<String, Vec<usize>>,
) -> Result<(), DomainError> {
    let mut edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for m in methods {
        for call in &m.subtasks {
            if primitive_arity(&call.name).is_some() {
                break;
            }
            edges.entry(m.task.as_str()).or_default().push(call.name.as_str());
        }
    }
    // Iterative DFS with colors: 0 unseen, 1 on stack, 2 done.
    let mut color: BTreeMap<&str, u8> = tasks.keys().map(|t| (t.as_str(), 0)).collect();
    for start in tasks.keys() {
        if color[start.as_str()] != 0 {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
        color.insert(start.as_str(), 1);
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            let succs = edges.get(node).map(|v| v.as_slice()).unwrap_or(&[]);
            if *next < succs.len() {
                let succ = succs[*next];
                *next += 1;
                match color.get(succ).copied().unwrap_or(2) {
                    0 => {
                        color.insert(succ, 1);
                        stack.push((succ, 0));
                    }
                    1 => {
                        let offender = methods_by_task
                            .get(node)
                            .and_then(|idxs| idxs.first())
                            .map(|&i| format!("method {}/{}", methods[i].task, methods[i].name))
                            .unwrap_or_else(|| format!("task {node}"));
                        return Err(DomainError::Validate {
                            scope: offender,
                            what: format!(
                                "decomposition can recurse into {succ} without consuming a primitive"
                            ),
                        });
                    }
                    _ => {}
                }
            } else {
                color.insert(node, 2);
                stack.pop();
            }
        }
    }
    Ok(())
}
