//! CPLEX-style LP text format.
//!
//! [`write_lp`] emits a `Bounds` line for every variable in id order, so
//! [`parse_lp`] reproduces the same variable ids. Only continuous and binary
//! variables with finite bounds are supported.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Comparison, Integrality, ModelError, ModelSpec, Sense, VarId};

#[derive(Debug, Error)]
pub enum LpFormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unsupported LP feature: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || "_!\"#$%&()/,;?@`'{}|~".contains(c) => {}
        _ => return false,
    }
    name.len() <= 255
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "_!\"#$%&()/,.;?@`'{}|~[]".contains(c))
        && !matches!(
            name.to_ascii_lowercase().as_str(),
            "free" | "end" | "bounds" | "bound" | "binary" | "binaries" | "bin" | "st" | "inf" | "infinity"
        )
}

/// Writes each variable under its own name when that name is a valid,
/// unique LP identifier, otherwise as `x<id>`.
pub fn write_lp(model: &ModelSpec) -> String {
    let mut seen = HashMap::new();
    let names: Vec<String> = model
        .variables()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let fallback = format!("x{i}");
            let candidate = if valid_name(&v.name) { v.name.clone() } else { fallback.clone() };
            if seen.insert(candidate.clone(), i).is_some() {
                let mut alt = format!("{fallback}_");
                while seen.contains_key(&alt) {
                    alt.push('_');
                }
                seen.insert(alt.clone(), i);
                alt
            } else {
                candidate
            }
        })
        .collect();
    let expr = |terms: &[(VarId, f64)]| -> String {
        if terms.is_empty() {
            return "0 ".to_string() + &names.first().cloned().unwrap_or_default();
        }
        let mut s = String::new();
        for (k, &(v, a)) in terms.iter().enumerate() {
            let sign = if a < 0.0 { "-" } else { "+" };
            if k == 0 {
                if a < 0.0 {
                    s.push_str("- ");
                }
            } else {
                let _ = write!(s, " {sign} ");
            }
            let _ = write!(s, "{:?} {}", a.abs(), names[v.0]);
        }
        s
    };
    let mut out = String::new();
    out.push_str(match model.sense() {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    if model.objective().is_empty() && model.num_variables() == 0 {
        out.push_str(" obj:\n");
    } else {
        let _ = writeln!(out, " obj: {}", expr(model.objective()));
    }
    out.push_str("Subject To\n");
    for (i, c) in model.constraints().iter().enumerate() {
        let label = if valid_name(&c.name) { c.name.clone() } else { format!("c{i}") };
        let lhs = if c.terms.is_empty() {
            format!("0 {}", names.first().cloned().unwrap_or_else(|| "x0".into()))
        } else {
            expr(&c.terms)
        };
        let _ = writeln!(out, " {label}: {lhs} {} {:?}", c.cmp.symbol(), c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, name) in model.variables().iter().zip(&names) {
        let _ = writeln!(out, " {:?} <= {name} <= {:?}", v.lower, v.upper);
    }
    let bins: Vec<&str> = model
        .variables()
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.integrality == Integrality::Binary)
        .map(|(_, n)| n.as_str())
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for b in bins {
            let _ = writeln!(out, " {b}");
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Plus,
    Minus,
    Colon,
    Cmp(Comparison),
}

fn tokenize(line: &str, lineno: usize) -> Result<Vec<Tok>, LpFormatError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '+' {
            toks.push(Tok::Plus);
            i += 1;
        } else if c == '-' {
            toks.push(Tok::Minus);
            i += 1;
        } else if c == ':' {
            toks.push(Tok::Colon);
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            if j < chars.len() && (chars[j] == '=' || chars[j] == '<' || chars[j] == '>') {
                j += 1;
            }
            let op: String = chars[i..j].iter().collect();
            let cmp = match op.as_str() {
                "<" | "<=" | "=<" => Comparison::Le,
                ">" | ">=" | "=>" => Comparison::Ge,
                "=" | "==" => Comparison::Eq,
                _ => {
                    return Err(LpFormatError::Syntax {
                        line: lineno,
                        msg: format!("bad operator `{op}`"),
                    })
                }
            };
            toks.push(Tok::Cmp(cmp));
            i = j;
        } else if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len() {
                let d = chars[j];
                let exp_sign = (d == '+' || d == '-') && j > i && matches!(chars[j - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    j += 1;
                } else {
                    break;
                }
            }
            let text: String = chars[i..j].iter().collect();
            let v = text.parse::<f64>().map_err(|_| LpFormatError::Syntax {
                line: lineno,
                msg: format!("bad number `{text}`"),
            })?;
            toks.push(Tok::Num(v));
            i = j;
        } else {
            let mut j = i;
            while j < chars.len() && !chars[j].is_whitespace() && !"+-:<>=".contains(chars[j]) {
                j += 1;
            }
            let name: String = chars[i..j].iter().collect();
            match name.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => toks.push(Tok::Num(f64::INFINITY)),
                _ => toks.push(Tok::Name(name)),
            }
            i = j;
        }
    }
    Ok(toks)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn section_header(line: &str) -> Option<Result<(Section, Option<Sense>), String>> {
    let lower = line.trim().to_ascii_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    let head = words.join(" ");
    Some(Ok(match head.as_str() {
        "maximize" | "maximise" | "maximum" | "max" => (Section::Objective, Some(Sense::Maximize)),
        "minimize" | "minimise" | "minimum" | "min" => (Section::Objective, Some(Sense::Minimize)),
        "subject to" | "such that" | "st" | "s.t." | "st." => (Section::Constraints, None),
        "bounds" | "bound" => (Section::Bounds, None),
        "binary" | "binaries" | "bin" => (Section::Binaries, None),
        "end" => (Section::End, None),
        "general" | "generals" | "gen" | "semi-continuous" | "semis" | "semi" | "sos" => {
            return Some(Err(head));
        }
        _ => return None,
    }))
}

struct Linear {
    label: Option<String>,
    terms: Vec<(String, f64)>,
    cmp: Option<Comparison>,
    rhs: f64,
}

fn parse_linear(toks: &[Tok], line: usize) -> Result<Linear, LpFormatError> {
    let err = |msg: &str| LpFormatError::Syntax {
        line,
        msg: msg.to_string(),
    };
    let mut pos = 0;
    let mut label = None;
    if let (Some(Tok::Name(n)), Some(Tok::Colon)) = (toks.first(), toks.get(1)) {
        label = Some(n.clone());
        pos = 2;
    }
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    let mut cmp = None;
    let mut rhs = 0.0;
    while pos < toks.len() {
        match &toks[pos] {
            Tok::Plus => {}
            Tok::Minus => sign = -sign,
            Tok::Num(v) => {
                if coef.is_some() {
                    return Err(err("two numbers in a row"));
                }
                coef = Some(*v);
            }
            Tok::Name(n) => {
                terms.push((n.clone(), sign * coef.unwrap_or(1.0)));
                sign = 1.0;
                coef = None;
            }
            Tok::Colon => return Err(err("unexpected `:`")),
            Tok::Cmp(c) => {
                if coef.is_some() {
                    return Err(err("constant terms on the left-hand side are not supported"));
                }
                cmp = Some(*c);
                let rest = &toks[pos + 1..];
                let mut s = 1.0;
                let mut value = None;
                for t in rest {
                    match t {
                        Tok::Plus => {}
                        Tok::Minus => s = -s,
                        Tok::Num(v) if value.is_none() => value = Some(s * v),
                        _ => return Err(err("right-hand side must be a single number")),
                    }
                }
                rhs = value.ok_or_else(|| err("missing right-hand side"))?;
                pos = toks.len();
                continue;
            }
        }
        pos += 1;
    }
    if coef.is_some() {
        return Err(err("constant terms are not supported"));
    }
    Ok(Linear {
        label,
        terms,
        cmp,
        rhs,
    })
}

/// Reads a model written by [`write_lp`] (or a compatible subset of the
/// format: continuous and binary variables, finite bounds).
pub fn parse_lp(text: &str) -> Result<ModelSpec, LpFormatError> {
    let mut sense = Sense::Minimize;
    let mut section: Option<Section> = None;
    // (first line number, accumulated tokens) per statement
    let mut objective: Vec<Tok> = Vec::new();
    let mut constraints: Vec<(usize, Vec<Tok>)> = Vec::new();
    let mut bound_lines: Vec<(usize, Vec<Tok>)> = Vec::new();
    let mut binaries: Vec<(usize, String)> = Vec::new();
    let mut pending: Option<(usize, Vec<Tok>)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(h) = section_header(line) {
            let (s, sn) = h.map_err(LpFormatError::Unsupported)?;
            if let Some(p) = pending.take() {
                constraints.push(p);
            }
            section = Some(s);
            if let Some(sn) = sn {
                sense = sn;
            }
            if s == Section::End {
                break;
            }
            continue;
        }
        let toks = tokenize(line, lineno)?;
        match section {
            None => {
                return Err(LpFormatError::Syntax {
                    line: lineno,
                    msg: "content before the objective section".into(),
                })
            }
            Some(Section::Objective) => objective.extend(toks),
            Some(Section::Constraints) => {
                let starts_new = matches!((toks.first(), toks.get(1)), (Some(Tok::Name(_)), Some(Tok::Colon)));
                let complete = |t: &[Tok]| {
                    t.iter().position(|x| matches!(x, Tok::Cmp(_))).is_some_and(|p| {
                        t[p + 1..].iter().any(|x| matches!(x, Tok::Num(_)))
                    })
                };
                match pending.take() {
                    Some((l, mut acc)) if !starts_new && !complete(&acc) => {
                        acc.extend(toks);
                        pending = Some((l, acc));
                    }
                    prev => {
                        if let Some(p) = prev {
                            constraints.push(p);
                        }
                        pending = Some((lineno, toks));
                    }
                }
            }
            Some(Section::Bounds) => bound_lines.push((lineno, toks)),
            Some(Section::Binaries) => {
                for t in toks {
                    match t {
                        Tok::Name(n) => binaries.push((lineno, n)),
                        _ => {
                            return Err(LpFormatError::Syntax {
                                line: lineno,
                                msg: "expected variable names".into(),
                            })
                        }
                    }
                }
            }
            Some(Section::End) => unreachable!(),
        }
    }
    if let Some(p) = pending.take() {
        constraints.push(p);
    }

    // Declaration order: bounds first (keeps ids stable), then anything
    // else in order of appearance.
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut declare = |name: &str, order: &mut Vec<String>| -> usize {
        if let Some(&i) = index.get(name) {
            return i;
        }
        index.insert(name.to_string(), order.len());
        order.push(name.to_string());
        order.len() - 1
    };
    let mut lower: HashMap<usize, f64> = HashMap::new();
    let mut upper: HashMap<usize, f64> = HashMap::new();
    for (line, toks) in &bound_lines {
        let err = |msg: &str| LpFormatError::Syntax {
            line: *line,
            msg: msg.to_string(),
        };
        // Collapse signs into numbers.
        let mut items: Vec<Tok> = Vec::new();
        let mut sign = 1.0;
        for t in toks {
            match t {
                Tok::Minus => sign = -sign,
                Tok::Plus => {}
                Tok::Num(v) => {
                    items.push(Tok::Num(sign * v));
                    sign = 1.0;
                }
                other => items.push(other.clone()),
            }
        }
        match items.as_slice() {
            [Tok::Name(n), Tok::Name(f)] if f.eq_ignore_ascii_case("free") => {
                return Err(LpFormatError::Model(ModelError::Unbounded { name: n.clone() }));
            }
            [Tok::Num(lo), Tok::Cmp(Comparison::Le), Tok::Name(n), Tok::Cmp(Comparison::Le), Tok::Num(hi)] => {
                let i = declare(n, &mut order);
                lower.insert(i, *lo);
                upper.insert(i, *hi);
            }
            [Tok::Name(n), Tok::Cmp(c), Tok::Num(v)] => {
                let i = declare(n, &mut order);
                match c {
                    Comparison::Le => {
                        upper.insert(i, *v);
                    }
                    Comparison::Ge => {
                        lower.insert(i, *v);
                    }
                    Comparison::Eq => {
                        lower.insert(i, *v);
                        upper.insert(i, *v);
                    }
                }
            }
            [Tok::Num(v), Tok::Cmp(c), Tok::Name(n)] => {
                let i = declare(n, &mut order);
                match c {
                    Comparison::Le => {
                        lower.insert(i, *v);
                    }
                    Comparison::Ge => {
                        upper.insert(i, *v);
                    }
                    Comparison::Eq => {
                        lower.insert(i, *v);
                        upper.insert(i, *v);
                    }
                }
            }
            _ => return Err(err("unrecognised bound")),
        }
    }
    let obj = parse_linear(&objective, 0)?;
    if obj.cmp.is_some() {
        return Err(LpFormatError::Syntax {
            line: 0,
            msg: "comparison in objective".into(),
        });
    }
    let mut rows = Vec::new();
    for (line, toks) in &constraints {
        let lin = parse_linear(toks, *line)?;
        let cmp = lin.cmp.ok_or_else(|| LpFormatError::Syntax {
            line: *line,
            msg: "constraint without comparison".into(),
        })?;
        rows.push((lin, cmp));
    }
    for (t, _) in obj.terms.iter() {
        declare(t, &mut order);
    }
    for (lin, _) in &rows {
        for (t, _) in &lin.terms {
            declare(t, &mut order);
        }
    }
    let mut is_bin = vec![false; order.len()];
    for (_, b) in &binaries {
        let i = declare(b, &mut order);
        if i >= is_bin.len() {
            is_bin.resize(i + 1, false);
        }
        is_bin[i] = true;
    }

    let mut model = ModelSpec::new(sense);
    let mut ids = Vec::with_capacity(order.len());
    for (i, name) in order.iter().enumerate() {
        let (lo, hi) = if is_bin[i] {
            (
                lower.get(&i).copied().unwrap_or(0.0),
                upper.get(&i).copied().unwrap_or(1.0),
            )
        } else {
            (
                lower.get(&i).copied().unwrap_or(0.0),
                upper.get(&i).copied().unwrap_or(f64::INFINITY),
            )
        };
        let integrality = if is_bin[i] { Integrality::Binary } else { Integrality::Continuous };
        ids.push(model.add_variable(name.clone(), lo, hi, integrality)?);
    }
    let lookup = |name: &str| ids[index_of(&order, name)];
    let objective_terms: Vec<(VarId, f64)> = obj
        .terms
        .iter()
        .filter(|(_, a)| *a != 0.0)
        .map(|(n, a)| (lookup(n), *a))
        .collect();
    model.set_objective(sense, objective_terms)?;
    for (i, (lin, cmp)) in rows.into_iter().enumerate() {
        let name = lin.label.unwrap_or_else(|| format!("c{i}"));
        let terms: Vec<(VarId, f64)> = lin
            .terms
            .iter()
            .filter(|(_, a)| *a != 0.0)
            .map(|(n, a)| (lookup(n), *a))
            .collect();
        model.add_constraint(name, terms, cmp, lin.rhs)?;
    }
    Ok(model)
}

fn index_of(order: &[String], name: &str) -> usize {
    order.iter().position(|n| n == name).expect("declared")
}
