//! ISCAS `.bench` reader and writer.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{GateType, Netlist, NetlistError, Node, NodeId, Port};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: undefined signal `{name}`")]
    Undefined { line: usize, name: String },
    #[error("line {line}: duplicate definition of `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("cyclic netlist: {0}")]
    Cycle(String),
    #[error("invalid netlist: {0}")]
    Invalid(NetlistError),
}

struct GateLine<'a> {
    line: usize,
    name: &'a str,
    kind: GateType,
    args: Vec<&'a str>,
}

enum Item<'a> {
    Input(&'a str),
    Gate(GateLine<'a>),
}

fn split_call(s: &str) -> Option<(&str, &str)> {
    let open = s.find('(')?;
    let close = s.rfind(')')?;
    if close < open || !s[close + 1..].trim().is_empty() {
        return None;
    }
    Some((s[..open].trim(), &s[open + 1..close]))
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| !c.is_whitespace() && !matches!(c, '(' | ')' | ',' | '=' | '#'))
}

/// Parse `.bench` text. Node order follows the file order of `INPUT` and
/// gate definitions; gate keywords are case-insensitive.
pub fn parse_bench(text: &str) -> Result<Netlist, ParseError> {
    let mut items: Vec<Item> = Vec::new();
    let mut outputs: Vec<(usize, &str)> = Vec::new();
    let mut defined: HashMap<&str, usize> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let syntax = |msg: &str| ParseError::Syntax {
            line,
            msg: msg.to_string(),
        };
        if let Some(eq) = body.find('=') {
            let name = body[..eq].trim();
            if !valid_ident(name) {
                return Err(syntax("bad signal name on left of `=`"));
            }
            let (kw, args) = split_call(body[eq + 1..].trim())
                .ok_or_else(|| syntax("expected `GATE(args)` after `=`"))?;
            let kind: GateType = kw.parse().map_err(|e: String| syntax(&e))?;
            if matches!(kind, GateType::Input | GateType::Output) {
                return Err(syntax("INPUT/OUTPUT cannot be used as a gate"));
            }
            let args: Vec<&str> = if args.trim().is_empty() {
                Vec::new()
            } else {
                args.split(',').map(str::trim).collect()
            };
            if args.iter().any(|a| !valid_ident(a)) {
                return Err(syntax("empty or malformed gate argument"));
            }
            if !kind.arity_ok(args.len()) {
                return Err(syntax(&format!(
                    "{kind} cannot take {} input(s)",
                    args.len()
                )));
            }
            if defined.insert(name, line).is_some() {
                return Err(ParseError::Duplicate {
                    line,
                    name: name.to_string(),
                });
            }
            items.push(Item::Gate(GateLine {
                line,
                name,
                kind,
                args,
            }));
        } else {
            let (kw, arg) = split_call(body).ok_or_else(|| syntax("unrecognised statement"))?;
            let arg = arg.trim();
            if !valid_ident(arg) {
                return Err(syntax("bad port name"));
            }
            match kw.to_ascii_uppercase().as_str() {
                "INPUT" => {
                    if defined.insert(arg, line).is_some() {
                        return Err(ParseError::Duplicate {
                            line,
                            name: arg.to_string(),
                        });
                    }
                    items.push(Item::Input(arg));
                }
                "OUTPUT" => {
                    if outputs.iter().any(|(_, o)| *o == arg) {
                        return Err(ParseError::Duplicate {
                            line,
                            name: arg.to_string(),
                        });
                    }
                    outputs.push((line, arg));
                }
                _ => return Err(syntax(&format!("unknown declaration `{kw}`"))),
            }
        }
    }

    let index: HashMap<&str, NodeId> = items
        .iter()
        .enumerate()
        .map(|(i, it)| match it {
            Item::Input(n) => (*n, NodeId(i)),
            Item::Gate(g) => (g.name, NodeId(i)),
        })
        .collect();
    let lookup = |line: usize, name: &str| {
        index.get(name).copied().ok_or_else(|| ParseError::Undefined {
            line,
            name: name.to_string(),
        })
    };

    let mut nodes = Vec::with_capacity(items.len());
    let mut inputs = Vec::new();
    for (i, it) in items.iter().enumerate() {
        match it {
            Item::Input(name) => {
                inputs.push(NodeId(i));
                nodes.push(Node {
                    name: name.to_string(),
                    kind: GateType::Input,
                    fanin: Vec::new(),
                });
            }
            Item::Gate(g) => {
                let fanin = g
                    .args
                    .iter()
                    .map(|a| lookup(g.line, a))
                    .collect::<Result<Vec<_>, _>>()?;
                nodes.push(Node {
                    name: g.name.to_string(),
                    kind: g.kind,
                    fanin,
                });
            }
        }
    }
    let outputs = outputs
        .iter()
        .map(|&(line, name)| {
            Ok(Port {
                node: lookup(line, name)?,
                name: name.to_string(),
            })
        })
        .collect::<Result<Vec<_>, ParseError>>()?;

    Netlist::new(nodes, inputs, outputs).map_err(|e| match e {
        NetlistError::Cycle(n) => ParseError::Cycle(format!("cycle through `{n}`")),
        other => ParseError::Invalid(other),
    })
}

/// Serialise to `.bench`. Gates are written in node order. An output whose
/// port name differs from its driver's name is emitted through a `BUF`.
pub fn write_bench(n: &Netlist) -> String {
    let mut out = String::new();
    for &pi in n.inputs() {
        let _ = writeln!(out, "INPUT({})", n.node(pi).name);
    }
    for po in n.outputs() {
        let _ = writeln!(out, "OUTPUT({})", po.name);
    }
    if !n.is_empty() {
        out.push('\n');
    }
    for node in n.nodes() {
        if node.kind == GateType::Input {
            continue;
        }
        let args: Vec<&str> = node
            .fanin
            .iter()
            .map(|f| n.node(*f).name.as_str())
            .collect();
        let _ = writeln!(out, "{} = {}({})", node.name, node.kind, args.join(", "));
    }
    for po in n.outputs() {
        let driver = &n.node(po.node).name;
        if *driver != po.name {
            let _ = writeln!(out, "{} = BUF({})", po.name, driver);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const C17: &str = include_str!("../../../../benchmarks/c17.bench");

    #[test]
    fn minimal_not() {
        let n = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)").unwrap();
        // Three elements: PI `a`, gate `y`, and the PO marker on `y`.
        assert_eq!(n.len() + n.outputs().len(), 3);
        assert_eq!(n.len(), 2);
        assert_eq!(n.inputs().len(), 1);
        assert_eq!(n.outputs().len(), 1);
        let text = write_bench(&n);
        assert_eq!(text.matches("= NOT(").count(), 1);
    }

    #[test]
    fn c17_counts() {
        let n = parse_bench(C17).unwrap();
        assert_eq!(n.inputs().len(), 5);
        assert_eq!(n.outputs().len(), 2);
        assert_eq!(
            n.nodes().iter().filter(|x| x.kind == GateType::Nand).count(),
            6
        );
        let text = write_bench(&n);
        assert_eq!(text.lines().filter(|l| l.contains(" = ")).count(), 6);
        assert_eq!(text.lines().filter(|l| l.starts_with("INPUT(")).count(), 5);
        assert_eq!(text.lines().filter(|l| l.starts_with("OUTPUT(")).count(), 2);
    }

    #[test]
    fn undefined_signal() {
        let err = parse_bench("y = NOT(a)").unwrap_err();
        assert_eq!(
            err,
            ParseError::Undefined {
                line: 1,
                name: "a".into()
            }
        );
    }

    #[test]
    fn duplicate_and_syntax_errors() {
        let err = parse_bench("INPUT(a)\nINPUT(a)").unwrap_err();
        assert!(matches!(err, ParseError::Duplicate { line: 2, .. }));
        let err = parse_bench("INPUT(a)\ny = FROB(a)").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, .. }));
        let err = parse_bench("INPUT(a)\n\n\ny = NOT(a, a)").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 4, .. }));
        let err = parse_bench("INPUT(a)\ny = AND(a,)").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, .. }));
    }

    #[test]
    fn cycle_is_reported() {
        let err = parse_bench("INPUT(a)\nx = AND(a, y)\ny = NOT(x)").unwrap_err();
        assert!(matches!(err, ParseError::Cycle(_)));
    }

    #[test]
    fn empty_netlist_writes_empty_body() {
        let n = parse_bench("# nothing here\n\n").unwrap();
        assert!(n.is_empty());
        assert_eq!(write_bench(&n), "");
    }

    #[test]
    fn case_insensitive_and_forward_refs() {
        let n = parse_bench("input(a)\noutput(z)\nz = nand(a, m)\nm = buff(a)").unwrap();
        assert_eq!(n.node(NodeId(1)).kind, GateType::Nand);
        assert_eq!(n.node(NodeId(2)).kind, GateType::Buf);
    }

    #[test]
    fn output_alias_goes_through_buf() {
        let n = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)").unwrap();
        let renamed = Netlist::new(
            n.nodes().to_vec(),
            n.inputs().to_vec(),
            vec![Port {
                node: NodeId(1),
                name: "out".into(),
            }],
        )
        .unwrap();
        let text = write_bench(&renamed);
        assert!(text.contains("out = BUF(y)"));
        parse_bench(&text).unwrap();
    }
}
