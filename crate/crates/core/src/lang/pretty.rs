use std::fmt::Write;

use super::ast::{Path, PathStep, Program};
use super::decls::Declarations;
use super::parser::{Anchor, Annotation};
use crate::operator::{ComplexMatrix, C64};

/// Shortest round-trippable text for a real number.
pub fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}

pub fn fmt_complex(z: C64) -> String {
    if z.im == 0.0 {
        fmt_real(z.re)
    } else if z.re == 0.0 {
        format!("{}i", fmt_real(z.im))
    } else if z.im < 0.0 {
        format!("{}-{}i", fmt_real(z.re), fmt_real(-z.im))
    } else {
        format!("{}+{}i", fmt_real(z.re), fmt_real(z.im))
    }
}

pub fn fmt_matrix(m: &ComplexMatrix) -> String {
    let rows: Vec<String> = (0..m.rows())
        .map(|r| {
            let cells: Vec<String> = (0..m.cols()).map(|c| fmt_complex(m.get(r, c))).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn atomic(p: &Program) -> Option<String> {
    match p {
        Program::Skip => Some("skip;".into()),
        Program::Init { var } => Some(format!("{var} := |0>;")),
        Program::Unitary { gate, vars } => Some(format!("apply {gate}({});", vars.join(", "))),
        _ => None,
    }
}

/// Single-line rendering of a program.
pub fn program_inline(p: &Program) -> String {
    if let Some(s) = atomic(p) {
        return s;
    }
    match p {
        Program::Seq(a, b) => format!("{} {}", program_inline(a), program_inline(b)),
        Program::Case { meas, vars, branches } => {
            let bs: Vec<String> =
                branches.iter().map(|(l, b)| format!("{l}: {{ {} }}", program_inline(b))).collect();
            format!("case {meas}({}) {{ {} }}", vars.join(", "), bs.join(" "))
        }
        Program::While { meas, vars, cont, body } => {
            format!("while {meas}({}) == {cont} {{ {} }}", vars.join(", "), program_inline(body))
        }
        _ => unreachable!(),
    }
}

/// Full source text for a file: declarations, program and annotations.
/// Parsing the output gives back the same declarations, program and annotations
/// whenever the program's sequences are left-nested, as the parser produces them.
pub fn pretty_file(decls: &Declarations, program: &Program, annotations: &[Annotation]) -> String {
    let mut out = String::new();
    for v in decls.space.vars() {
        let _ = writeln!(out, "var {}: {};", v.name, v.dim);
    }
    for (name, m) in decls.user_gates() {
        let _ = writeln!(out, "gate {name} = {};", fmt_matrix(m));
    }
    for (name, meas) in decls.measurements() {
        let _ = writeln!(out, "meas {name} = {{");
        for (l, m) in &meas.outcomes {
            let _ = writeln!(out, "  {l}: {};", fmt_matrix(m));
        }
        out.push_str("};\n");
    }
    for (name, pred) in decls.preds() {
        let _ = writeln!(out, "pred {name} on {} = {};", pred.vars.join(", "), fmt_matrix(&pred.matrix));
    }
    out.push_str("prog ");
    let mut w = Writer { annotations, out };
    w.block(program, &[], 0);
    w.out.push('\n');
    w.out
}

struct Writer<'a> {
    annotations: &'a [Annotation],
    out: String,
}

fn flatten<'p>(p: &'p Program, path: Path, acc: &mut Vec<(Path, &'p Program)>) {
    if let Program::Seq(a, b) = p {
        let mut pa = path.clone();
        pa.push(PathStep::First);
        flatten(a, pa, acc);
        let mut pb = path;
        pb.push(PathStep::Second);
        flatten(b, pb, acc);
    } else {
        acc.push((path, p));
    }
}

impl Writer<'_> {
    fn annots(&mut self, anchor: &Anchor, indent: usize) {
        for a in self.annotations.iter().filter(|a| &a.anchor == anchor) {
            let _ = writeln!(self.out, "{:indent$}@{{ {} }}", "", fmt_matrix(&a.matrix), indent = indent);
        }
    }

    fn block(&mut self, p: &Program, root: &[PathStep], indent: usize) {
        self.out.push_str("{\n");
        let mut stmts = Vec::new();
        flatten(p, root.to_vec(), &mut stmts);
        for (path, s) in stmts {
            self.stmt(s, &path, indent + 2);
        }
        self.annots(&Anchor::After(root.to_vec()), indent + 2);
        let _ = write!(self.out, "{:indent$}}}", "", indent = indent);
    }

    fn stmt(&mut self, p: &Program, path: &Path, indent: usize) {
        self.annots(&Anchor::Before(path.clone()), indent);
        let pad = " ".repeat(indent);
        if let Some(s) = atomic(p) {
            let _ = writeln!(self.out, "{pad}{s}");
            return;
        }
        match p {
            Program::Case { meas, vars, branches } => {
                let _ = writeln!(self.out, "{pad}case {meas}({}) {{", vars.join(", "));
                for (i, (l, b)) in branches.iter().enumerate() {
                    let _ = write!(self.out, "{pad}  {l}: ");
                    let mut bp = path.clone();
                    bp.push(PathStep::Branch(i));
                    self.block(b, &bp, indent + 2);
                    self.out.push('\n');
                }
                let _ = writeln!(self.out, "{pad}}}");
            }
            Program::While { meas, vars, cont, body } => {
                let _ = write!(self.out, "{pad}while {meas}({}) == {cont} ", vars.join(", "));
                let mut bp = path.clone();
                bp.push(PathStep::Body);
                self.block(body, &bp, indent);
                self.out.push('\n');
            }
            _ => unreachable!(),
        }
    }
}
