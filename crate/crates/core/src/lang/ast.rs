use std::fmt;

use serde::Serialize;

/// One step from a node to a child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PathStep {
    First,
    Second,
    Branch(usize),
    Body,
}

/// Address of a subprogram, as a sequence of steps from the root.
pub type Path = Vec<PathStep>;

pub fn path_to_string(path: &[PathStep]) -> String {
    if path.is_empty() {
        return "root".into();
    }
    path.iter()
        .map(|s| match s {
            PathStep::First => "1".to_string(),
            PathStep::Second => "2".to_string(),
            PathStep::Branch(i) => format!("b{i}"),
            PathStep::Body => "body".to_string(),
        })
        .collect::<Vec<_>>()
        .join(".")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Program {
    Skip,
    /// `q := |0⟩`
    Init { var: String },
    /// `q̄ := U[q̄]`
    Unitary { gate: String, vars: Vec<String> },
    Seq(Box<Program>, Box<Program>),
    /// Measurement-driven case statement; one branch per outcome label.
    Case { meas: String, vars: Vec<String>, branches: Vec<(String, Program)> },
    /// Loop that continues on outcome `cont` and exits on the other outcome.
    While { meas: String, vars: Vec<String>, cont: String, body: Box<Program> },
}

impl Program {
    pub fn seq(a: Program, b: Program) -> Program {
        Program::Seq(Box::new(a), Box::new(b))
    }

    /// Left-nested sequence of statements; the empty list is `skip`.
    pub fn seq_all(stmts: Vec<Program>) -> Program {
        let mut it = stmts.into_iter();
        match it.next() {
            None => Program::Skip,
            Some(first) => it.fold(first, Program::seq),
        }
    }

    pub fn unitary(gate: &str, vars: &[&str]) -> Program {
        Program::Unitary { gate: gate.into(), vars: vars.iter().map(|v| v.to_string()).collect() }
    }

    pub fn init(var: &str) -> Program {
        Program::Init { var: var.into() }
    }

    pub fn is_loop_free(&self) -> bool {
        match self {
            Program::Skip | Program::Init { .. } | Program::Unitary { .. } => true,
            Program::Seq(a, b) => a.is_loop_free() && b.is_loop_free(),
            Program::Case { branches, .. } => branches.iter().all(|(_, p)| p.is_loop_free()),
            Program::While { .. } => false,
        }
    }

    /// Child reached by one step.
    pub fn child(&self, step: PathStep) -> Option<&Program> {
        match (self, step) {
            (Program::Seq(a, _), PathStep::First) => Some(a),
            (Program::Seq(_, b), PathStep::Second) => Some(b),
            (Program::Case { branches, .. }, PathStep::Branch(i)) => branches.get(i).map(|(_, p)| p),
            (Program::While { body, .. }, PathStep::Body) => Some(body),
            _ => None,
        }
    }

    pub fn at_path(&self, path: &[PathStep]) -> Option<&Program> {
        path.iter().try_fold(self, |node, &s| node.child(s))
    }

    /// Every variable mentioned, in order of first occurrence.
    pub fn mentioned_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        let mut push = |v: &String| {
            if !out.contains(v) {
                out.push(v.clone());
            }
        };
        match self {
            Program::Skip => {}
            Program::Init { var } => push(var),
            Program::Unitary { vars, .. } => vars.iter().for_each(push),
            Program::Seq(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Program::Case { vars, branches, .. } => {
                vars.iter().for_each(push);
                for (_, p) in branches {
                    p.collect_vars(out);
                }
            }
            Program::While { vars, body, .. } => {
                vars.iter().for_each(push);
                body.collect_vars(out);
            }
        }
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            Program::Skip | Program::Init { .. } | Program::Unitary { .. } => 1,
            Program::Seq(a, b) => 1 + a.size() + b.size(),
            Program::Case { branches, .. } => 1 + branches.iter().map(|(_, p)| p.size()).sum::<usize>(),
            Program::While { body, .. } => 1 + body.size(),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::lang::pretty::program_inline(self))
    }
}

/// Source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}
