//! Surface language: lexing, parsing, declarations and program structure.

pub mod ast;
pub mod decls;
pub mod error;
pub mod expr;
pub mod lexer;
pub mod parser;
pub mod pretty;

pub use ast::{path_to_string, Path, PathStep, Program, Span};
pub use decls::{Declarations, Measurement, NamedPredicate};
pub use error::{LangError, LangErrorKind};
pub use parser::{parse, parse_operator, parse_predicate, parse_state, parse_with, Anchor, Annotation, ParsedFile};

fn extend(path: &[PathStep], step: PathStep) -> Path {
    let mut p = path.to_vec();
    p.push(step);
    p
}

/// Descends through first components of sequences.
pub fn leftmost_leaf(root: &Program, path: &[PathStep]) -> Path {
    let mut p = path.to_vec();
    while let Some(Program::Seq(..)) = root.at_path(&p) {
        p.push(PathStep::First);
    }
    p
}

/// The location control reaches after the statement at `path` finishes,
/// or `None` when the whole program has terminated.
pub fn next_location(root: &Program, path: &[PathStep]) -> Option<Path> {
    let (last, parent) = path.split_last()?;
    match last {
        PathStep::First => Some(leftmost_leaf(root, &extend(parent, PathStep::Second))),
        PathStep::Second | PathStep::Branch(_) => next_location(root, parent),
        PathStep::Body => Some(parent.to_vec()),
    }
}

/// The program that remains to run when control sits at `path`.
pub fn at_remainder(root: &Program, path: &[PathStep]) -> Option<Program> {
    let Some((step, rest)) = path.split_first() else {
        return Some(root.clone());
    };
    match (step, root) {
        (PathStep::First, Program::Seq(a, b)) => Some(Program::seq(at_remainder(a, rest)?, (**b).clone())),
        (PathStep::Second, Program::Seq(_, b)) => at_remainder(b, rest),
        (PathStep::Branch(i), Program::Case { branches, .. }) => at_remainder(&branches.get(*i)?.1, rest),
        (PathStep::Body, Program::While { body, .. }) => Some(Program::seq(at_remainder(body, rest)?, root.clone())),
        _ => None,
    }
}

/// Paths of all non-sequence statements, in pre-order.
pub fn locations(root: &Program) -> Vec<Path> {
    fn go(p: &Program, path: Path, out: &mut Vec<Path>) {
        match p {
            Program::Seq(a, b) => {
                go(a, extend(&path, PathStep::First), out);
                go(b, extend(&path, PathStep::Second), out);
            }
            Program::Case { branches, .. } => {
                out.push(path.clone());
                for (i, (_, b)) in branches.iter().enumerate() {
                    go(b, extend(&path, PathStep::Branch(i)), out);
                }
            }
            Program::While { body, .. } => {
                out.push(path.clone());
                go(body, extend(&path, PathStep::Body), out);
            }
            _ => out.push(path),
        }
    }
    let mut out = Vec::new();
    go(root, Vec::new(), &mut out);
    out
}

/// Every subprogram with its path, in pre-order, including sequences.
pub fn subprograms(root: &Program) -> Vec<(Path, &Program)> {
    fn go<'a>(p: &'a Program, path: Path, out: &mut Vec<(Path, &'a Program)>) {
        out.push((path.clone(), p));
        match p {
            Program::Seq(a, b) => {
                go(a, extend(&path, PathStep::First), out);
                go(b, extend(&path, PathStep::Second), out);
            }
            Program::Case { branches, .. } => {
                for (i, (_, b)) in branches.iter().enumerate() {
                    go(b, extend(&path, PathStep::Branch(i)), out);
                }
            }
            Program::While { body, .. } => go(body, extend(&path, PathStep::Body), out),
            _ => {}
        }
    }
    let mut out = Vec::new();
    go(root, Vec::new(), &mut out);
    out
}
