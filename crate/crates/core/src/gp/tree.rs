//! Prefix-encoded expression trees with protected arithmetic and the
//! feature-marking `F` operator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::features::FeatureMatrix;
use crate::{Error, Result};

/// Magnitude cap applied to every node's output.
pub const SATURATION: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Ln,
    Sqrt,
    /// Identity that marks its subtree as one constructed feature.
    Feature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Terminal(usize),
    Const(f64),
    Unary(UnaryOp),
    Binary(BinaryOp),
}

impl Node {
    pub fn arity(&self) -> usize {
        match self {
            Node::Terminal(_) | Node::Const(_) => 0,
            Node::Unary(_) => 1,
            Node::Binary(_) => 2,
        }
    }

    pub fn is_feature(&self) -> bool {
        matches!(self, Node::Unary(UnaryOp::Feature))
    }
}

#[inline]
fn saturate(v: f64) -> f64 {
    v.clamp(-SATURATION, SATURATION)
}

/// `a / b`, or 1 when `b == 0`.
#[inline]
pub fn protected_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        1.0
    } else {
        saturate(a / b)
    }
}

/// `ln|a|`, or 1 when `a == 0`.
#[inline]
pub fn protected_ln(a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else {
        a.abs().ln()
    }
}

/// `sqrt|a|`.
#[inline]
pub fn protected_sqrt(a: f64) -> f64 {
    a.abs().sqrt()
}

impl UnaryOp {
    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            UnaryOp::Ln => protected_ln(a),
            UnaryOp::Sqrt => protected_sqrt(a),
            UnaryOp::Feature => a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Ln => "ln",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Feature => "F",
        }
    }
}

impl BinaryOp {
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => saturate(a + b),
            BinaryOp::Sub => saturate(a - b),
            BinaryOp::Mul => saturate(a * b),
            BinaryOp::Div => protected_div(a, b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
        }
    }
}

/// A well-formed tree in prefix order. Depth counts edges, so a lone
/// terminal has depth 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GpTree {
    nodes: Vec<Node>,
}

impl GpTree {
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        let mut need = 1usize;
        for (i, n) in nodes.iter().enumerate() {
            if need == 0 {
                return Err(Error::invalid(format!("extra nodes after position {i}")));
            }
            need = need - 1 + n.arity();
            if let Node::Const(c) = n {
                if !c.is_finite() {
                    return Err(Error::invalid("non-finite constant"));
                }
            }
        }
        if need != 0 || nodes.is_empty() {
            return Err(Error::invalid("prefix encoding is incomplete"));
        }
        Ok(GpTree { nodes })
    }

    pub(crate) fn from_nodes_unchecked(nodes: Vec<Node>) -> Self {
        debug_assert!(GpTree::from_nodes(nodes.clone()).is_ok());
        GpTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// One past the last node of the subtree rooted at `i`.
    pub fn subtree_end(&self, i: usize) -> usize {
        let mut need = 1usize;
        let mut j = i;
        while need > 0 {
            need = need - 1 + self.nodes[j].arity();
            j += 1;
        }
        j
    }

    pub fn subtree(&self, i: usize) -> &[Node] {
        &self.nodes[i..self.subtree_end(i)]
    }

    /// Depth of every node.
    pub fn node_depths(&self) -> Vec<usize> {
        let mut depths = Vec::with_capacity(self.nodes.len());
        // Stack of (depth, remaining children) for open parents.
        let mut open: Vec<(usize, usize)> = Vec::new();
        for n in &self.nodes {
            let d = open.last().map_or(0, |&(d, _)| d + 1);
            depths.push(d);
            if let Some(top) = open.last_mut() {
                top.1 -= 1;
            }
            if n.arity() > 0 {
                open.push((d, n.arity()));
            }
            while matches!(open.last(), Some(&(_, 0))) {
                open.pop();
            }
        }
        depths
    }

    pub fn depth(&self) -> usize {
        self.node_depths().into_iter().max().unwrap_or(0)
    }

    pub fn n_feature_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_feature()).count()
    }

    /// Size of the constructed feature set: the number of `F` nodes, or 1
    /// when the whole tree is the single feature.
    pub fn n_features(&self) -> usize {
        self.n_feature_nodes().max(1)
    }

    pub fn max_terminal(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Terminal(i) => Some(*i),
                _ => None,
            })
            .max()
    }

    /// Copy with the subtree at `i` replaced by `sub`.
    pub fn replace_subtree(&self, i: usize, sub: &[Node]) -> GpTree {
        let end = self.subtree_end(i);
        let mut nodes = Vec::with_capacity(self.nodes.len() - (end - i) + sub.len());
        nodes.extend_from_slice(&self.nodes[..i]);
        nodes.extend_from_slice(sub);
        nodes.extend_from_slice(&self.nodes[end..]);
        GpTree::from_nodes_unchecked(nodes)
    }

    /// Evaluates the root on one row.
    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut stack = Vec::with_capacity(16);
        self.eval_into(row, &mut stack, |_, _| {});
        stack[0]
    }

    /// Bottom-up evaluation, calling `on_feature(node_index, value)` at each
    /// `F` node. Leaves the root value on `stack`.
    fn eval_into(&self, row: &[f64], stack: &mut Vec<f64>, mut on_feature: impl FnMut(usize, f64)) {
        stack.clear();
        for (i, n) in self.nodes.iter().enumerate().rev() {
            let v = match *n {
                Node::Terminal(a) => saturate(row[a]),
                Node::Const(c) => c,
                Node::Unary(op) => {
                    let a = stack.pop().unwrap();
                    if op == UnaryOp::Feature {
                        on_feature(i, a);
                    }
                    op.apply(a)
                }
                Node::Binary(op) => {
                    let a = stack.pop().unwrap();
                    let b = stack.pop().unwrap();
                    op.apply(a, b)
                }
            };
            stack.push(v);
        }
    }

    /// Constructed feature values for one row, in prefix order of the `F`
    /// nodes (or the root value when there are none).
    pub fn feature_values(&self, row: &[f64]) -> Vec<f64> {
        let f_positions: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.nodes[i].is_feature()).collect();
        let mut stack = Vec::with_capacity(16);
        if f_positions.is_empty() {
            self.eval_into(row, &mut stack, |_, _| {});
            return vec![stack[0]];
        }
        let mut out = vec![0.0; f_positions.len()];
        self.eval_into(row, &mut stack, |i, v| {
            let slot = f_positions.binary_search(&i).unwrap();
            out[slot] = v;
        });
        out
    }

    /// Indices of the nodes that lie inside at least one `F` subtree, or
    /// every node when the tree has no `F` node.
    pub fn feature_content_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        if self.n_feature_nodes() == 0 {
            mask.iter_mut().for_each(|m| *m = true);
            return mask;
        }
        let mut i = 0;
        while i < self.nodes.len() {
            if self.nodes[i].is_feature() {
                let end = self.subtree_end(i);
                mask[i..end].iter_mut().for_each(|m| *m = true);
                i = end;
            } else {
                i += 1;
            }
        }
        mask
    }

    fn fmt_at(&self, i: usize, f: &mut fmt::Formatter<'_>) -> std::result::Result<usize, fmt::Error> {
        match self.nodes[i] {
            Node::Terminal(a) => {
                write!(f, "ARG{a}")?;
                Ok(i + 1)
            }
            Node::Const(c) => {
                write!(f, "{c:?}")?;
                Ok(i + 1)
            }
            Node::Unary(op) => {
                write!(f, "{}(", op.name())?;
                let next = self.fmt_at(i + 1, f)?;
                write!(f, ")")?;
                Ok(next)
            }
            Node::Binary(op) => {
                write!(f, "{}(", op.name())?;
                let mid = self.fmt_at(i + 1, f)?;
                write!(f, ", ")?;
                let next = self.fmt_at(mid, f)?;
                write!(f, ")")?;
                Ok(next)
            }
        }
    }
}

impl fmt::Display for GpTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(0, f).map(|_| ())
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    nodes: Vec<Node>,
}

impl Parser<'_> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::TreeParse {
            pos: self.pos,
            reason: reason.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {c:?}")))
        }
    }

    fn token(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .find(|c: char| c == '(' || c == ')' || c == ',' || c.is_whitespace())
            .unwrap_or(rest.len());
        self.pos += len;
        &self.src[start..start + len]
    }

    fn expr(&mut self) -> Result<()> {
        let start = self.pos;
        let tok = self.token().to_string();
        if tok.is_empty() {
            return Err(self.err("expected an expression"));
        }
        let unary = match tok.as_str() {
            "ln" => Some(UnaryOp::Ln),
            "sqrt" => Some(UnaryOp::Sqrt),
            "F" => Some(UnaryOp::Feature),
            _ => None,
        };
        let binary = match tok.as_str() {
            "add" => Some(BinaryOp::Add),
            "sub" => Some(BinaryOp::Sub),
            "mul" => Some(BinaryOp::Mul),
            "div" => Some(BinaryOp::Div),
            _ => None,
        };
        if let Some(op) = unary {
            self.nodes.push(Node::Unary(op));
            self.expect('(')?;
            self.expr()?;
            self.expect(')')
        } else if let Some(op) = binary {
            self.nodes.push(Node::Binary(op));
            self.expect('(')?;
            self.expr()?;
            self.expect(',')?;
            self.expr()?;
            self.expect(')')
        } else if let Some(idx) = tok.strip_prefix("ARG") {
            let idx = idx.parse().map_err(|_| Error::TreeParse {
                pos: start,
                reason: format!("bad terminal {tok:?}"),
            })?;
            self.nodes.push(Node::Terminal(idx));
            Ok(())
        } else {
            match tok.parse::<f64>() {
                Ok(c) if c.is_finite() => {
                    self.nodes.push(Node::Const(c));
                    Ok(())
                }
                _ => Err(Error::TreeParse {
                    pos: start,
                    reason: format!("unknown symbol {tok:?}"),
                }),
            }
        }
    }
}

impl FromStr for GpTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser {
            src: s,
            pos: 0,
            nodes: Vec::new(),
        };
        p.expr()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.err("trailing input"));
        }
        GpTree::from_nodes(p.nodes)
    }
}

impl Serialize for GpTree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GpTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Evaluates the tree's constructed features on every row of `fm`.
pub fn extract_features(tree: &GpTree, fm: &FeatureMatrix) -> Result<FeatureMatrix> {
    if let Some(m) = tree.max_terminal() {
        if m >= fm.n_cols() {
            return Err(Error::invalid(format!(
                "tree uses ARG{m} but the table has {} columns",
                fm.n_cols()
            )));
        }
    }
    let rows = fm.rows.iter().map(|r| tree.feature_values(r)).collect();
    Ok(FeatureMatrix {
        rows,
        attr_names: (1..=tree.n_features()).map(|i| format!("F{i}")).collect(),
        window_index: fm.window_index.clone(),
        labels: fm.labels.clone(),
    })
}
