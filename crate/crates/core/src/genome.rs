//! Strict-binary-tree (SBT) expression genome.
//!
//! An antibody is a line of signs drawn from three alphabets: arithmetic
//! operations, unary functionals and terminals. Signs come in pairs. Internal
//! nodes carry a `(functional, operation)` pair, leaves a `(functional,
//! terminal)` pair. Terminal letters are lags (`a` is `d[j-1]`, `b` is
//! `d[j-2]`, ...) and `?` marks a constant slot whose value is stored
//! out-of-band.
//!
//! The tree shape is fixed by an [`SbtTemplate`]: a spine of `s` internal
//! nodes, each with an order-2 subtree on its right, and an order-3 subtree
//! hanging off the deepest spine node on the left. The canonical string lists
//! the root pair, then its right subtree, then each lower spine pair followed
//! by its right subtree, and finally the left subtree:
//!
//! ```text
//! antibody    := spine_block
//! spine_block := pair right_block (spine_block | left_block)
//! right_block := pair leafpair leafpair
//! left_block  := pair pair leafpair leafpair leafpair
//! ```
//!
//! For `s = 1`, `L*S/SeSdC-S+EaCbEa` decodes to
//! `ln(cos(sin(exp(a)+cos(b))-exp(a))*sin(sin(e)/sin(d)))`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Add,
    Sub,
    Mul,
    Div,
}

impl Operation {
    pub const ALL: [Operation; 4] = [
        Operation::Add,
        Operation::Sub,
        Operation::Mul,
        Operation::Div,
    ];

    pub fn sign(self) -> char {
        match self {
            Operation::Add => '+',
            Operation::Sub => '-',
            Operation::Mul => '*',
            Operation::Div => '/',
        }
    }

    /// Accepts the typeset `·` as multiplication.
    pub fn from_sign(c: char) -> Option<Self> {
        match c {
            '+' => Some(Operation::Add),
            '-' => Some(Operation::Sub),
            '*' | '·' => Some(Operation::Mul),
            '/' => Some(Operation::Div),
            _ => None,
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Operation::Add => a + b,
            Operation::Sub => a - b,
            Operation::Mul => a * b,
            Operation::Div => a / b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Functional {
    Sin,
    Cos,
    Sqrt,
    Ln,
    Exp,
    Identity,
}

impl Functional {
    pub const ALL: [Functional; 6] = [
        Functional::Sin,
        Functional::Cos,
        Functional::Sqrt,
        Functional::Ln,
        Functional::Exp,
        Functional::Identity,
    ];

    pub fn sign(self) -> char {
        match self {
            Functional::Sin => 'S',
            Functional::Cos => 'C',
            Functional::Sqrt => 'Q',
            Functional::Ln => 'L',
            Functional::Exp => 'E',
            Functional::Identity => '_',
        }
    }

    pub fn from_sign(c: char) -> Option<Self> {
        Functional::ALL.into_iter().find(|f| f.sign() == c)
    }

    fn name(self) -> Option<&'static str> {
        match self {
            Functional::Sin => Some("sin"),
            Functional::Cos => Some("cos"),
            Functional::Sqrt => Some("sqrt"),
            Functional::Ln => Some("ln"),
            Functional::Exp => Some("exp"),
            Functional::Identity => None,
        }
    }

    /// NaN for arguments outside the real domain; callers treat non-finite as invalid.
    fn apply(self, x: f64) -> f64 {
        match self {
            Functional::Sin => x.sin(),
            Functional::Cos => x.cos(),
            Functional::Sqrt => {
                if x < 0.0 {
                    f64::NAN
                } else {
                    x.sqrt()
                }
            }
            Functional::Ln => {
                if x <= 0.0 {
                    f64::NAN
                } else {
                    x.ln()
                }
            }
            Functional::Exp => x.exp(),
            Functional::Identity => x,
        }
    }
}

/// Largest lag a terminal letter can name (`z`).
pub const MAX_LAG: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Terminal {
    /// 1-based lag: `Lag(1)` is `d[j-1]`, written `a`.
    Lag(u8),
    Constant,
}

impl Terminal {
    pub fn sign(self) -> char {
        match self {
            Terminal::Lag(k) => (b'a' + k - 1) as char,
            Terminal::Constant => '?',
        }
    }

    pub fn from_sign(c: char) -> Option<Self> {
        match c {
            'a'..='z' => Some(Terminal::Lag(c as u8 - b'a' + 1)),
            '?' => Some(Terminal::Constant),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SbtTemplate {
    pub spine_count: usize,
}

impl Default for SbtTemplate {
    fn default() -> Self {
        SbtTemplate { spine_count: 3 }
    }
}

/// Position of a gene in the canonical string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Internal(usize),
    Leaf(usize),
}

impl SbtTemplate {
    pub fn new(spine_count: usize) -> Result<Self> {
        if spine_count == 0 {
            return Err(Error::InvalidConfig(
                "spine_count must be at least 1".into(),
            ));
        }
        Ok(SbtTemplate { spine_count })
    }

    pub fn leaf_count(self) -> usize {
        3 + 2 * self.spine_count
    }

    pub fn internal_count(self) -> usize {
        2 + 2 * self.spine_count
    }

    /// Maximal model order: one distinct lag per leaf.
    pub fn k_max(self) -> usize {
        self.leaf_count().min(MAX_LAG)
    }

    pub fn sign_count(self) -> usize {
        2 * (self.leaf_count() + self.internal_count())
    }

    /// Serialization layout; internal and leaf indices count up in string order.
    pub fn layout(self) -> Vec<Slot> {
        let mut slots = Vec::with_capacity(self.sign_count() / 2);
        let (mut i, mut l) = (0, 0);
        for _ in 0..self.spine_count {
            slots.extend([
                Slot::Internal(i),
                Slot::Internal(i + 1),
                Slot::Leaf(l),
                Slot::Leaf(l + 1),
            ]);
            i += 2;
            l += 2;
        }
        slots.extend([
            Slot::Internal(i),
            Slot::Internal(i + 1),
            Slot::Leaf(l),
            Slot::Leaf(l + 1),
            Slot::Leaf(l + 2),
        ]);
        slots
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InternalGene {
    pub functional: Functional,
    pub operation: Operation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LeafGene {
    pub functional: Functional,
    pub terminal: Terminal,
}

/// A candidate model: sign genes over a template plus one constant per `?` leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct Antibody {
    pub template: SbtTemplate,
    pub internal_genes: Vec<InternalGene>,
    pub leaf_genes: Vec<LeafGene>,
    pub constants: Vec<f64>,
}

/// A single mutable position of the discrete genome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Locus {
    InternalFunctional(usize),
    Operation(usize),
    LeafFunctional(usize),
    Terminal(usize),
}

impl Antibody {
    pub fn new(
        template: SbtTemplate,
        internal_genes: Vec<InternalGene>,
        leaf_genes: Vec<LeafGene>,
        constants: Vec<f64>,
    ) -> Result<Self> {
        let ab = Antibody {
            template,
            internal_genes,
            leaf_genes,
            constants,
        };
        ab.validate()?;
        Ok(ab)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.template;
        if t.spine_count == 0
            || self.internal_genes.len() != t.internal_count()
            || self.leaf_genes.len() != t.leaf_count()
        {
            return Err(Error::InvalidConfig(format!(
                "gene counts ({}, {}) do not fit template s = {}",
                self.internal_genes.len(),
                self.leaf_genes.len(),
                t.spine_count
            )));
        }
        let slots = self.constant_slots();
        if slots != self.constants.len() {
            return Err(Error::ConstantCount {
                expected: slots,
                got: self.constants.len(),
            });
        }
        if self.constants.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("constants must be finite".into()));
        }
        let k = self.effective_order()?;
        if k > t.k_max() {
            return Err(Error::InvalidConfig(format!(
                "lag {k} exceeds the template's maximal order {}",
                t.k_max()
            )));
        }
        Ok(())
    }

    pub fn constant_slots(&self) -> usize {
        self.leaf_genes
            .iter()
            .filter(|g| g.terminal == Terminal::Constant)
            .count()
    }

    /// Largest lag read by any leaf.
    pub fn effective_order(&self) -> Result<usize> {
        self.leaf_genes
            .iter()
            .filter_map(|g| match g.terminal {
                Terminal::Lag(k) => Some(k as usize),
                Terminal::Constant => None,
            })
            .max()
            .ok_or(Error::NoLaggedTerminal)
    }

    /// Parses a canonical string; `constants` fill the `?` slots in string order.
    pub fn parse(s: &str, constants: &[f64]) -> Result<Self> {
        let chars: Vec<char> = s.chars().collect();
        let mut p = SignReader {
            chars: &chars,
            pos: 0,
        };
        let mut internal = Vec::new();
        let mut leaves = Vec::new();
        let mut spine_count = 0;
        loop {
            internal.push(p.pair()?);
            spine_count += 1;
            internal.push(p.pair()?);
            leaves.push(p.leafpair()?);
            leaves.push(p.leafpair()?);
            // both a deeper spine block and the left block begin with
            // pair pair leafpair leafpair; the fifth unit tells them apart
            if !p.unit_is_pair(4) {
                break;
            }
        }
        internal.push(p.pair()?);
        internal.push(p.pair()?);
        leaves.push(p.leafpair()?);
        leaves.push(p.leafpair()?);
        leaves.push(p.leafpair()?);
        if p.pos < chars.len() {
            return Err(Error::Parse {
                offset: p.pos,
                message: "trailing signs after the left subtree".into(),
            });
        }
        let template = SbtTemplate { spine_count };
        if let Some((idx, _)) = leaves
            .iter()
            .enumerate()
            .find(|(_, g)| matches!(g.terminal, Terminal::Lag(k) if k as usize > template.k_max()))
        {
            let offset = leaf_offset(template, idx);
            return Err(Error::Parse {
                offset,
                message: format!(
                    "terminal exceeds the maximal order {} of this template",
                    template.k_max()
                ),
            });
        }
        let ab = Antibody {
            template,
            internal_genes: internal,
            leaf_genes: leaves,
            constants: constants.to_vec(),
        };
        ab.validate()?;
        Ok(ab)
    }

    /// Canonical sign string (ASCII, `*` for multiplication).
    pub fn encode(&self) -> String {
        let mut out = String::with_capacity(self.template.sign_count());
        for slot in self.template.layout() {
            match slot {
                Slot::Internal(i) => {
                    let g = self.internal_genes[i];
                    out.push(g.functional.sign());
                    out.push(g.operation.sign());
                }
                Slot::Leaf(l) => {
                    let g = self.leaf_genes[l];
                    out.push(g.functional.sign());
                    out.push(g.terminal.sign());
                }
            }
        }
        out
    }

    pub fn to_tree(&self) -> ExpressionTree {
        let s = self.template.spine_count;
        let mut consts = self.constants.iter().copied();
        // constants are numbered in string order, so materialize leaves in that order first
        let leaves: Vec<Node> = self
            .leaf_genes
            .iter()
            .map(|g| Node::Leaf {
                functional: g.functional,
                value: match g.terminal {
                    Terminal::Lag(k) => LeafValue::Lag(k as usize),
                    Terminal::Constant => {
                        LeafValue::Constant(consts.next().expect("validated constant count"))
                    }
                },
            })
            .collect();
        let mut leaves: Vec<Option<Node>> = leaves.into_iter().map(Some).collect();
        let mut take = |l: usize| leaves[l].take().expect("each leaf used once");
        let binary = |g: InternalGene, left: Node, right: Node| Node::Binary {
            functional: g.functional,
            operation: g.operation,
            left: Box::new(left),
            right: Box::new(right),
        };

        let ig = &self.internal_genes;
        let inner = binary(ig[2 * s + 1], take(2 * s), take(2 * s + 1));
        let mut subtree = binary(ig[2 * s], inner, take(2 * s + 2));
        for level in (0..s).rev() {
            let right = binary(ig[2 * level + 1], take(2 * level), take(2 * level + 1));
            subtree = binary(ig[2 * level], subtree, right);
        }
        ExpressionTree { root: subtree }
    }

    /// Every discrete locus, in string order.
    pub fn loci(&self) -> Vec<Locus> {
        let mut out = Vec::with_capacity(self.template.sign_count());
        for slot in self.template.layout() {
            match slot {
                Slot::Internal(i) => {
                    out.extend([Locus::InternalFunctional(i), Locus::Operation(i)])
                }
                Slot::Leaf(l) => out.extend([Locus::LeafFunctional(l), Locus::Terminal(l)]),
            }
        }
        out
    }

    /// Number of symbols a locus can take (terminals: lags up to `k_max` plus `?`).
    pub fn alphabet_size(&self, locus: Locus) -> usize {
        match locus {
            Locus::InternalFunctional(_) | Locus::LeafFunctional(_) => Functional::ALL.len(),
            Locus::Operation(_) => Operation::ALL.len(),
            Locus::Terminal(_) => self.template.k_max() + 1,
        }
    }

    /// Index in string order of the constant belonging to leaf `leaf`, if it is a `?`.
    fn constant_index(&self, leaf: usize) -> Option<usize> {
        if self.leaf_genes[leaf].terminal != Terminal::Constant {
            return None;
        }
        let before = self.leaf_genes[..leaf]
            .iter()
            .filter(|g| g.terminal == Terminal::Constant)
            .count();
        Some(before)
    }

    /// Draws a new symbol for `locus`; if `distinct`, the draw differs from the current one.
    ///
    /// A terminal switching to `?` gets a fresh constant from `constant_range`;
    /// one switching away drops its constant.
    pub fn resample_locus<R: Rng>(
        &mut self,
        locus: Locus,
        distinct: bool,
        constant_range: (f64, f64),
        rng: &mut R,
    ) {
        let size = self.alphabet_size(locus);
        let current = self.symbol_index(locus);
        let pick = if distinct {
            let k = rng.random_range(0..size - 1);
            if k >= current {
                k + 1
            } else {
                k
            }
        } else {
            rng.random_range(0..size)
        };
        match locus {
            Locus::InternalFunctional(i) => {
                self.internal_genes[i].functional = Functional::ALL[pick]
            }
            Locus::Operation(i) => self.internal_genes[i].operation = Operation::ALL[pick],
            Locus::LeafFunctional(l) => self.leaf_genes[l].functional = Functional::ALL[pick],
            Locus::Terminal(l) => {
                let new = terminal_from_index(pick, self.template.k_max());
                let old_idx = self.constant_index(l);
                self.leaf_genes[l].terminal = new;
                match (old_idx, new) {
                    (Some(ci), Terminal::Lag(_)) => {
                        self.constants.remove(ci);
                    }
                    (None, Terminal::Constant) => {
                        let ci = self.constant_index(l).expect("now a constant slot");
                        let value = uniform(constant_range, rng);
                        self.constants.insert(ci, value);
                    }
                    _ => {}
                }
            }
        }
    }

    fn symbol_index(&self, locus: Locus) -> usize {
        match locus {
            Locus::InternalFunctional(i) => {
                index_of(&Functional::ALL, self.internal_genes[i].functional)
            }
            Locus::Operation(i) => index_of(&Operation::ALL, self.internal_genes[i].operation),
            Locus::LeafFunctional(l) => index_of(&Functional::ALL, self.leaf_genes[l].functional),
            Locus::Terminal(l) => match self.leaf_genes[l].terminal {
                Terminal::Lag(k) => k as usize - 1,
                Terminal::Constant => self.template.k_max(),
            },
        }
    }

    /// Same signs and constants pairwise within `rel_tol` relative.
    pub fn is_similar(&self, other: &Antibody, rel_tol: f64) -> bool {
        self.template == other.template
            && self.internal_genes == other.internal_genes
            && self.leaf_genes == other.leaf_genes
            && self.constants.len() == other.constants.len()
            && self
                .constants
                .iter()
                .zip(&other.constants)
                .all(|(a, b)| (a - b).abs() <= rel_tol * a.abs().max(b.abs()))
    }
}

impl fmt::Display for Antibody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

fn index_of<T: PartialEq>(all: &[T], x: T) -> usize {
    all.iter()
        .position(|a| *a == x)
        .expect("symbol in alphabet")
}

fn terminal_from_index(idx: usize, k_max: usize) -> Terminal {
    if idx < k_max {
        Terminal::Lag(idx as u8 + 1)
    } else {
        Terminal::Constant
    }
}

fn uniform<R: Rng>(range: (f64, f64), rng: &mut R) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

fn leaf_offset(template: SbtTemplate, leaf: usize) -> usize {
    let unit = template
        .layout()
        .iter()
        .position(|s| *s == Slot::Leaf(leaf))
        .expect("leaf in layout");
    2 * unit
}

/// Uniform draw over the alphabets; terminals limited to `a..=letter(k_max)` and `?`.
pub fn random_antibody<R: Rng>(
    template: SbtTemplate,
    rng: &mut R,
    constant_range: (f64, f64),
) -> Antibody {
    loop {
        let internal_genes = (0..template.internal_count())
            .map(|_| InternalGene {
                functional: Functional::ALL[rng.random_range(0..Functional::ALL.len())],
                operation: Operation::ALL[rng.random_range(0..Operation::ALL.len())],
            })
            .collect();
        let leaf_genes: Vec<LeafGene> = (0..template.leaf_count())
            .map(|_| LeafGene {
                functional: Functional::ALL[rng.random_range(0..Functional::ALL.len())],
                terminal: terminal_from_index(
                    rng.random_range(0..=template.k_max()),
                    template.k_max(),
                ),
            })
            .collect();
        if leaf_genes.iter().all(|g| g.terminal == Terminal::Constant) {
            continue;
        }
        let constants = leaf_genes
            .iter()
            .filter(|g| g.terminal == Terminal::Constant)
            .map(|_| uniform(constant_range, rng))
            .collect();
        return Antibody {
            template,
            internal_genes,
            leaf_genes,
            constants,
        };
    }
}

pub fn encode(ab: &Antibody) -> String {
    ab.encode()
}

pub fn decode(s: &str, constants: &[f64]) -> Result<ExpressionTree> {
    Antibody::parse(s, constants).map(|ab| ab.to_tree())
}

pub fn effective_order(ab: &Antibody) -> Result<usize> {
    ab.effective_order()
}

struct SignReader<'a> {
    chars: &'a [char],
    pos: usize,
}

impl SignReader<'_> {
    fn unit(&self, what: &str) -> Result<(char, char)> {
        match (self.chars.get(self.pos), self.chars.get(self.pos + 1)) {
            (Some(&a), Some(&b)) => Ok((a, b)),
            _ => Err(Error::Parse {
                offset: self.pos,
                message: format!("unexpected end of input, expected {what}"),
            }),
        }
    }

    fn pair(&mut self) -> Result<InternalGene> {
        let (f, o) = self.unit("a (functional, operation) pair")?;
        let gene = match (Functional::from_sign(f), Operation::from_sign(o)) {
            (Some(functional), Some(operation)) => InternalGene {
                functional,
                operation,
            },
            _ => {
                return Err(Error::Parse {
                    offset: self.pos,
                    message: format!("expected a (functional, operation) pair, found `{f}{o}`"),
                })
            }
        };
        self.pos += 2;
        Ok(gene)
    }

    fn leafpair(&mut self) -> Result<LeafGene> {
        let (f, t) = self.unit("a (functional, terminal) pair")?;
        let gene = match (Functional::from_sign(f), Terminal::from_sign(t)) {
            (Some(functional), Some(terminal)) => LeafGene {
                functional,
                terminal,
            },
            _ => {
                return Err(Error::Parse {
                    offset: self.pos,
                    message: format!("expected a (functional, terminal) pair, found `{f}{t}`"),
                })
            }
        };
        self.pos += 2;
        Ok(gene)
    }

    /// Whether the unit `ahead` units from here has an operation sign in second place.
    fn unit_is_pair(&self, ahead: usize) -> bool {
        self.chars
            .get(self.pos + 2 * ahead + 1)
            .is_some_and(|&c| Operation::from_sign(c).is_some())
    }
}

/// Parses a single order-2 block `pair leafpair leafpair` into a tree.
#[cfg(test)]
pub(crate) fn parse_order2_block(s: &str, constants: &[f64]) -> Result<ExpressionTree> {
    let chars: Vec<char> = s.chars().collect();
    let mut p = SignReader {
        chars: &chars,
        pos: 0,
    };
    let op = p.pair()?;
    let l = p.leafpair()?;
    let r = p.leafpair()?;
    if p.pos != chars.len() {
        return Err(Error::Parse {
            offset: p.pos,
            message: "trailing signs".into(),
        });
    }
    let mut consts = constants.iter().copied();
    let mut leaf = |g: LeafGene| -> Result<Node> {
        Ok(Node::Leaf {
            functional: g.functional,
            value: match g.terminal {
                Terminal::Lag(k) => LeafValue::Lag(k as usize),
                Terminal::Constant => {
                    LeafValue::Constant(consts.next().ok_or(Error::ConstantCount {
                        expected: 1 + constants.len(),
                        got: constants.len(),
                    })?)
                }
            },
        })
    };
    Ok(ExpressionTree {
        root: Node::Binary {
            functional: op.functional,
            operation: op.operation,
            left: Box::new(leaf(l)?),
            right: Box::new(leaf(r)?),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeafValue {
    Lag(usize),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        functional: Functional,
        value: LeafValue,
    },
    Binary {
        functional: Functional,
        operation: Operation,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn lag(lag: usize, functional: Functional) -> Node {
        Node::Leaf {
            functional,
            value: LeafValue::Lag(lag),
        }
    }

    pub fn constant(value: f64, functional: Functional) -> Node {
        Node::Leaf {
            functional,
            value: LeafValue::Constant(value),
        }
    }

    pub fn binary(operation: Operation, functional: Functional, left: Node, right: Node) -> Node {
        Node::Binary {
            functional,
            operation,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn max_lag(&self) -> usize {
        match self {
            Node::Leaf {
                value: LeafValue::Lag(k),
                ..
            } => *k,
            Node::Leaf { .. } => 0,
            Node::Binary { left, right, .. } => left.max_lag().max(right.max_lag()),
        }
    }

    fn eval(&self, window: &[f64]) -> f64 {
        let (functional, raw) = match self {
            Node::Leaf { functional, value } => (
                *functional,
                match value {
                    LeafValue::Lag(k) => window[k - 1],
                    LeafValue::Constant(c) => *c,
                },
            ),
            Node::Binary {
                functional,
                operation,
                left,
                right,
            } => {
                let a = left.eval(window);
                if !a.is_finite() {
                    return f64::NAN;
                }
                let b = right.eval(window);
                if !b.is_finite() {
                    return f64::NAN;
                }
                (*functional, operation.apply(a, b))
            }
        };
        if !raw.is_finite() {
            return f64::NAN;
        }
        functional.apply(raw)
    }

    fn render(&self, out: &mut String) {
        let name = match self {
            Node::Leaf { functional, .. } | Node::Binary { functional, .. } => functional.name(),
        };
        if let Some(name) = name {
            out.push_str(name);
            out.push('(');
        }
        match self {
            Node::Leaf { value, .. } => match value {
                LeafValue::Lag(k) => out.push_str(&format!("d[j-{k}]")),
                LeafValue::Constant(c) => {
                    let text = format_sig6(*c);
                    if *c < 0.0 && name.is_none() {
                        out.push('(');
                        out.push_str(&text);
                        out.push(')');
                    } else {
                        out.push_str(&text);
                    }
                }
            },
            Node::Binary {
                operation,
                left,
                right,
                ..
            } => {
                if name.is_none() {
                    out.push('(');
                }
                left.render(out);
                out.push(operation.sign());
                right.render(out);
                if name.is_none() {
                    out.push(')');
                }
            }
        }
        if name.is_some() {
            out.push(')');
        }
    }
}

/// Decoded analytic dependence `f(d[j-1], d[j-2], ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionTree {
    pub root: Node,
}

impl ExpressionTree {
    pub fn new(root: Node) -> Self {
        ExpressionTree { root }
    }

    /// Largest lag read by the tree (0 for a constant expression).
    pub fn order(&self) -> usize {
        self.root.max_lag()
    }

    /// `window[0]` is `d[j-1]`, `window[1]` is `d[j-2]`, and so on.
    ///
    /// `Ok(None)` is the `invalid` outcome: some intermediate value left the
    /// real domain or overflowed. A window too short for the tree is an error.
    pub fn evaluate(&self, window: &[f64]) -> Result<Option<f64>> {
        let k = self.order();
        if window.len() < k {
            return Err(Error::MissingLag(window.len() + 1));
        }
        Ok(self.evaluate_unchecked(window))
    }

    /// Like [`evaluate`](Self::evaluate) but assumes the window covers every lag.
    pub fn evaluate_unchecked(&self, window: &[f64]) -> Option<f64> {
        let v = self.root.eval(window);
        v.is_finite().then_some(v)
    }

    /// Fully parenthesized formula with lags as `d[j-k]` and constants to 6 significant digits.
    pub fn to_analytic_string(&self) -> String {
        let mut out = String::new();
        self.root.render(&mut out);
        out
    }
}

impl fmt::Display for ExpressionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_analytic_string())
    }
}

pub fn to_analytic_string(tree: &ExpressionTree) -> String {
    tree.to_analytic_string()
}

/// `%.6g`-style formatting: 6 significant digits, trailing zeros dropped.
pub(crate) fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.5e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, v)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Persisted model: `{template:{spine_count}, string, constants, analytic, order_k, train_afer}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub template: SbtTemplate,
    pub string: String,
    pub constants: Vec<f64>,
    pub analytic: String,
    pub order_k: usize,
    pub train_afer: Option<f64>,
}

impl ModelDoc {
    pub fn new(ab: &Antibody, train_afer: f64) -> Self {
        ModelDoc {
            template: ab.template,
            string: ab.encode(),
            constants: ab.constants.clone(),
            analytic: ab.to_tree().to_analytic_string(),
            order_k: ab.effective_order().expect("valid antibody"),
            train_afer: train_afer.is_finite().then_some(train_afer),
        }
    }

    pub fn antibody(&self) -> Result<Antibody> {
        let ab = Antibody::parse(&self.string, &self.constants)?;
        if ab.template != self.template {
            return Err(Error::InvalidConfig(format!(
                "model string has spine count {}, file says {}",
                ab.template.spine_count, self.template.spine_count
            )));
        }
        Ok(ab)
    }
}
