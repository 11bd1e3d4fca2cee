//! Independent reference implementations used as oracles. None of this calls
//! into the library's evaluators or solvers.
#![allow(dead_code)]

/// Evaluates an antibody string by walking it against the grammar
///
/// ```text
/// spine := pair right (spine | left)
/// right := pair leafpair leafpair
/// left  := pair pair leafpair leafpair leafpair
/// ```
///
/// computing values as it goes. `None` is the invalid outcome.
pub fn walk_eval(s: &str, constants: &[f64], window: &[f64]) -> Option<f64> {
    let signs: Vec<char> = s.chars().map(|c| if c == '·' { '*' } else { c }).collect();
    assert!(signs.len().is_multiple_of(2), "odd sign count");
    let units: Vec<(char, char)> = signs.chunks(2).map(|p| (p[0], p[1])).collect();
    let mut w = Walker {
        units: &units,
        pos: 0,
        constants,
        next_const: 0,
        window,
    };
    let v = w.spine()?;
    assert_eq!(w.pos, units.len(), "trailing signs");
    assert_eq!(w.next_const, constants.len(), "unused constants");
    Some(v)
}

struct Walker<'a> {
    units: &'a [(char, char)],
    pos: usize,
    constants: &'a [f64],
    next_const: usize,
    window: &'a [f64],
}

fn is_op(c: char) -> bool {
    matches!(c, '+' | '-' | '*' | '/')
}

fn functional(f: char, x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    let y = match f {
        'S' => x.sin(),
        'C' => x.cos(),
        'Q' if x >= 0.0 => x.sqrt(),
        'L' if x > 0.0 => x.ln(),
        'E' => x.exp(),
        '_' => x,
        'Q' | 'L' => return None,
        other => panic!("unknown functional {other}"),
    };
    y.is_finite().then_some(y)
}

fn operate(op: char, a: f64, b: f64) -> f64 {
    match op {
        '+' => a + b,
        '-' => a - b,
        '*' => a * b,
        '/' => a / b,
        _ => unreachable!(),
    }
}

impl Walker<'_> {
    fn take(&mut self) -> (char, char) {
        let u = self.units[self.pos];
        self.pos += 1;
        u
    }

    fn pair(&mut self) -> (char, char) {
        let u = self.take();
        assert!(
            is_op(u.1),
            "expected an internal pair at unit {}",
            self.pos - 1
        );
        u
    }

    fn leaf(&mut self) -> Option<f64> {
        let (f, t) = self.take();
        let raw = if t == '?' {
            let c = self.constants[self.next_const];
            self.next_const += 1;
            c
        } else {
            assert!(t.is_ascii_lowercase(), "expected a terminal, got {t}");
            self.window[(t as u8 - b'a') as usize]
        };
        functional(f, raw)
    }

    // Children are evaluated eagerly so constants are consumed in string order
    // even when an earlier branch is already invalid.
    fn combine(f: char, op: char, left: Option<f64>, right: Option<f64>) -> Option<f64> {
        functional(f, operate(op, left?, right?))
    }

    fn right(&mut self) -> Option<f64> {
        let (f, op) = self.pair();
        let a = self.leaf();
        let b = self.leaf();
        Self::combine(f, op, a, b)
    }

    fn left(&mut self) -> Option<f64> {
        let (f_outer, op_outer) = self.pair();
        let (f_inner, op_inner) = self.pair();
        let a = self.leaf();
        let b = self.leaf();
        let c = self.leaf();
        let inner = Self::combine(f_inner, op_inner, a, b);
        Self::combine(f_outer, op_outer, inner, c)
    }

    fn spine(&mut self) -> Option<f64> {
        let (f, op) = self.pair();
        let right = self.right();
        // a spine continues when the fifth unit ahead is again an internal pair
        let nested = self.units.get(self.pos + 4).is_some_and(|u| is_op(u.1));
        let left = if nested { self.spine() } else { self.left() };
        Self::combine(f, op, left, right)
    }
}

/// Parses and evaluates a rendered analytic formula such as
/// `ln(cos(d[j-1])*(d[j-2]-(-3.5)))`.
pub fn infix_eval(text: &str, window: &[f64]) -> Option<f64> {
    let mut p = Infix {
        s: text.as_bytes(),
        pos: 0,
        window,
    };
    let v = p.item();
    assert_eq!(p.pos, p.s.len(), "trailing text in {text}");
    v
}

struct Infix<'a> {
    s: &'a [u8],
    pos: usize,
    window: &'a [f64],
}

impl Infix<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, lit: &str) -> bool {
        if self.s[self.pos..].starts_with(lit.as_bytes()) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) {
        assert!(self.eat(lit), "expected `{lit}` at {}", self.pos);
    }

    /// An item, optionally followed by one binary operator and another item.
    fn inner(&mut self) -> Option<f64> {
        let a = self.item();
        match self.peek() {
            Some(c @ (b'+' | b'-' | b'*' | b'/')) => {
                self.pos += 1;
                let b = self.item();
                let v = operate(c as char, a?, b?);
                v.is_finite().then_some(v)
            }
            _ => a,
        }
    }

    fn item(&mut self) -> Option<f64> {
        for (name, f) in [
            ("sin(", 'S'),
            ("cos(", 'C'),
            ("sqrt(", 'Q'),
            ("ln(", 'L'),
            ("exp(", 'E'),
        ] {
            if self.eat(name) {
                let x = self.inner();
                self.expect(")");
                return functional(f, x?);
            }
        }
        if self.eat("(") {
            let x = self.inner();
            self.expect(")");
            return x;
        }
        if self.eat("d[j-") {
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            let k: usize = std::str::from_utf8(&self.s[start..self.pos])
                .unwrap()
                .parse()
                .unwrap();
            self.expect("]");
            return Some(self.window[k - 1]);
        }
        self.number()
    }

    fn number(&mut self) -> Option<f64> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        while let Some(c) = self.peek() {
            let exponent_sign =
                (c == b'-' || c == b'+') && matches!(self.s[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exponent_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        Some(
            text.parse::<f64>()
                .unwrap_or_else(|_| panic!("bad number `{text}`")),
        )
    }
}

/// `sqrt(Σ (j/n)(v_j - t_j)²)` written out longhand.
pub fn metric(v: &[f64], t: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mut s = 0.0;
    for j in 0..v.len() {
        let w = (j + 1) as f64 / n;
        s += w * (v[j] - t[j]) * (v[j] - t[j]);
    }
    s.sqrt()
}

/// Minimum k-means objective over every partition of `rows` into exactly `c`
/// non-empty blocks, by enumerating restricted growth strings.
pub fn brute_force_objective(rows: &[Vec<f64>], c: usize) -> f64 {
    let m = rows.len();
    let mut labels = vec![0usize; m];
    let mut best = f64::INFINITY;
    loop {
        let used = labels.iter().max().map_or(0, |&x| x + 1);
        if used == c {
            let mut total = 0.0;
            for r in 0..c {
                let members: Vec<&Vec<f64>> = (0..m)
                    .filter(|&i| labels[i] == r)
                    .map(|i| &rows[i])
                    .collect();
                let n = rows[0].len();
                let centroid: Vec<f64> = (0..n)
                    .map(|j| members.iter().map(|row| row[j]).sum::<f64>() / members.len() as f64)
                    .collect();
                for row in members {
                    let d = metric(&centroid, row);
                    total += d * d;
                }
            }
            best = best.min(total);
        }
        // next restricted growth string: labels[i] ≤ 1 + max(labels[..i])
        let mut i = m;
        loop {
            if i == 1 {
                return best;
            }
            i -= 1;
            let prefix_max = labels[..i].iter().max().copied().unwrap_or(0);
            if labels[i] <= prefix_max && labels[i] + 1 < c {
                labels[i] += 1;
                for l in labels.iter_mut().skip(i + 1) {
                    *l = 0;
                }
                break;
            }
        }
    }
}

/// Spreadsheet-style average forecasting error rate: each row is
/// `(actual, forecast)`, result in percent.
pub fn afer_rows(rows: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for &(d, f) in rows {
        total += ((f - d) / d).abs();
    }
    total * 100.0 / rows.len() as f64
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
