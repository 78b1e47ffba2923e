//! The constraint mini-language.
//!
//! One letter per mode: `u` unrestricted, `d` diagonal, `c`
//! unit-diagonal-Cholesky, `i` identity. Whitespace separates groups for
//! readability and is otherwise ignored. In hypothesis specs a
//! parenthesized list of 1-based mode numbers merges those modes into one,
//! e.g. `(12)u i` tests an unrestricted covariance on the concatenation of
//! modes 1 and 2. Merged modes must be consecutive.

use holq_core::{HypothesisSpec, ModeConstraint};

pub fn letter_of(c: ModeConstraint) -> char {
    match c {
        ModeConstraint::Unrestricted => 'u',
        ModeConstraint::Diagonal => 'd',
        ModeConstraint::UnitDiagCholesky => 'c',
        ModeConstraint::Identity => 'i',
    }
}

fn class_of(ch: char) -> Option<ModeConstraint> {
    match ch {
        'u' => Some(ModeConstraint::Unrestricted),
        'd' => Some(ModeConstraint::Diagonal),
        'c' => Some(ModeConstraint::UnitDiagCholesky),
        'i' => Some(ModeConstraint::Identity),
        _ => None,
    }
}

/// Parse a plain per-mode constraint string (no merging).
pub fn parse_per_mode(s: &str, order: usize) -> Result<Vec<ModeConstraint>, String> {
    let mut out = Vec::new();
    for ch in s.chars() {
        if ch.is_whitespace() {
            continue;
        }
        match class_of(ch) {
            Some(c) => out.push(c),
            None => return Err(format!("invalid constraint letter `{ch}` (use u, d, c, i)")),
        }
    }
    if out.len() != order {
        return Err(format!(
            "constraint string names {} modes but the tensor has {}",
            out.len(),
            order
        ));
    }
    Ok(out)
}

/// Parse a hypothesis spec over the observed shape, with `(jk)X` merge
/// groups.
pub fn parse_spec(s: &str, shape: &[usize]) -> Result<HypothesisSpec, String> {
    let mut group_sizes = Vec::new();
    let mut constraints = Vec::new();
    let mut next_mode = 0usize; // 0-based observed mode cursor
    let mut chars = s.chars().peekable();
    while let Some(&ch) = chars.peek() {
        if ch.is_whitespace() {
            chars.next();
            continue;
        }
        if ch == '(' {
            chars.next();
            let mut modes: Vec<usize> = Vec::new();
            let mut num = String::new();
            loop {
                match chars.next() {
                    Some(')') => {
                        if !num.is_empty() {
                            modes.push(num.parse::<usize>().map_err(|_| {
                                format!("invalid mode number `{num}` in merge group")
                            })?);
                        }
                        break;
                    }
                    Some(d) if d.is_ascii_digit() => {
                        num.push(d);
                        // single digits may run together, as in `(12)`
                        if shape.len() < 10 {
                            modes.push(num.parse().unwrap());
                            num.clear();
                        }
                    }
                    Some(sep) if sep == ',' || sep.is_whitespace() => {
                        if !num.is_empty() {
                            modes.push(num.parse::<usize>().map_err(|_| {
                                format!("invalid mode number `{num}` in merge group")
                            })?);
                            num.clear();
                        }
                    }
                    Some(other) => {
                        return Err(format!("unexpected `{other}` inside merge group"))
                    }
                    None => return Err("unterminated merge group".into()),
                }
            }
            if modes.len() < 2 {
                return Err("a merge group needs at least two modes".into());
            }
            for (off, &m) in modes.iter().enumerate() {
                let expected = next_mode + off + 1; // 1-based
                if m != expected {
                    return Err(format!(
                        "merge group {modes:?} must name the next consecutive modes starting at {}",
                        next_mode + 1
                    ));
                }
            }
            let letter = loop {
                match chars.next() {
                    Some(w) if w.is_whitespace() => continue,
                    Some(l) => break l,
                    None => return Err("merge group is missing its constraint letter".into()),
                }
            };
            let class = class_of(letter)
                .ok_or_else(|| format!("invalid constraint letter `{letter}` after merge group"))?;
            group_sizes.push(modes.len());
            constraints.push(class);
            next_mode += modes.len();
        } else {
            chars.next();
            let class = class_of(ch)
                .ok_or_else(|| format!("invalid constraint letter `{ch}` (use u, d, c, i)"))?;
            group_sizes.push(1);
            constraints.push(class);
            next_mode += 1;
        }
    }
    if next_mode != shape.len() {
        return Err(format!(
            "spec covers {} of {} observed modes",
            next_mode,
            shape.len()
        ));
    }
    HypothesisSpec::with_plan(shape.to_vec(), None, group_sizes, constraints)
        .map_err(|e| e.to_string())
}
