use std::collections::HashSet;

use super::SmilesError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingRole {
    Begin,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    /// Organic-subset atom outside brackets (`C`, `Cl`, `c`, ...).
    Atom,
    /// A whole `[...]` expression.
    BracketAtom,
    /// One of `- = # : / \`.
    Bond,
    BranchOpen,
    BranchClose,
    /// Ring-closure label: one digit, or `%` plus two digits.
    RingDigit(RingRole),
    Dot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmilesToken {
    pub kind: TokenKind,
    pub text: String,
    /// Character offset of the token's first character.
    pub position: usize,
}

impl SmilesToken {
    /// Numeric ring label for [`TokenKind::RingDigit`] tokens.
    pub fn ring_label(&self) -> Option<u32> {
        match self.kind {
            TokenKind::RingDigit(_) => self.text.trim_start_matches('%').parse().ok(),
            _ => None,
        }
    }
}

fn parse_err(position: usize, message: impl Into<String>) -> SmilesError {
    SmilesError::Parse {
        position,
        message: message.into(),
    }
}

/// Splits a SMILES string into tokens whose texts concatenate back to the
/// input. Ring labels alternate begin/end per label value.
pub fn tokenize(smiles: &str) -> Result<Vec<SmilesToken>, SmilesError> {
    if smiles.is_empty() {
        return Err(SmilesError::Empty);
    }
    if let Some(pos) = smiles.chars().position(|c| !c.is_ascii()) {
        return Err(parse_err(pos, "non-ASCII character"));
    }
    let bytes = smiles.as_bytes();
    let mut tokens = Vec::new();
    let mut open_rings: HashSet<u32> = HashSet::new();
    let mut branch_stack: Vec<usize> = Vec::new();
    let mut i = 0;

    let push = |kind, start: usize, end: usize, tokens: &mut Vec<SmilesToken>| {
        tokens.push(SmilesToken {
            kind,
            text: smiles[start..end].to_string(),
            position: start,
        });
    };

    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            'C' if bytes.get(i + 1) == Some(&b'l') => {
                push(TokenKind::Atom, i, i + 2, &mut tokens);
                i += 2;
            }
            'B' if bytes.get(i + 1) == Some(&b'r') => {
                push(TokenKind::Atom, i, i + 2, &mut tokens);
                i += 2;
            }
            'B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I' | 'b' | 'c' | 'n' | 'o' | 'p' | 's' => {
                push(TokenKind::Atom, i, i + 1, &mut tokens);
                i += 1;
            }
            '[' => {
                let close = smiles[i..]
                    .find(']')
                    .map(|off| i + off)
                    .ok_or_else(|| parse_err(i, "unclosed '['"))?;
                if let Some(off) = smiles[i + 1..close].find('[') {
                    return Err(parse_err(i + 1 + off, "nested '['"));
                }
                if close == i + 1 {
                    return Err(parse_err(i, "empty bracket atom"));
                }
                push(TokenKind::BracketAtom, i, close + 1, &mut tokens);
                i = close + 1;
            }
            ']' => return Err(parse_err(i, "unmatched ']'")),
            '(' => {
                branch_stack.push(i);
                push(TokenKind::BranchOpen, i, i + 1, &mut tokens);
                i += 1;
            }
            ')' => {
                if branch_stack.pop().is_none() {
                    return Err(parse_err(i, "unmatched ')'"));
                }
                push(TokenKind::BranchClose, i, i + 1, &mut tokens);
                i += 1;
            }
            '-' | '=' | '#' | ':' | '/' | '\\' => {
                push(TokenKind::Bond, i, i + 1, &mut tokens);
                i += 1;
            }
            '.' => {
                push(TokenKind::Dot, i, i + 1, &mut tokens);
                i += 1;
            }
            '0'..='9' | '%' => {
                let (end, label) = if c == '%' {
                    let digits = smiles.get(i + 1..i + 3).unwrap_or("");
                    if digits.len() != 2 || !digits.bytes().all(|b| b.is_ascii_digit()) {
                        return Err(parse_err(i, "'%' must be followed by two digits"));
                    }
                    (i + 3, digits.parse::<u32>().expect("two digits"))
                } else {
                    (i + 1, u32::from(bytes[i] - b'0'))
                };
                let role = if open_rings.remove(&label) {
                    RingRole::End
                } else {
                    open_rings.insert(label);
                    RingRole::Begin
                };
                push(TokenKind::RingDigit(role), i, end, &mut tokens);
                i = end;
            }
            _ => return Err(parse_err(i, format!("unexpected character '{c}'"))),
        }
    }

    if let Some(&pos) = branch_stack.first() {
        return Err(parse_err(pos, "unclosed '('"));
    }
    if let Some(label) = open_rings.iter().min() {
        let pos = tokens
            .iter()
            .rev()
            .find(|t| t.ring_label() == Some(*label))
            .map(|t| t.position)
            .unwrap_or(0);
        return Err(parse_err(pos, format!("ring {label} never closed")));
    }
    Ok(tokens)
}
