use std::collections::HashMap;

use super::tokenize::{SmilesToken, TokenKind};
use super::SmilesError;

/// Element symbols accepted inside brackets, longest first within each
/// leading letter so `Cl` wins over `C`.
const ELEMENTS: &[&str] = &[
    "He", "Li", "Be", "Ne", "Na", "Mg", "Al", "Si", "Cl", "Ar", "Ca", "Sc", "Ti", "Cr", "Mn",
    "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Zr", "Nb",
    "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "Xe", "Cs", "Ba", "La",
    "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
    "Ta", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra",
    "Ac", "Th", "Pa", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "H",
    "B", "C", "N", "O", "F", "P", "S", "K", "V", "Y", "I", "W", "U",
];

const AROMATIC_BRACKET: &[&str] = &["se", "as", "te", "b", "c", "n", "o", "p", "s"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chirality {
    /// `@@`
    R,
    /// `@`
    S,
    /// Any other `@` form (`@TH1`, `@SP2`, ...).
    Other,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hybridization {
    Sp,
    Sp2,
    Sp3,
    Sp3d,
    Sp3d2,
    Unspecified,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomPerception {
    /// Capitalized element symbol (`C` for both `C` and `c`).
    pub element: String,
    pub aromatic: bool,
    /// Clamped to `-1..=1`.
    pub formal_charge: i32,
    /// Hydrogens written inside a bracket atom.
    pub explicit_h: u32,
    /// Hydrogens implied by the organic-subset valence rules.
    pub implicit_h: u32,
    pub degree: u32,
    /// Bond-order sum including hydrogens.
    pub valence: u32,
    pub in_ring: bool,
    pub chirality: Chirality,
    pub hybridization: Hybridization,
    /// Index of the token this atom came from.
    pub token: usize,
}

impl AtomPerception {
    pub fn total_h(&self) -> u32 {
        self.explicit_h + self.implicit_h
    }
}

/// Character-level layout of a `[...]` token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BracketSpec {
    pub isotope: Option<u32>,
    pub element: String,
    pub aromatic: bool,
    pub chirality: Chirality,
    pub h_count: u32,
    pub charge: i32,
    /// Byte range of the element symbol within the token text.
    pub symbol: (usize, usize),
    /// Byte offset of the `H` hydrogen-count letter, if present.
    pub h_letter: Option<usize>,
}

pub fn parse_bracket(text: &str, position: usize) -> Result<BracketSpec, SmilesError> {
    let err = |off: usize, msg: &str| SmilesError::Parse {
        position: position + off,
        message: msg.to_string(),
    };
    let b = text.as_bytes();
    let end = b.len() - 1; // index of ']'
    let mut i = 1;

    let iso_start = i;
    while i < end && b[i].is_ascii_digit() {
        i += 1;
    }
    let isotope = (i > iso_start).then(|| text[iso_start..i].parse().expect("digits"));

    let rest = &text[i..end];
    let (element, aromatic, len) = if let Some(sym) = AROMATIC_BRACKET
        .iter()
        .find(|s| rest.starts_with(**s))
    {
        (capitalize(sym), true, sym.len())
    } else if let Some(sym) = ELEMENTS.iter().find(|s| rest.starts_with(**s)) {
        (sym.to_string(), false, sym.len())
    } else {
        return Err(err(i, "unknown element in bracket atom"));
    };
    let symbol = (i, i + len);
    i += len;

    let mut chirality = Chirality::None;
    if i < end && b[i] == b'@' {
        if b.get(i + 1) == Some(&b'@') {
            chirality = Chirality::R;
            i += 2;
        } else {
            i += 1;
            chirality = Chirality::S;
            let class = text.get(i..i + 2).unwrap_or("");
            if ["TH", "AL", "SP", "TB", "OH"].contains(&class) {
                chirality = Chirality::Other;
                i += 2;
                while i < end && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
        }
    }

    let mut h_count = 0;
    let mut h_letter = None;
    if i < end && b[i] == b'H' {
        h_letter = Some(i);
        i += 1;
        let start = i;
        while i < end && b[i].is_ascii_digit() {
            i += 1;
        }
        h_count = if i > start {
            text[start..i].parse().expect("digits")
        } else {
            1
        };
    }

    let mut charge = 0i32;
    if i < end && (b[i] == b'+' || b[i] == b'-') {
        let sign = if b[i] == b'+' { 1 } else { -1 };
        let sym = b[i];
        i += 1;
        let start = i;
        while i < end && b[i].is_ascii_digit() {
            i += 1;
        }
        if i > start {
            charge = sign * text[start..i].parse::<i32>().expect("digits");
        } else {
            let mut n = 1;
            while i < end && b[i] == sym {
                n += 1;
                i += 1;
            }
            charge = sign * n;
        }
    }

    if i < end && b[i] == b':' {
        i += 1;
        let start = i;
        while i < end && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == start {
            return Err(err(i, "atom class needs digits"));
        }
    }

    if i != end {
        return Err(err(i, "unexpected character in bracket atom"));
    }
    Ok(BracketSpec {
        isotope,
        element,
        aromatic,
        chirality,
        h_count,
        charge,
        symbol,
        h_letter,
    })
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    fn from_symbol(c: char) -> Self {
        match c {
            '=' => BondOrder::Double,
            '#' => BondOrder::Triple,
            ':' => BondOrder::Aromatic,
            _ => BondOrder::Single,
        }
    }

    /// Contribution to the valence sum. Aromatic bonds count as single; the
    /// pi electron is added per atom in [`assign_hydrogens`].
    fn order(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Debug)]
struct RawAtom {
    element: String,
    aromatic: bool,
    bracket: Option<BracketSpec>,
    token: usize,
}

/// Allowed valences for elements with standard rules, shifted for charge.
/// `None` means the element is not checked (metals, noble gases, ...).
fn allowed_valences(element: &str, charge: i32) -> Option<Vec<u32>> {
    let (base, shift): (&[i32], i32) = match element {
        "B" => (&[3], -charge),
        "C" | "Si" => (&[4], -charge.abs()),
        "N" | "As" => (&[3], charge),
        "P" => (&[3, 5], charge),
        "O" => (&[2], charge),
        "S" | "Se" => (&[2, 4, 6], charge),
        "F" | "Cl" | "Br" | "I" => (&[1], charge),
        "H" => (&[1], -charge.abs()),
        _ => return None,
    };
    let out: Vec<u32> = base
        .iter()
        .map(|v| v + shift)
        .filter(|&v| v >= 0)
        .map(|v| v as u32)
        .collect();
    Some(out)
}

/// Builds the molecular graph from tokens and assigns per-atom properties.
pub fn perceive(tokens: &[SmilesToken]) -> Result<Vec<AtomPerception>, SmilesError> {
    let mut atoms: Vec<RawAtom> = Vec::new();
    let mut bonds: Vec<(usize, usize, BondOrder)> = Vec::new();
    let mut parent: Vec<Option<usize>> = Vec::new();
    let mut ring_bonds: Vec<(usize, usize)> = Vec::new();

    let mut prev: Option<usize> = None;
    let mut branches: Vec<Option<usize>> = Vec::new();
    let mut pending: Option<BondOrder> = None;
    let mut open_rings: HashMap<u32, (usize, Option<BondOrder>)> = HashMap::new();

    let default_bond = |a: &RawAtom, b: &RawAtom| {
        if a.aromatic && b.aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    };

    for (ti, tok) in tokens.iter().enumerate() {
        match tok.kind {
            TokenKind::Atom | TokenKind::BracketAtom => {
                let atom = if tok.kind == TokenKind::Atom {
                    RawAtom {
                        element: capitalize(&tok.text),
                        aromatic: tok.text.starts_with(|c: char| c.is_ascii_lowercase()),
                        bracket: None,
                        token: ti,
                    }
                } else {
                    let spec = parse_bracket(&tok.text, tok.position)?;
                    if spec.element == "H" && spec.isotope == Some(2) {
                        return Err(SmilesError::Deuterium {
                            position: tok.position,
                        });
                    }
                    RawAtom {
                        element: spec.element.clone(),
                        aromatic: spec.aromatic,
                        bracket: Some(spec),
                        token: ti,
                    }
                };
                let idx = atoms.len();
                let order = prev.map(|p| {
                    pending
                        .take()
                        
                        .unwrap_or_else(|| default_bond(&atoms[p], &atom))
                });
                atoms.push(atom);
                parent.push(prev);
                if let (Some(p), Some(o)) = (prev, order) {
                    bonds.push((p, idx, o));
                }
                pending = None;
                prev = Some(idx);
            }
            TokenKind::BranchOpen => {
                if prev.is_none() {
                    return Err(SmilesError::Parse {
                        position: tok.position,
                        message: "branch without a preceding atom".into(),
                    });
                }
                branches.push(prev);
            }
            TokenKind::BranchClose => {
                prev = branches.pop().flatten();
                pending = None;
            }
            TokenKind::Bond => {
                if prev.is_none() {
                    return Err(SmilesError::Parse {
                        position: tok.position,
                        message: "bond without a preceding atom".into(),
                    });
                }
                let c = tok.text.chars().next().expect("one char");
                pending = Some(BondOrder::from_symbol(c));
            }
            TokenKind::RingDigit(_) => {
                let at = prev.ok_or_else(|| SmilesError::Parse {
                    position: tok.position,
                    message: "ring label without a preceding atom".into(),
                })?;
                let label = tok.ring_label().expect("ring token");
                let here = pending.take();
                if let Some((other, there)) = open_rings.remove(&label) {
                    if other == at {
                        return Err(SmilesError::Parse {
                            position: tok.position,
                            message: "ring closes on its own atom".into(),
                        });
                    }
                    let order = here
                        .or(there)
                        .unwrap_or_else(|| default_bond(&atoms[other], &atoms[at]));
                    bonds.push((other, at, order));
                    ring_bonds.push((other, at));
                } else {
                    open_rings.insert(label, (at, here));
                }
            }
            TokenKind::Dot => {
                prev = None;
                pending = None;
            }
        }
    }

    let n = atoms.len();
    let mut in_ring = vec![false; n];
    let depth = {
        let mut d = vec![0usize; n];
        for i in 0..n {
            if let Some(p) = parent[i] {
                d[i] = d[p] + 1;
            }
        }
        d
    };
    // Every cycle is a combination of fundamental cycles: each ring-closure
    // bond plus the tree path between its ends.
    for &(a, b) in &ring_bonds {
        let (mut u, mut v) = (a, b);
        let mut path = vec![u, v];
        let closed = loop {
            if u == v {
                break true;
            }
            let step = if depth[u] >= depth[v] { &mut u } else { &mut v };
            match parent[*step] {
                Some(p) => {
                    *step = p;
                    path.push(p);
                }
                // A closure across a '.' joins two trees: no cycle.
                None => break false,
            }
        };
        if closed {
            for x in path {
                in_ring[x] = true;
            }
        }
    }

    let mut degree = vec![0u32; n];
    let mut bond_sum = vec![0u32; n];
    let mut doubles = vec![0u32; n];
    let mut triples = vec![0u32; n];
    for &(a, b, o) in &bonds {
        for x in [a, b] {
            degree[x] += 1;
            bond_sum[x] += o.order();
            match o {
                BondOrder::Double => doubles[x] += 1,
                BondOrder::Triple => triples[x] += 1,
                _ => {}
            }
        }
    }

    atoms
        .iter()
        .enumerate()
        .map(|(i, raw)| {
            let charge = raw.bracket.as_ref().map_or(0, |s| s.charge);
            let (explicit_h, implicit_h, valence) =
                assign_hydrogens(raw, charge, bond_sum[i]).ok_or_else(|| {
                    SmilesError::InvalidValence {
                        position: tokens[raw.token].position,
                        element: raw.element.clone(),
                    }
                })?;
            let connections = degree[i] + explicit_h + implicit_h;
            let hybridization = if raw.aromatic {
                Hybridization::Sp2
            } else if triples[i] > 0 || doubles[i] >= 2 {
                Hybridization::Sp
            } else if doubles[i] == 1 {
                Hybridization::Sp2
            } else {
                match connections {
                    0 => Hybridization::Unspecified,
                    1..=4 if matches!(raw.element.as_str(), "C" | "N" | "O") => Hybridization::Sp3,
                    5 => Hybridization::Sp3d,
                    6 => Hybridization::Sp3d2,
                    _ => Hybridization::Other,
                }
            };
            // Stereo marks on aromatic atoms carry no tetrahedral meaning.
            let chirality = match &raw.bracket {
                Some(s) if !raw.aromatic => s.chirality,
                _ => Chirality::None,
            };
            Ok(AtomPerception {
                element: raw.element.clone(),
                aromatic: raw.aromatic,
                formal_charge: charge.clamp(-1, 1),
                explicit_h,
                implicit_h,
                degree: degree[i],
                valence,
                in_ring: in_ring[i],
                chirality,
                hybridization,
                token: raw.token,
            })
        })
        .collect()
}

/// Returns `(explicit_h, implicit_h, valence)` or `None` when the bond sum
/// exceeds every allowed valence.
fn assign_hydrogens(raw: &RawAtom, charge: i32, bond_sum: u32) -> Option<(u32, u32, u32)> {
    let allowed = allowed_valences(&raw.element, charge);
    // Aromatic atoms that can host a ring double bond get one extra unit of
    // valence when there is room for it.
    let pi_capable = raw.aromatic && matches!(raw.element.as_str(), "C" | "N" | "P" | "B" | "As");
    match (&raw.bracket, allowed) {
        (Some(spec), Some(allowed)) => {
            let base = bond_sum + spec.h_count;
            let max = allowed.iter().copied().max()?;
            let pi = u32::from(pi_capable && base < max);
            let total = base + pi;
            (total <= max).then_some((spec.h_count, 0, total))
        }
        (Some(spec), None) => Some((spec.h_count, 0, bond_sum + spec.h_count)),
        (None, Some(allowed)) => {
            let pi = u32::from(pi_capable && allowed.iter().any(|&v| v > bond_sum));
            let used = bond_sum + pi;
            let target = allowed.iter().copied().find(|&v| v >= used)?;
            Some((0, target - used, target))
        }
        // Organic-subset tokens are all covered by `allowed_valences`.
        (None, None) => Some((0, 0, bond_sum)),
    }
}
