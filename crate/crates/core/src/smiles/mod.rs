//! SMILES parsing and the 400x57 Binary-Encoded-SMILES grid.
//!
//! Every character of the input string becomes one 57-bit row. Column layout:
//!
//! | columns | meaning |
//! |---------|---------|
//! | 0-13    | symbol one-hot: `( ) [ ] space : = # \ / @ + - .` |
//! | 14-19   | digit one-hot for `2..=7` |
//! | 20, 21  | ring-closure begin, ring-closure end |
//! | 22-26   | atom type: C, H, O, N, other |
//! | 27-30   | attached hydrogens 0-3 (clamped) |
//! | 31-33   | formal charge -1, 0, +1 (clamped) |
//! | 34-39   | valence 1-5, other |
//! | 40      | ring atom |
//! | 41-45   | degree 1-4, other |
//! | 46      | aromatic |
//! | 47-49   | chirality R (`@@`), S (`@`), other (any other mark, or none) |
//! | 50-56   | hybridization sp, sp2, sp3, sp3d, sp3d2, unspecified, other |
//!
//! Columns 22-56 are only set on atom rows (each character of an atom
//! symbol, including both letters of `Cl`/`Br`). Inside brackets the `H`
//! count letter sets only the H atom-type bit, and `+ - @ :` and digits set
//! their symbol/digit bits. The space column is reserved and never set.
//!
//! A row is stored as a `u64` with column `c` at bit `c`.

mod packed;
mod perceive;
mod tokenize;

use thiserror::Error;

pub use packed::{read_grids, write_grids, GridRecord, PACKED_MAGIC, PACKED_VERSION};
pub use perceive::{parse_bracket, perceive, AtomPerception, BracketSpec, Chirality, Hybridization};
pub use tokenize::{tokenize, RingRole, SmilesToken, TokenKind};

pub const GRID_ROWS: usize = 400;
pub const GRID_COLS: usize = 57;

pub mod col {
    pub const BRANCH_OPEN: usize = 0;
    pub const BRANCH_CLOSE: usize = 1;
    pub const BRACKET_OPEN: usize = 2;
    pub const BRACKET_CLOSE: usize = 3;
    pub const SPACE: usize = 4;
    pub const COLON: usize = 5;
    pub const DOUBLE: usize = 6;
    pub const TRIPLE: usize = 7;
    pub const BACKSLASH: usize = 8;
    pub const SLASH: usize = 9;
    pub const AT: usize = 10;
    pub const PLUS: usize = 11;
    pub const MINUS: usize = 12;
    pub const DOT: usize = 13;
    pub const DIGIT_2: usize = 14;
    pub const RING_BEGIN: usize = 20;
    pub const RING_END: usize = 21;
    pub const TYPE_C: usize = 22;
    pub const TYPE_H: usize = 23;
    pub const TYPE_O: usize = 24;
    pub const TYPE_N: usize = 25;
    pub const TYPE_OTHER: usize = 26;
    pub const H_COUNT_0: usize = 27;
    pub const CHARGE_NEG: usize = 31;
    pub const VALENCE_1: usize = 34;
    pub const VALENCE_OTHER: usize = 39;
    pub const RING_ATOM: usize = 40;
    pub const DEGREE_1: usize = 41;
    pub const DEGREE_OTHER: usize = 45;
    pub const AROMATIC: usize = 46;
    pub const CHIRAL_R: usize = 47;
    pub const CHIRAL_S: usize = 48;
    pub const CHIRAL_OTHER: usize = 49;
    pub const HYB_SP: usize = 50;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    Empty,
    #[error("parse error at {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("invalid valence for {element} at {position}")]
    InvalidValence { position: usize, element: String },
    #[error("deuterium isotope at {position}")]
    Deuterium { position: usize },
    #[error("{rows} rows exceeds the {GRID_ROWS}-row grid")]
    TooLong { rows: usize },
}

impl SmilesError {
    /// Stable machine-readable reason code for rejection logs.
    pub fn reason(&self) -> &'static str {
        match self {
            SmilesError::Empty => "empty",
            SmilesError::Parse { .. } => "parse_error",
            SmilesError::InvalidValence { .. } => "invalid_valence",
            SmilesError::Deuterium { .. } => "deuterium",
            SmilesError::TooLong { .. } => "too_long",
        }
    }
}

/// A zero-padded `400 x 57` binary grid.
#[derive(Clone, PartialEq, Eq)]
pub struct BesGrid {
    rows: Vec<u64>,
    length: usize,
}

impl std::fmt::Debug for BesGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BesGrid")
            .field("length", &self.length)
            .field("set_bits", &self.count_ones())
            .finish()
    }
}

impl BesGrid {
    pub fn empty() -> Self {
        Self {
            rows: vec![0; GRID_ROWS],
            length: 0,
        }
    }

    /// Builds a grid from packed rows; rows past `rows.len()` are padding.
    /// Bits above column 56 are rejected.
    pub fn from_rows(rows: &[u64]) -> Option<Self> {
        if rows.len() > GRID_ROWS || rows.iter().any(|r| r >> GRID_COLS != 0) {
            return None;
        }
        let mut grid = Self::empty();
        grid.rows[..rows.len()].copy_from_slice(rows);
        grid.length = rows.len();
        Some(grid)
    }

    /// Number of non-padding rows.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn row(&self, r: usize) -> u64 {
        self.rows[r]
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(c < GRID_COLS);
        (self.rows[r] >> c) & 1 == 1
    }

    /// Sets a bit; `r` beyond the current length extends it.
    pub fn set(&mut self, r: usize, c: usize, on: bool) {
        assert!(r < GRID_ROWS && c < GRID_COLS);
        if on {
            self.rows[r] |= 1 << c;
        } else {
            self.rows[r] &= !(1 << c);
        }
        if on && r >= self.length {
            self.length = r + 1;
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.rows.iter().map(|r| r.count_ones()).sum()
    }

    /// Row-major `f64` copy of the full 400x57 grid.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(GRID_ROWS * GRID_COLS);
        for &row in &self.rows {
            for c in 0..GRID_COLS {
                out.push(((row >> c) & 1) as f64);
            }
        }
        out
    }
}

fn set_one_hot(row: &mut u64, base: usize, index: usize) {
    *row |= 1 << (base + index);
}

fn atom_row(atom: &AtomPerception) -> u64 {
    let mut row = 0u64;
    let type_col = match atom.element.as_str() {
        "C" => col::TYPE_C,
        "H" => col::TYPE_H,
        "O" => col::TYPE_O,
        "N" => col::TYPE_N,
        _ => col::TYPE_OTHER,
    };
    row |= 1 << type_col;
    set_one_hot(&mut row, col::H_COUNT_0, atom.total_h().min(3) as usize);
    set_one_hot(&mut row, col::CHARGE_NEG, (atom.formal_charge.clamp(-1, 1) + 1) as usize);
    match atom.valence {
        v @ 1..=5 => set_one_hot(&mut row, col::VALENCE_1, v as usize - 1),
        _ => row |= 1 << col::VALENCE_OTHER,
    }
    if atom.in_ring {
        row |= 1 << col::RING_ATOM;
    }
    match atom.degree {
        d @ 1..=4 => set_one_hot(&mut row, col::DEGREE_1, d as usize - 1),
        _ => row |= 1 << col::DEGREE_OTHER,
    }
    if atom.aromatic {
        row |= 1 << col::AROMATIC;
    }
    match atom.chirality {
        Chirality::R => row |= 1 << col::CHIRAL_R,
        Chirality::S => row |= 1 << col::CHIRAL_S,
        Chirality::Other | Chirality::None => row |= 1 << col::CHIRAL_OTHER,
    }
    let hyb = match atom.hybridization {
        Hybridization::Sp => 0,
        Hybridization::Sp2 => 1,
        Hybridization::Sp3 => 2,
        Hybridization::Sp3d => 3,
        Hybridization::Sp3d2 => 4,
        Hybridization::Unspecified => 5,
        Hybridization::Other => 6,
    };
    set_one_hot(&mut row, col::HYB_SP, hyb);
    row
}

fn symbol_row(c: char) -> u64 {
    let column = match c {
        '(' => col::BRANCH_OPEN,
        ')' => col::BRANCH_CLOSE,
        '[' => col::BRACKET_OPEN,
        ']' => col::BRACKET_CLOSE,
        ':' => col::COLON,
        '=' => col::DOUBLE,
        '#' => col::TRIPLE,
        '\\' => col::BACKSLASH,
        '/' => col::SLASH,
        '@' => col::AT,
        '+' => col::PLUS,
        '-' => col::MINUS,
        '.' => col::DOT,
        '2'..='7' => col::DIGIT_2 + (c as usize - '2' as usize),
        _ => return 0,
    };
    1 << column
}

/// Parses, perceives and encodes one SMILES string.
pub fn encode(smiles: &str) -> Result<BesGrid, SmilesError> {
    let tokens = tokenize(smiles)?;
    let atoms = perceive(&tokens)?;
    if smiles.len() > GRID_ROWS {
        return Err(SmilesError::TooLong { rows: smiles.len() });
    }
    let mut atom_of_token = vec![None; tokens.len()];
    for atom in &atoms {
        atom_of_token[atom.token] = Some(atom);
    }

    let mut rows = vec![0u64; smiles.len()];
    for (ti, tok) in tokens.iter().enumerate() {
        let out = &mut rows[tok.position..tok.position + tok.text.len()];
        match tok.kind {
            TokenKind::Atom => {
                let feat = atom_row(atom_of_token[ti].expect("atom token has an atom"));
                out.fill(feat);
            }
            TokenKind::BracketAtom => {
                let spec = parse_bracket(&tok.text, tok.position)?;
                let feat = atom_row(atom_of_token[ti].expect("atom token has an atom"));
                for (off, c) in tok.text.char_indices() {
                    out[off] = if (spec.symbol.0..spec.symbol.1).contains(&off) {
                        feat
                    } else if spec.h_letter == Some(off) {
                        1 << col::TYPE_H
                    } else {
                        symbol_row(c)
                    };
                }
            }
            TokenKind::RingDigit(role) => {
                let flag = match role {
                    RingRole::Begin => 1 << col::RING_BEGIN,
                    RingRole::End => 1 << col::RING_END,
                };
                for (slot, c) in out.iter_mut().zip(tok.text.chars()) {
                    *slot = flag | symbol_row(c);
                }
            }
            TokenKind::Bond
            | TokenKind::BranchOpen
            | TokenKind::BranchClose
            | TokenKind::Dot => {
                out[0] = symbol_row(tok.text.chars().next().expect("one char"));
            }
        }
    }
    Ok(BesGrid::from_rows(&rows).expect("row count checked"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(row: u64) -> Vec<usize> {
        (0..GRID_COLS).filter(|c| row >> c & 1 == 1).collect()
    }

    #[test]
    fn ethane_rows() {
        let g = encode("CC").unwrap();
        assert_eq!(g.length(), 2);
        for r in 0..2 {
            assert_eq!(bits(g.row(r)), vec![22, 30, 32, 37, 41, 49, 52]);
        }
        assert!((2..GRID_ROWS).all(|r| g.row(r) == 0));
    }

    #[test]
    fn cyclopropane_rows() {
        let g = encode("C1CC1").unwrap();
        assert_eq!(bits(g.row(1)), vec![col::RING_BEGIN]);
        assert_eq!(bits(g.row(4)), vec![col::RING_END]);
        for r in [0, 2, 3] {
            assert!(g.get(r, col::RING_ATOM));
            // 2 implicit H, valence 4, degree 2, sp3
            assert_eq!(bits(g.row(r)), vec![22, 29, 32, 37, 40, 42, 49, 52]);
        }
    }

    #[test]
    fn formaldehyde_rows() {
        let g = encode("C=O").unwrap();
        assert_eq!(bits(g.row(0)), vec![22, 29, 32, 37, 41, 49, 51]);
        assert_eq!(bits(g.row(1)), vec![col::DOUBLE]);
        assert_eq!(bits(g.row(2)), vec![24, 27, 32, 35, 41, 49, 51]);
    }

    #[test]
    fn ammonium_rows() {
        let g = encode("[NH4+]").unwrap();
        assert_eq!(g.length(), 6);
        assert_eq!(bits(g.row(0)), vec![col::BRACKET_OPEN]);
        // N, 4 H clamped to 3, charge +1, valence 4, degree 0 -> other, sp3
        assert_eq!(bits(g.row(1)), vec![25, 30, 33, 37, 45, 49, 52]);
        assert_eq!(bits(g.row(2)), vec![col::TYPE_H]);
        assert_eq!(bits(g.row(3)), vec![col::DIGIT_2 + 2]);
        assert_eq!(bits(g.row(4)), vec![col::PLUS]);
        assert_eq!(bits(g.row(5)), vec![col::BRACKET_CLOSE]);
    }

    #[test]
    fn two_letter_atoms_fill_both_rows() {
        let g = encode("CCl").unwrap();
        assert_eq!(g.row(1), g.row(2));
        assert!(g.get(1, col::TYPE_OTHER));
    }

    #[test]
    fn rejections() {
        assert_eq!(encode(""), Err(SmilesError::Empty));
        assert_eq!(encode("[2H]O[2H]").unwrap_err().reason(), "deuterium");
        assert_eq!(
            encode("C(=O)(=O)(=O)O").unwrap_err().reason(),
            "invalid_valence"
        );
        let long = "C".repeat(401);
        assert_eq!(encode(&long), Err(SmilesError::TooLong { rows: 401 }));
        assert!(encode(&"C".repeat(400)).is_ok());
    }

    #[test]
    fn percent_ring_rows() {
        let g = encode("C%12CC%12").unwrap();
        assert_eq!(bits(g.row(1)), vec![col::RING_BEGIN]);
        assert_eq!(bits(g.row(2)), vec![col::RING_BEGIN]);
        assert_eq!(bits(g.row(3)), vec![col::DIGIT_2, col::RING_BEGIN]);
        assert_eq!(bits(g.row(8)), vec![col::DIGIT_2, col::RING_END]);
    }

    #[test]
    fn from_rows_rejects_high_bits() {
        assert!(BesGrid::from_rows(&[1 << 57]).is_none());
        assert!(BesGrid::from_rows(&vec![0; 401]).is_none());
    }
}
