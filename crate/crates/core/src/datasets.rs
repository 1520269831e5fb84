//! Builtin capture-recapture datasets used as fixtures and in studies.

use alloc::string::ToString;
use core::fmt;
use core::str::FromStr;

use crate::capture_data::CaptureDataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BuiltinDataset {
    /// UK 2013 potential victims of trafficking, six lists.
    Uk,
    /// UK data with PF and NCA combined.
    Uk5,
    /// Netherlands victims of trafficking, six lists.
    Netherlands,
    /// Netherlands data with I and O combined.
    Netherlands5,
    /// New Orleans, eight lists.
    NewOrleans,
    /// New Orleans with the four smallest lists (B, E, F, G) combined.
    NewOrleans5,
    /// Western site of a US study, five lists.
    Western,
    /// Three-list toy data with no AC, BC or ABC cases.
    Artificial3,
}

impl BuiltinDataset {
    pub const ALL: [BuiltinDataset; 8] = [
        BuiltinDataset::Uk,
        BuiltinDataset::Uk5,
        BuiltinDataset::Netherlands,
        BuiltinDataset::Netherlands5,
        BuiltinDataset::NewOrleans,
        BuiltinDataset::NewOrleans5,
        BuiltinDataset::Western,
        BuiltinDataset::Artificial3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinDataset::Uk => "uk",
            BuiltinDataset::Uk5 => "uk5",
            BuiltinDataset::Netherlands => "netherlands",
            BuiltinDataset::Netherlands5 => "netherlands5",
            BuiltinDataset::NewOrleans => "new_orleans",
            BuiltinDataset::NewOrleans5 => "new_orleans5",
            BuiltinDataset::Western => "western",
            BuiltinDataset::Artificial3 => "artificial3",
        }
    }

    pub fn load(self) -> CaptureDataset {
        build(self).expect("builtin fixture is valid")
    }
}

impl fmt::Display for BuiltinDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinDataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinDataset::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::UnknownDataset(s.to_string()))
    }
}

/// Looks up a fixture by name (`uk`, `new_orleans5`, ...).
pub fn builtin_dataset(name: &str) -> Result<CaptureDataset> {
    Ok(name.parse::<BuiltinDataset>()?.load())
}

fn build(which: BuiltinDataset) -> Result<CaptureDataset> {
    match which {
        BuiltinDataset::Uk => uk(),
        BuiltinDataset::Uk5 => uk()?.merge_lists(&[2, 5], "PF+NCA"),
        BuiltinDataset::Netherlands => netherlands(),
        BuiltinDataset::Netherlands5 => netherlands()?.merge_lists(&[0, 2], "I+O"),
        BuiltinDataset::NewOrleans => new_orleans(),
        BuiltinDataset::NewOrleans5 => new_orleans()?.merge_lists(&[1, 4, 5, 6], "B+E+F+G"),
        BuiltinDataset::Western => western(),
        BuiltinDataset::Artificial3 => CaptureDataset::from_labelled(
            &["A", "B", "C"],
            &[(&["A"], 40), (&["B"], 30), (&["C"], 20), (&["A", "B"], 6)],
        ),
    }
}

fn uk() -> Result<CaptureDataset> {
    CaptureDataset::from_labelled(
        &["LA", "NG", "PF", "GO", "GP", "NCA"],
        &[
            (&["LA"], 54),
            (&["NG"], 463),
            (&["PF"], 907),
            (&["GO"], 695),
            (&["GP"], 316),
            (&["NCA"], 57),
            (&["LA", "NG"], 15),
            (&["LA", "PF"], 19),
            (&["LA", "GO"], 3),
            (&["NG", "PF"], 56),
            (&["NG", "GO"], 19),
            (&["NG", "GP"], 1),
            (&["NG", "NCA"], 3),
            (&["PF", "GO"], 69),
            (&["PF", "GP"], 10),
            (&["PF", "NCA"], 31),
            (&["GO", "GP"], 8),
            (&["GO", "NCA"], 6),
            (&["GP", "NCA"], 1),
            (&["LA", "NG", "PF"], 1),
            (&["LA", "NG", "GO"], 1),
            (&["NG", "PF", "GO"], 4),
            (&["NG", "PF", "NCA"], 3),
            (&["PF", "GO", "NCA"], 1),
            (&["LA", "NG", "PF", "GO"], 1),
        ],
    )
}

fn netherlands() -> Result<CaptureDataset> {
    CaptureDataset::from_labelled(
        &["I", "K", "O", "P", "R", "Z"],
        &[
            (&["I"], 352),
            (&["K"], 1299),
            (&["O"], 403),
            (&["P"], 4466),
            (&["R"], 650),
            (&["Z"], 632),
            (&["I", "O"], 1),
            (&["I", "P"], 18),
            (&["I", "R"], 3),
            (&["I", "Z"], 16),
            (&["K", "O"], 1),
            (&["K", "P"], 44),
            (&["K", "Z"], 4),
            (&["O", "P"], 59),
            (&["O", "R"], 2),
            (&["O", "Z"], 57),
            (&["P", "R"], 82),
            (&["P", "Z"], 125),
            (&["R", "Z"], 2),
            (&["I", "O", "P"], 4),
            (&["I", "P", "Z"], 4),
            (&["O", "P", "R"], 2),
            (&["O", "P", "Z"], 7),
            (&["P", "R", "Z"], 1),
        ],
    )
}

fn new_orleans() -> Result<CaptureDataset> {
    CaptureDataset::from_labelled(
        &["A", "B", "C", "D", "E", "F", "G", "H"],
        &[
            (&["A"], 25),
            (&["B"], 5),
            (&["C"], 70),
            (&["D"], 33),
            (&["E"], 6),
            (&["F"], 6),
            (&["G"], 6),
            (&["H"], 21),
            (&["A", "C"], 1),
            (&["A", "D"], 2),
            (&["A", "E"], 1),
            (&["B", "F"], 1),
            (&["C", "D"], 1),
            (&["C", "E"], 1),
            (&["C", "G"], 1),
            (&["D", "E"], 2),
            (&["E", "H"], 1),
            (&["A", "C", "G"], 1),
            (&["A", "D", "E"], 1),
        ],
    )
}

fn western() -> Result<CaptureDataset> {
    CaptureDataset::from_labelled(
        &["A", "B", "C", "D", "E"],
        &[
            (&["A"], 52),
            (&["B"], 90),
            (&["C"], 114),
            (&["D"], 45),
            (&["E"], 21),
            (&["A", "C"], 4),
            (&["A", "D"], 2),
            (&["A", "E"], 5),
            (&["B", "C"], 6),
            (&["B", "D"], 1),
            (&["D", "E"], 3),
            (&["A", "C", "E"], 1),
            (&["B", "C", "D"], 1),
        ],
    )
}
