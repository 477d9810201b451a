use std::collections::HashMap;

use bitvec::vec::BitVec;
use serde::{Deserialize, Serialize};

/// The four column kinds a table can hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    Categorical,
    MultiCategorical,
    Numerical,
    Temporal,
}

impl FeatureKind {
    pub fn is_categorical(self) -> bool {
        matches!(
            self,
            FeatureKind::Categorical | FeatureKind::MultiCategorical
        )
    }

    /// Token used in `info.json`.
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Categorical => "cat",
            FeatureKind::MultiCategorical => "multi-cat",
            FeatureKind::Numerical => "num",
            FeatureKind::Temporal => "time",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "cat" => Some(FeatureKind::Categorical),
            "multi-cat" => Some(FeatureKind::MultiCategorical),
            "num" => Some(FeatureKind::Numerical),
            "time" => Some(FeatureKind::Temporal),
            _ => None,
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Non-negative integer codes stored at the narrowest width that holds them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Codes {
    U8(Vec<u8>),
    U16(Vec<u16>),
    U32(Vec<u32>),
}

impl Default for Codes {
    fn default() -> Self {
        Codes::U32(Vec::new())
    }
}

impl From<Vec<u32>> for Codes {
    fn from(v: Vec<u32>) -> Self {
        Codes::U32(v)
    }
}

impl Codes {
    pub fn len(&self) -> usize {
        match self {
            Codes::U8(v) => v.len(),
            Codes::U16(v) => v.len(),
            Codes::U32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> u32 {
        match self {
            Codes::U8(v) => v[i] as u32,
            Codes::U16(v) => v[i] as u32,
            Codes::U32(v) => v[i],
        }
    }

    pub fn width_bytes(&self) -> usize {
        match self {
            Codes::U8(_) => 1,
            Codes::U16(_) => 2,
            Codes::U32(_) => 4,
        }
    }

    pub fn max(&self) -> Option<u32> {
        self.iter().max()
    }

    pub fn iter(&self) -> CodesIter<'_> {
        CodesIter {
            codes: self,
            pos: 0,
        }
    }

    pub fn to_u32_vec(&self) -> Vec<u32> {
        match self {
            Codes::U32(v) => v.clone(),
            _ => self.iter().collect(),
        }
    }

    /// Re-store at the narrowest width holding the maximum code.
    pub fn narrow(self) -> Codes {
        let max = self.max().unwrap_or(0);
        if max <= u8::MAX as u32 {
            match self {
                Codes::U8(v) => Codes::U8(v),
                other => Codes::U8(other.iter().map(|c| c as u8).collect()),
            }
        } else if max <= u16::MAX as u32 {
            match self {
                Codes::U16(v) => Codes::U16(v),
                other => Codes::U16(other.iter().map(|c| c as u16).collect()),
            }
        } else {
            Codes::U32(self.to_u32_vec())
        }
    }

    pub fn take(&self, rows: &[usize]) -> Codes {
        match self {
            Codes::U8(v) => Codes::U8(rows.iter().map(|&r| v[r]).collect()),
            Codes::U16(v) => Codes::U16(rows.iter().map(|&r| v[r]).collect()),
            Codes::U32(v) => Codes::U32(rows.iter().map(|&r| v[r]).collect()),
        }
    }

    /// Like `take`, with code 0 where the row is `None`.
    pub fn take_optional(&self, rows: &[Option<usize>]) -> Codes {
        match self {
            Codes::U8(v) => Codes::U8(rows.iter().map(|r| r.map_or(0, |r| v[r])).collect()),
            Codes::U16(v) => Codes::U16(rows.iter().map(|r| r.map_or(0, |r| v[r])).collect()),
            Codes::U32(v) => Codes::U32(rows.iter().map(|r| r.map_or(0, |r| v[r])).collect()),
        }
    }
}

pub struct CodesIter<'a> {
    codes: &'a Codes,
    pos: usize,
}

impl Iterator for CodesIter<'_> {
    type Item = u32;

    #[inline]
    fn next(&mut self) -> Option<u32> {
        if self.pos < self.codes.len() {
            let c = self.codes.get(self.pos);
            self.pos += 1;
            Some(c)
        } else {
            None
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.codes.len() - self.pos;
        (n, Some(n))
    }
}

impl ExactSizeIterator for CodesIter<'_> {}

/// Real values, double precision until downcast.
#[derive(Debug, Clone, PartialEq)]
pub enum Numbers {
    F64(Vec<f64>),
    F32(Vec<f32>),
}

impl Numbers {
    pub fn len(&self) -> usize {
        match self {
            Numbers::F64(v) => v.len(),
            Numbers::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            Numbers::F64(v) => v[i],
            Numbers::F32(v) => v[i] as f64,
        }
    }

    pub fn width_bytes(&self) -> usize {
        match self {
            Numbers::F64(_) => 8,
            Numbers::F32(_) => 4,
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        match self {
            Numbers::F64(v) => v.clone(),
            Numbers::F32(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn narrow(self) -> Numbers {
        match self {
            Numbers::F64(v) => Numbers::F32(v.into_iter().map(|x| x as f32).collect()),
            f => f,
        }
    }

    pub fn take(&self, rows: &[usize]) -> Numbers {
        match self {
            Numbers::F64(v) => Numbers::F64(rows.iter().map(|&r| v[r]).collect()),
            Numbers::F32(v) => Numbers::F32(rows.iter().map(|&r| v[r]).collect()),
        }
    }

    pub fn take_optional(&self, rows: &[Option<usize>]) -> Numbers {
        match self {
            Numbers::F64(v) => Numbers::F64(rows.iter().map(|r| r.map_or(0.0, |r| v[r])).collect()),
            Numbers::F32(v) => Numbers::F32(rows.iter().map(|r| r.map_or(0.0, |r| v[r])).collect()),
        }
    }
}

/// How the integer codes of a categorical column are interpreted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Encoding {
    /// Pending encoding: codes index this column-local token dictionary,
    /// which lists tokens in first-occurrence order.
    Raw(Vec<String>),
    /// Codes come from the shared dictionary of the given feature block.
    Block(u32),
}

impl Encoding {
    pub fn block(&self) -> Option<u32> {
        match self {
            Encoding::Block(b) => Some(*b),
            Encoding::Raw(_) => None,
        }
    }

    pub fn tokens(&self) -> Option<&[String]> {
        match self {
            Encoding::Raw(t) => Some(t),
            Encoding::Block(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    Categorical {
        codes: Codes,
        encoding: Encoding,
    },
    /// Cell `i` holds `values[offsets[i]..offsets[i + 1]]`.
    MultiCategorical {
        values: Codes,
        offsets: Vec<u32>,
        encoding: Encoding,
    },
    Numerical(Numbers),
    /// Epoch seconds.
    Temporal(Vec<i64>),
}

/// One typed column with its missing-value mask. Missing cells carry a
/// zero payload (or an empty list) that must not be interpreted.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnData {
    pub name: String,
    pub values: ColumnValues,
    pub missing: BitVec,
}

#[derive(Default)]
struct Interner {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
}

impl Interner {
    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.ids.insert(token.to_string(), id);
        self.tokens.push(token.to_string());
        id
    }
}

impl ColumnData {
    pub fn numerical<I: IntoIterator<Item = Option<f64>>>(
        name: impl Into<String>,
        cells: I,
    ) -> Self {
        let mut missing = BitVec::new();
        let values = cells
            .into_iter()
            .map(|c| {
                missing.push(c.is_none());
                c.unwrap_or(0.0)
            })
            .collect();
        ColumnData {
            name: name.into(),
            values: ColumnValues::Numerical(Numbers::F64(values)),
            missing,
        }
    }

    /// Dense numeric column where NaN marks a missing cell.
    pub fn from_f64(name: impl Into<String>, values: Vec<f64>) -> Self {
        let missing: BitVec = values.iter().map(|v| v.is_nan()).collect();
        let values = values
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v })
            .collect();
        ColumnData {
            name: name.into(),
            values: ColumnValues::Numerical(Numbers::F64(values)),
            missing,
        }
    }

    pub fn temporal<I: IntoIterator<Item = Option<i64>>>(
        name: impl Into<String>,
        cells: I,
    ) -> Self {
        let mut missing = BitVec::new();
        let values = cells
            .into_iter()
            .map(|c| {
                missing.push(c.is_none());
                c.unwrap_or(0)
            })
            .collect();
        ColumnData {
            name: name.into(),
            values: ColumnValues::Temporal(values),
            missing,
        }
    }

    /// Raw categorical column; tokens are interned in first-occurrence order.
    pub fn categorical_raw<I, S>(name: impl Into<String>, cells: I) -> Self
    where
        I: IntoIterator<Item = Option<S>>,
        S: AsRef<str>,
    {
        let mut interner = Interner::default();
        let mut missing = BitVec::new();
        let codes = cells
            .into_iter()
            .map(|c| {
                missing.push(c.is_none());
                c.map(|t| interner.intern(t.as_ref())).unwrap_or(0)
            })
            .collect::<Vec<u32>>();
        ColumnData {
            name: name.into(),
            values: ColumnValues::Categorical {
                codes: Codes::U32(codes),
                encoding: Encoding::Raw(interner.tokens),
            },
            missing,
        }
    }

    /// Raw multi-categorical column; `None` and empty lists are missing.
    pub fn multi_categorical_raw<I, L, S>(name: impl Into<String>, cells: I) -> Self
    where
        I: IntoIterator<Item = Option<L>>,
        L: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut interner = Interner::default();
        let mut missing = BitVec::new();
        let mut values = Vec::new();
        let mut offsets = vec![0u32];
        for cell in cells {
            let start = values.len();
            if let Some(list) = cell {
                values.extend(list.into_iter().map(|t| interner.intern(t.as_ref())));
            }
            missing.push(values.len() == start);
            offsets.push(values.len() as u32);
        }
        ColumnData {
            name: name.into(),
            values: ColumnValues::MultiCategorical {
                values: Codes::U32(values),
                offsets,
                encoding: Encoding::Raw(interner.tokens),
            },
            missing,
        }
    }

    pub fn categorical_encoded(
        name: impl Into<String>,
        codes: Vec<u32>,
        missing: BitVec,
        block: u32,
    ) -> Self {
        ColumnData {
            name: name.into(),
            values: ColumnValues::Categorical {
                codes: Codes::U32(codes),
                encoding: Encoding::Block(block),
            },
            missing,
        }
    }

    /// Block-encoded multi-categorical column; cell `i` is
    /// `values[offsets[i]..offsets[i + 1]]` and empty cells are missing.
    pub fn multi_categorical_encoded(
        name: impl Into<String>,
        values: Vec<u32>,
        offsets: Vec<u32>,
        block: u32,
    ) -> Self {
        let missing = offsets.windows(2).map(|w| w[0] == w[1]).collect();
        ColumnData {
            name: name.into(),
            values: ColumnValues::MultiCategorical {
                values: Codes::U32(values),
                offsets,
                encoding: Encoding::Block(block),
            },
            missing,
        }
    }

    pub fn kind(&self) -> FeatureKind {
        match &self.values {
            ColumnValues::Categorical { .. } => FeatureKind::Categorical,
            ColumnValues::MultiCategorical { .. } => FeatureKind::MultiCategorical,
            ColumnValues::Numerical(_) => FeatureKind::Numerical,
            ColumnValues::Temporal(_) => FeatureKind::Temporal,
        }
    }

    pub fn len(&self) -> usize {
        self.missing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }

    /// Payload length (for multi-categorical columns, the row count implied by offsets).
    pub(crate) fn payload_len(&self) -> usize {
        match &self.values {
            ColumnValues::Categorical { codes, .. } => codes.len(),
            ColumnValues::MultiCategorical { offsets, .. } => offsets.len().saturating_sub(1),
            ColumnValues::Numerical(n) => n.len(),
            ColumnValues::Temporal(t) => t.len(),
        }
    }

    #[inline]
    pub fn is_missing(&self, row: usize) -> bool {
        self.missing[row]
    }

    pub fn n_missing(&self) -> usize {
        self.missing.count_ones()
    }

    pub fn encoding(&self) -> Option<&Encoding> {
        match &self.values {
            ColumnValues::Categorical { encoding, .. } => Some(encoding),
            ColumnValues::MultiCategorical { encoding, .. } => Some(encoding),
            _ => None,
        }
    }

    pub fn block(&self) -> Option<u32> {
        self.encoding().and_then(Encoding::block)
    }

    /// Code of a categorical cell, `None` when missing or not categorical.
    #[inline]
    pub fn code(&self, row: usize) -> Option<u32> {
        match &self.values {
            ColumnValues::Categorical { codes, .. } if !self.missing[row] => Some(codes.get(row)),
            _ => None,
        }
    }

    /// Element codes of a multi-categorical cell (empty when missing).
    pub fn list(&self, row: usize) -> impl Iterator<Item = u32> + '_ {
        let (values, range) = match &self.values {
            ColumnValues::MultiCategorical {
                values, offsets, ..
            } => (
                Some(values),
                offsets[row] as usize..offsets[row + 1] as usize,
            ),
            _ => (None, 0..0),
        };
        range.map(move |k| values.map(|v| v.get(k)).unwrap_or(0))
    }

    #[inline]
    pub fn number(&self, row: usize) -> Option<f64> {
        match &self.values {
            ColumnValues::Numerical(n) if !self.missing[row] => Some(n.get(row)),
            _ => None,
        }
    }

    #[inline]
    pub fn timestamp(&self, row: usize) -> Option<i64> {
        match &self.values {
            ColumnValues::Temporal(t) if !self.missing[row] => Some(t[row]),
            _ => None,
        }
    }

    /// Raw token of a categorical cell; `None` when missing or already block-encoded.
    pub fn token(&self, row: usize) -> Option<&str> {
        match &self.values {
            ColumnValues::Categorical {
                codes,
                encoding: Encoding::Raw(dict),
            } if !self.missing[row] => Some(dict[codes.get(row) as usize].as_str()),
            _ => None,
        }
    }

    /// Raw tokens of a multi-categorical cell.
    pub fn tokens(&self, row: usize) -> Vec<&str> {
        match &self.values {
            ColumnValues::MultiCategorical {
                encoding: Encoding::Raw(dict),
                ..
            } => self.list(row).map(|c| dict[c as usize].as_str()).collect(),
            _ => Vec::new(),
        }
    }

    /// Number of distinct non-missing values. Multi-categorical columns
    /// count distinct elements.
    pub fn distinct_count(&self) -> usize {
        match &self.values {
            ColumnValues::Categorical { codes, .. } => {
                let mut seen = bitvec::bitvec![0; codes.max().map_or(0, |m| m as usize + 1)];
                let mut n = 0;
                for row in 0..codes.len() {
                    if !self.missing[row] {
                        let c = codes.get(row) as usize;
                        if !seen[c] {
                            seen.set(c, true);
                            n += 1;
                        }
                    }
                }
                n
            }
            ColumnValues::MultiCategorical { values, .. } => {
                let mut v = values.to_u32_vec();
                v.sort_unstable();
                v.dedup();
                v.len()
            }
            ColumnValues::Numerical(n) => {
                let mut v: Vec<u64> = (0..n.len())
                    .filter(|&r| !self.missing[r])
                    .map(|r| n.get(r).to_bits())
                    .collect();
                v.sort_unstable();
                v.dedup();
                v.len()
            }
            ColumnValues::Temporal(t) => {
                let mut v: Vec<i64> = (0..t.len())
                    .filter(|&r| !self.missing[r])
                    .map(|r| t[r])
                    .collect();
                v.sort_unstable();
                v.dedup();
                v.len()
            }
        }
    }

    /// Rows in the given order (subset or permutation).
    pub fn take_rows(&self, rows: &[usize]) -> ColumnData {
        let missing: BitVec = rows.iter().map(|&r| self.missing[r]).collect();
        let values = match &self.values {
            ColumnValues::Categorical { codes, encoding } => ColumnValues::Categorical {
                codes: codes.take(rows),
                encoding: encoding.clone(),
            },
            ColumnValues::MultiCategorical {
                values,
                offsets,
                encoding,
            } => {
                let mut out = Vec::new();
                let mut new_offsets = Vec::with_capacity(rows.len() + 1);
                new_offsets.push(0u32);
                for &r in rows {
                    for k in offsets[r]..offsets[r + 1] {
                        out.push(values.get(k as usize));
                    }
                    new_offsets.push(out.len() as u32);
                }
                let wide = matches!(values, Codes::U32(_));
                let out = Codes::U32(out);
                ColumnValues::MultiCategorical {
                    values: if wide { out } else { out.narrow() },
                    offsets: new_offsets,
                    encoding: encoding.clone(),
                }
            }
            ColumnValues::Numerical(n) => ColumnValues::Numerical(n.take(rows)),
            ColumnValues::Temporal(t) => {
                ColumnValues::Temporal(rows.iter().map(|&r| t[r]).collect())
            }
        };
        ColumnData {
            name: self.name.clone(),
            values,
            missing,
        }
    }

    /// Gather rows; a `None` row becomes a missing cell.
    pub fn take_optional(&self, rows: &[Option<usize>]) -> ColumnData {
        let missing: BitVec = rows
            .iter()
            .map(|r| r.is_none_or(|r| self.missing[r]))
            .collect();
        let values = match &self.values {
            ColumnValues::Categorical { codes, encoding } => ColumnValues::Categorical {
                codes: codes.take_optional(rows),
                encoding: encoding.clone(),
            },
            ColumnValues::MultiCategorical {
                values,
                offsets,
                encoding,
            } => {
                let mut out = Vec::new();
                let mut new_offsets = Vec::with_capacity(rows.len() + 1);
                new_offsets.push(0u32);
                for r in rows {
                    if let Some(r) = *r {
                        out.extend((offsets[r]..offsets[r + 1]).map(|k| values.get(k as usize)));
                    }
                    new_offsets.push(out.len() as u32);
                }
                let wide = matches!(values, Codes::U32(_));
                let out = Codes::U32(out);
                ColumnValues::MultiCategorical {
                    values: if wide { out } else { out.narrow() },
                    offsets: new_offsets,
                    encoding: encoding.clone(),
                }
            }
            ColumnValues::Numerical(n) => ColumnValues::Numerical(n.take_optional(rows)),
            ColumnValues::Temporal(t) => {
                ColumnValues::Temporal(rows.iter().map(|r| r.map_or(0, |r| t[r])).collect())
            }
        };
        ColumnData {
            name: self.name.clone(),
            values,
            missing,
        }
    }

    /// Append the rows of `other` below this column. Raw dictionaries are
    /// merged; block-encoded columns must share the block.
    pub fn concat(&self, other: &ColumnData) -> Option<ColumnData> {
        let mut missing = self.missing.clone();
        missing.extend(other.missing.iter().by_vals());
        let values = match (&self.values, &other.values) {
            (
                ColumnValues::Categorical {
                    codes: a,
                    encoding: ea,
                },
                ColumnValues::Categorical {
                    codes: b,
                    encoding: eb,
                },
            ) => {
                let (encoding, remap) = merge_encodings(ea, eb)?;
                let mut codes = a.to_u32_vec();
                // missing cells keep their placeholder code
                codes.extend(
                    b.iter()
                        .zip(other.missing.iter().by_vals())
                        .map(|(c, miss)| match &remap {
                            Some(m) if !miss => m[c as usize],
                            _ => c,
                        }),
                );
                ColumnValues::Categorical {
                    codes: Codes::U32(codes),
                    encoding,
                }
            }
            (
                ColumnValues::MultiCategorical {
                    values: a,
                    offsets: oa,
                    encoding: ea,
                },
                ColumnValues::MultiCategorical {
                    values: b,
                    offsets: ob,
                    encoding: eb,
                },
            ) => {
                let (encoding, remap) = merge_encodings(ea, eb)?;
                let mut values = a.to_u32_vec();
                values.extend(
                    b.iter()
                        .map(|c| remap.as_ref().map_or(c, |m| m[c as usize])),
                );
                let base = *oa.last().unwrap_or(&0);
                let mut offsets = oa.clone();
                offsets.extend(ob.iter().skip(1).map(|o| o + base));
                ColumnValues::MultiCategorical {
                    values: Codes::U32(values),
                    offsets,
                    encoding,
                }
            }
            (ColumnValues::Numerical(a), ColumnValues::Numerical(b)) => {
                let mut v = a.to_f64_vec();
                v.extend(b.to_f64_vec());
                ColumnValues::Numerical(Numbers::F64(v))
            }
            (ColumnValues::Temporal(a), ColumnValues::Temporal(b)) => {
                let mut v = a.clone();
                v.extend_from_slice(b);
                ColumnValues::Temporal(v)
            }
            _ => return None,
        };
        Some(ColumnData {
            name: self.name.clone(),
            values,
            missing,
        })
    }

    /// Bytes used per row by this column's storage, including the mask bit.
    pub fn bytes_per_row(&self) -> f64 {
        let mask = 0.125;
        let n = self.len().max(1) as f64;
        mask + match &self.values {
            ColumnValues::Categorical { codes, .. } => codes.width_bytes() as f64,
            ColumnValues::MultiCategorical { values, .. } => {
                let avg_len = values.len() as f64 / n;
                avg_len * values.width_bytes() as f64 + 8.0
            }
            ColumnValues::Numerical(v) => v.width_bytes() as f64,
            ColumnValues::Temporal(_) => 8.0,
        }
    }
}

type Remap = Option<Vec<u32>>;

fn merge_encodings(a: &Encoding, b: &Encoding) -> Option<(Encoding, Remap)> {
    match (a, b) {
        (Encoding::Raw(ta), Encoding::Raw(tb)) => {
            let mut interner = Interner::default();
            for t in ta {
                interner.intern(t);
            }
            let remap = tb.iter().map(|t| interner.intern(t)).collect();
            Some((Encoding::Raw(interner.tokens), Some(remap)))
        }
        (Encoding::Block(x), Encoding::Block(y)) if x == y => Some((Encoding::Block(*x), None)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_categorical_interns_in_first_occurrence_order() {
        let c = ColumnData::categorical_raw("c", [Some("b"), None, Some("a"), Some("b")]);
        assert_eq!(c.kind(), FeatureKind::Categorical);
        assert_eq!(
            c.encoding().unwrap().tokens().unwrap(),
            &["b".to_string(), "a".to_string()]
        );
        assert_eq!(c.token(3), Some("b"));
        assert_eq!(c.token(1), None);
        assert_eq!(c.distinct_count(), 2);
    }

    #[test]
    fn multi_categorical_offsets() {
        let c = ColumnData::multi_categorical_raw(
            "m",
            [
                Some(vec!["134", "2137", "576", "816"]),
                None,
                Some(vec!["2137"]),
            ],
        );
        assert_eq!(c.list(0).count(), 4);
        assert!(c.is_missing(1));
        assert_eq!(c.tokens(2), vec!["2137"]);
        assert_eq!(c.distinct_count(), 4);
    }

    #[test]
    fn narrow_picks_smallest_width() {
        assert_eq!(Codes::from(vec![0, 200]).narrow().width_bytes(), 1);
        assert_eq!(Codes::from(vec![0, 300]).narrow().width_bytes(), 2);
        assert_eq!(Codes::from(vec![70_000]).narrow().width_bytes(), 4);
    }

    #[test]
    fn concat_merges_raw_dictionaries() {
        let a = ColumnData::categorical_raw("c", [Some("x"), Some("y")]);
        let b = ColumnData::categorical_raw("c", [Some("z"), Some("x")]);
        let c = a.concat(&b).unwrap();
        let toks: Vec<_> = (0..4).map(|r| c.token(r).unwrap()).collect();
        assert_eq!(toks, ["x", "y", "z", "x"]);
    }

    #[test]
    fn concat_with_all_missing_side() {
        let a = ColumnData::categorical_raw("c", [Some("x"), None]);
        let b = ColumnData::categorical_raw("c", [None::<&str>, None]);
        for c in [a.concat(&b).unwrap(), b.concat(&a).unwrap()] {
            assert_eq!(c.n_missing(), 3);
            assert_eq!((0..4).filter_map(|r| c.token(r)).collect::<Vec<_>>(), ["x"]);
        }
    }

    #[test]
    fn take_rows_permutes_lists() {
        let c = ColumnData::multi_categorical_raw("m", [Some(vec!["a"]), Some(vec!["b", "c"])]);
        let t = c.take_rows(&[1, 0]);
        assert_eq!(t.tokens(0), vec!["b", "c"]);
        assert_eq!(t.tokens(1), vec!["a"]);
    }
}
