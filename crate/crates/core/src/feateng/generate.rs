//! Candidate generators for stages 1 to 3 and the multi-categorical position kernel.

use std::collections::HashMap;

use rayon::prelude::*;

use super::groupby::{
    count_by, mean_std_by, numeric_view, nunique_by, quantile_bins, same_code_space, Groups,
    NO_GROUP,
};
use super::{FeatureFrame, Provenance};
use crate::data::{BaseFeatureMap, ColumnData, ColumnValues, Encoding, FeatureKind};

const QUANTILE_BINS: usize = 10;

fn categorical<'a>(frame: &'a FeatureFrame, name: &str) -> Option<&'a ColumnData> {
    frame
        .column(name)
        .filter(|c| c.kind() == FeatureKind::Categorical)
}

/// Main-table keys present in the frame, factor first.
pub fn frame_keys(frame: &FeatureFrame, base: &BaseFeatureMap) -> Vec<String> {
    let mut keys = vec![base.factor.clone()];
    keys.extend(
        base.keys_of(&frame.source)
            .iter()
            .filter(|k| **k != base.factor)
            .cloned(),
    );
    keys.retain(|k| categorical(frame, k).is_some());
    keys
}

/// Baseline features: row count per grouping key and distinct counts of
/// the other keys and sessions within each group.
pub fn gen_first_order(frame: &FeatureFrame, base: &BaseFeatureMap) -> Vec<ColumnData> {
    let keys = frame_keys(frame, base);
    let mut targets = keys.clone();
    targets.extend(
        base.sessions
            .iter()
            .filter(|s| categorical(frame, s).is_some())
            .cloned(),
    );

    let groups: HashMap<&str, Groups> = targets
        .iter()
        .map(|name| {
            (
                name.as_str(),
                Groups::from_categorical(frame.column(name).unwrap()),
            )
        })
        .collect();
    let mut tasks: Vec<(&str, Option<&str>)> = Vec::new();
    for g in &keys {
        tasks.push((g, None));
        tasks.extend(
            targets
                .iter()
                .filter(|t| *t != g)
                .map(|t| (g.as_str(), Some(t.as_str()))),
        );
    }
    tasks
        .par_iter()
        .map(|&(g, t)| match t {
            None => ColumnData::from_f64(format!("cnt({g})"), count_by(&groups[g])),
            Some(t) => ColumnData::from_f64(
                format!("nunique({t}|{g})"),
                nunique_by(&groups[g], &groups[t]),
            ),
        })
        .collect()
}

enum SecondOrder<'a> {
    GroupStats { x: &'a str, key: &'a str },
    Count(&'a str),
    Position { cat: &'a str, multi: &'a str },
}

/// Group statistics of numeric columns per key, count and frequency
/// encodings of categoricals, and positions of categorical values inside
/// multi-categorical lists that share their code space.
pub fn gen_second_order(
    frame: &FeatureFrame,
    keys: &[String],
    baseline: &[String],
) -> Vec<ColumnData> {
    let is_key = |name: &str| keys.iter().any(|k| k == name);
    let numeric: Vec<&str> = frame
        .iter()
        .filter(|(c, p)| {
            c.kind() == FeatureKind::Numerical
                && (*p == Provenance::Original
                    || (*p == Provenance::Order1 && baseline.contains(&c.name)))
        })
        .map(|(c, _)| c.name.as_str())
        .collect();
    let cats: Vec<&ColumnData> = frame
        .iter()
        .filter(|(c, p)| {
            *p == Provenance::Original && c.kind() == FeatureKind::Categorical && !is_key(&c.name)
        })
        .map(|(c, _)| c)
        .collect();
    let multis: Vec<&ColumnData> = frame
        .iter()
        .filter(|(c, p)| *p == Provenance::Original && c.kind() == FeatureKind::MultiCategorical)
        .map(|(c, _)| c)
        .collect();

    let mut tasks = Vec::new();
    for &x in &numeric {
        for key in keys {
            // a baseline grouped by `key` is constant inside its own groups
            if x == format!("cnt({key})") || x.ends_with(&format!("|{key})")) {
                continue;
            }
            tasks.push(SecondOrder::GroupStats { x, key });
        }
    }
    tasks.extend(cats.iter().map(|c| SecondOrder::Count(&c.name)));
    for c in &cats {
        for m in &multis {
            if comparable(c, m) {
                tasks.push(SecondOrder::Position {
                    cat: &c.name,
                    multi: &m.name,
                });
            }
        }
    }

    let key_groups: HashMap<&str, Groups> = keys
        .iter()
        .map(|k| {
            (
                k.as_str(),
                Groups::from_categorical(frame.column(k).unwrap()),
            )
        })
        .collect();
    let n = frame.n_rows as f64;
    tasks
        .par_iter()
        .map(|task| match *task {
            SecondOrder::GroupStats { x, key } => {
                let g = &key_groups[key];
                let values = numeric_view(frame.column(x).unwrap());
                let (mean, std) = mean_std_by(g, &values);
                let per_bin = count_by(&g.cross(&quantile_bins(&values, QUANTILE_BINS)));
                vec![
                    ColumnData::from_f64(format!("mean({x}|{key})"), mean),
                    ColumnData::from_f64(format!("std({x}|{key})"), std),
                    ColumnData::from_f64(format!("bincnt({x}|{key})"), per_bin),
                ]
            }
            SecondOrder::Count(c) => {
                let counts = count_by(&Groups::from_categorical(frame.column(c).unwrap()));
                let freq = counts.iter().map(|v| v / n).collect();
                vec![
                    ColumnData::from_f64(format!("count({c})"), counts),
                    ColumnData::from_f64(format!("freq({c})"), freq),
                ]
            }
            SecondOrder::Position { cat, multi } => {
                let pos = position_lookup(frame.column(cat).unwrap(), frame.column(multi).unwrap());
                vec![ColumnData::from_f64(format!("pos({cat}@{multi})"), pos)]
            }
        })
        .flatten()
        .collect()
}

fn comparable(cat: &ColumnData, multi: &ColumnData) -> bool {
    same_code_space(cat, multi)
        || matches!(
            (cat.encoding(), multi.encoding()),
            (Some(Encoding::Raw(_)), Some(Encoding::Raw(_)))
        )
}

/// 1-based position of each row's categorical value inside the row's
/// multi-categorical list, 0 when absent; NaN when either cell is missing.
pub fn position_lookup(cat: &ColumnData, multi: &ColumnData) -> Vec<f64> {
    let (
        ColumnValues::Categorical {
            codes,
            encoding: cat_enc,
        },
        ColumnValues::MultiCategorical {
            values,
            offsets,
            encoding: multi_enc,
        },
    ) = (&cat.values, &multi.values)
    else {
        return vec![f64::NAN; cat.len()];
    };
    // translate categorical codes into the list's code space when needed
    let translate: Option<Vec<u32>> = match (cat_enc, multi_enc) {
        (Encoding::Raw(a), Encoding::Raw(b)) if a != b => {
            let index: HashMap<&str, u32> = b
                .iter()
                .enumerate()
                .map(|(i, t)| (t.as_str(), i as u32))
                .collect();
            Some(
                a.iter()
                    .map(|t| index.get(t.as_str()).copied().unwrap_or(NO_GROUP))
                    .collect(),
            )
        }
        _ => None,
    };
    let list: Vec<u32> = values.to_u32_vec();
    (0..cat.len())
        .map(|r| {
            let (a, b) = (offsets[r] as usize, offsets[r + 1] as usize);
            if cat.missing[r] || a == b {
                return f64::NAN;
            }
            let mut v = codes.get(r);
            if let Some(t) = &translate {
                v = t[v as usize];
            }
            match list[a..b].iter().position(|&e| e == v) {
                Some(p) => (p + 1) as f64,
                None => 0.0,
            }
        })
        .collect()
}

/// Width of a temporal bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BucketUnit {
    Day,
    Hour,
    Minute,
    Second,
}

impl BucketUnit {
    pub const ALL: [BucketUnit; 4] = [
        BucketUnit::Day,
        BucketUnit::Hour,
        BucketUnit::Minute,
        BucketUnit::Second,
    ];

    pub fn seconds(self) -> i64 {
        match self {
            BucketUnit::Day => 86_400,
            BucketUnit::Hour => 3_600,
            BucketUnit::Minute => 60,
            BucketUnit::Second => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BucketUnit::Day => "day",
            BucketUnit::Hour => "hour",
            BucketUnit::Minute => "minute",
            BucketUnit::Second => "second",
        }
    }
}

/// First unit, coarsest to finest, whose bucket count over `span_s` lies in
/// 100..=10,000; otherwise the unit closest to that range in log scale.
/// `None` for a zero span.
pub fn choose_bucket_unit(span_s: i64) -> Option<BucketUnit> {
    if span_s <= 0 {
        return None;
    }
    let buckets = |u: BucketUnit| (span_s / u.seconds() + 1) as f64;
    if let Some(u) = BucketUnit::ALL
        .into_iter()
        .find(|&u| (100.0..=10_000.0).contains(&buckets(u)))
    {
        return Some(u);
    }
    let miss = |u: BucketUnit| {
        let b = buckets(u);
        if b < 100.0 {
            (100.0 / b).ln()
        } else {
            (b / 10_000.0).ln()
        }
    };
    BucketUnit::ALL
        .into_iter()
        .min_by(|&a, &b| miss(a).total_cmp(&miss(b)))
}

/// Bucket index of each timestamp relative to the earliest one.
pub fn bucket_ids(times: &ColumnData, unit: BucketUnit) -> Vec<u32> {
    let t0 = (0..times.len())
        .filter_map(|r| times.timestamp(r))
        .min()
        .unwrap_or(0);
    (0..times.len())
        .map(|r| match times.timestamp(r) {
            Some(t) => ((t - t0) / unit.seconds()) as u32,
            None => NO_GROUP,
        })
        .collect()
}

/// Per (key, time bucket) row counts and distinct counts of `categoricals`,
/// at most `budget` candidates.
pub fn gen_temporal(
    frame: &FeatureFrame,
    time_column: Option<&str>,
    keys: &[String],
    categoricals: &[String],
    budget: usize,
) -> Vec<ColumnData> {
    let Some(times) = time_column
        .and_then(|t| frame.column(t))
        .filter(|c| c.kind() == FeatureKind::Temporal)
    else {
        return Vec::new();
    };
    let present: Vec<i64> = (0..times.len())
        .filter_map(|r| times.timestamp(r))
        .collect();
    let span = present
        .iter()
        .max()
        .zip(present.iter().min())
        .map(|(a, b)| a - b)
        .unwrap_or(0);
    let Some(unit) = choose_bucket_unit(span) else {
        return Vec::new();
    };
    let buckets = bucket_ids(times, unit);
    let key_buckets: HashMap<&str, Groups> = keys
        .iter()
        .map(|k| {
            (
                k.as_str(),
                Groups::from_categorical(frame.column(k).unwrap()).cross(&buckets),
            )
        })
        .collect();

    let mut tasks: Vec<(&str, Option<&str>)> = keys.iter().map(|k| (k.as_str(), None)).collect();
    for c in categoricals
        .iter()
        .filter(|c| categorical(frame, c).is_some())
    {
        tasks.extend(
            keys.iter()
                .filter(|k| *k != c)
                .map(|k| (k.as_str(), Some(c.as_str()))),
        );
    }
    tasks.truncate(budget);
    let unit = unit.as_str();
    tasks
        .par_iter()
        .map(|&(k, c)| {
            let g = &key_buckets[k];
            match c {
                None => ColumnData::from_f64(format!("tcnt({k}@{unit})"), count_by(g)),
                Some(c) => {
                    let t = Groups::from_categorical(frame.column(c).unwrap());
                    ColumnData::from_f64(format!("tnunique({c}|{k}@{unit})"), nunique_by(g, &t))
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Table;
    use std::collections::BTreeMap;

    fn cat(name: &str, cells: &[&str]) -> ColumnData {
        ColumnData::categorical_raw(name, cells.iter().map(|c| (!c.is_empty()).then_some(*c)))
    }

    fn base(keys: &[&str], sessions: &[&str]) -> BaseFeatureMap {
        BaseFeatureMap {
            keys: BTreeMap::from([(
                "main".to_string(),
                keys.iter().map(|s| s.to_string()).collect(),
            )]),
            factor: keys[0].to_string(),
            sessions: sessions.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn frame(cols: Vec<ColumnData>) -> FeatureFrame {
        let t = Table::new("main", cols).unwrap();
        let n = t.n_rows;
        FeatureFrame::from_table(t, n)
    }

    #[test]
    fn first_order_counts_and_distincts() {
        let f = frame(vec![
            cat("u", &["u1", "u1", "u2"]),
            cat("s", &["a", "b", "c"]),
        ]);
        let out = gen_first_order(&f, &base(&["u"], &["s"]));
        assert_eq!(out.len(), 2);
        assert_eq!(numeric_view(&out[0]), vec![2.0, 2.0, 1.0]);
        assert_eq!(out[1].name, "nunique(s|u)");
        assert_eq!(numeric_view(&out[1]), vec![2.0, 2.0, 1.0]);
    }

    #[test]
    fn single_key_no_session_gives_one_count() {
        let f = frame(vec![cat("u", &["u1", "u1", "u2"])]);
        let out = gen_first_order(&f, &base(&["u"], &[]));
        assert_eq!(
            out.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(),
            ["cnt(u)"]
        );
    }

    #[test]
    fn second_order_examples() {
        let f = frame(vec![
            cat("k", &["k", "k", "k", "k"]),
            ColumnData::numerical("x", [1.0, 2.0, 3.0, 4.0].map(Some)),
            ColumnData::numerical("z", [5.0; 4].map(Some)),
            cat("c", &["a", "a", "b", "b"]),
        ]);
        let out = gen_second_order(&f, &["k".to_string()], &[]);
        let get = |name: &str| numeric_view(out.iter().find(|c| c.name == name).unwrap());
        assert_eq!(get("mean(x|k)"), vec![2.5; 4]);
        assert_eq!(get("std(z|k)"), vec![0.0; 4]);
        assert_eq!(get("count(c)"), vec![2.0; 4]);
        assert_eq!(get("freq(c)"), vec![0.5; 4]);
    }

    #[test]
    fn count_encoding() {
        let f = frame(vec![cat("c", &["a", "a", "b"])]);
        let out = gen_second_order(&f, &[], &[]);
        assert_eq!(numeric_view(&out[0]), vec![2.0, 2.0, 1.0]);
    }

    #[test]
    fn position_of_value_in_list() {
        let c = cat("c", &["2137", "9", "", "5"]);
        let m = ColumnData::multi_categorical_raw(
            "m",
            vec![
                Some(vec!["134", "2137", "576", "816"]),
                Some(vec!["1"]),
                Some(vec!["1"]),
                None,
            ],
        );
        let p = position_lookup(&c, &m);
        assert_eq!(p[..2], [2.0, 0.0]);
        assert!(p[2].is_nan() && p[3].is_nan());
    }

    #[test]
    fn bucket_units() {
        assert_eq!(choose_bucket_unit(3 * 86_400), Some(BucketUnit::Minute));
        assert_eq!(choose_bucket_unit(30 * 86_400), Some(BucketUnit::Hour));
        assert_eq!(choose_bucket_unit(400 * 86_400), Some(BucketUnit::Day));
        assert_eq!(choose_bucket_unit(50), Some(BucketUnit::Second));
        assert_eq!(choose_bucket_unit(0), None);
        let t = ColumnData::temporal("t", [0, 86_400, 2 * 86_400 + 5, 86_399].map(Some));
        assert_eq!(bucket_ids(&t, BucketUnit::Day), vec![0, 1, 2, 0]);
    }

    #[test]
    fn temporal_counts_per_key_bucket() {
        let f = frame(vec![
            cat("k", &["k", "k", "k", "k"]),
            ColumnData::temporal("t", [0, 3_600, 86_400, 200 * 86_400].map(Some)),
        ]);
        let out = gen_temporal(&f, Some("t"), &["k".to_string()], &[], 8);
        assert_eq!(out[0].name, "tcnt(k@day)");
        assert_eq!(numeric_view(&out[0]), vec![2.0, 2.0, 1.0, 1.0]);
        assert!(gen_temporal(&f, None, &["k".to_string()], &[], 8).is_empty());
    }
}
