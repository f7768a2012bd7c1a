//! Gold-standard labeled sections: loading, stratified splitting, k-fold
//! partitioning and oversampling.

use std::fmt;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The seven content classes in canonical order. `what` and `why` share
/// one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    WhatWhy,
    How,
    When,
    Who,
    References,
    Contribution,
    Other,
}

pub const NUM_LABELS: usize = 7;

impl Label {
    pub const ALL: [Label; NUM_LABELS] = [
        Label::WhatWhy,
        Label::How,
        Label::When,
        Label::Who,
        Label::References,
        Label::Contribution,
        Label::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Label::WhatWhy => "what_why",
            Label::How => "how",
            Label::When => "when",
            Label::Who => "who",
            Label::References => "references",
            Label::Contribution => "contribution",
            Label::Other => "other",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Parses a gold label name. `what` and `why` both map to [`Label::WhatWhy`].
    pub fn parse(name: &str) -> Option<Label> {
        match name {
            "what" | "why" | "what_why" => Some(Label::WhatWhy),
            other => Label::ALL.into_iter().find(|l| l.name() == other),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Seven binary flags in [`Label::ALL`] order, packed into a byte.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct LabelVector(u8);

impl LabelVector {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn from_labels(labels: impl IntoIterator<Item = Label>) -> Self {
        let mut v = Self(0);
        for l in labels {
            v.set(l, true);
        }
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Self::from_labels(Label::ALL.into_iter().zip(bits).filter(|(_, &b)| b).map(|(l, _)| l))
    }

    pub fn has(self, label: Label) -> bool {
        self.0 & (1 << label.index()) != 0
    }

    pub fn set(&mut self, label: Label, on: bool) {
        if on {
            self.0 |= 1 << label.index();
        } else {
            self.0 &= !(1 << label.index());
        }
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn labels(self) -> impl Iterator<Item = Label> {
        Label::ALL.into_iter().filter(move |&l| self.has(l))
    }

    pub fn to_bools(self) -> [bool; NUM_LABELS] {
        Label::ALL.map(|l| self.has(l))
    }

    pub fn names(self) -> Vec<&'static str> {
        self.labels().map(Label::name).collect()
    }
}

impl Serialize for LabelVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.names().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        names
            .iter()
            .map(|n| Label::parse(n).ok_or_else(|| serde::de::Error::custom(format!("unknown label {n:?}"))))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(LabelVector::from_labels)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSection {
    pub doc_id: String,
    pub ordinal: usize,
    pub heading: String,
    pub text: String,
    pub labels: LabelVector,
}

/// Train fraction, seed and fold count for splitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_train_fraction() -> f64 {
    0.7
}

fn default_k() -> usize {
    5
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: default_train_fraction(),
            seed: 0,
            k: default_k(),
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction {} not in (0, 1)",
                self.train_fraction
            )));
        }
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct GoldRow {
    doc_id: String,
    ordinal: usize,
    heading: String,
    text: String,
    labels: String,
}

/// Parse a semicolon-separated label field. `row` is the 1-based data row.
pub fn parse_label_field(field: &str, row: usize) -> Result<LabelVector> {
    let mut v = LabelVector::empty();
    let mut any = false;
    for name in field.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        any = true;
        let label = Label::parse(&name.to_ascii_lowercase()).ok_or_else(|| Error::UnknownLabel {
            row,
            label: name.to_string(),
        })?;
        v.set(label, true);
    }
    if !any {
        return Err(Error::EmptyLabels { row });
    }
    Ok(v)
}

/// Read gold sections from CSV with header `doc_id,ordinal,heading,text,labels`.
pub fn read_gold(reader: impl std::io::Read) -> Result<Vec<LabeledSection>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["doc_id", "ordinal", "heading", "text", "labels"];
    if headers.iter().ne(expected) {
        return Err(Error::Input(format!(
            "gold CSV header must be {}, found {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<GoldRow>().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Input(format!("row {row}: {e}")))?;
        out.push(LabeledSection {
            labels: parse_label_field(&rec.labels, row)?,
            doc_id: rec.doc_id,
            ordinal: rec.ordinal,
            heading: rec.heading,
            text: rec.text,
        });
    }
    Ok(out)
}

pub fn load_gold(path: &Path) -> Result<Vec<LabeledSection>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_gold(std::io::BufReader::new(f))
}

/// Write sections in the gold CSV layout. The merged class is written as
/// `what`.
pub fn write_gold(sections: &[LabeledSection], writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in sections {
        let labels = s
            .labels
            .labels()
            .map(|l| if l == Label::WhatWhy { "what" } else { l.name() })
            .collect::<Vec<_>>()
            .join(";");
        w.serialize(GoldRow {
            doc_id: s.doc_id.clone(),
            ordinal: s.ordinal,
            heading: s.heading.clone(),
            text: s.text.clone(),
            labels,
        })?;
    }
    w.flush().map_err(|e| Error::Input(format!("writing gold CSV: {e}")))?;
    Ok(())
}

/// Positive count per label.
pub fn label_counts<'a>(labels: impl IntoIterator<Item = &'a LabelVector>) -> [usize; NUM_LABELS] {
    let mut counts = [0; NUM_LABELS];
    for v in labels {
        for l in v.labels() {
            counts[l.index()] += 1;
        }
    }
    counts
}

/// Iterative stratification over `labels` into subsets with the given
/// target sizes. Returns the subset index for every example.
///
/// While examples remain, the label with the fewest unassigned positives is
/// taken and each of its examples goes to the subset with the largest
/// unmet share of its quota, summed over the example's labels (ties: most
/// remaining capacity, then random). Full subsets are never chosen, so
/// subset sizes come out exactly as requested.
/// Examples with no labels are placed last by remaining capacity.
fn iterative_stratify(labels: &[LabelVector], sizes: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = labels.len();
    let k = sizes.len();
    debug_assert_eq!(sizes.iter().sum::<usize>(), n);
    let total = n as f64;
    let counts = label_counts(labels);
    let mut desired_label: Vec<[f64; NUM_LABELS]> = sizes
        .iter()
        .map(|&s| {
            let r = s as f64 / total;
            counts.map(|c| c as f64 * r)
        })
        .collect();
    let quota = desired_label.clone();
    let mut capacity: Vec<usize> = sizes.to_vec();
    let mut assignment = vec![usize::MAX; n];
    let mut remaining = counts;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let pick = |candidates: &[usize], rng: &mut ChaCha8Rng| -> usize {
        *candidates.choose(rng).expect("at least one subset has capacity")
    };

    while let Some(label) = Label::ALL
        .into_iter()
        .filter(|l| remaining[l.index()] > 0)
        .min_by_key(|l| (remaining[l.index()], l.index()))
    {
        for &i in &order {
            if assignment[i] != usize::MAX || !labels[i].has(label) {
                continue;
            }
            let open: Vec<usize> = (0..k).filter(|&j| capacity[j] > 0).collect();
            let want = |j: usize| -> f64 {
                labels[i]
                    .labels()
                    .map(|l| desired_label[j][l.index()] / quota[j][l.index()])
                    .sum()
            };
            let best_want = open.iter().map(|&j| want(j)).fold(f64::NEG_INFINITY, f64::max);
            let tied: Vec<usize> = open.iter().copied().filter(|&j| want(j) == best_want).collect();
            let best_cap = tied.iter().map(|&j| capacity[j]).max().unwrap();
            let tied: Vec<usize> = tied.into_iter().filter(|&j| capacity[j] == best_cap).collect();
            let j = pick(&tied, rng);
            assignment[i] = j;
            capacity[j] -= 1;
            for l in labels[i].labels() {
                desired_label[j][l.index()] -= 1.0;
                remaining[l.index()] -= 1;
            }
        }
    }
    for &i in &order {
        if assignment[i] == usize::MAX {
            let best_cap = capacity.iter().copied().max().unwrap();
            let tied: Vec<usize> = (0..k).filter(|&j| capacity[j] == best_cap).collect();
            let j = pick(&tied, rng);
            assignment[i] = j;
            capacity[j] -= 1;
        }
    }
    assignment
}

/// Multi-label stratified train/test split. `|train| = round(train_fraction * n)`.
pub fn stratified_split<T: Clone>(
    data: &[T],
    labels_of: impl Fn(&T) -> LabelVector,
    spec: &SplitSpec,
) -> Result<(Vec<T>, Vec<T>)> {
    spec.validate()?;
    if data.len() < 10 {
        return Err(Error::Input(format!(
            "stratified split needs at least 10 items, got {}",
            data.len()
        )));
    }
    let labels: Vec<LabelVector> = data.iter().map(&labels_of).collect();
    let n_train = (spec.train_fraction * data.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let assignment = iterative_stratify(&labels, &[n_train, data.len() - n_train], &mut rng);
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(data.len() - n_train);
    for (item, side) in data.iter().zip(assignment) {
        if side == 0 {
            train.push(item.clone());
        } else {
            test.push(item.clone());
        }
    }
    Ok((train, test))
}

/// Stratified k-fold partition. Returns the fold index of every item; fold
/// sizes differ by at most one.
pub fn kfold_assignment<T>(data: &[T], labels_of: impl Fn(&T) -> LabelVector, spec: &SplitSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    let n = data.len();
    if spec.k > n {
        return Err(Error::Input(format!(
            "k = {} exceeds the {} available items",
            spec.k, n
        )));
    }
    let labels: Vec<LabelVector> = data.iter().map(labels_of).collect();
    let sizes: Vec<usize> = (0..spec.k).map(|j| n / spec.k + usize::from(j < n % spec.k)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(iterative_stratify(&labels, &sizes, &mut rng))
}

/// Stratified k-fold cross-validation: `k` (train, validation) pairs.
pub fn kfold<T: Clone>(
    data: &[T],
    labels_of: impl Fn(&T) -> LabelVector,
    spec: &SplitSpec,
) -> Result<Vec<(Vec<T>, Vec<T>)>> {
    let assignment = kfold_assignment(data, labels_of, spec)?;
    Ok((0..spec.k)
        .map(|fold| {
            let (val, train): (Vec<_>, Vec<_>) = data.iter().zip(&assignment).partition(|(_, &a)| a == fold);
            (
                train.into_iter().map(|(t, _)| t.clone()).collect(),
                val.into_iter().map(|(t, _)| t.clone()).collect(),
            )
        })
        .collect())
}

/// Balance threshold relative to the largest label count.
pub const OVERSAMPLE_TOLERANCE: f64 = 0.9;
/// Oversampling stops once the set has grown to this multiple of its
/// original size.
pub const OVERSAMPLE_GROWTH_CAP: usize = 5;

/// Duplicate examples of the currently rarest label until every label count
/// reaches [`OVERSAMPLE_TOLERANCE`] of the largest count, or the set hits
/// [`OVERSAMPLE_GROWTH_CAP`] times its size. The largest count is
/// re-measured after each duplicate.
///
/// Each duplicate is drawn uniformly from the carriers of the rarest label
/// that co-carry the fewest labels already at the target, so frequent
/// co-occurring labels are not inflated needlessly. The originals come
/// first and unchanged; duplicates are appended.
pub fn oversample<T: Clone>(train: &[T], labels_of: impl Fn(&T) -> LabelVector, seed: u64) -> Result<Vec<T>> {
    let labels: Vec<LabelVector> = train.iter().map(&labels_of).collect();
    let mut counts = label_counts(&labels);
    if let Some(l) = Label::ALL.into_iter().find(|l| counts[l.index()] == 0) {
        return Err(Error::Input(format!(
            "label {l} has no positive examples to oversample"
        )));
    }
    let carriers: Vec<Vec<usize>> = Label::ALL
        .iter()
        .map(|&l| (0..train.len()).filter(|&i| labels[i].has(l)).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = train.to_vec();
    let cap = OVERSAMPLE_GROWTH_CAP * train.len();
    let mut pool = Vec::new();
    loop {
        let target = OVERSAMPLE_TOLERANCE * *counts.iter().max().unwrap() as f64;
        let (rarest, &low) = counts.iter().enumerate().min_by_key(|&(i, &c)| (c, i)).unwrap();
        if low as f64 >= target || out.len() >= cap {
            break;
        }
        let saturated = |i: usize| {
            labels[i]
                .labels()
                .filter(|l| counts[l.index()] as f64 >= target)
                .count()
        };
        let least = carriers[rarest].iter().map(|&i| saturated(i)).min().unwrap();
        pool.clear();
        pool.extend(carriers[rarest].iter().copied().filter(|&i| saturated(i) == least));
        let i = pool[rng.random_range(0..pool.len())];
        out.push(train[i].clone());
        for l in labels[i].labels() {
            counts[l.index()] += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(labels: &[Label]) -> LabelVector {
        LabelVector::from_labels(labels.iter().copied())
    }

    #[test]
    fn label_parsing_merges_what_and_why() {
        assert_eq!(parse_label_field("what;why", 1).unwrap(), lv(&[Label::WhatWhy]));
        assert_eq!(parse_label_field("how", 1).unwrap(), lv(&[Label::How]));
        assert_eq!(
            parse_label_field(" Who ; references ", 1).unwrap(),
            lv(&[Label::Who, Label::References])
        );
    }

    #[test]
    fn label_parsing_errors_name_the_row() {
        let err = parse_label_field("howw", 4).unwrap_err();
        assert_eq!(err.to_string(), "unknown label \"howw\" at row 4");
        assert!(matches!(
            parse_label_field(" ; ", 2),
            Err(Error::EmptyLabels { row: 2 })
        ));
    }

    #[test]
    fn gold_csv_round_trip() {
        let csv = "doc_id,ordinal,heading,text,labels\n\
                   r1,0,Intro,\"What it is, and why\",what;why\n\
                   r1,1,Install,run CODE,how\n\
                   r2,3,Team,\"multi\nline\",who;references\n";
        let rows = read_gold(csv.as_bytes()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].labels, lv(&[Label::WhatWhy]));
        assert_eq!(rows[2].text, "multi\nline");
        let mut buf = Vec::new();
        write_gold(&rows, &mut buf).unwrap();
        assert_eq!(read_gold(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn gold_csv_errors() {
        let bad = "doc_id,ordinal,heading,text,labels\nr,0,h,t,how\nr,1,h,t,howw\n";
        assert!(matches!(
            read_gold(bad.as_bytes()),
            Err(Error::UnknownLabel { row: 2, .. })
        ));
        let empty = "doc_id,ordinal,heading,text,labels\nr,0,h,t,\n";
        assert!(matches!(
            read_gold(empty.as_bytes()),
            Err(Error::EmptyLabels { row: 1 })
        ));
        assert!(read_gold("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn label_vector_serde() {
        let v = lv(&[Label::How, Label::Other]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["how","other"]"#);
        assert_eq!(serde_json::from_str::<LabelVector>(&json).unwrap(), v);
    }

    #[test]
    fn single_label_split_is_exact() {
        let data = vec![lv(&[Label::How]); 100];
        let (train, test) = stratified_split(&data, |v| *v, &SplitSpec::default()).unwrap();
        assert_eq!((train.len(), test.len()), (70, 30));
    }

    #[test]
    fn split_is_deterministic_partition() {
        let data: Vec<(usize, LabelVector)> = (0..60)
            .map(|i| {
                (
                    i,
                    LabelVector::from_labels([Label::ALL[i % 7], Label::ALL[(i / 7) % 7]]),
                )
            })
            .collect();
        let spec = SplitSpec {
            seed: 11,
            ..Default::default()
        };
        let a = stratified_split(&data, |d| d.1, &spec).unwrap();
        let b = stratified_split(&data, |d| d.1, &spec).unwrap();
        assert_eq!(a, b);
        let mut ids: Vec<usize> = a.0.iter().chain(&a.1).map(|d| d.0).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..60).collect::<Vec<_>>());
        assert_eq!(a.0.len(), 42);
    }

    #[test]
    fn split_rejects_tiny_input() {
        let data = vec![lv(&[Label::How]); 9];
        assert!(stratified_split(&data, |v| *v, &SplitSpec::default()).is_err());
    }

    #[test]
    fn kfold_sizes_and_partition() {
        let data: Vec<(usize, LabelVector)> = (0..10).map(|i| (i, lv(&[Label::ALL[i % 3]]))).collect();
        let folds = kfold(&data, |d| d.1, &SplitSpec::default()).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = [0; 10];
        for (train, val) in &folds {
            assert_eq!(val.len(), 2);
            assert_eq!(train.len(), 8);
            for d in val {
                seen[d.0] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        let spec = SplitSpec {
            k: 11,
            ..Default::default()
        };
        assert!(kfold(&data, |d| d.1, &spec).is_err());
    }

    #[test]
    fn oversample_reaches_threshold() {
        let mut data = vec![lv(&[Label::How]); 100];
        data.extend(vec![lv(&[Label::Other]); 10]);
        for l in [
            Label::WhatWhy,
            Label::When,
            Label::Who,
            Label::References,
            Label::Contribution,
        ] {
            data.extend(vec![lv(&[l]); 95]);
        }
        let out = oversample(&data, |v| *v, 3).unwrap();
        let counts = label_counts(&out);
        assert!(counts[Label::Other.index()] >= 90, "{counts:?}");
        assert_eq!(&out[..data.len()], &data[..]);
    }

    #[test]
    fn oversample_leaves_balanced_sets_alone() {
        let data: Vec<LabelVector> = Label::ALL.iter().map(|&l| lv(&[l])).collect();
        assert_eq!(oversample(&data, |v| *v, 1).unwrap(), data);
    }

    #[test]
    fn oversample_is_seeded_and_needs_every_label() {
        let mut data: Vec<LabelVector> = Label::ALL.iter().map(|&l| lv(&[l])).collect();
        data.extend(vec![lv(&[Label::How, Label::Who]); 20]);
        data.push(lv(&[Label::Other, Label::When]));
        let a = oversample(&data, |v| *v, 9).unwrap();
        assert_eq!(a, oversample(&data, |v| *v, 9).unwrap());
        assert!(a.len() > data.len());

        let missing = vec![lv(&[Label::How]); 5];
        assert!(oversample(&missing, |v| *v, 0).is_err());
    }
}
