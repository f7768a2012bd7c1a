//! Synthetic data shared by the integration tests.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use readme_sections::dataset::{Label, LabelVector, LabeledSection};

const HEADINGS: [&[&str]; 7] = [
    &["About", "Overview", "Introduction", "Motivation", "Features"],
    &[
        "Installation",
        "Usage",
        "Getting started",
        "Quick start",
        "Configuration",
    ],
    &["Changelog", "Release notes", "Roadmap", "Versions"],
    &["Authors", "Maintainers", "Team", "Credits"],
    &["References", "Citation", "Related work", "Links"],
    &["Contributing", "How to contribute", "Development"],
    &["License", "Acknowledgements", "Support", "FAQ"],
];

const WORDS: [&[&str]; 7] = [
    &[
        "library", "provides", "fast", "simple", "tool", "purpose", "goal", "designed", "project", "aims",
    ],
    &[
        "install",
        "run",
        "command",
        "build",
        "configure",
        "setup",
        "pip",
        "cargo",
        "execute",
        "option",
    ],
    &[
        "release",
        "version",
        "date",
        "planned",
        "milestone",
        "changed",
        "fixed",
        "update",
        "previous",
    ],
    &[
        "author",
        "maintained",
        "developer",
        "team",
        "university",
        "contact",
        "member",
        "created",
    ],
    &[
        "paper",
        "cite",
        "publication",
        "journal",
        "reference",
        "article",
        "conference",
        "bibtex",
    ],
    &[
        "contribute",
        "pull",
        "request",
        "issue",
        "fork",
        "guideline",
        "patch",
        "review",
        "welcome",
    ],
    &[
        "license",
        "mit",
        "apache",
        "thanks",
        "acknowledge",
        "sponsor",
        "copyright",
        "permission",
    ],
];

const FILLER: [&str; 12] = [
    "the",
    "this",
    "you",
    "can",
    "also",
    "more",
    "information",
    "please",
    "see",
    "our",
    "use",
    "new",
];

/// Relative label frequencies, head label first in canonical order.
pub const LABEL_WEIGHTS: [f64; 7] = [0.22, 0.32, 0.07, 0.09, 0.1, 0.08, 0.12];

pub fn sample_label(rng: &mut ChaCha8Rng) -> Label {
    let mut x: f64 = rng.random::<f64>() * LABEL_WEIGHTS.iter().sum::<f64>();
    for (l, w) in Label::ALL.iter().zip(LABEL_WEIGHTS) {
        if x < w {
            return *l;
        }
        x -= w;
    }
    Label::Other
}

/// One to three labels; roughly a quarter of items carry more than one.
pub fn sample_labels(rng: &mut ChaCha8Rng) -> LabelVector {
    let mut v = LabelVector::from_labels([sample_label(rng)]);
    while rng.random::<f64>() < 0.25 && v.labels().count() < 3 {
        v.set(sample_label(rng), true);
    }
    v
}

pub fn label_vectors(n: usize, seed: u64) -> Vec<LabelVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_labels(&mut rng)).collect()
}

fn sentence(rng: &mut ChaCha8Rng, labels: LabelVector) -> String {
    let carriers: Vec<Label> = labels.labels().collect();
    let len = rng.random_range(5..12);
    let mut words = Vec::with_capacity(len);
    for _ in 0..len {
        if rng.random::<f64>() < 0.6 {
            let l = *carriers.choose(rng).unwrap();
            words.push(WORDS[l.index()].choose(rng).unwrap().to_string());
        } else {
            words.push(FILLER.choose(rng).unwrap().to_string());
        }
    }
    let mut s = words.join(" ");
    s.push('.');
    s
}

fn body(rng: &mut ChaCha8Rng, labels: LabelVector) -> String {
    let mut parts = vec![sentence(rng, labels)];
    for _ in 0..rng.random_range(0..3) {
        parts.push(match rng.random_range(0..6) {
            0 => format!("```\ncmd --flag {}\n```", rng.random_range(1..100)),
            1 => format!(
                "See [the docs](https://example.org/{}) for details.",
                rng.random_range(1..50)
            ),
            2 => "- first item\n- second item".to_string(),
            3 => format!("Version {} ships soon.", rng.random_range(1..9)),
            4 => "Contact maintainer@example.org".to_string(),
            _ => sentence(rng, labels),
        });
    }
    parts.join("\n\n")
}

/// Gold-format sections drawn deterministically from `seed`.
pub fn gold_sections(n: usize, seed: u64) -> Vec<LabeledSection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let labels = sample_labels(&mut rng);
            let first = labels.labels().next().unwrap();
            LabeledSection {
                doc_id: format!("repo{:03}/README.md", i / 6),
                ordinal: i % 6,
                heading: HEADINGS[first.index()].choose(&mut rng).unwrap().to_string(),
                text: body(&mut rng, labels),
                labels,
            }
        })
        .collect()
}

pub fn write_gold_csv(path: &std::path::Path, sections: &[LabeledSection]) {
    let f = std::fs::File::create(path).unwrap();
    readme_sections::dataset::write_gold(sections, f).unwrap();
}
