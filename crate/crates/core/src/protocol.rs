//! Session construction and execution for the incremental protocol.
//!
//! Session 0 holds every training sample of the base classes. Each later
//! session introduces `ways` new classes with `shots` training samples each.
//! The test set of session `i` covers every class seen in sessions `0..=i`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Rng;
use crate::model::Backbone;
use crate::prototype::{
    add_incremental_prototypes, build_base_prototypes, build_full_prototypes, ncm_classify,
    PrototypeStore,
};
use crate::sample::{class_count, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub base_classes: usize,
    pub steps: usize,
    pub ways: usize,
    pub shots: usize,
    pub seed: u64,
    /// Shuffle class ids before assigning them to sessions.
    #[serde(default)]
    pub shuffle_classes: bool,
    /// Fraction of every class held out for testing.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

fn default_test_fraction() -> f64 {
    0.25
}

impl ProtocolSpec {
    pub fn new(base_classes: usize, steps: usize, ways: usize, shots: usize, seed: u64) -> Self {
        Self {
            base_classes,
            steps,
            ways,
            shots,
            seed,
            shuffle_classes: false,
            test_fraction: default_test_fraction(),
        }
    }

    pub fn total_classes(&self) -> usize {
        self.base_classes + self.steps * self.ways
    }

    pub fn validate(&self, available_classes: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleSpec(m));
        if self.base_classes == 0 {
            return bad("need at least one base class".into());
        }
        if self.shots == 0 {
            return bad("shots must be at least 1".into());
        }
        if self.steps > 0 && self.ways == 0 {
            return bad("ways must be at least 1 when steps > 0".into());
        }
        if self.total_classes() > available_classes {
            return bad(format!(
                "{} base + {} x {} incremental classes exceed the {available_classes} available",
                self.base_classes, self.steps, self.ways
            ));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} must lie in (0, 1)", self.test_fraction));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionSplit {
    pub index: usize,
    /// Classes introduced in this session, ascending.
    pub classes: Vec<usize>,
    pub train: Vec<Sample>,
    /// Test samples of every class seen so far.
    pub test: Vec<Sample>,
    /// All classes seen up to and including this session, in introduction order.
    pub seen_classes: Vec<usize>,
}

/// Materializes the base and incremental sessions.
pub fn build_splits(dataset: &[Sample], spec: &ProtocolSpec) -> Result<Vec<SessionSplit>> {
    let classes = class_count(dataset);
    spec.validate(classes)?;
    let root = Rng::new(spec.seed);

    let mut order: Vec<usize> = (0..classes).collect();
    if spec.shuffle_classes {
        root.fork(0).shuffle(&mut order);
    }
    let mut per_class: Vec<Vec<&Sample>> = vec![Vec::new(); classes];
    for s in dataset {
        per_class[s.label].push(s);
    }
    for members in &mut per_class {
        members.sort_by_key(|s| s.id);
    }

    let session_classes: Vec<Vec<usize>> = std::iter::once(order[..spec.base_classes].to_vec())
        .chain((0..spec.steps).map(|i| {
            let start = spec.base_classes + i * spec.ways;
            order[start..start + spec.ways].to_vec()
        }))
        .collect();

    // per-class train/test partition
    let mut train_pool: Vec<Vec<&Sample>> = vec![Vec::new(); classes];
    let mut test_pool: Vec<Vec<&Sample>> = vec![Vec::new(); classes];
    for (session, members) in session_classes.iter().enumerate() {
        for &c in members {
            let mut items = per_class[c].clone();
            root.fork(1 + c as u64).shuffle(&mut items);
            let n = items.len();
            let n_test = ((spec.test_fraction * n as f64).round() as usize).max(1);
            let need = if session == 0 { 1 } else { spec.shots };
            if n < n_test + need {
                return Err(Error::InsufficientShots {
                    class: c,
                    available: n.saturating_sub(n_test),
                    requested: need,
                });
            }
            let (test, train) = items.split_at(n_test);
            let mut test = test.to_vec();
            let mut train = train.to_vec();
            test.sort_by_key(|s| s.id);
            train.sort_by_key(|s| s.id);
            test_pool[c] = test;
            train_pool[c] = train;
        }
    }

    let mut splits = Vec::with_capacity(session_classes.len());
    let mut seen: Vec<usize> = Vec::new();
    for (index, members) in session_classes.into_iter().enumerate() {
        let mut sorted = members.clone();
        sorted.sort_unstable();
        let mut train = Vec::new();
        for &c in &sorted {
            if index == 0 {
                train.extend(train_pool[c].iter().map(|s| (*s).clone()));
            } else {
                let pool = &train_pool[c];
                let mut rng = root.fork(1_000_000 + c as u64);
                let mut picks = rng.sample_indices(pool.len(), spec.shots);
                picks.sort_unstable();
                train.extend(picks.into_iter().map(|i| pool[i].clone()));
            }
        }
        seen.extend(&members);
        let test = seen
            .iter()
            .flat_map(|&c| test_pool[c].iter().map(|s| (*s).clone()))
            .collect();
        splits.push(SessionSplit {
            index,
            classes: sorted,
            train,
            test,
            seen_classes: seen.clone(),
        });
    }
    check_disjoint(&splits)?;
    Ok(splits)
}

fn check_disjoint(splits: &[SessionSplit]) -> Result<()> {
    let mut all = BTreeSet::new();
    for s in splits {
        for &c in &s.classes {
            if !all.insert(c) {
                return Err(Error::SplitMismatch(format!(
                    "class {c} appears in more than one session"
                )));
            }
        }
    }
    Ok(())
}

/// CSV audit table: one row per class with its session, training sample ids
/// and test sample ids (ids separated by `;`).
pub fn splits_manifest(splits: &[SessionSplit]) -> String {
    let mut out = String::from("session,class,train_ids,test_ids\n");
    let join = |ids: Vec<u64>| ids.iter().map(u64::to_string).collect::<Vec<_>>().join(";");
    for s in splits {
        for &c in &s.classes {
            let train = s.train.iter().filter(|x| x.label == c).map(|x| x.id).collect();
            let test = s.test.iter().filter(|x| x.label == c).map(|x| x.id).collect();
            let _ = writeln!(out, "{},{},{},{}", s.index, c, join(train), join(test));
        }
    }
    out
}

/// How base-class prototypes are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasePrototypes {
    /// `k` exemplars nearest to the class mean.
    Balanced { k: usize },
    /// Every base training sample.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub index: usize,
    /// `(true label, predicted label)` per test sample.
    pub pairs: Vec<(usize, usize)>,
    pub seen_classes: Vec<usize>,
    pub base_classes: Vec<usize>,
    /// Prototype count after this session.
    pub prototypes: usize,
}

#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub sessions: Vec<SessionResult>,
    pub store: PrototypeStore,
}

fn check_splits(splits: &[SessionSplit]) -> Result<()> {
    if splits.is_empty() {
        return Err(Error::SplitMismatch("no sessions".into()));
    }
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    for (i, s) in splits.iter().enumerate() {
        if s.index != i {
            return Err(Error::SplitMismatch(format!("session {i} carries index {}", s.index)));
        }
        seen.extend(&s.classes);
        if let Some(x) = s.train.iter().find(|x| !s.classes.contains(&x.label)) {
            return Err(Error::SplitMismatch(format!(
                "session {i} trains on class {} it does not introduce",
                x.label
            )));
        }
        if let Some(x) = s.test.iter().find(|x| !seen.contains(&x.label)) {
            return Err(Error::SplitMismatch(format!(
                "session {i} tests on unseen class {}",
                x.label
            )));
        }
    }
    check_disjoint(splits)
}

/// Runs every session against a frozen backbone: base prototypes first, then
/// one prototype per new class, classifying each cumulative test set by
/// nearest class mean.
pub fn run_protocol(
    backbone: &Backbone,
    splits: &[SessionSplit],
    base: BasePrototypes,
) -> Result<ProtocolOutcome> {
    check_splits(splits)?;
    let mut store = match base {
        BasePrototypes::Balanced { k } => build_base_prototypes(backbone, &splits[0].train, k)?,
        BasePrototypes::Full => build_full_prototypes(backbone, &splits[0].train)?,
    };
    let base_classes = splits[0].classes.clone();
    let mut sessions = Vec::with_capacity(splits.len());
    for split in splits {
        if split.index > 0 {
            store = add_incremental_prototypes(store, backbone, &split.train)?;
        }
        let pairs = split
            .test
            .iter()
            .map(|s| {
                let f = backbone.extract_feature(&s.payload)?;
                Ok((s.label, ncm_classify(&store, &f)?))
            })
            .collect::<Result<Vec<_>>>()?;
        sessions.push(SessionResult {
            index: split.index,
            pairs,
            seen_classes: split.seen_classes.clone(),
            base_classes: base_classes.clone(),
            prototypes: store.len(),
        });
    }
    Ok(ProtocolOutcome { sessions, store })
}
