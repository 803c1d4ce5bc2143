//! Class prototypes and nearest-class-mean classification.
//!
//! Features are l2-normalized before averaging, and every prototype is stored
//! normalized. Base-class prototypes can be built from the same number of
//! samples as an incremental class gets: the `k` samples closest (by cosine)
//! to the full-data class mean.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::math::{cosine_similarity, l2_normalize};
use crate::model::Backbone;
use crate::sample::Sample;

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub vector: Vec<f64>,
    /// Number of samples averaged into `vector`.
    pub shots: usize,
    /// Ids of those samples, in selection order.
    pub sources: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrototypeStore {
    entries: BTreeMap<usize, Prototype>,
}

impl PrototypeStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, class: usize) -> Option<&Prototype> {
        self.entries.get(&class)
    }

    pub fn contains(&self, class: usize) -> bool {
        self.entries.contains_key(&class)
    }

    /// Classes in ascending order.
    pub fn classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Prototype)> + '_ {
        self.entries.iter().map(|(&c, p)| (c, p))
    }

    pub fn insert(&mut self, class: usize, proto: Prototype) -> Result<()> {
        if self.entries.contains_key(&class) {
            return Err(Error::DuplicateClass(class));
        }
        self.entries.insert(class, proto);
        Ok(())
    }

    /// Versioned text form: a header, then per class one `class` line
    /// (`class <id> shots <k> ids <a,b,...>`) and one `vec` line of entries.
    pub fn to_text(&self) -> String {
        let dim = self.entries.values().next().map_or(0, |p| p.vector.len());
        let mut out = format!("fscil-prototypes v1\ndim {dim}\nclasses {}\n", self.len());
        for (class, p) in &self.entries {
            let ids: Vec<String> = p.sources.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "class {class} shots {} ids {}", p.shots, ids.join(","));
            let vals: Vec<String> = p.vector.iter().map(f64::to_string).collect();
            let _ = writeln!(out, "vec {}", vals.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, detail: &str| Error::Parse {
            path: "<prototypes>".into(),
            location: format!("line {}", line + 1),
            detail: detail.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| lines.next().ok_or_else(|| err(usize::MAX - 1, &format!("missing {what}")));

        let (n, header) = next("header")?;
        if header != "fscil-prototypes v1" {
            return Err(err(n, "unknown header"));
        }
        let (n, dim_line) = next("dim")?;
        let dim: usize = dim_line
            .strip_prefix("dim ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(n, "bad dim line"))?;
        let (n, count_line) = next("classes")?;
        let count: usize = count_line
            .strip_prefix("classes ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(n, "bad classes line"))?;

        let mut store = PrototypeStore::new();
        for _ in 0..count {
            let (n, head) = next("class line")?;
            let parts: Vec<&str> = head.split(' ').collect();
            let (class, shots, ids) = match parts.as_slice() {
                ["class", c, "shots", k, "ids", ids] => (c, k, *ids),
                ["class", c, "shots", k, "ids"] => (c, k, ""),
                _ => return Err(err(n, "bad class line")),
            };
            let class: usize = class.parse().map_err(|_| err(n, "bad class id"))?;
            let shots: usize = shots.parse().map_err(|_| err(n, "bad shot count"))?;
            let sources = if ids.is_empty() {
                Vec::new()
            } else {
                ids.split(',')
                    .map(|v| v.parse::<u64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| err(n, "bad sample id"))?
            };
            let (n, vec_line) = next("vec line")?;
            let vector = vec_line
                .strip_prefix("vec ")
                .ok_or_else(|| err(n, "bad vec line"))?
                .split(' ')
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| err(n, "bad vector entry"))?;
            if vector.len() != dim {
                return Err(err(n, "vector length differs from dim"));
            }
            store
                .insert(class, Prototype { vector, shots, sources })
                .map_err(|_| err(n, "duplicate class"))?;
        }
        Ok(store)
    }
}

/// Mean of `features`, l2-normalized.
pub fn class_mean(features: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = features.first().ok_or(Error::EmptyClass)?;
    let mut sum = vec![0.0; first.len()];
    for f in features {
        if f.len() != sum.len() {
            return Err(Error::DimensionMismatch {
                expected: sum.len(),
                got: f.len(),
            });
        }
        for (s, v) in sum.iter_mut().zip(f) {
            *s += v;
        }
    }
    let n = features.len() as f64;
    for s in &mut sum {
        *s /= n;
    }
    l2_normalize(&sum)
}

/// The `k` ids whose features are most cosine-similar to `mean`, best first.
/// Equal similarities go to the lower id.
pub fn select_balanced_exemplars(
    class_features: &[(u64, Vec<f64>)],
    mean: &[f64],
    k: usize,
) -> Result<Vec<u64>> {
    if k == 0 || k > class_features.len() {
        return Err(Error::NotEnoughSamples {
            class: None,
            available: class_features.len(),
            requested: k,
        });
    }
    let mut scored = class_features
        .iter()
        .map(|(id, f)| cosine_similarity(f, mean).map(|c| (c, *id)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(k).map(|(_, id)| id).collect())
}

fn normalized_features(backbone: &Backbone, samples: &[&Sample]) -> Result<Vec<(u64, Vec<f64>)>> {
    samples
        .iter()
        .map(|s| {
            let f = backbone.extract_feature(&s.payload)?;
            Ok((s.id, l2_normalize(&f)?))
        })
        .collect()
}

fn by_class(samples: &[Sample]) -> BTreeMap<usize, Vec<&Sample>> {
    let mut out: BTreeMap<usize, Vec<&Sample>> = BTreeMap::new();
    for s in samples {
        out.entry(s.label).or_default().push(s);
    }
    out
}

/// Balanced base prototypes: per class, the normalized mean of the `k`
/// exemplars nearest to the full-data mean.
pub fn build_base_prototypes(backbone: &Backbone, base_data: &[Sample], k: usize) -> Result<PrototypeStore> {
    let mut store = PrototypeStore::new();
    for (class, members) in by_class(base_data) {
        if members.len() < k || k == 0 {
            return Err(Error::NotEnoughSamples {
                class: Some(class),
                available: members.len(),
                requested: k,
            });
        }
        let feats = normalized_features(backbone, &members)?;
        let all: Vec<Vec<f64>> = feats.iter().map(|(_, f)| f.clone()).collect();
        let mean = class_mean(&all)?;
        let chosen = select_balanced_exemplars(&feats, &mean, k)?;
        let picked: Vec<Vec<f64>> = chosen
            .iter()
            .map(|id| feats.iter().find(|(i, _)| i == id).expect("selected id exists").1.clone())
            .collect();
        store.insert(
            class,
            Prototype {
                vector: class_mean(&picked)?,
                shots: k,
                sources: chosen,
            },
        )?;
    }
    Ok(store)
}

/// Unbalanced base prototypes: every sample of a class contributes.
pub fn build_full_prototypes(backbone: &Backbone, base_data: &[Sample]) -> Result<PrototypeStore> {
    let mut store = PrototypeStore::new();
    for (class, members) in by_class(base_data) {
        let feats = normalized_features(backbone, &members)?;
        let all: Vec<Vec<f64>> = feats.iter().map(|(_, f)| f.clone()).collect();
        store.insert(
            class,
            Prototype {
                vector: class_mean(&all)?,
                shots: all.len(),
                sources: feats.iter().map(|(id, _)| *id).collect(),
            },
        )?;
    }
    Ok(store)
}

/// Adds one prototype per new class, the normalized mean of its shots.
/// Existing entries are left untouched; on error the store is unchanged.
pub fn add_incremental_prototypes(
    mut store: PrototypeStore,
    backbone: &Backbone,
    shots: &[Sample],
) -> Result<PrototypeStore> {
    let groups = by_class(shots);
    if let Some(&class) = groups.keys().find(|c| store.contains(**c)) {
        return Err(Error::DuplicateClass(class));
    }
    let mut fresh = Vec::with_capacity(groups.len());
    for (class, members) in groups {
        let feats = normalized_features(backbone, &members)?;
        let all: Vec<Vec<f64>> = feats.iter().map(|(_, f)| f.clone()).collect();
        fresh.push((
            class,
            Prototype {
                vector: class_mean(&all)?,
                shots: all.len(),
                sources: feats.iter().map(|(id, _)| *id).collect(),
            },
        ));
    }
    for (class, p) in fresh {
        store.insert(class, p)?;
    }
    Ok(store)
}

/// Class whose prototype has the largest cosine with `f`; ties go to the
/// lower class id.
pub fn ncm_classify(store: &PrototypeStore, f: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (class, p) in store.iter() {
        let c = cosine_similarity(f, &p.vector)?;
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((class, c));
        }
    }
    best.map(|(class, _)| class).ok_or(Error::EmptyStore)
}
