use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use super::dataset::{Dataset, DatasetMetadata};

/// Read access to a set of named datasets.
pub trait DatasetLookup: Sync {
    fn dataset(&self, name: &str) -> Option<&Dataset>;
    fn dataset_names(&self) -> Vec<String>;

    /// Exact name first, then a case-insensitive match.
    fn find(&self, name: &str) -> Option<&Dataset> {
        self.dataset(name).or_else(|| {
            self.dataset_names()
                .into_iter()
                .find(|n| n.eq_ignore_ascii_case(name))
                .and_then(|n| self.dataset(&n))
        })
    }
}

/// Immutable point-in-time view of the registry; cheap to clone.
#[derive(Debug, Clone, Default)]
pub struct StoreSnapshot {
    datasets: BTreeMap<String, Arc<Dataset>>,
}

impl StoreSnapshot {
    pub fn from_datasets(datasets: impl IntoIterator<Item = Dataset>) -> StoreSnapshot {
        StoreSnapshot {
            datasets: datasets
                .into_iter()
                .map(|d| (d.name.clone(), Arc::new(d)))
                .collect(),
        }
    }

    /// Restrict to `names`; an empty list keeps everything. Unknown names are returned as errors.
    pub fn scoped(&self, names: &[String]) -> Result<StoreSnapshot, String> {
        if names.is_empty() {
            return Ok(self.clone());
        }
        let mut datasets = BTreeMap::new();
        for n in names {
            let name = self.find(n).ok_or_else(|| n.clone())?.name.clone();
            let ds = Arc::clone(&self.datasets[&name]);
            datasets.insert(name, ds);
        }
        Ok(StoreSnapshot { datasets })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Dataset> {
        self.datasets.values().map(|d| d.as_ref())
    }

    pub fn metadata(&self) -> Vec<(String, DatasetMetadata)> {
        self.iter().map(|d| (d.name.clone(), d.metadata.clone())).collect()
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }
}

impl DatasetLookup for StoreSnapshot {
    fn dataset(&self, name: &str) -> Option<&Dataset> {
        self.datasets.get(name).map(|d| d.as_ref())
    }

    fn dataset_names(&self) -> Vec<String> {
        self.datasets.keys().cloned().collect()
    }
}

/// Shared registry: writes (register/replace) are serialized, lookups run concurrently.
#[derive(Debug, Default)]
pub struct DatasetRegistry {
    inner: RwLock<BTreeMap<String, Arc<Dataset>>>,
}

impl DatasetRegistry {
    pub fn new() -> DatasetRegistry {
        DatasetRegistry::default()
    }

    /// Insert or replace by name. Returns true when an existing dataset was replaced.
    pub fn register(&self, dataset: Dataset) -> bool {
        let mut guard = self.inner.write().expect("registry lock poisoned");
        guard.insert(dataset.name.clone(), Arc::new(dataset)).is_some()
    }

    pub fn get(&self, name: &str) -> Option<Arc<Dataset>> {
        self.inner.read().expect("registry lock poisoned").get(name).cloned()
    }

    pub fn names(&self) -> Vec<String> {
        self.inner.read().expect("registry lock poisoned").keys().cloned().collect()
    }

    pub fn snapshot(&self) -> StoreSnapshot {
        StoreSnapshot {
            datasets: self.inner.read().expect("registry lock poisoned").clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{ingest_csv, IngestOptions};

    fn ds(name: &str, body: &str) -> Dataset {
        ingest_csv(body.as_bytes(), name, &IngestOptions::default()).unwrap()
    }

    #[test]
    fn replace_keeps_one_per_name() {
        let reg = DatasetRegistry::new();
        assert!(!reg.register(ds("a", "x\n1\n")));
        assert!(reg.register(ds("a", "x\n1\n2\n")));
        assert_eq!(reg.names(), vec!["a".to_string()]);
        assert_eq!(reg.get("a").unwrap().metadata.row_count, 2);
    }

    #[test]
    fn scoped_rejects_unknown() {
        let reg = DatasetRegistry::new();
        reg.register(ds("a", "x\n1\n"));
        let snap = reg.snapshot();
        assert_eq!(snap.scoped(&["A".into()]).unwrap().len(), 1);
        assert_eq!(snap.scoped(&["b".into()]).unwrap_err(), "b");
    }
}
