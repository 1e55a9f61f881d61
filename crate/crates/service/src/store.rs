//! In-memory dataset registry with compute-once result caches.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use hankel_core::{
    align_embeddings, block_hankel, hankel_embed, identify_output_only, kalman_filter, load_csv,
    minmax_scale, pca_embed, trajectory_matrix, CsvConfig, Embedding, KalmanState, RankSpec,
    ScalingParams, StateSpaceModel, TimeSeries,
};

use crate::error::ApiError;

type Cell<T> = Arc<OnceLock<Result<Arc<T>, ApiError>>>;

/// Cache of values that are computed at most once per key. Concurrent
/// requests for the same key wait on a single computation.
struct OnceCache<K, T> {
    cells: Mutex<HashMap<K, Cell<T>>>,
}

impl<K: std::hash::Hash + Eq + Clone, T> OnceCache<K, T> {
    fn new() -> Self {
        Self {
            cells: Mutex::new(HashMap::new()),
        }
    }

    fn get_or_compute(
        &self,
        key: &K,
        compute: impl FnOnce() -> Result<T, ApiError>,
    ) -> Result<Arc<T>, ApiError> {
        let cell = {
            let mut cells = self.cells.lock().expect("cache lock poisoned");
            cells.entry(key.clone()).or_default().clone()
        };
        cell.get_or_init(|| compute().map(Arc::new)).clone()
    }
}

/// Rank request as given by the caller, hashable for cache keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RankKey {
    pub rank: Option<usize>,
    epsilon_bits: Option<u64>,
}

impl RankKey {
    pub fn new(rank: Option<usize>, epsilon: Option<f64>) -> Result<Self, ApiError> {
        RankSpec::from_options(rank, epsilon)?;
        Ok(Self {
            rank,
            epsilon_bits: epsilon.map(f64::to_bits),
        })
    }

    pub fn spec(&self) -> RankSpec {
        RankSpec::from_options(self.rank, self.epsilon_bits.map(f64::from_bits))
            .expect("validated on construction")
    }

    fn label(&self) -> String {
        match (self.rank, self.epsilon_bits) {
            (Some(r), _) => format!("r{r}"),
            (None, Some(e)) => format!("eps{}", f64::from_bits(e)),
            (None, None) => "auto".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EmbeddingKey {
    pub window_length: usize,
    pub rank: RankKey,
    pub center: bool,
}

/// Both embeddings for one parameter set, plus how well they agree.
#[derive(Debug)]
pub struct EmbeddingPair {
    pub singular_values: Vec<f64>,
    pub timecluster: Embedding,
    pub subspace: Embedding,
    pub align_residual: f64,
}

/// Identified model and the filter state after the last observation.
#[derive(Debug)]
pub struct FittedModel {
    pub model: StateSpaceModel,
    pub last: KalmanState,
}

pub struct Dataset {
    pub id: String,
    pub series: TimeSeries,
    /// Min-max scaled copy used for all computation.
    pub scaled: TimeSeries,
    pub scaling: ScalingParams,
    embeddings: OnceCache<EmbeddingKey, EmbeddingPair>,
    models: OnceCache<(usize, RankKey), FittedModel>,
}

impl Dataset {
    fn new(id: String, series: TimeSeries) -> Self {
        let (scaled, scaling) = minmax_scale(&series);
        Self {
            id,
            series,
            scaled,
            scaling,
            embeddings: OnceCache::new(),
            models: OnceCache::new(),
        }
    }

    /// Number of stride-1 windows, or 422 if `L` does not fit.
    pub fn windows(&self, window_length: usize) -> Result<usize, ApiError> {
        let t = self.series.len();
        if window_length == 0 || window_length > t {
            return Err(ApiError::Unprocessable(format!(
                "L must lie in 1..={t}, got {window_length}"
            )));
        }
        Ok(t - window_length + 1)
    }

    pub fn embedding(&self, key: EmbeddingKey) -> Result<Arc<EmbeddingPair>, ApiError> {
        self.windows(key.window_length)?;
        self.embeddings.get_or_compute(&key, || {
            let z = trajectory_matrix(&self.scaled, key.window_length, 1)?;
            let h = block_hankel(&self.scaled, key.window_length)?;
            let (dec, subspace) = hankel_embed(&h, key.rank.spec(), key.center)?;
            if dec.rank == 0 {
                return Err(ApiError::Unprocessable(
                    "no singular value above threshold".into(),
                ));
            }
            let timecluster = pca_embed(&z, dec.rank, key.center)?;
            let align_residual = align_embeddings(&timecluster, &subspace)?.residual;
            Ok(EmbeddingPair {
                singular_values: dec.singular_values,
                timecluster,
                subspace,
                align_residual,
            })
        })
    }

    pub fn model(
        &self,
        window_length: usize,
        rank: RankKey,
        persist: Option<&Path>,
    ) -> Result<Arc<FittedModel>, ApiError> {
        self.windows(window_length)?;
        self.models.get_or_compute(&(window_length, rank), || {
            let fit = identify_output_only(&self.scaled, window_length, rank.spec())?;
            let filtered = kalman_filter(&fit.model, &self.scaled, None, None)?;
            let last = filtered.last().cloned().ok_or(ApiError::Unprocessable(
                "series has no observations".into(),
            ))?;
            if let Some(dir) = persist {
                let path = dir.join(format!("{}.model.L{window_length}.{}.json", self.id, rank.label()));
                if let Err(e) = fit.model.save(&path) {
                    tracing::warn!("could not persist model to {}: {e}", path.display());
                }
            }
            Ok(FittedModel {
                model: fit.model,
                last,
            })
        })
    }
}

/// All uploaded datasets. Records are immutable once inserted.
pub struct Store {
    datasets: RwLock<BTreeMap<String, Arc<Dataset>>>,
    next_id: AtomicU64,
    data_dir: Option<PathBuf>,
}

pub fn parse_csv(bytes: &[u8]) -> Result<TimeSeries, ApiError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(ApiError::BadRequest("empty upload".into()));
    }
    load_csv(bytes, &CsvConfig::infer(bytes)).map_err(|e| ApiError::BadRequest(e.to_string()))
}

impl Store {
    pub fn in_memory() -> Self {
        Self {
            datasets: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
            data_dir: None,
        }
    }

    /// Store backed by `dir`: uploads are written there as `<id>.csv` and
    /// existing CSVs are loaded back on startup.
    pub fn with_data_dir(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        let store = Self {
            data_dir: Some(dir.to_path_buf()),
            ..Self::in_memory()
        };
        let mut max_id = 0;
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let Some(id) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".csv"))
                .filter(|n| !n.contains('.'))
            else {
                continue;
            };
            let bytes = fs::read(&path)?;
            match parse_csv(&bytes) {
                Ok(series) => {
                    if let Some(n) = id.strip_prefix("ds").and_then(|n| n.parse::<u64>().ok()) {
                        max_id = max_id.max(n);
                    }
                    store.insert(id.to_string(), series);
                }
                Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
            }
        }
        store.next_id.store(max_id + 1, Ordering::SeqCst);
        Ok(store)
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    fn insert(&self, id: String, series: TimeSeries) -> Arc<Dataset> {
        let dataset = Arc::new(Dataset::new(id.clone(), series));
        self.datasets
            .write()
            .expect("store lock poisoned")
            .insert(id, dataset.clone());
        dataset
    }

    /// Parses and registers an upload under a fresh id.
    pub fn upload(&self, bytes: &[u8]) -> Result<Arc<Dataset>, ApiError> {
        let series = parse_csv(bytes)?;
        let id = format!("ds{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        if let Some(dir) = &self.data_dir {
            fs::write(dir.join(format!("{id}.csv")), bytes)
                .map_err(|e| ApiError::Internal(format!("could not persist upload: {e}")))?;
        }
        Ok(self.insert(id, series))
    }

    pub fn get(&self, id: &str) -> Result<Arc<Dataset>, ApiError> {
        self.datasets
            .read()
            .expect("store lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        self.datasets
            .read()
            .expect("store lock poisoned")
            .keys()
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;
    use std::thread;

    const PAPER_CSV: &[u8] = b"a,b\n1,10\n2,20\n3,30\n4,40\n";

    #[test]
    fn once_cache_computes_once_under_contention() {
        let cache: Arc<OnceCache<u32, u32>> = Arc::new(OnceCache::new());
        let calls = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let cache = cache.clone();
                let calls = calls.clone();
                thread::spawn(move || {
                    *cache
                        .get_or_compute(&7, || {
                            calls.fetch_add(1, Ordering::SeqCst);
                            thread::sleep(std::time::Duration::from_millis(20));
                            Ok(49)
                        })
                        .unwrap()
                })
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), 49);
        }
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn uploads_get_fresh_ids() {
        let store = Store::in_memory();
        let a = store.upload(PAPER_CSV).unwrap();
        let b = store.upload(PAPER_CSV).unwrap();
        assert_ne!(a.id, b.id);
        assert_eq!(a.series, b.series);
        assert_eq!(store.ids().len(), 2);
        assert!(matches!(store.upload(b""), Err(ApiError::BadRequest(_))));
        assert!(matches!(store.get("nope"), Err(ApiError::NotFound(_))));
    }

    #[test]
    fn embedding_is_cached_and_consistent() {
        let store = Store::in_memory();
        let ds = store.upload(PAPER_CSV).unwrap();
        let key = EmbeddingKey {
            window_length: 2,
            rank: RankKey::new(Some(2), None).unwrap(),
            center: false,
        };
        let first = ds.embedding(key).unwrap();
        let second = ds.embedding(key).unwrap();
        assert!(Arc::ptr_eq(&first, &second));
        assert_eq!(first.subspace.windows(), 3);
        assert!(first.align_residual < 1e-8);
        let bad = EmbeddingKey { window_length: 5, ..key };
        assert!(matches!(ds.embedding(bad), Err(ApiError::Unprocessable(_))));
    }

    #[test]
    fn data_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let id = {
            let store = Store::with_data_dir(dir.path()).unwrap();
            store.upload(PAPER_CSV).unwrap().id.clone()
        };
        let reopened = Store::with_data_dir(dir.path()).unwrap();
        assert_eq!(reopened.get(&id).unwrap().series.len(), 4);
        let next = reopened.upload(PAPER_CSV).unwrap();
        assert_ne!(next.id, id);
    }
}
