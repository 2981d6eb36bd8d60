//! Append-only durable store for tweets, counter-narrative pairs and
//! activity events.
//!
//! On-disk layout under the store root:
//!
//! ```text
//! MANIFEST            committed state, replaced atomically (write + rename)
//! tweets/seg-NNNNNN.log
//! pairs/seg-NNNNNN.log
//! events/seg-NNNNNN.log
//! ```
//!
//! Segment files start with an 8-byte magic followed by frames:
//!
//! ```text
//! FRAME := LEN:u32le CRC32(PAYLOAD):u32le PAYLOAD
//! PAYLOAD := canonical JSON of one record
//! ```
//!
//! The manifest records, per store, the segment list and the committed byte
//! length of each segment. Bytes past a committed length belong to an
//! interrupted batch and are ignored on read and truncated on the next write,
//! so the store always reopens at its last committed version.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::model::{ActivityEvent, CnPair, TweetRecord};

const MANIFEST_FILE: &str = "MANIFEST";
const MANIFEST_MAGIC: &[u8; 8] = b"HWMANI1\0";
const SEGMENT_MAGIC: &[u8; 8] = b"HWSEG01\0";
const SEGMENT_LIMIT: u64 = 8 << 20;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("cannot open store at {path}: {reason}")]
    Open { path: PathBuf, reason: String },
    #[error("store at {path} is corrupt: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("store is read-only")]
    ReadOnly,
    #[error("store is closed")]
    Closed,
    #[error("duplicate pair ({language}) already stored as {existing}")]
    DuplicatePair { language: String, existing: String },
    #[error("store io error: {0}")]
    Io(#[from] io::Error),
    #[error("store encoding error: {0}")]
    Encode(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpenMode {
    Read,
    ReadWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StoreKind {
    Tweets,
    Pairs,
    Events,
}

impl StoreKind {
    const ALL: [StoreKind; 3] = [StoreKind::Tweets, StoreKind::Pairs, StoreKind::Events];

    fn dir(self) -> &'static str {
        match self {
            StoreKind::Tweets => "tweets",
            StoreKind::Pairs => "pairs",
            StoreKind::Events => "events",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct SegmentMeta {
    name: String,
    len: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct StoreMeta {
    segments: Vec<SegmentMeta>,
    records: u64,
    /// Global version of the last batch that touched this store.
    last_write: u64,
    next_segment: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Manifest {
    version: u64,
    tweets: StoreMeta,
    pairs: StoreMeta,
    events: StoreMeta,
}

impl Manifest {
    fn meta(&self, kind: StoreKind) -> &StoreMeta {
        match kind {
            StoreKind::Tweets => &self.tweets,
            StoreKind::Pairs => &self.pairs,
            StoreKind::Events => &self.events,
        }
    }

    fn meta_mut(&mut self, kind: StoreKind) -> &mut StoreMeta {
        match kind {
            StoreKind::Tweets => &mut self.tweets,
            StoreKind::Pairs => &mut self.pairs,
            StoreKind::Events => &mut self.events,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct State {
    manifest: Manifest,
    tweets: Arc<Vec<TweetRecord>>,
    pairs: Arc<Vec<CnPair>>,
    events: Arc<Vec<ActivityEvent>>,
    tweet_ids: HashSet<String>,
    pair_triples: HashMap<(String, String, String), String>,
}

struct Shared {
    root: PathBuf,
    mode: OpenMode,
    open: Arc<AtomicBool>,
    state: RwLock<State>,
    writer: Mutex<()>,
}

/// Handle to an open store. Cheap to clone; clones share state.
#[derive(Clone)]
pub struct StoreHandle {
    shared: Arc<Shared>,
}

impl std::fmt::Debug for StoreHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StoreHandle")
            .field("root", &self.shared.root)
            .field("version", &self.version())
            .finish()
    }
}

/// Records to append atomically.
#[derive(Debug, Clone, Default)]
pub struct WriteBatch {
    pub tweets: Vec<TweetRecord>,
    pub pairs: Vec<CnPair>,
    pub events: Vec<ActivityEvent>,
}

impl WriteBatch {
    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty() && self.pairs.is_empty() && self.events.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CommitOutcome {
    pub version: u64,
    pub tweets_written: usize,
    /// Tweets skipped because their id was already stored.
    pub tweets_duplicate: usize,
    pub pairs_written: usize,
    pub events_written: usize,
}

/// Where a simulated crash interrupts a commit.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrashPoint {
    AfterSegments,
}

/// Opens (or, in read-write mode, creates) the store rooted at `path`.
pub fn open_store(path: impl AsRef<Path>, mode: OpenMode) -> Result<StoreHandle, StoreError> {
    StoreHandle::open(path, mode)
}

impl StoreHandle {
    pub fn open(path: impl AsRef<Path>, mode: OpenMode) -> Result<Self, StoreError> {
        let root = path.as_ref().to_path_buf();
        let open_err = |reason: String| StoreError::Open { path: root.clone(), reason };
        let manifest_path = root.join(MANIFEST_FILE);
        let manifest = match mode {
            OpenMode::Read => {
                if !root.is_dir() {
                    return Err(open_err("directory does not exist".into()));
                }
                if !manifest_path.is_file() {
                    return Err(open_err("no MANIFEST (not a store)".into()));
                }
                read_manifest(&manifest_path)?
            }
            OpenMode::ReadWrite => {
                fs::create_dir_all(&root).map_err(|e| open_err(e.to_string()))?;
                for kind in StoreKind::ALL {
                    fs::create_dir_all(root.join(kind.dir())).map_err(|e| open_err(e.to_string()))?;
                }
                if manifest_path.is_file() {
                    read_manifest(&manifest_path)?
                } else {
                    let m = Manifest::default();
                    write_manifest(&root, &m)?;
                    m
                }
            }
        };

        let mut state = State {
            tweets: Arc::new(load_records(&root, StoreKind::Tweets, &manifest)?),
            pairs: Arc::new(load_records(&root, StoreKind::Pairs, &manifest)?),
            events: Arc::new(load_records(&root, StoreKind::Events, &manifest)?),
            ..State::default()
        };
        state.tweet_ids = state.tweets.iter().map(|t| t.id.clone()).collect();
        state.pair_triples = state
            .pairs
            .iter()
            .map(|p| (triple_key(p), p.id.clone()))
            .collect();
        state.manifest = manifest;

        Ok(StoreHandle {
            shared: Arc::new(Shared {
                root,
                mode,
                open: Arc::new(AtomicBool::new(true)),
                state: RwLock::new(state),
                writer: Mutex::new(()),
            }),
        })
    }

    pub fn root(&self) -> &Path {
        &self.shared.root
    }

    pub fn mode(&self) -> OpenMode {
        self.shared.mode
    }

    pub fn version(&self) -> u64 {
        self.read_state().manifest.version
    }

    /// Version of the last batch that wrote pairs.
    pub fn pairs_version(&self) -> u64 {
        self.read_state().manifest.pairs.last_write
    }

    pub fn is_open(&self) -> bool {
        self.shared.open.load(Ordering::Acquire)
    }

    /// Marks the store closed. Snapshots taken earlier return
    /// [`StoreError::Closed`] from then on.
    pub fn close(&self) {
        self.shared.open.store(false, Ordering::Release);
    }

    /// Read-only view pinned at the current version.
    pub fn snapshot(&self) -> Snapshot {
        let st = self.read_state();
        Snapshot {
            version: st.manifest.version,
            pairs_version: st.manifest.pairs.last_write,
            tweets: Arc::clone(&st.tweets),
            pairs: Arc::clone(&st.pairs),
            events: Arc::clone(&st.events),
            open: Arc::clone(&self.shared.open),
        }
    }

    /// Appends a batch atomically. Tweets whose id is already stored (or
    /// repeated within the batch) are skipped; a pair whose
    /// (language, hate_text, counter_text) triple exists fails the batch.
    pub fn commit(&self, batch: WriteBatch) -> Result<CommitOutcome, StoreError> {
        self.commit_inner(batch, None)
    }

    #[doc(hidden)]
    pub fn commit_with_crash(&self, batch: WriteBatch, at: CrashPoint) -> Result<CommitOutcome, StoreError> {
        self.commit_inner(batch, Some(at))
    }

    fn commit_inner(&self, batch: WriteBatch, crash: Option<CrashPoint>) -> Result<CommitOutcome, StoreError> {
        if !self.is_open() {
            return Err(StoreError::Closed);
        }
        if self.shared.mode == OpenMode::Read {
            return Err(StoreError::ReadOnly);
        }
        let _guard = self.shared.writer.lock().unwrap_or_else(|p| p.into_inner());

        let (mut manifest, mut new_ids) = {
            let st = self.read_state();
            (st.manifest.clone(), HashSet::new())
        };

        let mut outcome = CommitOutcome::default();
        let tweets: Vec<TweetRecord> = {
            let st = self.read_state();
            batch
                .tweets
                .into_iter()
                .filter(|t| {
                    let fresh = !st.tweet_ids.contains(&t.id) && new_ids.insert(t.id.clone());
                    if !fresh {
                        outcome.tweets_duplicate += 1;
                    }
                    fresh
                })
                .collect()
        };
        {
            let st = self.read_state();
            let mut in_batch = HashSet::new();
            for p in &batch.pairs {
                let key = triple_key(p);
                if let Some(existing) = st.pair_triples.get(&key) {
                    return Err(StoreError::DuplicatePair { language: p.language.clone(), existing: existing.clone() });
                }
                if !in_batch.insert(key) {
                    return Err(StoreError::DuplicatePair { language: p.language.clone(), existing: p.id.clone() });
                }
            }
        }

        if tweets.is_empty() && batch.pairs.is_empty() && batch.events.is_empty() {
            outcome.version = manifest.version;
            return Ok(outcome);
        }

        let version = manifest.version + 1;
        self.append_frames(&mut manifest, StoreKind::Tweets, &tweets, version)?;
        self.append_frames(&mut manifest, StoreKind::Pairs, &batch.pairs, version)?;
        self.append_frames(&mut manifest, StoreKind::Events, &batch.events, version)?;
        if crash == Some(CrashPoint::AfterSegments) {
            return Err(StoreError::Io(io::Error::new(io::ErrorKind::Interrupted, "simulated crash")));
        }
        manifest.version = version;
        write_manifest(&self.shared.root, &manifest)?;

        let mut st = self.shared.state.write().unwrap_or_else(|p| p.into_inner());
        outcome.version = version;
        outcome.tweets_written = tweets.len();
        outcome.pairs_written = batch.pairs.len();
        outcome.events_written = batch.events.len();
        st.tweet_ids.extend(tweets.iter().map(|t| t.id.clone()));
        for p in &batch.pairs {
            st.pair_triples.insert(triple_key(p), p.id.clone());
        }
        if !tweets.is_empty() {
            Arc::make_mut(&mut st.tweets).extend(tweets);
        }
        if !batch.pairs.is_empty() {
            Arc::make_mut(&mut st.pairs).extend(batch.pairs);
        }
        if !batch.events.is_empty() {
            Arc::make_mut(&mut st.events).extend(batch.events);
        }
        st.manifest = manifest;
        Ok(outcome)
    }

    fn append_frames<T: Serialize>(
        &self,
        manifest: &mut Manifest,
        kind: StoreKind,
        records: &[T],
        version: u64,
    ) -> Result<(), StoreError> {
        if records.is_empty() {
            return Ok(());
        }
        let dir = self.shared.root.join(kind.dir());
        let meta = manifest.meta_mut(kind);
        let needs_new = meta.segments.last().is_none_or(|s| s.len >= SEGMENT_LIMIT);
        if needs_new {
            meta.next_segment += 1;
            let name = format!("seg-{:06}.log", meta.next_segment);
            let mut f = File::create(dir.join(&name))?;
            f.write_all(SEGMENT_MAGIC)?;
            f.sync_all()?;
            meta.segments.push(SegmentMeta { name, len: SEGMENT_MAGIC.len() as u64 });
        }
        let seg = meta.segments.last_mut().expect("segment exists");
        let mut f = OpenOptions::new().write(true).open(dir.join(&seg.name))?;
        // drop any tail left by an interrupted batch
        f.set_len(seg.len)?;
        let mut buf = Vec::new();
        for r in records {
            let payload = serde_json::to_vec(r)?;
            buf.extend_from_slice(&(payload.len() as u32).to_le_bytes());
            buf.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
            buf.extend_from_slice(&payload);
        }
        use std::io::{Seek, SeekFrom};
        f.seek(SeekFrom::Start(seg.len))?;
        f.write_all(&buf)?;
        f.sync_all()?;
        seg.len += buf.len() as u64;
        meta.records += records.len() as u64;
        meta.last_write = version;
        Ok(())
    }

    /// Rewrites each store's committed records into a single fresh segment.
    /// Does not change the version.
    pub fn compact(&self) -> Result<(), StoreError> {
        if !self.is_open() {
            return Err(StoreError::Closed);
        }
        if self.shared.mode == OpenMode::Read {
            return Err(StoreError::ReadOnly);
        }
        let _guard = self.shared.writer.lock().unwrap_or_else(|p| p.into_inner());
        let (mut manifest, tweets, pairs, events) = {
            let st = self.read_state();
            (st.manifest.clone(), st.tweets.clone(), st.pairs.clone(), st.events.clone())
        };
        let old = manifest.clone();
        for kind in StoreKind::ALL {
            let meta = manifest.meta_mut(kind);
            meta.segments.clear();
            meta.records = 0;
        }
        let keep = |m: &mut Manifest, k: StoreKind| {
            let last = old.meta(k).last_write;
            m.meta_mut(k).last_write = last;
        };
        self.append_frames(&mut manifest, StoreKind::Tweets, &tweets, 0)?;
        keep(&mut manifest, StoreKind::Tweets);
        self.append_frames(&mut manifest, StoreKind::Pairs, &pairs, 0)?;
        keep(&mut manifest, StoreKind::Pairs);
        self.append_frames(&mut manifest, StoreKind::Events, &events, 0)?;
        keep(&mut manifest, StoreKind::Events);
        write_manifest(&self.shared.root, &manifest)?;
        for kind in StoreKind::ALL {
            let live: HashSet<&str> = manifest.meta(kind).segments.iter().map(|s| s.name.as_str()).collect();
            for seg in &old.meta(kind).segments {
                if !live.contains(seg.name.as_str()) {
                    let _ = fs::remove_file(self.shared.root.join(kind.dir()).join(&seg.name));
                }
            }
        }
        self.shared.state.write().unwrap_or_else(|p| p.into_inner()).manifest = manifest;
        Ok(())
    }

    fn read_state(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.shared.state.read().unwrap_or_else(|p| p.into_inner())
    }
}

/// Immutable view of the store at one version.
#[derive(Clone)]
pub struct Snapshot {
    version: u64,
    pairs_version: u64,
    tweets: Arc<Vec<TweetRecord>>,
    pairs: Arc<Vec<CnPair>>,
    events: Arc<Vec<ActivityEvent>>,
    open: Arc<AtomicBool>,
}

impl Snapshot {
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn pairs_version(&self) -> u64 {
        self.pairs_version
    }

    fn check(&self) -> Result<(), StoreError> {
        if self.open.load(Ordering::Acquire) {
            Ok(())
        } else {
            Err(StoreError::Closed)
        }
    }

    pub fn tweets(&self) -> Result<&[TweetRecord], StoreError> {
        self.check()?;
        Ok(&self.tweets)
    }

    pub fn pairs(&self) -> Result<&[CnPair], StoreError> {
        self.check()?;
        Ok(&self.pairs)
    }

    pub fn events(&self) -> Result<&[ActivityEvent], StoreError> {
        self.check()?;
        Ok(&self.events)
    }
}

fn triple_key(p: &CnPair) -> (String, String, String) {
    (p.language.clone(), p.hate_text.clone(), p.counter_text.clone())
}

fn read_manifest(path: &Path) -> Result<Manifest, StoreError> {
    let corrupt = |reason: String| StoreError::Corrupt { path: path.to_path_buf(), reason };
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || &bytes[..8] != MANIFEST_MAGIC {
        return Err(corrupt("bad manifest header".into()));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let crc = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    let body = bytes.get(16..16 + len).ok_or_else(|| corrupt("truncated manifest".into()))?;
    if crc32fast::hash(body) != crc {
        return Err(corrupt("manifest checksum mismatch".into()));
    }
    serde_json::from_slice(body).map_err(|e| corrupt(e.to_string()))
}

fn write_manifest(root: &Path, manifest: &Manifest) -> Result<(), StoreError> {
    let body = serde_json::to_vec(manifest)?;
    let mut bytes = Vec::with_capacity(body.len() + 16);
    bytes.extend_from_slice(MANIFEST_MAGIC);
    bytes.extend_from_slice(&(body.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
    bytes.extend_from_slice(&body);
    let tmp = root.join(format!("{MANIFEST_FILE}.tmp"));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, root.join(MANIFEST_FILE))?;
    if let Ok(dir) = File::open(root) {
        let _ = dir.sync_all();
    }
    Ok(())
}

fn load_records<T: DeserializeOwned>(root: &Path, kind: StoreKind, manifest: &Manifest) -> Result<Vec<T>, StoreError> {
    let mut out = Vec::new();
    for seg in &manifest.meta(kind).segments {
        let path = root.join(kind.dir()).join(&seg.name);
        let corrupt = |reason: String| StoreError::Corrupt { path: path.clone(), reason };
        let mut f = File::open(&path).map_err(|e| corrupt(e.to_string()))?;
        let mut bytes = Vec::with_capacity(seg.len as usize);
        (&mut f).take(seg.len).read_to_end(&mut bytes)?;
        if (bytes.len() as u64) < seg.len {
            return Err(corrupt(format!("segment shorter than committed length {}", seg.len)));
        }
        if bytes.len() < SEGMENT_MAGIC.len() || &bytes[..SEGMENT_MAGIC.len()] != SEGMENT_MAGIC {
            return Err(corrupt("bad segment header".into()));
        }
        let mut pos = SEGMENT_MAGIC.len();
        while pos < bytes.len() {
            if pos + 8 > bytes.len() {
                return Err(corrupt(format!("truncated frame header at {pos}")));
            }
            let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
            let crc = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap());
            let payload = bytes
                .get(pos + 8..pos + 8 + len)
                .ok_or_else(|| corrupt(format!("truncated frame at {pos}")))?;
            if crc32fast::hash(payload) != crc {
                return Err(corrupt(format!("checksum mismatch at {pos}")));
            }
            out.push(serde_json::from_slice(payload).map_err(|e| corrupt(e.to_string()))?);
            pos += 8 + len;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MessageKind, PairOrigin};
    use chrono::{TimeZone, Utc};

    fn tweet(id: &str) -> TweetRecord {
        TweetRecord {
            id: id.into(),
            created_at: Utc.with_ymd_and_hms(2018, 10, 1, 12, 0, 0).unwrap(),
            text: format!("text {id} #banislam"),
            lang: "en".into(),
            author: "u".into(),
            hashtags: vec!["banislam".into()],
            kind: MessageKind::Original,
            referenced_id: None,
            retweet_count: 0,
        }
    }

    fn pair(id: &str, hate: &str) -> CnPair {
        CnPair {
            id: id.into(),
            language: "en".into(),
            hate_text: hate.into(),
            counter_text: "counter".into(),
            origin: PairOrigin::Seed,
            created_at: Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap(),
        }
    }

    fn batch(ids: &[&str]) -> WriteBatch {
        WriteBatch { tweets: ids.iter().map(|i| tweet(i)).collect(), ..Default::default() }
    }

    #[test]
    fn fresh_store_is_empty_at_version_zero() {
        let dir = tempfile::tempdir().unwrap();
        let s = open_store(dir.path().join("s"), OpenMode::ReadWrite).unwrap();
        assert_eq!(s.version(), 0);
        let snap = s.snapshot();
        assert!(snap.tweets().unwrap().is_empty());
        assert!(snap.pairs().unwrap().is_empty());
        assert!(snap.events().unwrap().is_empty());
    }

    #[test]
    fn read_mode_requires_existing_store() {
        let dir = tempfile::tempdir().unwrap();
        let err = open_store(dir.path().join("missing"), OpenMode::Read).unwrap_err();
        assert!(matches!(err, StoreError::Open { .. }));
        let err = open_store(dir.path(), OpenMode::Read).unwrap_err();
        assert!(err.to_string().contains("MANIFEST"));
    }

    #[test]
    fn write_then_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let s = open_store(dir.path(), OpenMode::ReadWrite).unwrap();
        let out = s.commit(batch(&["1", "2"])).unwrap();
        assert_eq!(out.version, 1);
        drop(s);
        let s = open_store(dir.path(), OpenMode::Read).unwrap();
        assert_eq!(s.version(), 1);
        let ids: Vec<_> = s.snapshot().tweets().unwrap().iter().map(|t| t.id.clone()).collect();
        assert_eq!(ids, ["1", "2"]);
        assert!(matches!(s.commit(batch(&["3"])), Err(StoreError::ReadOnly)));
    }

    #[test]
    fn duplicate_ids_first_write_wins() {
        let dir = tempfile::tempdir().unwrap();
        let s = open_store(dir.path(), OpenMode::ReadWrite).unwrap();
        s.commit(batch(&["1"])).unwrap();
        let mut b = batch(&["1", "2", "2"]);
        b.tweets[0].text = "other".into();
        let out = s.commit(b).unwrap();
        assert_eq!(out.tweets_written, 1);
        assert_eq!(out.tweets_duplicate, 2);
        let snap = s.snapshot();
        assert_eq!(snap.tweets().unwrap().len(), 2);
        assert_eq!(snap.tweets().unwrap()[0].text, "text 1 #banislam");
        // nothing new: version unchanged
        assert_eq!(s.commit(batch(&["1"])).unwrap().version, 2);
        assert_eq!(s.version(), 2);
    }

    #[test]
    fn snapshot_isolation() {
        let dir = tempfile::tempdir().unwrap();
        let s = open_store(dir.path(), OpenMode::ReadWrite).unwrap();
        s.commit(batch(&["a"])).unwrap();
        let before = s.snapshot();
        let ids: Vec<String> = (0..10).map(|i| i.to_string()).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        s.commit(batch(&refs)).unwrap();
        assert_eq!(before.tweets().unwrap().len(), 1);
        assert_eq!(s.snapshot().tweets().unwrap().len(), 11);
        let a = s.snapshot();
        let b = s.snapshot();
        assert_eq!(a.tweets().unwrap(), b.tweets().unwrap());
        assert_eq!(a.version(), b.version());
    }

    #[test]
    fn snapshot_after_close_errors() {
        let dir = tempfile::tempdir().unwrap();
        let s = open_store(dir.path(), OpenMode::ReadWrite).unwrap();
        let snap = s.snapshot();
        s.close();
        assert!(matches!(snap.tweets(), Err(StoreError::Closed)));
        assert!(matches!(s.commit(batch(&["x"])), Err(StoreError::Closed)));
    }

    #[test]
    fn interrupted_batch_is_invisible_after_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let s = open_store(dir.path(), OpenMode::ReadWrite).unwrap();
        s.commit(batch(&["1", "2"])).unwrap();
        assert!(s.commit_with_crash(batch(&["3", "4"]), CrashPoint::AfterSegments).is_err());
        drop(s);
        let s = open_store(dir.path(), OpenMode::ReadWrite).unwrap();
        assert_eq!(s.version(), 1);
        assert_eq!(s.snapshot().tweets().unwrap().len(), 2);
        // the stale tail is overwritten by the next batch
        s.commit(batch(&["5"])).unwrap();
        drop(s);
        let s = open_store(dir.path(), OpenMode::Read).unwrap();
        let ids: Vec<_> = s.snapshot().tweets().unwrap().iter().map(|t| t.id.clone()).collect();
        assert_eq!(ids, ["1", "2", "5"]);
    }

    #[test]
    fn torn_frame_past_commit_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let s = open_store(dir.path(), OpenMode::ReadWrite).unwrap();
        s.commit(batch(&["1"])).unwrap();
        drop(s);
        let seg = dir.path().join("tweets/seg-000001.log");
        let mut f = OpenOptions::new().append(true).open(&seg).unwrap();
        f.write_all(&[200, 0, 0, 0, 1, 2]).unwrap();
        let s = open_store(dir.path(), OpenMode::Read).unwrap();
        assert_eq!(s.snapshot().tweets().unwrap().len(), 1);
    }

    #[test]
    fn corrupted_committed_frame_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let s = open_store(dir.path(), OpenMode::ReadWrite).unwrap();
        s.commit(batch(&["1"])).unwrap();
        drop(s);
        let seg = dir.path().join("tweets/seg-000001.log");
        let mut bytes = fs::read(&seg).unwrap();
        let last = bytes.len() - 3;
        bytes[last] ^= 0xff;
        fs::write(&seg, bytes).unwrap();
        let err = open_store(dir.path(), OpenMode::Read).unwrap_err();
        assert!(matches!(err, StoreError::Corrupt { .. }), "{err}");
    }

    #[test]
    fn duplicate_pair_triple_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let s = open_store(dir.path(), OpenMode::ReadWrite).unwrap();
        s.commit(WriteBatch { pairs: vec![pair("p1", "hate")], ..Default::default() }).unwrap();
        let err = s.commit(WriteBatch { pairs: vec![pair("p2", "hate")], ..Default::default() }).unwrap_err();
        assert!(matches!(err, StoreError::DuplicatePair { .. }));
        assert_eq!(s.pairs_version(), 1);
    }

    #[test]
    fn compaction_preserves_contents() {
        let dir = tempfile::tempdir().unwrap();
        let s = open_store(dir.path(), OpenMode::ReadWrite).unwrap();
        for i in 0..5 {
            s.commit(batch(&[&i.to_string()])).unwrap();
        }
        s.commit(WriteBatch { pairs: vec![pair("p1", "hate")], ..Default::default() }).unwrap();
        s.compact().unwrap();
        assert_eq!(s.version(), 6);
        s.commit(batch(&["9"])).unwrap();
        drop(s);
        let s = open_store(dir.path(), OpenMode::Read).unwrap();
        assert_eq!(s.version(), 7);
        assert_eq!(s.pairs_version(), 6);
        assert_eq!(s.snapshot().tweets().unwrap().len(), 6);
        assert_eq!(s.snapshot().pairs().unwrap().len(), 1);
    }
}
