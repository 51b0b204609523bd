//! The OSS signature database: commit-incremental signature generation,
//! de-overlap segmentation, nearest-neighbor indexes, and the binary
//! import/export formats.

pub mod index;
pub mod store;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ingest::{extract_source_functions, FunctionId};
use crate::signatures::{
    embed_plain, embedding_distance, tlsh_digest, tlsh_distance, tokenize, EmbeddingVector,
    ModelRef, ModelWeights, SignatureError, TlshDigest,
};

pub use index::{NnIndex, Neighbor, SearchMode};

/// Database failures.
#[derive(Debug, thiserror::Error)]
pub enum DbError {
    #[error("db file: {0}")]
    Format(String),

    #[error("project {project}: commit index {index} is not strictly increasing")]
    CommitOrder { project: String, index: u64 },

    #[error("unknown project: {0}")]
    UnknownProject(String),

    #[error(transparent)]
    Signature(#[from] SignatureError),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One commit of one project: the full file map at that commit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommitSnapshot {
    pub project: String,
    pub commit_index: u64,
    pub timestamp: u64,
    pub files: BTreeMap<String, String>,
}

/// Origin of a record: where and when the function was first seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirstSeen {
    pub project: u32,
    pub commit_index: u64,
    pub timestamp: u64,
}

/// One signature record of the segmented database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureRecord {
    pub fid: FunctionId,
    pub project: u32,
    pub tlsh: Option<TlshDigest>,
    pub embedding: EmbeddingVector,
    pub loc: u32,
    pub similar_project_count: u32,
    pub first_seen: FirstSeen,
    pub tombstoned: bool,
}

/// Per-project metadata; `record_count` is the published |DB_k|.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectMeta {
    pub name: String,
    pub record_count: u64,
}

/// Function symbols and call edges the client-side filters need.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolTable {
    /// fid -> projects defining it (live functions, before segmentation).
    pub defs: BTreeMap<FunctionId, BTreeSet<u32>>,
    /// per-project direct call edges.
    pub edges: BTreeMap<u32, BTreeSet<(FunctionId, FunctionId)>>,
}

impl SymbolTable {
    /// Projects containing a function with this name.
    pub fn projects_with_name(&self, name: &str) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for (fid, projects) in &self.defs {
            if fid.name == name {
                out.extend(projects.iter().copied());
            }
        }
        out
    }
}

/// The segmented signature database.
#[derive(Debug, Clone)]
pub struct SegmentedDb {
    pub projects: Vec<ProjectMeta>,
    pub records: Vec<SignatureRecord>,
    pub symbols: SymbolTable,
    pub model_ref: ModelRef,
    /// Server audience only; never present in client exports.
    pub model: Option<ModelWeights>,
}

impl PartialEq for SegmentedDb {
    fn eq(&self, other: &Self) -> bool {
        self.projects == other.projects
            && self.records == other.records
            && self.symbols == other.symbols
            && self.model_ref == other.model_ref
            && self.model.as_ref().map(|m| m.projection())
                == other.model.as_ref().map(|m| m.projection())
    }
}

impl SegmentedDb {
    pub fn project_index(&self, name: &str) -> Option<u32> {
        self.projects
            .binary_search_by(|p| p.name.as_str().cmp(name))
            .ok()
            .map(|i| i as u32)
    }

    pub fn project_name(&self, idx: u32) -> &str {
        &self.projects[idx as usize].name
    }

    /// Records that participate in matching.
    pub fn live_records(&self) -> impl Iterator<Item = (usize, &SignatureRecord)> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.tombstoned)
    }

    pub fn record_count(&self, project: u32) -> u64 {
        self.projects[project as usize].record_count
    }
}

/// Raw (pre-segmentation) per-function state.
#[derive(Debug, Clone)]
struct RawRecord {
    fid: FunctionId,
    tlsh: Option<TlshDigest>,
    embedding: EmbeddingVector,
    loc: u32,
    first_seen: (u64, u64),
    norm_hash: u64,
    callees: BTreeSet<FunctionId>,
    tombstoned: bool,
    similar_project_count: u32,
}

#[derive(Debug, Default)]
struct RawProject {
    records: BTreeMap<FunctionId, RawRecord>,
    /// live fids per file, for tombstone detection
    file_functions: BTreeMap<String, BTreeSet<FunctionId>>,
    file_hashes: BTreeMap<String, u64>,
    last_commit: Option<u64>,
    edges: BTreeSet<(FunctionId, FunctionId)>,
}

/// Work counters; the incremental tests assert on these.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct BuildCounters {
    pub files_analyzed: u64,
    pub functions_signed: u64,
}

fn content_hash(text: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in text.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Incremental database builder: feed ordered commit snapshots, then
/// segment.
pub struct DbBuilder {
    model: ModelWeights,
    projects: BTreeMap<String, RawProject>,
    counters: BuildCounters,
    pub diagnostics: Vec<String>,
}

impl DbBuilder {
    pub fn new(model: ModelWeights) -> DbBuilder {
        DbBuilder {
            model,
            projects: BTreeMap::new(),
            counters: BuildCounters::default(),
            diagnostics: Vec::new(),
        }
    }

    pub fn counters(&self) -> BuildCounters {
        self.counters
    }

    pub fn model(&self) -> &ModelWeights {
        &self.model
    }

    /// Analyze one commit. Only files whose bytes changed since the previous
    /// commit are re-analyzed; unparseable files are skipped with a
    /// diagnostic.
    pub fn ingest_snapshot(&mut self, snap: &CommitSnapshot) -> Result<(), DbError> {
        let project = self.projects.entry(snap.project.clone()).or_default();
        if let Some(last) = project.last_commit {
            if snap.commit_index <= last {
                return Err(DbError::CommitOrder {
                    project: snap.project.clone(),
                    index: snap.commit_index,
                });
            }
        }
        project.last_commit = Some(snap.commit_index);

        // removed files take their functions with them
        let removed: Vec<String> = project
            .file_hashes
            .keys()
            .filter(|f| !snap.files.contains_key(*f))
            .cloned()
            .collect();
        for file in removed {
            project.file_hashes.remove(&file);
            project.file_functions.remove(&file);
        }

        for (path, text) in &snap.files {
            let hash = content_hash(text);
            if project.file_hashes.get(path) == Some(&hash) {
                continue; // unchanged since last commit
            }
            project.file_hashes.insert(path.clone(), hash);
            self.counters.files_analyzed += 1;

            let functions = match extract_source_functions(text, path) {
                Ok(f) => f,
                Err(e) => {
                    self.diagnostics.push(e.to_string());
                    project.file_functions.insert(path.clone(), BTreeSet::new());
                    continue;
                }
            };
            let mut live = BTreeSet::new();
            for f in &functions {
                let norm = f.normalized_body();
                let norm_hash = content_hash(&norm);
                live.insert(f.id.clone());
                if let Some(existing) = project.records.get(&f.id) {
                    if existing.norm_hash == norm_hash && !existing.tombstoned {
                        continue; // unchanged function in a changed file
                    }
                }
                let tokens = tokenize(&norm);
                let embedding = match embed_plain(&tokens, &self.model) {
                    Ok(e) => e,
                    Err(e) => {
                        self.diagnostics
                            .push(format!("{}: {}: {e}; function skipped", path, f.id));
                        live.remove(&f.id);
                        continue;
                    }
                };
                self.counters.functions_signed += 1;
                let tlsh = tlsh_digest(norm.as_bytes()).ok();
                match project.records.get_mut(&f.id) {
                    Some(existing) => {
                        // changed body: latest wins, first_seen preserved
                        existing.tlsh = tlsh;
                        existing.embedding = embedding;
                        existing.loc = f.loc;
                        existing.norm_hash = norm_hash;
                        existing.callees = f.callees.clone();
                        existing.tombstoned = false;
                    }
                    None => {
                        project.records.insert(
                            f.id.clone(),
                            RawRecord {
                                fid: f.id.clone(),
                                tlsh,
                                embedding,
                                loc: f.loc,
                                first_seen: (snap.commit_index, snap.timestamp),
                                norm_hash,
                                callees: f.callees.clone(),
                                tombstoned: false,
                                similar_project_count: 1,
                            },
                        );
                    }
                }
            }
            project.file_functions.insert(path.clone(), live);
        }

        // ids no longer defined by any file are tombstoned
        let defined: BTreeSet<FunctionId> = project
            .file_functions
            .values()
            .flat_map(|s| s.iter().cloned())
            .collect();
        for (fid, rec) in project.records.iter_mut() {
            rec.tombstoned = !defined.contains(fid);
        }

        // call edges over the live function set
        project.edges = resolve_edges(project.records.values().filter(|r| !r.tombstoned));
        Ok(())
    }

    /// Segment into non-overlapping per-project sets.
    pub fn segment(self, delta: u32, rho: f64) -> SegmentedDb {
        segment_database(self, delta, rho)
    }
}

fn resolve_edges<'a>(
    records: impl Iterator<Item = &'a RawRecord>,
) -> BTreeSet<(FunctionId, FunctionId)> {
    let records: Vec<&RawRecord> = records.collect();
    let mut by_name: BTreeMap<&str, Vec<&FunctionId>> = BTreeMap::new();
    for r in &records {
        by_name.entry(r.fid.name.as_str()).or_default().push(&r.fid);
    }
    let mut edges = BTreeSet::new();
    for r in &records {
        for callee in &r.callees {
            if let Some(cands) = by_name.get(callee.name.as_str()) {
                for c in cands {
                    if callee.scope.is_empty() || c.scope.ends_with(&callee.scope) {
                        edges.insert((r.fid.clone(), (*c).clone()));
                    }
                }
            }
        }
    }
    edges
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let root = self.find(self.0[i]);
            self.0[i] = root;
        }
        self.0[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// De-overlap: similarity groups (TLSH distance < delta or embedding
/// distance < rho, transitively closed) are attributed to the project with
/// the earliest first_seen timestamp, ties by project name. Surviving
/// records carry the group's distinct-project count as
/// `similar_project_count`.
fn segment_database(builder: DbBuilder, delta: u32, rho: f64) -> SegmentedDb {
    let DbBuilder {
        model, projects, ..
    } = builder;

    let project_names: Vec<String> = projects.keys().cloned().collect();
    let project_idx: BTreeMap<&str, u32> = project_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i as u32))
        .collect();

    // flatten live records; tombstones ride along separately
    let mut live: Vec<(u32, RawRecord)> = Vec::new();
    let mut tombstones: Vec<(u32, RawRecord)> = Vec::new();
    for (name, proj) in &projects {
        let pi = project_idx[name.as_str()];
        for rec in proj.records.values() {
            if rec.tombstoned {
                tombstones.push((pi, rec.clone()));
            } else {
                live.push((pi, rec.clone()));
            }
        }
    }

    let mut uf = UnionFind::new(live.len());
    for i in 0..live.len() {
        for j in i + 1..live.len() {
            let (a, b) = (&live[i], &live[j]);
            let tlsh_close = match (&a.1.tlsh, &b.1.tlsh) {
                (Some(x), Some(y)) => tlsh_distance(x, y) < delta,
                _ => false,
            };
            let close = tlsh_close
                || embedding_distance(&a.1.embedding, &b.1.embedding)
                    .map(|d| d < rho)
                    .unwrap_or(false);
            if close {
                uf.union(i, j);
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..live.len() {
        let root = uf.find(i);
        groups.entry(root).or_default().push(i);
    }

    let mut survivors: Vec<SignatureRecord> = Vec::new();
    for members in groups.values() {
        let owner = members
            .iter()
            .map(|i| {
                let (pi, rec) = &live[*i];
                (rec.first_seen.1, project_names[*pi as usize].as_str(), *pi)
            })
            .min()
            .map(|(_, _, pi)| pi)
            .unwrap();
        let distinct: BTreeSet<u32> = members.iter().map(|i| live[*i].0).collect();
        let max_carried = members
            .iter()
            .map(|i| live[*i].1.similar_project_count)
            .max()
            .unwrap_or(1);
        let n = max_carried.max(distinct.len() as u32);
        for i in members {
            let (pi, rec) = &live[*i];
            if *pi != owner {
                continue;
            }
            survivors.push(SignatureRecord {
                fid: rec.fid.clone(),
                project: *pi,
                tlsh: rec.tlsh,
                embedding: rec.embedding.clone(),
                loc: rec.loc,
                similar_project_count: n,
                first_seen: FirstSeen {
                    project: *pi,
                    commit_index: rec.first_seen.0,
                    timestamp: rec.first_seen.1,
                },
                tombstoned: false,
            });
        }
    }
    for (pi, rec) in tombstones {
        survivors.push(SignatureRecord {
            fid: rec.fid.clone(),
            project: pi,
            tlsh: rec.tlsh,
            embedding: rec.embedding.clone(),
            loc: rec.loc,
            similar_project_count: rec.similar_project_count,
            first_seen: FirstSeen {
                project: pi,
                commit_index: rec.first_seen.0,
                timestamp: rec.first_seen.1,
            },
            tombstoned: true,
        });
    }
    survivors.sort_by(|a, b| {
        (a.project, &a.fid, a.tombstoned).cmp(&(b.project, &b.fid, b.tombstoned))
    });

    let mut metas: Vec<ProjectMeta> = project_names
        .iter()
        .map(|n| ProjectMeta {
            name: n.clone(),
            record_count: 0,
        })
        .collect();
    for r in &survivors {
        if !r.tombstoned {
            metas[r.project as usize].record_count += 1;
        }
    }

    // symbol table over live (pre-segmentation) definitions
    let mut symbols = SymbolTable::default();
    for (name, proj) in &projects {
        let pi = project_idx[name.as_str()];
        for rec in proj.records.values().filter(|r| !r.tombstoned) {
            symbols.defs.entry(rec.fid.clone()).or_default().insert(pi);
        }
        if !proj.edges.is_empty() {
            symbols.edges.insert(pi, proj.edges.clone());
        }
    }

    SegmentedDb {
        projects: metas,
        records: survivors,
        symbols,
        model_ref: model.model_ref(),
        model: Some(model),
    }
}

/// Re-run segmentation over an already-segmented database (the symbol table
/// is preserved verbatim).
pub fn resegment(db: &SegmentedDb, delta: u32, rho: f64) -> SegmentedDb {
    let mut builder = DbBuilder::new(db.model.clone().expect("resegment needs a server db"));
    for meta in &db.projects {
        builder.projects.insert(meta.name.clone(), RawProject::default());
    }
    for r in &db.records {
        let name = db.project_name(r.project).to_string();
        let proj = builder.projects.get_mut(&name).unwrap();
        proj.records.insert(
            r.fid.clone(),
            RawRecord {
                fid: r.fid.clone(),
                tlsh: r.tlsh,
                embedding: r.embedding.clone(),
                loc: r.loc,
                first_seen: (r.first_seen.commit_index, r.first_seen.timestamp),
                norm_hash: 0,
                callees: BTreeSet::new(),
                tombstoned: r.tombstoned,
                similar_project_count: r.similar_project_count,
            },
        );
    }
    let mut out = builder.segment(delta, rho);
    out.symbols = db.symbols.clone();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signatures::Activation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_model() -> ModelWeights {
        ModelWeights::generate(42, Activation::Identity)
    }

    fn gen_function(rng: &mut ChaCha8Rng, name: &str, stmts: usize) -> String {
        let body: Vec<String> = (0..stmts)
            .map(|s| {
                format!(
                    "acc = acc * {} + field_{}[{}];",
                    rng.gen_range(2..97),
                    rng.gen_range(0..40),
                    s
                )
            })
            .collect();
        format!("int {name}(int acc) {{ {} return acc; }}\n", body.join(" "))
    }

    fn snapshot(
        project: &str,
        commit: u64,
        ts: u64,
        files: &[(&str, String)],
    ) -> CommitSnapshot {
        CommitSnapshot {
            project: project.into(),
            commit_index: commit,
            timestamp: ts,
            files: files
                .iter()
                .map(|(p, t)| (p.to_string(), t.clone()))
                .collect(),
        }
    }

    #[test]
    fn unchanged_files_are_not_reanalyzed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f1 = gen_function(&mut rng, "alpha_fn", 8);
        let f2 = gen_function(&mut rng, "beta_fn", 8);
        let f2b = gen_function(&mut rng, "beta_fn", 9);

        let mut b = DbBuilder::new(test_model());
        b.ingest_snapshot(&snapshot(
            "proj",
            1,
            100,
            &[("a.cc", f1.clone()), ("b.cc", f2)],
        ))
        .unwrap();
        let after_first = b.counters();
        assert_eq!(after_first.files_analyzed, 2);
        assert_eq!(after_first.functions_signed, 2);

        b.ingest_snapshot(&snapshot("proj", 2, 200, &[("a.cc", f1), ("b.cc", f2b)]))
            .unwrap();
        let after_second = b.counters();
        // only b.cc re-analyzed, only its function re-signed
        assert_eq!(after_second.files_analyzed, 3);
        assert_eq!(after_second.functions_signed, 3);
    }

    #[test]
    fn rename_tombstones_old_id() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let old = gen_function(&mut rng, "old_name_fn", 8);
        let new = old.replace("old_name_fn", "new_name_fn");

        let mut b = DbBuilder::new(test_model());
        b.ingest_snapshot(&snapshot("proj", 1, 10, &[("a.cc", old)])).unwrap();
        b.ingest_snapshot(&snapshot("proj", 2, 20, &[("a.cc", new)])).unwrap();
        let db = b.segment(30, 0.35);
        let live: Vec<&SignatureRecord> = db.live_records().map(|(_, r)| r).collect();
        assert_eq!(live.len(), 1);
        assert_eq!(live[0].fid.name, "new_name_fn");
        let tomb: Vec<&SignatureRecord> =
            db.records.iter().filter(|r| r.tombstoned).collect();
        assert_eq!(tomb.len(), 1);
        assert_eq!(tomb[0].fid.name, "old_name_fn");
    }

    #[test]
    fn commit_order_enforced() {
        let mut b = DbBuilder::new(test_model());
        b.ingest_snapshot(&snapshot("p", 5, 1, &[])).unwrap();
        assert!(matches!(
            b.ingest_snapshot(&snapshot("p", 5, 2, &[])),
            Err(DbError::CommitOrder { .. })
        ));
    }

    #[test]
    fn incremental_equals_batch_rebuild() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f1 = gen_function(&mut rng, "first_fn", 10);
        let f2 = gen_function(&mut rng, "second_fn", 10);
        let f2b = gen_function(&mut rng, "second_fn", 12);
        let f3 = gen_function(&mut rng, "third_fn", 10);

        // three commits: add two, change one + add one, delete one
        let mut inc = DbBuilder::new(test_model());
        inc.ingest_snapshot(&snapshot("p", 1, 10, &[("a.cc", f1.clone()), ("b.cc", f2)]))
            .unwrap();
        inc.ingest_snapshot(&snapshot(
            "p",
            2,
            20,
            &[("a.cc", f1.clone()), ("b.cc", f2b.clone()), ("c.cc", f3.clone())],
        ))
        .unwrap();
        inc.ingest_snapshot(&snapshot("p", 3, 30, &[("b.cc", f2b.clone()), ("c.cc", f3.clone())]))
            .unwrap();
        let inc_db = inc.segment(30, 0.35);

        let mut full = DbBuilder::new(test_model());
        full.ingest_snapshot(&snapshot("p", 3, 30, &[("b.cc", f2b), ("c.cc", f3)]))
            .unwrap();
        let full_db = full.segment(30, 0.35);

        let strip = |db: &SegmentedDb| -> Vec<(FunctionId, u32, Option<TlshDigest>, Vec<f32>, u32, u32)> {
            db.live_records()
                .map(|(_, r)| {
                    (
                        r.fid.clone(),
                        r.project,
                        r.tlsh,
                        r.embedding.values().to_vec(),
                        r.loc,
                        r.similar_project_count,
                    )
                })
                .collect()
        };
        assert_eq!(strip(&inc_db), strip(&full_db));
    }

    #[test]
    fn segmentation_earliest_owner_and_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shared = gen_function(&mut rng, "shared_helper_fn", 10);
        let a_own = gen_function(&mut rng, "a_private_fn", 10);
        let b_own = gen_function(&mut rng, "b_private_fn", 10);

        let mut b = DbBuilder::new(test_model());
        // A saw the helper at t=10, B copied it at t=20
        b.ingest_snapshot(&snapshot(
            "projA",
            1,
            10,
            &[("a.cc", format!("{shared}{a_own}"))],
        ))
        .unwrap();
        b.ingest_snapshot(&snapshot(
            "projB",
            1,
            20,
            &[("b.cc", format!("{shared}{b_own}"))],
        ))
        .unwrap();
        let db = b.segment(30, 0.35);

        let a = db.project_index("projA").unwrap();
        let bidx = db.project_index("projB").unwrap();
        assert_eq!(db.record_count(a), 2);
        assert_eq!(db.record_count(bidx), 1);
        let helper = db
            .live_records()
            .find(|(_, r)| r.fid.name == "shared_helper_fn")
            .map(|(_, r)| r)
            .unwrap();
        assert_eq!(helper.project, a);
        assert_eq!(helper.similar_project_count, 2);
        let unique = db
            .live_records()
            .find(|(_, r)| r.fid.name == "a_private_fn")
            .map(|(_, r)| r)
            .unwrap();
        assert_eq!(unique.similar_project_count, 1);
    }

    #[test]
    fn five_project_shared_helper_ownership() {
        // hand-worked fixture: helper first seen by p2 (t=5); p0,p1,p3,p4
        // copy it later. Expected: p2 owns the helper with N=5, everyone
        // keeps their private function.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let helper = gen_function(&mut rng, "common_strtab_lookup", 12);
        let mut b = DbBuilder::new(test_model());
        let times = [50u64, 40, 5, 60, 70];
        for (i, t) in times.iter().enumerate() {
            let own = gen_function(&mut rng, &format!("private_{i}_fn"), 10);
            b.ingest_snapshot(&snapshot(
                &format!("p{i}"),
                1,
                *t,
                &[("f.cc", format!("{helper}{own}"))],
            ))
            .unwrap();
        }
        let db = b.segment(30, 0.35);
        let owner = db.project_index("p2").unwrap();
        let helper_rec = db
            .live_records()
            .find(|(_, r)| r.fid.name == "common_strtab_lookup")
            .map(|(_, r)| r)
            .unwrap();
        assert_eq!(helper_rec.project, owner);
        assert_eq!(helper_rec.similar_project_count, 5);
        for i in 0..5 {
            let pi = db.project_index(&format!("p{i}")).unwrap();
            assert_eq!(db.record_count(pi), if i == 2 { 2 } else { 1 });
        }
        // disjointness: no two live records of different projects are close
        let live: Vec<&SignatureRecord> = db.live_records().map(|(_, r)| r).collect();
        for x in &live {
            for y in &live {
                if x.project != y.project {
                    if let (Some(a), Some(bb)) = (&x.tlsh, &y.tlsh) {
                        assert!(tlsh_distance(a, bb) >= 30);
                    }
                    assert!(embedding_distance(&x.embedding, &y.embedding).unwrap() >= 0.35);
                }
            }
        }
    }

    #[test]
    fn segmentation_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = test_model();
        for case in 0..1000 {
            let mut b = DbBuilder::new(model.clone());
            let shared: Vec<String> = (0..rng.gen_range(1..3))
                .map(|i| gen_function(&mut rng, &format!("case{case}_shared_{i}"), 8))
                .collect();
            for p in 0..rng.gen_range(2..4usize) {
                let mut text = String::new();
                for s in &shared {
                    if rng.gen_bool(0.6) {
                        text.push_str(s);
                    }
                }
                text.push_str(&gen_function(&mut rng, &format!("case{case}_p{p}_own"), 8));
                b.ingest_snapshot(&snapshot(
                    &format!("p{p}"),
                    1,
                    rng.gen_range(1..1000),
                    &[("f.cc", text)],
                ))
                .unwrap();
            }
            let db = b.segment(30, 0.35);
            let again = resegment(&db, 30, 0.35);
            assert_eq!(db, again, "case {case} not idempotent");
        }
    }
}
