//! Triple stores, TSV ingestion, filter indexes and the FAMILY generator.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TRAIN_FILE: &str = "train.txt";
pub const VALID_FILE: &str = "valid.txt";
pub const TEST_FILE: &str = "test.txt";

/// An id-mapped `(head, relation, tail)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

impl Triple {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

/// Bidirectional name ↔ dense id map in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut dict = Self::new();
        for name in names {
            let name = name.into();
            if dict.id(&name).is_some() {
                return Err(Error::domain(format!("duplicate dictionary entry `{name}`")));
            }
            dict.get_or_insert(&name);
        }
        Ok(dict)
    }

    pub fn get_or_insert(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Hex SHA-256 of the names in id order, newline separated.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for name in &self.names {
            hasher.update(name.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => TRAIN_FILE,
            Split::Valid => VALID_FILE,
            Split::Test => TEST_FILE,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::domain(format!(
                "unknown split `{other}` (expected train, valid or test)"
            ))),
        }
    }
}

/// Which side of a triple is being predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Head,
    Tail,
}

/// Known true answers for `(h, r, ?)` and `(?, r, t)` over all splits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterIndex {
    tails: HashMap<(u32, u32), Vec<u32>>,
    heads: HashMap<(u32, u32), Vec<u32>>,
}

impl FilterIndex {
    pub fn build<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut index = Self::default();
        for t in triples {
            index.tails.entry((t.head, t.relation)).or_default().push(t.tail);
            index.heads.entry((t.relation, t.tail)).or_default().push(t.head);
        }
        for list in index.tails.values_mut().chain(index.heads.values_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        index
    }

    /// All known answers for the query obtained by hiding `side` of `triple`,
    /// sorted, including the triple's own answer.
    pub fn known_answers(&self, triple: &Triple, side: Side) -> &[u32] {
        let list = match side {
            Side::Tail => self.tails.get(&(triple.head, triple.relation)),
            Side::Head => self.heads.get(&(triple.relation, triple.tail)),
        };
        list.map(Vec::as_slice).unwrap_or(&[])
    }

    /// Entities to exclude when ranking `triple`'s answer on `side`: every
    /// known answer except the triple's own.
    pub fn filtered_candidates(&self, triple: &Triple, side: Side) -> Vec<u32> {
        let own = match side {
            Side::Tail => triple.tail,
            Side::Head => triple.head,
        };
        self.known_answers(triple, side)
            .iter()
            .copied()
            .filter(|&e| e != own)
            .collect()
    }
}

/// Dictionaries, splits and the filter index of one knowledge graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleStore {
    entities: Dictionary,
    relations: Dictionary,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
    filter: FilterIndex,
}

pub type NamedTriple = (String, String, String);

impl TripleStore {
    /// Builds dictionaries over train ∪ valid ∪ test, in that order of first appearance.
    pub fn from_named(train: &[NamedTriple], valid: &[NamedTriple], test: &[NamedTriple]) -> Self {
        let mut entities = Dictionary::new();
        let mut relations = Dictionary::new();
        let mut map = |split: &[NamedTriple]| -> Vec<Triple> {
            split
                .iter()
                .map(|(h, r, t)| {
                    let head = entities.get_or_insert(h);
                    let relation = relations.get_or_insert(r);
                    let tail = entities.get_or_insert(t);
                    Triple::new(head, relation, tail)
                })
                .collect()
        };
        let train = map(train);
        let valid = map(valid);
        let test = map(test);
        Self::from_parts(entities, relations, train, valid, test).expect("ids are dense by construction")
    }

    pub fn from_parts(
        entities: Dictionary,
        relations: Dictionary,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        for t in train.iter().chain(&valid).chain(&test) {
            if t.head as usize >= entities.len()
                || t.tail as usize >= entities.len()
                || t.relation as usize >= relations.len()
            {
                return Err(Error::domain(format!("triple {t:?} has ids outside the dictionaries")));
            }
        }
        let filter = FilterIndex::build(train.iter().chain(&valid).chain(&test));
        Ok(Self {
            entities,
            relations,
            train,
            valid,
            test,
            filter,
        })
    }

    pub fn entities(&self) -> &Dictionary {
        &self.entities
    }

    pub fn relations(&self) -> &Dictionary {
        &self.relations
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    pub fn filter(&self) -> &FilterIndex {
        &self.filter
    }

    pub fn filtered_candidates(&self, triple: &Triple, side: Side) -> Vec<u32> {
        self.filter.filtered_candidates(triple, side)
    }

    /// Whether the triple occurs in any split.
    pub fn contains(&self, triple: &Triple) -> bool {
        self.filter
            .known_answers(triple, Side::Tail)
            .binary_search(&triple.tail)
            .is_ok()
    }

    pub fn relation_id(&self, name: &str) -> Result<u32> {
        self.relations
            .id(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_owned()))
    }

    pub fn named(&self, t: &Triple) -> (&str, &str, &str) {
        (
            self.entities.name(t.head).unwrap_or("?"),
            self.relations.name(t.relation).unwrap_or("?"),
            self.entities.name(t.tail).unwrap_or("?"),
        )
    }

    /// Reads `train.txt`, `valid.txt` and `test.txt` from `dir`.
    pub fn load_tsv(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
            ));
        }
        let train = read_split(&dir.join(TRAIN_FILE))?;
        let valid = read_split(&dir.join(VALID_FILE))?;
        let test = read_split(&dir.join(TEST_FILE))?;
        Ok(Self::from_named(&train, &valid, &test))
    }

    /// Writes the three splits as `head<TAB>relation<TAB>tail` lines.
    pub fn write_tsv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for split in [Split::Train, Split::Valid, Split::Test] {
            let mut out = String::new();
            for t in self.split(split) {
                let (h, r, tl) = self.named(t);
                out.push_str(h);
                out.push('\t');
                out.push_str(r);
                out.push('\t');
                out.push_str(tl);
                out.push('\n');
            }
            let path = dir.join(split.file_name());
            fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn read_split(path: &Path) -> Result<Vec<NamedTriple>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut triples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: format!(
                    "expected head<TAB>relation<TAB>tail, found {} field(s)",
                    fields.len()
                ),
            });
        }
        triples.push((fields[0].to_owned(), fields[1].to_owned(), fields[2].to_owned()));
    }
    Ok(triples)
}

pub const SPOUSE: &str = "spouse";
pub const CHILD: &str = "child";
pub const PARENT: &str = "parent";
pub const SIBLING: &str = "sibling";
pub const PARENT_IN_LAW: &str = "parent_in_law";
pub const CHILD_IN_LAW: &str = "child_in_law";

/// Relation vocabulary of FAMILY.
pub const FAMILY_RELATIONS: [&str; 6] = [SPOUSE, CHILD, PARENT, SIBLING, PARENT_IN_LAW, CHILD_IN_LAW];

/// Fraction of generation-2 people who get married.
const GEN2_MARRIED_FRACTION: f64 = 0.5;

/// Parameters of the synthetic two-generation kinship graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub people_per_generation: usize,
    pub seed: u64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            people_per_generation: 200,
            seed: 0,
        }
    }
}

/// Generated FAMILY graph before splitting, with summary counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyProvenance {
    pub generator: String,
    pub spec: FamilySpec,
    pub gen1_couples: usize,
    pub gen2_couples: usize,
    pub triples: usize,
    pub relation_counts: Vec<(String, usize)>,
    pub splits: [usize; 3],
}

#[derive(Debug, Clone)]
struct Person {
    name: String,
    male: bool,
    /// Index of the generation-1 couple this person descends from.
    family: Option<usize>,
}

/// Generates FAMILY and splits it 90/5/5 with a seeded shuffle.
pub fn generate_family(spec: &FamilySpec) -> Result<(TripleStore, FamilyProvenance)> {
    let n = spec.people_per_generation;
    if n < 2 || n % 2 != 0 {
        return Err(Error::domain(format!(
            "people_per_generation must be a positive even number, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half = n / 2;

    let mut people: Vec<Person> = Vec::with_capacity(2 * n);
    for i in 0..half {
        people.push(Person { name: format!("g1_m{i}"), male: true, family: None });
    }
    for i in 0..half {
        people.push(Person { name: format!("g1_f{i}"), male: false, family: None });
    }
    let mut females: Vec<usize> = (half..n).collect();
    females.shuffle(&mut rng);
    let gen1_couples: Vec<(usize, usize)> = (0..half).zip(females).collect();

    // generation 2: half male, half female, grouped under the gen-1 couples
    let mut children_per_couple: Vec<usize> = (0..half).map(|_| rng.random_range(1..=3)).collect();
    let mut total: usize = children_per_couple.iter().sum();
    while total != n {
        let c = rng.random_range(0..half);
        if total > n && children_per_couple[c] > 1 {
            children_per_couple[c] -= 1;
            total -= 1;
        } else if total < n && children_per_couple[c] < 3 {
            children_per_couple[c] += 1;
            total += 1;
        }
    }
    let mut gen2: Vec<usize> = (0..n).map(|i| n + i).collect();
    gen2.shuffle(&mut rng);
    let mut slots = gen2.iter();
    let mut families: Vec<Vec<usize>> = vec![Vec::new(); half];
    let mut family_of = vec![0; n];
    for (c, &count) in children_per_couple.iter().enumerate() {
        for _ in 0..count {
            let p = *slots.next().expect("children counts sum to n");
            families[c].push(p);
            family_of[p - n] = c;
        }
    }
    for i in 0..n {
        let male = i < half;
        let name = if male { format!("g2_m{i}") } else { format!("g2_f{}", i - half) };
        people.push(Person { name, male, family: Some(family_of[i]) });
    }

    // generation-2 marriages across different families
    let target = ((n as f64 * GEN2_MARRIED_FRACTION) / 2.0).round() as usize;
    let mut men: Vec<usize> = (n..n + half).collect();
    let mut women: Vec<usize> = (n + half..2 * n).collect();
    men.shuffle(&mut rng);
    women.shuffle(&mut rng);
    let mut married = vec![false; 2 * n];
    let mut gen2_couples = Vec::new();
    for &m in &men {
        if gen2_couples.len() >= target {
            break;
        }
        if let Some(&w) = women
            .iter()
            .find(|&&w| !married[w] && people[w].family != people[m].family)
        {
            married[w] = true;
            married[m] = true;
            gen2_couples.push((m, w));
        }
    }
    if gen2_couples.is_empty() {
        log::warn!(
            "FAMILY with {n} people per generation has no cross-family marriages; \
             in-law relations will be empty"
        );
    }

    let mut edges: BTreeSet<(usize, &'static str, usize)> = BTreeSet::new();
    let mut spouse_of: Vec<Option<usize>> = vec![None; 2 * n];
    for &(a, b) in gen1_couples.iter().chain(&gen2_couples) {
        debug_assert!(people[a].male && !people[b].male);
        edges.insert((a, SPOUSE, b));
        edges.insert((b, SPOUSE, a));
        spouse_of[a] = Some(b);
        spouse_of[b] = Some(a);
    }
    for (c, &(father, mother)) in gen1_couples.iter().enumerate() {
        for &kid in &families[c] {
            for parent in [father, mother] {
                edges.insert((parent, PARENT, kid));
                edges.insert((kid, CHILD, parent));
                if let Some(s) = spouse_of[kid] {
                    edges.insert((parent, PARENT_IN_LAW, s));
                    edges.insert((s, CHILD_IN_LAW, parent));
                }
            }
            for &other in &families[c] {
                if other != kid {
                    edges.insert((kid, SIBLING, other));
                }
            }
        }
    }

    let mut all: Vec<NamedTriple> = edges
        .iter()
        .map(|&(h, r, t)| (people[h].name.clone(), r.to_owned(), people[t].name.clone()))
        .collect();
    all.shuffle(&mut rng);
    let n_eval = (all.len() as f64 * 0.05).round() as usize;
    let test = all.split_off(all.len() - n_eval);
    let valid = all.split_off(all.len() - n_eval);
    let train = all;
    let store = TripleStore::from_named(&train, &valid, &test);

    let relation_counts = FAMILY_RELATIONS
        .iter()
        .map(|&r| (r.to_owned(), edges.iter().filter(|e| e.1 == r).count()))
        .collect();
    let provenance = FamilyProvenance {
        generator: "family".to_owned(),
        spec: spec.clone(),
        gen1_couples: gen1_couples.len(),
        gen2_couples: gen2_couples.len(),
        triples: edges.len(),
        relation_counts,
        splits: [train.len(), valid.len(), test.len()],
    };
    Ok((store, provenance))
}

/// Writes a generated FAMILY dataset plus `provenance.json` into `dir`.
pub fn write_family(dir: impl AsRef<Path>, spec: &FamilySpec) -> Result<FamilyProvenance> {
    let dir = dir.as_ref();
    let (store, provenance) = generate_family(spec)?;
    store.write_tsv(dir)?;
    let path = dir.join("provenance.json");
    let json = serde_json::to_string_pretty(&provenance)?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(provenance)
}
