use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use dihedral_kge::dataset::{
    generate_family, write_family, FamilySpec, NamedTriple, Side, Split, Triple, TripleStore, CHILD,
    CHILD_IN_LAW, PARENT, PARENT_IN_LAW, SIBLING, SPOUSE,
};
use dihedral_kge::Error;
use proptest::prelude::*;

type Edges = BTreeSet<(String, String, String)>;

fn all_edges(store: &TripleStore) -> Edges {
    [Split::Train, Split::Valid, Split::Test]
        .iter()
        .flat_map(|&s| store.split(s).iter())
        .map(|t| {
            let (h, r, tl) = store.named(t);
            (h.to_owned(), r.to_owned(), tl.to_owned())
        })
        .collect()
}

fn pairs(edges: &Edges, rel: &str) -> BTreeSet<(String, String)> {
    edges
        .iter()
        .filter(|e| e.1 == rel)
        .map(|e| (e.0.clone(), e.2.clone()))
        .collect()
}

fn inverse(p: &BTreeSet<(String, String)>) -> BTreeSet<(String, String)> {
    p.iter().map(|(a, b)| (b.clone(), a.clone())).collect()
}

/// `{(x, z) : (x, y) ∈ a, (y, z) ∈ b}`.
fn compose(a: &BTreeSet<(String, String)>, b: &BTreeSet<(String, String)>) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    for (x, y) in a {
        for (y2, z) in b {
            if y == y2 {
                out.insert((x.clone(), z.clone()));
            }
        }
    }
    out
}

/// Applies the kinship rules once and returns every derived edge.
fn rule_closure(edges: &Edges) -> Edges {
    let parent = pairs(edges, PARENT);
    let spouse = pairs(edges, SPOUSE);
    let mut derived = edges.clone();
    let add = |derived: &mut Edges, rel: &str, p: &BTreeSet<(String, String)>| {
        for (a, b) in p {
            derived.insert((a.clone(), rel.to_owned(), b.clone()));
        }
    };
    add(&mut derived, SPOUSE, &inverse(&spouse));
    add(&mut derived, CHILD, &inverse(&parent));
    let siblings: BTreeSet<_> = compose(&inverse(&parent), &parent)
        .into_iter()
        .filter(|(a, b)| a != b)
        .collect();
    add(&mut derived, SIBLING, &siblings);
    let pil = compose(&parent, &spouse);
    add(&mut derived, PARENT_IN_LAW, &pil);
    add(&mut derived, CHILD_IN_LAW, &inverse(&pil));
    derived
}

#[test]
fn family_graph_is_closed_under_kinship_rules() {
    for (n, seed) in [(200, 0), (40, 3), (10, 9)] {
        let (store, prov) = generate_family(&FamilySpec {
            people_per_generation: n,
            seed,
        })
        .unwrap();
        let edges = all_edges(&store);
        assert_eq!(edges.len(), prov.triples);
        assert_eq!(rule_closure(&edges), edges, "n={n} seed={seed}");
    }
}

#[test]
fn family_relation_properties() {
    let (store, prov) = generate_family(&FamilySpec::default()).unwrap();
    let edges = all_edges(&store);
    let spouse = pairs(&edges, SPOUSE);
    let sibling = pairs(&edges, SIBLING);
    let parent = pairs(&edges, PARENT);
    assert_eq!(spouse, inverse(&spouse));
    assert_eq!(sibling, inverse(&sibling));
    assert_eq!(parent, inverse(&pairs(&edges, CHILD)));
    assert_eq!(pairs(&edges, PARENT_IN_LAW), inverse(&pairs(&edges, CHILD_IN_LAW)));
    // non-Abelian witness
    assert_ne!(compose(&parent, &spouse), compose(&spouse, &parent));

    // two generations of 200, everyone in gen 1 married, ~half of gen 2 married
    assert_eq!(store.num_entities(), 400);
    assert_eq!(prov.gen1_couples, 100);
    assert_eq!(prov.gen2_couples, 50);
    let mut spouses: BTreeMap<&str, usize> = BTreeMap::new();
    for (a, _) in &spouse {
        *spouses.entry(a.as_str()).or_default() += 1;
    }
    assert!(spouses.values().all(|&c| c == 1));
    // every gen-2 person has exactly two parents, who are married to each other
    let mut parents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (p, c) in &parent {
        parents.entry(c.as_str()).or_default().push(p.as_str());
    }
    assert_eq!(parents.len(), 200);
    for ps in parents.values() {
        assert_eq!(ps.len(), 2);
        assert!(spouse.contains(&(ps[0].to_owned(), ps[1].to_owned())));
    }
    // no sibling marriages
    assert!(spouse.intersection(&sibling).next().is_none());
    // 90/5/5 split
    let total = prov.triples as f64;
    assert_eq!(store.test().len(), (total * 0.05).round() as usize);
    assert_eq!(store.valid().len(), store.test().len());
}

#[test]
fn tiny_family_has_no_in_laws() {
    let (store, prov) = generate_family(&FamilySpec {
        people_per_generation: 2,
        seed: 0,
    })
    .unwrap();
    assert_eq!(prov.gen2_couples, 0);
    let edges = all_edges(&store);
    assert!(pairs(&edges, PARENT_IN_LAW).is_empty());
    assert!(!pairs(&edges, SIBLING).is_empty());
}

#[test]
fn family_generation_is_seeded() {
    let spec = FamilySpec {
        people_per_generation: 50,
        seed: 4,
    };
    assert_eq!(generate_family(&spec).unwrap(), generate_family(&spec).unwrap());
    let other = generate_family(&FamilySpec { seed: 5, ..spec.clone() }).unwrap();
    assert_ne!(generate_family(&spec).unwrap().0, other.0);
}

#[test]
fn odd_family_size_is_rejected() {
    let err = generate_family(&FamilySpec {
        people_per_generation: 7,
        seed: 0,
    })
    .unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
}

#[test]
fn tsv_round_trip_preserves_ids() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FamilySpec {
        people_per_generation: 30,
        seed: 2,
    };
    let prov = write_family(dir.path(), &spec).unwrap();
    assert!(dir.path().join("provenance.json").exists());
    let loaded = TripleStore::load_tsv(dir.path()).unwrap();
    let (generated, _) = generate_family(&spec).unwrap();
    assert_eq!(loaded, generated);
    assert_eq!(loaded.train().len() + loaded.valid().len() + loaded.test().len(), prov.triples);

    let again = tempfile::tempdir().unwrap();
    loaded.write_tsv(again.path()).unwrap();
    assert_eq!(TripleStore::load_tsv(again.path()).unwrap(), loaded);
}

fn write_splits(dir: &std::path::Path, train: &str, valid: &str, test: &str) {
    fs::write(dir.join("train.txt"), train).unwrap();
    fs::write(dir.join("valid.txt"), valid).unwrap();
    fs::write(dir.join("test.txt"), test).unwrap();
}

#[test]
fn two_line_file_dictionaries() {
    let dir = tempfile::tempdir().unwrap();
    write_splits(dir.path(), "a\tr\tb\nb\ts\tc\n", "", "\n");
    let store = TripleStore::load_tsv(dir.path()).unwrap();
    assert_eq!(store.entities().names(), ["a", "b", "c"]);
    assert_eq!(store.relations().names(), ["r", "s"]);
    assert_eq!(store.train(), [Triple::new(0, 0, 1), Triple::new(1, 1, 2)]);
}

#[test]
fn malformed_lines_report_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    write_splits(dir.path(), "a\tr\tb\n\na\tr\n", "", "");
    match TripleStore::load_tsv(dir.path()).unwrap_err() {
        Error::Parse { path, line, .. } => {
            assert_eq!(line, 3);
            assert!(path.ends_with("train.txt"));
        }
        other => panic!("unexpected {other}"),
    }
    write_splits(dir.path(), "a\tr\tb\n", "x\ty\tz\tw\n", "");
    assert!(matches!(
        TripleStore::load_tsv(dir.path()),
        Err(Error::Parse { line: 1, .. })
    ));
}

#[test]
fn missing_directory_is_an_io_error() {
    assert!(matches!(
        TripleStore::load_tsv("/definitely/not/here"),
        Err(Error::Io { .. })
    ));
}

#[test]
fn unknown_relation_lookup() {
    let store = generate_family(&FamilySpec {
        people_per_generation: 4,
        seed: 0,
    })
    .unwrap()
    .0;
    assert!(matches!(store.relation_id("uncle"), Err(Error::UnknownRelation(_))));
    assert!(store.relation_id(PARENT).is_ok());
}

fn named(h: u8, r: u8, t: u8) -> NamedTriple {
    (format!("e{h}"), format!("r{r}"), format!("e{t}"))
}

fn arb_kg() -> impl Strategy<Value = (Vec<NamedTriple>, Vec<NamedTriple>, Vec<NamedTriple>)> {
    let triple = (0u8..8, 0u8..3, 0u8..8).prop_map(|(h, r, t)| named(h, r, t));
    (
        proptest::collection::vec(triple.clone(), 1..30),
        proptest::collection::vec(triple.clone(), 0..8),
        proptest::collection::vec(triple, 0..8),
    )
}

proptest! {
    #[test]
    fn filter_matches_brute_force_scan((train, valid, test) in arb_kg()) {
        let store = TripleStore::from_named(&train, &valid, &test);
        let all: Vec<Triple> = [Split::Train, Split::Valid, Split::Test]
            .iter()
            .flat_map(|&s| store.split(s).to_vec())
            .collect();
        for q in &all {
            let mut tails: Vec<u32> = all
                .iter()
                .filter(|t| t.head == q.head && t.relation == q.relation && t.tail != q.tail)
                .map(|t| t.tail)
                .collect();
            tails.sort_unstable();
            tails.dedup();
            prop_assert_eq!(store.filtered_candidates(q, Side::Tail), tails);
            let mut heads: Vec<u32> = all
                .iter()
                .filter(|t| t.tail == q.tail && t.relation == q.relation && t.head != q.head)
                .map(|t| t.head)
                .collect();
            heads.sort_unstable();
            heads.dedup();
            prop_assert_eq!(store.filtered_candidates(q, Side::Head), heads);
        }
    }

    #[test]
    fn dictionaries_are_dense((train, valid, test) in arb_kg()) {
        let store = TripleStore::from_named(&train, &valid, &test);
        for split in [Split::Train, Split::Valid, Split::Test] {
            for t in store.split(split) {
                prop_assert!((t.head as usize) < store.num_entities());
                prop_assert!((t.tail as usize) < store.num_entities());
                prop_assert!((t.relation as usize) < store.num_relations());
            }
        }
    }
}
