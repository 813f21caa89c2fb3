use std::collections::{BTreeMap, BTreeSet, VecDeque};

use proptest::prelude::*;
use serde_json::json;
use srsearch::kg::{ConceptGraph, GraphError};

const SYNONYM_POOL: &[&str] = &["shared term", "Alpha", "beta blockers", "Suture", "wound  care"];

#[derive(Debug, Clone)]
struct Shape {
    n: usize,
    edges: Vec<(usize, usize)>,
    synonyms: Vec<Vec<usize>>,
}

fn shape(max_nodes: usize) -> impl Strategy<Value = Shape> {
    (1..=max_nodes).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((0..n, 0..n), 0..n * 2),
            prop::collection::vec(prop::collection::vec(0..SYNONYM_POOL.len(), 0..3), n),
        )
            .prop_map(|(n, edges, synonyms)| Shape { n, edges, synonyms })
    })
}

fn id(i: usize) -> String {
    format!("C{i:03}")
}

fn jsonl(s: &Shape) -> String {
    let mut lines = Vec::new();
    for i in 0..s.n {
        let edges: Vec<_> = s
            .edges
            .iter()
            .filter(|(a, _)| *a == i)
            .map(|(_, b)| json!({"to": id(*b), "rel": "related"}))
            .collect();
        let syns: Vec<_> = s.synonyms[i].iter().map(|k| SYNONYM_POOL[*k]).collect();
        lines.push(json!({"id": id(i), "label": format!("concept {i}"), "synonyms": syns, "edges": edges}).to_string());
    }
    lines.join("\n")
}

/// Breadth-first reachability from the generated edge list.
fn bfs_oracle(s: &Shape, start: usize, hops: usize) -> BTreeSet<String> {
    let mut adj: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(a, b) in &s.edges {
        if a != b {
            adj.entry(a).or_default().insert(b);
            adj.entry(b).or_default().insert(a);
        }
    }
    let mut dist = BTreeMap::from([(start, 0usize)]);
    let mut q = VecDeque::from([start]);
    while let Some(c) = q.pop_front() {
        if dist[&c] == hops {
            continue;
        }
        for &nb in adj.get(&c).into_iter().flatten() {
            if !dist.contains_key(&nb) {
                dist.insert(nb, dist[&c] + 1);
                q.push_back(nb);
            }
        }
    }
    dist.into_keys().filter(|&k| k != start).map(id).collect()
}

fn ids(v: Vec<&srsearch::kg::Concept>) -> Vec<String> {
    v.into_iter().map(|c| c.id.clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn neighbors_match_bfs_oracle(s in shape(50), hops in 0usize..4) {
        let g = ConceptGraph::from_jsonl(&jsonl(&s)).unwrap();
        for start in 0..s.n {
            let got = ids(g.neighbors(&id(start), hops).unwrap());
            let want: Vec<String> = bfs_oracle(&s, start, hops).into_iter().collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn one_hop_is_symmetric(s in shape(30)) {
        let g = ConceptGraph::from_jsonl(&jsonl(&s)).unwrap();
        for a in 0..s.n {
            for b in ids(g.neighbors(&id(a), 1).unwrap()) {
                let back = ids(g.neighbors(&b, 1).unwrap());
                prop_assert!(back.contains(&id(a)));
            }
        }
    }

    #[test]
    fn more_hops_never_lose_neighbors(s in shape(30), hops in 0usize..4) {
        let g = ConceptGraph::from_jsonl(&jsonl(&s)).unwrap();
        for a in 0..s.n {
            let near: BTreeSet<_> = ids(g.neighbors(&id(a), hops).unwrap()).into_iter().collect();
            let far: BTreeSet<_> = ids(g.neighbors(&id(a), hops + 1).unwrap()).into_iter().collect();
            prop_assert!(near.is_subset(&far));
            prop_assert!(!far.contains(&id(a)));
        }
    }

    #[test]
    fn canonical_round_trip(s in shape(30)) {
        let g = ConceptGraph::from_jsonl(&jsonl(&s)).unwrap();
        let again = ConceptGraph::from_jsonl(&g.to_jsonl()).unwrap();
        prop_assert_eq!(&g, &again);
        prop_assert_eq!(g.version(), again.version());
        prop_assert_eq!(g.to_jsonl(), again.to_jsonl());
    }

    #[test]
    fn every_label_resolves_to_a_bearer(s in shape(20)) {
        let g = ConceptGraph::from_jsonl(&jsonl(&s)).unwrap();
        for c in g.concepts() {
            let preferred = g.lookup(&c.preferred_label.to_uppercase()).unwrap();
            prop_assert_eq!(&preferred.id, &c.id);
            for syn in &c.synonyms {
                let hit = g.lookup(syn).unwrap();
                let norm = |x: &str| x.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
                prop_assert!(hit.labels().any(|l| norm(l) == norm(syn)));
                // Collisions go to the first concept by id carrying the label.
                let first = g
                    .concepts()
                    .find(|o| o.labels().any(|l| norm(l) == norm(syn)))
                    .unwrap();
                prop_assert_eq!(&hit.id, &first.id);
            }
        }
    }
}

#[test]
fn dangling_edge_is_reported() {
    let err = ConceptGraph::load(common_fixture("dangling.jsonl")).unwrap_err();
    match err {
        GraphError::DanglingEdge { source_id, target } => {
            assert_eq!((source_id.as_str(), target.as_str()), ("C", "Z"));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn mesh_fixture_two_hop_chain() {
    let g = ConceptGraph::load(common_fixture("mesh-mini.jsonl")).unwrap();
    let one = ids(g.neighbors("D002373", 1).unwrap());
    assert_eq!(one, vec!["D013536"]);
    let two = ids(g.neighbors("D002373", 2).unwrap());
    assert_eq!(two, vec!["D013523", "D013536"]);
    assert!(matches!(g.neighbors("nope", 1), Err(GraphError::UnknownConcept(_))));
}

fn common_fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}
