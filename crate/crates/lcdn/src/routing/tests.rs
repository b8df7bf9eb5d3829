use super::*;
use crate::topology::testutil::{path_of_switches, triangle_with_hosts};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform_graph(topo: &PhysicalTopology, class_q: u8, w: f64) -> QueueLevelGraph {
    QueueLevelGraph::build(topo, class_q, |_, _| w)
}

#[test]
fn shortest_path_on_triangle() {
    let topo = triangle_with_hosts();
    let g = uniform_graph(&topo, 0, 19.778e-6);
    let p = shortest_path(&g, "sa", "sc").unwrap().unwrap();
    assert_eq!(p.hops.len(), 1);
    assert_eq!(p.hops[0].switch, "sa");
    assert_eq!(p.hops[0].egress_port, 2);
    assert!((p.weight_sum_s - 19.778e-6).abs() < 1e-15);
}

#[test]
fn same_switch_gives_empty_path() {
    let topo = triangle_with_hosts();
    let g = uniform_graph(&topo, 0, 1e-5);
    let p = shortest_path(&g, "sa", "sa").unwrap().unwrap();
    assert!(p.hops.is_empty());
    assert_eq!(p.weight_sum_s, 0.0);
}

#[test]
fn overloaded_edges_make_destinations_unreachable() {
    let topo = triangle_with_hosts();
    let g = uniform_graph(&topo, 0, f64::INFINITY);
    assert_eq!(shortest_path(&g, "sa", "sc").unwrap(), None);
}

#[test]
fn unknown_endpoint_is_an_error() {
    let topo = triangle_with_hosts();
    let g = uniform_graph(&topo, 0, 1.0);
    assert!(matches!(
        shortest_path(&g, "sa", "nope"),
        Err(RoutingError::UnknownEndpoint(_))
    ));
}

#[test]
fn dijkstra_matches_brute_force_on_random_graphs() {
    use crate::topology::{Link, Node, NodeKind};
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let n = rng.random_range(2..=7usize);
        // Random connected graph: a random spanning path plus extras.
        let mut links = Vec::new();
        let mut port = vec![0u16; n];
        let add = |i: usize, j: usize, port: &mut Vec<u16>, links: &mut Vec<Link>| {
            port[i] += 1;
            port[j] += 1;
            links.push(Link::new(
                format!("s{i}"),
                port[i],
                format!("s{j}"),
                port[j],
                1e9,
            ));
        };
        for i in 1..n {
            add(i - 1, i, &mut port, &mut links);
        }
        for i in 0..n {
            for j in (i + 2)..n {
                if rng.random_bool(0.3) {
                    add(i, j, &mut port, &mut links);
                }
            }
        }
        let nodes = (0..n)
            .map(|i| Node {
                id: format!("s{i}"),
                kind: NodeKind::Switch,
                profile: None,
            })
            .collect();
        let topo = PhysicalTopology::from_parts(nodes, links).unwrap();
        // Weight each directed queue by a deterministic pseudo-random value.
        let g = QueueLevelGraph::build(&topo, 0, |sw, port| {
            let h = sw.bytes().fold(7u64, |acc, b| acc * 31 + u64::from(b));
            ((h * 131 + u64::from(port) * 17) % 1000 + 1) as f64 * 1e-6
        });
        let best = shortest_path(&g, "s0", &format!("s{}", n - 1)).unwrap().unwrap();
        let brute = brute_force_min(&g, "s0", &format!("s{}", n - 1));
        assert!((best.weight_sum_s - brute).abs() < 1e-12);
    }
}

fn brute_force_min(g: &QueueLevelGraph, src: &str, dst: &str) -> f64 {
    fn explore(
        g: &QueueLevelGraph,
        node: &str,
        dst: &str,
        seen: &mut Vec<NodeId>,
        cost: f64,
        best: &mut f64,
    ) {
        if node == dst {
            *best = best.min(cost);
            return;
        }
        for (next, edge) in g.neighbors(node) {
            if !seen.contains(next) {
                seen.push(next.clone());
                explore(g, next, dst, seen, cost + edge.weight_s, best);
                seen.pop();
            }
        }
    }
    let mut best = f64::INFINITY;
    explore(g, src, dst, &mut vec![src.to_string()], 0.0, &mut best);
    best
}

#[test]
fn yen_on_triangle_returns_both_simple_paths() {
    let topo = triangle_with_hosts();
    let paths = yen_k_paths(&topo, "sa", "sc", 3).unwrap();
    assert_eq!(paths.len(), 2);
    assert_eq!(paths[0], vec!["sa".to_string(), "sc".to_string()]);
    assert_eq!(paths[1], vec!["sa".to_string(), "sb".to_string(), "sc".to_string()]);
}

#[test]
fn yen_k1_is_the_shortest_path() {
    let topo = triangle_with_hosts();
    let paths = yen_k_paths(&topo, "h1", "h2", 1).unwrap();
    assert_eq!(paths, vec![vec!["sa".to_string(), "sc".to_string()]]);
}

#[test]
fn yen_on_a_line_finds_the_single_path() {
    let topo = path_of_switches(3);
    let paths = yen_k_paths(&topo, "s00", "s02", 5).unwrap();
    assert_eq!(paths.len(), 1);
    assert_eq!(paths[0].len(), 3);
}

#[test]
fn yen_paths_are_distinct_simple_and_sorted() {
    use crate::topology::{Link, Node, NodeKind};
    // K4 gives a healthy path population.
    let ids = ["s1", "s2", "s3", "s4"];
    let nodes = ids
        .iter()
        .map(|id| Node { id: id.to_string(), kind: NodeKind::Switch, profile: None })
        .collect();
    let mut links = Vec::new();
    let mut port = std::collections::BTreeMap::new();
    for i in 0..4 {
        for j in (i + 1)..4 {
            let pa = { let e = port.entry(i).or_insert(0u16); *e += 1; *e };
            let pb = { let e = port.entry(j).or_insert(0u16); *e += 1; *e };
            links.push(Link::new(ids[i].into(), pa, ids[j].into(), pb, 1e9));
        }
    }
    let topo = PhysicalTopology::from_parts(nodes, links).unwrap();
    let paths = yen_k_paths(&topo, "s1", "s4", 10).unwrap();
    // s1->s4 in K4: 1 direct, 2 two-hop, 2 three-hop.
    assert_eq!(paths.len(), 5);
    for w in paths.windows(2) {
        assert!(w[0].len() <= w[1].len());
        assert_ne!(w[0], w[1]);
    }
    for p in &paths {
        let unique: std::collections::BTreeSet<_> = p.iter().collect();
        assert_eq!(unique.len(), p.len(), "loop in {p:?}");
    }
}

#[test]
fn ranking_prefers_light_paths_then_low_priority_classes() {
    let topo = triangle_with_hosts();
    let mut catalog = TreeCatalog::new(&topo);
    catalog.ensure_enumerated(1);
    catalog.assign_vlan(0).unwrap();
    let graphs = vec![uniform_graph(&topo, 0, 1e-5), uniform_graph(&topo, 1, 1e-5)];
    let ranked = rank_candidates(&graphs, &topo, &catalog, "sa", "sc", 4);
    // Both classes yield the same two geometric paths.
    assert_eq!(ranked.len(), 4);
    // Direct path first; the tie between classes goes to the
    // lower-priority class (class 1).
    assert_eq!(ranked[0].hops.len(), 1);
    assert_eq!(ranked[0].class_q, 1);
    assert_eq!(ranked[1].hops.len(), 1);
    assert_eq!(ranked[1].class_q, 0);
    assert_eq!(ranked[2].hops.len(), 2);
    assert_eq!(ranked[2].class_q, 1);
    // Weights ascend throughout.
    for w in ranked.windows(2) {
        assert!(w[0].weight_sum_s <= w[1].weight_sum_s + 1e-18);
    }
}

#[test]
fn ranking_annotates_containing_configured_tree() {
    let topo = triangle_with_hosts();
    let mut catalog = TreeCatalog::new(&topo);
    catalog.ensure_enumerated(3);
    catalog.assign_vlan(0).unwrap(); // tree 0: {sa-sb, sa-sc}
    let graphs = vec![uniform_graph(&topo, 0, 1e-5)];
    let ranked = rank_candidates(&graphs, &topo, &catalog, "sb", "sc", 4);
    // sb->sa->sc lies in tree 0; the direct sb-sc edge does not.
    let direct = ranked.iter().find(|c| c.hops.len() == 1).unwrap();
    assert_eq!(direct.tree_index, None);
    let detour = ranked.iter().find(|c| c.hops.len() == 2).unwrap();
    assert_eq!(detour.tree_index, Some(0));
}

#[test]
fn ranking_unreachable_destination_is_empty() {
    let topo = triangle_with_hosts();
    let catalog = TreeCatalog::new(&topo);
    let graphs = vec![uniform_graph(&topo, 0, f64::INFINITY)];
    let ranked = rank_candidates(&graphs, &topo, &catalog, "sa", "sc", 4);
    assert!(ranked.is_empty());
}

#[test]
fn reroute_candidates_filter_and_order() {
    let link = |a: &str, b: &str| -> (NodeId, NodeId) {
        if a < b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    };
    let selected: BTreeSet<_> = [link("sa", "sc")].into_iter().collect();

    assert!(reroute_candidates(&[], &selected).is_empty());

    let flows = vec![
        RerouteView {
            flow_id: "small".into(),
            rate_bps: 1e6,
            links: [link("sa", "sc")].into_iter().collect(),
        },
        RerouteView {
            flow_id: "big".into(),
            rate_bps: 5e7,
            links: [link("sa", "sc"), link("sa", "sb")].into_iter().collect(),
        },
        RerouteView {
            flow_id: "elsewhere".into(),
            rate_bps: 9e9,
            links: [link("sb", "sc")].into_iter().collect(),
        },
    ];
    let got = reroute_candidates(&flows, &selected);
    assert_eq!(got, vec!["big".to_string(), "small".to_string()]);
}

#[test]
fn yen_matches_brute_force_enumeration_on_small_graphs() {
    let topo = triangle_with_hosts();
    let g = uniform_graph(&topo, 0, 1.0);
    let got = yen_on_graph(&g, "sa", "sc", 50);
    // All simple sa->sc paths, by exhaustive search.
    let mut all = Vec::new();
    fn explore(g: &QueueLevelGraph, node: &str, dst: &str, path: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        if node == dst {
            out.push(path.clone());
            return;
        }
        for (next, _) in g.neighbors(node) {
            if !path.contains(next) {
                path.push(next.clone());
                explore(g, next, dst, path, out);
                path.pop();
            }
        }
    }
    explore(&g, "sa", "sc", &mut vec!["sa".to_string()], &mut all);
    assert_eq!(got.len(), all.len());
    let got_sets: BTreeSet<Vec<NodeId>> = got.into_iter().map(|p| p.nodes).collect();
    let all_sets: BTreeSet<Vec<NodeId>> = all.into_iter().collect();
    assert_eq!(got_sets, all_sets);
}
