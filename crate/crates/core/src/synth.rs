//! Planted-role benchmark where two classes differ only in which attribute
//! pattern closes triangles around a node.
//!
//! Every labeled "role" node has the same number of neighbors carrying
//! pattern A and pattern B. In class 0 the A neighbors are paired into
//! triangles with the role node while the B neighbors hang off it as open
//! wedges; class 1 swaps the patterns. Wedge neighbors get one extra edge
//! into a background graph so that every neighbor of a role node has the same
//! degree. Role nodes carry noise only.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph, LabelSet};
use crate::rng::{self, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedConfig {
    /// Role nodes per class.
    pub roles_per_class: usize,
    /// Triangles around each role node; it also gets `2 * triangles` wedge
    /// neighbors of the other pattern.
    pub triangles: usize,
    pub background: usize,
    /// Mean degree of the background graph.
    pub background_degree: f64,
    /// Random edges between role nodes, per role node.
    pub role_links: f64,

    pub n_features: usize,
    /// Width of each of the two attribute patterns.
    pub pattern_width: usize,
    /// Standard deviation of the Gaussian noise added to every feature.
    pub noise: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            roles_per_class: 100,
            triangles: 3,
            background: 200,
            background_degree: 4.0,
            role_links: 0.0,
            n_features: 20,
            pattern_width: 5,
            noise: 1.0,
        }
    }
}

/// Graph, features and role labels; non-role nodes are unlabeled.
pub struct Planted {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelSet,
    /// Role node ids, class 0 first.
    pub roles: Vec<usize>,
}

pub fn planted_roles(cfg: &PlantedConfig, seed: u64) -> Result<Planted> {
    if cfg.triangles == 0 || cfg.roles_per_class == 0 || cfg.background < 2 {
        return Err(Error::Config("planted benchmark needs roles, triangles and >= 2 background nodes".into()));
    }
    if 2 * cfg.pattern_width > cfg.n_features {
        return Err(Error::Config("two patterns do not fit in the feature width".into()));
    }
    let mut rng = rng::stream(seed, Stream::Data);
    let n_roles = 2 * cfg.roles_per_class;
    let per_role = 4 * cfg.triangles;
    let n = n_roles + n_roles * per_role + cfg.background;
    let bg0 = n_roles * (1 + per_role);
    let mut edges = Vec::new();
    // pattern id per node: None for noise-only nodes
    let mut pattern: Vec<Option<usize>> = vec![None; n];
    let mut labels = vec![None; n];
    let mut next = n_roles;
    for (r, label) in labels.iter_mut().enumerate().take(n_roles) {
        let class = r / cfg.roles_per_class;
        *label = Some(class as u32);
        let tri_pattern = class;
        let wedge_pattern = 1 - class;
        for _ in 0..cfg.triangles {
            let (a, b) = (next, next + 1);
            next += 2;
            pattern[a] = Some(tri_pattern);
            pattern[b] = Some(tri_pattern);
            edges.extend([(r, a), (r, b), (a, b)]);
        }
        for _ in 0..2 * cfg.triangles {
            let w = next;
            next += 1;
            pattern[w] = Some(wedge_pattern);
            edges.push((r, w));
            edges.push((w, bg0 + rng.gen_range(0..cfg.background)));
        }
    }
    debug_assert_eq!(next, bg0);
    let bg_edges = (cfg.background as f64 * cfg.background_degree / 2.0).round() as usize;
    for _ in 0..bg_edges {
        let a = rng.gen_range(0..cfg.background);
        let b = rng.gen_range(0..cfg.background);
        if a != b {
            edges.push((bg0 + a, bg0 + b));
        }
    }
    let role_edges = (n_roles as f64 * cfg.role_links / 2.0).round() as usize;
    for _ in 0..role_edges {
        let a = rng.gen_range(0..n_roles);
        let b = rng.gen_range(0..n_roles);
        if a != b {
            edges.push((a, b));
        }
    }
    edges.shuffle(&mut rng);
    let (graph, _) = Graph::from_edges(n, edges, false)?;
    let x = Array2::from_shape_fn((n, cfg.n_features), |(v, j)| {
        let on = pattern[v].is_some_and(|p| j / cfg.pattern_width == p);
        (on as u8 as f64) + cfg.noise * rng.sample::<f64, _>(StandardNormal)
    });
    Ok(Planted {
        graph,
        features: FeatureMatrix::new(x)?,
        labels: LabelSet::new(labels, 2)?,
        roles: (0..n_roles).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motif::{build_index, builtin_catalog, DirectedSet};

    #[test]
    fn role_neighborhoods_have_equal_pattern_counts_and_degrees() {
        let cfg = PlantedConfig {
            roles_per_class: 5,
            triangles: 2,
            noise: 0.0,
            ..Default::default()
        };
        let p = planted_roles(&cfg, 3).unwrap();
        let x = p.features.values();
        for &r in &p.roles {
            let nb = p.graph.neighbors(r);
            assert_eq!(nb.len(), 8);
            let a = nb.iter().filter(|&&u| x[[u as usize, 0]] == 1.0).count();
            let b = nb.iter().filter(|&&u| x[[u as usize, cfg.pattern_width]] == 1.0).count();
            assert_eq!((a, b), (4, 4));
            assert!(nb.iter().all(|&u| p.graph.degree(u as usize) == 2));
        }
    }

    #[test]
    fn triangles_carry_the_class_pattern() {
        let cfg = PlantedConfig {
            roles_per_class: 4,
            noise: 0.0,
            ..Default::default()
        };
        let p = planted_roles(&cfg, 1).unwrap();
        let idx = build_index(&p.graph, &builtin_catalog(false, DirectedSet::Full)).unwrap();
        let x = p.features.values();
        for &r in &p.roles {
            let class = p.labels.get(r).unwrap() as usize;
            assert_eq!(idx.count(r, 1), cfg.triangles);
            for inst in idx.instances(r, 1) {
                for &u in &inst.nodes[1..] {
                    assert_eq!(x[[u, class * cfg.pattern_width]], 1.0);
                }
            }
        }
    }
}
