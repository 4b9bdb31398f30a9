//! Connected components of the dependence adjacency matrix.

/// Union-find over `0..len`.
#[derive(Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(len: usize) -> Self {
        UnionFind { parent: (0..len).collect(), size: vec![1; len] }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Canonical partition induced by a square symmetric boolean matrix:
/// components ordered by smallest member, members ascending.
pub fn connected_components(adjacency: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adjacency.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        debug_assert_eq!(adjacency[i].len(), n, "adjacency must be square");
        for j in (i + 1)..n {
            debug_assert_eq!(adjacency[i][j], adjacency[j][i], "adjacency must be symmetric");
            if adjacency[i][j] {
                uf.union(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = uf.find(i);
        groups[r].push(i);
    }
    // members were inserted ascending; retaining root order sorts components
    // by their smallest member because the smallest member's root slot is
    // visited first
    let mut components: Vec<Vec<usize>> = groups.into_iter().filter(|g| !g.is_empty()).collect();
    components.sort_by_key(|g| g[0]);
    components
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
        let mut m = vec![vec![false; n]; n];
        for i in 0..n {
            m[i][i] = true;
        }
        for &(a, b) in edges {
            m[a][b] = true;
            m[b][a] = true;
        }
        m
    }

    #[test]
    fn identity_adjacency_gives_singletons() {
        let comps = connected_components(&matrix(4, &[]));
        assert_eq!(comps, vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn full_adjacency_gives_one_component() {
        let comps = connected_components(&matrix(3, &[(0, 1), (0, 2), (1, 2)]));
        assert_eq!(comps, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn disjoint_edges() {
        let comps = connected_components(&matrix(4, &[(0, 1), (2, 3)]));
        assert_eq!(comps, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn single_edge_on_three() {
        let comps = connected_components(&matrix(3, &[(0, 1)]));
        assert_eq!(comps, vec![vec![0, 1], vec![2]]);
    }
}
