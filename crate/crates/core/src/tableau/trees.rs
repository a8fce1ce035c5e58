//! Rooted trees and the elementary weights of Butcher's order theory.

use std::collections::BTreeMap;

use super::Tableau;

/// A rooted tree stored with its subtrees in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    children: Vec<RootedTree>,
}

impl RootedTree {
    pub fn leaf() -> Self {
        Self {
            children: Vec::new(),
        }
    }

    /// Tree with the given subtrees grafted onto a new root.
    pub fn graft(children: Vec<RootedTree>) -> Self {
        let mut t = Self { children };
        t.canonicalize();
        t
    }

    fn canonicalize(&mut self) {
        for c in &mut self.children {
            c.canonicalize();
        }
        // Lexicographically largest level sequence first.
        self.children
            .sort_by_key(|c| std::cmp::Reverse(c.level_sequence()));
    }

    /// Number of nodes.
    pub fn order(&self) -> usize {
        1 + self.children.iter().map(RootedTree::order).sum::<usize>()
    }

    /// `gamma(t) = |t| * prod gamma(children)`.
    pub fn density(&self) -> u64 {
        self.order() as u64 * self.children.iter().map(RootedTree::density).product::<u64>()
    }

    /// Preorder node depths, e.g. `"0121"` for the root with a chain of two
    /// and a separate leaf.
    pub fn level_sequence(&self) -> String {
        let mut out = String::new();
        self.push_levels(0, &mut out);
        out
    }

    fn push_levels(&self, depth: usize, out: &mut String) {
        out.push(char::from_digit(depth as u32, 36).expect("tree too deep for label"));
        for c in &self.children {
            c.push_levels(depth + 1, out);
        }
    }

    /// Stage-wise internal weights `g_i = prod_children sum_j a_ij g_j(child)`.
    fn internal_weights(&self, t: &Tableau) -> Vec<f64> {
        let s = t.stages();
        let mut g = vec![1.0; s];
        for child in &self.children {
            let gc = child.internal_weights(t);
            for (i, gi) in g.iter_mut().enumerate() {
                let sum: f64 = (0..i).map(|j| t.a(i, j) * gc[j]).sum();
                *gi *= sum;
            }
        }
        g
    }

    /// `Phi(t) = sum_i b_i g_i(t)`.
    pub fn elementary_weight(&self, t: &Tableau) -> f64 {
        self.internal_weights(t)
            .iter()
            .zip(t.b())
            .map(|(g, b)| g * b)
            .sum()
    }

    /// All trees obtained by attaching one new leaf to some node.
    fn grow(&self) -> Vec<RootedTree> {
        let mut out = Vec::new();
        let mut with_leaf = self.clone();
        with_leaf.children.push(RootedTree::leaf());
        out.push(with_leaf);
        for (k, child) in self.children.iter().enumerate() {
            for grown in child.grow() {
                let mut t = self.clone();
                t.children[k] = grown;
                out.push(t);
            }
        }
        out
    }
}

/// Every rooted tree with `order` nodes, in canonical (descending label) order.
pub fn rooted_trees(order: usize) -> Vec<RootedTree> {
    if order == 0 {
        return Vec::new();
    }
    let mut current: BTreeMap<String, RootedTree> = BTreeMap::new();
    let leaf = RootedTree::leaf();
    current.insert(leaf.level_sequence(), leaf);
    for _ in 1..order {
        let mut next = BTreeMap::new();
        for tree in current.values() {
            for mut grown in tree.grow() {
                grown.canonicalize();
                next.insert(grown.level_sequence(), grown);
            }
        }
        current = next;
    }
    current.into_values().rev().collect()
}
