//! Recorded typing derivations: one node per rule application.

use serde::Serialize;

use crate::syntax::ast::{IndexTerm, LinType, Span, Symbol};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DerivationNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub rule: &'static str,
    pub line: u32,
    #[serde(skip)]
    pub span: Span,
    /// Θ in which the conclusion is judged, e.g. `i:Id`.
    pub theta: Vec<String>,
    /// Hypotheses this rule adds for its premises, e.g. `x:Time` or `c1 : I @ x`.
    pub bound: Vec<String>,
    /// Linear entries existing before this node that its subderivation consumed.
    pub consumed: Vec<String>,
    /// Node that introduced each consumed entry, parallel to `consumed`.
    pub consumed_origins: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Derivation {
    pub definition: String,
    pub nodes: Vec<DerivationNode>,
}

impl Derivation {
    pub fn find(&self, rule: &str, line: u32) -> Option<&DerivationNode> {
        self.nodes.iter().find(|n| n.rule == rule && n.line == line)
    }

    pub fn at_line(&self, line: u32) -> impl Iterator<Item = &DerivationNode> {
        self.nodes.iter().filter(move |n| n.line == line)
    }

    pub fn child(&self, node: &DerivationNode, k: usize) -> Option<&DerivationNode> {
        node.children.get(k).map(|&c| &self.nodes[c])
    }

    /// True if `node` lies in the subtree rooted at `ancestor` (inclusive).
    pub fn descends_from(&self, mut node: usize, ancestor: usize) -> bool {
        loop {
            if node == ancestor {
                return true;
            }
            match self.nodes[node].parent {
                Some(p) => node = p,
                None => return false,
            }
        }
    }

    /// Indented text rendering, one rule per line.
    pub fn render(&self) -> String {
        let mut out = format!("derivation of {}\n", self.definition);
        fn go(d: &Derivation, id: usize, depth: usize, out: &mut String) {
            let n = &d.nodes[id];
            out.push_str(&format!("{:indent$}{} (line {})", "", n.rule, n.line, indent = depth * 2));
            if !n.theta.is_empty() {
                out.push_str(&format!("  Θ = {}", n.theta.join(", ")));
            }
            if !n.bound.is_empty() {
                out.push_str(&format!("  + {}", n.bound.join(", ")));
            }
            if !n.consumed.is_empty() {
                out.push_str(&format!("  Δ = {}", n.consumed.join(", ")));
            }
            out.push('\n');
            for &c in &n.children {
                go(d, c, depth + 1, out);
            }
        }
        for n in self.nodes.iter().filter(|n| n.parent.is_none()) {
            go(self, n.id, 1, &mut out);
        }
        out
    }
}

/// Node under construction; types are rendered only after metavariables are solved.
#[derive(Debug, Clone)]
pub(crate) struct RawNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub rule: &'static str,
    pub span: Span,
    pub theta: Vec<String>,
    pub bound: Vec<RawHyp>,
    pub consumed: Vec<(RawEntry, usize)>,
}

#[derive(Debug, Clone)]
pub(crate) struct RawEntry {
    pub name: Symbol,
    pub ty: LinType,
    pub time: IndexTerm,
}

#[derive(Debug, Clone)]
pub(crate) enum RawHyp {
    Index(String),
    Cart(String),
    Lin(RawEntry),
}

pub(crate) fn render_entry(e: &RawEntry, zonk: &dyn Fn(&LinType) -> LinType, zonk_i: &dyn Fn(&IndexTerm) -> IndexTerm) -> String {
    let ty = zonk(&e.ty);
    match zonk_i(&e.time) {
        IndexTerm::TimeLit(0) => format!("{} : {}", e.name.name, ty),
        t => format!("{} :_{} {}", e.name.name, t, ty),
    }
}

#[cfg(test)]
mod tests {
    use crate::check_source;

    const SRC: &str = "def f : I ⊗ I ⊸ I ⊗ I =\n  λp.\n  let (a, b) = p in\n  (b, a)\n";

    #[test]
    fn nodes_form_a_tree_with_source_lines() {
        let c = check_source(SRC).unwrap();
        let d = &c.derivations["f"];
        let roots: Vec<_> = d.nodes.iter().filter(|n| n.parent.is_none()).collect();
        assert_eq!(roots.len(), 1);
        for n in &d.nodes {
            assert!(d.descends_from(n.id, roots[0].id));
            for &ch in &n.children {
                assert_eq!(d.nodes[ch].parent, Some(n.id));
            }
        }
        let split = d.at_line(3).find(|n| n.rule.contains('⊗')).expect("tensor elimination on line 3");
        assert!(split.bound.iter().any(|b| b.starts_with("a")));
        assert!(split.consumed.iter().any(|b| b.starts_with("p")));
    }

    #[test]
    fn rendering_is_indented_by_depth() {
        let c = check_source(SRC).unwrap();
        let text = c.derivations["f"].render();
        assert!(text.starts_with("derivation of f\n"));
        assert!(text.lines().skip(1).all(|l| l.starts_with("  ")));
        assert!(text.lines().any(|l| l.starts_with("    ")));
    }
}
