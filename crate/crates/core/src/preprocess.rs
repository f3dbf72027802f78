//! Reduction of a parsed page to its bare element skeleton.
//!
//! The pipeline drops a fixed set of non-structural tags (with their whole
//! subtree), strips every attribute, and removes text and every other
//! non-element node, leaving only the hierarchy of tag names.

use std::collections::BTreeSet;

use crate::parse::{parse_html, parse_str, HtmlNodeKind, HtmlTree, NodeId, RawHtml};
use crate::PreprocessError;

/// Tag names removed by default, subtree included.
pub const DEFAULT_REMOVED_TAGS: [&str; 7] =
    ["script", "meta", "br", "hr", "link", "input", "style"];

/// Identifies the cleaning rules baked into stored baselines.
pub const PREPROCESS_VERSION: &str = "hdna-pre1";

/// Name given to the synthetic document root.
pub const DOCUMENT_NAME: &str = "document";

/// Set of lowercase tag names to drop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemovalSet(BTreeSet<String>);

impl RemovalSet {
    pub fn empty() -> Self {
        Self(BTreeSet::new())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl Default for RemovalSet {
    fn default() -> Self {
        DEFAULT_REMOVED_TAGS.iter().copied().collect()
    }
}

impl<S: AsRef<str>> FromIterator<S> for RemovalSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(
            iter.into_iter()
                .map(|s| s.as_ref().to_ascii_lowercase())
                .collect(),
        )
    }
}

/// Removes every element named in `removal` together with its subtree.
pub fn remove_tags(tree: &HtmlTree, removal: &RemovalSet) -> HtmlTree {
    tree.retain(|node| match node.element_name() {
        Some(name) => !removal.contains(name),
        None => true,
    })
}

/// Clears the attribute list of every element.
pub fn strip_attributes(mut tree: HtmlTree) -> HtmlTree {
    for id in 0..tree.len() {
        if let HtmlNodeKind::Element { attrs, .. } = &mut tree.node_mut(id).kind {
            attrs.clear();
        }
    }
    tree
}

/// Drops text, comments, doctypes and processing instructions, keeping the
/// element skeleton.
pub fn strip_text(tree: &HtmlTree) -> CleanDocument {
    let mut doc = CleanDocument::new();
    let mut stack: Vec<(NodeId, usize)> = Vec::new();
    for &c in tree.node(HtmlTree::ROOT).children.iter().rev() {
        stack.push((c, CleanDocument::ROOT));
    }
    while let Some((src, parent)) = stack.pop() {
        let node = tree.node(src);
        if let Some(name) = node.element_name() {
            let id = doc.push_child(parent, name);
            for &c in node.children.iter().rev() {
                stack.push((c, id));
            }
        }
    }
    doc
}

/// Full cleaning pipeline with the default removal set.
pub fn preprocess(input: &RawHtml) -> Result<CleanDocument, PreprocessError> {
    let parsed = parse_html(input)?;
    Ok(clean(&parsed))
}

/// Cleaning pipeline over already-decoded text.
pub fn preprocess_str(html: &str) -> CleanDocument {
    clean(&parse_str(html))
}

/// Cleaning pipeline over an already-parsed tree.
pub fn preprocess_tree(parsed: &HtmlTree) -> CleanDocument {
    clean(parsed)
}

fn clean(parsed: &HtmlTree) -> CleanDocument {
    let removed = remove_tags(parsed, &RemovalSet::default());
    strip_text(&strip_attributes(removed))
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct CleanElement {
    name: String,
    children: Vec<usize>,
}

/// Element-only skeleton of a page. Index 0 is the synthetic document node;
/// indices are arena slots, not level-order numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanDocument {
    elements: Vec<CleanElement>,
}

impl Default for CleanDocument {
    fn default() -> Self {
        Self::new()
    }
}

impl CleanDocument {
    pub const ROOT: usize = 0;

    pub fn new() -> Self {
        Self {
            elements: vec![CleanElement {
                name: DOCUMENT_NAME.to_owned(),
                children: Vec::new(),
            }],
        }
    }

    /// Appends an element named `name` (ASCII-lowercased) as the last child of `parent`.
    pub fn push_child(&mut self, parent: usize, name: &str) -> usize {
        let id = self.elements.len();
        self.elements.push(CleanElement {
            name: name.to_ascii_lowercase(),
            children: Vec::new(),
        });
        self.elements[parent].children.push(id);
        id
    }

    pub fn name(&self, id: usize) -> &str {
        &self.elements[id].name
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.elements[id].children
    }

    /// Number of nodes including the document root.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.len() <= 1
    }

    /// Element names other than the root, in arena order.
    pub fn element_names(&self) -> impl Iterator<Item = &str> {
        self.elements[1..].iter().map(|e| e.name.as_str())
    }

    /// Tree isomorphism respecting names and child order.
    pub fn is_isomorphic(&self, other: &CleanDocument) -> bool {
        let mut stack = vec![(Self::ROOT, Self::ROOT)];
        while let Some((a, b)) = stack.pop() {
            let (ea, eb) = (&self.elements[a], &other.elements[b]);
            if ea.name != eb.name || ea.children.len() != eb.children.len() {
                return false;
            }
            stack.extend(ea.children.iter().copied().zip(eb.children.iter().copied()));
        }
        true
    }

    /// The skeleton as a parse tree of bare elements.
    pub fn to_html_tree(&self) -> HtmlTree {
        let mut out = HtmlTree::document();
        let mut stack: Vec<(usize, usize)> = vec![(Self::ROOT, HtmlTree::ROOT)];
        while let Some((src, dst)) = stack.pop() {
            for &c in &self.elements[src].children {
                let id = out.push(
                    dst,
                    HtmlNodeKind::Element {
                        name: self.elements[c].name.clone(),
                        attrs: Vec::new(),
                    },
                );
                stack.push((c, id));
            }
        }
        out
    }

    /// Serializes the skeleton back to HTML markup. A few parse results
    /// cannot be reproduced by markup alone (an `<annotation-xml>` whose
    /// HTML content depended on a stripped attribute, `<option>` nested by
    /// foster parenting), so re-parsing this is not always isomorphic; use
    /// [`CleanDocument::to_html_tree`] for an exact round trip.
    pub fn to_html(&self) -> String {
        enum Step {
            Open(usize),
            Close(usize),
        }
        let mut out = String::new();
        let mut stack: Vec<Step> = self.elements[Self::ROOT]
            .children
            .iter()
            .rev()
            .map(|&c| Step::Open(c))
            .collect();
        while let Some(step) = stack.pop() {
            match step {
                Step::Open(id) => {
                    let el = &self.elements[id];
                    out.push('<');
                    out.push_str(&el.name);
                    out.push('>');
                    if is_void(&el.name) {
                        continue;
                    }
                    stack.push(Step::Close(id));
                    stack.extend(el.children.iter().rev().map(|&c| Step::Open(c)));
                }
                Step::Close(id) => {
                    out.push_str("</");
                    out.push_str(&self.elements[id].name);
                    out.push('>');
                }
            }
        }
        out
    }
}

fn is_void(name: &str) -> bool {
    matches!(
        name,
        "area"
            | "base"
            | "br"
            | "col"
            | "embed"
            | "hr"
            | "img"
            | "input"
            | "keygen"
            | "link"
            | "meta"
            | "param"
            | "source"
            | "track"
            | "wbr"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skeleton(doc: &CleanDocument) -> String {
        doc.to_html()
    }

    fn parsed(html: &str) -> HtmlTree {
        parse_str(html)
    }

    fn body_children(tree: &HtmlTree) -> Vec<String> {
        let html = tree.node(HtmlTree::ROOT).children[0];
        let body = tree.node(html).children[1];
        tree.node(body)
            .children
            .iter()
            .filter_map(|&c| tree.node(c).element_name().map(str::to_owned))
            .collect()
    }

    #[test]
    fn default_set_is_the_seven_tags() {
        let set = RemovalSet::default();
        let names: Vec<_> = set.iter().collect();
        assert_eq!(
            names,
            ["br", "hr", "input", "link", "meta", "script", "style"]
        );
    }

    #[test]
    fn remove_script_keeps_sibling() {
        let tree = remove_tags(&parsed("<script>x</script><p></p>"), &RemovalSet::default());
        assert_eq!(body_children(&tree), ["p"]);
    }

    #[test]
    fn empty_removal_set_is_identity() {
        let tree = parsed("<p></p><br>");
        assert_eq!(remove_tags(&tree, &RemovalSet::empty()), tree);
    }

    #[test]
    fn removal_drops_whole_subtree() {
        // style in body is raw text, so build the subtree by hand.
        let mut tree = HtmlTree::document();
        let div = tree.push(
            HtmlTree::ROOT,
            HtmlNodeKind::Element {
                name: "div".into(),
                attrs: vec![],
            },
        );
        let style = tree.push(
            div,
            HtmlNodeKind::Element {
                name: "style".into(),
                attrs: vec![],
            },
        );
        tree.push(
            style,
            HtmlNodeKind::Element {
                name: "span".into(),
                attrs: vec![],
            },
        );
        let out = remove_tags(&tree, &RemovalSet::default());
        assert_eq!(out.len(), 2);
        assert!(out.node(1).children.is_empty());
        assert_eq!(out.node(1).element_name(), Some("div"));
    }

    #[test]
    fn strip_attributes_clears_everything() {
        let tree = strip_attributes(parsed(
            r#"<div id="x" class="y"><a href="u"><img src="s"></a></div>"#,
        ));
        for node in tree.nodes() {
            if let HtmlNodeKind::Element { attrs, .. } = &node.kind {
                assert!(attrs.is_empty());
            }
        }
        assert_eq!(
            skeleton(&strip_text(&tree)),
            "<html><head></head><body><div><a><img></a></div></body></html>"
        );
    }

    #[test]
    fn strip_attributes_without_attributes_is_identity() {
        let tree = parsed("<div><p></p></div>");
        assert_eq!(strip_attributes(tree.clone()), tree);
    }

    #[test]
    fn strip_text_keeps_inline_elements() {
        let doc = strip_text(&parsed("<p>hello <b>world</b></p>"));
        assert_eq!(
            skeleton(&doc),
            "<html><head></head><body><p><b></b></p></body></html>"
        );
    }

    #[test]
    fn strip_text_drops_comments_and_doctype() {
        let doc = strip_text(&parsed(
            "<!DOCTYPE html><div><!-- c -->text<span></span></div>",
        ));
        assert_eq!(
            skeleton(&doc),
            "<html><head></head><body><div><span></span></div></body></html>"
        );
    }

    #[test]
    fn strip_text_on_empty_element_is_identity() {
        let doc = strip_text(&parsed("<p></p>"));
        assert_eq!(
            skeleton(&doc),
            "<html><head></head><body><p></p></body></html>"
        );
    }

    #[test]
    fn full_pipeline_example() {
        let doc = preprocess_str(
            r#"<html><head><meta charset="utf-8"><title>T</title></head><body><p>x</p></body></html>"#,
        );
        assert_eq!(
            skeleton(&doc),
            "<html><head><title></title></head><body><p></p></body></html>"
        );
    }

    #[test]
    fn br_and_hr_disappear() {
        let doc = preprocess_str("<body><br><hr></body>");
        assert_eq!(skeleton(&doc), "<html><head></head><body></body></html>");
    }

    #[test]
    fn already_clean_skeleton_is_stable() {
        let doc = preprocess_str(
            "<html><head><title></title></head><body><ul><li></li><li></li></ul></body></html>",
        );
        assert!(preprocess_str(&doc.to_html()).is_isomorphic(&doc));
    }

    #[test]
    fn isomorphism_checks_names_and_order() {
        let a = preprocess_str("<div></div><p></p>");
        let b = preprocess_str("<p></p><div></div>");
        assert!(a.is_isomorphic(&a.clone()));
        assert!(!a.is_isomorphic(&b));
    }

    #[test]
    fn push_child_lowercases() {
        let mut doc = CleanDocument::new();
        doc.push_child(CleanDocument::ROOT, "DIV");
        assert_eq!(doc.name(1), "div");
    }
}
