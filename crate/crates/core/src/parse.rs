//! Byte decoding and error-tolerant HTML parsing into an owned arena tree.
//!
//! Parsing follows the WHATWG tree-construction algorithm (via `html5ever`),
//! so implied `html`/`head`/`body` elements, misnested markup and stray end
//! tags are recovered exactly the way a browser would recover them.

use std::borrow::Cow;
use std::cell::{Ref, RefCell};
use std::collections::HashSet;

use encoding_rs::{Encoding, UTF_16BE, UTF_16LE, UTF_8};
use html5ever::tendril::{StrTendril, TendrilSink};
use html5ever::tree_builder::{ElementFlags, NodeOrText, QuirksMode, TreeSink};
use html5ever::{Attribute, ParseOpts, QualName};
use regex::bytes::Regex;
use std::sync::OnceLock;

use crate::PreprocessError;

/// Index of a node inside an [`HtmlTree`].
pub type NodeId = usize;

/// Raw page bytes plus the charset label announced out-of-band (HTTP header, CLI flag).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawHtml {
    pub bytes: Vec<u8>,
    pub declared_charset: Option<String>,
}

impl RawHtml {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        Self {
            bytes: bytes.into(),
            declared_charset: None,
        }
    }

    pub fn with_charset(mut self, label: impl Into<String>) -> Self {
        self.declared_charset = Some(label.into());
        self
    }
}

impl From<&str> for RawHtml {
    fn from(s: &str) -> Self {
        RawHtml::new(s.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HtmlNodeKind {
    Document,
    Element {
        name: String,
        attrs: Vec<(String, String)>,
    },
    Text(String),
    Comment(String),
    Doctype(String),
    ProcessingInstruction {
        target: String,
        data: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HtmlNode {
    pub kind: HtmlNodeKind,
    pub children: Vec<NodeId>,
}

impl HtmlNode {
    pub fn element_name(&self) -> Option<&str> {
        match &self.kind {
            HtmlNodeKind::Element { name, .. } => Some(name),
            _ => None,
        }
    }
}

/// A parsed document, before any cleaning. Node 0 is the document node.
///
/// Nodes unreachable from the root never appear: every operation that drops
/// nodes rebuilds the arena.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HtmlTree {
    nodes: Vec<HtmlNode>,
}

impl HtmlTree {
    pub const ROOT: NodeId = 0;

    pub fn document() -> Self {
        Self {
            nodes: vec![HtmlNode {
                kind: HtmlNodeKind::Document,
                children: Vec::new(),
            }],
        }
    }

    pub fn push(&mut self, parent: NodeId, kind: HtmlNodeKind) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(HtmlNode {
            kind,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn node(&self, id: NodeId) -> &HtmlNode {
        &self.nodes[id]
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut HtmlNode {
        &mut self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &HtmlNode> {
        self.nodes.iter()
    }

    /// Copies the subtree reachable from the root, skipping every node for
    /// which `keep` is false together with everything below it.
    pub(crate) fn retain(&self, keep: impl Fn(&HtmlNode) -> bool) -> HtmlTree {
        let mut out = HtmlTree::document();
        out.nodes[Self::ROOT].kind = self.nodes[Self::ROOT].kind.clone();
        // (source id, destination parent)
        let mut stack: Vec<(NodeId, NodeId)> = Vec::new();
        for &c in self.nodes[Self::ROOT].children.iter().rev() {
            stack.push((c, Self::ROOT));
        }
        while let Some((src, dst_parent)) = stack.pop() {
            let node = &self.nodes[src];
            if !keep(node) {
                continue;
            }
            let dst = out.push(dst_parent, node.kind.clone());
            for &c in node.children.iter().rev() {
                stack.push((c, dst));
            }
        }
        out
    }

    /// Pre-order walk from the root, yielding `(id, depth)`.
    pub fn preorder(&self) -> Vec<(NodeId, usize)> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(Self::ROOT, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            out.push((id, depth));
            for &c in self.nodes[id].children.iter().rev() {
                stack.push((c, depth + 1));
            }
        }
        out
    }
}

fn meta_charset_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?i)<meta\b[^>]*?\bcharset\s*=\s*["']?\s*([A-Za-z0-9_.:\-]+)"#)
            .expect("static regex")
    })
}

/// Picks the encoding for `input`: byte-order mark, then the declared label,
/// then a `<meta charset>` prescan of the first 1024 bytes, then UTF-8.
pub fn decode(input: &RawHtml) -> Result<String, PreprocessError> {
    let bytes = input.bytes.as_slice();
    if let Some((enc, bom_len)) = Encoding::for_bom(bytes) {
        let (text, _) = enc.decode_without_bom_handling(&bytes[bom_len..]);
        return Ok(text.into_owned());
    }

    if let Some(label) = input.declared_charset.as_deref() {
        match Encoding::for_label(label.trim().as_bytes()) {
            Some(enc) => {
                let (text, _) = enc.decode_without_bom_handling(bytes);
                return Ok(text.into_owned());
            }
            None => {
                // An unknown label is only recoverable when the bytes are already UTF-8.
                return match std::str::from_utf8(bytes) {
                    Ok(s) => {
                        log::warn!("unknown charset label {label:?}, decoding as utf-8");
                        Ok(s.to_owned())
                    }
                    Err(_) => Err(PreprocessError::CharsetUndecodable {
                        label: label.to_owned(),
                    }),
                };
            }
        }
    }

    let head = &bytes[..bytes.len().min(1024)];
    let sniffed = meta_charset_re()
        .captures(head)
        .and_then(|c| Encoding::for_label(c.get(1)?.as_bytes()))
        .map(|enc| {
            // A meta-declared utf-16 cannot be right if we could read the meta as ASCII.
            if enc == UTF_16LE || enc == UTF_16BE {
                UTF_8
            } else {
                enc
            }
        });
    let enc = sniffed.unwrap_or(UTF_8);
    let (text, _) = enc.decode_without_bom_handling(bytes);
    Ok(text.into_owned())
}

/// Decodes and parses `input` with the WHATWG tree-construction algorithm.
pub fn parse_html(input: &RawHtml) -> Result<HtmlTree, PreprocessError> {
    let text = decode(input)?;
    Ok(parse_str(&text))
}

pub(crate) fn parse_str(text: &str) -> HtmlTree {
    let sink = ArenaSink::default();
    let sink = html5ever::parse_document(sink, ParseOpts::default()).one(StrTendril::from(text));
    sink.into_tree()
}

#[derive(Debug)]
enum SinkData {
    Document,
    Fragment,
    Element {
        name: QualName,
        attrs: Vec<Attribute>,
        template_contents: Option<usize>,
        mathml_annotation_xml_integration_point: bool,
    },
    Text(StrTendril),
    Comment(StrTendril),
    Doctype(StrTendril),
    Pi {
        target: StrTendril,
        data: StrTendril,
    },
}

#[derive(Debug)]
struct SinkNode {
    data: SinkData,
    parent: Option<usize>,
    children: Vec<usize>,
}

/// Tree sink that builds nodes into a flat vector; handles are indices.
struct ArenaSink {
    nodes: RefCell<Vec<SinkNode>>,
}

impl Default for ArenaSink {
    fn default() -> Self {
        Self {
            nodes: RefCell::new(vec![SinkNode {
                data: SinkData::Document,
                parent: None,
                children: Vec::new(),
            }]),
        }
    }
}

impl ArenaSink {
    fn new_node(&self, data: SinkData) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(SinkNode {
            data,
            parent: None,
            children: Vec::new(),
        });
        nodes.len() - 1
    }

    fn detach(nodes: &mut [SinkNode], target: usize) {
        if let Some(parent) = nodes[target].parent.take() {
            nodes[parent].children.retain(|&c| c != target);
        }
    }

    /// Merges text into `at` if it is a text node; returns whether it did.
    fn merge_text(nodes: &mut [SinkNode], at: usize, text: &StrTendril) -> bool {
        if let SinkData::Text(existing) = &mut nodes[at].data {
            existing.push_tendril(text);
            true
        } else {
            false
        }
    }

    fn insert_child(&self, parent: usize, index: usize, child: NodeOrText<usize>) {
        let mut nodes = self.nodes.borrow_mut();
        let child = match child {
            NodeOrText::AppendText(text) => {
                if index > 0 {
                    let prev = nodes[parent].children[index - 1];
                    if Self::merge_text(&mut nodes, prev, &text) {
                        return;
                    }
                }
                nodes.push(SinkNode {
                    data: SinkData::Text(text),
                    parent: None,
                    children: Vec::new(),
                });
                nodes.len() - 1
            }
            NodeOrText::AppendNode(id) => id,
        };
        // Detaching may shift the insertion index if the child was an earlier sibling.
        let mut index = index;
        if nodes[child].parent == Some(parent) {
            if let Some(pos) = nodes[parent].children.iter().position(|&c| c == child) {
                if pos < index {
                    index -= 1;
                }
            }
        }
        Self::detach(&mut nodes, child);
        nodes[child].parent = Some(parent);
        nodes[parent].children.insert(index, child);
    }

    fn into_tree(self) -> HtmlTree {
        let nodes = self.nodes.into_inner();
        let mut out = HtmlTree::document();
        let mut stack: Vec<(usize, NodeId)> = Vec::new();
        for &c in nodes[0].children.iter().rev() {
            stack.push((c, HtmlTree::ROOT));
        }
        while let Some((src, dst_parent)) = stack.pop() {
            let node = &nodes[src];
            let kind = match &node.data {
                SinkData::Document | SinkData::Fragment => continue,
                SinkData::Element { name, attrs, .. } => HtmlNodeKind::Element {
                    name: name.local.to_ascii_lowercase().to_string(),
                    attrs: attrs
                        .iter()
                        .map(|a| (a.name.local.to_string(), a.value.to_string()))
                        .collect(),
                },
                SinkData::Text(t) => HtmlNodeKind::Text(t.to_string()),
                SinkData::Comment(t) => HtmlNodeKind::Comment(t.to_string()),
                SinkData::Doctype(t) => HtmlNodeKind::Doctype(t.to_string()),
                SinkData::Pi { target, data } => HtmlNodeKind::ProcessingInstruction {
                    target: target.to_string(),
                    data: data.to_string(),
                },
            };
            let dst = out.push(dst_parent, kind);
            // Template contents live in a detached fragment; surface them as children.
            let mut kids: Vec<usize> = node.children.clone();
            if let SinkData::Element {
                template_contents: Some(frag),
                ..
            } = node.data
            {
                kids.extend(nodes[frag].children.iter().copied());
            }
            for &c in kids.iter().rev() {
                stack.push((c, dst));
            }
        }
        out
    }
}

impl TreeSink for ArenaSink {
    type Handle = usize;
    type Output = Self;
    type ElemName<'a> = Ref<'a, QualName>;

    fn finish(self) -> Self {
        self
    }

    fn parse_error(&self, _msg: Cow<'static, str>) {}

    fn get_document(&self) -> usize {
        0
    }

    fn elem_name<'a>(&'a self, target: &'a usize) -> Ref<'a, QualName> {
        Ref::map(self.nodes.borrow(), |nodes| match &nodes[*target].data {
            SinkData::Element { name, .. } => name,
            _ => panic!("not an element"),
        })
    }

    fn create_element(&self, name: QualName, attrs: Vec<Attribute>, flags: ElementFlags) -> usize {
        let template_contents = flags.template.then(|| self.new_node(SinkData::Fragment));
        self.new_node(SinkData::Element {
            name,
            attrs,
            template_contents,
            mathml_annotation_xml_integration_point: flags.mathml_annotation_xml_integration_point,
        })
    }

    fn create_comment(&self, text: StrTendril) -> usize {
        self.new_node(SinkData::Comment(text))
    }

    fn create_pi(&self, target: StrTendril, data: StrTendril) -> usize {
        self.new_node(SinkData::Pi { target, data })
    }

    fn append(&self, parent: &usize, child: NodeOrText<usize>) {
        let len = self.nodes.borrow()[*parent].children.len();
        self.insert_child(*parent, len, child);
    }

    fn append_based_on_parent_node(
        &self,
        element: &usize,
        prev_element: &usize,
        child: NodeOrText<usize>,
    ) {
        let has_parent = self.nodes.borrow()[*element].parent.is_some();
        if has_parent {
            self.append_before_sibling(element, child);
        } else {
            self.append(prev_element, child);
        }
    }

    fn append_doctype_to_document(
        &self,
        name: StrTendril,
        _public_id: StrTendril,
        _system_id: StrTendril,
    ) {
        let id = self.new_node(SinkData::Doctype(name));
        self.append(&0, NodeOrText::AppendNode(id));
    }

    fn get_template_contents(&self, target: &usize) -> usize {
        match &self.nodes.borrow()[*target].data {
            SinkData::Element {
                template_contents: Some(frag),
                ..
            } => *frag,
            _ => panic!("not a template element"),
        }
    }

    fn same_node(&self, x: &usize, y: &usize) -> bool {
        x == y
    }

    fn set_quirks_mode(&self, _mode: QuirksMode) {}

    fn append_before_sibling(&self, sibling: &usize, new_node: NodeOrText<usize>) {
        let (parent, index) = {
            let nodes = self.nodes.borrow();
            let parent = nodes[*sibling]
                .parent
                .expect("append_before_sibling on a detached node");
            let index = nodes[parent]
                .children
                .iter()
                .position(|c| c == sibling)
                .expect("sibling listed under its parent");
            (parent, index)
        };
        self.insert_child(parent, index, new_node);
    }

    fn add_attrs_if_missing(&self, target: &usize, attrs: Vec<Attribute>) {
        let mut nodes = self.nodes.borrow_mut();
        if let SinkData::Element {
            attrs: existing, ..
        } = &mut nodes[*target].data
        {
            let names: HashSet<QualName> = existing.iter().map(|a| a.name.clone()).collect();
            existing.extend(attrs.into_iter().filter(|a| !names.contains(&a.name)));
        }
    }

    fn remove_from_parent(&self, target: &usize) {
        Self::detach(&mut self.nodes.borrow_mut(), *target);
    }

    fn reparent_children(&self, node: &usize, new_parent: &usize) {
        let mut nodes = self.nodes.borrow_mut();
        let children = std::mem::take(&mut nodes[*node].children);
        for &c in &children {
            nodes[c].parent = Some(*new_parent);
        }
        nodes[*new_parent].children.extend(children);
    }

    fn is_mathml_annotation_xml_integration_point(&self, handle: &usize) -> bool {
        matches!(
            self.nodes.borrow()[*handle].data,
            SinkData::Element {
                mathml_annotation_xml_integration_point: true,
                ..
            }
        )
    }
}
