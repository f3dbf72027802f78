use std::fs;
use std::path::{Path, PathBuf};

use hdna_core::preprocess::{preprocess_str, preprocess_tree, DEFAULT_REMOVED_TAGS};
use hdna_core::{parse_html, preprocess, CleanDocument, HtmlTree, RawHtml};
use proptest::prelude::*;

fn fixture_dir(sub: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(sub)
}

fn html_files(sub: &str) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(fixture_dir(sub))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "html"))
        .collect();
    files.sort();
    files
}

fn clean_preorder(doc: &CleanDocument) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    let mut stack: Vec<(usize, usize)> = vec![(CleanDocument::ROOT, 0)];
    while let Some((id, depth)) = stack.pop() {
        if id != CleanDocument::ROOT {
            out.push((doc.name(id).to_owned(), depth));
        }
        stack.extend(doc.children(id).iter().rev().map(|&c| (c, depth + 1)));
    }
    out
}

/// Elements of the raw parse in pre-order, skipping removal-set subtrees
/// and renumbering depths as if skipped nodes were gone. Text, comments and
/// doctypes have no children in a parse, so they simply vanish.
fn surviving_preorder(tree: &HtmlTree) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    let mut stack: Vec<(usize, usize)> = tree
        .node(HtmlTree::ROOT)
        .children
        .iter()
        .rev()
        .map(|&c| (c, 1))
        .collect();
    while let Some((id, depth)) = stack.pop() {
        let node = tree.node(id);
        let Some(name) = node.element_name() else {
            continue;
        };
        if DEFAULT_REMOVED_TAGS.contains(&name) {
            continue;
        }
        out.push((name.to_owned(), depth));
        stack.extend(node.children.iter().rev().map(|&c| (c, depth + 1)));
    }
    out
}

/// Skeletons that markup cannot express; see `CleanDocument::to_html`.
const MARKUP_UNSTABLE: [&str; 1] = ["23-mathml.html"];

fn check_invariants(label: &str, raw: &RawHtml) -> CleanDocument {
    let doc = preprocess(raw).unwrap_or_else(|e| panic!("{label}: {e}"));
    for name in doc.element_names() {
        assert!(
            !DEFAULT_REMOVED_TAGS.contains(&name),
            "{label}: removal-set element {name} survived"
        );
        assert!(!name.is_empty(), "{label}: empty element name");
        assert_eq!(
            name,
            name.to_ascii_lowercase(),
            "{label}: name not lowercased"
        );
    }
    let skeleton = doc.to_html();
    assert!(!skeleton.contains('='), "{label}: attribute in skeleton");
    assert!(
        !skeleton.contains("<!"),
        "{label}: comment or doctype in skeleton"
    );

    let parsed = parse_html(raw).unwrap();
    assert_eq!(
        clean_preorder(&doc),
        surviving_preorder(&parsed),
        "{label}: structure or order changed"
    );

    let again = preprocess_tree(&doc.to_html_tree());
    assert_eq!(again, doc, "{label}: not idempotent");
    doc
}

fn markup_round_trips(doc: &CleanDocument) -> bool {
    let again = preprocess_str(&doc.to_html());
    doc.is_isomorphic(&again) && again.to_html() == doc.to_html()
}

#[test]
fn corpus_pages_clean_up() {
    let files = html_files("corpus");
    assert!(files.len() >= 5);
    for path in files {
        let raw = RawHtml::new(fs::read(&path).unwrap());
        let label = path.display().to_string();
        let doc = check_invariants(&label, &raw);
        assert!(markup_round_trips(&doc), "{label}: markup round trip");
        assert!(doc.len() > 30, "{label}: suspiciously small skeleton");
    }
}

#[test]
fn adversarial_snippets_clean_up() {
    let files = html_files("adversarial");
    assert!(files.len() >= 20);
    for path in files {
        let raw = RawHtml::new(fs::read(&path).unwrap());
        let doc = check_invariants(&path.display().to_string(), &raw);
        let name = path.file_name().unwrap().to_str().unwrap();
        assert_eq!(
            markup_round_trips(&doc),
            !MARKUP_UNSTABLE.contains(&name),
            "{name}"
        );
    }
}

#[test]
fn removal_fixture_keeps_only_structure() {
    let raw = RawHtml::new(
        fs::read(fixture_dir("adversarial").join("07-all-removal-tags.html")).unwrap(),
    );
    let doc = preprocess(&raw).unwrap();
    let parsed = parse_html(&raw).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for node in parsed.nodes() {
        if let Some(name) = node.element_name() {
            seen.insert(name.to_owned());
        }
    }
    for tag in DEFAULT_REMOVED_TAGS {
        assert!(seen.contains(tag), "fixture should exercise {tag}");
    }
    assert!(doc
        .element_names()
        .all(|n| !DEFAULT_REMOVED_TAGS.contains(&n)));
}

#[test]
fn legacy_charset_page_decodes() {
    let raw = RawHtml::new(fs::read(fixture_dir("corpus").join("portal.html")).unwrap());
    let doc = preprocess(&raw).unwrap();
    assert!(doc.element_names().any(|n| n == "table"));
    assert!(doc.element_names().all(|n| n == n.to_ascii_lowercase()));
}

fn soup_token() -> impl Strategy<Value = String> {
    let tags = prop::sample::select(vec![
        "div", "p", "span", "a", "b", "i", "table", "tr", "td", "ul", "li", "script", "style",
        "meta", "br", "hr", "link", "input", "form", "select", "option", "svg", "math", "title",
        "template", "textarea", "h1", "nobr", "em", "section",
    ]);
    prop_oneof![
        tags.clone().prop_map(|t| format!("<{t}>")),
        tags.clone().prop_map(|t| format!("</{t}>")),
        tags.prop_map(|t| format!("<{} class=x id='y'>", t.to_uppercase())),
        Just("<!-- c -->".to_owned()),
        Just("<![CDATA[x]]>".to_owned()),
        Just("<!DOCTYPE html>".to_owned()),
        Just("text & more".to_owned()),
        Just("<".to_owned()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn tag_soup_keeps_invariants(tokens in prop::collection::vec(soup_token(), 0..60)) {
        let html = tokens.concat();
        let doc = check_invariants(&html, &RawHtml::from(html.as_str()));
        // the re-parsed skeleton is itself a valid input
        let once = preprocess_str(&doc.to_html());
        check_invariants(&html, &RawHtml::from(once.to_html().as_str()));
    }
}
