use std::collections::HashSet;

use crate::embed::{cosine, EmbedError, Embedder};
use crate::expand::{ExpansionEntry, ExpansionSet};

use super::stem::wildcard_stem;
use super::{is_bare_word, BooleanQuery, FieldTag, OrGroup, QueryError, TaggedTerm};

fn clean(text: &str) -> String {
    text.replace('"', " ").split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Variants for an entity's own surface: the quoted phrase, the bare word
/// (single-word surfaces only), and the wildcard stem when the stem tables
/// cover the word.
pub fn term_variants(surface: &str) -> Vec<TaggedTerm> {
    let text = clean(surface);
    let Ok(quoted) = TaggedTerm::quoted(text.as_str(), FieldTag::Tiab) else {
        return Vec::new();
    };
    let mut out = vec![quoted];
    if is_bare_word(&text) {
        out.push(TaggedTerm::plain(text.as_str(), FieldTag::Tiab).expect("bare word"));
        if let Some(stem) = wildcard_stem(&text) {
            out.push(TaggedTerm::wildcard(stem, FieldTag::Tiab).expect("alphabetic stem"));
        }
    }
    out
}

/// Variants for an expansion term. Multi-word terms are quoted; single words
/// go bare, and title/abstract words also get their wildcard stem.
pub fn expansion_variants(label: &str, tag: FieldTag) -> Vec<TaggedTerm> {
    let text = clean(label);
    if text.is_empty() {
        return Vec::new();
    }
    if !is_bare_word(&text) {
        return TaggedTerm::quoted(text, tag).into_iter().collect();
    }
    let mut out = vec![TaggedTerm::plain(text.as_str(), tag).expect("bare word")];
    if tag == FieldTag::Tiab {
        if let Some(stem) = wildcard_stem(&text) {
            out.push(TaggedTerm::wildcard(stem, tag).expect("alphabetic stem"));
        }
    }
    out
}

pub(crate) fn group_for(entry: &ExpansionEntry) -> Result<OrGroup, QueryError> {
    let mut seen = HashSet::new();
    let terms: Vec<TaggedTerm> = term_variants(&entry.entity.surface)
        .into_iter()
        .chain(entry.kg_terms.iter().flat_map(|t| expansion_variants(&t.label, t.tag)))
        .chain(entry.mask_terms.iter().flat_map(|t| expansion_variants(t, FieldTag::Tiab)))
        .filter(|t| seen.insert(t.clone()))
        .collect();
    if terms.is_empty() {
        return Err(QueryError::InvalidTerm {
            text: entry.entity.surface.clone(),
            reason: "entity surface yields no searchable term",
        });
    }
    OrGroup::new(terms)
}

pub(crate) fn query_for<'a>(
    entries: impl IntoIterator<Item = &'a ExpansionEntry>,
) -> Result<BooleanQuery, QueryError> {
    let groups = entries
        .into_iter()
        .map(group_for)
        .collect::<Result<Vec<_>, _>>()?;
    if groups.is_empty() {
        return Err(QueryError::EmptyExpansion);
    }
    BooleanQuery::new(groups)
}

/// The strictest query: one OR group per entity, AND across groups.
pub fn build_specific_query(exp: &ExpansionSet) -> Result<BooleanQuery, QueryError> {
    query_for(&exp.entries)
}

/// Maps a cosine in [-1, 1] to a relevance in [0, 1].
pub fn relevance_from_cosine(cos: f64) -> f64 {
    ((cos + 1.0) / 2.0).clamp(0.0, 1.0)
}

/// Scores every entity by the similarity of its surface to the context embedding.
pub fn entity_relevance(exp: &mut ExpansionSet, embedder: &dyn Embedder) -> Result<(), EmbedError> {
    let surfaces: Vec<&str> = exp.entries.iter().map(|e| e.entity.surface.as_str()).collect();
    let vectors = embedder.embed_batch(&surfaces)?;
    let scores = vectors
        .iter()
        .map(|v| cosine(v, &exp.context_embedding).map(relevance_from_cosine))
        .collect::<Result<Vec<_>, _>>()?;
    for (entry, score) in exp.entries.iter_mut().zip(scores) {
        entry.entity.relevance = score;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{HashedBagEmbedder, Vector};
    use crate::expand::KgTerm;
    use crate::extract::{Entity, Origin};
    use crate::query::render;

    fn rendered(terms: &[TaggedTerm]) -> Vec<String> {
        terms.iter().map(ToString::to_string).collect()
    }

    fn entry(surface: &str, kg: &[(&str, FieldTag)], masks: &[&str]) -> ExpansionEntry {
        ExpansionEntry {
            entity: Entity::new(surface, None, Origin::Query),
            kg_terms: kg
                .iter()
                .map(|(l, t)| KgTerm {
                    label: l.to_string(),
                    tag: *t,
                })
                .collect(),
            mask_terms: masks.iter().map(|m| m.to_string()).collect(),
        }
    }

    #[test]
    fn variants_of_single_word() {
        assert_eq!(
            rendered(&term_variants("Gender")),
            vec!["\"Gender\"[tiab]", "Gender[tiab]", "gender*[tiab]"]
        );
        assert!(rendered(&term_variants("surgeries")).contains(&"surgeri*[tiab]".to_string()));
        assert_eq!(rendered(&term_variants("cat")), vec!["\"cat\"[tiab]", "cat[tiab]"]);
    }

    #[test]
    fn variants_of_phrase() {
        assert_eq!(
            rendered(&term_variants("female-to-male transgender")),
            vec!["\"female-to-male transgender\"[tiab]"]
        );
        assert!(term_variants("\"").is_empty());
    }

    #[test]
    fn expansion_variant_forms() {
        assert_eq!(
            rendered(&expansion_variants("female", FieldTag::Tiab)),
            vec!["female[tiab]", "femal*[tiab]"]
        );
        assert_eq!(
            rendered(&expansion_variants("Wound Infection", FieldTag::Mesh)),
            vec!["\"Wound Infection\"[Mesh]"]
        );
        assert_eq!(
            rendered(&expansion_variants("Sutures", FieldTag::Mesh)),
            vec!["Sutures[Mesh]"]
        );
    }

    #[test]
    fn single_entity_query_is_its_variants() {
        let exp = ExpansionSet {
            entries: vec![entry("catgut", &[], &[])],
            context_embedding: Vector::zeros(1),
        };
        assert_eq!(
            render(&build_specific_query(&exp).unwrap()),
            "(\"catgut\"[tiab] OR catgut[tiab])"
        );
    }

    #[test]
    fn expansion_terms_follow_variants_without_duplicates() {
        let exp = ExpansionSet {
            entries: vec![entry(
                "sutures",
                &[("Surgical Equipment", FieldTag::Mesh), ("catgut", FieldTag::Tiab)],
                &["catgut", "Sutures"],
            )],
            context_embedding: Vector::zeros(1),
        };
        assert_eq!(
            render(&build_specific_query(&exp).unwrap()),
            "(\"sutures\"[tiab] OR sutures[tiab] OR sutur*[tiab] OR \"Surgical Equipment\"[Mesh] \
             OR catgut[tiab] OR Sutures[tiab])"
        );
    }

    #[test]
    fn empty_expansion_rejected() {
        let exp = ExpansionSet {
            entries: vec![],
            context_embedding: Vector::zeros(1),
        };
        assert_eq!(build_specific_query(&exp).unwrap_err(), QueryError::EmptyExpansion);
    }

    #[test]
    fn relevance_of_whole_query_is_one() {
        let mut exp = ExpansionSet {
            entries: vec![entry("wound infections", &[], &[])],
            context_embedding: HashedBagEmbedder::embed_text("wound infections"),
        };
        entity_relevance(&mut exp, &HashedBagEmbedder).unwrap();
        assert!((exp.entries[0].entity.relevance - 1.0).abs() < 1e-12);
        assert_eq!(relevance_from_cosine(0.0), 0.5);
    }
}
