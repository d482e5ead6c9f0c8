//! FASTA metadata extraction, protein descriptions and rarity ranking.
//!
//! Three header grammars are recognized, tried in order:
//!
//! * RCSB entry download: `>3PYK_1|Chains A, B|Carbonic anhydrase 2|Homo sapiens (9606)`
//! * RCSB seqres: `>101m_A mol:protein length:154  MYOGLOBIN`, optionally
//!   followed by a bracketed organism such as `[Physeter catodon]`
//! * anything else: the first token is the ID (a trailing `_X` names the
//!   chain), the rest is the molecule name and the organism is `unknown`

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNKNOWN_ORGANISM: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProteinRecord {
    pub protein_id: String,
    pub chains: Vec<String>,
    pub molecule_name: String,
    pub organism: String,
    /// Total residues across all chains.
    pub sequence_length: usize,
    pub description: String,
    /// The FASTA lines this record was parsed from.
    #[serde(skip)]
    pub fasta_text: String,
}

impl ProteinRecord {
    pub fn is_multi_chain(&self) -> bool {
        self.chains.len() > 1
    }

    pub fn category(&self) -> String {
        category_label(&self.molecule_name, &self.organism)
    }
}

struct Header {
    id: String,
    chains: Vec<String>,
    molecule: String,
    organism: String,
}

fn rcsb_entry_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^([A-Za-z0-9]{4})_[0-9]+\|Chains?\s+([^|]+)\|([^|]*)\|(.*)$").unwrap()
    })
}

fn seqres_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^([A-Za-z0-9]{4})_(\S+)\s+mol:\S+\s+length:[0-9]+\s*(.*)$").unwrap()
    })
}

fn auth_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[auth [^\]]*\]").unwrap())
}

fn taxid_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\s*\(\s*[0-9]+\s*\)\s*$").unwrap())
}

fn bracket_organism_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(.*?)\s*\[([^\[\]]+)\]\s*$").unwrap())
}

fn parse_header(line: &str, fallback_ordinal: usize) -> Result<Header> {
    let body = line.trim_start_matches('>').trim();
    if body.is_empty() {
        return Err(Error::MalformedHeader(line.to_owned()));
    }

    if let Some(c) = rcsb_entry_re().captures(body) {
        let chains: Vec<String> = auth_re()
            .replace_all(&c[2], "")
            .split(',')
            .map(|s| s.trim().to_owned())
            .filter(|s| !s.is_empty())
            .collect();
        if chains.is_empty() {
            return Err(Error::MalformedHeader(line.to_owned()));
        }
        return Ok(Header {
            id: c[1].to_ascii_uppercase(),
            chains,
            molecule: c[3].trim().to_owned(),
            organism: taxid_re().replace(c[4].trim(), "").into_owned(),
        });
    }

    if let Some(c) = seqres_re().captures(body) {
        let rest = c[3].trim();
        let (molecule, organism) = match bracket_organism_re().captures(rest) {
            Some(b) => (b[1].trim().to_owned(), b[2].trim().to_owned()),
            None => (rest.to_owned(), UNKNOWN_ORGANISM.to_owned()),
        };
        return Ok(Header {
            id: c[1].to_ascii_uppercase(),
            chains: vec![c[2].to_owned()],
            molecule,
            organism,
        });
    }

    let (token, rest) = match body.split_once(char::is_whitespace) {
        Some((t, r)) => (t, r.trim()),
        None => (body, ""),
    };
    let (id, chain) = match token.rsplit_once('_') {
        Some((id, chain)) if !id.is_empty() && !chain.is_empty() => (id.to_owned(), chain.to_owned()),
        _ => (token.to_owned(), chain_letter(fallback_ordinal)),
    };
    Ok(Header {
        id,
        chains: vec![chain],
        molecule: rest.to_owned(),
        organism: UNKNOWN_ORGANISM.to_owned(),
    })
}

fn chain_letter(ordinal: usize) -> String {
    let mut n = ordinal;
    let mut s = Vec::new();
    loop {
        s.push(b'A' + (n % 26) as u8);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).unwrap()
}

#[derive(Default)]
struct Builder {
    id: String,
    chains: Vec<String>,
    molecules: Vec<String>,
    organisms: Vec<String>,
    sequence_length: usize,
    fasta_text: String,
    headers_seen: usize,
}

fn push_distinct(list: &mut Vec<String>, value: &str) {
    if !value.is_empty() && !list.iter().any(|v| v == value) {
        list.push(value.to_owned());
    }
}

impl Builder {
    fn finish(self) -> ProteinRecord {
        let mut record = ProteinRecord {
            protein_id: self.id,
            chains: self.chains,
            molecule_name: self.molecules.join(", "),
            organism: if self.organisms.is_empty() {
                UNKNOWN_ORGANISM.to_owned()
            } else {
                self.organisms.join(", ")
            },
            sequence_length: self.sequence_length,
            description: String::new(),
            fasta_text: self.fasta_text,
        };
        record.description = describe_protein(&record);
        record
    }
}

/// Parses FASTA content into one record per protein ID, in first-seen order.
///
/// Headers sharing an ID are merged: their chains are appended and every
/// chain contributes its sequence length. An entity header listing several
/// chains counts its sequence once per chain.
pub fn parse_fasta(content: &str) -> Result<Vec<ProteinRecord>> {
    let mut builders: Vec<Builder> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    // (builder index, chain multiplicity) of the header owning the current sequence lines.
    let mut current: Option<(usize, usize)> = None;

    for line in content.lines() {
        let trimmed = line.trim_end();
        if let Some(stripped) = trimmed.strip_prefix('>') {
            let ordinal_hint = stripped
                .split_whitespace()
                .next()
                .and_then(|t| by_id.get(t))
                .map(|&i| builders[i].headers_seen)
                .unwrap_or(0);
            let header = parse_header(trimmed, ordinal_hint)?;
            let idx = *by_id.entry(header.id.clone()).or_insert_with(|| {
                builders.push(Builder {
                    id: header.id.clone(),
                    ..Default::default()
                });
                builders.len() - 1
            });
            let b = &mut builders[idx];
            b.headers_seen += 1;
            let multiplicity = header.chains.len();
            for chain in &header.chains {
                if !b.chains.contains(chain) {
                    b.chains.push(chain.clone());
                }
            }
            push_distinct(&mut b.molecules, &header.molecule);
            push_distinct(&mut b.organisms, &header.organism);
            b.fasta_text.push_str(trimmed);
            b.fasta_text.push('\n');
            current = Some((idx, multiplicity));
        } else if let Some((idx, multiplicity)) = current {
            let residues = trimmed.chars().filter(|c| !c.is_whitespace()).count();
            let b = &mut builders[idx];
            b.sequence_length += residues * multiplicity;
            if !trimmed.trim().is_empty() {
                b.fasta_text.push_str(trimmed.trim());
                b.fasta_text.push('\n');
            }
        }
    }

    if builders.is_empty() {
        return Err(Error::NoRecords);
    }
    Ok(builders.into_iter().map(Builder::finish).collect())
}

/// Renders the fixed natural-language description of a protein.
pub fn describe_protein(record: &ProteinRecord) -> String {
    let id = &record.protein_id;
    format!(
        "The protein structure {id} has a sequence length of {n} amino acids. \
         Here is more information: The protein structure {id} involves the following chains: {chains}. \
         The protein is named {name} and is derived from the organism {organism}.",
        n = record.sequence_length,
        chains = record.chains.join(", "),
        name = record.molecule_name,
        organism = record.organism,
    )
}

fn clean_name(s: &str) -> String {
    static PAREN_NUM: OnceLock<Regex> = OnceLock::new();
    let re = PAREN_NUM.get_or_init(|| Regex::new(r"\(\s*[0-9]+\s*\)").unwrap());
    let lower = s.to_lowercase();
    re.replace_all(&lower, " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Cleaned `"molecule, organism"` category used for rarity ranking.
pub fn category_label(molecule: &str, organism: &str) -> String {
    format!("{}, {}", clean_name(molecule), clean_name(organism))
}

const EMPTY_CATEGORY: &str = ", ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RarityLabel {
    Rare,
    Popular,
    Unlabeled,
}

impl RarityLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RarityLabel::Rare => "rare",
            RarityLabel::Popular => "popular",
            RarityLabel::Unlabeled => "unlabeled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryEntry {
    pub label: String,
    pub count: usize,
    /// Member protein IDs, sorted.
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RarityRow {
    pub protein_id: String,
    pub category: String,
    pub count: usize,
    pub label: RarityLabel,
}

#[derive(Debug, Clone)]
pub struct RarityTable {
    /// Categories ascending by (count, label): rarest first.
    pub categories: Vec<CategoryEntry>,
    labels: BTreeMap<String, (String, RarityLabel)>,
}

impl RarityTable {
    pub fn label_of(&self, protein_id: &str) -> Option<RarityLabel> {
        self.labels.get(protein_id).map(|(_, l)| *l)
    }

    pub fn ids_with(&self, label: RarityLabel) -> Vec<String> {
        self.labels
            .iter()
            .filter(|(_, (_, l))| *l == label)
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// One row per protein, rarest category first, members by ID; proteins
    /// without a usable category come last.
    pub fn rows(&self) -> Vec<RarityRow> {
        let mut rows = Vec::with_capacity(self.labels.len());
        let mut placed = HashSet::new();
        for cat in &self.categories {
            for id in &cat.members {
                let (_, label) = &self.labels[id];
                rows.push(RarityRow {
                    protein_id: id.clone(),
                    category: cat.label.clone(),
                    count: cat.count,
                    label: *label,
                });
                placed.insert(id.as_str());
            }
        }
        for (id, (category, label)) in &self.labels {
            if !placed.contains(id.as_str()) {
                rows.push(RarityRow {
                    protein_id: id.clone(),
                    category: category.clone(),
                    count: 0,
                    label: *label,
                });
            }
        }
        rows
    }
}

pub const DEFAULT_RARITY_TOP_N: usize = 100;

/// Counts categories and labels members of the `top_n` rarest categories
/// `Rare` and of the `top_n` most frequent `Popular`. Rare wins when the two
/// ranges overlap. Proteins whose category is empty stay `Unlabeled` and are
/// not counted.
pub fn rank_rarity(records: &[ProteinRecord], top_n: usize) -> Result<RarityTable> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut by_label: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut labels = BTreeMap::new();
    for r in records {
        let category = r.category();
        if labels
            .insert(
                r.protein_id.clone(),
                (category.clone(), RarityLabel::Unlabeled),
            )
            .is_some()
        {
            return Err(Error::DuplicateId(r.protein_id.clone()));
        }
        if category != EMPTY_CATEGORY {
            by_label.entry(category).or_default().push(r.protein_id.clone());
        }
    }

    let mut categories: Vec<CategoryEntry> = by_label
        .into_iter()
        .map(|(label, mut members)| {
            members.sort();
            CategoryEntry {
                label,
                count: members.len(),
                members,
            }
        })
        .collect();
    categories.sort_by(|a, b| a.count.cmp(&b.count).then_with(|| a.label.cmp(&b.label)));

    let n = categories.len();
    let popular_from = n.saturating_sub(top_n);
    for (rank, cat) in categories.iter().enumerate() {
        let label = if rank < top_n {
            RarityLabel::Rare
        } else if rank >= popular_from {
            RarityLabel::Popular
        } else {
            continue;
        };
        for id in &cat.members {
            labels.get_mut(id).unwrap().1 = label;
        }
    }
    Ok(RarityTable { categories, labels })
}

/// System and user messages for an external summarizer of multi-chain entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummarizerPrompt {
    pub system: String,
    pub user: String,
}

pub fn summarizer_prompt(record: &ProteinRecord) -> SummarizerPrompt {
    let id = &record.protein_id;
    SummarizerPrompt {
        system: "You are a biologist with expertise in protein sequence analysis. \
                 Your task is to summarize complex protein sequence data into two or \
                 three sentences that highlight key features such as molecule type, \
                 chains, structural motifs, organism, etc."
            .to_owned(),
        user: format!(
            "Summarize the following protein knowledge, start with the sentence: \
             'The protein structure {id} has a sequence length of: {n} amino acids.'\n\
             Here is more information about {id}: \n{fasta}",
            n = record.sequence_length,
            fasta = record.fasta_text,
        ),
    }
}

/// Produces the text description of a protein.
pub trait Summarizer {
    fn summarize(&self, record: &ProteinRecord) -> Result<String>;
}

/// The deterministic template; the default summarizer.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateSummarizer;

impl Summarizer for TemplateSummarizer {
    fn summarize(&self, record: &ProteinRecord) -> Result<String> {
        Ok(describe_protein(record))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, chains: &[&str], name: &str, organism: &str, len: usize) -> ProteinRecord {
        ProteinRecord {
            protein_id: id.into(),
            chains: chains.iter().map(|c| c.to_string()).collect(),
            molecule_name: name.into(),
            organism: organism.into(),
            sequence_length: len,
            description: String::new(),
            fasta_text: String::new(),
        }
    }

    #[test]
    fn single_chain_rcsb_entry() {
        let fasta = ">3PYK_1|Chain A|Carbonic anhydrase|Homo sapiens (9606)\nMSHHWGYGKH\nNGPEHWHKDF\n";
        let recs = parse_fasta(fasta).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.protein_id, "3PYK");
        assert_eq!(r.chains, vec!["A"]);
        assert_eq!(r.molecule_name, "Carbonic anhydrase");
        assert_eq!(r.organism, "Homo sapiens");
        assert_eq!(r.sequence_length, 20);
    }

    #[test]
    fn chains_merge_and_sum() {
        let fasta = ">XXXX_A mol:protein length:10  KINASE\nAAAAAAAAAA\n>XXXX_B mol:protein length:12  KINASE\nCCCCCC CCCCCC\n";
        let recs = parse_fasta(fasta).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].chains, vec!["A", "B"]);
        assert_eq!(recs[0].sequence_length, 22);
        assert_eq!(recs[0].organism, UNKNOWN_ORGANISM);
    }

    #[test]
    fn entity_with_several_chains_counts_each() {
        let fasta = ">1ABC_1|Chains A, B[auth C]|Hemoglobin|Homo sapiens (9606)\nMVLS\n";
        let r = &parse_fasta(fasta).unwrap()[0];
        assert_eq!(r.chains, vec!["A", "B"]);
        assert_eq!(r.sequence_length, 8);
    }

    #[test]
    fn seqres_bracket_organism() {
        let fasta = ">101m_A mol:protein length:3  MYOGLOBIN [Physeter catodon]\nVLS\n";
        let r = &parse_fasta(fasta).unwrap()[0];
        assert_eq!(r.protein_id, "101M");
        assert_eq!(r.molecule_name, "MYOGLOBIN");
        assert_eq!(r.organism, "Physeter catodon");
    }

    #[test]
    fn fallback_header() {
        let fasta = ">myprot some free text\nAC\n>myprot more\nDEF\n";
        let r = &parse_fasta(fasta).unwrap()[0];
        assert_eq!(r.protein_id, "myprot");
        assert_eq!(r.chains, vec!["A", "B"]);
        assert_eq!(r.molecule_name, "some free text, more");
        assert_eq!(r.organism, UNKNOWN_ORGANISM);
        assert_eq!(r.sequence_length, 5);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_fasta("ACGT\n"), Err(Error::NoRecords)));
        assert!(matches!(parse_fasta(""), Err(Error::NoRecords)));
        assert!(matches!(parse_fasta(">   \nACGT\n"), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn description_template() {
        let r = record("P1", &["A"], "Lysozyme", "Gallus gallus", 129);
        assert_eq!(
            describe_protein(&r),
            "The protein structure P1 has a sequence length of 129 amino acids. Here is more \
             information: The protein structure P1 involves the following chains: A. The protein \
             is named Lysozyme and is derived from the organism Gallus gallus."
        );
        let r = record("P2", &["A", "B", "C"], "X", "Y", 3);
        assert!(describe_protein(&r).contains("chains: A, B, C."));
    }

    #[test]
    fn category_cleaning() {
        assert_eq!(
            category_label("Carbonic anhydrase (2)", "Homo sapiens"),
            "carbonic anhydrase, homo sapiens"
        );
        assert_eq!(category_label("X", "Y"), "x, y");
        assert_eq!(category_label("  A  B ", "C"), "a b, c");
        assert_eq!(category_label("", ""), ", ");
        assert_eq!(category_label("Kinase", "Mus musculus (10090)"), "kinase, mus musculus");
    }

    #[test]
    fn rarity_degenerate_single_category() {
        let recs: Vec<_> = ["A", "B", "C"]
            .iter()
            .map(|id| record(id, &["A"], "m", "o", 1))
            .collect();
        let t = rank_rarity(&recs, 1).unwrap();
        for id in ["A", "B", "C"] {
            assert_eq!(t.label_of(id), Some(RarityLabel::Rare));
        }
    }

    #[test]
    fn rarity_two_categories() {
        let mut recs = vec![record("R", &["A"], "c1", "o", 1)];
        for i in 0..5 {
            recs.push(record(&format!("P{i}"), &["A"], "c2", "o", 1));
        }
        let t = rank_rarity(&recs, 1).unwrap();
        assert_eq!(t.label_of("R"), Some(RarityLabel::Rare));
        assert_eq!(t.ids_with(RarityLabel::Popular).len(), 5);
        assert_eq!(t.categories[0].count, 1);
    }

    #[test]
    fn rarity_unlabeled_middle_and_empty() {
        let mut recs = Vec::new();
        for (c, n) in [("a", 1), ("b", 2), ("c", 3)] {
            for i in 0..n {
                recs.push(record(&format!("{c}{i}"), &["A"], c, "o", 1));
            }
        }
        recs.push(record("E", &["A"], "", "", 1));
        let t = rank_rarity(&recs, 1).unwrap();
        assert_eq!(t.label_of("a0"), Some(RarityLabel::Rare));
        assert_eq!(t.label_of("b1"), Some(RarityLabel::Unlabeled));
        assert_eq!(t.label_of("c2"), Some(RarityLabel::Popular));
        assert_eq!(t.label_of("E"), Some(RarityLabel::Unlabeled));
        let total: usize = t.categories.iter().map(|c| c.count).sum();
        assert_eq!(total, 6);
        assert_eq!(t.rows().len(), 7);
        assert!(matches!(rank_rarity(&[], 1), Err(Error::EmptyInput)));
    }

    #[test]
    fn chain_letters() {
        assert_eq!(chain_letter(0), "A");
        assert_eq!(chain_letter(25), "Z");
        assert_eq!(chain_letter(26), "AA");
    }

    #[test]
    fn prompt_mentions_id_and_length() {
        let recs = parse_fasta(">1ABC_1|Chains A, B|Hemoglobin|Homo sapiens (9606)\nMVLS\n").unwrap();
        let p = summarizer_prompt(&recs[0]);
        assert!(p.user.contains("'The protein structure 1ABC has a sequence length of: 8 amino acids.'"));
        assert!(p.user.ends_with("MVLS\n"));
    }
}
