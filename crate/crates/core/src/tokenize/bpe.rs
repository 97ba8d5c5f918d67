//! Byte-level BPE in the GPT-2 convention: text is pre-split on the GPT-2
//! word-boundary pattern, bytes are mapped through a 256-entry printable
//! shim, and merges are applied lowest rank first. Decoding a token
//! sequence reproduces the input bytes exactly.

use std::collections::HashMap;
use std::path::Path;

use super::{TokenLevel, TokenSequence, TokenizeError};

/// The reversible byte -> printable-char map. Printable latin bytes map to
/// themselves; the rest are shifted past U+0100 in byte order.
pub fn byte_shim_table() -> [char; 256] {
    let mut keep = [false; 256];
    keep[b'!' as usize..=b'~' as usize].fill(true);
    keep[0xA1..=0xAC].fill(true);
    keep[0xAE..=0xFF].fill(true);
    let mut table = ['\0'; 256];
    let mut shifted = 0u32;
    for b in 0..256 {
        table[b] = if keep[b] {
            char::from_u32(b as u32).unwrap()
        } else {
            shifted += 1;
            char::from_u32(256 + shifted - 1).unwrap()
        };
    }
    table
}

/// A loaded subword model: vocabulary ids, ordered merges, and the byte
/// shim. Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct MergeTable {
    vocab: HashMap<String, u32>,
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
    byte_to_char: [char; 256],
    char_to_byte: HashMap<char, u8>,
}

impl MergeTable {
    /// Merge-free table over the 256 byte symbols. Used when no subword
    /// model directory is supplied: every pre-token becomes its encoded
    /// byte characters.
    pub fn byte_level() -> Self {
        let table = byte_shim_table();
        let vocab = table
            .iter()
            .enumerate()
            .map(|(b, &c)| (c.to_string(), b as u32))
            .collect();
        Self::assemble(vocab, Vec::new()).expect("byte-level table is well-formed")
    }

    pub fn from_parts(
        vocab: HashMap<String, u32>,
        merges: Vec<(String, String)>,
    ) -> Result<Self, TokenizeError> {
        Self::validate_merges(&merges)?;
        Self::assemble(vocab, merges)
    }

    /// Loads `vocab.json`/`encoder.json` plus `merges.txt`/`vocab.bpe`
    /// from a directory, the stock GPT-2 file formats.
    pub fn load_dir(dir: &Path) -> Result<Self, TokenizeError> {
        let vocab_path = ["vocab.json", "encoder.json"]
            .iter()
            .map(|f| dir.join(f))
            .find(|p| p.exists())
            .ok_or_else(|| TokenizeError::Io {
                path: dir.join("vocab.json").display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no vocabulary file"),
            })?;
        let merges_path = ["merges.txt", "vocab.bpe"]
            .iter()
            .map(|f| dir.join(f))
            .find(|p| p.exists())
            .ok_or_else(|| TokenizeError::Io {
                path: dir.join("merges.txt").display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no merges file"),
            })?;

        let vocab_text = std::fs::read_to_string(&vocab_path).map_err(|e| TokenizeError::Io {
            path: vocab_path.display().to_string(),
            source: e,
        })?;
        let vocab: HashMap<String, u32> =
            serde_json::from_str(&vocab_text).map_err(|e| TokenizeError::VocabJson {
                path: vocab_path.display().to_string(),
                source: e,
            })?;

        let merges_text = std::fs::read_to_string(&merges_path).map_err(|e| TokenizeError::Io {
            path: merges_path.display().to_string(),
            source: e,
        })?;
        let merges = parse_merges(&merges_text)?;
        Self::from_parts(vocab, merges)
    }

    fn assemble(
        vocab: HashMap<String, u32>,
        merges: Vec<(String, String)>,
    ) -> Result<Self, TokenizeError> {
        let mut seen_ids = std::collections::HashSet::new();
        for &id in vocab.values() {
            if !seen_ids.insert(id) {
                return Err(TokenizeError::DuplicateVocabId { id });
            }
        }
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(rank, pair)| (pair.clone(), rank))
            .collect();
        let byte_to_char = byte_shim_table();
        let char_to_byte = byte_to_char
            .iter()
            .enumerate()
            .map(|(b, &c)| (c, b as u8))
            .collect();
        Ok(Self {
            vocab,
            merges,
            ranks,
            byte_to_char,
            char_to_byte,
        })
    }

    /// Every merge side must be a single byte-shim character or the result
    /// of an earlier merge.
    fn validate_merges(merges: &[(String, String)]) -> Result<(), TokenizeError> {
        let mut known: std::collections::HashSet<String> =
            byte_shim_table().iter().map(|c| c.to_string()).collect();
        let mut seen_pairs = std::collections::HashSet::new();
        for (idx, (a, b)) in merges.iter().enumerate() {
            let line = idx + 2; // first file line is the header
            if !seen_pairs.insert((a.clone(), b.clone())) {
                return Err(TokenizeError::DuplicateMergePair { line });
            }
            for symbol in [a, b] {
                if !known.contains(symbol.as_str()) {
                    return Err(TokenizeError::UnknownMergeSymbol {
                        line,
                        symbol: symbol.clone(),
                    });
                }
            }
            known.insert(format!("{a}{b}"));
        }
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn merge_count(&self) -> usize {
        self.merges.len()
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.vocab.get(token).copied()
    }

    /// Byte-level BPE encode. Decoding the result reproduces `text`'s
    /// bytes exactly.
    pub fn encode(&self, text: &str) -> TokenSequence {
        let mut tokens = Vec::new();
        // pre-tokens repeat heavily inside a prompt; memoize per call so
        // the table itself stays immutable
        let mut cache: HashMap<&str, Vec<String>> = HashMap::new();
        for piece in pre_tokenize(text) {
            if let Some(hit) = cache.get(piece) {
                tokens.extend(hit.iter().cloned());
                continue;
            }
            let merged = self.bpe_piece(piece);
            tokens.extend(merged.iter().cloned());
            cache.insert(piece, merged);
        }
        TokenSequence {
            tokens,
            level: TokenLevel::Subword,
        }
    }

    fn bpe_piece(&self, piece: &str) -> Vec<String> {
        let mut word: Vec<String> = piece
            .bytes()
            .map(|b| self.byte_to_char[b as usize].to_string())
            .collect();
        while word.len() > 1 {
            let mut best: Option<(usize, usize)> = None; // (rank, position)
            for i in 0..word.len() - 1 {
                // ranks are keyed by owned pairs; probe without cloning
                if let Some(&rank) = self
                    .ranks
                    .get(&(word[i].clone(), word[i + 1].clone()))
                {
                    if best.is_none_or(|(r, _)| rank < r) {
                        best = Some((rank, i));
                    }
                }
            }
            let Some((rank, _)) = best else { break };
            let (first, second) = self.merges[rank].clone();
            let mut next = Vec::with_capacity(word.len());
            let mut i = 0;
            while i < word.len() {
                if i + 1 < word.len() && word[i] == first && word[i + 1] == second {
                    next.push(format!("{first}{second}"));
                    i += 2;
                } else {
                    next.push(std::mem::take(&mut word[i]));
                    i += 1;
                }
            }
            word = next;
        }
        word
    }

    /// Inverse of [`encode`](Self::encode): maps token characters back
    /// through the byte shim.
    pub fn decode(&self, tokens: &[String]) -> Result<Vec<u8>, TokenizeError> {
        let mut bytes = Vec::new();
        for token in tokens {
            for ch in token.chars() {
                let b = self
                    .char_to_byte
                    .get(&ch)
                    .ok_or(TokenizeError::DecodeUnknownChar { ch })?;
                bytes.push(*b);
            }
        }
        Ok(bytes)
    }
}

fn parse_merges(text: &str) -> Result<Vec<(String, String)>, TokenizeError> {
    let mut merges = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 && line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(TokenizeError::MalformedMergeLine {
                line: idx + 1,
                content: line.to_string(),
            });
        };
        merges.push((a.to_string(), b.to_string()));
    }
    Ok(merges)
}

/// GPT-2 pre-tokenization: contractions, optional-space + letter/digit/
/// punctuation runs, and whitespace runs that leave their final character
/// to lead the following word.
fn pre_tokenize(text: &str) -> Vec<&str> {
    const CONTRACTIONS: [&str; 7] = ["'s", "'t", "'re", "'ve", "'m", "'ll", "'d"];
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let byte_at = |i: usize| if i < n { chars[i].0 } else { text.len() };

    let mut pieces = Vec::new();
    let mut i = 0;
    while i < n {
        let (pos, c) = chars[i];

        if c == '\'' {
            if let Some(len) = CONTRACTIONS
                .iter()
                .find(|p| text[pos..].starts_with(**p))
                .map(|p| p.chars().count())
            {
                pieces.push(&text[pos..byte_at(i + len)]);
                i += len;
                continue;
            }
        }

        // ` ?` + a letter, digit or punctuation run
        let (run_start, has_space) =
            if c == ' ' && i + 1 < n && !chars[i + 1].1.is_whitespace() {
                (i + 1, true)
            } else {
                (i, false)
            };
        let head = chars[run_start].1;
        if !head.is_whitespace() && (has_space || !c.is_whitespace()) {
            let class: fn(char) -> bool = if head.is_alphabetic() {
                |ch| ch.is_alphabetic()
            } else if head.is_numeric() {
                |ch| ch.is_numeric()
            } else {
                |ch| !ch.is_whitespace() && !ch.is_alphabetic() && !ch.is_numeric()
            };
            // contraction alternatives only apply at a match start, so a
            // punctuation run consumes interior apostrophes greedily
            let mut end = run_start;
            while end < n && class(chars[end].1) {
                end += 1;
            }
            pieces.push(&text[pos..byte_at(end)]);
            i = end;
            continue;
        }

        // whitespace: a run followed by a word donates its last character
        let mut end = i;
        while end < n && chars[end].1.is_whitespace() {
            end += 1;
        }
        if end == n {
            pieces.push(&text[pos..byte_at(n)]);
            i = n;
        } else if end - i >= 2 {
            pieces.push(&text[pos..byte_at(end - 1)]);
            i = end - 1;
        } else {
            // single non-space whitespace char before a word
            pieces.push(&text[pos..byte_at(i + 1)]);
            i += 1;
        }
    }
    pieces
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(pieces: &[&str]) -> Vec<String> {
        pieces.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn byte_shim_is_a_bijection() {
        let table = byte_shim_table();
        let mut seen = std::collections::HashSet::new();
        for &c in &table {
            assert!(seen.insert(c));
        }
        assert_eq!(table[b' ' as usize], '\u{120}'); // space -> Ġ
        assert_eq!(table[b'a' as usize], 'a');
        assert_eq!(table[0], '\u{100}');
    }

    #[test]
    fn pre_tokenize_words_and_spaces() {
        assert_eq!(pre_tokenize("hello world"), vec!["hello", " world"]);
        assert_eq!(pre_tokenize("a  b"), vec!["a", " ", " b"]);
        assert_eq!(pre_tokenize("a\nb"), vec!["a", "\n", "b"]);
        assert_eq!(pre_tokenize("trail  "), vec!["trail", "  "]);
    }

    #[test]
    fn pre_tokenize_contractions_and_punct() {
        assert_eq!(pre_tokenize("don't"), vec!["don", "'t"]);
        assert_eq!(pre_tokenize("it's fine."), vec!["it", "'s", " fine", "."]);
        assert_eq!(pre_tokenize("x=42!"), vec!["x", "=", "42", "!"]);
        // a contraction only starts a piece; inside a punctuation run the
        // apostrophe is consumed greedily
        assert_eq!(pre_tokenize("!!!'s"), vec!["!!!'", "s"]);
        assert_eq!(pre_tokenize("'S"), vec!["'", "S"]);
    }

    #[test]
    fn pre_tokenize_digit_letter_boundary() {
        assert_eq!(pre_tokenize("cue0 here"), vec!["cue", "0", " here"]);
    }

    // frozen against the reference pre-tokenization pattern
    // 's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
    #[test]
    fn pre_tokenize_reference_battery() {
        let cases: &[(&str, &[&str])] = &[
            ("trail  ", &["trail", "  "]),
            ("  leading", &[" ", " leading"]),
            ("tab\tsep", &["tab", "\t", "sep"]),
            ("a   b   c", &["a", "  ", " b", "  ", " c"]),
            ("mixed123abc", &["mixed", "123", "abc"]),
            ("naïve café", &["naïve", " café"]),
            ("ABC'll do", &["ABC", "'ll", " do"]),
            ("1,234.56", &["1", ",", "234", ".", "56"]),
            ("end.", &["end", "."]),
            ("...", &["..."]),
            ("… dots", &["…", " dots"]),
            ("new\n\nlines", &["new", "\n", "\n", "lines"]),
            ("quote 'word' here", &["quote", " '", "word", "'", " here"]),
            ("x'd", &["x", "'d"]),
            ("I'm", &["I", "'m"]),
            ("I'M", &["I", "'", "M"]),
            ("can't won't", &["can", "'t", " won", "'t"]),
            (" ", &[" "]),
            ("", &[]),
            ("\n", &["\n"]),
            ("word\u{a0}nbsp", &["word", "\u{a0}", "nbsp"]),
            ("multi — dash", &["multi", " —", " dash"]),
            ("под поезд", &["под", " поезд"]),
            ("日本語テスト", &["日本語テスト"]),
        ];
        for (text, expected) in cases {
            assert_eq!(&pre_tokenize(text), expected, "input {text:?}");
        }
    }

    #[test]
    fn empty_merges_yield_byte_symbols() {
        let table = MergeTable::byte_level();
        let seq = table.encode("hi there");
        assert_eq!(seq.tokens.len(), "hi there".len());
        assert_eq!(seq.level, TokenLevel::Subword);
        assert_eq!(seq.tokens[2], "\u{120}"); // the space
    }

    #[test]
    fn vocab_token_is_a_fixed_point() {
        // "ab" reachable through one merge; encoding "ab" gives one token
        let mut vocab = HashMap::new();
        vocab.insert("a".to_string(), 0);
        vocab.insert("b".to_string(), 1);
        vocab.insert("ab".to_string(), 2);
        let table =
            MergeTable::from_parts(vocab, vec![("a".into(), "b".into())]).unwrap();
        let seq = table.encode("ab");
        assert_eq!(seq.tokens, strs(&["ab"]));
        assert_eq!(table.token_id("ab"), Some(2));
    }

    // hand-executed merge loop: ["a","b","c"] --rank0--> ["ab","c"]
    // --rank1--> ["abc"]
    #[test]
    fn toy_two_merge_table() {
        let table = MergeTable::from_parts(
            HashMap::new(),
            vec![("a".into(), "b".into()), ("ab".into(), "c".into())],
        )
        .unwrap();
        assert_eq!(table.encode("abc").tokens, strs(&["abc"]));
        // rank order matters: "bc" is never formed
        assert_eq!(table.encode("bca").tokens, strs(&["b", "c", "a"]));
    }

    #[test]
    fn merge_rank_order_not_position_order() {
        // lower-ranked "b c" fires before "a b" even though "a b" comes first
        let table = MergeTable::from_parts(
            HashMap::new(),
            vec![("b".into(), "c".into()), ("a".into(), "bc".into())],
        )
        .unwrap();
        assert_eq!(table.encode("abc").tokens, strs(&["abc"]));
    }

    #[test]
    fn unknown_merge_symbol_rejected() {
        let err = MergeTable::from_parts(
            HashMap::new(),
            vec![("ab".into(), "c".into())],
        )
        .unwrap_err();
        assert!(matches!(err, TokenizeError::UnknownMergeSymbol { symbol, .. } if symbol == "ab"));
    }

    #[test]
    fn duplicate_vocab_id_rejected() {
        let mut vocab = HashMap::new();
        vocab.insert("a".to_string(), 7);
        vocab.insert("b".to_string(), 7);
        let err = MergeTable::from_parts(vocab, Vec::new()).unwrap_err();
        assert!(matches!(err, TokenizeError::DuplicateVocabId { id: 7 }));
    }

    #[test]
    fn merges_file_parsing() {
        let merges = parse_merges("#version: 0.2\na b\nab c\n").unwrap();
        assert_eq!(merges.len(), 2);
        assert!(parse_merges("#v\na b c\n").is_err());
    }

    #[test]
    fn load_dir_accepts_both_stock_filename_pairs() {
        for (vocab_name, merges_name) in
            [("vocab.json", "merges.txt"), ("encoder.json", "vocab.bpe")]
        {
            let dir = tempfile::tempdir().unwrap();
            std::fs::write(
                dir.path().join(vocab_name),
                r#"{"h": 0, "e": 1, "he": 2, "Ġ": 3}"#,
            )
            .unwrap();
            std::fs::write(dir.path().join(merges_name), "#version: 0.2\nh e\n").unwrap();
            let table = MergeTable::load_dir(dir.path()).unwrap();
            assert_eq!(table.merge_count(), 1);
            assert_eq!(table.vocab_size(), 4);
            assert_eq!(table.token_id("he"), Some(2));
            assert_eq!(table.encode("he he").tokens, strs(&["he", "\u{120}", "he"]));
        }
    }

    #[test]
    fn load_dir_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(MergeTable::load_dir(dir.path()).is_err());
    }

    #[test]
    fn roundtrip_examples() {
        let table = MergeTable::from_parts(
            HashMap::new(),
            vec![("h".into(), "e".into()), ("l".into(), "l".into())],
        )
        .unwrap();
        for text in ["hello world", "don't\tstop", "naïve — café", "", "  "] {
            let seq = table.encode(text);
            let bytes = table.decode(&seq.tokens).unwrap();
            assert_eq!(bytes, text.as_bytes());
        }
    }
}
